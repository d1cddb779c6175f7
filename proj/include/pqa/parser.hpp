#pragma once

#include "pqa/term.hpp"

#include <string>

namespace pqa {

// Parses the textual term syntax; throws Error with line/column on failure.
Term parse_term(const std::string &text);
Term parse_term_file(const std::string &path);
std::shared_ptr<const ActionSet> parse_action_set(const std::string &text);

}  // namespace pqa
