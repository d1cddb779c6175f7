#pragma once

#include "pqa/bisim.hpp"
#include "pqa/registry.hpp"
#include "pqa/term.hpp"

#include <string>
#include <vector>

namespace pqa {

struct RewriteStep {
    std::string axiom;
    std::vector<int> path;
    Term before;  // subterm at path
    Term after;

    // "<axiom-id> @ <path> : <before> => <after>"
    std::string text() const;
};

struct NormalizeResult {
    Term term;
    std::vector<RewriteStep> trace;
};

// Innermost rewriting to a basic term; recursion-free closed input only.
NormalizeResult normalize(const Term &t, const Registry &reg, std::size_t max_steps = 1'000'000);

// One axiom, oriented left to right, applied at the subterm under `path`.
Term apply_axiom(const Term &t, const std::string &axiom, const std::vector<int> &path, const Registry &reg);

const std::vector<std::string> &axiom_ids();
bool axiom_known(const std::string &id);
// Axioms sound only up to branching bisimilarity.
bool axiom_branching_only(const std::string &id);

// Both sides are closed static terms; compared by graphs at the given depth.
BisimResult check_soundness(const Term &lhs, const Term &rhs, RegistryPtr reg, int depth = 64, bool branching = false);

// x has exactly one probabilistic resolution, read off syntactically.
bool deterministic_shape(const Term &x);

// Terms where abstraction meets alternative composition under probabilistic choice.
bool mixes_abstraction_with_choice(const Term &t);

// Replays a trace from `start`, checking every recorded subterm; returns the final term.
Term replay(const Term &start, const std::vector<RewriteStep> &trace, const Registry &reg);

}  // namespace pqa
