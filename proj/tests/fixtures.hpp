#pragma once

#include "pqa/parser.hpp"
#include "pqa/registry.hpp"

#include <string>

namespace fixtures {

// One public qubit q in |0>; classical a b c s with gamma(a,b)=c and a<b; H, X; P0/P1 in family Z.
inline pqa::RegistryPtr basic() {
    static const pqa::RegistryPtr r =
        std::make_shared<const pqa::Registry>(pqa::Registry::load(std::string(PQA_MODELS_DIR) + "/basic.json"));
    return r;
}

inline pqa::Term term(const std::string &src, const pqa::Registry &reg = *basic()) {
    pqa::Term t = pqa::parse_term(src);
    pqa::elaborate(t, reg);
    return t;
}

}  // namespace fixtures
