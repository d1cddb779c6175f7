#pragma once

#include "pqa/sos.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace pqa {

struct BisimResult {
    bool equivalent = false;
    std::size_t classes = 0;
    std::vector<std::string> witness;  // empty when equivalent
    double seconds = 0;

    nlohmann::json to_json() const;
};

// Disjoint union of two graphs with states grouped into tolerance classes.
struct UnionGraph {
    struct Edge {
        int to;
        int label;  // interned label key
        int post;   // state class of the post-state
    };
    struct WEdge {
        int to;
        Rational w;
    };
    std::vector<NodeKind> kind;
    std::vector<int> state;  // state class, -1 for markers
    std::vector<std::vector<WEdge>> pout;
    std::vector<std::vector<Edge>> aout;
    std::vector<std::string> labels;
    int tau = -1;
    int root1 = 0, root2 = 0;
    std::size_t n1 = 0;

    static UnionGraph build(const ConfigGraph &a, const ConfigGraph &b, double eps, bool public_only);
    std::string describe(int v, const ConfigGraph &a, const ConfigGraph &b) const;
};

BisimResult strong_bisim(const ConfigGraph &a, const ConfigGraph &b, double eps = kStateEps);
BisimResult branching_bisim(const ConfigGraph &a, const ConfigGraph &b, double eps = kStateEps);

// Final partition of the strong refinement over the disjoint union, for testing.
std::vector<int> strong_partition(const ConfigGraph &a, const ConfigGraph &b, double eps = kStateEps);

}  // namespace pqa
