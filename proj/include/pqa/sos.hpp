#pragma once

#include "pqa/registry.hpp"
#include "pqa/term.hpp"

#include <json.hpp>

#include <string>
#include <unordered_map>
#include <vector>

namespace pqa {

Action tau_label();
bool is_tau(const Action &a);

struct PBranch {
    Term term;  // dynamic
    Rational weight;
};

struct ATransition {
    Action label;
    Action origin;  // label before abstraction
    Term target;    // nullptr stands for successful termination
    QStatePtr post;
    bool dead = false;  // projection with vanishing probability
};

// Interns density matrices up to a tolerance so equal states share one pointer.
class StatePool {
public:
    explicit StatePool(double eps = kStateEps) : eps_(eps) {}
    QStatePtr intern(const QStatePtr &s);
    std::size_t size() const { return count_; }

private:
    double eps_;
    std::size_t count_ = 0;
    std::unordered_map<std::size_t, std::vector<QStatePtr>> buckets_;
};

class Sos {
public:
    explicit Sos(const Registry &reg, double zero_eps = 1e-12) : reg_(reg), zero_eps_(zero_eps) {}

    // Probabilistic step of a static term; branches merged and ordered.
    const std::vector<PBranch> &prob_step(const Term &t);
    // Action step of a dynamic term; includes transitions marked dead.
    std::vector<ATransition> action_step(const Term &t, const QStatePtr &rho);
    // Labels a dynamic term can perform, ignoring the quantum state.
    std::vector<Action> initial_labels(const Term &t);
    // Union over all probabilistic resolutions of a static term.
    std::vector<Action> static_labels(const Term &t);

    StatePool &pool() { return pool_; }
    const Registry &registry() const { return reg_; }

private:
    const Registry &reg_;
    double zero_eps_;
    StatePool pool_;
    std::unordered_map<Term, std::vector<PBranch>, TermHash, TermEq> dist_cache_;
    std::unordered_map<Term, std::vector<PBranch>, TermHash, TermEq> rec_cache_;
    std::unordered_map<Term, std::vector<Action>, TermHash, TermEq> static_label_cache_;
    struct EffectKey {
        const QState *rho;
        std::string key;
        bool operator==(const EffectKey &o) const { return rho == o.rho && key == o.key; }
    };
    struct EffectKeyHash {
        std::size_t operator()(const EffectKey &k) const {
            return std::hash<const void *>{}(k.rho) ^ std::hash<std::string>{}(k.key);
        }
    };
    struct EffectVal {
        QStatePtr keep;
        QStatePtr post;
        bool dead;
    };
    std::unordered_map<EffectKey, EffectVal, EffectKeyHash> effect_cache_;
    int unfold_depth_ = 0;

    std::vector<PBranch> dist(const Term &t);
    void steps(const Term &t, const QStatePtr &rho, bool effects, std::vector<ATransition> &out);
    ATransition atom_step(const Action &a, const QStatePtr &rho, bool effects);
};

// x || y with the parallel operands flattened and sorted.
Term canonical_par(const Term &x, const Term &y);

enum class NodeKind { Prob, Action, Nil, Trunc };

struct GNode {
    NodeKind kind;
    Term term;
    QStatePtr rho;
    int depth = 0;
};

struct PEdge {
    int to;
    Rational weight;    // effective, after pruning renormalisation
    Rational declared;  // as produced by the probabilistic step
};

struct AEdge {
    int to;
    Action label;
    Action origin;
    QStatePtr post;
};

struct PrunedEdge {
    int from;
    Rational declared;
    std::vector<Action> labels;
};

struct Diagnostic {
    std::string kind;
    std::string message;
    int node = -1;
};

struct ConfigGraph {
    RegistryPtr reg;
    std::vector<GNode> nodes;
    std::vector<std::vector<PEdge>> pout;
    std::vector<std::vector<AEdge>> aout;
    std::vector<PrunedEdge> pruned;
    std::vector<Diagnostic> diags;
    int root = 0;
    int nil = -1;
    int trunc = -1;
    int depth_bound = 0;

    std::size_t size() const { return nodes.size(); }
    std::size_t edge_count() const;
    bool truncated() const { return trunc >= 0; }
};

struct BuildOptions {
    int depth = 50;
    bool dedup = true;
    double eps = kStateEps;
    std::size_t max_nodes = 4'000'000;
};

ConfigGraph build_graph(const Term &t, RegistryPtr reg, const BuildOptions &opts = {}, QStatePtr init = nullptr);

// Declared branch mass per projection against tr(P rho); one warning per mismatch.
std::vector<Diagnostic> check_measurement_consistency(const ConfigGraph &g, double eps = kStateEps);

std::string to_dot(const ConfigGraph &g);
nlohmann::json to_json(const ConfigGraph &g, bool with_states = false);
std::string to_text(const ConfigGraph &g);

}  // namespace pqa
