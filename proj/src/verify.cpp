#include "pqa/error.hpp"
#include "pqa/protocols.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <unordered_set>

namespace pqa {

BisimResult verify_external_behavior(const ProtocolModel &m, int depth, ConfigGraph *system_graph) {
    if (depth < 1)
        throw Error(ErrorCode::OutOfRange, "depth must be positive");
    BuildOptions o;
    o.depth = depth;
    ConfigGraph g = build_graph(m.system, m.reg, o);
    ConfigGraph s = build_graph(m.spec, m.reg, o);
    BisimResult r = branching_bisim(g, s);
    if (system_graph)
        *system_graph = std::move(g);
    return r;
}

std::vector<RoundPath> enumerate_rounds(const ConfigGraph &g, const Action &output, bool every_path,
                                        std::size_t limit) {
    std::vector<RoundPath> out;
    std::vector<Action> origins;
    std::unordered_set<int> on_path;
    auto emit = [&](const Rational &w, QStatePtr st, bool dead) {
        if (out.size() >= limit)
            throw Error(ErrorCode::OutOfRange, "more than " + std::to_string(limit) + " round paths");
        out.push_back({origins, w, std::move(st), dead});
    };
    std::function<void(int, const Rational &)> visit = [&](int v, const Rational &w) {
        const GNode &nd = g.nodes[static_cast<std::size_t>(v)];
        if (nd.kind == NodeKind::Nil || nd.kind == NodeKind::Trunc || on_path.count(v)) {
            emit(w, nd.rho, true);
            return;
        }
        on_path.insert(v);
        if (nd.kind == NodeKind::Prob) {
            for (const auto &e : g.pout[static_cast<std::size_t>(v)])
                visit(e.to, w * e.weight);
        } else {
            const auto &es = g.aout[static_cast<std::size_t>(v)];
            if (es.empty())
                emit(w, nd.rho, true);
            for (const auto &e : es) {
                origins.push_back(e.origin);
                if (e.label == output)
                    emit(w, e.post, false);
                else
                    visit(e.to, w);
                origins.pop_back();
                if (!every_path)
                    break;
            }
        }
        on_path.erase(v);
    };
    visit(g.root, Rational(1));
    return out;
}

bool VerifyReport::all_pass() const {
    for (const auto &c : checks)
        if (!c.pass)
            return false;
    return true;
}

nlohmann::json VerifyReport::to_json() const {
    nlohmann::json cs = nlohmann::json::array();
    for (const auto &c : checks)
        cs.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    return {{"protocol", protocol}, {"n", n},       {"depth", depth},
            {"seed", seed},         {"checks", cs}, {"pass", all_pass()}};
}

namespace {

const Action kOutput{"send_B", {0}, Mark::Plain};

// Index vector of the first origin with this name, if any.
const std::vector<int> *find_origin(const RoundPath &p, const std::string &name) {
    for (const auto &a : p.origins)
        if (a.name == name)
            return &a.idx;
    return nullptr;
}

std::string join_idx(const std::vector<int> &v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

}  // namespace

Check check_teleport_fidelity(const ConfigGraph &g, const CMat &input, double tol) {
    Check c{"fidelity", true, {}};
    auto paths = enumerate_rounds(g, kOutput, true);
    std::size_t outputs = 0;
    for (const auto &p : paths) {
        if (p.deadlock)
            continue;
        ++outputs;
        QState bob = reduced(*p.out_state, {"q2"});
        QState want{bob.regs, input};
        if (!state_eq(bob, want, tol)) {
            const auto *m = find_origin(p, "M");
            c.pass = false;
            c.detail = "Bob's register differs from the input after outcome " + (m ? join_idx(*m) : std::string("?"));
            return c;
        }
    }
    if (outputs == 0) {
        c.pass = false;
        c.detail = "no path reaches the output";
        return c;
    }
    c.detail = std::to_string(outputs) + " output paths match the input";
    return c;
}

Check check_bb84_keys(const ConfigGraph &g, int n) {
    Check c{"key_agreement", true, {}};
    auto paths = enumerate_rounds(g, kOutput, true);
    std::size_t checked = 0;
    for (const auto &p : paths) {
        if (p.deadlock)
            continue;
        const auto *ba = find_origin(p, "RandBa");
        const auto *ka = find_origin(p, "RandKa");
        const auto *bb = find_origin(p, "RandBb");
        const auto *mb = find_origin(p, "M");
        if (!ba || !ka || !bb || !mb) {
            c.pass = false;
            c.detail = "a round misses one of the random-bit or measurement steps";
            return c;
        }
        int kb = (*mb)[1];
        for (int j = 0; j < n; ++j)
            if (bit_of((*ba)[0], j, n) == bit_of((*bb)[0], j, n) && bit_of((*ka)[0], j, n) != bit_of(kb, j, n)) {
                c.pass = false;
                c.detail = "bases agree at bit " + std::to_string(j) + " but keys differ (Ba=" +
                           std::to_string((*ba)[0]) + " Bb=" + std::to_string((*bb)[0]) +
                           " Ka=" + std::to_string((*ka)[0]) + " Kb=" + std::to_string(kb) + ")";
                return c;
            }
        ++checked;
    }
    c.pass = checked > 0;
    c.detail = std::to_string(checked) + " paths checked";
    return c;
}

Check check_basis_weights(const ConfigGraph &g, int n, const std::vector<std::string> &families) {
    Check c{"basis_weights", true, {}};
    int N = 1 << n;
    std::map<std::string, int> seen;
    for (std::size_t p = 0; p < g.nodes.size(); ++p) {
        if (g.nodes[p].kind != NodeKind::Prob)
            continue;
        std::map<std::string, std::map<int, Rational>> by_family;
        for (const auto &e : g.pout[p]) {
            const auto &es = g.aout[static_cast<std::size_t>(e.to)];
            if (es.size() != 1)
                continue;
            const Action &o = es[0].origin;
            for (const auto &f : families)
                if (o.name == f)
                    by_family[f][o.idx[0]] += e.weight;
        }
        for (const auto &[f, ws] : by_family) {
            ++seen[f];
            if (static_cast<int>(ws.size()) != N) {
                c.pass = false;
                c.detail = f + " offers " + std::to_string(ws.size()) + " outcomes instead of " + std::to_string(N);
                return c;
            }
            for (int j = 0; j < n; ++j) {
                Rational one = 0;
                for (const auto &[i, w] : ws) {
                    if (w != Rational(1, N)) {
                        c.pass = false;
                        c.detail = f + "(" + std::to_string(i) + ") has weight " + rational_str(w);
                        return c;
                    }
                    if (bit_of(i, j, n))
                        one += w;
                }
                if (one != Rational(1, 2)) {
                    c.pass = false;
                    c.detail = f + " bit " + std::to_string(j) + " is 1 with probability " + rational_str(one);
                    return c;
                }
            }
        }
    }
    for (const auto &f : families)
        if (!seen.count(f)) {
            c.pass = false;
            c.detail = "no probabilistic state chooses " + f;
            return c;
        }
    for (const auto &[f, k] : seen)
        c.detail += (c.detail.empty() ? "" : ", ") + f + " at " + std::to_string(k) + " states";
    return c;
}

Check check_basis_pairs(const ConfigGraph &g, int n) {
    Check c{"basis_pairs", true, {}};
    std::set<std::pair<int, int>> pairs;
    for (const auto &p : enumerate_rounds(g, kOutput, true)) {
        const auto *ba = find_origin(p, "RandBa");
        const auto *bb = find_origin(p, "RandBb");
        if (ba && bb && !p.deadlock)
            pairs.insert({(*ba)[0], (*bb)[0]});
    }
    std::size_t want = std::size_t(1) << (2 * n);
    c.pass = pairs.size() == want;
    c.detail = std::to_string(pairs.size()) + " of " + std::to_string(want) + " basis pairs reached";
    return c;
}

Check check_e91_correlation(const ConfigGraph &g, int n) {
    Check c{"correlation", true, {}};
    Rational total = 0, agree = 0;
    for (const auto &p : enumerate_rounds(g, kOutput, false)) {
        total += p.weight;
        if (p.deadlock)
            continue;
        const auto *ba = find_origin(p, "RandBa");
        const auto *bb = find_origin(p, "RandBb");
        const auto *ma = find_origin(p, "MA");
        const auto *mb = find_origin(p, "MB");
        if (!ba || !bb || !ma || !mb)
            continue;
        bool ok = true;
        for (int j = 0; j < n; ++j)
            if (bit_of((*ba)[0], j, n) == bit_of((*bb)[0], j, n) && bit_of((*ma)[1], j, n) != bit_of((*mb)[1], j, n))
                ok = false;
        if (ok)
            agree += p.weight;
    }
    Rational prob = total == 0 ? Rational(0) : agree / total;
    c.pass = total == 1 && prob == 1;
    c.detail = "matched-basis agreement probability " + rational_str(prob) + " over mass " + rational_str(total);
    return c;
}

Check check_closed(const ConfigGraph &g) {
    Check c{"closed", !g.truncated(), {}};
    c.detail = std::to_string(g.size()) + " nodes" + (g.truncated() ? ", depth bound reached" : "");
    return c;
}

Check check_deadlock_free(const ConfigGraph &g, const Action &output) {
    Check c{"deadlock_free", true, {}};
    for (const auto &p : enumerate_rounds(g, output, true))
        if (p.deadlock) {
            c.pass = false;
            std::string trail;
            for (const auto &a : p.origins)
                trail += (trail.empty() ? "" : " ") + a.key();
            c.detail = "round stops after: " + trail;
            return c;
        }
    c.detail = "every round reaches " + output.key();
    return c;
}

VerifyReport run_verify(ProtocolKind kind, int n, std::uint64_t seed, int depth, Fault fault, double tol) {
    VerifyReport rep;
    rep.protocol = protocol_name(kind);
    rep.n = kind == ProtocolKind::Teleport ? 1 : n;
    rep.depth = depth;
    rep.seed = seed;
    auto add = [&](Check c, const std::string &suffix) {
        if (!suffix.empty())
            c.name += "[" + suffix + "]";
        rep.checks.push_back(std::move(c));
    };
    auto equivalence = [&](const BisimResult &r) {
        Check c{"equivalent", r.equivalent, {}};
        c.detail = r.equivalent ? std::to_string(r.classes) + " classes" : (r.witness.empty() ? "" : r.witness[0]);
        return c;
    };
    if (kind == ProtocolKind::Teleport) {
        std::mt19937_64 rng(seed);
        std::vector<std::pair<std::string, CMat>> inputs;
        inputs.push_back({"zero", gates::P0()});
        CMat plus = CMat::Constant(2, 2, 0.5);
        inputs.push_back({"plus", plus});
        Eigen::VectorXcd psi = random_pure(2, rng);
        inputs.push_back({"pure", psi * psi.adjoint()});
        inputs.push_back({"mixed", random_density(2, rng)});
        for (const auto &[label, rho] : inputs) {
            ProtocolModel m = build_teleport(rho, fault);
            ConfigGraph g;
            add(equivalence(verify_external_behavior(m, depth, &g)), label);
            add(check_closed(g), label);
            add(check_teleport_fidelity(g, rho, tol), label);
            std::size_t warn = 0;
            for (const auto &d : g.diags)
                warn += d.kind == "measurement-weight";
            add({"consistency", warn == 0, std::to_string(warn) + " measurement warnings"}, label);
        }
        return rep;
    }
    ProtocolModel m = kind == ProtocolKind::BB84 ? build_bb84(n, fault) : build_e91(n, fault);
    ConfigGraph g;
    add(equivalence(verify_external_behavior(m, depth, &g)), "");
    add(check_closed(g), "");
    if (kind == ProtocolKind::BB84) {
        add(check_bb84_keys(g, n), "");
        add(check_basis_weights(g, n, {"RandBa", "RandBb"}), "");
        add(check_basis_pairs(g, n), "");
    } else {
        add(check_e91_correlation(g, n), "");
        add(check_deadlock_free(g, kOutput), "");
    }
    return rep;
}

void export_model(const ProtocolModel &m, const std::string &dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto write = [&](const std::string &name, const std::string &text) {
        std::ofstream f(fs::path(dir) / name);
        if (!f)
            throw Error(ErrorCode::InvalidState, "cannot write " + (fs::path(dir) / name).string());
        f << text;
    };
    write("system.pqa", m.system_text);
    write("spec.pqa", m.spec_text);
    write("registry.json", m.reg->to_json().dump(2) + "\n");
}

}  // namespace pqa
