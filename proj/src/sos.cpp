#include "pqa/sos.hpp"

#include "pqa/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

namespace pqa {

Action tau_label() { return Action{"tau", {}, Mark::Plain}; }

bool is_tau(const Action &a) { return a.name == "tau" && a.idx.empty() && a.mark == Mark::Plain; }

static std::size_t state_fingerprint(const QState &s) {
    // Quantised on an irrational grid so dyadic amplitudes do not sit on rounding boundaries.
    constexpr double scale = 2718.2818284590452;
    std::size_t h = s.regs.size();
    for (Eigen::Index i = 0; i < s.rho.size(); ++i) {
        auto re = std::llround(s.rho.data()[i].real() * scale);
        auto im = std::llround(s.rho.data()[i].imag() * scale);
        h ^= std::hash<long long>{}(re * 1000003LL + im) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

QStatePtr StatePool::intern(const QStatePtr &s) {
    auto &bucket = buckets_[state_fingerprint(*s)];
    for (const auto &c : bucket)
        if (c == s || state_eq(*c, *s, eps_))
            return c;
    bucket.push_back(s);
    ++count_;
    return s;
}

Term canonical_par(const Term &x, const Term &y) {
    std::vector<Term> ops;
    auto flatten = [&](auto &&self, const Term &t) -> void {
        if (t->op == Op::Par) {
            self(self, t->kids[0]);
            self(self, t->kids[1]);
        } else {
            ops.push_back(t);
        }
    };
    flatten(flatten, x);
    flatten(flatten, y);
    std::sort(ops.begin(), ops.end(), TermLess{});
    Term acc = ops.back();
    for (std::size_t i = ops.size() - 1; i-- > 0;)
        acc = mk_par(ops[i], acc);
    return acc;
}

namespace {

Term as_dynamic_atom(const Term &t) {
    switch (t->op) {
    case Op::Delta: return mk_delta(true);
    case Op::Tau: return mk_tau(true);
    default: return mk_atom(t->act, true);
    }
}

void merge_into(std::vector<PBranch> &out, std::unordered_map<Term, std::size_t, TermHash, TermEq> &index,
                const Term &t, const Rational &w) {
    auto it = index.find(t);
    if (it != index.end()) {
        out[it->second].weight += w;
        return;
    }
    index.emplace(t, out.size());
    out.push_back({t, w});
}

void sort_branches(std::vector<PBranch> &v) {
    std::sort(v.begin(), v.end(), [](const PBranch &a, const PBranch &b) {
        int c = term_cmp(a.term, b.term);
        return c != 0 ? c < 0 : a.weight < b.weight;
    });
}

// x'||_w + y'||_z + x'|y' + x'<>y'
Term merge_expansion(const Term &xd, const Term &w, const Term &yd, const Term &z) {
    return mk_alt(mk_lmerge(xd, w), mk_alt(mk_lmerge(yd, z), mk_alt(mk_cmerge(xd, yd), mk_emerge(xd, yd))));
}

Term join_targets(const Term &a, const Term &b) {
    if (!a)
        return b;
    if (!b)
        return a;
    return canonical_par(a, b);
}

}  // namespace

std::vector<PBranch> Sos::dist(const Term &t) {
    if (!t->closed)
        throw Error(ErrorCode::NotClosed, "term has free variables: " + print(t));
    std::vector<PBranch> out;
    std::unordered_map<Term, std::size_t, TermHash, TermEq> index;
    auto unary = [&](auto wrap) {
        for (const auto &b : dist(t->kids[0]))
            merge_into(out, index, wrap(b.term), b.weight);
    };
    auto binary = [&](auto wrap) {
        auto l = dist(t->kids[0]);
        auto r = dist(t->kids[1]);
        for (const auto &a : l)
            for (const auto &b : r)
                merge_into(out, index, wrap(a.term, b.term), a.weight * b.weight);
    };
    switch (t->op) {
    case Op::Delta:
    case Op::Tau:
    case Op::Atom:
        if (t->dyn)
            throw Error(ErrorCode::NotStatic, "probabilistic step on dynamic atom");
        out.push_back({as_dynamic_atom(t), Rational(1)});
        return out;
    case Op::Seq: {
        const Term &y = t->kids[1];
        unary([&](const Term &x) { return mk_seq(x, y); });
        break;
    }
    case Op::Alt: binary([](const Term &a, const Term &b) { return mk_alt(a, b); }); break;
    case Op::PChoice: {
        for (const auto &b : dist(t->kids[0]))
            merge_into(out, index, b.term, b.weight * t->prob);
        for (const auto &b : dist(t->kids[1]))
            merge_into(out, index, b.term, b.weight * (1 - t->prob));
        break;
    }
    case Op::Par: {
        const Term &x = t->kids[0], &y = t->kids[1];
        binary([&](const Term &a, const Term &b) { return merge_expansion(a, y, b, x); });
        break;
    }
    case Op::MergeMem: {
        auto l = dist(t->kids[0]);
        auto r = dist(t->kids[2]);
        const Term &z = t->kids[1], &w = t->kids[3];
        for (const auto &a : l)
            for (const auto &b : r)
                merge_into(out, index, merge_expansion(a.term, w, b.term, z), a.weight * b.weight);
        break;
    }
    case Op::LeftMerge: {
        const Term &y = t->kids[1];
        unary([&](const Term &x) { return mk_lmerge(x, y); });
        break;
    }
    case Op::CommMerge: binary([](const Term &a, const Term &b) { return mk_cmerge(a, b); }); break;
    case Op::EntMerge: binary([](const Term &a, const Term &b) { return mk_emerge(a, b); }); break;
    case Op::Encap:
    case Op::Abstr:
    case Op::Proj:
    case Op::Rename:
    case Op::Priority: unary([&](const Term &x) { return with_kids(t, {x}); }); break;
    case Op::Unless: {
        const Term &y = t->kids[1];
        unary([&](const Term &x) { return mk_unless(x, y); });
        break;
    }
    case Op::RecSpec: {
        auto it = rec_cache_.find(t);
        if (it != rec_cache_.end())
            return it->second;
        if (++unfold_depth_ > 10000)
            throw Error(ErrorCode::UnguardedRecursion, "unfolding of " + t->var + " does not reach a guard");
        auto r = dist(unfold(t->var, t->env));
        --unfold_depth_;
        rec_cache_.emplace(t, r);
        return r;
    }
    case Op::RecVar: throw Error(ErrorCode::NotClosed, "free variable " + t->var);
    }
    return out;
}

const std::vector<PBranch> &Sos::prob_step(const Term &t) {
    if (t->any_dyn)
        throw Error(ErrorCode::NotStatic, "probabilistic step needs a static term: " + print(t));
    auto it = dist_cache_.find(t);
    if (it != dist_cache_.end())
        return it->second;
    unfold_depth_ = 0;
    auto r = dist(t);
    sort_branches(r);
    return dist_cache_.insert_or_assign(t, std::move(r)).first->second;
}

ATransition Sos::atom_step(const Action &a, const QStatePtr &rho, bool effects) {
    ATransition tr{a, a, nullptr, rho, false};
    if (!effects || a.mark == Mark::Shadow)
        return tr;
    const ActionDef &d = reg_.require(a);
    if (d.kind == EffectKind::Classical)
        return tr;
    EffectKey key{rho.get(), a.plain_key()};
    auto it = effect_cache_.find(key);
    if (it != effect_cache_.end()) {
        tr.post = it->second.post;
        tr.dead = it->second.dead;
        return tr;
    }
    if (d.kind == EffectKind::Unitary) {
        tr.post = pool_.intern(std::make_shared<const QState>(apply_unitary(*rho, d.matrix, d.targets)));
    } else {
        double p = 0;
        QState raw = project_raw(*rho, d.matrix, d.targets, p);
        if (p <= zero_eps_) {
            tr.dead = true;
        } else {
            raw.rho /= p;
            tr.post = pool_.intern(std::make_shared<const QState>(std::move(raw)));
        }
    }
    effect_cache_.emplace(key, EffectVal{rho, tr.post, tr.dead});
    return tr;
}

void Sos::steps(const Term &t, const QStatePtr &rho, bool effects, std::vector<ATransition> &out) {
    if (!t->dyn)
        throw Error(ErrorCode::NotDynamic, "action step needs a dynamic term: " + print(t));
    switch (t->op) {
    case Op::Delta: return;
    case Op::Tau: out.push_back({tau_label(), tau_label(), nullptr, rho, false}); return;
    case Op::Atom: out.push_back(atom_step(t->act, rho, effects)); return;
    case Op::Seq: {
        std::size_t from = out.size();
        steps(t->kids[0], rho, effects, out);
        for (std::size_t i = from; i < out.size(); ++i)
            out[i].target = out[i].target ? mk_seq(out[i].target, t->kids[1]) : t->kids[1];
        return;
    }
    case Op::Alt:
        steps(t->kids[0], rho, effects, out);
        steps(t->kids[1], rho, effects, out);
        return;
    case Op::LeftMerge: {
        std::size_t from = out.size();
        steps(t->kids[0], rho, effects, out);
        for (std::size_t i = from; i < out.size(); ++i)
            out[i].target = out[i].target ? canonical_par(out[i].target, t->kids[1]) : t->kids[1];
        return;
    }
    case Op::CommMerge: {
        std::vector<ATransition> l, r;
        steps(t->kids[0], rho, false, l);
        steps(t->kids[1], rho, false, r);
        for (const auto &a : l)
            for (const auto &b : r) {
                if (is_tau(a.label) || is_tau(b.label))
                    continue;
                auto c = reg_.gamma(a.label, b.label);
                if (!c)
                    continue;
                out.push_back({*c, *c, join_targets(a.target, b.target), rho, false});
            }
        return;
    }
    case Op::EntMerge: {
        std::vector<ATransition> l, r;
        steps(t->kids[0], rho, effects, l);
        steps(t->kids[1], rho, effects, r);
        auto quantum_plain = [&](const Action &a) {
            if (a.mark != Mark::Plain || is_tau(a))
                return false;
            const ActionDef *d = reg_.find(a);
            return d && d->kind != EffectKind::Classical;
        };
        for (const auto &a : l)
            for (const auto &b : r) {
                const ATransition *eff = nullptr;
                if (quantum_plain(a.label) && b.label == a.label.with_mark(Mark::Shadow))
                    eff = &a;
                else if (quantum_plain(b.label) && a.label == b.label.with_mark(Mark::Shadow))
                    eff = &b;
                if (!eff)
                    continue;
                Action s = eff->label.with_mark(Mark::Synced);
                out.push_back({s, s, join_targets(a.target, b.target), eff->post, eff->dead});
            }
        return;
    }
    case Op::Encap: {
        std::vector<ATransition> in;
        steps(t->kids[0], rho, effects, in);
        for (auto &a : in) {
            if (t->set->contains(a.label))
                continue;
            if (a.target)
                a.target = mk_encap(t->set, a.target);
            out.push_back(std::move(a));
        }
        return;
    }
    case Op::Abstr: {
        std::size_t from = out.size();
        steps(t->kids[0], rho, effects, out);
        for (std::size_t i = from; i < out.size(); ++i) {
            if (t->set->contains(out[i].label))
                out[i].label = tau_label();
            if (out[i].target)
                out[i].target = mk_abstr(t->set, out[i].target);
        }
        return;
    }
    case Op::Proj: {
        std::size_t from = out.size();
        steps(t->kids[0], rho, effects, out);
        for (std::size_t i = from; i < out.size(); ++i)
            out[i].target = (t->n > 1 && out[i].target) ? mk_proj(t->n - 1, out[i].target) : nullptr;
        return;
    }
    case Op::Rename: {
        std::size_t from = out.size();
        steps(t->kids[0], rho, effects, out);
        for (std::size_t i = from; i < out.size(); ++i) {
            out[i].label = rename_action(*t->ren, out[i].label);
            out[i].origin = rename_action(*t->ren, out[i].origin);
            if (out[i].target)
                out[i].target = mk_rename(t->ren, out[i].target);
        }
        return;
    }
    case Op::Priority: {
        std::vector<ATransition> in;
        steps(t->kids[0], rho, effects, in);
        std::vector<bool> beaten(in.size(), false);
        for (std::size_t i = 0; i < in.size(); ++i)
            for (const auto &b : in)
                beaten[i] = beaten[i] || reg_.less(in[i].label, b.label);
        for (std::size_t i = 0; i < in.size(); ++i) {
            if (beaten[i])
                continue;
            if (in[i].target)
                in[i].target = mk_priority(in[i].target);
            out.push_back(std::move(in[i]));
        }
        return;
    }
    case Op::Unless: {
        std::vector<ATransition> in;
        steps(t->kids[0], rho, effects, in);
        const auto &blockers = static_labels(t->kids[1]);
        for (auto &a : in) {
            bool beaten = false;
            for (const auto &b : blockers)
                beaten = beaten || reg_.less(a.label, b);
            if (!beaten)
                out.push_back(std::move(a));
        }
        return;
    }
    default: throw Error(ErrorCode::NotDynamic, "action step needs a dynamic term: " + print(t));
    }
}

std::vector<ATransition> Sos::action_step(const Term &t, const QStatePtr &rho) {
    std::vector<ATransition> out;
    steps(t, rho, true, out);
    return out;
}

std::vector<Action> Sos::initial_labels(const Term &t) {
    std::vector<ATransition> tr;
    steps(t, nullptr, false, tr);
    std::vector<Action> out;
    for (const auto &a : tr)
        out.push_back(a.label);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<Action> Sos::static_labels(const Term &t) {
    auto it = static_label_cache_.find(t);
    if (it != static_label_cache_.end())
        return it->second;
    std::vector<Action> out;
    for (const auto &b : prob_step(t)) {
        auto l = initial_labels(b.term);
        out.insert(out.end(), l.begin(), l.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    static_label_cache_.emplace(t, out);
    return out;
}

std::size_t ConfigGraph::edge_count() const {
    std::size_t n = 0;
    for (const auto &v : pout)
        n += v.size();
    for (const auto &v : aout)
        n += v.size();
    return n;
}

namespace {

struct Builder {
    const BuildOptions &opts;
    Sos sos;
    ConfigGraph g;
    std::unordered_map<std::size_t, std::vector<int>> index;
    std::vector<bool> dead;
    std::vector<std::vector<Action>> dead_labels;
    std::deque<int> queue;

    Builder(const Registry &reg, const BuildOptions &o) : opts(o), sos(reg) {}

    int add(NodeKind k, Term t, QStatePtr rho, int depth) {
        if (g.nodes.size() >= opts.max_nodes)
            throw Error(ErrorCode::OutOfRange, "configuration graph exceeds " + std::to_string(opts.max_nodes) + " nodes");
        g.nodes.push_back({k, std::move(t), std::move(rho), depth});
        g.pout.emplace_back();
        g.aout.emplace_back();
        dead.push_back(false);
        dead_labels.emplace_back();
        return static_cast<int>(g.nodes.size()) - 1;
    }

    int intern(NodeKind k, const Term &t, const QStatePtr &rho, int depth, bool &fresh) {
        fresh = false;
        std::size_t h = t->hash ^ (std::hash<const void *>{}(rho.get()) * 31) ^ static_cast<std::size_t>(k);
        if (opts.dedup) {
            auto &bucket = index[h];
            for (int id : bucket)
                if (g.nodes[id].kind == k && g.nodes[id].rho == rho && term_eq(g.nodes[id].term, t))
                    return id;
            fresh = true;
            int id = add(k, t, rho, depth);
            bucket.push_back(id);
            return id;
        }
        fresh = true;
        return add(k, t, rho, depth);
    }

    int special(NodeKind k, int &slot) {
        if (slot < 0)
            slot = add(k, nullptr, nullptr, 0);
        return slot;
    }

    void expand_action(int a) {
        Term t = g.nodes[a].term;
        QStatePtr rho = g.nodes[a].rho;
        int depth = g.nodes[a].depth;
        auto trs = sos.action_step(t, rho);
        bool live = false;
        for (auto &tr : trs) {
            if (tr.dead) {
                dead_labels[a].push_back(tr.origin);
                continue;
            }
            live = true;
            int to;
            if (!tr.target) {
                to = special(NodeKind::Nil, g.nil);
            } else if (depth + 1 >= opts.depth) {
                to = special(NodeKind::Trunc, g.trunc);
            } else {
                bool fresh;
                to = intern(NodeKind::Prob, tr.target, tr.post, depth + 1, fresh);
                if (fresh)
                    queue.push_back(to);
            }
            g.aout[a].push_back({to, tr.label, tr.origin, tr.post});
        }
        dead[a] = !live && !dead_labels[a].empty();
    }

    void expand_prob(int p) {
        const auto &branches = sos.prob_step(g.nodes[p].term);
        for (const auto &b : branches) {
            bool fresh;
            int a = intern(NodeKind::Action, b.term, g.nodes[p].rho, g.nodes[p].depth, fresh);
            if (fresh)
                expand_action(a);
            g.pout[p].push_back({a, b.weight, b.weight});
        }
    }

    void prune() {
        for (std::size_t p = 0; p < g.nodes.size(); ++p) {
            if (g.nodes[p].kind != NodeKind::Prob)
                continue;
            auto &edges = g.pout[p];
            Rational live = 0;
            bool any_dead = false;
            for (const auto &e : edges) {
                if (dead[e.to])
                    any_dead = true;
                else
                    live += e.weight;
            }
            if (!any_dead)
                continue;
            if (live == 0) {
                g.diags.push_back({"zero-probability", "every branch has a vanishing projection", static_cast<int>(p)});
                continue;
            }
            std::vector<PEdge> kept;
            for (auto &e : edges) {
                if (dead[e.to]) {
                    g.pruned.push_back({static_cast<int>(p), e.declared, dead_labels[e.to]});
                    continue;
                }
                e.weight = e.weight / live;
                kept.push_back(e);
            }
            edges = std::move(kept);
            g.diags.push_back({"zero-probability", "pruned branch with vanishing projection; weights renormalised",
                               static_cast<int>(p)});
        }
    }

    void compact() {
        std::vector<int> remap(g.nodes.size(), -1);
        std::vector<int> order;
        std::deque<int> q{g.root};
        remap[g.root] = 0;
        order.push_back(g.root);
        while (!q.empty()) {
            int v = q.front();
            q.pop_front();
            auto visit = [&](int to) {
                if (remap[to] < 0) {
                    remap[to] = static_cast<int>(order.size());
                    order.push_back(to);
                    q.push_back(to);
                }
            };
            for (const auto &e : g.pout[v])
                visit(e.to);
            for (const auto &e : g.aout[v])
                visit(e.to);
        }
        ConfigGraph out;
        out.reg = g.reg;
        out.depth_bound = g.depth_bound;
        out.diags = g.diags;
        for (int old : order) {
            out.nodes.push_back(g.nodes[old]);
            auto pe = g.pout[old];
            for (auto &e : pe)
                e.to = remap[e.to];
            auto ae = g.aout[old];
            for (auto &e : ae)
                e.to = remap[e.to];
            out.pout.push_back(std::move(pe));
            out.aout.push_back(std::move(ae));
        }
        for (auto pr : g.pruned)
            if (remap[pr.from] >= 0) {
                pr.from = remap[pr.from];
                out.pruned.push_back(pr);
            }
        for (auto &d : out.diags)
            d.node = d.node >= 0 ? remap[d.node] : -1;
        out.root = 0;
        out.nil = g.nil >= 0 ? remap[g.nil] : -1;
        out.trunc = g.trunc >= 0 ? remap[g.trunc] : -1;
        g = std::move(out);
    }
};

}  // namespace

ConfigGraph build_graph(const Term &t, RegistryPtr reg, const BuildOptions &opts, QStatePtr init) {
    if (!t->closed)
        throw Error(ErrorCode::NotClosed, "term has free variables");
    if (t->any_dyn)
        throw Error(ErrorCode::NotStatic, "graph construction starts from a static term");
    if (opts.depth < 1)
        throw Error(ErrorCode::OutOfRange, "depth bound must be at least 1");
    elaborate(t, *reg);
    Builder b(*reg, opts);
    b.g.reg = reg;
    b.g.depth_bound = opts.depth;
    QStatePtr rho = b.sos.pool().intern(init ? init : reg->init);
    if (rho->regs.size() != reg->regs.size())
        throw Error(ErrorCode::RegisterMismatch, "initial state does not match the registry registers");
    bool fresh;
    b.g.root = b.intern(NodeKind::Prob, t, rho, 0, fresh);
    b.queue.push_back(b.g.root);
    while (!b.queue.empty()) {
        int p = b.queue.front();
        b.queue.pop_front();
        b.expand_prob(p);
    }
    b.prune();
    b.compact();
    auto warn = check_measurement_consistency(b.g, opts.eps);
    b.g.diags.insert(b.g.diags.end(), warn.begin(), warn.end());
    return std::move(b.g);
}

std::vector<Diagnostic> check_measurement_consistency(const ConfigGraph &g, double eps) {
    std::vector<Diagnostic> out;
    const Registry &reg = *g.reg;
    auto projection_key = [&](const Action &a) -> std::string {
        if (a.mark == Mark::Shadow || is_tau(a))
            return {};
        const ActionDef *d = reg.find(a);
        if (!d || d->kind != EffectKind::Projection)
            return {};
        return a.plain_key();
    };
    for (std::size_t p = 0; p < g.nodes.size(); ++p) {
        if (g.nodes[p].kind != NodeKind::Prob)
            continue;
        std::map<std::string, Rational> declared;
        auto credit = [&](const std::vector<Action> &labels, const Rational &w) {
            std::set<std::string> seen;
            for (const auto &l : labels) {
                auto k = projection_key(l);
                if (!k.empty() && seen.insert(k).second)
                    declared[k] += w;
            }
        };
        for (const auto &e : g.pout[p]) {
            std::vector<Action> labels;
            for (const auto &ae : g.aout[e.to])
                labels.push_back(ae.origin);
            credit(labels, e.declared);
        }
        for (const auto &pr : g.pruned)
            if (pr.from == static_cast<int>(p))
                credit(pr.labels, pr.declared);
        for (const auto &[k, w] : declared) {
            const ActionDef &d = reg.require(parse_action_key(k));
            double tr = measure_probability(*g.nodes[p].rho, d.matrix, d.targets);
            double dw = w.convert_to<double>();
            if (std::abs(dw - tr) > eps)
                out.push_back({"measurement-weight",
                               "declared mass " + rational_str(w) + " for " + k + " but tr(P rho) = " + std::to_string(tr),
                               static_cast<int>(p)});
        }
    }
    return out;
}

}  // namespace pqa
