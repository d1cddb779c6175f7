#include "pqa/bisim.hpp"

#include "pqa/error.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <sstream>

namespace pqa {

nlohmann::json BisimResult::to_json() const {
    return {{"verdict", equivalent ? "equivalent" : "inequivalent"},
            {"classes", classes},
            {"witness", witness},
            {"seconds", seconds}};
}

namespace {

class StateClasses {
public:
    StateClasses(double eps, bool public_only) : pool_(eps), public_only_(public_only) {}

    int of(const QStatePtr &s) {
        if (!s)
            return -1;
        auto it = memo_.find(s.get());
        if (it != memo_.end())
            return it->second;
        QStatePtr v = public_only_ ? std::make_shared<const QState>(public_part(*s)) : s;
        QStatePtr c = pool_.intern(v);
        auto ci = ids_.find(c.get());
        int id;
        if (ci == ids_.end()) {
            id = static_cast<int>(ids_.size());
            ids_.emplace(c.get(), id);
            keep_.push_back(c);
        } else {
            id = ci->second;
        }
        keep_.push_back(s);
        memo_.emplace(s.get(), id);
        return id;
    }

private:
    StatePool pool_;
    bool public_only_;
    std::unordered_map<const QState *, int> memo_;
    std::unordered_map<const QState *, int> ids_;
    std::vector<QStatePtr> keep_;
};

}  // namespace

UnionGraph UnionGraph::build(const ConfigGraph &a, const ConfigGraph &b, double eps, bool public_only) {
    if (!a.reg || !b.reg || a.reg->fingerprint() != b.reg->fingerprint())
        throw Error(ErrorCode::IncompatibleRegistries, "graphs were built against different registries");
    UnionGraph u;
    StateClasses sc(eps, public_only);
    std::map<std::string, int> label_ids;
    auto label = [&](const Action &l) {
        auto k = l.key();
        auto it = label_ids.find(k);
        if (it != label_ids.end())
            return it->second;
        int id = static_cast<int>(u.labels.size());
        u.labels.push_back(k);
        label_ids.emplace(k, id);
        return id;
    };
    u.tau = label(tau_label());
    u.n1 = a.nodes.size();
    std::size_t total = a.nodes.size() + b.nodes.size();
    u.kind.resize(total);
    u.state.resize(total);
    u.pout.resize(total);
    u.aout.resize(total);
    std::map<int, int> split_nil;  // post-state class to NIL node, public mode only
    auto nil_for = [&](int post) {
        auto it = split_nil.find(post);
        if (it != split_nil.end())
            return it->second;
        int id = static_cast<int>(u.kind.size());
        u.kind.push_back(NodeKind::Nil);
        u.state.push_back(post);
        u.pout.emplace_back();
        u.aout.emplace_back();
        split_nil.emplace(post, id);
        return id;
    };
    auto load = [&](const ConfigGraph &g, std::size_t off) {
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            std::size_t v = off + i;
            u.kind[v] = g.nodes[i].kind;
            u.state[v] = sc.of(g.nodes[i].rho);
            for (const auto &e : g.pout[i])
                u.pout[v].push_back({static_cast<int>(off) + e.to, e.weight});
        }
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            std::size_t v = off + i;
            for (const auto &e : g.aout[i]) {
                int post = sc.of(e.post);
                int to = static_cast<int>(off) + e.to;
                if (public_only && g.nodes[e.to].kind == NodeKind::Nil)
                    to = nil_for(post);
                u.aout[v].push_back({to, label(e.label), post});
            }
        }
    };
    load(a, 0);
    load(b, a.nodes.size());
    u.root1 = a.root;
    u.root2 = static_cast<int>(a.nodes.size()) + b.root;
    return u;
}

std::string UnionGraph::describe(int v, const ConfigGraph &a, const ConfigGraph &b) const {
    if (v < 0 || static_cast<std::size_t>(v) >= n1 + b.nodes.size())
        return kind[v] == NodeKind::Nil ? "NIL" : "?";
    const ConfigGraph &g = static_cast<std::size_t>(v) < n1 ? a : b;
    std::size_t i = static_cast<std::size_t>(v) < n1 ? static_cast<std::size_t>(v) : static_cast<std::size_t>(v) - n1;
    const GNode &n = g.nodes[i];
    std::string side = static_cast<std::size_t>(v) < n1 ? "left" : "right";
    switch (n.kind) {
    case NodeKind::Nil: return side + " NIL";
    case NodeKind::Trunc: return side + " TRUNCATED";
    default: {
        std::string t = print(n.term);
        if (t.size() > 120)
            t = t.substr(0, 117) + "...";
        return side + " " + std::to_string(i) + " <" + t + ">";
    }
    }
}

namespace {

struct Refiner {
    const UnionGraph &u;
    std::vector<std::vector<int>> history;  // partition after each round

    explicit Refiner(const UnionGraph &g) : u(g) {}

    std::string signature(int v, const std::vector<int> &cls) const {
        std::ostringstream os;
        os << cls[v] << '|';
        if (u.kind[v] == NodeKind::Prob) {
            std::map<int, Rational> mass;
            for (const auto &e : u.pout[v])
                mass[cls[e.to]] += e.w;
            for (const auto &[c, w] : mass)
                os << c << ':' << rational_str(w) << ';';
        } else if (u.kind[v] == NodeKind::Action) {
            std::vector<std::tuple<int, int, int>> trs;
            for (const auto &e : u.aout[v])
                trs.emplace_back(e.label, cls[e.to], e.post);
            std::sort(trs.begin(), trs.end());
            trs.erase(std::unique(trs.begin(), trs.end()), trs.end());
            for (const auto &[l, c, s] : trs)
                os << l << ',' << c << ',' << s << ';';
        }
        return os.str();
    }

    std::vector<int> run() {
        std::size_t n = u.kind.size();
        std::vector<int> cls(n);
        {
            std::map<std::pair<int, int>, int> ids;
            for (std::size_t v = 0; v < n; ++v) {
                auto key = std::make_pair(static_cast<int>(u.kind[v]), u.state[v]);
                auto it = ids.emplace(key, static_cast<int>(ids.size())).first;
                cls[v] = it->second;
            }
        }
        history.push_back(cls);
        std::size_t count = 0;
        for (int c : cls)
            count = std::max<std::size_t>(count, static_cast<std::size_t>(c) + 1);
        while (true) {
            std::unordered_map<std::string, int> ids;
            std::vector<int> next(n);
            for (std::size_t v = 0; v < n; ++v) {
                auto it = ids.emplace(signature(static_cast<int>(v), cls), static_cast<int>(ids.size())).first;
                next[v] = it->second;
            }
            std::size_t c2 = ids.size();
            cls = std::move(next);
            history.push_back(cls);
            if (c2 == count)
                break;
            count = c2;
        }
        return cls;
    }
};

std::size_t class_count(const std::vector<int> &cls) {
    std::vector<int> s = cls;
    std::sort(s.begin(), s.end());
    return static_cast<std::size_t>(std::unique(s.begin(), s.end()) - s.begin());
}

void explain(const UnionGraph &u, const Refiner &r, const ConfigGraph &a, const ConfigGraph &b, int x, int y,
             std::vector<std::string> &out, int budget) {
    // First round in which x and y were separated.
    std::size_t k = 0;
    while (k < r.history.size() && r.history[k][x] == r.history[k][y])
        ++k;
    if (k >= r.history.size() || budget <= 0)
        return;
    if (k == 0) {
        if (u.kind[x] != u.kind[y])
            out.push_back(u.describe(x, a, b) + " and " + u.describe(y, a, b) + " are of different kinds");
        else
            out.push_back(u.describe(x, a, b) + " and " + u.describe(y, a, b) + " carry different quantum states");
        return;
    }
    const auto &cls = r.history[k - 1];
    if (u.kind[x] == NodeKind::Prob) {
        std::map<int, Rational> mx, my;
        for (const auto &e : u.pout[x])
            mx[cls[e.to]] += e.w;
        for (const auto &e : u.pout[y])
            my[cls[e.to]] += e.w;
        for (const auto &[c, w] : mx) {
            Rational w2 = my.count(c) ? my[c] : Rational(0);
            if (w != w2) {
                out.push_back("probability into one class differs: " + rational_str(w) + " from " +
                              u.describe(x, a, b) + " versus " + rational_str(w2) + " from " + u.describe(y, a, b));
                for (const auto &ex : u.pout[x])
                    if (cls[ex.to] == c)
                        for (const auto &ey : u.pout[y])
                            if (r.history.back()[ex.to] != r.history.back()[ey.to]) {
                                explain(u, r, a, b, ex.to, ey.to, out, budget - 1);
                                return;
                            }
                return;
            }
        }
        for (const auto &[c, w] : my)
            if (!mx.count(c)) {
                out.push_back("probability " + rational_str(w) + " from " + u.describe(y, a, b) +
                              " reaches a class the other side never enters");
                return;
            }
        return;
    }
    auto unmatched = [&](int p, int q) -> const UnionGraph::Edge * {
        for (const auto &e : u.aout[p]) {
            bool ok = false;
            for (const auto &f : u.aout[q])
                ok = ok || (f.label == e.label && f.post == e.post && cls[f.to] == cls[e.to]);
            if (!ok)
                return &e;
        }
        return nullptr;
    };
    int p = x, q = y;
    const UnionGraph::Edge *e = unmatched(x, y);
    if (!e) {
        e = unmatched(y, x);
        std::swap(p, q);
    }
    if (!e)
        return;
    bool same_label = false;
    for (const auto &f : u.aout[q])
        same_label = same_label || f.label == e->label;
    out.push_back(u.describe(p, a, b) + " can do " + u.labels[e->label] + (same_label ? " into a state that " : "; ") +
                  u.describe(q, a, b) + (same_label ? " cannot match" : " cannot"));
    if (same_label)
        for (const auto &f : u.aout[q])
            if (f.label == e->label && r.history.back()[f.to] != r.history.back()[e->to]) {
                explain(u, r, a, b, e->to, f.to, out, budget - 1);
                return;
            }
}

}  // namespace

std::vector<int> strong_partition(const ConfigGraph &a, const ConfigGraph &b, double eps) {
    UnionGraph u = UnionGraph::build(a, b, eps, false);
    Refiner r(u);
    return r.run();
}

BisimResult strong_bisim(const ConfigGraph &a, const ConfigGraph &b, double eps) {
    auto t0 = std::chrono::steady_clock::now();
    UnionGraph u = UnionGraph::build(a, b, eps, false);
    Refiner r(u);
    auto cls = r.run();
    BisimResult res;
    res.classes = class_count(cls);
    res.equivalent = cls[u.root1] == cls[u.root2];
    if (!res.equivalent)
        explain(u, r, a, b, u.root1, u.root2, res.witness, 64);
    if (!res.equivalent && res.witness.empty())
        res.witness.push_back("root configurations fall into different classes");
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace pqa
