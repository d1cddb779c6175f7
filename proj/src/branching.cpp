#include "pqa/bisim.hpp"

#include "pqa/error.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace pqa {

namespace {

using Vis = std::tuple<int, int, int>;  // label, target class, public post-state class
constexpr int kTick = -1;               // successful termination
constexpr int kTrunc = -2;

struct Signatures {
    std::vector<std::vector<Vis>> vis;
    std::vector<std::vector<int>> distr;
};

class Branching {
public:
    explicit Branching(const UnionGraph &g) : u_(g) {}

    std::vector<int> run() {
        std::size_t n = u_.kind.size();
        std::vector<int> cls(n);
        std::map<std::pair<bool, int>, int> init;
        for (std::size_t v = 0; v < n; ++v) {
            bool trunc = u_.kind[v] == NodeKind::Trunc;
            auto key = std::make_pair(trunc, trunc ? 0 : u_.state[v]);
            cls[v] = init.emplace(key, static_cast<int>(init.size())).first->second;
        }
        history_.push_back(cls);
        std::size_t count = init.size();
        while (true) {
            Signatures s = compute(cls);
            std::unordered_map<std::string, int> ids;
            std::vector<int> next(n);
            for (std::size_t v = 0; v < n; ++v)
                next[v] = ids.emplace(key(static_cast<int>(v), cls, s), static_cast<int>(ids.size())).first->second;
            cls = std::move(next);
            history_.push_back(cls);
            last_ = std::move(s);
            if (ids.size() == count)
                break;
            count = ids.size();
        }
        last_ = compute(cls);
        return cls;
    }

    const std::vector<std::vector<int>> &history() const { return history_; }
    const Signatures &last() const { return last_; }
    const std::vector<std::string> &distr_names() const { return distr_names_; }

private:
    const UnionGraph &u_;
    std::vector<std::vector<int>> history_;
    Signatures last_;
    std::unordered_map<std::string, int> distr_ids_;
    std::vector<std::string> distr_names_;

    std::string key(int v, const std::vector<int> &cls, const Signatures &s) const {
        std::ostringstream os;
        os << cls[v] << '|';
        for (const auto &[l, c, p] : s.vis[v])
            os << l << ',' << c << ',' << p << ';';
        os << '|';
        for (int d : s.distr[v])
            os << d << ';';
        return os.str();
    }

    bool single_inert(int a, const std::vector<int> &cls, int c) const {
        if (u_.kind[a] != NodeKind::Action || u_.aout[a].size() != 1)
            return false;
        const auto &e = u_.aout[a][0];
        return e.label == u_.tau && cls[e.to] == c && u_.kind[e.to] == NodeKind::Prob;
    }

    // Mass with which a probabilistic state leaves its class, after walking through inert tau chains.
    int exit_distribution(int p, const std::vector<int> &cls) {
        int c = cls[p];
        std::vector<int> states{p};
        std::map<int, std::size_t> pos{{p, 0}};
        for (std::size_t i = 0; i < states.size(); ++i)
            for (const auto &e : u_.pout[states[i]])
                if (cls[e.to] == c && single_inert(e.to, cls, c)) {
                    int q = u_.aout[e.to][0].to;
                    if (pos.emplace(q, states.size()).second)
                        states.push_back(q);
                }
        std::size_t m = states.size();
        std::map<int, std::size_t> outcome;  // class, or -1 for staying
        auto slot = [&](int k) { return outcome.emplace(k, outcome.size()).first->second; };
        std::vector<std::vector<Rational>> a(m, std::vector<Rational>(m, 0));
        std::vector<std::map<std::size_t, Rational>> rhs(m);
        for (std::size_t i = 0; i < m; ++i) {
            a[i][i] += 1;
            for (const auto &e : u_.pout[states[i]]) {
                if (cls[e.to] != c)
                    rhs[i][slot(cls[e.to])] += e.w;
                else if (single_inert(e.to, cls, c))
                    a[i][pos[u_.aout[e.to][0].to]] -= e.w;
                else
                    rhs[i][slot(-1)] += e.w;
            }
        }
        std::size_t k = outcome.size();
        std::vector<std::vector<Rational>> b(m, std::vector<Rational>(k, 0));
        for (std::size_t i = 0; i < m; ++i)
            for (const auto &[j, w] : rhs[i])
                b[i][j] = w;
        for (std::size_t col = 0; col < m; ++col) {
            std::size_t piv = col;
            while (piv < m && a[piv][col] == 0)
                ++piv;
            if (piv == m)
                throw Error(ErrorCode::DivergenceWithoutExit, "an inert cycle keeps probability mass inside one class");
            std::swap(a[piv], a[col]);
            std::swap(b[piv], b[col]);
            Rational inv = 1 / a[col][col];
            for (std::size_t j = 0; j < m; ++j)
                a[col][j] *= inv;
            for (std::size_t j = 0; j < k; ++j)
                b[col][j] *= inv;
            for (std::size_t r = 0; r < m; ++r) {
                if (r == col || a[r][col] == 0)
                    continue;
                Rational f = a[r][col];
                for (std::size_t j = 0; j < m; ++j)
                    a[r][j] -= f * a[col][j];
                for (std::size_t j = 0; j < k; ++j)
                    b[r][j] -= f * b[col][j];
            }
        }
        Rational total = 0;
        std::ostringstream os;
        for (const auto &[cl, j] : outcome) {
            total += b[0][j];
            if (b[0][j] != 0)
                os << cl << ':' << rational_str(b[0][j]) << ';';
        }
        if (total != 1)
            throw Error(ErrorCode::DivergenceWithoutExit, "an inert cycle keeps probability mass inside one class");
        std::string s = os.str();
        auto it = distr_ids_.find(s);
        if (it != distr_ids_.end())
            return it->second;
        int id = static_cast<int>(distr_names_.size());
        distr_names_.push_back(s);
        distr_ids_.emplace(s, id);
        return id;
    }

    Signatures compute(const std::vector<int> &cls) {
        std::size_t n = u_.kind.size();
        Signatures s;
        s.vis.assign(n, {});
        s.distr.assign(n, {});
        std::vector<std::vector<int>> inherit(n);
        for (std::size_t v = 0; v < n; ++v) {
            int c = cls[v];
            switch (u_.kind[v]) {
            case NodeKind::Nil: s.vis[v].push_back({kTick, 0, u_.state[v]}); break;
            case NodeKind::Trunc: s.vis[v].push_back({kTrunc, 0, 0}); break;
            case NodeKind::Action:
                for (const auto &e : u_.aout[v]) {
                    if (e.label == u_.tau && cls[e.to] == c)
                        inherit[v].push_back(e.to);
                    else
                        s.vis[v].push_back({e.label, cls[e.to], e.post});
                }
                break;
            case NodeKind::Prob: {
                bool inside = true;
                for (const auto &e : u_.pout[v])
                    inside = inside && cls[e.to] == c;
                if (inside)
                    for (const auto &e : u_.pout[v])
                        inherit[v].push_back(e.to);
                else
                    s.distr[v].push_back(exit_distribution(static_cast<int>(v), cls));
                break;
            }
            }
        }
        // Tarjan over the inheritance edges; each component takes the union of what it reaches.
        std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
        std::vector<bool> on(n, false);
        std::vector<int> stack;
        int counter = 0, ncomp = 0;
        std::vector<std::vector<Vis>> cvis;
        std::vector<std::vector<int>> cdis;
        for (std::size_t root = 0; root < n; ++root) {
            if (index[root] >= 0)
                continue;
            std::vector<std::pair<int, std::size_t>> call{{static_cast<int>(root), 0}};
            index[root] = low[root] = counter++;
            stack.push_back(static_cast<int>(root));
            on[root] = true;
            while (!call.empty()) {
                auto &[v, i] = call.back();
                if (i < inherit[v].size()) {
                    int w = inherit[v][i++];
                    if (index[w] < 0) {
                        index[w] = low[w] = counter++;
                        stack.push_back(w);
                        on[w] = true;
                        call.push_back({w, 0});
                    } else if (on[w]) {
                        low[v] = std::min(low[v], index[w]);
                    }
                    continue;
                }
                int vv = v;
                call.pop_back();
                if (!call.empty())
                    low[call.back().first] = std::min(low[call.back().first], low[vv]);
                if (low[vv] != index[vv])
                    continue;
                std::vector<int> members;
                int w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on[w] = false;
                    comp[w] = ncomp;
                    members.push_back(w);
                } while (w != vv);
                std::set<Vis> vs;
                std::set<int> ds;
                for (int m : members) {
                    vs.insert(s.vis[m].begin(), s.vis[m].end());
                    ds.insert(s.distr[m].begin(), s.distr[m].end());
                    for (int t : inherit[m])
                        if (comp[t] != ncomp) {
                            vs.insert(cvis[comp[t]].begin(), cvis[comp[t]].end());
                            ds.insert(cdis[comp[t]].begin(), cdis[comp[t]].end());
                        }
                }
                cvis.emplace_back(vs.begin(), vs.end());
                cdis.emplace_back(ds.begin(), ds.end());
                ++ncomp;
            }
        }
        for (std::size_t v = 0; v < n; ++v) {
            s.vis[v] = cvis[comp[v]];
            s.distr[v] = cdis[comp[v]];
        }
        return s;
    }
};

std::string vis_text(const UnionGraph &u, const Vis &v) {
    auto [l, c, p] = v;
    if (l == kTick)
        return "termination";
    if (l == kTrunc)
        return "truncation";
    return u.labels[l] + " into class " + std::to_string(c);
}

bool root_conditions(const UnionGraph &u, const std::vector<int> &cls, std::vector<std::string> &why) {
    int r1 = u.root1, r2 = u.root2;
    std::map<int, Rational> m1, m2;
    for (const auto &e : u.pout[r1])
        m1[cls[e.to]] += e.w;
    for (const auto &e : u.pout[r2])
        m2[cls[e.to]] += e.w;
    if (m1 != m2) {
        why.push_back("initial probabilistic steps distribute differently over classes");
        return false;
    }
    auto moves = [&](int a) {
        std::set<std::tuple<int, int, int>> s;
        for (const auto &e : u.aout[a])
            s.insert({e.label, cls[e.to], e.post});
        return s;
    };
    auto covered = [&](int from, int other) {
        for (const auto &e : u.pout[from]) {
            auto mine = moves(e.to);
            bool ok = false;
            for (const auto &f : u.pout[other])
                ok = ok || (cls[f.to] == cls[e.to] && moves(f.to) == mine);
            if (!ok)
                return false;
        }
        return true;
    };
    if (!covered(r1, r2) || !covered(r2, r1)) {
        why.push_back("an initial step of one root is matched only by an inert step of the other");
        return false;
    }
    return true;
}

}  // namespace

BisimResult branching_bisim(const ConfigGraph &a, const ConfigGraph &b, double eps) {
    auto t0 = std::chrono::steady_clock::now();
    UnionGraph u = UnionGraph::build(a, b, eps, true);
    Branching br(u);
    auto cls = br.run();
    BisimResult res;
    std::vector<int> sorted = cls;
    std::sort(sorted.begin(), sorted.end());
    res.classes = static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
    if (cls[u.root1] != cls[u.root2]) {
        const auto &h = br.history();
        std::size_t k = 0;
        while (k < h.size() && h[k][u.root1] == h[k][u.root2])
            ++k;
        res.witness.push_back("roots separated in refinement round " + std::to_string(k));
        const auto &s = br.last();
        std::set<Vis> v1(s.vis[u.root1].begin(), s.vis[u.root1].end());
        std::set<Vis> v2(s.vis[u.root2].begin(), s.vis[u.root2].end());
        for (const auto &x : v1)
            if (!v2.count(x))
                res.witness.push_back("left root can eventually do " + vis_text(u, x) + "; right root cannot");
        for (const auto &x : v2)
            if (!v1.count(x))
                res.witness.push_back("right root can eventually do " + vis_text(u, x) + "; left root cannot");
        std::set<int> d1(s.distr[u.root1].begin(), s.distr[u.root1].end());
        std::set<int> d2(s.distr[u.root2].begin(), s.distr[u.root2].end());
        if (d1 != d2)
            res.witness.push_back("the roots reach different probability distributions over classes");
        res.equivalent = false;
    } else {
        res.equivalent = root_conditions(u, cls, res.witness);
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace pqa
