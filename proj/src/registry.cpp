#include "pqa/registry.hpp"

#include "pqa/error.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_set>

namespace pqa {

using nlohmann::json;

json matrix_to_json(const CMat &m) {
    json arr = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            arr.push_back({m(r, c).real(), m(r, c).imag()});
    return arr;
}

CMat matrix_from_json(const json &j, std::size_t dim) {
    if (!j.is_array() || j.size() != dim * dim)
        throw Error(ErrorCode::RegistryError, "matrix needs " + std::to_string(dim * dim) + " complex entries");
    auto d = static_cast<Eigen::Index>(dim);
    CMat m(d, d);
    for (std::size_t k = 0; k < dim * dim; ++k) {
        const auto &e = j[k];
        cplx v;
        if (e.is_number())
            v = {e.get<double>(), 0.0};
        else if (e.is_array() && e.size() == 2)
            v = {e[0].get<double>(), e[1].get<double>()};
        else
            throw Error(ErrorCode::RegistryError, "matrix entry must be a number or [re, im]");
        m(static_cast<Eigen::Index>(k / dim), static_cast<Eigen::Index>(k % dim)) = v;
    }
    return m;
}

void Registry::add_register(const std::string &name, Visibility vis) {
    for (const auto &r : regs)
        if (r.name == name)
            throw Error(ErrorCode::RegisterNameClash, "register " + name + " declared twice");
    regs.push_back({name, vis});
}

void Registry::set_initial(QState s) {
    if (s.regs.size() != regs.size())
        throw Error(ErrorCode::RegisterMismatch, "initial state does not cover the registers");
    for (std::size_t i = 0; i < regs.size(); ++i)
        if (s.regs[i].name != regs[i].name)
            throw Error(ErrorCode::RegisterMismatch, "initial state register order differs");
    s.regs = regs;
    init = std::make_shared<const QState>(std::move(s));
}

static void check_new(const std::map<std::string, ActionDef> &defs, const Action &a) {
    if (a.mark != Mark::Plain)
        throw Error(ErrorCode::RegistryError, "only plain actions can be registered: " + a.key());
    if (defs.count(a.key()))
        throw Error(ErrorCode::RegistryError, "action " + a.key() + " registered twice");
}

void Registry::add_classical(const Action &a) {
    check_new(defs_, a);
    defs_[a.key()] = ActionDef{a, EffectKind::Classical, {}, CMat(), {}, {}};
}

void Registry::add_unitary(const Action &a, std::vector<std::string> targets, CMat u) {
    check_new(defs_, a);
    if (static_cast<std::size_t>(u.rows()) != (std::size_t(1) << targets.size()))
        throw Error(ErrorCode::RegistryError, "matrix of " + a.key() + " does not match its targets");
    if (!is_unitary(u))
        throw Error(ErrorCode::NonUnitary, "matrix of " + a.key() + " is not unitary");
    defs_[a.key()] = ActionDef{a, EffectKind::Unitary, std::move(targets), std::move(u), {}, {}};
}

void Registry::add_projection(const Action &a, std::vector<std::string> targets, CMat p, std::string family,
                              std::optional<Rational> weight) {
    check_new(defs_, a);
    if (static_cast<std::size_t>(p.rows()) != (std::size_t(1) << targets.size()))
        throw Error(ErrorCode::RegistryError, "matrix of " + a.key() + " does not match its targets");
    if (!is_projector(p))
        throw Error(ErrorCode::NonProjector, "matrix of " + a.key() + " is not an orthogonal projector");
    defs_[a.key()] = ActionDef{a, EffectKind::Projection, std::move(targets), std::move(p), std::move(family),
                               std::move(weight)};
}

void Registry::add_gamma(const Action &a, const Action &b, const Action &c) {
    std::string ka = a.key(), kb = b.key();
    gamma_[{ka, kb}] = c;
    gamma_[{kb, ka}] = c;
}

void Registry::add_less(const std::string &lo, const std::string &hi) { less_.insert({lo, hi}); }

const ActionDef *Registry::find(const Action &a) const {
    auto it = defs_.find(a.plain_key());
    return it == defs_.end() ? nullptr : &it->second;
}

const ActionDef &Registry::require(const Action &a) const {
    const ActionDef *d = find(a);
    if (!d)
        throw Error(ErrorCode::UnknownAction, "action " + a.key() + " is not registered");
    return *d;
}

std::optional<Action> Registry::gamma(const Action &a, const Action &b) const {
    auto it = gamma_.find({a.key(), b.key()});
    if (it == gamma_.end())
        return std::nullopt;
    return it->second;
}

bool Registry::less(const Action &a, const Action &b) const { return less_closure_.count({a.key(), b.key()}) > 0; }

std::vector<std::string> Registry::family_members(const std::string &family) const {
    std::vector<std::string> out;
    for (const auto &[k, d] : defs_)
        if (d.kind == EffectKind::Projection && d.family == family)
            out.push_back(k);
    return out;
}

bool Registry::is_family(const std::string &name) const {
    for (const auto &[k, d] : defs_)
        if (d.act.name == name)
            return true;
    return false;
}

void Registry::finalize() {
    if (!init) {
        std::string zeros(regs.size(), '0');
        init = std::make_shared<const QState>(basis_state(regs, zeros));
    }
    for (const auto &[k, d] : defs_)
        for (const auto &t : d.targets) {
            bool ok = false;
            for (const auto &r : regs)
                ok = ok || r.name == t;
            if (!ok)
                throw Error(ErrorCode::UnknownRegister, "action " + k + " targets unknown register " + t);
        }
    for (const auto &[pair, c] : gamma_) {
        for (const auto &k : {pair.first, pair.second}) {
            auto it = defs_.find(k);
            if (it == defs_.end())
                throw Error(ErrorCode::UnknownAction, "communication operand " + k + " is not registered");
            if (it->second.kind != EffectKind::Classical)
                throw Error(ErrorCode::RegistryError, "communication operand " + k + " must be classical");
        }
        auto it = defs_.find(c.key());
        if (it == defs_.end() || it->second.kind != EffectKind::Classical)
            throw Error(ErrorCode::RegistryError, "communication result " + c.key() + " must be a classical action");
    }
    // Parallel operands are flattened and reordered, which is only faithful for an associative gamma.
    {
        std::set<std::string> names;
        for (const auto &[pair, c] : gamma_) {
            names.insert(pair.first);
            names.insert(c.key());
        }
        auto g = [&](const std::optional<std::string> &x, const std::optional<std::string> &y) {
            std::optional<std::string> r;
            if (x && y)
                if (auto it = gamma_.find({*x, *y}); it != gamma_.end())
                    r = it->second.key();
            return r;
        };
        for (const auto &x : names)
            for (const auto &y : names)
                for (const auto &z : names)
                    if (g(g(x, y), z) != g(x, g(y, z)))
                        throw Error(ErrorCode::RegistryError, "communication function is not associative on " + x +
                                                                  ", " + y + ", " + z);
    }
    // Families over identical targets must resolve the identity.
    std::map<std::string, std::vector<const ActionDef *>> fams;
    for (const auto &[k, d] : defs_)
        if (d.kind == EffectKind::Projection && !d.family.empty())
            fams[d.family].push_back(&d);
    for (const auto &[f, members] : fams) {
        bool same = true;
        for (const auto *m : members)
            same = same && m->targets == members[0]->targets;
        if (!same)
            continue;
        CMat sum = CMat::Zero(members[0]->matrix.rows(), members[0]->matrix.cols());
        for (const auto *m : members)
            sum += m->matrix;
        if ((sum - CMat::Identity(sum.rows(), sum.cols())).cwiseAbs().maxCoeff() > 1e-9)
            throw Error(ErrorCode::RegistryError, "measurement family " + f + " does not sum to the identity");
    }
    less_closure_ = less_;
    bool grew = true;
    while (grew) {
        grew = false;
        std::vector<std::pair<std::string, std::string>> add;
        for (const auto &[a, b] : less_closure_)
            for (const auto &[c, d] : less_closure_)
                if (b == c && !less_closure_.count({a, d}))
                    add.push_back({a, d});
        for (const auto &p : add)
            grew = less_closure_.insert(p).second || grew;
    }
    for (const auto &[a, b] : less_closure_)
        if (a == b)
            throw Error(ErrorCode::RegistryError, "priority order has a cycle through " + a);
    fingerprint_ = std::to_string(std::hash<std::string>{}(to_json().dump()));
}

json Registry::to_json() const {
    json j;
    j["registers"] = json::array();
    for (const auto &r : regs)
        j["registers"].push_back({{"name", r.name}, {"visibility", r.vis == Visibility::Public ? "public" : "internal"}});
    if (init)
        j["initial_state"] = {{"density", matrix_to_json(init->rho)}};
    j["actions"] = json::array();
    for (const auto &[k, d] : defs_) {
        json a = {{"name", d.act.name}};
        if (!d.act.idx.empty())
            a["indices"] = d.act.idx;
        switch (d.kind) {
        case EffectKind::Classical: a["kind"] = "classical"; break;
        case EffectKind::Unitary: a["kind"] = "unitary"; break;
        case EffectKind::Projection: a["kind"] = "projection"; break;
        }
        if (d.kind != EffectKind::Classical) {
            a["targets"] = d.targets;
            a["matrix"] = matrix_to_json(d.matrix);
        }
        if (!d.family.empty())
            a["family"] = d.family;
        if (d.weight)
            a["weight"] = rational_str(*d.weight);
        j["actions"].push_back(a);
    }
    j["gamma"] = json::array();
    for (const auto &[pair, c] : gamma_)
        if (pair.first <= pair.second)
            j["gamma"].push_back({pair.first, pair.second, c.key()});
    j["priority"] = json::array();
    for (const auto &[a, b] : less_)
        j["priority"].push_back({a, b});
    return j;
}

Registry Registry::from_json(const json &j) {
    Registry r;
    try {
        for (const auto &e : j.at("registers")) {
            std::string vis = e.value("visibility", "public");
            if (vis != "public" && vis != "internal")
                throw Error(ErrorCode::RegistryError, "visibility must be public or internal");
            r.add_register(e.at("name").get<std::string>(), vis == "public" ? Visibility::Public : Visibility::Internal);
        }
        std::size_t dim = std::size_t(1) << r.regs.size();
        if (j.contains("initial_state")) {
            const auto &s = j["initial_state"];
            if (s.contains("basis"))
                r.set_initial(basis_state(r.regs, s["basis"].get<std::string>()));
            else if (s.contains("density"))
                r.set_initial(make_state(r.regs, matrix_from_json(s["density"], dim)));
            else if (s.contains("pure")) {
                const auto &p = s["pure"];
                if (!p.is_array() || p.size() != dim)
                    throw Error(ErrorCode::RegistryError, "pure state needs " + std::to_string(dim) + " amplitudes");
                Eigen::VectorXcd v(static_cast<Eigen::Index>(dim));
                for (std::size_t i = 0; i < dim; ++i)
                    v(static_cast<Eigen::Index>(i)) =
                        p[i].is_number() ? cplx(p[i].get<double>(), 0) : cplx(p[i][0].get<double>(), p[i][1].get<double>());
                r.set_initial(pure_state(r.regs, v));
            } else {
                throw Error(ErrorCode::RegistryError, "initial_state needs basis, density or pure");
            }
        }
        for (const auto &e : j.value("actions", json::array())) {
            Action a;
            a.name = e.at("name").get<std::string>();
            if (e.contains("indices"))
                a.idx = e["indices"].get<std::vector<int>>();
            std::string kind = e.value("kind", "classical");
            if (kind == "classical") {
                r.add_classical(a);
                continue;
            }
            auto targets = e.at("targets").get<std::vector<std::string>>();
            CMat m = matrix_from_json(e.at("matrix"), std::size_t(1) << targets.size());
            if (kind == "unitary") {
                r.add_unitary(a, targets, m);
            } else if (kind == "projection") {
                std::optional<Rational> w;
                if (e.contains("weight"))
                    w = parse_rational(e["weight"].get<std::string>());
                r.add_projection(a, targets, m, e.value("family", ""), w);
            } else {
                throw Error(ErrorCode::RegistryError, "unknown action kind " + kind);
            }
        }
        for (const auto &g : j.value("gamma", json::array())) {
            if (!g.is_array() || g.size() != 3)
                throw Error(ErrorCode::RegistryError, "gamma entries are [a, b, result]");
            r.add_gamma(parse_action_key(g[0]), parse_action_key(g[1]), parse_action_key(g[2]));
        }
        for (const auto &p : j.value("priority", json::array())) {
            if (!p.is_array() || p.size() != 2)
                throw Error(ErrorCode::RegistryError, "priority entries are [lower, higher]");
            r.add_less(p[0].get<std::string>(), p[1].get<std::string>());
        }
    } catch (const json::exception &e) {
        throw Error(ErrorCode::RegistryError, e.what());
    }
    r.finalize();
    return r;
}

Registry Registry::load(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::RegistryError, "cannot read registry " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw Error(ErrorCode::RegistryError, std::string("malformed registry: ") + e.what());
    }
    return from_json(j);
}

namespace {

void check_atom(const Action &a, const Registry &reg) {
    const ActionDef &d = reg.require(a);
    if (a.mark != Mark::Plain && d.kind == EffectKind::Classical)
        throw Error(ErrorCode::UnknownAction, "classical action " + a.plain_key() + " has no shadow or synced form");
}

void check_set(const ActionSet &s, const Registry &reg, bool abstraction) {
    for (const auto &e : s.entries()) {
        Action a = parse_action_key(e);
        bool family = e.find('(') == std::string::npos;
        std::vector<const ActionDef *> hits;
        for (const auto &[k, d] : reg.defs())
            if (d.act.name == a.name && (family || d.act.idx == a.idx))
                hits.push_back(&d);
        if (hits.empty())
            throw Error(ErrorCode::UnknownAction, "set entry " + e + " names no registered action");
        if (!abstraction || a.mark == Mark::Shadow)
            continue;
        for (const auto *d : hits) {
            if (d->kind == EffectKind::Classical)
                continue;
            for (const auto &t : d->targets)
                for (const auto &r : reg.regs)
                    if (r.name == t && r.vis == Visibility::Public)
                        throw Error(ErrorCode::RegistryError,
                                    "abstracting " + d->act.key() + " hides an effect on public register " + t);
        }
    }
}

void check_rename(const RenameMap &f, const Registry &reg) {
    for (const auto &[from, to] : f) {
        bool any = false;
        for (const auto &[k, d] : reg.defs()) {
            if (d.act.name != from)
                continue;
            any = true;
            Action b = rename_action(f, d.act);
            const ActionDef *e = reg.find(b);
            if (!e)
                throw Error(ErrorCode::UnknownAction, "renaming sends " + k + " to unregistered " + b.key());
            bool same = e->kind == d.kind && e->targets == d.targets;
            if (same && d.kind != EffectKind::Classical)
                same = (e->matrix - d.matrix).cwiseAbs().maxCoeff() <= 1e-12;
            if (!same)
                throw Error(ErrorCode::RegistryError, "renaming " + k + " to " + b.key() + " changes its effect");
        }
        if (!any)
            throw Error(ErrorCode::UnknownAction, "renaming mentions unregistered " + from);
    }
}

}  // namespace

void elaborate(const Term &t, const Registry &reg) {
    std::unordered_set<const RecEnv *> seen;
    std::function<void(const Term &)> walk = [&](const Term &u) {
        switch (u->op) {
        case Op::Atom: check_atom(u->act, reg); break;
        case Op::Encap: check_set(*u->set, reg, false); break;
        case Op::Abstr: check_set(*u->set, reg, true); break;
        case Op::Rename: check_rename(*u->ren, reg); break;
        case Op::RecSpec:
            if (seen.insert(u->env.get()).second)
                for (const auto &[_, body] : u->env->eqs)
                    walk(body);
            break;
        default: break;
        }
        for (const auto &k : u->kids)
            walk(k);
    };
    walk(t);
}

}  // namespace pqa
