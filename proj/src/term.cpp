#include "pqa/term.hpp"

#include "pqa/error.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

namespace pqa {

std::string rational_str(const Rational &r) {
    if (denominator(r) == 1)
        return numerator(r).str();
    return numerator(r).str() + "/" + denominator(r).str();
}

Rational parse_rational(const std::string &s) {
    auto slash = s.find('/');
    try {
        if (slash == std::string::npos)
            return Rational(boost::multiprecision::cpp_int(s));
        boost::multiprecision::cpp_int num(s.substr(0, slash));
        boost::multiprecision::cpp_int den(s.substr(slash + 1));
        if (den == 0)
            throw Error(ErrorCode::BadProbability, "zero denominator in " + s);
        return Rational(num, den);
    } catch (const std::runtime_error &e) {
        if (dynamic_cast<const Error *>(&e))
            throw;
        throw Error(ErrorCode::SyntaxError, "bad rational '" + s + "'");
    }
}

static void hash_mix(std::size_t &h, std::size_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
}

std::string Action::plain_key() const {
    std::string s = name;
    if (!idx.empty()) {
        s += '(';
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (i)
                s += ',';
            s += std::to_string(idx[i]);
        }
        s += ')';
    }
    return s;
}

std::string Action::key() const {
    switch (mark) {
    case Mark::Shadow: return "@" + plain_key();
    case Mark::Synced: return plain_key() + "!";
    default: return plain_key();
    }
}

Action Action::with_mark(Mark m) const {
    Action a = *this;
    a.mark = m;
    return a;
}

Action parse_action_key(const std::string &key) {
    Action a;
    std::string s = key;
    if (!s.empty() && s[0] == '@') {
        a.mark = Mark::Shadow;
        s = s.substr(1);
    }
    if (!s.empty() && s.back() == '!') {
        if (a.mark != Mark::Plain)
            throw Error(ErrorCode::SyntaxError, "action key with two marks: " + key);
        a.mark = Mark::Synced;
        s.pop_back();
    }
    auto lp = s.find('(');
    a.name = s.substr(0, lp);
    if (a.name.empty())
        throw Error(ErrorCode::SyntaxError, "empty action name in '" + key + "'");
    if (lp != std::string::npos) {
        if (s.back() != ')')
            throw Error(ErrorCode::SyntaxError, "unbalanced parenthesis in '" + key + "'");
        std::string inner = s.substr(lp + 1, s.size() - lp - 2);
        std::stringstream ss(inner);
        std::string part;
        while (std::getline(ss, part, ',')) {
            try {
                std::size_t used = 0;
                int v = std::stoi(part, &used);
                if (used != part.size())
                    throw std::invalid_argument(part);
                a.idx.push_back(v);
            } catch (const std::exception &) {
                throw Error(ErrorCode::SyntaxError, "bad index in '" + key + "'");
            }
        }
    }
    return a;
}

ActionSet::ActionSet(std::vector<std::string> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end());
    entries_.erase(std::unique(entries_.begin(), entries_.end()), entries_.end());
    for (const auto &e : entries_) {
        Action a = parse_action_key(e);
        parsed_.push_back({a.name, a.mark, e.find('(') == std::string::npos, a.idx});
    }
}

bool ActionSet::contains(const Action &a) const {
    for (const auto &e : parsed_) {
        if (e.name != a.name || e.mark != a.mark)
            continue;
        if (e.family || e.idx == a.idx)
            return true;
    }
    return false;
}

Action rename_action(const RenameMap &f, const Action &a) {
    for (const auto &[from, to] : f) {
        if (from == a.name) {
            Action b = a;
            b.name = to;
            return b;
        }
    }
    return a;
}

const Term *RecEnv::find(const std::string &var) const {
    for (const auto &[v, t] : eqs)
        if (v == var)
            return &t;
    return nullptr;
}

namespace {

std::size_t str_hash(const std::string &s) { return std::hash<std::string>{}(s); }

std::size_t action_hash(const Action &a) {
    std::size_t h = str_hash(a.name);
    for (int i : a.idx)
        hash_mix(h, std::hash<int>{}(i));
    hash_mix(h, static_cast<std::size_t>(a.mark));
    return h;
}

bool computes_dynamic(const Node &n) {
    switch (n.op) {
    case Op::Delta:
    case Op::Tau:
    case Op::Atom: return n.dyn;
    case Op::Seq:
    case Op::LeftMerge:
    case Op::Encap:
    case Op::Abstr:
    case Op::Proj:
    case Op::Rename:
    case Op::Priority:
    case Op::Unless: return n.kids[0]->dyn;
    case Op::Alt:
    case Op::CommMerge:
    case Op::EntMerge: return n.kids[0]->dyn && n.kids[1]->dyn;
    default: return false;
    }
}

Term finish(std::shared_ptr<Node> n) {
    std::size_t h = static_cast<std::size_t>(n->op) * 0x100000001b3ULL + 17;
    bool closed = true, has_rec = false, any_dyn = false;
    std::uint32_t size = 1;
    for (const auto &k : n->kids) {
        hash_mix(h, k->hash);
        closed = closed && k->closed;
        has_rec = has_rec || k->has_rec;
        any_dyn = any_dyn || k->any_dyn;
        size += k->size;
    }
    switch (n->op) {
    case Op::Delta:
    case Op::Tau:
        hash_mix(h, n->dyn);
        any_dyn = n->dyn;
        break;
    case Op::Atom:
        hash_mix(h, action_hash(n->act));
        hash_mix(h, n->dyn);
        any_dyn = n->dyn;
        break;
    case Op::PChoice: hash_mix(h, std::hash<std::string>{}(rational_str(n->prob))); break;
    case Op::Proj: hash_mix(h, std::hash<int>{}(n->n)); break;
    case Op::Encap:
    case Op::Abstr:
        for (const auto &e : n->set->entries())
            hash_mix(h, str_hash(e));
        break;
    case Op::Rename:
        for (const auto &[a, b] : *n->ren) {
            hash_mix(h, str_hash(a));
            hash_mix(h, str_hash(b));
        }
        break;
    case Op::RecVar:
        hash_mix(h, str_hash(n->var));
        closed = false;
        break;
    case Op::RecSpec:
        hash_mix(h, str_hash(n->var));
        hash_mix(h, n->env->hash);
        closed = n->env->free.empty();
        has_rec = true;
        break;
    default: break;
    }
    n->hash = h;
    n->closed = closed;
    n->has_rec = has_rec;
    n->any_dyn = any_dyn;
    n->size = size;
    n->dyn = computes_dynamic(*n);
    return n;
}

std::shared_ptr<Node> node(Op op, std::vector<Term> kids = {}) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->kids = std::move(kids);
    return n;
}

void free_vars(const Term &t, std::set<std::string> &out) {
    if (t->closed)
        return;
    if (t->op == Op::RecVar) {
        out.insert(t->var);
        return;
    }
    if (t->op == Op::RecSpec) {
        out.insert(t->env->free.begin(), t->env->free.end());
        return;
    }
    for (const auto &k : t->kids)
        free_vars(k, out);
}

}  // namespace

Term mk_delta(bool dyn) {
    auto n = node(Op::Delta);
    n->dyn = dyn;
    return finish(n);
}

Term mk_tau(bool dyn) {
    auto n = node(Op::Tau);
    n->dyn = dyn;
    return finish(n);
}

Term mk_atom(const Action &a, bool dyn) {
    auto n = node(Op::Atom);
    n->act = a;
    n->dyn = dyn;
    return finish(n);
}

Term mk_atom(const std::string &name, std::vector<int> idx, Mark m) {
    return mk_atom(Action{name, std::move(idx), m});
}

Term mk_seq(const Term &x, const Term &y) { return finish(node(Op::Seq, {x, y})); }
Term mk_alt(const Term &x, const Term &y) { return finish(node(Op::Alt, {x, y})); }

Term mk_pchoice(const Term &x, const Rational &p, const Term &y) {
    if (p <= 0 || p >= 1)
        throw Error(ErrorCode::BadProbability, "choice weight " + rational_str(p) + " outside (0,1)");
    auto n = node(Op::PChoice, {x, y});
    n->prob = p;
    return finish(n);
}

Term mk_par(const Term &x, const Term &y) { return finish(node(Op::Par, {x, y})); }

Term mk_mergemem(const Term &x, const Term &z, const Term &y, const Term &w) {
    return finish(node(Op::MergeMem, {x, z, y, w}));
}

Term mk_lmerge(const Term &x, const Term &y) { return finish(node(Op::LeftMerge, {x, y})); }
Term mk_cmerge(const Term &x, const Term &y) { return finish(node(Op::CommMerge, {x, y})); }
Term mk_emerge(const Term &x, const Term &y) { return finish(node(Op::EntMerge, {x, y})); }

Term mk_encap(std::shared_ptr<const ActionSet> h, const Term &x) {
    auto n = node(Op::Encap, {x});
    n->set = std::move(h);
    return finish(n);
}

Term mk_abstr(std::shared_ptr<const ActionSet> i, const Term &x) {
    auto n = node(Op::Abstr, {x});
    n->set = std::move(i);
    return finish(n);
}

Term mk_proj(int k, const Term &x) {
    if (k < 1)
        throw Error(ErrorCode::SyntaxError, "projection index must be positive");
    auto n = node(Op::Proj, {x});
    n->n = k;
    return finish(n);
}

Term mk_rename(std::shared_ptr<const RenameMap> f, const Term &x) {
    auto n = node(Op::Rename, {x});
    n->ren = std::move(f);
    return finish(n);
}

Term mk_priority(const Term &x) { return finish(node(Op::Priority, {x})); }
Term mk_unless(const Term &x, const Term &y) { return finish(node(Op::Unless, {x, y})); }

Term mk_var(const std::string &v) {
    auto n = node(Op::RecVar);
    n->var = v;
    return finish(n);
}

Term mk_rec(const std::string &v, EnvPtr env) {
    if (!env->find(v))
        throw Error(ErrorCode::UnboundVariable, "variable " + v + " has no equation");
    auto n = node(Op::RecSpec);
    n->var = v;
    n->env = std::move(env);
    return finish(n);
}

EnvPtr mk_env(std::vector<std::pair<std::string, Term>> eqs) {
    auto e = std::make_shared<RecEnv>();
    std::set<std::string> bound, fv;
    std::size_t h = 0x51ed27;
    for (const auto &[v, t] : eqs) {
        if (!bound.insert(v).second)
            throw Error(ErrorCode::SyntaxError, "duplicate equation for " + v);
        hash_mix(h, str_hash(v));
        hash_mix(h, t->hash);
        free_vars(t, fv);
    }
    for (const auto &v : fv)
        if (!bound.count(v))
            e->free.push_back(v);
    e->eqs = std::move(eqs);
    e->hash = h;
    return e;
}

Term with_kids(const Term &t, std::vector<Term> kids) {
    auto n = std::make_shared<Node>(*t);
    n->kids = std::move(kids);
    return finish(n);
}

static bool env_eq(const EnvPtr &a, const EnvPtr &b) {
    if (a == b)
        return true;
    if (a->hash != b->hash || a->eqs.size() != b->eqs.size())
        return false;
    for (std::size_t i = 0; i < a->eqs.size(); ++i)
        if (a->eqs[i].first != b->eqs[i].first || !term_eq(a->eqs[i].second, b->eqs[i].second))
            return false;
    return true;
}

bool term_eq(const Term &a, const Term &b) {
    if (a == b)
        return true;
    if (a->hash != b->hash || a->op != b->op || a->size != b->size || a->dyn != b->dyn)
        return false;
    switch (a->op) {
    case Op::Atom:
        if (a->act != b->act)
            return false;
        break;
    case Op::PChoice:
        if (a->prob != b->prob)
            return false;
        break;
    case Op::Proj:
        if (a->n != b->n)
            return false;
        break;
    case Op::Encap:
    case Op::Abstr:
        if (!(*a->set == *b->set))
            return false;
        break;
    case Op::Rename:
        if (*a->ren != *b->ren)
            return false;
        break;
    case Op::RecVar: return a->var == b->var;
    case Op::RecSpec: return a->var == b->var && env_eq(a->env, b->env);
    default: break;
    }
    for (std::size_t i = 0; i < a->kids.size(); ++i)
        if (!term_eq(a->kids[i], b->kids[i]))
            return false;
    return true;
}

static int env_cmp(const EnvPtr &a, const EnvPtr &b);

int term_cmp(const Term &a, const Term &b) {
    if (a == b)
        return 0;
    if (a->op != b->op)
        return a->op < b->op ? -1 : 1;
    if (a->hash != b->hash)
        return a->hash < b->hash ? -1 : 1;
    if (a->dyn != b->dyn)
        return a->dyn ? 1 : -1;
    switch (a->op) {
    case Op::Atom:
        if (a->act != b->act)
            return a->act < b->act ? -1 : 1;
        break;
    case Op::PChoice:
        if (a->prob != b->prob)
            return a->prob < b->prob ? -1 : 1;
        break;
    case Op::Proj:
        if (a->n != b->n)
            return a->n < b->n ? -1 : 1;
        break;
    case Op::Encap:
    case Op::Abstr:
        if (a->set->entries() != b->set->entries())
            return a->set->entries() < b->set->entries() ? -1 : 1;
        break;
    case Op::Rename:
        if (*a->ren != *b->ren)
            return *a->ren < *b->ren ? -1 : 1;
        break;
    case Op::RecVar: return a->var.compare(b->var);
    case Op::RecSpec:
        if (a->var != b->var)
            return a->var < b->var ? -1 : 1;
        return env_cmp(a->env, b->env);
    default: break;
    }
    if (a->kids.size() != b->kids.size())
        return a->kids.size() < b->kids.size() ? -1 : 1;
    for (std::size_t i = 0; i < a->kids.size(); ++i)
        if (int c = term_cmp(a->kids[i], b->kids[i]))
            return c;
    return 0;
}

static int env_cmp(const EnvPtr &a, const EnvPtr &b) {
    if (a == b)
        return 0;
    if (a->eqs.size() != b->eqs.size())
        return a->eqs.size() < b->eqs.size() ? -1 : 1;
    for (std::size_t i = 0; i < a->eqs.size(); ++i) {
        if (int c = a->eqs[i].first.compare(b->eqs[i].first))
            return c;
        if (int c = term_cmp(a->eqs[i].second, b->eqs[i].second))
            return c;
    }
    return 0;
}

namespace {

int prec(const Term &t) {
    switch (t->op) {
    case Op::PChoice: return 1;
    case Op::Alt: return 2;
    case Op::Par: return 3;
    case Op::LeftMerge: return 4;
    case Op::EntMerge: return 5;
    case Op::CommMerge: return 6;
    case Op::Unless: return 7;
    case Op::Seq: return 8;
    default: return 10;
    }
}

const char *op_symbol(Op op) {
    switch (op) {
    case Op::Alt: return " + ";
    case Op::Par: return " || ";
    case Op::LeftMerge: return " ||_ ";
    case Op::EntMerge: return " <> ";
    case Op::CommMerge: return " | ";
    case Op::Unless: return " <| ";
    case Op::Seq: return " . ";
    default: return " ? ";
    }
}

void print_set(std::ostream &os, const ActionSet &s) {
    os << '{';
    for (std::size_t i = 0; i < s.entries().size(); ++i)
        os << (i ? ", " : "") << s.entries()[i];
    os << '}';
}

void print_rec(std::ostream &os, const Term &t);

void emit(std::ostream &os, const Term &t, int ctx) {
    bool paren = prec(t) < ctx;
    if (paren)
        os << '(';
    switch (t->op) {
    case Op::Delta: os << (t->dyn ? "~delta" : "delta"); break;
    case Op::Tau: os << (t->dyn ? "~tau" : "tau"); break;
    case Op::Atom: os << (t->dyn ? "~" : "") << t->act.key(); break;
    case Op::PChoice:
        emit(os, t->kids[0], 2);
        os << " [+" << rational_str(t->prob) << "] ";
        emit(os, t->kids[1], 2);
        break;
    case Op::Seq:
    case Op::Alt:
    case Op::Par:
    case Op::LeftMerge:
    case Op::EntMerge:
    case Op::CommMerge:
    case Op::Unless: {
        int p = prec(t);
        emit(os, t->kids[0], p + 1);
        os << op_symbol(t->op);
        emit(os, t->kids[1], p);
        break;
    }
    case Op::MergeMem:
        os << '(';
        emit(os, t->kids[0], 0);
        os << ", ";
        emit(os, t->kids[1], 0);
        os << ") ][ (";
        emit(os, t->kids[2], 0);
        os << ", ";
        emit(os, t->kids[3], 0);
        os << ')';
        break;
    case Op::Encap:
    case Op::Abstr:
        os << (t->op == Op::Encap ? "encap" : "abstr");
        print_set(os, *t->set);
        os << '(';
        emit(os, t->kids[0], 0);
        os << ')';
        break;
    case Op::Proj:
        os << "proj[" << t->n << "](";
        emit(os, t->kids[0], 0);
        os << ')';
        break;
    case Op::Rename:
        os << "rename[";
        for (std::size_t i = 0; i < t->ren->size(); ++i)
            os << (i ? ", " : "") << (*t->ren)[i].first << "->" << (*t->ren)[i].second;
        os << "](";
        emit(os, t->kids[0], 0);
        os << ')';
        break;
    case Op::Priority:
        os << "theta(";
        emit(os, t->kids[0], 0);
        os << ')';
        break;
    case Op::RecVar: os << t->var; break;
    case Op::RecSpec: print_rec(os, t); break;
    }
    if (paren)
        os << ')';
}

void print_rec(std::ostream &os, const Term &t) {
    os << "rec " << t->var << " where { ";
    for (std::size_t i = 0; i < t->env->eqs.size(); ++i) {
        if (i)
            os << "; ";
        os << t->env->eqs[i].first << " = ";
        emit(os, t->env->eqs[i].second, 0);
    }
    os << " }";
}

}  // namespace

std::string print(const Term &t) {
    std::ostringstream os;
    emit(os, t, 0);
    return os.str();
}

bool is_static(const Term &t) { return !t->any_dyn; }
bool is_dynamic(const Term &t) { return t->dyn; }

bool is_basic_plus(const Term &t) {
    if (t->any_dyn || t->has_rec || !t->closed)
        return false;
    switch (t->op) {
    case Op::Delta:
    case Op::Tau:
    case Op::Atom: return true;
    case Op::Seq: {
        Op h = t->kids[0]->op;
        return (h == Op::Atom || h == Op::Tau) && is_basic_term(t->kids[1]);
    }
    case Op::Alt: return is_basic_plus(t->kids[0]) && is_basic_plus(t->kids[1]);
    default: return false;
    }
}

bool is_basic_term(const Term &t) {
    if (t->op == Op::PChoice)
        return is_basic_term(t->kids[0]) && is_basic_term(t->kids[1]);
    return is_basic_plus(t);
}

Term substitute(const Term &t, const std::vector<std::pair<std::string, Term>> &sub) {
    if (t->closed || sub.empty())
        return t;
    if (t->op == Op::RecVar) {
        for (const auto &[v, r] : sub)
            if (v == t->var)
                return r;
        return t;
    }
    if (t->op == Op::RecSpec) {
        std::vector<std::pair<std::string, Term>> inner;
        for (const auto &p : sub)
            if (!t->env->find(p.first))
                inner.push_back(p);
        if (inner.empty())
            return t;
        std::vector<std::pair<std::string, Term>> eqs;
        for (const auto &[v, body] : t->env->eqs)
            eqs.emplace_back(v, substitute(body, inner));
        return mk_rec(t->var, mk_env(std::move(eqs)));
    }
    std::vector<Term> kids;
    kids.reserve(t->kids.size());
    bool changed = false;
    for (const auto &k : t->kids) {
        kids.push_back(substitute(k, sub));
        changed = changed || kids.back() != k;
    }
    return changed ? with_kids(t, std::move(kids)) : t;
}

Term unfold(const std::string &var, const EnvPtr &env) {
    const Term *body = env->find(var);
    if (!body)
        throw Error(ErrorCode::UnboundVariable, "variable " + var + " has no equation");
    std::vector<std::pair<std::string, Term>> sub;
    for (const auto &[v, _] : env->eqs)
        sub.emplace_back(v, mk_rec(v, env));
    return substitute(*body, sub);
}

namespace {

// Variables reachable in t without passing an action prefix.
void unguarded_vars(const Term &t, std::set<std::string> &out) {
    switch (t->op) {
    case Op::RecVar: out.insert(t->var); return;
    case Op::Seq:
    case Op::LeftMerge: unguarded_vars(t->kids[0], out); return;
    case Op::MergeMem:
        unguarded_vars(t->kids[0], out);
        unguarded_vars(t->kids[2], out);
        return;
    case Op::RecSpec:
        for (const auto &[v, body] : t->env->eqs) {
            std::set<std::string> inner;
            unguarded_vars(body, inner);
            for (const auto &x : inner)
                if (!t->env->find(x))
                    out.insert(x);
        }
        return;
    default:
        for (const auto &k : t->kids)
            unguarded_vars(k, out);
    }
}

}  // namespace

void check_guarded(const EnvPtr &env) {
    std::map<std::string, std::set<std::string>> deps;
    for (const auto &[v, body] : env->eqs) {
        std::set<std::string> u;
        unguarded_vars(body, u);
        for (const auto &x : u)
            if (env->find(x))
                deps[v].insert(x);
    }
    std::map<std::string, int> colour;
    std::function<void(const std::string &)> dfs = [&](const std::string &v) {
        colour[v] = 1;
        for (const auto &w : deps[v]) {
            if (colour[w] == 1)
                throw Error(ErrorCode::UnguardedRecursion, "variable " + w + " occurs unguarded");
            if (colour[w] == 0)
                dfs(w);
        }
        colour[v] = 2;
    };
    for (const auto &[v, _] : env->eqs)
        if (colour[v] == 0)
            dfs(v);
}

void collect_actions(const Term &t, std::vector<Action> &out) {
    std::unordered_set<const RecEnv *> seen;
    std::function<void(const Term &)> walk = [&](const Term &u) {
        if (u->op == Op::Atom)
            out.push_back(u->act);
        if (u->op == Op::RecSpec && seen.insert(u->env.get()).second)
            for (const auto &[_, body] : u->env->eqs)
                walk(body);
        for (const auto &k : u->kids)
            walk(k);
    };
    walk(t);
}

Term subterm_at(const Term &t, const std::vector<int> &path) {
    Term cur = t;
    for (int i : path) {
        if (i < 0 || static_cast<std::size_t>(i) >= cur->kids.size())
            throw Error(ErrorCode::NoMatch, "path " + path_str(path) + " leaves the term");
        cur = cur->kids[i];
    }
    return cur;
}

static Term replace_rec(const Term &t, const std::vector<int> &path, std::size_t at, const Term &r) {
    if (at == path.size())
        return r;
    int i = path[at];
    if (i < 0 || static_cast<std::size_t>(i) >= t->kids.size())
        throw Error(ErrorCode::NoMatch, "path " + path_str(path) + " leaves the term");
    auto kids = t->kids;
    kids[i] = replace_rec(kids[i], path, at + 1, r);
    return with_kids(t, std::move(kids));
}

Term replace_at(const Term &t, const std::vector<int> &path, const Term &r) { return replace_rec(t, path, 0, r); }

std::string path_str(const std::vector<int> &path) {
    if (path.empty())
        return "/";
    std::string s;
    for (int i : path)
        s += "/" + std::to_string(i);
    return s;
}

std::vector<int> parse_path(const std::string &s) {
    std::vector<int> p;
    if (s.empty() || s[0] != '/')
        throw Error(ErrorCode::SyntaxError, "path must start with '/'");
    std::stringstream ss(s.substr(1));
    std::string part;
    while (std::getline(ss, part, '/')) {
        if (part.empty())
            continue;
        try {
            p.push_back(std::stoi(part));
        } catch (const std::exception &) {
            throw Error(ErrorCode::SyntaxError, "bad path component '" + part + "'");
        }
    }
    return p;
}

}  // namespace pqa
