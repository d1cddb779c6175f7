#include "pqa/rewriter.hpp"

#include "pqa/error.hpp"

#include <functional>
#include <map>

namespace pqa {

std::string RewriteStep::text() const {
    return axiom + " @ " + path_str(path) + " : " + print(before) + " => " + print(after);
}

bool deterministic_shape(const Term &x) {
    switch (x->op) {
    case Op::Delta:
    case Op::Tau:
    case Op::Atom: return true;
    case Op::Seq:
    case Op::LeftMerge:
    case Op::Unless:
    case Op::Encap:
    case Op::Abstr:
    case Op::Proj:
    case Op::Rename:
    case Op::Priority: return deterministic_shape(x->kids[0]);
    case Op::Alt:
    case Op::CommMerge:
    case Op::EntMerge:
    case Op::Par: return deterministic_shape(x->kids[0]) && deterministic_shape(x->kids[1]);
    case Op::MergeMem: return deterministic_shape(x->kids[0]) && deterministic_shape(x->kids[2]);
    default: return false;
    }
}

static bool contains_op(const Term &t, std::initializer_list<Op> ops) {
    for (Op o : ops)
        if (t->op == o)
            return true;
    for (const auto &k : t->kids)
        if (contains_op(k, ops))
            return true;
    return false;
}

bool mixes_abstraction_with_choice(const Term &t) {
    std::function<bool(const Term &, bool)> walk = [&](const Term &u, bool under_choice) {
        if (u->op == Op::Abstr) {
            const Term &body = u->kids[0];
            bool alt = contains_op(body, {Op::Alt, Op::Par, Op::MergeMem});
            bool choice = under_choice || contains_op(body, {Op::PChoice});
            if (alt && choice)
                return true;
        }
        for (std::size_t i = 0; i < u->kids.size(); ++i)
            if (walk(u->kids[i], under_choice || u->op == Op::PChoice))
                return true;
        return false;
    };
    return walk(t, false);
}

namespace {

enum class St { Ok, NoMatch, Side };

struct Res {
    St st;
    Term out;
    std::string why;
};

Res ok(Term t) { return {St::Ok, std::move(t), {}}; }
Res nomatch() { return {St::NoMatch, nullptr, {}}; }
Res side(std::string why) { return {St::Side, nullptr, std::move(why)}; }

bool atom_like(const Term &t) { return !t->dyn && (t->op == Op::Atom || t->op == Op::Tau || t->op == Op::Delta); }
bool is_delta(const Term &t) { return t->op == Op::Delta; }
bool prefixed(const Term &t) { return t->op == Op::Seq && atom_like(t->kids[0]); }

const Term &K(const Term &t, int i) { return t->kids[static_cast<std::size_t>(i)]; }

std::optional<Action> label_of(const Term &t) {
    if (t->op == Op::Atom)
        return t->act;
    if (t->op == Op::Tau)
        return tau_label();
    return std::nullopt;
}

bool quantum_plain(const Term &t, const Registry &reg) {
    if (t->op != Op::Atom || t->act.mark != Mark::Plain)
        return false;
    const ActionDef *d = reg.find(t->act);
    return d && d->kind != EffectKind::Classical;
}

bool shadow_of(const Term &s, const Term &a) {
    return s->op == Op::Atom && s->act.mark == Mark::Shadow && s->act == a->act.with_mark(Mark::Shadow);
}

Term synced(const Term &a) { return mk_atom(a->act.with_mark(Mark::Synced)); }

using Fn = std::function<Res(const Term &, const Registry &)>;

#define MATCH(cond)                                                                                                    \
    if (!(cond))                                                                                                       \
    return nomatch()

// Entanglement merge with the quantum action on side `qa` (0 or 1), tails as given.
Res em(const Term &t, const Registry &reg, int qa, bool left_tail, bool right_tail) {
    MATCH(t->op == Op::EntMerge);
    const Term &x = K(t, 0), &y = K(t, 1);
    MATCH(left_tail ? prefixed(x) : atom_like(x));
    MATCH(right_tail ? prefixed(y) : atom_like(y));
    const Term &hx = left_tail ? K(x, 0) : x;
    const Term &hy = right_tail ? K(y, 0) : y;
    const Term &q = qa == 0 ? hx : hy;
    const Term &s = qa == 0 ? hy : hx;
    MATCH(quantum_plain(q, reg) && shadow_of(s, q));
    Term head = synced(q);
    if (left_tail && right_tail)
        return ok(mk_seq(head, mk_par(K(x, 1), K(y, 1))));
    if (left_tail)
        return ok(mk_seq(head, K(x, 1)));
    if (right_tail)
        return ok(mk_seq(head, K(y, 1)));
    return ok(head);
}

const std::map<std::string, Fn> &table() {
    static const std::map<std::string, Fn> t = [] {
        std::map<std::string, Fn> m;
        // probabilistic basic process algebra
        m["A5"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Seq && K(t, 0)->op == Op::Seq);
            return ok(mk_seq(K(K(t, 0), 0), mk_seq(K(K(t, 0), 1), K(t, 1))));
        };
        m["PrAC1"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::PChoice);
            return ok(mk_pchoice(K(t, 1), 1 - t->prob, K(t, 0)));
        };
        m["PrAC2"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::PChoice && K(t, 1)->op == Op::PChoice);
            const Rational &p = t->prob, &r = K(t, 1)->prob;
            Rational outer = p + r - p * r;
            return ok(mk_pchoice(mk_pchoice(K(t, 0), p / outer, K(K(t, 1), 0)), outer, K(K(t, 1), 1)));
        };
        m["PrAC3"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::PChoice && term_eq(K(t, 0), K(t, 1)));
            return ok(K(t, 0));
        };
        m["PrAC4"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Seq && K(t, 0)->op == Op::PChoice);
            const Term &c = K(t, 0);
            return ok(mk_pchoice(mk_seq(K(c, 0), K(t, 1)), c->prob, mk_seq(K(c, 1), K(t, 1))));
        };
        m["A1"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Alt);
            return ok(mk_alt(K(t, 1), K(t, 0)));
        };
        m["A2"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Alt && K(t, 0)->op == Op::Alt);
            return ok(mk_alt(K(K(t, 0), 0), mk_alt(K(K(t, 0), 1), K(t, 1))));
        };
        m["AA3"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Alt && atom_like(K(t, 0)) && term_eq(K(t, 0), K(t, 1)));
            return ok(K(t, 0));
        };
        m["A4"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Seq && K(t, 0)->op == Op::Alt);
            const Term &a = K(t, 0);
            return ok(mk_alt(mk_seq(K(a, 0), K(t, 1)), mk_seq(K(a, 1), K(t, 1))));
        };
        m["PrAC5"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Alt && K(t, 0)->op == Op::PChoice);
            const Term &c = K(t, 0);
            return ok(mk_pchoice(mk_alt(K(c, 0), K(t, 1)), c->prob, mk_alt(K(c, 1), K(t, 1))));
        };
        m["A6"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Alt && is_delta(K(t, 1)));
            return ok(K(t, 0));
        };
        m["A7"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Seq && is_delta(K(t, 0)));
            return ok(mk_delta());
        };
        // projections
        m["PR1"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Proj && atom_like(K(t, 0)));
            return ok(K(t, 0));
        };
        m["PR2"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Proj && t->n == 1 && prefixed(K(t, 0)));
            return ok(K(K(t, 0), 0));
        };
        m["PR3"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Proj && t->n > 1 && prefixed(K(t, 0)));
            return ok(mk_seq(K(K(t, 0), 0), mk_proj(t->n - 1, K(K(t, 0), 1))));
        };
        m["PR4"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Proj && K(t, 0)->op == Op::Alt);
            return ok(mk_alt(mk_proj(t->n, K(K(t, 0), 0)), mk_proj(t->n, K(K(t, 0), 1))));
        };
        m["prPR"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Proj && K(t, 0)->op == Op::PChoice);
            const Term &c = K(t, 0);
            return ok(mk_pchoice(mk_proj(t->n, K(c, 0)), c->prob, mk_proj(t->n, K(c, 1))));
        };
        // merges
        m["PrMM1"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Par);
            return ok(mk_mergemem(K(t, 0), K(t, 0), K(t, 1), K(t, 1)));
        };
        m["PrMM2"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::MergeMem && K(t, 0)->op == Op::PChoice);
            const Term &c = K(t, 0);
            return ok(mk_pchoice(mk_mergemem(K(c, 0), K(t, 1), K(t, 2), K(t, 3)), c->prob,
                                 mk_mergemem(K(c, 1), K(t, 1), K(t, 2), K(t, 3))));
        };
        m["PrMM3"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::MergeMem && K(t, 2)->op == Op::PChoice);
            const Term &c = K(t, 2);
            return ok(mk_pchoice(mk_mergemem(K(t, 0), K(t, 1), K(c, 0), K(t, 3)), c->prob,
                                 mk_mergemem(K(t, 0), K(t, 1), K(c, 1), K(t, 3))));
        };
        m["PrMM4"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::MergeMem);
            const Term &x = K(t, 0), &z = K(t, 1), &y = K(t, 2), &w = K(t, 3);
            if (!deterministic_shape(x) || !deterministic_shape(y))
                return side("both active components need a single probabilistic resolution");
            return ok(mk_alt(mk_lmerge(x, w), mk_alt(mk_lmerge(y, z), mk_alt(mk_cmerge(x, y), mk_emerge(x, y)))));
        };
        m["CF"] = [](const Term &t, const Registry &reg) {
            MATCH(t->op == Op::CommMerge && atom_like(K(t, 0)) && atom_like(K(t, 1)));
            auto a = label_of(K(t, 0)), b = label_of(K(t, 1));
            if (a && b && !is_tau(*a) && !is_tau(*b))
                if (auto c = reg.gamma(*a, *b))
                    return ok(mk_atom(*c));
            return ok(mk_delta());
        };
        m["CM2"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::LeftMerge && atom_like(K(t, 0)));
            return ok(mk_seq(K(t, 0), K(t, 1)));
        };
        m["CM3"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::LeftMerge && prefixed(K(t, 0)));
            return ok(mk_seq(K(K(t, 0), 0), mk_par(K(K(t, 0), 1), K(t, 1))));
        };
        m["CM4"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::LeftMerge && K(t, 0)->op == Op::Alt);
            return ok(mk_alt(mk_lmerge(K(K(t, 0), 0), K(t, 1)), mk_lmerge(K(K(t, 0), 1), K(t, 1))));
        };
        m["PrCM1"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::LeftMerge && K(t, 0)->op == Op::PChoice);
            const Term &c = K(t, 0);
            return ok(mk_pchoice(mk_lmerge(K(c, 0), K(t, 1)), c->prob, mk_lmerge(K(c, 1), K(t, 1))));
        };
        m["CM5"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::CommMerge && atom_like(K(t, 0)) && prefixed(K(t, 1)));
            return ok(mk_seq(mk_cmerge(K(t, 0), K(K(t, 1), 0)), K(K(t, 1), 1)));
        };
        m["CM6"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::CommMerge && prefixed(K(t, 0)) && atom_like(K(t, 1)));
            return ok(mk_seq(mk_cmerge(K(K(t, 0), 0), K(t, 1)), K(K(t, 0), 1)));
        };
        m["CM7"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::CommMerge && prefixed(K(t, 0)) && prefixed(K(t, 1)));
            return ok(mk_seq(mk_cmerge(K(K(t, 0), 0), K(K(t, 1), 0)), mk_par(K(K(t, 0), 1), K(K(t, 1), 1))));
        };
        m["PrCM2"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::CommMerge && K(t, 0)->op == Op::PChoice);
            const Term &c = K(t, 0);
            return ok(mk_pchoice(mk_cmerge(K(c, 0), K(t, 1)), c->prob, mk_cmerge(K(c, 1), K(t, 1))));
        };
        m["PrCM3"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::CommMerge && K(t, 1)->op == Op::PChoice);
            const Term &c = K(t, 1);
            return ok(mk_pchoice(mk_cmerge(K(t, 0), K(c, 0)), c->prob, mk_cmerge(K(t, 0), K(c, 1))));
        };
        m["PrCM4"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::CommMerge && K(t, 0)->op == Op::Alt);
            if (!deterministic_shape(K(t, 1)))
                return side("right operand needs a single probabilistic resolution");
            const Term &a = K(t, 0);
            return ok(mk_alt(mk_cmerge(K(a, 0), K(t, 1)), mk_cmerge(K(a, 1), K(t, 1))));
        };
        m["PrCM5"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::CommMerge && K(t, 1)->op == Op::Alt);
            if (!deterministic_shape(K(t, 0)))
                return side("left operand needs a single probabilistic resolution");
            const Term &a = K(t, 1);
            return ok(mk_alt(mk_cmerge(K(t, 0), K(a, 0)), mk_cmerge(K(t, 0), K(a, 1))));
        };
        // encapsulation
        m["D1"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Encap && atom_like(K(t, 0)));
            auto a = label_of(K(t, 0));
            if (a && t->set->contains(*a))
                return side(a->key() + " is encapsulated");
            return ok(K(t, 0));
        };
        m["D2"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Encap && atom_like(K(t, 0)));
            auto a = label_of(K(t, 0));
            if (!a || !t->set->contains(*a))
                return side("action is not encapsulated");
            return ok(mk_delta());
        };
        m["D3"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Encap && K(t, 0)->op == Op::Alt);
            return ok(mk_alt(mk_encap(t->set, K(K(t, 0), 0)), mk_encap(t->set, K(K(t, 0), 1))));
        };
        m["D4"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Encap && K(t, 0)->op == Op::Seq);
            return ok(mk_seq(mk_encap(t->set, K(K(t, 0), 0)), mk_encap(t->set, K(K(t, 0), 1))));
        };
        m["PrD5"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Encap && K(t, 0)->op == Op::PChoice);
            const Term &c = K(t, 0);
            return ok(mk_pchoice(mk_encap(t->set, K(c, 0)), c->prob, mk_encap(t->set, K(c, 1))));
        };
        // entanglement merge
        m["EM1"] = [](const Term &t, const Registry &r) { return em(t, r, 0, false, false); };
        m["EM2"] = [](const Term &t, const Registry &r) { return em(t, r, 1, false, false); };
        m["EM3"] = [](const Term &t, const Registry &r) { return em(t, r, 0, false, true); };
        m["EM4"] = [](const Term &t, const Registry &r) { return em(t, r, 1, false, true); };
        m["EM5"] = [](const Term &t, const Registry &r) { return em(t, r, 0, true, false); };
        m["EM6"] = [](const Term &t, const Registry &r) { return em(t, r, 1, true, false); };
        m["EM7"] = [](const Term &t, const Registry &r) { return em(t, r, 0, true, true); };
        m["EM8"] = [](const Term &t, const Registry &r) { return em(t, r, 1, true, true); };
        m["EM0"] = [](const Term &t, const Registry &reg) {
            MATCH(t->op == Op::EntMerge);
            const Term &x = K(t, 0), &y = K(t, 1);
            MATCH((atom_like(x) || prefixed(x)) && (atom_like(y) || prefixed(y)));
            const Term &hx = atom_like(x) ? x : K(x, 0);
            const Term &hy = atom_like(y) ? y : K(y, 0);
            bool pair = (quantum_plain(hx, reg) && shadow_of(hy, hx)) || (quantum_plain(hy, reg) && shadow_of(hx, hy));
            if (pair)
                return side("heads synchronise");
            return ok(mk_delta());
        };
        m["PrEM1"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::EntMerge && K(t, 0)->op == Op::PChoice);
            const Term &c = K(t, 0);
            return ok(mk_pchoice(mk_emerge(K(c, 0), K(t, 1)), c->prob, mk_emerge(K(c, 1), K(t, 1))));
        };
        m["PrEM2"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::EntMerge && K(t, 1)->op == Op::PChoice);
            const Term &c = K(t, 1);
            return ok(mk_pchoice(mk_emerge(K(t, 0), K(c, 0)), c->prob, mk_emerge(K(t, 0), K(c, 1))));
        };
        m["PrEM3"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::EntMerge && K(t, 0)->op == Op::Alt);
            if (!deterministic_shape(K(t, 1)))
                return side("right operand needs a single probabilistic resolution");
            const Term &a = K(t, 0);
            return ok(mk_alt(mk_emerge(K(a, 0), K(t, 1)), mk_emerge(K(a, 1), K(t, 1))));
        };
        m["PrEM4"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::EntMerge && K(t, 1)->op == Op::Alt);
            if (!deterministic_shape(K(t, 0)))
                return side("left operand needs a single probabilistic resolution");
            const Term &a = K(t, 1);
            return ok(mk_alt(mk_emerge(K(t, 0), K(a, 0)), mk_emerge(K(t, 0), K(a, 1))));
        };
        // renaming
        m["RN1"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Rename && (K(t, 0)->op == Op::Atom || K(t, 0)->op == Op::Tau));
            if (K(t, 0)->op == Op::Tau)
                return ok(mk_tau());
            return ok(mk_atom(rename_action(*t->ren, K(t, 0)->act)));
        };
        m["RN2"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Rename && is_delta(K(t, 0)));
            return ok(mk_delta());
        };
        m["RN3"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Rename && K(t, 0)->op == Op::Alt);
            return ok(mk_alt(mk_rename(t->ren, K(K(t, 0), 0)), mk_rename(t->ren, K(K(t, 0), 1))));
        };
        m["RN4"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Rename && K(t, 0)->op == Op::Seq);
            return ok(mk_seq(mk_rename(t->ren, K(K(t, 0), 0)), mk_rename(t->ren, K(K(t, 0), 1))));
        };
        m["PrRN1"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Rename && K(t, 0)->op == Op::PChoice);
            const Term &c = K(t, 0);
            return ok(mk_pchoice(mk_rename(t->ren, K(c, 0)), c->prob, mk_rename(t->ren, K(c, 1))));
        };
        // priority
        m["TH1"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Priority && atom_like(K(t, 0)));
            return ok(K(t, 0));
        };
        m["TH2"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Priority && K(t, 0)->op == Op::Seq);
            return ok(mk_seq(mk_priority(K(K(t, 0), 0)), mk_priority(K(K(t, 0), 1))));
        };
        m["PrTH4"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Priority && K(t, 0)->op == Op::PChoice);
            const Term &c = K(t, 0);
            return ok(mk_pchoice(mk_priority(K(c, 0)), c->prob, mk_priority(K(c, 1))));
        };
        m["DyTH3"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Priority && K(t, 0)->op == Op::Alt);
            const Term &x = K(K(t, 0), 0), &y = K(K(t, 0), 1);
            if (!deterministic_shape(x) || !deterministic_shape(y))
                return side("summands need a single probabilistic resolution");
            return ok(mk_alt(mk_unless(mk_priority(x), y), mk_unless(mk_priority(y), x)));
        };
        m["P1"] = [](const Term &t, const Registry &reg) {
            MATCH(t->op == Op::Unless && atom_like(K(t, 0)) && atom_like(K(t, 1)));
            auto a = label_of(K(t, 0)), b = label_of(K(t, 1));
            if (a && b && reg.less(*a, *b))
                return side(a->key() + " has lower priority than " + b->key());
            return ok(K(t, 0));
        };
        m["P2"] = [](const Term &t, const Registry &reg) {
            MATCH(t->op == Op::Unless && atom_like(K(t, 0)) && atom_like(K(t, 1)));
            auto a = label_of(K(t, 0)), b = label_of(K(t, 1));
            if (!(a && b && reg.less(*a, *b)))
                return side("no priority between the operands");
            return ok(mk_delta());
        };
        m["P3"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Unless && K(t, 1)->op == Op::Seq);
            return ok(mk_unless(K(t, 0), K(K(t, 1), 0)));
        };
        m["P4"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Unless && K(t, 1)->op == Op::Alt);
            return ok(mk_unless(mk_unless(K(t, 0), K(K(t, 1), 0)), K(K(t, 1), 1)));
        };
        m["P5"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Unless && K(t, 0)->op == Op::Seq);
            return ok(mk_seq(mk_unless(K(K(t, 0), 0), K(t, 1)), K(K(t, 0), 1)));
        };
        m["P6"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Unless && K(t, 0)->op == Op::Alt);
            return ok(mk_alt(mk_unless(K(K(t, 0), 0), K(t, 1)), mk_unless(K(K(t, 0), 1), K(t, 1))));
        };
        // abstraction
        m["T1"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Seq && K(t, 1)->op == Op::Tau);
            return ok(K(t, 0));
        };
        m["TI0"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Abstr && K(t, 0)->op == Op::Tau);
            return ok(mk_tau());
        };
        m["TI1"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Abstr && (K(t, 0)->op == Op::Atom || is_delta(K(t, 0))));
            if (K(t, 0)->op == Op::Atom && t->set->contains(K(t, 0)->act))
                return side(K(t, 0)->act.key() + " is abstracted");
            return ok(K(t, 0));
        };
        m["TI2"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Abstr && K(t, 0)->op == Op::Atom);
            if (!t->set->contains(K(t, 0)->act))
                return side(K(t, 0)->act.key() + " is not abstracted");
            return ok(mk_tau());
        };
        m["TI3"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Abstr && K(t, 0)->op == Op::Alt);
            return ok(mk_alt(mk_abstr(t->set, K(K(t, 0), 0)), mk_abstr(t->set, K(K(t, 0), 1))));
        };
        m["TI4"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Abstr && K(t, 0)->op == Op::Seq);
            return ok(mk_seq(mk_abstr(t->set, K(K(t, 0), 0)), mk_abstr(t->set, K(K(t, 0), 1))));
        };
        m["PrTI"] = [](const Term &t, const Registry &) {
            MATCH(t->op == Op::Abstr && K(t, 0)->op == Op::PChoice);
            const Term &c = K(t, 0);
            return ok(mk_pchoice(mk_abstr(t->set, K(c, 0)), c->prob, mk_abstr(t->set, K(c, 1))));
        };
        return m;
    }();
    return t;
}

#undef MATCH

std::vector<const char *> candidates(const Term &t) {
    switch (t->op) {
    case Op::Seq: return {"A7", "A5", "A4", "PrAC4", "T1"};
    case Op::Alt: {
        const Term &x = K(t, 0), &y = K(t, 1);
        if (is_delta(y))
            return {"A6"};
        if (is_delta(x))
            return {"A1"};
        if (x->op == Op::PChoice)
            return {"PrAC5"};
        if (y->op == Op::PChoice)
            return {"A1"};
        if (x->op == Op::Alt)
            return {"A2"};
        return {"AA3"};
    }
    case Op::PChoice: return {"PrAC3", "PrAC2"};
    case Op::Par: return {"PrMM1"};
    case Op::MergeMem: return {"PrMM2", "PrMM3", "PrMM4"};
    case Op::LeftMerge: return {"CM2", "CM3", "CM4", "PrCM1"};
    case Op::CommMerge: return {"PrCM2", "PrCM3", "PrCM4", "PrCM5", "CF", "CM5", "CM6", "CM7"};
    case Op::EntMerge:
        return {"PrEM1", "PrEM2", "PrEM3", "PrEM4", "EM1", "EM2", "EM3", "EM4",
                "EM5",   "EM6",   "EM7",   "EM8",   "EM0"};
    case Op::Encap: return {"D1", "D2", "D3", "D4", "PrD5"};
    case Op::Abstr: return {"TI0", "TI1", "TI2", "TI3", "TI4", "PrTI"};
    case Op::Proj: return {"PR1", "PR2", "PR3", "PR4", "prPR"};
    case Op::Rename: return {"RN1", "RN2", "RN3", "RN4", "PrRN1"};
    case Op::Priority: return {"TH1", "TH2", "PrTH4", "DyTH3"};
    case Op::Unless: return {"P6", "P5", "P4", "P3", "P1", "P2"};
    default: return {};
    }
}

struct Normalizer {
    const Registry &reg;
    std::size_t max_steps;
    std::vector<RewriteStep> trace;

    Term norm(const Term &t, std::vector<int> &path) {
        if (t->op == Op::RecSpec)
            throw Error(ErrorCode::RecursionPresent, "normalisation needs a recursion-free term");
        if (t->op == Op::RecVar)
            throw Error(ErrorCode::NotClosed, "free variable " + t->var);
        Term cur = t;
        if (!t->kids.empty()) {
            std::vector<Term> kids;
            bool changed = false;
            for (std::size_t i = 0; i < t->kids.size(); ++i) {
                path.push_back(static_cast<int>(i));
                kids.push_back(norm(t->kids[i], path));
                path.pop_back();
                changed = changed || kids.back() != t->kids[i];
            }
            if (changed)
                cur = with_kids(t, std::move(kids));
        }
        for (const char *id : candidates(cur)) {
            Res r = table().at(id)(cur, reg);
            if (r.st != St::Ok)
                continue;
            if (trace.size() >= max_steps)
                throw Error(ErrorCode::OutOfRange, "normalisation exceeded " + std::to_string(max_steps) + " steps");
            trace.push_back({id, path, cur, r.out});
            return norm(r.out, path);
        }
        switch (cur->op) {
        case Op::Delta:
        case Op::Tau:
        case Op::Atom:
        case Op::Seq:
        case Op::Alt:
        case Op::PChoice: return cur;
        default:
            throw Error(ErrorCode::StuckTerm, "no axiom applies at " + path_str(path) + ": " + print(cur));
        }
    }
};

}  // namespace

NormalizeResult normalize(const Term &t, const Registry &reg, std::size_t max_steps) {
    if (t->has_rec)
        throw Error(ErrorCode::RecursionPresent, "normalisation needs a recursion-free term");
    if (!t->closed)
        throw Error(ErrorCode::NotClosed, "term has free variables");
    if (t->any_dyn)
        throw Error(ErrorCode::NotStatic, "normalisation works on static terms");
    if (mixes_abstraction_with_choice(t))
        throw Error(ErrorCode::OpenProblem,
                    "abstraction over alternative composition inside a probabilistic choice has no complete axiomatisation");
    elaborate(t, reg);
    Normalizer n{reg, max_steps, {}};
    std::vector<int> path;
    Term out = n.norm(t, path);
    if (!is_basic_term(out))
        throw Error(ErrorCode::StuckTerm, "result is not a basic term: " + print(out));
    return {out, std::move(n.trace)};
}

Term apply_axiom(const Term &t, const std::string &axiom, const std::vector<int> &path, const Registry &reg) {
    auto it = table().find(axiom);
    if (it == table().end())
        throw Error(ErrorCode::NoMatch, "unknown axiom " + axiom);
    Term sub = subterm_at(t, path);
    Res r = it->second(sub, reg);
    if (r.st == St::NoMatch)
        throw Error(ErrorCode::NoMatch, axiom + " does not match at " + path_str(path) + ": " + print(sub));
    if (r.st == St::Side)
        throw Error(ErrorCode::SideConditionFailed, axiom + " at " + path_str(path) + ": " + r.why);
    return replace_at(t, path, r.out);
}

const std::vector<std::string> &axiom_ids() {
    static const std::vector<std::string> ids = [] {
        std::vector<std::string> v;
        for (const auto &[k, _] : table())
            v.push_back(k);
        return v;
    }();
    return ids;
}

bool axiom_known(const std::string &id) { return table().count(id) > 0; }

// TI2 keeps the effect of an abstracted quantum action on a silent step, so it only holds
// when states are compared on public registers.
bool axiom_branching_only(const std::string &id) { return id == "T1" || id == "TI2"; }

BisimResult check_soundness(const Term &lhs, const Term &rhs, RegistryPtr reg, int depth, bool branching) {
    BuildOptions o;
    o.depth = depth;
    auto g1 = build_graph(lhs, reg, o);
    auto g2 = build_graph(rhs, reg, o);
    return branching ? branching_bisim(g1, g2) : strong_bisim(g1, g2);
}

Term replay(const Term &start, const std::vector<RewriteStep> &trace, const Registry &reg) {
    Term cur = start;
    for (const auto &s : trace) {
        Term sub = subterm_at(cur, s.path);
        if (!term_eq(sub, s.before))
            throw Error(ErrorCode::NoMatch, "trace step " + s.axiom + " expected " + print(s.before) + " at " +
                                                path_str(s.path) + " but found " + print(sub));
        cur = apply_axiom(cur, s.axiom, s.path, reg);
        if (!term_eq(subterm_at(cur, s.path), s.after))
            throw Error(ErrorCode::NoMatch, "trace step " + s.axiom + " produced a different result");
    }
    return cur;
}

}  // namespace pqa
