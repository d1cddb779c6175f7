#include <doctest.h>

#include "pqa/error.hpp"
#include "pqa/parser.hpp"
#include "pqa/term.hpp"

#include <functional>

using namespace pqa;

namespace {

ErrorCode code_of(const std::function<void()> &f) {
    try {
        f();
    } catch (const Error &e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::InvalidState;
}

}  // namespace

TEST_CASE("sequence binds tighter than alternative") {
    Term t = parse_term("a . b + c");
    REQUIRE(t->op == Op::Alt);
    CHECK(t->kids[0]->op == Op::Seq);
    CHECK(t->kids[1]->op == Op::Atom);
    CHECK(t->kids[1]->act.name == "c");
}

TEST_CASE("probabilistic choice of a repeated subterm") {
    Term t = parse_term("(a . b) [+1/2] (a . b)");
    REQUIRE(t->op == Op::PChoice);
    CHECK(t->prob == Rational(1, 2));
    CHECK(term_eq(t->kids[0], t->kids[1]));
}

TEST_CASE("weights outside the open unit interval are rejected") {
    CHECK(code_of([] { parse_term("a [+3/2] b"); }) == ErrorCode::BadProbability);
    CHECK(code_of([] { parse_term("a [+1/2] b [+1/2] c"); }) == ErrorCode::BadProbability);
}

TEST_CASE("chains use absolute weights") {
    Term t = parse_term("a [+1/4] b [+1/4] c [+1/4] d");
    // ((a (+) b) (+) c) (+) d with conditional weights
    REQUIRE(t->op == Op::PChoice);
    CHECK(t->prob == Rational(3, 4));
    CHECK(t->kids[0]->prob == Rational(2, 3));
    CHECK(t->kids[0]->kids[0]->prob == Rational(1, 2));
}

TEST_CASE("printing round trips") {
    CHECK(print(mk_alt(mk_atom("a"), mk_atom("b"))) == "a + b");
    CHECK(print(mk_pchoice(mk_atom("a"), Rational(1, 3), mk_atom("b"))) == "a [+1/3] b");
    auto s = std::make_shared<const ActionSet>(std::vector<std::string>{"s"});
    CHECK(print(mk_encap(s, mk_atom("s"))) == "encap{s}(s)");
    for (const char *src : {"a . (b + c)", "(a + b) . c", "a || b || c", "a ||_ b", "a | b . c", "@M(1) <> M(1) . x",
                            "theta(a <| b)", "rename[a -> b](a . c)", "proj[3](a . a . a)", "abstr{M, @M, M!}(tau)",
                            "(a, b) ][ (c, d)", "rec X where { X = a . Y; Y = b . X }", "M(1)! . delta"}) {
        Term t = parse_term(src);
        CHECK_MESSAGE(term_eq(parse_term(print(t)), t), src);
    }
}

TEST_CASE("syntax errors carry a position") {
    try {
        parse_term("a .\n  + b");
        FAIL("accepted");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::SyntaxError);
        CHECK(e.line() == 2);
    }
}

TEST_CASE("basic terms") {
    CHECK(is_basic_term(mk_delta()));
    CHECK(is_basic_term(parse_term("a . b")));
    CHECK(is_basic_term(parse_term("a . (b [+1/2] c) + d")));
    CHECK(is_basic_term(parse_term("a . b [+1/3] c")));
    CHECK_FALSE(is_basic_term(parse_term("a || b")));
    CHECK_FALSE(is_basic_term(parse_term("(a + b) . c")));
    CHECK_FALSE(is_basic_term(parse_term("encap{a}(a)")));
}

TEST_CASE("unfolding substitutes the recursive specification") {
    Term t = parse_term("rec X where { X = a . X }");
    Term u = unfold(t->var, t->env);
    REQUIRE(u->op == Op::Seq);
    CHECK(u->kids[0]->act.name == "a");
    CHECK(term_eq(u->kids[1], t));

    Term s = parse_term("rec X where { X = a . Y; Y = b . X }");
    Term v = unfold(s->var, s->env);
    REQUIRE(v->kids[1]->op == Op::RecSpec);
    CHECK(v->kids[1]->var == "Y");

    CHECK(code_of([&] { unfold("Z", t->env); }) == ErrorCode::UnboundVariable);
}

TEST_CASE("unguarded recursion is rejected") {
    CHECK(code_of([] { check_guarded(parse_term("rec X where { X = X + a }")->env); }) ==
          ErrorCode::UnguardedRecursion);
    CHECK_NOTHROW(check_guarded(parse_term("rec X where { X = a . X + b }")->env));
}

TEST_CASE("action sets match families and marks") {
    ActionSet h({"send", "@M", "M(1)!"});
    CHECK(h.contains(parse_action_key("send(3)")));
    CHECK(h.contains(parse_action_key("@M(0)")));
    CHECK_FALSE(h.contains(parse_action_key("M(0)")));
    CHECK(h.contains(parse_action_key("M(1)!")));
    CHECK_FALSE(h.contains(parse_action_key("M(0)!")));
}

TEST_CASE("paths address subterms") {
    Term t = parse_term("a . (b + c)");
    CHECK(print(subterm_at(t, {1, 0})) == "b");
    Term r = replace_at(t, {1, 0}, mk_atom("d"));
    CHECK(print(r) == "a . (d + c)");
    CHECK(parse_path(path_str({1, 0})) == std::vector<int>{1, 0});
}
