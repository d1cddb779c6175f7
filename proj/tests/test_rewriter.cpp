#include <doctest.h>

#include "fixtures.hpp"
#include "gen.hpp"

#include "pqa/error.hpp"
#include "pqa/rewriter.hpp"

#include <functional>

using namespace pqa;
using fixtures::basic;
using fixtures::term;

namespace {

std::string rewrite(const std::string &src, const std::string &axiom) {
    return print(apply_axiom(term(src), axiom, {}, *basic()));
}

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

TEST_CASE("single axiom applications") {
    CHECK(rewrite("(a + b) . c", "A4") == "a . c + b . c");
    CHECK(rewrite("a [+1/2] (b [+1/2] c)", "PrAC2") == "(a [+2/3] b) [+3/4] c");
    CHECK(rewrite("a [+1/4] b", "PrAC1") == "b [+3/4] a");
    CHECK(rewrite("H <> @H", "EM1") == "H!");
    CHECK(rewrite("@H <> H . a", "EM4") == "H! . a");
    CHECK(rewrite("H <> X", "EM0") == "delta");
    CHECK(rewrite("encap{s}(s)", "D2") == "delta");
    CHECK(rewrite("encap{s}(a)", "D1") == "a");
    CHECK(rewrite("proj[1](a . b)", "PR2") == "a");
    CHECK(rewrite("proj[2](a . b)", "PR3") == "a . proj[1](b)");
    CHECK(rewrite("rename[a -> b](delta)", "RN2") == "delta");
    CHECK(rewrite("a | b", "CF") == "c");
    CHECK(rewrite("a <| b", "P2") == "delta");
    CHECK(rewrite("b <| a", "P1") == "b");
    CHECK(rewrite("a . tau", "T1") == "a");
}

TEST_CASE("axioms applied below the root") {
    Term t = term("c . ((a + b) . c)");
    CHECK(print(apply_axiom(t, "A4", {1}, *basic())) == "c . (a . c + b . c)");
}

TEST_CASE("mismatches and failed side conditions") {
    CHECK(code_of([] { rewrite("a . b", "A4"); }) == ErrorCode::NoMatch);
    CHECK(code_of([] { rewrite("encap{a}(a)", "D1"); }) == ErrorCode::SideConditionFailed);
    CHECK(code_of([] { rewrite("H <> @H", "EM0"); }) == ErrorCode::SideConditionFailed);
    CHECK(code_of([] { rewrite("(a [+1/2] b) | (c + a)", "PrCM5"); }) == ErrorCode::SideConditionFailed);
    CHECK(code_of([] { rewrite("a", "NOPE"); }) == ErrorCode::NoMatch);
}

TEST_CASE("soundness checks") {
    RegistryPtr reg = basic();
    CHECK(check_soundness(term("a + b"), term("b + a"), reg).equivalent);
    CHECK(check_soundness(term("a [+1/4] b"), term("b [+3/4] a"), reg).equivalent);
    CHECK_FALSE(check_soundness(term("a + b"), term("a"), reg).equivalent);
    CHECK(check_soundness(term("a . tau"), term("a"), reg, 64, true).equivalent);
}

TEST_CASE("normal forms") {
    RegistryPtr reg = basic();
    NormalizeResult r = normalize(term("(a + b) . c"), *reg);
    CHECK(print(r.term) == "a . c + b . c");
    REQUIRE(r.trace.size() == 1);
    CHECK(r.trace[0].text() == "A4 @ / : (a + b) . c => a . c + b . c");

    NormalizeResult p = normalize(term("encap{a, b}(a || b)"), *reg);
    CHECK(print(p.term) == "c");
    CHECK(is_basic_term(normalize(term("(a [+1/2] b) || (c + s)"), *reg).term));
    CHECK(print(normalize(term("H <> @H . a"), *reg).term) == "H! . a");
}

TEST_CASE("traces replay") {
    RegistryPtr reg = basic();
    Term t = term("proj[2]((a [+1/3] b) . (c + s)) || a");
    NormalizeResult r = normalize(t, *reg);
    CHECK(term_eq(replay(t, r.trace, *reg), r.term));
    auto broken = r.trace;
    REQUIRE(broken.size() > 2);
    std::swap(broken[0], broken[1]);
    CHECK_THROWS_AS(replay(t, broken, *reg), Error);
}

TEST_CASE("normalisation preconditions") {
    RegistryPtr reg = basic();
    CHECK(code_of([&] { normalize(term("rec X where { X = a . X }"), *reg); }) == ErrorCode::RecursionPresent);
    CHECK(code_of([&] { normalize(term("abstr{a}(a + b) [+1/2] c"), *reg); }) == ErrorCode::OpenProblem);
    CHECK(code_of([&] { normalize(term("(a [+1/2] b) <| c"), *reg); }) == ErrorCode::StuckTerm);
    CHECK_NOTHROW(normalize(term("abstr{a}(a . b) [+1/2] c"), *reg));
}

TEST_CASE("every rewrite step of random normalisations is sound") {
    RegistryPtr reg = testgen::small_registry(7);
    std::mt19937_64 rng(23);
    testgen::TermGen g(rng);
    std::size_t checked = 0;
    for (int i = 0; i < 60; ++i) {
        Term t = g.term(4);
        NormalizeResult r = normalize(t, *reg);
        CHECK(is_basic_term(r.term));
        for (std::size_t k = 0; k < r.trace.size(); k += 3) {
            const auto &s = r.trace[k];
            bool br = axiom_branching_only(s.axiom);
            CHECK_MESSAGE(check_soundness(s.before, s.after, reg, 64, br).equivalent, s.text());
            ++checked;
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("axiom catalogue") {
    const auto &ids = axiom_ids();
    for (const char *id : {"A1", "A7", "PrAC5", "PR4", "prPR", "CF", "CM7", "PrCM5", "PrMM4", "D4", "PrD5", "EM0",
                           "EM8", "PrEM4", "RN4", "PrRN1", "TH2", "PrTH4", "DyTH3", "P6", "T1", "TI4", "PrTI"})
        CHECK_MESSAGE(std::find(ids.begin(), ids.end(), id) != ids.end(), id);
    CHECK(axiom_branching_only("T1"));
    CHECK_FALSE(axiom_branching_only("A1"));
}
