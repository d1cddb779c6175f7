#include <doctest.h>

#include "fixtures.hpp"
#include "gen.hpp"

#include "pqa/bisim.hpp"
#include "pqa/error.hpp"
#include "pqa/protocols.hpp"

using namespace pqa;
using fixtures::basic;
using fixtures::term;

namespace {

BisimResult strong(const std::string &a, const std::string &b) {
    return strong_bisim(build_graph(term(a), basic()), build_graph(term(b), basic()));
}

BisimResult branching(const std::string &a, const std::string &b) {
    return branching_bisim(build_graph(term(a), basic()), build_graph(term(b), basic()));
}

}  // namespace

TEST_CASE("strong bisimulation on small terms") {
    CHECK(strong("a [+1/3] a", "a").equivalent);
    CHECK(strong("a + b", "b + a").equivalent);
    CHECK(strong("(a + b) . c", "a . c + b . c").equivalent);
    CHECK_FALSE(strong("a . (b + c)", "a . b + a . c").equivalent);
    CHECK(strong("H . H", "X . X").equivalent == false);  // different labels
}

TEST_CASE("distribution mismatch yields a class witness") {
    BisimResult r = strong("a [+1/3] b", "a [+1/2] b");
    CHECK_FALSE(r.equivalent);
    REQUIRE_FALSE(r.witness.empty());
    CHECK(r.witness[0].find("probability") != std::string::npos);
}

TEST_CASE("label mismatch witness") {
    BisimResult r = strong("a", "b");
    CHECK_FALSE(r.equivalent);
    bool mentions = false;
    for (const auto &w : r.witness)
        mentions = mentions || w.find("can do") != std::string::npos;
    CHECK(mentions);
}

TEST_CASE("quantum effects distinguish equal labels") {
    RegistryPtr reg = basic();
    auto one = std::make_shared<const QState>(basis_state(reg->regs, "1"));
    ConfigGraph from0 = build_graph(term("H . a"), reg), from1 = build_graph(term("H . a"), reg, {}, one);
    CHECK(strong_bisim(from0, build_graph(term("H . a"), reg)).equivalent);
    CHECK_FALSE(strong_bisim(from0, from1).equivalent);
}

TEST_CASE("silent steps under branching bisimulation") {
    CHECK(branching("a . tau", "a").equivalent);
    CHECK(branching("a . tau . b", "a . b").equivalent);
    CHECK_FALSE(strong("a . tau", "a").equivalent);
    BisimResult root = branching("tau . a", "a");
    CHECK_FALSE(root.equivalent);
    CHECK(branching("a . (tau . (b + c) + b)", "a . (b + c)").equivalent);
    CHECK_FALSE(branching("a . (tau . b + c)", "a . (b + c)").equivalent);
}

TEST_CASE("abstraction hides internal operations") {
    CHECK(branching("abstr{b}(a . b . c)", "a . c").equivalent);
    CHECK_FALSE(branching("abstr{b}(a . b . c)", "a . b . c").equivalent);
}

TEST_CASE("graphs from different registries are not compared") {
    ConfigGraph a = build_graph(term("a"), basic());
    ProtocolModel m = build_teleport(gates::P0());
    ConfigGraph b = build_graph(m.spec, m.reg);
    CHECK_THROWS_AS(strong_bisim(a, b), Error);
}

TEST_CASE("teleportation loop against its specification") {
    ProtocolModel m = build_teleport(CMat::Constant(2, 2, 0.5));
    BisimResult r = verify_external_behavior(m, 50);
    CHECK(r.equivalent);
    CHECK(r.to_json()["verdict"] == "equivalent");
}

TEST_CASE("strong refinement agrees with exhaustive search") {
    RegistryPtr reg = testgen::small_registry(5);
    std::mt19937_64 rng(17);
    auto s1 = std::make_shared<const QState>(make_state(reg->regs, random_density(4, rng)));
    auto s2 = std::make_shared<const QState>(make_state(reg->regs, random_density(4, rng)));
    std::vector<QStatePtr> states = {s1, s2};
    for (int i = 0; i < 40; ++i) {
        ConfigGraph a = testgen::random_graph(rng, reg, states, 6);
        ConfigGraph b = i % 2 ? testgen::blow_up(a, rng) : testgen::perturb(a, rng);
        CHECK(strong_bisim(a, b).equivalent == testgen::brute_force_bisimilar(a, b));
        if (i % 2)
            CHECK(strong_bisim(a, b).equivalent);
    }
}
