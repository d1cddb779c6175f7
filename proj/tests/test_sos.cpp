#include <doctest.h>

#include "fixtures.hpp"

#include "pqa/error.hpp"
#include "pqa/protocols.hpp"
#include "pqa/sos.hpp"

#include <functional>

using namespace pqa;
using fixtures::basic;
using fixtures::term;

namespace {

std::size_t count_kind(const std::vector<Diagnostic> &ds, const std::string &kind) {
    std::size_t n = 0;
    for (const auto &d : ds)
        n += d.kind == kind;
    return n;
}

}  // namespace

TEST_CASE("probabilistic step distributes by weight") {
    Sos sos(*basic());
    const auto &br = sos.prob_step(term("a [+1/3] b"));
    REQUIRE(br.size() == 2);
    CHECK(print(br[0].term) == "~a");
    CHECK(br[0].weight == Rational(1, 3));
    CHECK(print(br[1].term) == "~b");
    CHECK(br[1].weight == Rational(2, 3));
}

TEST_CASE("equal branches are merged") {
    Sos sos(*basic());
    const auto &br = sos.prob_step(term("a [+1/2] a"));
    REQUIRE(br.size() == 1);
    CHECK(br[0].weight == 1);
    const auto &d = sos.prob_step(term("delta"));
    REQUIRE(d.size() == 1);
    CHECK(d[0].term->op == Op::Delta);
    CHECK(d[0].term->dyn);
}

TEST_CASE("action steps") {
    RegistryPtr reg = basic();
    Sos sos(*reg);
    auto dyn = [&](const std::string &s) { return sos.prob_step(term(s))[0].term; };

    auto h = sos.action_step(dyn("H"), reg->init);
    REQUIRE(h.size() == 1);
    CHECK(h[0].label.name == "H");
    CHECK(h[0].target == nullptr);
    CHECK((h[0].post->rho - CMat::Constant(2, 2, 0.5)).cwiseAbs().maxCoeff() < 1e-12);

    CHECK(sos.action_step(dyn("delta"), reg->init).empty());

    auto c = sos.action_step(dyn("a | b"), reg->init);
    REQUIRE(c.size() == 1);
    CHECK(c[0].label.name == "c");
    CHECK(state_eq(*c[0].post, *reg->init));
}

TEST_CASE("shadows leave the state alone") {
    RegistryPtr reg = basic();
    Sos sos(*reg);
    auto t = sos.action_step(sos.prob_step(term("@H"))[0].term, reg->init);
    REQUIRE(t.size() == 1);
    CHECK(t[0].label.mark == Mark::Shadow);
    CHECK(state_eq(*t[0].post, *reg->init));
}

TEST_CASE("entanglement merge synchronises an action with its shadow") {
    RegistryPtr reg = basic();
    Sos sos(*reg);
    auto t = sos.action_step(sos.prob_step(term("H <> @H"))[0].term, reg->init);
    REQUIRE(t.size() == 1);
    CHECK(t[0].label.key() == "H!");
    CHECK(sos.action_step(sos.prob_step(term("H <> @X"))[0].term, reg->init).empty());
}

TEST_CASE("priorities block lower actions") {
    RegistryPtr reg = basic();
    Sos sos(*reg);
    auto t = sos.action_step(sos.prob_step(term("theta(a + b + c)"))[0].term, reg->init);
    std::vector<std::string> labels;
    for (const auto &x : t)
        labels.push_back(x.label.key());
    std::sort(labels.begin(), labels.end());
    CHECK(labels == std::vector<std::string>{"b", "c"});
}

TEST_CASE("single atom graph") {
    BuildOptions o;
    o.depth = 1;
    ConfigGraph g = build_graph(term("a"), basic(), o);
    CHECK(g.size() == 3);
    CHECK(g.nodes[static_cast<std::size_t>(g.root)].kind == NodeKind::Prob);
    CHECK_FALSE(g.truncated());
}

TEST_CASE("bounded unfolding of a loop") {
    BuildOptions o;
    o.depth = 2;
    o.dedup = false;
    ConfigGraph g = build_graph(term("rec X where { X = a . X }"), basic(), o);
    std::size_t a_steps = 0;
    for (const auto &es : g.aout)
        a_steps += es.size();
    CHECK(a_steps == 2);
    CHECK(g.truncated());

    o.dedup = true;
    ConfigGraph d = build_graph(term("rec X where { X = a . X }"), basic(), o);
    CHECK(d.size() == 2);
    CHECK_FALSE(d.truncated());
}

TEST_CASE("four-way measurement branches") {
    ProtocolModel m = build_teleport(CMat::Constant(2, 2, 0.5));
    Term t = term("M(0) . send_P(0) [+1/4] M(1) . send_P(1) [+1/4] M(2) . send_P(2) [+1/4] M(3) . send_P(3)", *m.reg);
    ConfigGraph g = build_graph(t, m.reg);
    const auto &es = g.pout[static_cast<std::size_t>(g.root)];
    REQUIRE(es.size() == 4);
    for (const auto &e : es)
        CHECK(e.weight == Rational(1, 4));
    CHECK(check_measurement_consistency(g).empty());
}

TEST_CASE("zero-probability branches are pruned and renormalised") {
    ConfigGraph g = build_graph(term("P0 [+1/2] P1"), basic());
    const auto &es = g.pout[static_cast<std::size_t>(g.root)];
    REQUIRE(es.size() == 1);
    CHECK(es[0].weight == 1);
    CHECK(es[0].declared == Rational(1, 2));
    CHECK(g.pruned.size() == 1);
    CHECK(count_kind(g.diags, "zero-probability") == 1);
}

TEST_CASE("measurement consistency") {
    CHECK(count_kind(check_measurement_consistency(build_graph(term("P0 [+1/2] a"), basic())), "measurement-weight") ==
          1);
    CHECK(check_measurement_consistency(build_graph(term("H . (P0 [+1/2] P1)"), basic())).empty());
    CHECK(check_measurement_consistency(build_graph(term("a . b + c"), basic())).empty());

    ProtocolModel m = build_teleport(gates::P0());
    ConfigGraph g;
    verify_external_behavior(m, 50, &g);
    CHECK(count_kind(g.diags, "measurement-weight") == 0);
}

TEST_CASE("graph export formats") {
    ConfigGraph g = build_graph(term("a [+1/2] b"), basic());
    CHECK(to_dot(g).find("digraph") != std::string::npos);
    auto j = to_json(g);
    CHECK(j.contains("nodes"));
    CHECK(to_text(g).find("~1/2~>") != std::string::npos);
}

TEST_CASE("graph building rejects dynamic and unregistered input") {
    CHECK_THROWS_AS(term("zz"), Error);
    Term dyn = Sos(*basic()).prob_step(term("a"))[0].term;
    CHECK_THROWS_AS(build_graph(dyn, basic()), Error);
}

TEST_CASE("registry validation") {
    auto code = [](const std::function<void(Registry &)> &f) {
        Registry r;
        r.add_register("q", Visibility::Public);
        r.add_classical(Action{"a", {}, Mark::Plain});
        r.add_classical(Action{"b", {}, Mark::Plain});
        r.add_classical(Action{"c", {}, Mark::Plain});
        try {
            f(r);
            r.finalize();
        } catch (const Error &e) {
            return e.code();
        }
        return ErrorCode::InvalidState;
    };
    CHECK(code([](Registry &r) { r.add_unitary(Action{"U", {}, Mark::Plain}, {"q"}, gates::P0()); }) ==
          ErrorCode::NonUnitary);
    CHECK(code([](Registry &r) { r.add_projection(Action{"P", {}, Mark::Plain}, {"q"}, gates::H()); }) ==
          ErrorCode::NonProjector);
    CHECK(code([](Registry &r) { r.add_register("q", Visibility::Public); }) == ErrorCode::RegisterNameClash);
    CHECK(code([](Registry &r) { r.add_unitary(Action{"U", {}, Mark::Plain}, {"z"}, gates::X()); }) ==
          ErrorCode::UnknownRegister);
    // gamma(gamma(a,b),c) = gamma(c,c) = a but gamma(a, gamma(b,c)) is undefined
    CHECK(code([](Registry &r) {
              r.add_gamma(Action{"a", {}, Mark::Plain}, Action{"b", {}, Mark::Plain}, Action{"c", {}, Mark::Plain});
              r.add_gamma(Action{"c", {}, Mark::Plain}, Action{"c", {}, Mark::Plain}, Action{"a", {}, Mark::Plain});
          }) == ErrorCode::RegistryError);
    CHECK(code([](Registry &r) {
              r.add_less("a", "b");
              r.add_less("b", "a");
          }) == ErrorCode::RegistryError);
}
