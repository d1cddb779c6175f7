#include <doctest.h>

#include "pqa/error.hpp"
#include "pqa/parser.hpp"
#include "pqa/protocols.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <functional>

using namespace pqa;

namespace {

const Action kOutput{"send_B", {0}, Mark::Plain};

ConfigGraph system_graph(const ProtocolModel &m, BisimResult *r = nullptr) {
    ConfigGraph g;
    BisimResult res = verify_external_behavior(m, 50, &g);
    if (r)
        *r = res;
    return g;
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

TEST_CASE("teleportation of basis and superposition inputs") {
    for (const CMat &in : {CMat(gates::P0()), CMat(CMat::Constant(2, 2, 0.5))}) {
        ProtocolModel m = build_teleport(in);
        BisimResult r;
        ConfigGraph g = system_graph(m, &r);
        CHECK(r.equivalent);
        CHECK_FALSE(g.truncated());
        CHECK(check_teleport_fidelity(g, in).pass);
        auto rounds = enumerate_rounds(g, kOutput, true);
        CHECK(rounds.size() >= 4);
        for (const auto &p : rounds) {
            REQUIRE(p.out_state);
            CHECK((reduced(*p.out_state, {"q2"}).rho - in).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
}

TEST_CASE("teleportation input validation") {
    CHECK(code_of([] { build_teleport(gates::P0() * 2); }) == ErrorCode::InvalidState);
    CHECK(code_of([] { build_teleport(CMat::Identity(4, 4) / 4); }) == ErrorCode::InvalidState);
}

TEST_CASE("dropped correction breaks the output") {
    ProtocolModel m = build_teleport(CMat::Constant(2, 2, 0.5), Fault::DropCorrection);
    CHECK_FALSE(check_teleport_fidelity(system_graph(m), m.input).pass);
}

TEST_CASE("bb84 single bit") {
    ProtocolModel m = build_bb84(1);
    BisimResult r;
    ConfigGraph g = system_graph(m, &r);
    CHECK(r.equivalent);
    CHECK(check_bb84_keys(g, 1).pass);
    Check pairs = check_basis_pairs(g, 1);
    CHECK(pairs.pass);
    CHECK(pairs.detail.find("4 of 4") != std::string::npos);
    CHECK(check_basis_weights(g, 1, {"RandBa", "RandBb"}).pass);
}

TEST_CASE("bb84 two bits agree at matched positions") {
    ProtocolModel m = build_bb84(2);
    ConfigGraph g = system_graph(m);
    CHECK(check_bb84_keys(g, 2).pass);
    CHECK(check_closed(g).pass);
}

TEST_CASE("bb84 flipped basis conditioning is caught") {
    ProtocolModel m = build_bb84(1, Fault::FlipBasis);
    CHECK_FALSE(check_bb84_keys(system_graph(m), 1).pass);
}

TEST_CASE("e91 correlations and deadlock under a wrong shadow") {
    ProtocolModel ok = build_e91(1);
    BisimResult r;
    ConfigGraph g = system_graph(ok, &r);
    CHECK(r.equivalent);
    CHECK(check_e91_correlation(g, 1).pass);
    CHECK(check_deadlock_free(g, kOutput).pass);

    ProtocolModel bad = build_e91(1, Fault::WrongShadow);
    ConfigGraph h = system_graph(bad, &r);
    CHECK_FALSE(r.equivalent);
    CHECK_FALSE(check_deadlock_free(h, kOutput).pass);
}

TEST_CASE("key length bounds") {
    CHECK(code_of([] { build_bb84(0); }) == ErrorCode::OutOfRange);
    CHECK(code_of([] { build_e91(4); }) == ErrorCode::OutOfRange);
    CHECK(code_of([] { parse_protocol("b92"); }) == ErrorCode::OutOfRange);
}

TEST_CASE("verification report") {
    VerifyReport rep = run_verify(ProtocolKind::Teleport, 1, 4, 50);
    CHECK(rep.all_pass());
    auto j = rep.to_json();
    CHECK(j["protocol"] == "teleport");
    CHECK(j["checks"].size() == rep.checks.size());
    CHECK(run_verify(ProtocolKind::Teleport, 1, 4, 50).to_json() == j);
    CHECK_FALSE(run_verify(ProtocolKind::E91, 1, 4, 50, Fault::WrongShadow).all_pass());
}

TEST_CASE("export reproduces the model") {
    namespace fs = std::filesystem;
    ProtocolModel m = build_e91(1);
    fs::path dir = fs::temp_directory_path() / "pqa_export_test";
    fs::remove_all(dir);
    export_model(m, dir.string());
    Term sys = parse_term_file((dir / "system.pqa").string());
    Term spec = parse_term_file((dir / "spec.pqa").string());
    CHECK(term_eq(sys, m.system));
    CHECK(term_eq(spec, m.spec));
    Registry back = Registry::load((dir / "registry.json").string());
    CHECK(back.fingerprint() == m.reg->fingerprint());
    fs::remove_all(dir);
}

TEST_CASE("bit helper reads most significant first") {
    CHECK(bit_of(2, 0, 2) == 1);
    CHECK(bit_of(2, 1, 2) == 0);
    CHECK(bit_of(1, 1, 2) == 1);
}
