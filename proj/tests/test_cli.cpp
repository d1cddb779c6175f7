#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

namespace {

struct Run {
    int rc;
    std::string out;
};

Run pqacp(const std::string &args, const std::string &env = "") {
    std::string cmd = env + " " + PQACP_BIN + " " + args + " 2>&1";
    FILE *p = popen(cmd.c_str(), "r");
    REQUIRE(p);
    std::string out;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), p))
        out += buf.data();
    int st = pclose(p);
    return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

std::string model(const std::string &f) { return std::string(PQA_MODELS_DIR) + "/" + f; }

std::string reg() { return "--registry " + model("basic.json") + " "; }

bool has(const std::string &s, const std::string &part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("normalize") {
    Run r = pqacp(reg() + "normalize --no-trace " + model("distribute.pqa"));
    CHECK(r.rc == 0);
    CHECK(r.out == "a . c + b . c\n");
    Run t = pqacp(reg() + "normalize " + model("distribute.pqa"));
    CHECK(has(t.out, "A4 @ / :"));
    CHECK(pqacp(reg() + "normalize " + model("unknown.pqa")).rc == 1);
    Run o = pqacp(reg() + "normalize " + model("open_problem.pqa"));
    CHECK(o.rc == 2);
    CHECK(has(o.out, "OpenProblem"));
    Run j = pqacp(reg() + "--format json --seed 9 normalize " + model("distribute.pqa"));
    CHECK(has(j.out, "\"seed\": 9"));
}

TEST_CASE("lts") {
    Run r = pqacp(reg() + "--depth 1 lts " + model("atom.pqa"));
    CHECK(r.rc == 0);
    CHECK(has(r.out, "states: 3 edges: 2"));
    CHECK(pqacp(reg() + "lts " + model("unknown.pqa")).rc == 1);
    Run w = pqacp(reg() + "lts " + model("mismatch.pqa"));
    CHECK(w.rc == 0);
    CHECK(has(w.out, "measurement-weight"));
    Run d = pqacp(reg() + "--format dot lts " + model("coin.pqa"));
    CHECK(has(d.out, "digraph"));
    Run n = pqacp(reg() + "--depth 2 lts --no-dedup " + model("loop.pqa"));
    CHECK(has(n.out, "(truncated)"));
}

TEST_CASE("bisim") {
    CHECK(pqacp(reg() + "bisim " + model("coin.pqa") + " " + model("atom.pqa")).rc == 0);
    CHECK(pqacp(reg() + "bisim --mode branching " + model("silent.pqa") + " " + model("atom.pqa")).rc == 0);
    CHECK(pqacp(reg() + "bisim --mode branching " + model("silent_first.pqa") + " " + model("atom.pqa")).rc == 3);
    Run r = pqacp(reg() + "bisim " + model("atom.pqa") + " " + model("other.pqa"));
    CHECK(r.rc == 3);
    CHECK(has(r.out, "inequivalent"));
    CHECK(has(r.out, "can do a"));
    Run j = pqacp(reg() + "--format json bisim " + model("handshake.pqa") + " " + model("handshake_spec.pqa"));
    CHECK(j.rc == 0);
    CHECK(has(j.out, "\"verdict\": \"equivalent\""));
}

TEST_CASE("registry from the environment") {
    Run r = pqacp("normalize " + model("distribute.pqa"));
    CHECK(r.rc == 1);
    CHECK(has(r.out, "no registry"));
    Run e = pqacp("bisim " + model("coin.pqa") + " " + model("atom.pqa"), "PQACP_REGISTRY=" + model("basic.json"));
    CHECK(e.rc == 0);
}

TEST_CASE("verify") {
    CHECK(pqacp("verify teleport").rc == 0);
    CHECK(pqacp("verify bb84 --n 1").rc == 0);
    Run bad = pqacp("verify e91 --n 5");
    CHECK(bad.rc == 1);
    CHECK(has(bad.out, "OutOfRange"));
    Run f = pqacp("verify teleport --fault drop-correction");
    CHECK(f.rc == 1);
    CHECK(has(f.out, "FAIL fidelity"));
    Run j = pqacp("--format json verify e91 --n 1");
    CHECK(j.rc == 0);
    CHECK(has(j.out, "\"checks\""));
    CHECK(pqacp("verify teleport --fault nonsense").rc == 1);
}

TEST_CASE("export round trip through the command line") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "pqacp_cli_export";
    fs::remove_all(dir);
    CHECK(pqacp("export teleport --input plus -o " + dir.string()).rc == 0);
    std::string r = "--registry " + (dir / "registry.json").string() + " ";
    Run b = pqacp(r + "bisim --mode branching " + (dir / "system.pqa").string() + " " + (dir / "spec.pqa").string());
    CHECK(b.rc == 0);
    CHECK(has(b.out, "equivalent"));
    fs::remove_all(dir);
    CHECK(pqacp("export bb84 --n 1 --fault flip-basis -o " + dir.string()).rc == 0);
    Run l = pqacp(r + "lts " + (dir / "system.pqa").string() + " -o " + (dir / "g.txt").string());
    CHECK(l.rc == 0);
    CHECK(has(l.out, "states: "));
    fs::remove_all(dir);
}
