// pqacp: parse, explore, normalise and compare process terms; verify the bundled protocols.

#include "pqa/bisim.hpp"
#include "pqa/error.hpp"
#include "pqa/parser.hpp"
#include "pqa/protocols.hpp"
#include "pqa/rewriter.hpp"
#include "pqa/sos.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

using namespace pqa;
using nlohmann::json;

namespace {

struct Config {
    std::string registry;
    int depth = 50;
    double tol = kStateEps;
    std::string format = "text";
    std::uint64_t seed = 1;
};

RegistryPtr load_registry(const Config &c) {
    if (c.registry.empty())
        throw Error(ErrorCode::RegistryError, "no registry given (--registry or PQACP_REGISTRY)");
    return std::make_shared<const Registry>(Registry::load(c.registry));
}

Term load_term(const std::string &path, const Registry &reg) {
    Term t = parse_term_file(path);
    elaborate(t, reg);
    return t;
}

int fail(const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
}

int cmd_normalize(const Config &c, const std::string &file, bool trace) {
    RegistryPtr reg;
    Term t;
    try {
        reg = load_registry(c);
        t = load_term(file, *reg);
    } catch (const std::exception &e) {
        return fail(e);
    }
    try {
        NormalizeResult r = normalize(t, *reg);
        if (c.format == "json") {
            json tr = json::array();
            for (const auto &s : r.trace)
                tr.push_back(s.text());
            std::cout << json{{"term", print(r.term)}, {"trace", tr}, {"seed", c.seed}}.dump(2) << "\n";
        } else {
            std::cout << print(r.term) << "\n";
            if (trace)
                for (const auto &s : r.trace)
                    std::cout << s.text() << "\n";
        }
        return 0;
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::StuckTerm || e.code() == ErrorCode::OpenProblem ? 2 : 1;
    } catch (const std::exception &e) {
        return fail(e);
    }
}

int cmd_lts(const Config &c, const std::string &file, const std::string &out, bool no_dedup) {
    try {
        RegistryPtr reg = load_registry(c);
        Term t = load_term(file, *reg);
        BuildOptions o;
        o.depth = c.depth;
        o.eps = c.tol;
        o.dedup = !no_dedup;
        ConfigGraph g = build_graph(t, reg, o);
        std::string body;
        if (c.format == "dot")
            body = to_dot(g);
        else if (c.format == "json")
            body = to_json(g).dump(2) + "\n";
        else
            body = to_text(g);
        if (out.empty()) {
            std::cout << body;
        } else {
            std::ofstream f(out);
            if (!f)
                throw Error(ErrorCode::InvalidState, "cannot write " + out);
            f << body;
        }
        std::ostream &log = out.empty() ? std::cerr : std::cout;
        log << "states: " << g.size() << " edges: " << g.edge_count() << (g.truncated() ? " (truncated)" : "")
            << "\n";
        if (!(out.empty() && c.format == "text"))  // the text listing already carries them
            for (const auto &d : g.diags)
                log << "warning: " << d.kind << ": " << d.message << "\n";
        return 0;
    } catch (const std::exception &e) {
        return fail(e);
    }
}

int cmd_bisim(const Config &c, const std::string &fa, const std::string &fb, const std::string &mode) {
    try {
        RegistryPtr reg = load_registry(c);
        Term a = load_term(fa, *reg), b = load_term(fb, *reg);
        BuildOptions o;
        o.depth = c.depth;
        o.eps = c.tol;
        ConfigGraph ga = build_graph(a, reg, o), gb = build_graph(b, reg, o);
        BisimResult r = mode == "branching" ? branching_bisim(ga, gb, c.tol) : strong_bisim(ga, gb, c.tol);
        if (c.format == "json") {
            json j = r.to_json();
            j["mode"] = mode;
            j["seed"] = c.seed;
            std::cout << j.dump(2) << "\n";
        } else {
            std::cout << (r.equivalent ? "equivalent" : "inequivalent") << " (" << mode << ", " << r.classes
                      << " classes)\n";
            for (const auto &w : r.witness)
                std::cout << "  " << w << "\n";
        }
        return r.equivalent ? 0 : 3;
    } catch (const std::exception &e) {
        return fail(e);
    }
}

Fault parse_fault(const std::string &s) {
    if (s == "none")
        return Fault::None;
    if (s == "drop-correction")
        return Fault::DropCorrection;
    if (s == "flip-basis")
        return Fault::FlipBasis;
    if (s == "wrong-shadow")
        return Fault::WrongShadow;
    throw Error(ErrorCode::OutOfRange, "unknown fault " + s);
}

int cmd_verify(const Config &c, const std::string &proto, int n, const std::string &fault) {
    try {
        VerifyReport r = run_verify(parse_protocol(proto), n, c.seed, c.depth, parse_fault(fault), c.tol);
        if (c.format == "json") {
            std::cout << r.to_json().dump(2) << "\n";
        } else {
            for (const auto &ch : r.checks)
                std::cout << (ch.pass ? "PASS " : "FAIL ") << ch.name << ": " << ch.detail << "\n";
            std::cout << (r.all_pass() ? "all checks pass" : "some checks fail") << " (seed " << r.seed << ")\n";
        }
        return r.all_pass() ? 0 : 1;
    } catch (const std::exception &e) {
        return fail(e);
    }
}

int cmd_export(const std::string &proto, int n, const std::string &input, const std::string &fault,
               const std::string &dir) {
    try {
        ProtocolKind k = parse_protocol(proto);
        Fault f = parse_fault(fault);
        ProtocolModel m;
        if (k == ProtocolKind::Teleport) {
            CMat rho = input == "plus" ? CMat(CMat::Constant(2, 2, 0.5)) : gates::P0();
            if (input != "plus" && input != "zero")
                throw Error(ErrorCode::InvalidState, "teleport input must be zero or plus");
            m = build_teleport(rho, f);
        } else {
            m = k == ProtocolKind::BB84 ? build_bb84(n, f) : build_e91(n, f);
        }
        export_model(m, dir);
        std::cout << "wrote " << dir << "/system.pqa, spec.pqa, registry.json\n";
        return 0;
    } catch (const std::exception &e) {
        return fail(e);
    }
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Probabilistic quantum process algebra toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Config c;
    app.add_option("--registry", c.registry, "Action registry JSON")->envname("PQACP_REGISTRY");
    app.add_option("--depth", c.depth, "Depth bound on action transitions")->check(CLI::PositiveNumber);
    app.add_option("--tol", c.tol, "Tolerance for quantum state comparison")->check(CLI::PositiveNumber);
    app.add_option("--format", c.format, "Output format")->check(CLI::IsMember({"dot", "json", "text"}));
    app.add_option("--seed", c.seed, "Seed for randomised suites");

    std::string file, file_b, out, mode = "strong", proto, fault = "none", input = "zero";
    bool trace = true, no_dedup = false;
    int n = 1;

    auto *norm = app.add_subcommand("normalize", "Rewrite a closed recursion-free term to a basic term");
    norm->add_option("file", file)->required()->check(CLI::ExistingFile);
    norm->add_flag("!--no-trace", trace, "Print only the normal form");

    auto *lts = app.add_subcommand("lts", "Build the configuration graph");
    lts->add_option("file", file)->required()->check(CLI::ExistingFile);
    lts->add_option("-o,--out", out, "Write the graph here instead of stdout");
    lts->add_flag("--no-dedup", no_dedup, "Keep revisited configurations apart");

    auto *bis = app.add_subcommand("bisim", "Compare two terms");
    bis->add_option("a", file)->required()->check(CLI::ExistingFile);
    bis->add_option("b", file_b)->required()->check(CLI::ExistingFile);
    bis->add_option("--mode", mode)->check(CLI::IsMember({"strong", "branching"}));

    auto *ver = app.add_subcommand("verify", "Run the protocol suite");
    ver->add_option("protocol", proto)->required();
    ver->add_option("--n", n, "Key length");
    ver->add_option("--fault", fault, "Seeded fault")
        ->check(CLI::IsMember({"none", "drop-correction", "flip-basis", "wrong-shadow"}));

    auto *exp = app.add_subcommand("export", "Write a protocol model as term files plus registry");
    exp->add_option("protocol", proto)->required();
    exp->add_option("--n", n, "Key length");
    exp->add_option("--input", input, "Teleportation input (zero or plus)");
    exp->add_option("--fault", fault, "Seeded fault")
        ->check(CLI::IsMember({"none", "drop-correction", "flip-basis", "wrong-shadow"}));
    exp->add_option("-o,--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    if (norm->parsed())
        return cmd_normalize(c, file, trace);
    if (lts->parsed())
        return cmd_lts(c, file, out, no_dedup);
    if (bis->parsed())
        return cmd_bisim(c, file, file_b, mode);
    if (ver->parsed())
        return cmd_verify(c, proto, n, fault);
    return cmd_export(proto, n, input, fault, out);
}
