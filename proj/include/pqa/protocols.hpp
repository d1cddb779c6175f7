#pragma once

#include "pqa/bisim.hpp"
#include "pqa/registry.hpp"
#include "pqa/sos.hpp"
#include "pqa/term.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace pqa {

enum class ProtocolKind { Teleport, BB84, E91 };

// Seeded faults used to check that verification notices broken models.
enum class Fault { None, DropCorrection, FlipBasis, WrongShadow };

struct ProtocolModel {
    ProtocolKind kind;
    std::string name;
    int n = 1;  // key length; 1 for teleportation
    Fault fault = Fault::None;
    CMat input;  // teleportation payload
    RegistryPtr reg;
    std::string system_text;
    std::string spec_text;
    Term system;  // abstr{I}(encap{H}(parties))
    Term spec;    // receive/send loop
    std::shared_ptr<const ActionSet> H, I;
};

ProtocolModel build_teleport(const CMat &input, Fault fault = Fault::None);
ProtocolModel build_bb84(int n, Fault fault = Fault::None);
ProtocolModel build_e91(int n, Fault fault = Fault::None);

std::string protocol_name(ProtocolKind k);
ProtocolKind parse_protocol(const std::string &s);

// Branching bisimilarity of the system graph against the loop specification.
BisimResult verify_external_behavior(const ProtocolModel &m, int depth, ConfigGraph *system_graph = nullptr);

// One pass through the protocol: origins of all action edges from the root up to the first output.
struct RoundPath {
    std::vector<Action> origins;
    Rational weight;
    QStatePtr out_state;  // post-state of the output transition
    bool deadlock = false;
};

// every_path=false follows the first transition of each action node, which yields a probability measure.
std::vector<RoundPath> enumerate_rounds(const ConfigGraph &g, const Action &output, bool every_path,
                                        std::size_t limit = 1'000'000);

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct VerifyReport {
    std::string protocol;
    int n = 1;
    int depth = 0;
    std::uint64_t seed = 0;
    std::vector<Check> checks;

    bool all_pass() const;
    nlohmann::json to_json() const;
};

Check check_teleport_fidelity(const ConfigGraph &g, const CMat &input, double tol = kStateEps);
Check check_bb84_keys(const ConfigGraph &g, int n);
Check check_basis_weights(const ConfigGraph &g, int n, const std::vector<std::string> &families);
Check check_basis_pairs(const ConfigGraph &g, int n);
Check check_e91_correlation(const ConfigGraph &g, int n);
Check check_closed(const ConfigGraph &g);
Check check_deadlock_free(const ConfigGraph &g, const Action &output);

// Runs the full suite for one protocol; teleportation draws its inputs from the seed.
VerifyReport run_verify(ProtocolKind kind, int n, std::uint64_t seed, int depth, Fault fault = Fault::None,
                        double tol = kStateEps);

// Writes system.pqa, spec.pqa and registry.json into dir.
void export_model(const ProtocolModel &m, const std::string &dir);

// Bits of i, most significant first.
int bit_of(int i, int j, int n);

}  // namespace pqa
