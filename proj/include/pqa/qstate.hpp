#pragma once

#include <Eigen/Dense>

#include <complex>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace pqa {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;

enum class Visibility { Public, Internal };

struct Register {
    std::string name;
    Visibility vis = Visibility::Public;

    friend bool operator==(const Register &, const Register &) = default;
};

// Density matrix over one qubit per register; the first register is the most significant bit.
struct QState {
    std::vector<Register> regs;
    CMat rho;

    int index_of(const std::string &reg) const;
    std::size_t dim() const { return static_cast<std::size_t>(rho.rows()); }
};
using QStatePtr = std::shared_ptr<const QState>;

constexpr double kStateEps = 1e-9;

QState make_state(std::vector<Register> regs, CMat rho, double eps = kStateEps);
QState basis_state(std::vector<Register> regs, const std::string &bits);
QState pure_state(std::vector<Register> regs, const Eigen::VectorXcd &psi);

QState apply_unitary(const QState &s, const CMat &u, const std::vector<std::string> &targets);
double measure_probability(const QState &s, const CMat &p, const std::vector<std::string> &targets);
// Normalised post-measurement state; throws ZeroProbabilityBranch when tr(P rho) <= eps.
QState apply_projection(const QState &s, const CMat &p, const std::vector<std::string> &targets,
                        double eps = 1e-12);
// Unnormalised P rho P together with its trace.
QState project_raw(const QState &s, const CMat &p, const std::vector<std::string> &targets, double &trace);

QState tensor(const QState &a, const QState &b);
bool state_eq(const QState &a, const QState &b, double eps = kStateEps);
QState reduced(const QState &s, const std::vector<std::string> &keep);
QState public_part(const QState &s);
double trace_distance_bound(const QState &a, const QState &b);

bool is_unitary(const CMat &u, double eps = 1e-9);
bool is_projector(const CMat &p, double eps = 1e-9);
bool is_density(const CMat &rho, double eps = kStateEps);

CMat random_density(std::size_t dim, std::mt19937_64 &rng);
Eigen::VectorXcd random_pure(std::size_t dim, std::mt19937_64 &rng);
CMat random_unitary(std::size_t dim, std::mt19937_64 &rng);

namespace gates {
CMat I();
CMat X();
CMat Y();
CMat Z();
CMat H();
CMat CNOT();
CMat SWAP();
CMat P0();
CMat P1();
CMat kron(const CMat &a, const CMat &b);
}  // namespace gates

}  // namespace pqa
