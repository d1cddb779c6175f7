#include "pqa/qstate.hpp"

#include "pqa/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <set>

namespace pqa {

int QState::index_of(const std::string &reg) const {
    for (std::size_t i = 0; i < regs.size(); ++i)
        if (regs[i].name == reg)
            return static_cast<int>(i);
    return -1;
}

bool is_unitary(const CMat &u, double eps) {
    if (u.rows() != u.cols())
        return false;
    return ((u.adjoint() * u) - CMat::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff() <= eps;
}

bool is_projector(const CMat &p, double eps) {
    if (p.rows() != p.cols())
        return false;
    return (p - p.adjoint()).cwiseAbs().maxCoeff() <= eps && (p * p - p).cwiseAbs().maxCoeff() <= eps;
}

bool is_density(const CMat &rho, double eps) {
    if (rho.rows() != rho.cols() || rho.rows() == 0)
        return false;
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > eps)
        return false;
    if (std::abs(rho.trace() - cplx(1, 0)) > eps)
        return false;
    Eigen::SelfAdjointEigenSolver<CMat> es(rho, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -eps;
}

static void check_dim(const std::vector<Register> &regs, const CMat &rho) {
    std::set<std::string> names;
    for (const auto &r : regs)
        if (!names.insert(r.name).second)
            throw Error(ErrorCode::RegisterNameClash, "register " + r.name + " declared twice");
    if (regs.size() > 20)
        throw Error(ErrorCode::InvalidState, "too many registers");
    Eigen::Index dim = Eigen::Index(1) << regs.size();
    if (rho.rows() != dim || rho.cols() != dim)
        throw Error(ErrorCode::InvalidState, "density matrix dimension does not match register count");
}

QState make_state(std::vector<Register> regs, CMat rho, double eps) {
    check_dim(regs, rho);
    if (!is_density(rho, eps))
        throw Error(ErrorCode::InvalidState, "matrix is not a density operator");
    return QState{std::move(regs), std::move(rho)};
}

QState basis_state(std::vector<Register> regs, const std::string &bits) {
    if (bits.size() != regs.size())
        throw Error(ErrorCode::InvalidState, "basis string length does not match register count");
    std::size_t k = 0;
    for (char c : bits) {
        if (c != '0' && c != '1')
            throw Error(ErrorCode::InvalidState, "basis string must be binary");
        k = (k << 1) | static_cast<std::size_t>(c == '1');
    }
    Eigen::Index dim = Eigen::Index(1) << regs.size();
    CMat rho = CMat::Zero(dim, dim);
    rho(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = 1;
    check_dim(regs, rho);
    return QState{std::move(regs), std::move(rho)};
}

QState pure_state(std::vector<Register> regs, const Eigen::VectorXcd &psi) {
    double n = psi.norm();
    if (n < 1e-12)
        throw Error(ErrorCode::InvalidState, "zero state vector");
    Eigen::VectorXcd v = psi / n;
    CMat rho = v * v.adjoint();
    check_dim(regs, rho);
    return QState{std::move(regs), std::move(rho)};
}

namespace {

std::vector<int> bit_positions(const QState &s, const std::vector<std::string> &targets) {
    std::vector<int> bits;
    int n = static_cast<int>(s.regs.size());
    for (const auto &t : targets) {
        int i = s.index_of(t);
        if (i < 0)
            throw Error(ErrorCode::UnknownRegister, "register " + t + " not in state");
        int b = n - 1 - i;
        if (std::find(bits.begin(), bits.end(), b) != bits.end())
            throw Error(ErrorCode::UnknownRegister, "register " + t + " targeted twice");
        bits.push_back(b);
    }
    return bits;
}

// m <- (U acting on `bits`) * m, column by column.
void apply_left(CMat &m, const CMat &u, const std::vector<int> &bits) {
    std::size_t k = bits.size();
    std::size_t g = std::size_t(1) << k;
    if (static_cast<std::size_t>(u.rows()) != g || static_cast<std::size_t>(u.cols()) != g)
        throw Error(ErrorCode::InvalidState, "operator dimension does not match target count");
    std::vector<std::size_t> off(g, 0);
    std::size_t mask = 0;
    for (std::size_t j = 0; j < k; ++j)
        mask |= std::size_t(1) << bits[j];
    for (std::size_t x = 0; x < g; ++x)
        for (std::size_t j = 0; j < k; ++j)
            if ((x >> (k - 1 - j)) & 1)
                off[x] |= std::size_t(1) << bits[j];
    std::size_t n = static_cast<std::size_t>(m.rows());
    std::vector<cplx> in(g), out(g);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        for (std::size_t base = 0; base < n; ++base) {
            if (base & mask)
                continue;
            for (std::size_t x = 0; x < g; ++x)
                in[x] = m(static_cast<Eigen::Index>(base + off[x]), c);
            for (std::size_t r = 0; r < g; ++r) {
                cplx acc = 0;
                for (std::size_t x = 0; x < g; ++x)
                    acc += u(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(x)) * in[x];
                out[r] = acc;
            }
            for (std::size_t x = 0; x < g; ++x)
                m(static_cast<Eigen::Index>(base + off[x]), c) = out[x];
        }
    }
}

CMat conjugate(const CMat &rho, const CMat &u, const std::vector<int> &bits) {
    CMat a = rho;
    apply_left(a, u, bits);
    CMat b = a.adjoint();
    apply_left(b, u, bits);
    return b;
}

}  // namespace

QState apply_unitary(const QState &s, const CMat &u, const std::vector<std::string> &targets) {
    auto bits = bit_positions(s, targets);
    return QState{s.regs, conjugate(s.rho, u, bits)};
}

QState project_raw(const QState &s, const CMat &p, const std::vector<std::string> &targets, double &trace) {
    auto bits = bit_positions(s, targets);
    CMat r = conjugate(s.rho, p, bits);
    trace = r.trace().real();
    return QState{s.regs, std::move(r)};
}

double measure_probability(const QState &s, const CMat &p, const std::vector<std::string> &targets) {
    double tr = 0;
    project_raw(s, p, targets, tr);
    return tr;
}

QState apply_projection(const QState &s, const CMat &p, const std::vector<std::string> &targets, double eps) {
    double tr = 0;
    QState r = project_raw(s, p, targets, tr);
    if (tr <= eps)
        throw Error(ErrorCode::ZeroProbabilityBranch, "projection has probability " + std::to_string(tr));
    r.rho /= tr;
    return r;
}

QState tensor(const QState &a, const QState &b) {
    std::vector<Register> regs = a.regs;
    for (const auto &r : b.regs) {
        if (a.index_of(r.name) >= 0)
            throw Error(ErrorCode::RegisterNameClash, "register " + r.name + " on both sides of tensor");
        regs.push_back(r);
    }
    return QState{std::move(regs), gates::kron(a.rho, b.rho)};
}

static CMat permuted_like(const QState &b, const QState &a) {
    // Re-express b's matrix in a's register order.
    std::size_t n = a.regs.size();
    std::vector<int> src(n);
    for (std::size_t i = 0; i < n; ++i)
        src[i] = b.index_of(a.regs[i].name);
    std::size_t dim = a.dim();
    std::vector<std::size_t> map(dim);
    for (std::size_t x = 0; x < dim; ++x) {
        std::size_t y = 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t bit = (x >> (n - 1 - i)) & 1;
            y |= bit << (n - 1 - static_cast<std::size_t>(src[i]));
        }
        map[x] = y;
    }
    CMat out(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = 0; c < dim; ++c)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                b.rho(static_cast<Eigen::Index>(map[r]), static_cast<Eigen::Index>(map[c]));
    return out;
}

bool state_eq(const QState &a, const QState &b, double eps) {
    if (a.regs.size() != b.regs.size())
        throw Error(ErrorCode::RegisterMismatch, "states over different register sets");
    bool same_order = true;
    for (std::size_t i = 0; i < a.regs.size(); ++i) {
        if (a.regs[i].name != b.regs[i].name)
            same_order = false;
        if (b.index_of(a.regs[i].name) < 0)
            throw Error(ErrorCode::RegisterMismatch, "register " + a.regs[i].name + " missing");
    }
    if (same_order)
        return (a.rho - b.rho).cwiseAbs().maxCoeff() <= eps;
    return (a.rho - permuted_like(b, a)).cwiseAbs().maxCoeff() <= eps;
}

double trace_distance_bound(const QState &a, const QState &b) {
    CMat d = a.rho - b.rho;
    Eigen::SelfAdjointEigenSolver<CMat> es(d, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

QState reduced(const QState &s, const std::vector<std::string> &keep) {
    std::size_t n = s.regs.size();
    std::vector<bool> kept(n, false);
    for (const auto &k : keep) {
        int i = s.index_of(k);
        if (i < 0)
            throw Error(ErrorCode::UnknownRegister, "register " + k + " not in state");
        kept[static_cast<std::size_t>(i)] = true;
    }
    std::vector<Register> regs;
    std::vector<std::size_t> kbits, tbits;
    for (std::size_t i = 0; i < n; ++i) {
        if (kept[i]) {
            regs.push_back(s.regs[i]);
            kbits.push_back(n - 1 - i);
        } else {
            tbits.push_back(n - 1 - i);
        }
    }
    std::size_t kd = std::size_t(1) << kbits.size(), td = std::size_t(1) << tbits.size();
    auto spread = [](std::size_t x, const std::vector<std::size_t> &bits) {
        std::size_t y = 0, m = bits.size();
        for (std::size_t j = 0; j < m; ++j)
            if ((x >> (m - 1 - j)) & 1)
                y |= std::size_t(1) << bits[j];
        return y;
    };
    std::vector<std::size_t> ko(kd), to(td);
    for (std::size_t x = 0; x < kd; ++x)
        ko[x] = spread(x, kbits);
    for (std::size_t x = 0; x < td; ++x)
        to[x] = spread(x, tbits);
    CMat out = CMat::Zero(static_cast<Eigen::Index>(kd), static_cast<Eigen::Index>(kd));
    for (std::size_t r = 0; r < kd; ++r)
        for (std::size_t c = 0; c < kd; ++c) {
            cplx acc = 0;
            for (std::size_t t = 0; t < td; ++t)
                acc += s.rho(static_cast<Eigen::Index>(ko[r] | to[t]), static_cast<Eigen::Index>(ko[c] | to[t]));
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = acc;
        }
    return QState{std::move(regs), std::move(out)};
}

QState public_part(const QState &s) {
    std::vector<std::string> keep;
    for (const auto &r : s.regs)
        if (r.vis == Visibility::Public)
            keep.push_back(r.name);
    return reduced(s, keep);
}

static cplx gauss(std::mt19937_64 &rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    double re = nd(rng);
    double im = nd(rng);
    return {re, im};
}

CMat random_density(std::size_t dim, std::mt19937_64 &rng) {
    auto d = static_cast<Eigen::Index>(dim);
    CMat g(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c)
            g(r, c) = gauss(rng);
    CMat rho = g * g.adjoint();
    return rho / rho.trace().real();
}

Eigen::VectorXcd random_pure(std::size_t dim, std::mt19937_64 &rng) {
    Eigen::VectorXcd v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v(i) = gauss(rng);
    return v / v.norm();
}

CMat random_unitary(std::size_t dim, std::mt19937_64 &rng) {
    auto d = static_cast<Eigen::Index>(dim);
    CMat g(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c)
            g(r, c) = gauss(rng);
    Eigen::HouseholderQR<CMat> qr(g);
    CMat q = qr.householderQ();
    CMat rr = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < d; ++i) {
        cplx ph = rr(i, i) / std::abs(rr(i, i));
        q.col(i) *= ph;
    }
    return q;
}

namespace gates {

CMat I() { return CMat::Identity(2, 2); }

CMat X() {
    CMat m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

CMat Y() {
    CMat m(2, 2);
    m << 0, cplx(0, -1), cplx(0, 1), 0;
    return m;
}

CMat Z() {
    CMat m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

CMat H() {
    CMat m(2, 2);
    double s = 1.0 / std::sqrt(2.0);
    m << s, s, s, -s;
    return m;
}

CMat CNOT() {
    CMat m = CMat::Zero(4, 4);
    m(0, 0) = m(1, 1) = m(2, 3) = m(3, 2) = 1;
    return m;
}

CMat SWAP() {
    CMat m = CMat::Zero(4, 4);
    m(0, 0) = m(1, 2) = m(2, 1) = m(3, 3) = 1;
    return m;
}

CMat P0() {
    CMat m = CMat::Zero(2, 2);
    m(0, 0) = 1;
    return m;
}

CMat P1() {
    CMat m = CMat::Zero(2, 2);
    m(1, 1) = 1;
    return m;
}

CMat kron(const CMat &a, const CMat &b) {
    CMat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace gates

}  // namespace pqa
