#include "pqa/protocols.hpp"

#include "pqa/error.hpp"
#include "pqa/parser.hpp"

#include <functional>
#include <sstream>

namespace pqa {

namespace {

using gates::kron;

std::string ix(std::initializer_list<int> v) {
    std::string s = "(";
    bool first = true;
    for (int i : v) {
        if (!first)
            s += ",";
        s += std::to_string(i);
        first = false;
    }
    return s + ")";
}

std::string join(const std::vector<std::string> &xs, const std::string &sep) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i)
        s += (i ? sep : "") + xs[i];
    return s;
}

// Uniform choice over the items, written with absolute weights.
std::string uniform(const std::vector<std::string> &items) {
    if (items.size() == 1)
        return items[0];
    std::string w = " [+1/" + std::to_string(items.size()) + "] ";
    return "(" + join(items, w) + ")";
}

std::string sum(const std::vector<std::string> &items) { return "(" + join(items, " + ") + ")"; }

CMat hpow(int b) { return b ? gates::H() : gates::I(); }
CMat xpow(int b) { return b ? gates::X() : gates::I(); }

CMat per_bit(int n, const std::function<CMat(int)> &f) {
    CMat m = f(0);
    for (int j = 1; j < n; ++j)
        m = kron(m, f(j));
    return m;
}

CMat basis_projector(int b, int k) { return hpow(b) * (k ? gates::P1() : gates::P0()) * hpow(b); }

std::vector<std::string> names(const std::string &prefix, int n) {
    std::vector<std::string> v;
    for (int j = 0; j < n; ++j)
        v.push_back(prefix + std::to_string(j));
    return v;
}

Action act(const std::string &name, std::initializer_list<int> idx = {}) { return Action{name, idx, Mark::Plain}; }

void channel(Registry &r, const std::string &ch, std::initializer_list<int> idx) {
    Action s = act("send_" + ch, idx), v = act("receive_" + ch, idx), c = act("c_" + ch, idx);
    r.add_classical(s);
    r.add_classical(v);
    r.add_classical(c);
    r.add_gamma(s, v, c);
}

std::string rec(const std::string &top, const std::vector<std::pair<std::string, std::string>> &eqs) {
    std::string s = "rec " + top + " where {\n";
    for (std::size_t i = 0; i < eqs.size(); ++i)
        s += "  " + eqs[i].first + " = " + eqs[i].second + (i + 1 < eqs.size() ? ";\n" : "\n");
    return s + "}";
}

std::string set_text(const std::vector<std::string> &xs) { return "{" + join(xs, ", ") + "}"; }

void finish(ProtocolModel &m, Registry reg, const std::vector<std::string> &parties, const std::vector<std::string> &h,
            const std::vector<std::string> &i) {
    reg.finalize();
    m.reg = std::make_shared<const Registry>(std::move(reg));
    m.system_text = "abstr" + set_text(i) + "(encap" + set_text(h) + "(\n" + join(parties, "\n||\n") + "\n))\n";
    m.spec_text = "rec X where { X = receive_A(0) . send_B(0) . X }\n";
    m.system = parse_term(m.system_text);
    m.spec = parse_term(m.spec_text);
    elaborate(m.system, *m.reg);
    elaborate(m.spec, *m.reg);
    m.H = std::make_shared<const ActionSet>(h);
    m.I = std::make_shared<const ActionSet>(i);
}

void external(Registry &r) {
    r.add_classical(act("receive_A", {0}));
    r.add_classical(act("send_B", {0}));
    channel(r, "K", {0});
}

void random_bits(Registry &r, int n, const std::vector<std::string> &anc, const std::vector<std::string> &fams) {
    int N = 1 << n;
    Rational w(1, N);
    for (const auto &f : fams)
        for (int i = 0; i < N; ++i) {
            CMat p = CMat::Zero(N, N);
            p(i, i) = 1;
            r.add_projection(act(f, {i}), anc, p, f, w);
        }
    for (int i = 0; i < N; ++i)
        r.add_unitary(act("rst", {i}), anc, per_bit(n, [&](int j) { return CMat(gates::H() * xpow(bit_of(i, j, n))); }));
}

}  // namespace

int bit_of(int i, int j, int n) { return (i >> (n - 1 - j)) & 1; }

std::string protocol_name(ProtocolKind k) {
    switch (k) {
    case ProtocolKind::Teleport: return "teleport";
    case ProtocolKind::BB84: return "bb84";
    case ProtocolKind::E91: return "e91";
    }
    return "?";
}

ProtocolKind parse_protocol(const std::string &s) {
    if (s == "teleport")
        return ProtocolKind::Teleport;
    if (s == "bb84")
        return ProtocolKind::BB84;
    if (s == "e91")
        return ProtocolKind::E91;
    throw Error(ErrorCode::OutOfRange, "unknown protocol " + s + " (teleport, bb84, e91)");
}

ProtocolModel build_teleport(const CMat &input, Fault fault) {
    if (input.rows() != 2 || input.cols() != 2 || !is_density(input))
        throw Error(ErrorCode::InvalidState, "teleportation input must be a 1-qubit density matrix with unit trace");
    ProtocolModel m{ProtocolKind::Teleport, "teleport", 1, fault, input, nullptr, {}, {}, nullptr, nullptr, nullptr,
                    nullptr};
    Registry r;
    for (const char *q : {"m", "q1", "q2"})
        r.add_register(q, Visibility::Internal);
    CMat epr = CMat::Zero(4, 4);
    epr(0, 0) = epr(0, 3) = epr(3, 0) = epr(3, 3) = 0.5;
    r.set_initial(make_state(r.regs, kron(input, epr)));

    external(r);
    channel(r, "QA", {1});
    channel(r, "QB", {2});
    channel(r, "QE", {2});
    for (int i = 0; i < 4; ++i)
        channel(r, "P", {i});
    r.add_unitary(act("CNOT"), {"m", "q1"}, gates::CNOT());
    r.add_unitary(act("H"), {"m"}, gates::H());
    for (int i = 0; i < 4; ++i) {
        int a = i >> 1, b = i & 1;
        CMat p = CMat::Zero(4, 4);
        p(i, i) = 1;
        r.add_projection(act("M", {i}), {"m", "q1"}, p, "M", Rational(1, 4));
        r.add_unitary(act("rstA", {i}), {"m", "q1"}, kron(xpow(a), xpow(b)));
        CMat za = a ? gates::Z() : gates::I();
        r.add_unitary(act("sigma", {i}), {"q2"}, za * xpow(b));
    }
    r.add_unitary(act("reload"), {"m", "q2"}, gates::SWAP());
    r.add_unitary(act("Set_q"), {"q1"}, gates::H());
    r.add_unitary(act("H_q"), {"q1", "q2"}, gates::CNOT());

    std::vector<std::string> meas, recv;
    for (int i = 0; i < 4; ++i) {
        std::string s = std::to_string(i);
        meas.push_back("M(" + s + ") . rstA(" + s + ") . send_P(" + s + ")");
        if (fault == Fault::DropCorrection && i == 3)
            recv.push_back("receive_P(" + s + ")");
        else
            recv.push_back("receive_P(" + s + ") . sigma(" + s + ")");
    }
    std::string A = rec("A", {{"A", "receive_A(0) . A1"},
                              {"A1", "receive_QA(1) . A2"},
                              {"A2", "CNOT . A3"},
                              {"A3", "H . A4"},
                              {"A4", uniform(meas) + " . A5"},
                              {"A5", "receive_K(0) . A"}});
    std::string B = rec("B", {{"B", "receive_QB(2) . B1"},
                              {"B1", sum(recv) + " . B2"},
                              {"B2", "send_B(0) . B3"},
                              {"B3", "send_QE(2) . send_K(0) . B"}});
    std::string E = rec("E", {{"E", "send_QA(1) . E1"},
                              {"E1", "send_QB(2) . E2"},
                              {"E2", "receive_QE(2) . E3"},
                              {"E3", "reload . E4"},
                              {"E4", "Set_q . E5"},
                              {"E5", "H_q . E"}});
    std::vector<std::string> h{"send_QA", "receive_QA", "send_QB", "receive_QB", "send_QE",
                               "receive_QE", "send_P", "receive_P", "send_K", "receive_K"};
    std::vector<std::string> i{"Set_q", "H_q", "CNOT", "H", "M", "rstA", "sigma",
                               "reload", "c_QA", "c_QB", "c_QE", "c_P", "c_K"};
    finish(m, std::move(r), {A, B, E}, h, i);
    return m;
}

ProtocolModel build_bb84(int n, Fault fault) {
    if (n < 1 || n > 4)
        throw Error(ErrorCode::OutOfRange, "BB84 key length must be within 1..4");
    ProtocolModel m{ProtocolKind::BB84, "bb84", n, fault, CMat(), nullptr, {}, {}, nullptr, nullptr, nullptr, nullptr};
    int N = 1 << n;
    auto q = names("q", n), anc = names("r", n);
    Registry r;
    for (const auto &x : q)
        r.add_register(x, Visibility::Internal);
    for (const auto &x : anc)
        r.add_register(x, Visibility::Internal);
    {
        Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(1 << (2 * n));
        for (int i = 0; i < N; ++i)
            psi(i) = 1.0 / std::sqrt(double(N));
        r.set_initial(pure_state(r.regs, psi));
    }
    external(r);
    channel(r, "Q", {});
    for (int i = 0; i < N; ++i) {
        channel(r, "PB", {i});
        channel(r, "PA", {i});
    }
    random_bits(r, n, anc, {"RandBa", "RandKa", "RandBb"});
    for (int i = 0; i < N; ++i) {
        r.add_unitary(act("Set", {i}), q, per_bit(n, [&](int j) { return xpow(bit_of(i, j, n)); }));
        r.add_unitary(act("HB", {i}), q, per_bit(n, [&](int j) { return hpow(bit_of(i, j, n)); }));
    }
    for (int b = 0; b < N; ++b)
        for (int k = 0; k < N; ++k) {
            r.add_projection(act("M", {b, k}), q,
                             per_bit(n, [&](int j) { return basis_projector(bit_of(b, j, n), bit_of(k, j, n)); }),
                             "M" + ix({b}), Rational(1, N));
            r.add_unitary(act("rstq", {b, k}), q,
                          per_bit(n, [&](int j) { return CMat(xpow(bit_of(k, j, n)) * hpow(bit_of(b, j, n))); }));
        }
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b)
            for (int k = 0; k < N; ++k)
                r.add_classical(act("cmp", {a, b, k}));

    std::vector<std::pair<std::string, std::string>> ea{{"A", "receive_A(0) . A1"}}, eb{{"B", "receive_Q . B1"}};
    std::vector<std::string> a1, b1;
    for (int ba = 0; ba < N; ++ba) {
        std::string sa = std::to_string(ba);
        a1.push_back("RandBa(" + sa + ") . rst(" + sa + ") . A2_" + sa);
        std::vector<std::string> a2;
        for (int ka = 0; ka < N; ++ka) {
            std::string sk = std::to_string(ka);
            int prep = fault == Fault::FlipBasis ? (N - 1) ^ ba : ba;
            std::string tail = "A6_" + sa + "_" + sk;
            a2.push_back("RandKa(" + sk + ") . rst(" + sk + ") . Set(" + sk + ") . HB(" + std::to_string(prep) +
                         ") . send_Q . " + tail);
            std::vector<std::string> a6;
            for (int bb = 0; bb < N; ++bb) {
                std::string sb = std::to_string(bb);
                a6.push_back("receive_PB(" + sb + ") . send_PA(" + sa + ") . cmp" + ix({ba, bb, ka}) +
                             " . receive_K(0) . A");
            }
            ea.push_back({tail, sum(a6)});
        }
        ea.push_back({"A2_" + sa, uniform(a2)});
    }
    ea.insert(ea.begin() + 1, {"A1", uniform(a1)});
    for (int bb = 0; bb < N; ++bb) {
        std::string sb = std::to_string(bb);
        b1.push_back("RandBb(" + sb + ") . rst(" + sb + ") . B2_" + sb);
        std::vector<std::string> b2;
        for (int kb = 0; kb < N; ++kb) {
            std::string sk = std::to_string(kb);
            std::string tail = "B4_" + sb + "_" + sk;
            b2.push_back("M" + ix({bb, kb}) + " . rstq" + ix({bb, kb}) + " . send_PB(" + sb + ") . " + tail);
            std::vector<std::string> b4;
            for (int ba = 0; ba < N; ++ba)
                b4.push_back("receive_PA(" + std::to_string(ba) + ") . cmp" + ix({ba, bb, kb}) +
                             " . send_B(0) . send_K(0) . B");
            eb.push_back({tail, sum(b4)});
        }
        eb.push_back({"B2_" + sb, uniform(b2)});
    }
    eb.insert(eb.begin() + 1, {"B1", uniform(b1)});
    std::vector<std::string> h{"send_Q", "receive_Q", "send_PB", "receive_PB",
                               "send_PA", "receive_PA", "send_K", "receive_K"};
    std::vector<std::string> i{"RandBa", "RandKa", "RandBb", "rst", "Set", "HB", "M",
                               "rstq", "c_Q", "c_PB", "c_PA", "cmp", "c_K"};
    finish(m, std::move(r), {rec("A", ea), rec("B", eb)}, h, i);
    return m;
}

ProtocolModel build_e91(int n, Fault fault) {
    if (n < 1 || n > 3)
        throw Error(ErrorCode::OutOfRange, "E91 key length must be within 1..3");
    ProtocolModel m{ProtocolKind::E91, "e91", n, fault, CMat(), nullptr, {}, {}, nullptr, nullptr, nullptr, nullptr};
    int N = 1 << n;
    auto qa = names("qa", n), qb = names("qb", n), anc = names("r", n);
    Registry r;
    std::vector<std::string> pairs;
    for (int j = 0; j < n; ++j) {
        r.add_register(qa[j], Visibility::Internal);
        r.add_register(qb[j], Visibility::Internal);
        pairs.push_back(qa[j]);
        pairs.push_back(qb[j]);
    }
    for (const auto &x : anc)
        r.add_register(x, Visibility::Internal);
    {
        // pairs start in |00>, the ancillas in |+>
        Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(1 << (3 * n));
        for (int i = 0; i < N; ++i)
            psi(i) = 1.0 / std::sqrt(double(N));
        r.set_initial(pure_state(r.regs, psi));
    }
    external(r);
    channel(r, "Q", {});
    for (int i = 0; i < N; ++i) {
        channel(r, "PB", {i});
        channel(r, "PA", {i});
    }
    random_bits(r, n, anc, {"RandBa", "RandBb"});
    r.add_unitary(act("EPR"), pairs,
                  per_bit(n, [&](int) { return CMat(gates::CNOT() * kron(gates::H(), gates::I())); }));
    for (int b = 0; b < N; ++b)
        for (int k = 0; k < N; ++k) {
            CMat p = per_bit(n, [&](int j) { return basis_projector(bit_of(b, j, n), bit_of(k, j, n)); });
            CMat u = per_bit(n, [&](int j) { return CMat(xpow(bit_of(k, j, n)) * hpow(bit_of(b, j, n))); });
            r.add_projection(act("MA", {b, k}), qa, p, "MA" + ix({b}), Rational(1, N));
            r.add_projection(act("MB", {b, k}), qb, p, "MB" + ix({b}), Rational(1, N));
            r.add_unitary(act("rstA", {b, k}), qa, u);
            r.add_unitary(act("rstB", {b, k}), qb, u);
        }
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b)
            for (int k = 0; k < N; ++k)
                r.add_classical(act("cmp", {a, b, k}));

    std::vector<std::string> shadows_a, shadows_b;
    for (int b = 0; b < N; ++b)
        for (int k = 0; k < N; ++k) {
            shadows_b.push_back("@MB" + ix({b, k}));
            int kk = fault == Fault::WrongShadow && k == 0 ? 1 : k;
            shadows_a.push_back("@MA" + ix({b, kk}));
        }

    std::vector<std::pair<std::string, std::string>> ea{{"A", "receive_A(0) . EPR . A1"}}, eb{{"B", "receive_Q . B1"}};
    std::vector<std::string> a1, b1;
    for (int ba = 0; ba < N; ++ba) {
        std::string sa = std::to_string(ba);
        a1.push_back("RandBa(" + sa + ") . rst(" + sa + ") . send_Q . A2_" + sa);
        std::vector<std::string> a2;
        for (int k = 0; k < N; ++k) {
            std::string tail = "A4_" + sa + "_" + std::to_string(k);
            a2.push_back("MA" + ix({ba, k}) + " . rstA" + ix({ba, k}) + " . " + sum(shadows_b) + " . " + tail);
            std::vector<std::string> a4;
            for (int bb = 0; bb < N; ++bb)
                a4.push_back("receive_PB(" + std::to_string(bb) + ") . send_PA(" + sa + ") . cmp" + ix({ba, bb, k}) +
                             " . receive_K(0) . A");
            ea.push_back({tail, sum(a4)});
        }
        ea.push_back({"A2_" + sa, uniform(a2)});
    }
    ea.insert(ea.begin() + 1, {"A1", uniform(a1)});
    for (int bb = 0; bb < N; ++bb) {
        std::string sb = std::to_string(bb);
        b1.push_back("RandBb(" + sb + ") . rst(" + sb + ") . " + sum(shadows_a) + " . B2_" + sb);
        std::vector<std::string> b2;
        for (int k = 0; k < N; ++k) {
            std::string tail = "B4_" + sb + "_" + std::to_string(k);
            b2.push_back("MB" + ix({bb, k}) + " . rstB" + ix({bb, k}) + " . send_PB(" + sb + ") . " + tail);
            std::vector<std::string> b4;
            for (int ba = 0; ba < N; ++ba)
                b4.push_back("receive_PA(" + std::to_string(ba) + ") . cmp" + ix({ba, bb, k}) +
                             " . send_B(0) . send_K(0) . B");
            eb.push_back({tail, sum(b4)});
        }
        eb.push_back({"B2_" + sb, uniform(b2)});
    }
    eb.insert(eb.begin() + 1, {"B1", uniform(b1)});
    std::vector<std::string> h{"send_Q", "receive_Q", "send_PB", "receive_PB", "send_PA", "receive_PA",
                               "MA",     "@MA",       "MB",      "@MB",        "send_K",  "receive_K"};
    std::vector<std::string> i{"c_Q", "c_PB", "c_PA", "MA!", "MB!", "cmp", "EPR",
                               "RandBa", "RandBb", "rst", "rstA", "rstB", "c_K"};
    finish(m, std::move(r), {rec("A", ea), rec("B", eb)}, h, i);
    return m;
}

}  // namespace pqa
