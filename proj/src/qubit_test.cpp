#include "rspv/qubit_test.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "rspv/functionalities.hpp"
#include "rspv/protocols.hpp"

namespace rspv::qt {

using qsim::Complex;
using qsim::Vector;

namespace {

Vector ket_plus(int theta) {
    Vector v(2);
    v(0) = std::numbers::sqrt2 / 2;
    v(1) = qsim::phase_of(theta) * (std::numbers::sqrt2 / 2);
    return v;
}

Matrix proj_plus(int theta) {
    Vector v = ket_plus(theta);
    return v * v.adjoint();
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix r(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return r;
}

double op_norm(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

Matrix random_gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = Complex(g(rng), g(rng));
    return m;
}

Matrix orthonormal_columns(const Matrix& m) {
    Eigen::HouseholderQR<Matrix> qr(m);
    return qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
}

std::string msb3(int v) {
    std::string s = "000";
    for (int t = 0; t < 3; ++t)
        if ((v >> (2 - t)) & 1) s[static_cast<std::size_t>(t)] = '1';
    return s;
}

int from_msb(const std::string& s) {
    int v = 0;
    for (char c : s) v = 2 * v + (c == '1');
    return v;
}

}  // namespace

int u_value(int c, int theta) {
    theta = ((theta % 8) + 8) % 8;
    if (c == 0) return (theta == 1 || theta == 7) ? 0 : 1;
    if (c == 2) return (theta == 1 || theta == 3) ? 0 : 1;
    throw ProtocolError("question must be 0 or 2");
}

Matrix eigen_projector(const Matrix& x, int u) {
    Matrix id = Matrix::Identity(x.rows(), x.cols());
    return (id + (u ? -1.0 : 1.0) * x) / 2.0;
}

void QubitGameInstance::validate() const {
    const Eigen::Index d = x0.rows();
    for (const auto* x : {&x0, &x2}) {
        if (x->rows() != d || x->cols() != d) throw qsim::DimensionMismatch("observables differ in dimension");
        if ((*x - x->adjoint()).norm() > 1e-9) throw NotPsd("observable is not Hermitian");
        if ((*x * *x - Matrix::Identity(d, d)).norm() > 1e-9) throw NotPsd("observable does not square to I");
    }
    for (const auto& p : phi) {
        if (p.rows() != d || p.cols() != d) throw qsim::DimensionMismatch("state and observable dimensions differ");
        Matrix h = (p + p.adjoint()) / 2.0;
        Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-9) throw NotPsd("state is not positive semidefinite");
    }
}

double game_value(const QubitGameInstance& inst) {
    inst.validate();
    double v = 0;
    for (int t = 0; t < 4; ++t) {
        const int theta = 2 * t + 1;
        for (int c : {0, 2}) {
            const Matrix& x = c == 0 ? inst.x0 : inst.x2;
            v += 0.125 * (eigen_projector(x, u_value(c, theta)) * inst.phi[static_cast<std::size_t>(t)]).trace().real();
        }
    }
    return v;
}

QubitGameInstance fact100_instance() {
    QubitGameInstance inst;
    for (int t = 0; t < 4; ++t) inst.phi[static_cast<std::size_t>(t)] = proj_plus(2 * t + 1);
    inst.x0 = proj_plus(0) - proj_plus(4);
    inst.x2 = proj_plus(2) - proj_plus(6);
    return inst;
}

QubitGameInstance random_blind_instance(std::uint64_t seed, int dim) {
    if (dim < 1) throw qsim::DimensionMismatch("dimension must be positive");
    std::mt19937_64 rng(seed);
    const int env = 2;
    // Stinespring isometry C^2 -> C^dim (x) C^env
    Matrix v = orthonormal_columns(random_gaussian(rng, dim * env, 2));
    QubitGameInstance inst;
    for (int t = 0; t < 4; ++t) {
        Matrix big = v * proj_plus(2 * t + 1) * v.adjoint();
        Matrix out = Matrix::Zero(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                for (int e = 0; e < env; ++e) out(i, j) += big(i * env + e, j * env + e);
        inst.phi[static_cast<std::size_t>(t)] = out;
    }
    std::bernoulli_distribution coin(0.5);
    for (auto* x : {&inst.x0, &inst.x2}) {
        Matrix u = orthonormal_columns(random_gaussian(rng, dim, dim));
        Vector sign(dim);
        for (int i = 0; i < dim; ++i) sign(i) = coin(rng) ? 1.0 : -1.0;
        *x = u * sign.asDiagonal() * u.adjoint();
        *x = (*x + x->adjoint()) / 2.0;
    }
    return inst;
}

QubitGameInstance perturbed_fact100(double strength) {
    QubitGameInstance inst = fact100_instance();
    const double a = strength * std::numbers::pi / 2;
    inst.x2 = std::cos(a) * inst.x2 + std::sin(a) * inst.x0;
    return inst;
}

// ---------------------------------------------------------------- protocol round

void qubit_test_round(Session& s, Backend backend, int kappa) {
    std::string reg;
    if (backend == Backend::ideal) {
        const int t1 = std::bernoulli_distribution(0.5)(s.client_rng());
        const int t2 = std::bernoulli_distribution(0.5)(s.client_rng());
        const int theta = 4 * t1 + 2 * t2 + 1;
        s.set_client("theta", msb3(theta));
        s.add_quantum_state("q", 1, qsim::plus_theta(theta));
        s.server_step("qt.deliver", "q", [](ServerView&) {});
        reg = "q";
    } else {
        // toy trapdoor pair; the shift has bit 1 set so the phase comes out odd
        func::NtcfKeys keys;
        do {
            keys = func::toy_ntcf_keygen(0.5, kappa, s.client_rng()());
        } while (((keys.shift >> 1) & 1U) == 0);
        const std::string msg = encode_message({keys.public_key, keys.secret_key});
        s.server_step(
            "qt.ntcf", msg,
            [msg, kappa](ServerView& v) {
                auto f = decode_message(msg);
                func::NtcfKeys k = func::toy_ntcf_parse(f.at(0), f.at(1));
                v.add_quantum("nb", 1);
                v.add_quantum("nx", kappa);
                v.apply({{"nb", 0}}, qsim::hadamard());
                for (int i = 0; i < kappa; ++i) v.apply({{"nx", i}}, qsim::hadamard());
                v.add_quantum("ny", k.range_width);
                v.apply_map({"nb", "nx", "ny"}, [&](const Label&, qsim::BasisIndex i) {
                    const auto& lay = v.layout();
                    int b = static_cast<int>(qsim::register_value(lay, v.q("nb"), i));
                    auto x = qsim::register_value(lay, v.q("nx"), i);
                    auto y = qsim::register_value(lay, v.q("ny"), i);
                    return std::pair<qsim::BasisIndex, Complex>{
                        qsim::with_register_value(lay, v.q("ny"), i, y ^ func::toy_ntcf_f(k, b, x)), {1, 0}};
                });
                v.measure_register("ny", qsim::Basis::z(), "y");
                v.apply({{"nx", 0}}, qsim::phase_gate(2));
                v.apply({{"nx", 1}}, qsim::phase_gate(1));
                v.measure_register("nx", qsim::Basis::x(), "d");
            },
            "d");
        s.receive("y", "y_c");
        s.receive("d", "d_c");
        const std::string yc = s.q("y_c"), dc = s.q("d_c");
        s.compute("theta", 3, qsim::Side::client, [=](const Label& l) {
            auto y = qsim::string_to_bits(l.at(yc));
            auto x0 = func::toy_ntcf_dec(keys, 0, y), x1 = func::toy_ntcf_dec(keys, 1, y);
            if (!x0 || !x1) return std::string("000");
            return msb3(proto::qfac_theta(qsim::bits_to_string(*x0, kappa), qsim::bits_to_string(*x1, kappa), l.at(dc)));
        });
        reg = "nb";
    }
    const int c = std::bernoulli_distribution(0.5)(s.client_rng()) ? 2 : 0;
    s.send("c", c ? "1" : "0");
    s.server_step(
        "qt.measure", c ? "1" : "0",
        [reg](ServerView& v) {
            const int cc = v.read_message("c") == "1" ? 2 : 0;
            v.measure_register(reg, qsim::Basis::rot(cc), "r");
        },
        "r");
    s.receive("r", "r_c");
    const std::string th = s.q("theta"), rc = s.q("r_c");
    s.set_score([=](const Label& l) -> std::optional<bool> {
        return (l.at(rc) == "1" ? 1 : 0) == u_value(c, from_msb(l.at(th)));
    });
}

ProtocolOutcome run_qubit_test(Backend backend, const Adversary& adv, std::uint64_t seed, int kappa) {
    return run(
        "qubit_test", [&](Session& s) { qubit_test_round(s, backend, kappa); }, adv,
        CqEnsemble{qsim::RegisterLayout(qsim::kIndexBits), {{{}, 1.0, {{0, {1, 0}}}}}}, {seed, ExecMode::sample},
        {"theta"}, true);
}

// ---------------------------------------------------------------- diagnostics

double anticommutator_trace(const QubitGameInstance& inst, const Matrix& rho) {
    if (rho.rows() != inst.x0.rows() || rho.cols() != inst.x0.cols())
        throw qsim::DimensionMismatch("state and observables differ in dimension");
    Matrix a = inst.x0 * inst.x2 + inst.x2 * inst.x0;
    return (a * a * rho).trace().real();
}

double closeness_bound(double delta) {
    const double r = std::numbers::sqrt2 * delta;
    return 2 * std::sqrt(r) + r;
}

Matrix partial_trace_first(const Matrix& rho) {
    if (rho.rows() % 2 != 0) throw qsim::DimensionMismatch("state has no leading qubit");
    const Eigen::Index d = rho.rows() / 2;
    return rho.block(0, 0, d, d) + rho.block(d, d, d, d);
}

Closeness closeness_to_plus_state(const Matrix& rho, double delta) {
    if (rho.rows() < 2 || rho.rows() % 2 != 0 || rho.rows() != rho.cols())
        throw qsim::DimensionMismatch("state must live on at least one qubit");
    const Eigen::Index d = rho.rows() / 2;
    const Matrix id = Matrix::Identity(d, d);
    Closeness c;
    c.s = 0.5 * ((kron(proj_plus(0), id) * rho).trace().real() + (kron(proj_plus(2), id) * rho).trace().real());
    c.defect = kCos2 - c.s;
    c.bound = closeness_bound(delta);
    c.checked = c.s >= kCos2 - delta;
    if (c.checked) {
        Matrix psi = partial_trace_first(rho);
        c.distance = qsim::trace_distance(rho, kron(proj_plus(1), psi));
    }
    return c;
}

ResidualBlindness residual_blindness_check(const std::array<Matrix, 4>& states, double delta, double shape_tol) {
    std::array<Matrix, 4> psi;
    for (int t = 0; t < 4; ++t) {
        const Matrix& r = states[static_cast<std::size_t>(t)];
        psi[static_cast<std::size_t>(t)] = partial_trace_first(r);
        if (qsim::trace_distance(r, kron(proj_plus(2 * t + 1), psi[static_cast<std::size_t>(t)])) > shape_tol)
            throw ShapeMismatch("state is not |+_theta><+_theta| (x) psi");
    }
    ResidualBlindness res;
    res.hypothesis = qsim::trace_distance(Matrix((states[0] + states[2]) / 2.0), Matrix((states[1] + states[3]) / 2.0));
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b)
            res.pairwise_max = std::max(res.pairwise_max, qsim::trace_distance(psi[static_cast<std::size_t>(a)],
                                                                               psi[static_cast<std::size_t>(b)]));
    res.bound = 6 * delta;
    res.asserted = res.hypothesis <= delta;
    res.holds = !res.asserted || res.pairwise_max <= res.bound + 1e-12;
    return res;
}

Matrix extract_isometry(const Matrix& a, const Matrix& b) {
    const Eigen::Index d = a.rows();
    const Matrix id = Matrix::Identity(d, d);
    Matrix v(2 * d, d);
    v.topRows(d) = (id + a) / 2.0;
    v.bottomRows(d) = b * (id - a) / 2.0;
    return v;
}

IsometryDefects isometry_defects(const Matrix& a, const Matrix& b) {
    const Eigen::Index d = a.rows();
    const Matrix id = Matrix::Identity(d, d);
    Matrix v = extract_isometry(a, b);
    Matrix z = Matrix::Zero(2 * d, 2 * d), x = Matrix::Zero(2 * d, 2 * d);
    z.topLeftCorner(d, d) = id;
    z.bottomRightCorner(d, d) = -id;
    x.topRightCorner(d, d) = id;
    x.bottomLeftCorner(d, d) = id;
    IsometryDefects out;
    out.isometry = op_norm(v.adjoint() * v - id);
    out.a_to_z = op_norm(v * a - z * v);
    out.b_to_x = op_norm(v * b - x * v);
    return out;
}

}  // namespace rspv::qt
