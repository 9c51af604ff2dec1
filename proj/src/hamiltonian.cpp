#include "rspv/hamiltonian.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rspv/functionalities.hpp"

namespace rspv::ham {

using qsim::BasisIndex;
using qsim::Complex;
using qsim::Matrix;
using qsim::RegKind;
using qsim::Side;

namespace {

Matrix pauli(char c) {
    Matrix m = Matrix::Zero(2, 2);
    switch (c) {
        case 'X': m(0, 1) = m(1, 0) = 1; break;
        case 'Z': m(0, 0) = 1, m(1, 1) = -1; break;
        default: m(0, 0) = m(1, 1) = 1; break;
    }
    return m;
}

Matrix cnot() {
    Matrix m = Matrix::Zero(4, 4);
    m(0, 0) = m(1, 1) = m(2, 3) = m(3, 2) = 1;
    return m;
}

CqEnsemble unit() { return CqEnsemble{qsim::RegisterLayout(qsim::kIndexBits), {{{}, 1.0, {{0, {1, 0}}}}}}; }

// Collapsed Q_in for a term: Z and I letters give |mr_t>, X letters |+> or |->.
qsim::SparseState collapsed_input(const std::string& letters, const std::string& mr) {
    std::string spec;
    for (std::size_t t = 0; t < letters.size(); ++t)
        spec.push_back(letters[t] == 'X' ? (mr[t] == '1' ? '-' : '+') : mr[t]);
    return product_state(spec);
}

void discard_all(Session& s, const std::string& prefix) {
    std::vector<std::string> names;
    for (const auto& e : s.ens().layout.entries())
        if (e.name.rfind(prefix, 0) == 0) names.push_back(e.name);
    for (const auto& n : names)
        s.ens() = qsim::discard(std::move(s.ens()), n, &s.nature_rng());
}

}  // namespace

void XZHamiltonian::validate() const {
    if (n < 1) throw HamiltonianError("need at least one qubit");
    if (terms.empty()) throw HamiltonianError("need at least one term");
    for (const auto& t : terms) {
        if (static_cast<int>(t.letters.size()) != n) throw HamiltonianError("term length differs from qubit count");
        if (!(std::abs(t.gamma) <= 1.0)) throw HamiltonianError("|gamma| must be at most 1");
        int weight = 0;
        for (char c : t.letters) {
            if (c != 'X' && c != 'Z' && c != 'I') throw HamiltonianError("letters must be X, Z or I");
            weight += c != 'I';
        }
        if (locality > 0 && weight > locality) throw HamiltonianError("term exceeds the locality bound");
    }
}

XZHamiltonian XZHamiltonian::parse(const std::string& text, int locality) {
    XZHamiltonian h;
    h.locality = locality;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (auto c = line.find('#'); c != std::string::npos) line.erase(c);
        std::istringstream ls(line);
        Term t;
        if (!(ls >> t.gamma)) {
            std::string rest;
            if (std::istringstream(line) >> rest) throw HamiltonianError("bad term line: " + line);
            continue;
        }
        if (!(ls >> t.letters)) throw HamiltonianError("missing letters: " + line);
        std::string extra;
        if (ls >> extra) throw HamiltonianError("trailing text: " + line);
        if (h.terms.empty()) h.n = static_cast<int>(t.letters.size());
        h.terms.push_back(t);
    }
    h.validate();
    return h;
}

XZHamiltonian XZHamiltonian::load(const std::string& path, int locality) {
    std::ifstream f(path);
    if (!f) throw HamiltonianError("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), locality);
}

Matrix XZHamiltonian::dense() const {
    validate();
    if (n > 10) throw TooLarge("dense Hamiltonian needs n <= 10");
    const Eigen::Index d = Eigen::Index{1} << n;
    Matrix h = Matrix::Zero(d, d);
    for (const auto& t : terms) {
        Matrix m = Matrix::Ones(1, 1);
        for (char c : t.letters) {
            Matrix p = pauli(c);
            Matrix r(m.rows() * 2, m.cols() * 2);
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j) r.block(i * 2, j * 2, 2, 2) = m(i, j) * p;
            m = r;
        }
        h += t.gamma * m;
    }
    return h;
}

double ground_energy(const XZHamiltonian& h) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.dense(), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double energy_of(const XZHamiltonian& h, const qsim::SparseState& witness) {
    const Matrix d = h.dense();
    qsim::Vector v = qsim::Vector::Zero(d.rows());
    for (const auto& a : witness) {
        // dense index has qubit 0 as msb
        BasisIndex r = 0;
        for (int t = 0; t < h.n; ++t)
            if ((a.index >> t) & 1U) r |= BasisIndex{1} << (h.n - 1 - t);
        v(static_cast<Eigen::Index>(r)) += a.value;
    }
    return (v.adjoint() * d * v)(0, 0).real() / v.squaredNorm();
}

CqEnsemble sample_rho_comp(const XZHamiltonian& h, int K, std::uint64_t seed) {
    h.validate();
    if (K < 1) throw BudgetExceeded("need K >= 1");
    if (h.n * K > kSampleBudget) throw BudgetExceeded("n K exceeds the simulator budget");
    std::mt19937_64 rng(seed);
    CqEnsemble e = unit();
    std::uniform_int_distribution<int> pick(0, static_cast<int>(h.terms.size()) - 1);
    for (int k = 1; k <= K; ++k) {
        const std::string ks = std::to_string(k);
        const int j = pick(rng);
        const std::string& letters = h.terms[static_cast<std::size_t>(j)].letters;
        e.layout.add("P" + ks, RegKind::quantum, h.n, Side::client);
        e.layout.add("qin" + ks, RegKind::quantum, h.n, Side::server);
        for (int t = 0; t < h.n; ++t) {
            const int p = e.layout.qubit("P" + ks, t), q = e.layout.qubit("qin" + ks, t);
            e = qsim::apply_unitary(std::move(e), {p}, qsim::hadamard());
            e = qsim::apply_unitary(std::move(e), {p, q}, cnot());
            if (letters[static_cast<std::size_t>(t)] == 'X') e = qsim::apply_unitary(std::move(e), {p}, qsim::hadamard());
        }
        e = qsim::measure_basis(std::move(e), e.layout.qubits("P" + ks), qsim::Basis::z(), "mr" + ks);
        e = qsim::discard(std::move(e), "P" + ks);
        e.layout.add("j" + ks, RegKind::classical, 16, Side::client);
        for (auto& b : e.branches) qsim::write_label(b, e.layout, "j" + ks, qsim::bits_to_string(static_cast<BasisIndex>(j), 16));
    }
    // the P measurement records are client data
    CqEnsemble out{qsim::RegisterLayout(qsim::kIndexBits), {}};
    for (const auto& en : e.layout.entries())
        out.layout.add(en.name, en.kind, en.width,
                       en.name.rfind("mr", 0) == 0 || en.name.rfind("j", 0) == 0 ? Side::client : en.side);
    out.branches = std::move(e.branches);
    return out;
}

double round_value(const XZHamiltonian& h, const CompRound& r, const std::string& bell) {
    if (r.term < 0 || static_cast<std::size_t>(r.term) >= h.terms.size()) throw LengthMismatch("term index out of range");
    const Term& t = h.terms[static_cast<std::size_t>(r.term)];
    if (static_cast<int>(r.mr.size()) != h.n || static_cast<int>(bell.size()) != 2 * h.n)
        throw LengthMismatch("record width differs from qubit count");
    int parity = 0;
    for (int q = 0; q < h.n; ++q) {
        const char c = t.letters[static_cast<std::size_t>(q)];
        if (c == 'I') continue;
        const char key = bell[static_cast<std::size_t>(c == 'Z' ? 2 * q : 2 * q + 1)];
        parity ^= (r.mr[static_cast<std::size_t>(q)] == '1') ^ (key == '1');
    }
    return parity ? -t.gamma : t.gamma;
}

double val_h(const XZHamiltonian& h, const std::vector<CompRound>& comp, const std::vector<std::string>& bell) {
    if (comp.size() != bell.size() || comp.empty()) throw LengthMismatch("records differ in length");
    double sum = 0;
    for (std::size_t k = 0; k < comp.size(); ++k) sum += round_value(h, comp[k], bell[k]);
    return sum / static_cast<double>(comp.size());
}

long paper_K(int kappa, double a, double b) {
    if (!(b > a)) throw HamiltonianError("need b > a");
    return static_cast<long>(std::ceil(100.0 * kappa * kappa / ((b - a) * (b - a)) - 1e-9));
}

qsim::SparseState product_state(const std::string& letters) {
    qsim::SparseState s{{0, {1, 0}}};
    const double r = std::numbers::sqrt2 / 2;
    for (std::size_t t = 0; t < letters.size(); ++t) {
        const BasisIndex bit = BasisIndex{1} << t;
        qsim::SparseState next;
        for (const auto& a : s) switch (letters[t]) {
                case '0': next.push_back(a); break;
                case '1': next.push_back({a.index | bit, a.value}); break;
                case '+':
                    next.push_back({a.index, a.value * r});
                    next.push_back({a.index | bit, a.value * r});
                    break;
                case '-':
                    next.push_back({a.index, a.value * r});
                    next.push_back({a.index | bit, -a.value * r});
                    break;
                default: throw HamiltonianError("product state letters must be 0, 1, + or -");
            }
        s = std::move(next);
    }
    qsim::canonicalize(s);
    return s;
}

// One teleportation round in scope "k<k>": Q_in via the ideal chosen-input
// set-up, witness from the server, Bell measurement via the ideal ROAV.
namespace {

std::string teleport_round(Session& s, const XZHamiltonian& h, const qsim::SparseState& qin,
                           const qsim::SparseState& witness) {
    const int n = h.n;
    func::ideal_chosen_round(s, [&](Session& ss) { ss.add_quantum_state("qin", n, qin); });
    if (!s.has("qin")) return std::string(static_cast<std::size_t>(2 * n), '0');
    s.server_step("energy.witness", "w", [&](ServerView& v) {
        v.add_quantum("w", n);
        v.replace("w", witness);
    });
    std::vector<int> qs;
    for (int t = 0; t < n; ++t) {
        qs.push_back(s.ens().layout.qubit(s.q("qin"), t));
        qs.push_back(s.ens().layout.qubit(s.q("w"), t));
    }
    static thread_local std::map<int, func::RoavSpec> bells;
    auto it = bells.find(n);
    if (it == bells.end()) it = bells.emplace(n, func::bell_povm(n)).first;
    s.ens() = func::ideal_roav_apply(it->second, std::move(s.ens()), qs, s.q("bell"), &s.nature_rng());
    return s.client_value("bell");
}

}  // namespace

EnergyTestRecord energy_test(Session& s, const EnergyParams& p, const qsim::SparseState& witness) {
    if (s.mode() != ExecMode::sample) throw ProtocolError("the energy test runs in sample mode");
    p.h.validate();
    const XZHamiltonian& h = p.h;
    EnergyTestRecord rec;
    rec.energy_mode = std::bernoulli_distribution(0.5)(s.client_rng());
    s.set_client("energy.mode", rec.energy_mode ? "1" : "0");
    s.init_flag();
    const long K = rec.energy_mode ? p.rounds() : 1;
    std::uniform_int_distribution<int> pick(0, static_cast<int>(h.terms.size()) - 1);
    std::bernoulli_distribution coin(0.5);
    for (long k = 1; k <= K; ++k) {
        const std::string scope = "k" + std::to_string(k);
        CompRound r;
        std::string bell;
        {
            Session::Scope sc(s, scope);
            s.init_flag();
            if (rec.energy_mode) {
                r.term = pick(s.client_rng());
                for (int t = 0; t < h.n; ++t) r.mr.push_back(coin(s.client_rng()) ? '1' : '0');
                bell = teleport_round(s, h, collapsed_input(h.terms[static_cast<std::size_t>(r.term)].letters, r.mr),
                                      witness);
            } else {
                // operator test: a random BB84 input through the ideal ROAV
                std::string spec;
                for (int t = 0; t < h.n; ++t) spec.push_back(func::symbol(func::draw_bb84(s.client_rng())));
                teleport_round(s, h, product_state(spec), witness);
            }
        }
        s.absorb_flag(s.q(scope + "/"));
        discard_all(s, s.q(scope + "/"));
        if (rec.energy_mode) {
            rec.comp.push_back(r);
            rec.bell.push_back(bell);
        }
    }
    if (rec.energy_mode) {
        rec.val = val_h(h, rec.comp, rec.bell);
        const double cut = 0.5 * (p.a + p.b);
        const bool below = rec.val < cut;
        s.check([below](const Label&) { return below; });
    }
    rec.accept = s.ens().branches.empty() ? false : s.ens().branches.front().label.at(s.flag_register()) == "0";
    return rec;
}

EnergyRun run_energy_test(const EnergyParams& p, const qsim::SparseState& witness, const Adversary& adv,
                          std::uint64_t seed) {
    EnergyRun r;
    r.outcome = run(
        "energy_test", [&](Session& s) { r.record = energy_test(s, p, witness); }, adv, unit(),
        {seed, ExecMode::sample});
    r.record.accept = r.outcome.flag == Flag::pass;
    return r;
}

}  // namespace rspv::ham
