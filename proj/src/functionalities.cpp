#include "rspv/functionalities.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace rspv::func {

using qsim::Complex;
using qsim::Side;

char symbol(Bb84 d) {
    switch (d) {
        case Bb84::zero: return '0';
        case Bb84::one: return '1';
        case Bb84::plus: return '+';
        case Bb84::minus: return '-';
    }
    return '0';
}

Bb84 from_symbol(char c) {
    switch (c) {
        case '0': return Bb84::zero;
        case '1': return Bb84::one;
        case '+': return Bb84::plus;
        case '-': return Bb84::minus;
        default: throw ProtocolError(std::string("not a BB84 symbol: ") + c);
    }
}

qsim::SparseState bb84_state(Bb84 d) {
    const double r = std::numbers::sqrt2 / 2;
    switch (d) {
        case Bb84::zero: return {{0, {1, 0}}};
        case Bb84::one: return {{1, {1, 0}}};
        case Bb84::plus: return {{0, {r, 0}}, {1, {r, 0}}};
        case Bb84::minus: return {{0, {r, 0}}, {1, {-r, 0}}};
    }
    return {};
}

std::string bb84_code(Bb84 d) {
    switch (d) {
        case Bb84::zero: return "00";
        case Bb84::one: return "01";
        case Bb84::plus: return "10";
        case Bb84::minus: return "11";
    }
    return "00";
}

Bb84 bb84_from_code(const std::string& code) {
    if (code == "00") return Bb84::zero;
    if (code == "01") return Bb84::one;
    if (code == "10") return Bb84::plus;
    if (code == "11") return Bb84::minus;
    throw ProtocolError("bad BB84 code " + code);
}

Bb84 draw_bb84(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> u(0, 3);
    return static_cast<Bb84>(u(rng));
}

Bb84 ideal_bb84_round(Session& s, const std::string& qubit_reg, const std::string& desc_reg,
                      const Bb84Source& source) {
    Bb84 d = source ? source(s.client_rng()) : draw_bb84(s.client_rng());
    s.set_client(desc_reg, bb84_code(d));
    s.add_quantum_state(qubit_reg, 1, bb84_state(d));
    s.server_step("bb84.deliver", qubit_reg, [](ServerView&) {});
    return d;
}

ProtocolOutcome ideal_bb84(std::uint64_t seed, const Adversary& adversary) {
    return run(
        "ideal_bb84", [](Session& s) { ideal_bb84_round(s, "q", "desc"); }, adversary,
        qsim::CqEnsemble{qsim::RegisterLayout(qsim::kIndexBits), {{{}, 1.0, {{0, {1, 0}}}}}}, {seed, ExecMode::sample},
        {"desc"});
}

// ---------------------------------------------------------------- target states

int TargetState::desc_width() const {
    int w = 1;
    while ((std::size_t{1} << w) < states.size()) ++w;
    return w;
}

CqEnsemble TargetState::build(const std::string& desc_reg, const std::string& out_reg) const {
    qsim::RegisterLayout layout(qsim::kIndexBits);
    layout.add(desc_reg, qsim::RegKind::classical, desc_width(), Side::client);
    layout.add(out_reg, qsim::RegKind::quantum, width, Side::server);
    CqEnsemble e{layout, {}};
    const double w = 1.0 / static_cast<double>(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        qsim::PureBranch b;
        b.weight = w;
        b.amps = states[i];
        qsim::canonicalize(b.amps);
        // desc label msb-first
        std::string bits(static_cast<std::size_t>(desc_width()), '0');
        for (int k = 0; k < desc_width(); ++k)
            if ((i >> (desc_width() - 1 - k)) & 1U) bits[static_cast<std::size_t>(k)] = '1';
        b.label[desc_reg] = bits;
        e.branches.push_back(std::move(b));
    }
    return e;
}

TargetState bb84_family() {
    TargetState t{"bb84", 1, {}};
    for (Bb84 d : {Bb84::zero, Bb84::one, Bb84::plus, Bb84::minus}) t.states.push_back(bb84_state(d));
    return t;
}

TargetState phase_family(bool odd_only) {
    TargetState t{odd_only ? "phase-odd" : "phase", 1, {}};
    for (int th = 0; th < 8; ++th)
        if (!odd_only || th % 2 == 1) t.states.push_back(qsim::plus_theta(th));
    return t;
}

void ideal_chosen_round(Session& s, const Program& deliver) {
    s.server_step(
        "rspv0.bit", "",
        [](ServerView& v) { v.compute("rspv0.b", 1, {}, [](const std::vector<std::string>&) { return "0"; }); },
        "rspv0.b");
    s.receive("rspv0.b", "rspv0.bit");
    // a branch-dependent bit is treated per branch; delivery happens where it is 0
    bool any_zero = false;
    for (const auto& b : s.ens().branches)
        if (b.label.at(s.q("rspv0.bit")) == "0") any_zero = true;
    s.check([&](const Label& l) { return l.at(s.q("rspv0.bit")) == "0"; });
    if (any_zero && deliver) deliver(s);
}

ProtocolOutcome ideal_rspv_chosen(const TargetState& family, int i, int server_bit, std::uint64_t seed) {
    if (i < 0 || static_cast<std::size_t>(i) >= family.states.size())
        throw IndexOutOfRangeError("choice index out of range");
    return run(
        "ideal_rspv_chosen",
        [&](Session& s) {
            s.set_client("choice", qsim::bits_to_string(static_cast<qsim::BasisIndex>(i), family.desc_width()));
            s.add_classical("b", 1, Side::server);
            for (auto& br : s.ens().branches) br.label[s.q("b")] = server_bit ? "1" : "0";
            s.record_round(encode_message({std::to_string(i)}), std::to_string(server_bit));
            if (server_bit == 0) {
                s.add_quantum_state("out", family.width, family.states[static_cast<std::size_t>(i)]);
            } else {
                s.fail();
            }
        },
        honest_adversary(), qsim::CqEnsemble{qsim::RegisterLayout(qsim::kIndexBits), {{{}, 1.0, {{0, {1, 0}}}}}},
        {seed, ExecMode::sample}, {"choice"});
}

// ---------------------------------------------------------------- ROAV

int RoavSpec::outcome_width() const {
    int w = 1;
    while ((std::size_t{1} << w) < branches.size()) ++w;
    return w;
}

void RoavSpec::validate() const {
    if (input_width != output_width) throw IncompletePovm("only width-preserving branches are supported");
    const Eigen::Index d = Eigen::Index{1} << input_width;
    qsim::Matrix sum = qsim::Matrix::Zero(d, d);
    for (const auto& br : branches)
        for (const auto& k : br) {
            if (k.rows() != d || k.cols() != d) throw IncompletePovm("Kraus operator has wrong dimension");
            sum += k.adjoint() * k;
        }
    if (!sum.isIdentity(1e-9)) throw IncompletePovm("POVM branches do not sum to the identity");
}

RoavSpec bell_povm(int pairs) {
    // single pair projectors onto X^a Z^b |Phi>, outcome index 2a+b
    const double r = std::numbers::sqrt2 / 2;
    std::vector<qsim::Vector> bell(4, qsim::Vector::Zero(4));
    bell[0](0) = r, bell[0](3) = r;    // (0,0)
    bell[1](0) = r, bell[1](3) = -r;   // (0,1)
    bell[2](1) = r, bell[2](2) = r;    // (1,0)
    bell[3](1) = r, bell[3](2) = -r;   // (1,1)
    RoavSpec spec;
    spec.input_width = spec.output_width = 2 * pairs;
    const std::size_t n = std::size_t{1} << (2 * pairs);
    for (std::size_t o = 0; o < n; ++o) {
        // local qubit order: pair 0 first, each pair (first, second)
        qsim::Vector v = qsim::Vector::Ones(1);
        for (int t = 0; t < pairs; ++t) {
            std::size_t ab = (o >> (2 * (pairs - 1 - t))) & 3U;
            qsim::Vector nv(v.size() * 4);
            for (Eigen::Index i = 0; i < v.size(); ++i) nv.segment(i * 4, 4) = v(i) * bell[ab];
            v = nv;
        }
        spec.branches.push_back({v * v.adjoint()});
    }
    return spec;
}

RoavSpec computational_povm(int width) {
    RoavSpec spec;
    spec.input_width = spec.output_width = width;
    const Eigen::Index d = Eigen::Index{1} << width;
    for (Eigen::Index i = 0; i < d; ++i) {
        qsim::Matrix p = qsim::Matrix::Zero(d, d);
        p(i, i) = 1;
        spec.branches.push_back({p});
    }
    return spec;
}

CqEnsemble ideal_roav_apply(const RoavSpec& spec, CqEnsemble ens, const std::vector<int>& qubits,
                            const std::string& record_into, std::mt19937_64* sampler) {
    spec.validate();
    if (static_cast<int>(qubits.size()) != spec.input_width) throw qsim::WidthMismatch("ROAV input width mismatch");
    const int ow = spec.outcome_width();
    if (!ens.layout.contains(record_into)) ens.layout.add(record_into, qsim::RegKind::classical, ow, Side::client);
    std::vector<qsim::PureBranch> out;
    for (auto& b : ens.branches) {
        std::vector<qsim::PureBranch> parts;
        for (std::size_t i = 0; i < spec.branches.size(); ++i)
            for (const auto& k : spec.branches[i]) {
                qsim::SparseState s = qsim::apply_matrix(b.amps, qubits, k);
                double p = qsim::canonicalize(s);
                if (b.weight * p < qsim::kPruneWeight) continue;
                qsim::PureBranch nb{b.label, b.weight * p, std::move(s)};
                std::string bits(static_cast<std::size_t>(ow), '0');
                for (int j = 0; j < ow; ++j)
                    if ((i >> (ow - 1 - j)) & 1U) bits[static_cast<std::size_t>(j)] = '1';
                qsim::write_label(nb, ens.layout, record_into, bits);
                parts.push_back(std::move(nb));
            }
        if (sampler && !parts.empty()) {
            double total = 0;
            for (const auto& p : parts) total += p.weight;
            std::uniform_real_distribution<double> u(0.0, total);
            double x = u(*sampler), acc = 0;
            std::size_t pick = parts.size() - 1;
            for (std::size_t i = 0; i < parts.size(); ++i) {
                acc += parts[i].weight;
                if (x < acc) {
                    pick = i;
                    break;
                }
            }
            parts[pick].weight = b.weight;
            out.push_back(std::move(parts[pick]));
        } else {
            for (auto& p : parts) out.push_back(std::move(p));
        }
    }
    ens.branches = std::move(out);
    return ens;
}

// ---------------------------------------------------------------- toy NTCF

namespace {

std::string join_table(const std::vector<std::uint64_t>& t) {
    std::ostringstream os;
    for (std::size_t i = 0; i < t.size(); ++i) os << (i ? "," : "") << t[i];
    return os.str();
}

void fill_inverse(NtcfKeys& k) {
    k.inverse.assign(std::size_t{1} << k.range_width, -1);
    for (std::size_t x = 0; x < k.forward.size(); ++x) {
        std::uint64_t y = k.forward[x];
        if (y >= k.inverse.size() || k.inverse[y] != -1) throw MalformedKey("table is not an injection");
        k.inverse[y] = static_cast<std::int64_t>(x);
    }
}

}  // namespace

NtcfKeys toy_ntcf_keygen(double mu, int kappa, std::uint64_t seed) {
    if (!(mu > 0 && mu < 1)) throw MalformedKey("mu must lie in (0,1)");
    if (kappa < 1 || kappa > 12) throw MalformedKey("toy scale requires 1 <= kappa <= 12");
    std::mt19937_64 rng(seed);
    NtcfKeys k;
    k.kappa = kappa;
    k.range_width = kappa + 1;
    k.mu = mu;
    std::uniform_int_distribution<std::uint64_t> us(1, (std::uint64_t{1} << kappa) - 1);
    k.shift = us(rng);
    std::vector<std::uint64_t> range(std::size_t{1} << k.range_width);
    std::iota(range.begin(), range.end(), 0);
    std::shuffle(range.begin(), range.end(), rng);
    k.forward.assign(range.begin(), range.begin() + (std::ptrdiff_t{1} << kappa));
    fill_inverse(k);
    k.public_key = std::to_string(kappa) + ";" + join_table(k.forward);
    k.secret_key = std::to_string(k.shift);
    return k;
}

NtcfKeys toy_ntcf_parse(const std::string& public_key, const std::string& secret_key) {
    NtcfKeys k;
    auto semi = public_key.find(';');
    if (semi == std::string::npos) throw MalformedKey("public key lacks a width field");
    try {
        k.kappa = std::stoi(public_key.substr(0, semi));
        k.shift = std::stoull(secret_key);
    } catch (const std::exception&) {
        throw MalformedKey("non-numeric key field");
    }
    if (k.kappa < 1 || k.kappa > 12) throw MalformedKey("kappa out of toy range");
    k.range_width = k.kappa + 1;
    std::stringstream ss(public_key.substr(semi + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            k.forward.push_back(std::stoull(item));
        } catch (const std::exception&) {
            throw MalformedKey("bad table entry");
        }
    }
    if (k.forward.size() != (std::size_t{1} << k.kappa)) throw MalformedKey("table has the wrong size");
    if (k.shift == 0 || k.shift >= (std::uint64_t{1} << k.kappa)) throw MalformedKey("shift out of range");
    fill_inverse(k);
    k.public_key = public_key;
    k.secret_key = secret_key;
    k.mu = 0.5;
    return k;
}

std::uint64_t toy_ntcf_f(const NtcfKeys& keys, int b, std::uint64_t x) {
    return keys.forward.at(b ? (x ^ keys.shift) : x);
}

std::optional<std::uint64_t> toy_ntcf_dec(const NtcfKeys& keys, int b, std::uint64_t y) {
    if (y >= keys.inverse.size() || keys.inverse[y] < 0) return std::nullopt;
    auto x = static_cast<std::uint64_t>(keys.inverse[y]);
    return b ? (x ^ keys.shift) : x;
}

bool toy_ntcf_chk(const NtcfKeys& keys, int b, std::uint64_t x, std::uint64_t y) {
    if (x >= keys.forward.size()) return false;
    return toy_ntcf_f(keys, b, x) == y;
}

CqEnsemble toy_ntcf_eval(const NtcfKeys& keys, CqEnsemble ens, const std::string& b_reg, const std::string& x_reg,
                         const std::string& y_reg) {
    if (ens.layout.entry(x_reg).width != keys.kappa || ens.layout.entry(b_reg).width != 1)
        throw qsim::WidthMismatch("NTCF registers have the wrong width");
    ens = qsim::add_register(std::move(ens), y_reg, qsim::RegKind::quantum, keys.range_width, Side::server);
    const auto layout = ens.layout;
    return qsim::apply_basis_map(std::move(ens), [&](const Label&, qsim::BasisIndex i) {
        int b = static_cast<int>(qsim::register_value(layout, b_reg, i));
        auto x = qsim::register_value(layout, x_reg, i);
        auto y = qsim::register_value(layout, y_reg, i);
        return std::pair{qsim::with_register_value(layout, y_reg, i, y ^ toy_ntcf_f(keys, b, x)), Complex{1, 0}};
    });
}

}  // namespace rspv::func
