#include "rspv/qsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "rspv/kernels.hpp"

namespace rspv::qsim {

namespace {

constexpr double kAmpZero = 1e-30;  // squared magnitude treated as zero

BasisIndex bit(int q) { return BasisIndex{1} << q; }

void check_qubits(const RegisterLayout& layout, const std::vector<int>& qubits) {
    for (std::size_t i = 0; i < qubits.size(); ++i) {
        if (qubits[i] < 0 || qubits[i] >= layout.quantum_width())
            throw IndexOutOfRange("qubit " + std::to_string(qubits[i]) + " out of range");
        for (std::size_t j = 0; j < i; ++j)
            if (qubits[i] == qubits[j]) throw IndexOutOfRange("repeated qubit index");
    }
}

void prune(CqEnsemble& ens) {
    std::erase_if(ens.branches, [](const PureBranch& b) { return b.weight < kPruneWeight || b.amps.empty(); });
}

void record(PureBranch& b, const RegisterLayout& layout, const std::string& reg, const std::string& value) {
    write_label(b, layout, reg, value);
}

void ensure_classical(RegisterLayout& layout, const std::string& reg, int width) {
    if (!layout.contains(reg)) {
        layout.add(reg, RegKind::classical, width, Side::server);
        return;
    }
    const auto& e = layout.entry(reg);
    if (e.kind != RegKind::classical || e.width != width)
        throw WidthMismatch("register " + reg + " cannot hold a " + std::to_string(width) + "-bit outcome");
}

// Applies a gate to every branch without touching weights.
SparseState gate_on_state(const SparseState& s, const std::vector<int>& qubits, const Matrix& gate) {
    const int k = static_cast<int>(qubits.size());
    const BasisIndex dim = BasisIndex{1} << k;
    BasisIndex mask = 0;
    for (int q : qubits) mask |= bit(q);
    std::unordered_map<BasisIndex, Complex> out;
    out.reserve(s.size() * 2);
    for (const auto& a : s) {
        BasisIndex col = gather_bits(a.index, qubits);
        BasisIndex base = a.index & ~mask;
        for (BasisIndex row = 0; row < dim; ++row) {
            Complex g = gate(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
            if (g == Complex{}) continue;
            out[scatter_bits(base, row, qubits)] += g * a.value;
        }
    }
    SparseState r;
    r.reserve(out.size());
    for (const auto& [i, v] : out) r.push_back({i, v});
    return r;
}

}  // namespace

// ---------------------------------------------------------------- layout

RegisterLayout::RegisterLayout(int max_qubits) : max_qubits_(max_qubits) {
    if (max_qubits < 1 || max_qubits > kIndexBits) throw LayoutError("max_qubits must be in 1..64");
}

void RegisterLayout::set_max_qubits(int max_qubits) {
    if (max_qubits < quantum_width_ || max_qubits > kIndexBits) throw LayoutError("bad max_qubits");
    max_qubits_ = max_qubits;
}

void RegisterLayout::add(const std::string& name, RegKind kind, int width, Side side) {
    if (width < 1) throw LayoutError("register " + name + " must have width >= 1");
    if (contains(name)) throw LayoutError("duplicate register " + name);
    int offset = -1;
    if (kind == RegKind::quantum) {
        if (quantum_width_ + width > max_qubits_)
            throw LayoutError("quantum width would exceed " + std::to_string(max_qubits_) + " qubits");
        offset = quantum_width_;
        quantum_width_ += width;
    }
    entries_.push_back({name, kind, width, side, offset});
}

void RegisterLayout::erase(const std::string& name) {
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.name == name; });
    if (it == entries_.end()) throw LayoutError("unknown register " + name);
    if (it->kind == RegKind::quantum) {
        for (auto& e : entries_)
            if (e.kind == RegKind::quantum && e.offset > it->offset) e.offset -= it->width;
        quantum_width_ -= it->width;
    }
    entries_.erase(it);
}

bool RegisterLayout::contains(const std::string& name) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.name == name; });
}

const RegisterEntry& RegisterLayout::entry(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e;
    throw LayoutError("unknown register " + name);
}

int RegisterLayout::qubit(const std::string& name, int i) const {
    const auto& e = entry(name);
    if (e.kind != RegKind::quantum) throw LayoutError(name + " is not quantum");
    if (i < 0 || i >= e.width) throw IndexOutOfRange(name + "[" + std::to_string(i) + "]");
    return e.offset + i;
}

std::vector<int> RegisterLayout::qubits(const std::string& name) const {
    const auto& e = entry(name);
    if (e.kind != RegKind::quantum) throw LayoutError(name + " is not quantum");
    std::vector<int> r(e.width);
    for (int i = 0; i < e.width; ++i) r[i] = e.offset + i;
    return r;
}

std::vector<int> RegisterLayout::qubits(const std::vector<std::string>& names) const {
    std::vector<int> r;
    for (const auto& n : names) {
        auto q = qubits(n);
        r.insert(r.end(), q.begin(), q.end());
    }
    return r;
}

// ---------------------------------------------------------------- helpers

BasisIndex gather_bits(BasisIndex index, const std::vector<int>& qubits) {
    BasisIndex local = 0;
    for (int q : qubits) local = (local << 1) | ((index >> q) & 1U);
    return local;
}

BasisIndex scatter_bits(BasisIndex index, BasisIndex local, const std::vector<int>& qubits) {
    const int k = static_cast<int>(qubits.size());
    for (int j = 0; j < k; ++j) {
        BasisIndex b = (local >> (k - 1 - j)) & 1U;
        index = (index & ~bit(qubits[j])) | (b << qubits[j]);
    }
    return index;
}

std::string bits_to_string(BasisIndex value, int width) {
    std::string s(static_cast<std::size_t>(width), '0');
    for (int i = 0; i < width; ++i)
        if ((value >> i) & 1U) s[static_cast<std::size_t>(i)] = '1';
    return s;
}

BasisIndex string_to_bits(const std::string& s) {
    if (s.size() > static_cast<std::size_t>(kIndexBits)) throw WidthMismatch("bit string longer than 64");
    BasisIndex v = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '1') v |= bit(static_cast<int>(i));
        else if (s[i] != '0') throw WidthMismatch("not a bit string: " + s);
    }
    return v;
}

BasisIndex register_value(const RegisterLayout& layout, const std::string& name, BasisIndex index) {
    const auto& e = layout.entry(name);
    BasisIndex mask = e.width >= 64 ? ~BasisIndex{0} : (bit(e.width) - 1);
    return (index >> e.offset) & mask;
}

BasisIndex with_register_value(const RegisterLayout& layout, const std::string& name, BasisIndex index,
                               BasisIndex value) {
    const auto& e = layout.entry(name);
    BasisIndex mask = e.width >= 64 ? ~BasisIndex{0} : (bit(e.width) - 1);
    return (index & ~(mask << e.offset)) | ((value & mask) << e.offset);
}

Complex phase_of(int eighths) {
    int k = ((eighths % 8) + 8) % 8;
    static const double r = std::numbers::sqrt2 / 2;
    static const Complex table[8] = {{1, 0}, {r, r}, {0, 1}, {-r, r}, {-1, 0}, {-r, -r}, {0, -1}, {r, -r}};
    return table[k];
}

SparseState plus_theta(int theta) {
    const double r = std::numbers::sqrt2 / 2;
    return {{0, Complex{r, 0}}, {1, r * phase_of(theta)}};
}

Matrix hadamard() {
    const double r = std::numbers::sqrt2 / 2;
    Matrix h(2, 2);
    h << r, r, r, -r;
    return h;
}

Matrix rotation_to(int phi) {
    const double r = std::numbers::sqrt2 / 2;
    Complex c = std::conj(phase_of(phi));
    Matrix m(2, 2);
    m << r, r * c, r, -r * c;
    return m;
}

Matrix phase_gate(int eighths) {
    Matrix m = Matrix::Identity(2, 2);
    m(1, 1) = phase_of(eighths);
    return m;
}

Basis Basis::rot(int phi) { return {rotated, ((phi % 8) + 8) % 8}; }

double canonicalize(SparseState& s) {
    auto by_index = [](const Amplitude& a, const Amplitude& b) { return a.index < b.index; };
    if (!std::is_sorted(s.begin(), s.end(), by_index)) std::sort(s.begin(), s.end(), by_index);
    SparseState merged;
    merged.reserve(s.size());
    for (const auto& a : s) {
        if (!merged.empty() && merged.back().index == a.index) merged.back().value += a.value;
        else merged.push_back(a);
    }
    std::erase_if(merged, [](const Amplitude& a) { return std::norm(a.value) < kAmpZero; });
    double n2 = 0;
    for (const auto& a : merged) n2 += std::norm(a.value);
    if (merged.empty() || n2 <= 0) {
        s.clear();
        return 0;
    }
    Complex fix = std::abs(merged.front().value) / merged.front().value / std::sqrt(n2);
    for (auto& a : merged) a.value *= fix;
    merged.front().value = Complex{merged.front().value.real(), 0};
    s = std::move(merged);
    return n2;
}

void write_label(PureBranch& b, const RegisterLayout& layout, const std::string& reg, const std::string& value) {
    const auto& e = layout.entry(reg);
    if (e.kind != RegKind::classical) throw LayoutError(reg + " is not classical");
    if (static_cast<int>(value.size()) != e.width)
        throw WidthMismatch(reg + " expects " + std::to_string(e.width) + " bits, got " + value);
    auto it = b.label.find(reg);
    if (it != b.label.end() && it->second != value) throw WriteOnceViolation(reg + " already written");
    b.label[reg] = value;
}

double CqEnsemble::total_weight() const {
    double w = 0;
    for (const auto& b : branches) w += b.weight;
    return w;
}

CqEnsemble make_ensemble(RegisterLayout layout) {
    CqEnsemble e{std::move(layout), {}};
    e.branches.push_back({{}, 1.0, {{0, Complex{1, 0}}}});
    return e;
}

// ---------------------------------------------------------------- registers

CqEnsemble add_register(CqEnsemble ens, const std::string& name, RegKind kind, int width, Side side) {
    ens.layout.add(name, kind, width, side);
    return ens;
}

CqEnsemble add_quantum_state(CqEnsemble ens, const std::string& name, int width, const SparseState& local,
                             Side side) {
    ens.layout.add(name, RegKind::quantum, width, side);
    const int off = ens.layout.entry(name).offset;
    SparseState loc = local;
    canonicalize(loc);
    for (const auto& a : loc)
        if (width < 64 && (a.index >> width) != 0) throw WidthMismatch("state wider than register " + name);
    for (auto& b : ens.branches) {
        SparseState out;
        out.reserve(b.amps.size() * loc.size());
        // new qubits above every occupied one: outer loop on loc keeps the order
        for (const auto& l : loc)
            for (const auto& a : b.amps) out.push_back({a.index | (l.index << off), a.value * l.value});
        canonicalize(out);
        b.amps = std::move(out);
    }
    return ens;
}

CqEnsemble discard(CqEnsemble ens, const std::string& name, std::mt19937_64* sampler) {
    const auto e = ens.layout.entry(name);
    if (e.kind == RegKind::classical) {
        for (auto& b : ens.branches) b.label.erase(name);
        ens.layout.erase(name);
        return ens;
    }
    const BasisIndex mask = (e.width >= 64 ? ~BasisIndex{0} : bit(e.width) - 1) << e.offset;
    auto squeeze = [&](BasisIndex i) {
        BasisIndex low = i & (bit(e.offset) - 1);
        BasisIndex high = e.offset + e.width >= 64 ? 0 : (i >> (e.offset + e.width));
        return low | (high << e.offset);
    };
    std::vector<PureBranch> out;
    for (auto& b : ens.branches) {
        std::map<BasisIndex, SparseState> groups;
        for (const auto& a : b.amps) groups[a.index & mask].push_back({squeeze(a.index), a.value});
        if (groups.size() == 1) {
            SparseState s = std::move(groups.begin()->second);
            canonicalize(s);
            out.push_back({std::move(b.label), b.weight, std::move(s)});
            continue;
        }
        std::vector<std::pair<double, SparseState>> parts;
        for (auto& [k, s] : groups) {
            double p = canonicalize(s);
            parts.emplace_back(p, std::move(s));
        }
        if (sampler) {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            double x = u(*sampler), acc = 0;
            std::size_t pick = parts.size() - 1;
            for (std::size_t i = 0; i < parts.size(); ++i) {
                acc += parts[i].first;
                if (x < acc) {
                    pick = i;
                    break;
                }
            }
            out.push_back({std::move(b.label), b.weight, std::move(parts[pick].second)});
        } else {
            for (auto& [p, s] : parts) out.push_back({b.label, b.weight * p, std::move(s)});
        }
    }
    ens.branches = std::move(out);
    ens.layout.erase(name);
    prune(ens);
    return ens;
}

CqEnsemble tensor(const CqEnsemble& a, const CqEnsemble& b) {
    CqEnsemble r{a.layout, {}};
    r.layout.set_max_qubits(std::max(a.layout.max_qubits(),
                                     std::min(kIndexBits, a.layout.quantum_width() + b.layout.max_qubits())));
    const int shift = a.layout.quantum_width();
    for (const auto& e : b.layout.entries()) r.layout.add(e.name, e.kind, e.width, e.side);
    for (const auto& x : a.branches)
        for (const auto& y : b.branches) {
            PureBranch p{x.label, x.weight * y.weight, {}};
            for (const auto& [k, v] : y.label) p.label[k] = v;
            p.amps.reserve(x.amps.size() * y.amps.size());
            for (const auto& u : x.amps)
                for (const auto& w : y.amps) p.amps.push_back({u.index | (w.index << shift), u.value * w.value});
            canonicalize(p.amps);
            r.branches.push_back(std::move(p));
        }
    prune(r);
    return r;
}

// ---------------------------------------------------------------- gates

SparseState apply_matrix(const SparseState& s, const std::vector<int>& qubits, const Matrix& op) {
    SparseState r = gate_on_state(s, qubits, op);
    std::sort(r.begin(), r.end(), [](const Amplitude& a, const Amplitude& b) { return a.index < b.index; });
    std::erase_if(r, [](const Amplitude& a) { return std::norm(a.value) < kAmpZero; });
    return r;
}

CqEnsemble apply_unitary(CqEnsemble ens, const std::vector<int>& qubits, const Matrix& gate) {
    check_qubits(ens.layout, qubits);
    const Eigen::Index dim = Eigen::Index{1} << qubits.size();
    if (gate.rows() != dim || gate.cols() != dim) throw NonUnitaryGate("gate dimension does not match qubit count");
    if (!(gate.adjoint() * gate).isIdentity(kUnitaryTol)) throw NonUnitaryGate("gate is not unitary");
    for (auto& b : ens.branches) {
        b.amps = gate_on_state(b.amps, qubits, gate);
        canonicalize(b.amps);
    }
    return ens;
}

CqEnsemble apply_basis_map(CqEnsemble ens, const BasisMap& map) {
    for (auto& b : ens.branches) {
        SparseState out;
        out.reserve(b.amps.size());
        for (const auto& a : b.amps) {
            auto [j, ph] = map(b.label, a.index);
            if (ens.layout.quantum_width() < 64 && (j >> ens.layout.quantum_width()) != 0)
                throw IndexOutOfRange("basis map leaves the register space");
            out.push_back({j, a.value * ph});
        }
        std::sort(out.begin(), out.end(), [](const Amplitude& x, const Amplitude& y) { return x.index < y.index; });
        for (std::size_t i = 1; i < out.size(); ++i)
            if (out[i].index == out[i - 1].index) throw SimError("basis map is not injective on the support");
        canonicalize(out);
        b.amps = std::move(out);
    }
    return ens;
}

// ---------------------------------------------------------------- measurement

namespace {

Matrix basis_rotation(Basis basis) {
    switch (basis.kind) {
        case Basis::computational: return Matrix::Identity(2, 2);
        case Basis::hadamard: return hadamard();
        case Basis::rotated: return rotation_to(basis.phi);
    }
    return Matrix::Identity(2, 2);
}

// Splits every branch by the values of `qubits` (after rotating them); `outcome`
// turns the gathered bits into the recorded string.
CqEnsemble split(CqEnsemble ens, const std::vector<int>& qubits, const std::vector<Matrix>& pre,
                 const std::function<BasisIndex(BasisIndex)>& key, const std::function<std::string(BasisIndex)>& outcome,
                 const std::string& record_into, int record_width) {
    ensure_classical(ens.layout, record_into, record_width);
    std::vector<PureBranch> out;
    for (auto& b : ens.branches) {
        SparseState s = b.amps;
        for (std::size_t i = 0; i < pre.size(); ++i)
            if (!pre[i].isIdentity()) s = gate_on_state(s, {qubits[i]}, pre[i]);
        std::map<BasisIndex, SparseState> groups;
        for (const auto& a : s) {
            if (std::norm(a.value) < kAmpZero) continue;
            groups[key(gather_bits(a.index, qubits))].push_back(a);
        }
        for (auto& [k, g] : groups) {
            SparseState post = g;
            for (std::size_t i = 0; i < pre.size(); ++i)
                if (!pre[i].isIdentity()) post = gate_on_state(post, {qubits[i]}, pre[i].adjoint());
            double p = canonicalize(post);
            if (b.weight * p < kPruneWeight) continue;
            PureBranch nb{b.label, b.weight * p, std::move(post)};
            record(nb, ens.layout, record_into, outcome(k));
            out.push_back(std::move(nb));
        }
    }
    ens.branches = std::move(out);
    return ens;
}

}  // namespace

CqEnsemble measure_basis(CqEnsemble ens, const std::vector<int>& qubits, Basis basis, const std::string& record_into,
                         std::mt19937_64* sampler) {
    check_qubits(ens.layout, qubits);
    if (qubits.empty()) throw WidthMismatch("nothing to measure");
    const int k = static_cast<int>(qubits.size());
    if (sampler) {
        // one qubit at a time: same outcome law as the full split
        ensure_classical(ens.layout, record_into, k);
        const Matrix rot = basis_rotation(basis);
        const bool plain = rot.isIdentity();
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (auto& b : ens.branches) {
            std::string rec(static_cast<std::size_t>(k), '0');
            for (int i = 0; i < k; ++i) {
                const int q = qubits[static_cast<std::size_t>(i)];
                SparseState s = plain ? std::move(b.amps) : gate_on_state(b.amps, {q}, rot);
                double p1 = 0, total = 0;
                for (const auto& a : s) {
                    const double w = std::norm(a.value);
                    total += w;
                    if ((a.index >> q) & 1U) p1 += w;
                }
                const BasisIndex r = u(*sampler) * total < p1 ? 1 : 0;
                std::erase_if(s, [&](const Amplitude& a) { return ((a.index >> q) & 1U) != r; });
                if (!plain) s = gate_on_state(s, {q}, rot.adjoint());
                canonicalize(s);
                b.amps = std::move(s);
                if (r) rec[static_cast<std::size_t>(i)] = '1';
            }
            record(b, ens.layout, record_into, rec);
        }
        return ens;
    }
    std::vector<Matrix> pre(qubits.size(), basis_rotation(basis));
    // gathered bits have qubits[0] as msb; the label stores qubits[i] at char i
    return split(
        std::move(ens), qubits, pre, [](BasisIndex v) { return v; },
        [k](BasisIndex v) {
            std::string s(static_cast<std::size_t>(k), '0');
            for (int i = 0; i < k; ++i)
                if ((v >> (k - 1 - i)) & 1U) s[static_cast<std::size_t>(i)] = '1';
            return s;
        },
        record_into, k);
}

CqEnsemble measure_parity(CqEnsemble ens, const std::vector<int>& qubits, const std::string& record_into,
                          std::mt19937_64* sampler) {
    check_qubits(ens.layout, qubits);
    ensure_classical(ens.layout, record_into, 1);
    BasisIndex mask = 0;
    for (int q : qubits) mask |= bit(q);
    if (sampler) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (auto& b : ens.branches) {
            double p1 = 0, total = 0;
            for (const auto& a : b.amps) {
                const double w = std::norm(a.value);
                total += w;
                if (std::popcount(a.index & mask) % 2) p1 += w;
            }
            const int r = u(*sampler) * total < p1 ? 1 : 0;
            std::erase_if(b.amps, [&](const Amplitude& a) { return std::popcount(a.index & mask) % 2 != r; });
            canonicalize(b.amps);
            record(b, ens.layout, record_into, r ? "1" : "0");
        }
        return ens;
    }
    std::vector<PureBranch> out;
    for (auto& b : ens.branches) {
        SparseState even, odd;
        for (const auto& a : b.amps) (std::popcount(a.index & mask) % 2 ? odd : even).push_back(a);
        for (int p = 0; p < 2; ++p) {
            SparseState& s = p ? odd : even;
            if (s.empty()) continue;
            double n2 = canonicalize(s);
            if (b.weight * n2 < kPruneWeight) continue;
            PureBranch nb{b.label, b.weight * n2, std::move(s)};
            record(nb, ens.layout, record_into, p ? "1" : "0");
            out.push_back(std::move(nb));
        }
    }
    ens.branches = std::move(out);
    return ens;
}

CqEnsemble measure_bell(CqEnsemble ens, const std::vector<std::pair<int, int>>& pairs, const std::string& record_into) {
    std::vector<int> flat;
    for (const auto& [x, y] : pairs) {
        flat.push_back(x);
        flat.push_back(y);
    }
    try {
        check_qubits(ens.layout, flat);
    } catch (const IndexOutOfRange& e) {
        if (std::string(e.what()) == "repeated qubit index") throw OverlappingPairs("Bell pairs overlap");
        throw;
    }
    // CNOT(first -> second) then H(first) maps X^a Z^b |Phi> to |b>|a>.
    Matrix cnot = Matrix::Zero(4, 4);
    cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1;
    const std::size_t t = pairs.size();
    for (auto& b : ens.branches) {
        for (const auto& [x, y] : pairs) {
            b.amps = gate_on_state(b.amps, {x, y}, cnot);
            b.amps = gate_on_state(b.amps, {x}, hadamard());
        }
    }
    // outcome string: (a_t, b_t) at positions 2t-1, 2t (1-indexed)
    std::vector<int> order;
    for (const auto& [x, y] : pairs) {
        order.push_back(y);  // a
        order.push_back(x);  // b
    }
    ensure_classical(ens.layout, record_into, static_cast<int>(2 * t));
    std::vector<PureBranch> out;
    for (auto& b : ens.branches) {
        std::map<BasisIndex, SparseState> groups;
        for (const auto& a : b.amps) {
            if (std::norm(a.value) < kAmpZero) continue;
            groups[gather_bits(a.index, order)].push_back(a);
        }
        for (auto& [k, g] : groups) {
            SparseState post = g;
            for (auto it = pairs.rbegin(); it != pairs.rend(); ++it) {
                post = gate_on_state(post, {it->first}, hadamard());
                post = gate_on_state(post, {it->first, it->second}, cnot);
            }
            double p = canonicalize(post);
            if (b.weight * p < kPruneWeight) continue;
            PureBranch nb{b.label, b.weight * p, std::move(post)};
            const int w = static_cast<int>(2 * t);
            std::string s(static_cast<std::size_t>(w), '0');
            for (int i = 0; i < w; ++i)
                if ((k >> (w - 1 - i)) & 1U) s[static_cast<std::size_t>(i)] = '1';
            record(nb, ens.layout, record_into, s);
            out.push_back(std::move(nb));
        }
    }
    ens.branches = std::move(out);
    return ens;
}

CqEnsemble project(CqEnsemble ens, const BasisPredicate& keep) {
    for (auto& b : ens.branches) {
        SparseState kept;
        for (const auto& a : b.amps)
            if (keep(b.label, a.index)) kept.push_back(a);
        double n2 = canonicalize(kept);
        b.weight *= n2;
        b.amps = std::move(kept);
    }
    prune(ens);
    return ens;
}

CqEnsemble select_branches(CqEnsemble ens, const LabelPredicate& keep) {
    std::erase_if(ens.branches, [&](const PureBranch& b) { return !keep(b.label); });
    return ens;
}

CqEnsemble sample_branch(CqEnsemble ens, std::mt19937_64& rng) {
    if (ens.branches.size() <= 1) {
        for (auto& b : ens.branches) b.weight = 1.0;
        return ens;
    }
    double total = ens.total_weight();
    std::uniform_real_distribution<double> u(0.0, total);
    double x = u(rng), acc = 0;
    std::size_t pick = ens.branches.size() - 1;
    for (std::size_t i = 0; i < ens.branches.size(); ++i) {
        acc += ens.branches[i].weight;
        if (x < acc) {
            pick = i;
            break;
        }
    }
    PureBranch chosen = std::move(ens.branches[pick]);
    chosen.weight = 1.0;
    ens.branches.clear();
    ens.branches.push_back(std::move(chosen));
    return ens;
}

// ---------------------------------------------------------------- densities

namespace {

// Bit sequence in the order registers were listed.
struct BitPlan {
    std::vector<int> quantum_pos;   // position (0 = msb) of each selected qubit
    std::vector<std::pair<std::string, int>> classical_bits;  // (register, bit) for classical positions
    std::vector<int> classical_pos;
    std::vector<int> qubits;
    int width = 0;
};

BitPlan plan(const RegisterLayout& layout, const std::vector<std::string>& regs) {
    if (regs.empty()) throw EmptySelection("no registers selected");
    BitPlan p;
    for (const auto& r : regs) {
        const auto& e = layout.entry(r);
        for (int i = 0; i < e.width; ++i) {
            if (e.kind == RegKind::quantum) {
                p.qubits.push_back(e.offset + i);
                p.quantum_pos.push_back(p.width);
            } else {
                p.classical_bits.emplace_back(r, i);
                p.classical_pos.push_back(p.width);
            }
            ++p.width;
        }
    }
    return p;
}

BasisIndex classical_part(const BitPlan& p, const Label& label) {
    BasisIndex v = 0;
    for (std::size_t j = 0; j < p.classical_bits.size(); ++j) {
        const auto& [reg, i] = p.classical_bits[j];
        auto it = label.find(reg);
        if (it == label.end()) throw EmptySelection("classical register " + reg + " unset in a branch");
        if (it->second[static_cast<std::size_t>(i)] == '1') v |= BasisIndex{1} << (p.width - 1 - p.classical_pos[j]);
    }
    return v;
}

BasisIndex quantum_part(const BitPlan& p, BasisIndex index) {
    BasisIndex v = 0;
    for (std::size_t j = 0; j < p.qubits.size(); ++j)
        if ((index >> p.qubits[j]) & 1U) v |= BasisIndex{1} << (p.width - 1 - p.quantum_pos[j]);
    return v;
}

}  // namespace

DensityView density_of(const CqEnsemble& ens, const std::vector<std::string>& registers, const LabelPredicate& condition) {
    BitPlan p = plan(ens.layout, registers);
    if (p.width > 12) throw DimensionMismatch("density view limited to 12 bits");
    const Eigen::Index dim = Eigen::Index{1} << p.width;
    BasisIndex sel_mask = 0;
    for (int q : p.qubits) sel_mask |= bit(q);
    std::vector<Vector> vecs;
    std::vector<double> weights;
    for (const auto& b : ens.branches) {
        if (condition && !condition(b.label)) continue;
        BasisIndex c = classical_part(p, b.label);
        std::map<BasisIndex, Vector> env;
        for (const auto& a : b.amps) {
            auto it = env.find(a.index & ~sel_mask);
            if (it == env.end()) it = env.emplace(a.index & ~sel_mask, Vector::Zero(dim)).first;
            it->second(static_cast<Eigen::Index>(c | quantum_part(p, a.index))) += a.value;
        }
        for (auto& [k, v] : env) {
            vecs.push_back(std::move(v));
            weights.push_back(b.weight);
        }
    }
    DensityView view{Matrix::Zero(dim, dim), registers};
    kernels::accumulate_outer(vecs, weights, view.matrix);
    return view;
}

double trace_distance(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("trace_distance: dimensions differ");
    Matrix d = a - b;
    d = (d + d.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(d, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double trace_distance(const DensityView& a, const DensityView& b) { return trace_distance(a.matrix, b.matrix); }

double trace_distance(const CqEnsemble& a, const CqEnsemble& b, const std::vector<std::string>& visible) {
    BitPlan pa = plan(a.layout, visible);
    BitPlan pb = plan(b.layout, visible);
    if (pa.width != pb.width) throw DimensionMismatch("visible registers differ in width");
    // Vectors grouped by the visible classical value; TD is additive over blocks.
    std::map<std::string, std::pair<std::vector<kernels::SparseVec>, std::vector<double>>> blocks;
    auto collect = [&](const CqEnsemble& e, const BitPlan& p, double sign) {
        BasisIndex sel = 0;
        for (int q : p.qubits) sel |= bit(q);
        for (const auto& br : e.branches) {
            std::string key;
            for (const auto& [reg, i] : p.classical_bits) {
                auto it = br.label.find(reg);
                key += (it == br.label.end()) ? '?' : it->second[static_cast<std::size_t>(i)];
            }
            std::map<BasisIndex, kernels::SparseVec> env;
            for (const auto& amp : br.amps) env[amp.index & ~sel].push_back({quantum_part(p, amp.index), amp.value});
            auto& blk = blocks[key];
            for (auto& [k, v] : env) {
                std::sort(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
                blk.first.push_back(std::move(v));
                blk.second.push_back(sign * br.weight);
            }
        }
    };
    collect(a, pa, 1.0);
    collect(b, pb, -1.0);
    double total = 0;
    for (auto& [key, blk] : blocks) total += kernels::lowrank_trace_norm(blk.first, blk.second);
    return 0.5 * total;
}

double overlap_probability(const CqEnsemble& ens, const std::vector<std::string>& regs, const SparseState& target) {
    std::vector<int> qs = ens.layout.qubits(regs);
    BasisIndex sel = 0;
    for (int q : qs) sel |= bit(q);
    // target index bit i = i-th selected qubit
    std::map<BasisIndex, Complex> t;
    for (const auto& a : target) t[a.index] += a.value;
    double total = 0;
    for (const auto& b : ens.branches) {
        std::map<BasisIndex, Complex> env;
        for (const auto& a : b.amps) {
            BasisIndex local = 0;
            for (std::size_t i = 0; i < qs.size(); ++i)
                if ((a.index >> qs[i]) & 1U) local |= bit(static_cast<int>(i));
            auto it = t.find(local);
            if (it == t.end()) continue;
            env[a.index & ~sel] += std::conj(it->second) * a.value;
        }
        for (const auto& [k, v] : env) total += b.weight * std::norm(v);
    }
    return total;
}

}  // namespace rspv::qsim
