#include <bit>
#include <cmath>

#include "rspv/protocols.hpp"

namespace rspv::proto {

using qsim::BasisIndex;
using qsim::CqEnsemble;
using qsim::RegKind;
using qsim::Side;

std::string ItcoreAdversary::name() const {
    auto a2 = [&] {
        switch (adv2) {
            case Adv2Kind::honest: return std::string("honest");
            case Adv2Kind::measure_block1: return std::string("measure-block1");
            case Adv2Kind::random_xor: return std::string("random-xor");
            case Adv2Kind::guess_measure: return "guess-measure(" + std::to_string(block) + "," + std::to_string(position) + ")";
            case Adv2Kind::flip: return "flip(" + std::to_string(block) + "," + std::to_string(position) + ")";
        }
        return std::string("?");
    }();
    std::string a3 = adv3 == Adv3Kind::honest ? "honest"
                                              : "flip(" + std::to_string(block) + "," + std::to_string(position) + ")";
    return a2 + "/" + a3;
}

std::vector<ItcoreAdversary> guess_attack_family(int n, int m) {
    (void)m;  // averaging over key positions makes every guessed position equivalent
    std::vector<ItcoreAdversary> out;
    for (int t = 1; t <= n; ++t) {
        out.push_back({Adv2Kind::guess_measure, Adv3Kind::honest, t, 0});
        out.push_back({Adv2Kind::honest, Adv3Kind::flip, t, 0});
        out.push_back({Adv2Kind::guess_measure, Adv3Kind::flip, t, 0});
        out.push_back({Adv2Kind::flip, Adv3Kind::honest, t, 0});
    }
    return out;
}

namespace {

std::string bname(int i) { return "b" + std::to_string(i); }

struct KeySet {
    std::vector<BasisIndex> x0, x1;
};

CqEnsemble initial_state(int m, int n, const KeySet& k) {
    qsim::RegisterLayout lay(qsim::kIndexBits);
    for (int i = 1; i <= n; ++i) lay.add(bname(i), RegKind::quantum, m, Side::server);
    CqEnsemble e{lay, {}};
    qsim::PureBranch b;
    const double amp = std::pow(2.0, -0.5 * n);
    for (BasisIndex c = 0; c < (BasisIndex{1} << n); ++c) {
        BasisIndex idx = 0;
        for (int i = 0; i < n; ++i) {
            BasisIndex v = ((c >> i) & 1U) ? k.x1[static_cast<std::size_t>(i)] : k.x0[static_cast<std::size_t>(i)];
            idx |= v << (i * m);
        }
        b.amps.push_back({idx, {amp, 0}});
    }
    qsim::canonicalize(b.amps);
    e.branches.push_back(std::move(b));
    return e;
}

std::vector<int> block_qubits(const CqEnsemble& e, int i) { return e.layout.qubits(bname(i)); }

CqEnsemble flip_bit(CqEnsemble e, int block, int pos) {
    const int q = e.layout.qubit(bname(block), pos);
    return qsim::apply_basis_map(std::move(e), [q](const Label&, BasisIndex i) {
        return std::pair<BasisIndex, qsim::Complex>{i ^ (BasisIndex{1} << q), {1, 0}};
    });
}

CqEnsemble parity_report(CqEnsemble e, int n, const std::string& pre) {
    for (int i = 2; i <= n; ++i) {
        auto qs = block_qubits(e, 1);
        auto qi = block_qubits(e, i);
        qs.insert(qs.end(), qi.begin(), qi.end());
        e = qsim::measure_parity(std::move(e), qs, pre + std::to_string(i));
    }
    return e;
}

std::string concat(const Label& l, int n, const std::string& pre) {
    std::string r;
    for (int i = 2; i <= n; ++i) r += l.at(pre + std::to_string(i));
    return r;
}

void write_rep(CqEnsemble& e, int n) {
    e.layout.add("rep", RegKind::classical, n - 1, Side::server);
    for (auto& b : e.branches) b.label["rep"] = concat(b.label, n, "xp");
}

CqEnsemble adv2_act(CqEnsemble e, int m, int n, const ItcoreAdversary& a, const KeySet& k) {
    switch (a.adv2) {
        case Adv2Kind::honest:
            e = parity_report(std::move(e), n, "xp");
            write_rep(e, n);
            return e;
        case Adv2Kind::measure_block1:
            e = qsim::measure_basis(std::move(e), block_qubits(e, 1), qsim::Basis::z(), "s1");
            e = parity_report(std::move(e), n, "xp");
            write_rep(e, n);
            return e;
        case Adv2Kind::flip:
            e = flip_bit(std::move(e), a.block, a.position);
            e = parity_report(std::move(e), n, "xp");
            write_rep(e, n);
            return e;
        case Adv2Kind::guess_measure: {
            // {|g><g|, 1-|g><g|} on the target block, g = x0 with the guessed position flipped
            const BasisIndex g = k.x0[static_cast<std::size_t>(a.block - 1)] ^ (BasisIndex{1} << a.position);
            const int off = e.layout.entry(bname(a.block)).offset;
            const BasisIndex mask = ((BasisIndex{1} << m) - 1) << off;
            e.layout.add("g", RegKind::classical, 1, Side::server);
            std::vector<qsim::PureBranch> out;
            for (auto& b : e.branches) {
                for (int hit = 0; hit < 2; ++hit) {
                    qsim::PureBranch nb{b.label, b.weight, {}};
                    for (const auto& amp : b.amps)
                        if ((((amp.index & mask) >> off) == g) == (hit == 1)) nb.amps.push_back(amp);
                    double p = qsim::canonicalize(nb.amps);
                    if (p <= qsim::kPruneWeight || nb.amps.empty()) continue;
                    nb.weight *= p;
                    nb.label["g"] = hit ? "1" : "0";
                    out.push_back(std::move(nb));
                }
            }
            e.branches = std::move(out);
            e = parity_report(std::move(e), n, "xp");
            write_rep(e, n);
            return e;
        }
        case Adv2Kind::random_xor: {
            e.layout.add("rep", RegKind::classical, n - 1, Side::server);
            std::vector<qsim::PureBranch> out;
            const BasisIndex count = BasisIndex{1} << (n - 1);
            for (const auto& b : e.branches)
                for (BasisIndex r = 0; r < count; ++r) {
                    qsim::PureBranch nb = b;
                    nb.weight /= static_cast<double>(count);
                    nb.label["rep"] = qsim::bits_to_string(r, n - 1);
                    out.push_back(std::move(nb));
                }
            e.branches = std::move(out);
            return e;
        }
    }
    return e;
}

CqEnsemble adv3_act(CqEnsemble e, const ItcoreAdversary& a) {
    if (a.adv3 == Adv3Kind::flip) e = flip_bit(std::move(e), a.block, a.position);
    return e;
}

// Hybrid k: the first k xor bits are checked simulator-style (true parity
// measured before Adv2, report projected onto it); the rest are checked
// against the blocks after Adv3. k = 0 is the real flow, k = n-1 the simulator.
CqEnsemble hybrid(int m, int n, const ItcoreAdversary& a, const KeySet& keys, int k) {
    CqEnsemble e = initial_state(m, n, keys);
    for (int i = 2; i <= k + 1; ++i) {
        auto qs = block_qubits(e, 1);
        auto qi = block_qubits(e, i);
        qs.insert(qs.end(), qi.begin(), qi.end());
        e = qsim::measure_parity(std::move(e), qs, "sx" + std::to_string(i));
    }
    e = adv2_act(std::move(e), m, n, a, keys);
    e = qsim::select_branches(std::move(e), [k](const Label& l) {
        const std::string& rep = l.at("rep");
        for (int i = 2; i <= k + 1; ++i)
            if (rep[static_cast<std::size_t>(i - 2)] != l.at("sx" + std::to_string(i))[0]) return false;
        return true;
    });
    e = adv3_act(std::move(e), a);
    std::vector<int> offs;
    for (int i = 1; i <= n; ++i) offs.push_back(e.layout.entry(bname(i)).offset);
    const BasisIndex mask = (BasisIndex{1} << m) - 1;
    return qsim::project(std::move(e), [&, k](const Label& l, BasisIndex idx) {
        const std::string& rep = l.at("rep");
        int b1 = 0;
        for (int i = 1; i <= n; ++i) {
            BasisIndex v = (idx >> offs[static_cast<std::size_t>(i - 1)]) & mask;
            const BasisIndex a0 = keys.x0[static_cast<std::size_t>(i - 1)], a1 = keys.x1[static_cast<std::size_t>(i - 1)];
            if (v != a0 && v != a1) return false;
            int b = v == a1 ? 1 : 0;
            if (i == 1) {
                b1 = b;
            } else if (i > k + 1 && (rep[static_cast<std::size_t>(i - 2)] == '1') != (b1 != b)) {
                return false;
            }
        }
        return true;
    });
}

std::vector<std::string> visible_of(const CqEnsemble& e) {
    std::vector<std::string> v;
    for (const auto& en : e.layout.entries())
        if (en.name.rfind("sx", 0) != 0) v.push_back(en.name);
    return v;
}

}  // namespace

ItcoreResult multiblock_itcore(int m, int n, const ItcoreAdversary& adv, const std::vector<std::uint64_t>& base_x0) {
    if (n < 1 || n > 3 || m < 2 || m > 16) throw TooLarge("itcore needs n <= 3 and 2 <= m <= 16");
    if (adv.block < 1 || adv.block > n || adv.position < 0 || adv.position >= m)
        throw PreconditionViolated("adversary targets a missing block or position");
    std::vector<std::uint64_t> base = base_x0;
    base.resize(static_cast<std::size_t>(n), 0);
    for (auto b : base)
        if (std::popcount(b) % 2 != 0 || (b >> m) != 0) throw PreconditionViolated("base keys must be even m-bit strings");

    ItcoreResult res;
    res.bound_total = 4.0 * n / std::sqrt(double(m));
    res.bound_step = 2.0 * n / std::sqrt(double(m));
    res.bound_step_tight = 2.0 / std::sqrt(double(m));
    res.step_deviation.assign(static_cast<std::size_t>(std::max(0, n - 1)), 0.0);
    if (n == 1) return res;

    long combos = 1;
    for (int i = 0; i < n; ++i) combos *= m;
    const double w = 1.0 / static_cast<double>(combos);
    std::vector<double> steps(static_cast<std::size_t>(n - 1), 0.0);
    double dist = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : dist)
    for (long c = 0; c < combos; ++c) {
        KeySet ks;
        long r = c;
        for (int i = 0; i < n; ++i) {
            int pos = static_cast<int>(r % m);
            r /= m;
            BasisIndex x0 = base[static_cast<std::size_t>(i)];
            ks.x0.push_back(x0);
            ks.x1.push_back(x0 ^ (BasisIndex{1} << pos));
        }
        std::vector<CqEnsemble> h;
        for (int k = 0; k < n; ++k) h.push_back(hybrid(m, n, adv, ks, k));
        const auto vis = visible_of(h[0]);
        dist += w * qsim::trace_distance(h[0], h[static_cast<std::size_t>(n - 1)], vis);
        for (int k = 0; k + 1 < n; ++k) {
            double d = w * qsim::trace_distance(h[static_cast<std::size_t>(k)], h[static_cast<std::size_t>(k + 1)], vis);
#pragma omp atomic
            steps[static_cast<std::size_t>(k)] += d;
        }
    }
    res.distance = dist;
    res.step_deviation = steps;
    return res;
}

double multiblock_itcore_distance(int m, int n, const ItcoreAdversary& adv) {
    return multiblock_itcore(m, n, adv).distance;
}

}  // namespace rspv::proto
