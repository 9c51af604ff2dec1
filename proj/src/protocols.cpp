#include "rspv/protocols.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <memory>
#include <numbers>

#include "rspv/amplification.hpp"

namespace rspv::proto {

using qsim::BasisIndex;
using qsim::Complex;
using qsim::Side;

namespace {

CqEnsemble unit() { return CqEnsemble{qsim::RegisterLayout(qsim::kIndexBits), {{{}, 1.0, {{0, {1, 0}}}}}}; }

std::string xor_s(const std::string& a, const std::string& b) {
    std::string r(a.size(), '0');
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] == b[i] ? '0' : '1';
    return r;
}

int weight_s(const std::string& a) { return static_cast<int>(std::count(a.begin(), a.end(), '1')); }

std::string msb_bits(int value, int width) {
    std::string s(static_cast<std::size_t>(width), '0');
    for (int t = 0; t < width; ++t)
        if ((value >> (width - 1 - t)) & 1) s[static_cast<std::size_t>(t)] = '1';
    return s;
}

int from_msb(const std::string& s) {
    int v = 0;
    for (char c : s) v = 2 * v + (c == '1');
    return v;
}

std::string blk(int i) { return "b" + std::to_string(i) + "/"; }

// Registers renamed by prefix; order (and so offsets) preserved.
CqEnsemble prefixed(const CqEnsemble& e, const std::string& pre) {
    qsim::RegisterLayout lay(e.layout.max_qubits());
    for (const auto& en : e.layout.entries()) lay.add(pre + en.name, en.kind, en.width, en.side);
    CqEnsemble r{lay, {}};
    for (const auto& b : e.branches) {
        qsim::PureBranch nb{{}, b.weight, b.amps};
        for (const auto& [k, v] : b.label) nb.label[pre + k] = v;
        r.branches.push_back(std::move(nb));
    }
    return r;
}

std::vector<std::string> split_scope(const std::string& scope) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : scope) {
        if (c == '/') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    return parts;
}

// u2b that maps malformed (non-unary) differences to zeros; client side only.
std::string safe_u2b(const std::string& diff, int lg) {
    if (weight_s(diff) != 1) return std::string(static_cast<std::size_t>(lg), '0');
    return u2b(diff);
}

}  // namespace

// ---------------------------------------------------------------- OneBlock

int one_block_rounds(int m, int kappa) { return 4 * (m + kappa); }

void one_block(Session& s, const OneBlockParams& p) {
    if (p.m < 2) throw PreconditionViolated("one_block needs m >= 2");
    const int L = one_block_rounds(p.m, p.kappa);
    std::vector<func::Bb84> draws(static_cast<std::size_t>(L));
    std::map<int, CqEnsemble> minis;
    for (int k = 0; k < L; ++k) {
        func::Bb84 d = p.source ? p.source(s.client_rng()) : func::draw_bb84(s.client_rng());
        draws[static_cast<std::size_t>(k)] = d;
        Step st{s.protocol_id(), s.scope() + "bb84.deliver", s.round(), "bb84.q"};
        if (!s.adversary().intercepts(st)) {
            s.record_round("bb84.q", "");
            continue;
        }
        // the delivered qubit lives in its own ensemble until selection
        Session mini(unit(), s.server_rng()(), s.mode(), s.adversary(), s.protocol_id());
        std::vector<std::unique_ptr<Session::Scope>> scopes;
        for (const auto& part : split_scope(s.scope())) scopes.push_back(std::make_unique<Session::Scope>(mini, part));
        mini.add_quantum_state("bb84.q", 1, func::bb84_state(d));
        mini.server_step("bb84.deliver", "bb84.q", [](ServerView&) {});
        const auto& r = mini.transcript().rounds().back();
        s.record_round(r.first, r.second);
        minis.emplace(k, std::move(mini.ens()));
    }

    // selection: one '+', m-1 computational outcomes, even parity of x0
    std::vector<int> plus, pool;
    for (int k = 0; k < L; ++k) {
        auto d = draws[static_cast<std::size_t>(k)];
        if (d == func::Bb84::plus) plus.push_back(k);
        if (d == func::Bb84::zero || d == func::Bb84::one) pool.push_back(k);
    }
    auto value = [&](int k) { return draws[static_cast<std::size_t>(k)] == func::Bb84::one ? 1 : 0; };
    const std::size_t need = static_cast<std::size_t>(p.m - 1);
    bool ok = !plus.empty() && pool.size() >= need;
    std::vector<int> sel;
    int ppos = -1;
    if (ok) {
        ppos = plus[std::uniform_int_distribution<std::size_t>(0, plus.size() - 1)(s.client_rng())];
        std::shuffle(pool.begin(), pool.end(), s.client_rng());
        int par = 0;
        for (std::size_t i = 0; i < need; ++i) par ^= value(pool[i]);
        if (par) {
            std::vector<std::pair<std::size_t, std::size_t>> swaps;
            for (std::size_t a = 0; a < need; ++a)
                for (std::size_t b = need; b < pool.size(); ++b)
                    if (value(pool[a]) != value(pool[b])) swaps.emplace_back(a, b);
            if (swaps.empty()) {
                ok = false;
            } else {
                auto [a, b] = swaps[std::uniform_int_distribution<std::size_t>(0, swaps.size() - 1)(s.client_rng())];
                std::swap(pool[a], pool[b]);
            }
        }
    }
    std::string x0(static_cast<std::size_t>(p.m), '0'), x1 = x0;
    if (ok) {
        sel.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(need));
        sel.push_back(ppos);
        std::shuffle(sel.begin(), sel.end(), s.client_rng());
        for (int r = 0; r < p.m; ++r) {
            int k = sel[static_cast<std::size_t>(r)];
            if (k == ppos) {
                x1[static_cast<std::size_t>(r)] = '1';
            } else if (value(k)) {
                x0[static_cast<std::size_t>(r)] = x1[static_cast<std::size_t>(r)] = '1';
            }
        }
    }
    s.set_client("x0", x0);
    s.set_client("x1", x1);

    std::vector<std::string> fields;
    for (int k : sel) fields.push_back(std::to_string(k));
    const std::string msg = encode_message(fields);
    if (!ok) {
        s.add_quantum("Q", p.m);
        s.fail();
        s.server_step("one_block.select", msg, [](ServerView&) {});
        return;
    }

    // product of the honestly delivered selected qubits; intercepted slots start at |0>
    qsim::SparseState local{{0, {1, 0}}};
    for (int r = 0; r < p.m; ++r) {
        int k = sel[static_cast<std::size_t>(r)];
        if (minis.count(k)) continue;
        auto d = draws[static_cast<std::size_t>(k)];
        const BasisIndex b = BasisIndex{1} << r;
        if (d == func::Bb84::one) {
            for (auto& a : local) a.index |= b;
        } else if (d == func::Bb84::plus) {
            qsim::SparseState nx;
            const double h = std::numbers::sqrt2 / 2;
            for (const auto& a : local) {
                nx.push_back({a.index, a.value * h});
                nx.push_back({a.index | b, a.value * h});
            }
            local = std::move(nx);
        }
    }
    s.add_quantum_state("Q", p.m, local);
    for (int r = 0; r < p.m; ++r) {
        int k = sel[static_cast<std::size_t>(r)];
        auto it = minis.find(k);
        if (it == minis.end()) continue;
        const std::string pre = "k" + std::to_string(k) + "#";
        s.ens() = qsim::tensor(s.ens(), prefixed(it->second, pre));
        const std::string src = pre + s.q("bb84.q");
        const int qa = s.ens().layout.qubit(src, 0), qb = s.ens().layout.qubit(s.q("Q"), r);
        s.ens() = qsim::apply_basis_map(std::move(s.ens()), [qa, qb](const Label&, BasisIndex i) {
            BasisIndex ba = (i >> qa) & 1U, bb = (i >> qb) & 1U;
            if (ba != bb) i ^= (BasisIndex{1} << qa) | (BasisIndex{1} << qb);
            return std::pair<BasisIndex, Complex>{i, {1, 0}};
        });
        s.ens() = qsim::discard(std::move(s.ens()), src);
    }
    s.server_step("one_block.select", msg, [](ServerView&) {});
}

ProtocolOutcome run_one_block(const OneBlockParams& p, const Adversary& adv, std::uint64_t seed, ExecMode mode) {
    return run(
        "one_block", [&](Session& s) { one_block(s, p); }, adv, unit(), {seed, mode}, {"x0", "x1"});
}

void one_block_tensor(Session& s, const TensorParams& p) {
    for (int i = 1; i <= p.n; ++i) {
        {
            Session::Scope sc(s, "b" + std::to_string(i));
            one_block(s, {p.m, p.eps / p.n, p.kappa, p.source});
        }
        s.absorb_flag(s.q(blk(i)));
    }
}

ProtocolOutcome run_one_block_tensor(const TensorParams& p, const Adversary& adv, std::uint64_t seed,
                                     ExecMode mode) {
    std::vector<std::string> desc;
    for (int i = 1; i <= p.n; ++i) {
        desc.push_back(blk(i) + "x0");
        desc.push_back(blk(i) + "x1");
    }
    return run(
        "one_block_tensor", [&](Session& s) { one_block_tensor(s, p); }, adv, unit(), {seed, mode}, desc);
}

// ---------------------------------------------------------------- MultiBlock

double multi_block_eps0(const MultiBlockParams& p) { return p.eps - 10.0 * p.n / std::sqrt(double(p.m)); }

bool multi_block_precondition(const MultiBlockParams& p) { return p.eps > 11.0 * p.n / std::sqrt(double(p.m)); }

namespace {

void multi_block_common(Session& s, const MultiBlockParams& p) {
    if (p.n < 1) throw PreconditionViolated("multi_block needs n >= 1");
    if (p.profile == Profile::paper && !multi_block_precondition(p))
        throw PreconditionViolated("multi_block requires eps > 11n/sqrt(m)");
    one_block_tensor(s, {p.m, p.n, multi_block_eps0(p), p.kappa, nullptr});
    if (p.n < 2) return;
    const int n = p.n;
    s.server_step(
        "multiblock.xor", "xor",
        [n](ServerView& v) {
            const int m = v.layout().entry(v.q(blk(1) + "Q")).width;
            std::vector<std::string> xs;
            for (int i = 2; i <= n; ++i) {
                std::vector<std::pair<std::string, int>> qs;
                for (int t = 0; t < m; ++t) qs.emplace_back(blk(1) + "Q", t);
                for (int t = 0; t < m; ++t) qs.emplace_back(blk(i) + "Q", t);
                xs.push_back("xp" + std::to_string(i));
                v.measure_parity(qs, xs.back());
            }
            v.compute("xor", n - 1, xs, [](const std::vector<std::string>& vals) {
                std::string r;
                for (const auto& x : vals) r += x;
                return r;
            });
        },
        "xor");
    s.receive("xor", "xor_c");
}

}  // namespace

void multi_block_test(Session& s, const MultiBlockParams& p) {
    multi_block_common(s, p);
    const int n = p.n, m = p.m;
    s.server_step(
        "multiblock.reveal", "reveal",
        [n](ServerView& v) {
            std::vector<std::string> ms;
            int total = 0;
            for (int i = 1; i <= n; ++i) {
                ms.push_back("m" + std::to_string(i));
                v.measure_register(blk(i) + "Q", qsim::Basis::z(), ms.back());
                total += v.layout().entry(v.q(blk(i) + "Q")).width;
            }
            v.compute("reveal", total, ms, [](const std::vector<std::string>& vals) {
                std::string r;
                for (const auto& x : vals) r += x;
                return r;
            });
        },
        "reveal");
    s.receive("reveal", "reveal_c");
    const std::string rv = s.q("reveal_c"), xr = s.q("xor_c");
    std::vector<std::string> k0, k1;
    for (int i = 1; i <= n; ++i) {
        k0.push_back(s.q(blk(i) + "x0"));
        k1.push_back(s.q(blk(i) + "x1"));
    }
    s.check([=](const Label& l) {
        const std::string& all = l.at(rv);
        int b1 = 0;
        for (int i = 1; i <= n; ++i) {
            std::string blkv = all.substr(static_cast<std::size_t>((i - 1) * m), static_cast<std::size_t>(m));
            const std::string& a0 = l.at(k0[static_cast<std::size_t>(i - 1)]);
            const std::string& a1 = l.at(k1[static_cast<std::size_t>(i - 1)]);
            if (blkv != a0 && blkv != a1) return false;
            int b = blkv == a1 && a0 != a1 ? 1 : 0;
            if (i == 1) {
                b1 = b;
            } else if ((l.at(xr)[static_cast<std::size_t>(i - 2)] == '1') != (b1 != b)) {
                return false;
            }
        }
        return true;
    });
}

void multi_block_comp(Session& s, const MultiBlockParams& p) {
    multi_block_common(s, p);
    const std::string xr = s.q("xor_c");
    for (int i = 1; i <= p.n; ++i) {
        const std::string a0 = s.q(blk(i) + "x0"), a1 = s.q(blk(i) + "x1");
        auto pick = [=](int which) {
            return [=](const Label& l) {
                int c = i == 1 ? 0 : (l.at(xr)[static_cast<std::size_t>(i - 2)] == '1');
                return l.at((which ^ c) ? a1 : a0);
            };
        };
        const std::string o = "o" + std::to_string(i);
        s.compute(o + ".x0", p.m, Side::client, pick(0));
        s.compute(o + ".x1", p.m, Side::client, pick(1));
    }
}

TwoModeProtocol multi_block_two_mode(const MultiBlockParams& p) {
    TwoModeProtocol t;
    t.name = "multi_block";
    t.test = [p](Session& s) { multi_block_test(s, p); };
    t.comp = [p](Session& s) { multi_block_comp(s, p); };
    t.scored = false;
    t.divergence = [](const Session& s) { return s.round(); };
    return t;
}

ProtocolOutcome run_multi_block_test(const MultiBlockParams& p, const Adversary& adv, std::uint64_t seed,
                                     ExecMode mode) {
    return run(
        "multi_block_test", [&](Session& s) { multi_block_test(s, p); }, adv, unit(), {seed, mode});
}

ProtocolOutcome run_multi_block_comp(const MultiBlockParams& p, const Adversary& adv, std::uint64_t seed,
                                     ExecMode mode) {
    std::vector<std::string> desc;
    for (int i = 1; i <= p.n; ++i) {
        desc.push_back("o" + std::to_string(i) + ".x0");
        desc.push_back("o" + std::to_string(i) + ".x1");
    }
    return run(
        "multi_block_comp", [&](Session& s) { multi_block_comp(s, p); }, adv, unit(), {seed, mode}, desc);
}

// ---------------------------------------------------------------- KP

int log2_exact(int m) {
    if (m < 2 || (m & (m - 1)) != 0) throw PreconditionViolated("width must be a power of two >= 2");
    return std::countr_zero(static_cast<unsigned>(m));
}

std::string u2b(const std::string& s) {
    const int lg = log2_exact(static_cast<int>(s.size()));
    if (weight_s(s) != 1) throw NotUnary("not a unary string: " + s);
    return msb_bits(static_cast<int>(s.find('1')), lg);
}

std::string b2u(const std::string& bin, int m) {
    const int j = from_msb(bin);
    if (j >= m) throw NotUnary("index beyond width");
    std::string s(static_cast<std::size_t>(m), '0');
    s[static_cast<std::size_t>(j)] = '1';
    return s;
}

int kp_paper_m0(int n, double eps) {
    const double target = std::pow(12.0 * 2 * n / eps, 2);
    long m = 1;
    while (static_cast<double>(m) <= target) m *= 2;
    return static_cast<int>(m);
}

int kp_m0(const KpParams& p) { return p.profile == Profile::paper ? kp_paper_m0(p.n, p.eps) : p.m0; }

void kp_honest_transform(ServerView& v, const std::string& prefix, int n, int m0) {
    const int lg = log2_exact(m0);
    auto rv = [&v](BasisIndex i, const std::string& name) {
        return qsim::register_value(v.layout(), v.q(name), i);
    };
    auto wv = [&v](BasisIndex i, const std::string& name, BasisIndex val) {
        return qsim::with_register_value(v.layout(), v.q(name), i, val);
    };
    using R = std::pair<BasisIndex, Complex>;
    v.add_quantum("q", 1);
    v.add_quantum("K", n);
    const std::string b1 = prefix + blk(1) + "Q";
    v.apply_map({"q", b1}, [&](const Label&, BasisIndex i) {
        BasisIndex par = std::popcount(rv(i, b1)) & 1U;
        return R{wv(i, "q", rv(i, "q") ^ par), {1, 0}};
    });
    for (int i = 1; i <= n; ++i) {
        const std::string A = prefix + blk(2 * i - 1) + "Q", B = prefix + blk(2 * i) + "Q";
        const std::string si = std::to_string(i);
        const std::string r0 = v.q("kp.r0_" + si), r1 = v.q("kp.r1_" + si);
        const std::string t0 = v.q("kp.t0_" + si), t1 = v.q("kp.t1_" + si);
        v.apply_map({A, B, "q"}, [&](const Label& l, BasisIndex idx) {
            BasisIndex a = rv(idx, A) ^ qsim::string_to_bits(l.at(r0));
            BasisIndex b = rv(idx, B) ^ qsim::string_to_bits(l.at(r1));
            b ^= a;
            if (rv(idx, "q")) a ^= b;
            return R{wv(wv(idx, A, a), B, b), {1, 0}};
        });
        const std::string kb = "kpb" + si;
        v.add_quantum(kb, lg);
        // unary -> binary into the fresh register, then clear the unary block
        v.apply_map({B, kb}, [&](const Label&, BasisIndex idx) {
            BasisIndex b = rv(idx, B), k = rv(idx, kb);
            if (std::popcount(b) == 1) k ^= qsim::string_to_bits(msb_bits(std::countr_zero(b), lg));
            b ^= BasisIndex{1} << from_msb(qsim::bits_to_string(k, lg));
            return R{wv(wv(idx, B, b), kb, k), {1, 0}};
        });
        if (lg >= 2) {
            v.apply_map({kb, "q"}, [&](const Label& l, BasisIndex idx) {
                const std::string& tail = l.at(rv(idx, "q") ? t1 : t0);
                BasisIndex k = rv(idx, kb) ^ qsim::string_to_bits("0" + tail);
                return R{wv(idx, kb, k), {1, 0}};
            });
        }
        const int slot = i - 1;
        v.apply_map({"K", kb}, [&](const Label&, BasisIndex idx) {
            BasisIndex K = rv(idx, "K"), k = rv(idx, kb);
            BasisIndex kbit = (K >> slot) & 1U;
            kbit ^= k & 1U;
            k ^= kbit;
            K = (K & ~(BasisIndex{1} << slot)) | (kbit << slot);
            return R{wv(wv(idx, "K", K), kb, k), {1, 0}};
        });
        v.discard(kb);
        v.discard(A);
        v.discard(B);
    }
}

void kp(Session& s, const KpParams& p) {
    if (p.n < 1) throw PreconditionViolated("kp needs n >= 1");
    const int n = p.n, n0 = 2 * n, m0 = kp_m0(p);
    const int lg = log2_exact(m0);
    MultiBlockParams mb{m0, n0, p.eps, p.kappa, p.profile};
    std::string pre;
    if (p.amplify) {
        int i = amp::amplify_prersvp(s, multi_block_two_mode(mb), p.amp.rounds, p.amp.p_test);
        pre = "r" + std::to_string(i) + "/";
    } else {
        multi_block_comp(s, mb);
    }
    auto key = [&](int j, int b) { return s.q(pre + "o" + std::to_string(j) + (b ? ".x1" : ".x0")); };
    std::vector<std::string> fields;
    for (int i = 1; i <= n; ++i) {
        const std::string si = std::to_string(i);
        const std::string a0 = key(2 * i - 1, 0), a1 = key(2 * i - 1, 1);
        const std::string c0 = key(2 * i, 0), c1 = key(2 * i, 1);
        s.send("kp.r0_" + si, m0, [=](const Label& l) { return l.at(a0); });
        s.send("kp.r1_" + si, m0, [=](const Label& l) { return l.at(c1); });
        if (lg >= 2) {
            s.send("kp.t0_" + si, lg - 1, [=](const Label& l) { return safe_u2b(xor_s(l.at(c0), l.at(c1)), lg).substr(1); });
            s.send("kp.t1_" + si, lg - 1, [=](const Label& l) { return safe_u2b(xor_s(l.at(a0), l.at(a1)), lg).substr(1); });
        }
        for (const char* f : {"kp.r0_", "kp.r1_", "kp.t0_", "kp.t1_"}) {
            const std::string nm = s.q(f + si);
            auto it = s.ens().branches.front().label.find(nm);
            if (it != s.ens().branches.front().label.end()) fields.push_back(it->second);
        }
    }
    s.server_step("kp.transform", encode_message(fields),
                  [pre, n, m0](ServerView& v) { kp_honest_transform(v, pre, n, m0); });
    auto out = [&](int which) {
        std::vector<std::pair<std::string, std::string>> pairs;
        for (int i = 1; i <= n; ++i) {
            int j = which == 0 ? 2 * i : 2 * i - 1;
            pairs.emplace_back(key(j, 0), key(j, 1));
        }
        return [=](const Label& l) {
            std::string r;
            for (const auto& [x, y] : pairs) r += safe_u2b(xor_s(l.at(x), l.at(y)), lg)[0];
            return r;
        };
    };
    s.compute("kx0", n, Side::client, out(0));
    s.compute("kx1", n, Side::client, out(1));
}

ProtocolOutcome run_kp(const KpParams& p, const Adversary& adv, std::uint64_t seed, ExecMode mode) {
    return run(
        "kp", [&](Session& s) { kp(s, p); }, adv, unit(), {seed, mode}, {"kx0", "kx1"});
}

// ---------------------------------------------------------------- QFac

int circular_distance(int a, int b) {
    int d = ((a - b) % 8 + 8) % 8;
    return std::min(d, 8 - d);
}

bool qfac_flag_ok(int theta, int phi, int r) {
    int d = ((theta - phi) % 8 + 8) % 8;
    if (d == 0) return r == 0;
    if (d == 4) return r == 1;
    return true;
}

bool qfac_wins(int theta, int phi, int r) {
    int d = circular_distance(theta, phi);
    if (d <= 1) return r == 0;
    if (d >= 3) return r == 1;
    return true;
}

int qfac_theta(const std::string& x0, const std::string& x1, const std::string& d) {
    auto f = [](const std::string& x) { return 2 * (x[0] == '1') + (x[1] == '1'); };
    int dot = 0;
    for (std::size_t i = 0; i < d.size(); ++i) dot ^= (d[i] == '1') & (x0[i] != x1[i]);
    return ((f(x1) - f(x0) + 4 * dot) % 8 + 8) % 8;
}

bool qfac_d_rejected(const std::string& d, DRule rule) {
    const std::size_t from = rule == DRule::zero_only ? 0 : 2;
    for (std::size_t i = from; i < d.size(); ++i)
        if (d[i] == '1') return false;
    return true;
}

ThetaRecord ThetaRecord::from_bits(const std::string& bits) {
    ThetaRecord t;
    t.t1 = bits.at(0) == '1';
    t.t2 = bits.at(1) == '1';
    t.t3 = bits.at(2) == '1';
    t.theta = 4 * t.t1 + 2 * t.t2 + t.t3;
    return t;
}

namespace {

void qfac_steps(Session& s, const QfacParams& p) {
    const int n = p.kp.n;
    if (n < 2) throw PreconditionViolated("qfac needs a key width of at least 2");
    if (p.rule == DRule::tail_zero && n < 3) throw PreconditionViolated("tail rule needs a key width of at least 3");
    kp(s, p.kp);
    s.server_step("qfac.phase", "phase", [](ServerView& v) {
        v.apply({{"K", 0}}, qsim::phase_gate(2));
        v.apply({{"K", 1}}, qsim::phase_gate(1));
    });
    s.server_step("qfac.hmeasure", "hmeasure", [](ServerView& v) { v.measure_register("K", qsim::Basis::x(), "d"); },
                  "d");
    s.receive("d", "d_c");
    const std::string kx0 = s.q("kx0"), kx1 = s.q("kx1"), dc = s.q("d_c");
    s.compute("theta", 3, Side::client,
              [=](const Label& l) { return msb_bits(qfac_theta(l.at(kx0), l.at(kx1), l.at(dc)), 3); });
    const DRule rule = p.rule;
    s.check([=](const Label& l) { return !qfac_d_rejected(l.at(dc), rule); });
}

}  // namespace

void qfac_comp(Session& s, const QfacParams& p) { qfac_steps(s, p); }

void qfac_test(Session& s, const QfacParams& p) {
    qfac_steps(s, p);
    const int phi = std::uniform_int_distribution<int>(0, 7)(s.client_rng());
    s.send("phi", msb_bits(phi, 3));
    s.server_step(
        "qfac.measure", msb_bits(phi, 3),
        [](ServerView& v) { v.measure_register("q", qsim::Basis::rot(from_msb(v.read_message("phi"))), "r"); }, "r");
    s.receive("r", "r_c");
    const std::string th = s.q("theta"), rc = s.q("r_c");
    s.check([=](const Label& l) { return qfac_flag_ok(from_msb(l.at(th)), phi, l.at(rc) == "1"); });
    s.set_score([=](const Label& l) -> std::optional<bool> {
        auto it = l.find(rc);
        if (it == l.end()) return std::nullopt;
        return qfac_wins(from_msb(l.at(th)), phi, it->second == "1");
    });
}

TwoModeProtocol qfac_two_mode(const QfacParams& p) {
    TwoModeProtocol t;
    t.name = "qfac";
    t.test = [p](Session& s) { qfac_test(s, p); };
    t.comp = [p](Session& s) { qfac_comp(s, p); };
    t.scored = true;
    t.divergence = [](const Session& s) { return s.round(); };
    return t;
}

ProtocolOutcome run_qfac_test(const QfacParams& p, const Adversary& adv, std::uint64_t seed, ExecMode mode) {
    return run(
        "qfac_test", [&](Session& s) { qfac_test(s, p); }, adv, unit(), {seed, mode}, {"theta", "kx0", "kx1"}, true);
}

ProtocolOutcome run_qfac_comp(const QfacParams& p, const Adversary& adv, std::uint64_t seed, ExecMode mode) {
    return run(
        "qfac_comp", [&](Session& s) { qfac_comp(s, p); }, adv, unit(), {seed, mode}, {"theta", "kx0", "kx1"});
}

std::vector<qsim::Matrix> qfac_conditional_states(int n, DRule rule) {
    const int N = 1 << n;
    const double w = 1.0 / (double(N) * N * N);
    std::vector<qsim::Matrix> rho(8, qsim::Matrix::Zero(2 * N, 2 * N));
    for (int x0 = 0; x0 < N; ++x0)
        for (int x1 = 0; x1 < N; ++x1) {
            const std::string s0 = qsim::bits_to_string(static_cast<BasisIndex>(x0), n);
            const std::string s1 = qsim::bits_to_string(static_cast<BasisIndex>(x1), n);
            for (int d = 0; d < N; ++d) {
                const std::string sd = qsim::bits_to_string(static_cast<BasisIndex>(d), n);
                if (qfac_d_rejected(sd, rule)) continue;
                const int th = qfac_theta(s0, s1, sd);
                const Complex e = qsim::phase_of(th);
                auto& r = rho[static_cast<std::size_t>(th)];
                r(d, d) += 0.5 * w;
                r(N + d, N + d) += 0.5 * w;
                r(d, N + d) += 0.5 * w * std::conj(e);
                r(N + d, d) += 0.5 * w * e;
            }
        }
    return rho;
}

double qfac_blindness_gap(int n, DRule rule) {
    auto rho = qfac_conditional_states(n, rule);
    qsim::Matrix total = qsim::Matrix::Zero(rho[0].rows(), rho[0].cols());
    for (const auto& r : rho) total += r;
    const double tt = total.trace().real();
    if (tt <= 0) return 0;
    double gap = 0;
    for (int t = 0; t < 4; ++t) {
        qsim::Matrix pair = rho[static_cast<std::size_t>(t)] + rho[static_cast<std::size_t>(t + 4)];
        const double pt = pair.trace().real();
        if (pt <= 0) continue;
        gap = std::max(gap, qsim::trace_distance(qsim::Matrix(pair / pt), qsim::Matrix(total / tt)));
    }
    return gap;
}

}  // namespace rspv::proto
