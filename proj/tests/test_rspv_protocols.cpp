#include <map>

#include "doctest.h"
#include "oracle.hpp"
#include "rspv/adversaries.hpp"
#include "rspv/protocols.hpp"

using namespace rspv;
using namespace rspv::proto;

namespace {

qsim::BasisIndex from_chars(const std::string& s) {
    qsim::BasisIndex v = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] == '1') v |= qsim::BasisIndex{1} << i;
    return v;
}

// Overlap of one branch with a target on the selected qubits, environment traced.
double branch_fidelity(const qsim::PureBranch& b, qsim::BasisIndex sel,
                       const std::function<oracle::C(qsim::BasisIndex)>& target) {
    std::map<qsim::BasisIndex, oracle::C> env;
    double n2 = 0;
    for (const auto& a : b.amps) {
        env[a.index & ~sel] += std::conj(target(a.index & sel)) * a.value;
        n2 += std::norm(a.value);
    }
    double f = 0;
    for (const auto& [k, v] : env) f += std::norm(v);
    return f / n2;
}

QfacParams small_qfac() {
    QfacParams q;
    q.kp.n = 3;
    q.kp.m0 = 2;
    q.kp.amp.rounds = 2;
    return q;
}

}  // namespace

TEST_CASE("unary and binary encodings") {
    CHECK(u2b("0100") == "01");
    CHECK(u2b("1000") == "00");
    CHECK(u2b("00000001") == "111");
    CHECK(b2u("10", 4) == "0010");
    CHECK_THROWS_AS(u2b("0110"), NotUnary);
    CHECK_THROWS_AS(u2b("0000"), NotUnary);
    CHECK_THROWS_AS(u2b("010"), PreconditionViolated);
    for (int m = 2; m <= 32; m *= 2)
        for (int j = 0; j < m; ++j) {
            std::string u(static_cast<std::size_t>(m), '0');
            u[static_cast<std::size_t>(j)] = '1';
            CHECK(b2u(u2b(u), m) == u);
        }
    CHECK(log2_exact(16) == 4);
    CHECK_THROWS_AS(log2_exact(12), PreconditionViolated);
}

TEST_CASE("OneBlock parameters") {
    CHECK(one_block_rounds(4, 8) == 48);
    MultiBlockParams p;
    p.m = 10000;
    p.n = 2;
    p.eps = 0.5;
    CHECK(multi_block_eps0(p) == doctest::Approx(0.3));
    CHECK(multi_block_precondition(p));
    p.m = 1024;
    CHECK_FALSE(multi_block_precondition(p));
    p.profile = Profile::paper;
    CHECK_THROWS_AS(run_multi_block_test(p, honest_adversary(), 1), PreconditionViolated);
    CHECK(kp_paper_m0(1, 0.5) == 4096);
}

TEST_CASE("OneBlock honest run passes with a valid key pair") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        OneBlockParams p;
        auto o = run_one_block(p, honest_adversary(), seed);
        REQUIRE(o.flag == Flag::pass);
        const auto& l = o.final_state.branches.at(0).label;
        const std::string x0 = l.at("x0"), x1 = l.at("x1");
        int diff = 0, par = 0;
        for (std::size_t i = 0; i < x0.size(); ++i) {
            diff += x0[i] != x1[i];
            par ^= x0[i] == '1';
        }
        CHECK(diff == 1);
        CHECK(par == 0);
    }
}

TEST_CASE("OneBlock rejects a source that only sends |->") {
    OneBlockParams p;
    p.source = [](std::mt19937_64&) { return func::Bb84::minus; };
    for (std::uint64_t seed = 1; seed <= 10; ++seed) CHECK(run_one_block(p, honest_adversary(), seed).flag == Flag::fail);
}

TEST_CASE("OneBlock selection rarely fails") {
    OneBlockParams p;
    p.m = 4;
    p.kappa = 16;
    int fails = 0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) fails += run_one_block(p, honest_adversary(), derive_seed(3, static_cast<std::uint64_t>(i))).flag == Flag::fail;
    CHECK(fails / double(n) <= 0.01);
}

TEST_CASE("a one-block tensor with n = 1 matches OneBlock") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        OneBlockParams a;
        TensorParams b;
        b.n = 1;
        auto oa = run_one_block(a, honest_adversary(), seed);
        auto ob = run_one_block_tensor(b, honest_adversary(), seed);
        CHECK(oa.transcript == ob.transcript);
        CHECK(oa.flag == ob.flag);
    }
}

TEST_CASE("MultiBlock comp re-pairs keys into a joint superposition") {
    for (int n : {2, 3})
        for (std::uint64_t seed = 1; seed <= 6; ++seed) {
            MultiBlockParams p;
            p.m = 4;
            p.n = n;
            auto o = run_multi_block_comp(p, honest_adversary(), seed, ExecMode::branch);
            const auto& lay = o.final_state.layout;
            qsim::BasisIndex sel = 0;
            for (int i = 1; i <= n; ++i)
                for (int q : lay.qubits("b" + std::to_string(i) + "/Q")) sel |= qsim::BasisIndex{1} << q;
            int checked = 0;
            for (const auto& b : o.final_state.branches) {
                if (b.label.at("flag") != "0") continue;
                ++checked;
                qsim::BasisIndex all0 = 0, all1 = 0;
                for (int i = 1; i <= n; ++i) {
                    const std::string o_i = "o" + std::to_string(i);
                    const int off = lay.entry("b" + std::to_string(i) + "/Q").offset;
                    all0 |= from_chars(b.label.at(o_i + ".x0")) << off;
                    all1 |= from_chars(b.label.at(o_i + ".x1")) << off;
                }
                auto target = [&](qsim::BasisIndex idx) {
                    return idx == all0 || idx == all1 ? oracle::C(oracle::r2) : oracle::C(0);
                };
                CHECK(branch_fidelity(b, sel, target) == doctest::Approx(1).epsilon(1e-9));
            }
            CHECK(checked > 0);
        }
}

TEST_CASE("MultiBlock test mode: honest passes, a parity liar fails") {
    MultiBlockParams p;
    p.m = 4;
    p.n = 2;
    const auto liar = adv::make_adversary("parity-liar");
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CHECK(run_multi_block_test(p, honest_adversary(), seed, ExecMode::branch).pass_probability() == doctest::Approx(1));
        CHECK(run_multi_block_test(p, *liar, seed, ExecMode::branch).pass_probability() == doctest::Approx(0));
    }
}

TEST_CASE("IT-core: the honest server is simulated exactly") {
    for (int m : {2, 4})
        for (int n : {1, 2}) CHECK(multiblock_itcore_distance(m, n, {}) < 1e-9);
    auto r = multiblock_itcore(4, 2, {});
    CHECK(r.bound_total == doctest::Approx(4.0));
    CHECK(r.bound_step == doctest::Approx(2.0));
    CHECK(r.bound_step_tight == doctest::Approx(1.0));
    CHECK(guess_attack_family(2, 4).size() > 0);
}

TEST_CASE("QFac win and flag tables") {
    CHECK(circular_distance(0, 7) == 1);
    CHECK(circular_distance(2, 6) == 4);
    CHECK(circular_distance(5, 5) == 0);
    // theta = 0 against every phi
    const int win0[8] = {1, 1, 1, 0, 0, 0, 1, 1};
    const int win1[8] = {0, 0, 1, 1, 1, 1, 1, 0};
    for (int phi = 0; phi < 8; ++phi) {
        CHECK(qfac_wins(0, phi, 0) == bool(win0[phi]));
        CHECK(qfac_wins(0, phi, 1) == bool(win1[phi]));
        CHECK(qfac_flag_ok(0, phi, 0) == (phi != 4));
        CHECK(qfac_flag_ok(0, phi, 1) == (phi != 0));
    }
    CHECK(qfac_wins(3, 2, 0));
    CHECK(qfac_wins(3, 6, 1));
}

TEST_CASE("QFac phase from keys and the d rule") {
    CHECK(qfac_theta("00", "10", "00") == 2);
    CHECK(qfac_theta("00", "01", "00") == 1);
    CHECK(qfac_theta("10", "00", "00") == 6);
    CHECK(qfac_theta("00", "10", "10") == 6);
    CHECK(qfac_d_rejected("0000", DRule::zero_only));
    CHECK_FALSE(qfac_d_rejected("1000", DRule::zero_only));
    CHECK(qfac_d_rejected("1100", DRule::tail_zero));
    CHECK_FALSE(qfac_d_rejected("0010", DRule::tail_zero));
    auto t = ThetaRecord::from_bits("101");
    CHECK(t.theta == 5);
    CHECK(t.t1 == 1);
    CHECK(t.t2 == 0);
}

TEST_CASE("QFac comp delivers |+_theta> with uniform theta") {
    const auto q = small_qfac();
    std::map<int, int> counts;
    int passed = 0;
    const int n = 800;
    for (int i = 0; i < n; ++i) {
        auto o = run_qfac_comp(q, honest_adversary(), derive_seed(21, static_cast<std::uint64_t>(i)));
        if (o.flag != Flag::pass) continue;
        ++passed;
        const int th = ThetaRecord::from_bits(o.client_descriptions.at("theta")).theta;
        ++counts[th];
        if (i < 50) {
            const auto rho = qsim::density_of(o.final_state, {"q"}).matrix;
            CHECK(oracle::trace_distance(rho, oracle::proj(oracle::plus(th))) < 1e-9);
        }
    }
    REQUIRE(passed > n / 2);
    int t1 = 0;
    for (const auto& [th, c] : counts) {
        CHECK(std::abs(c / double(passed) - 0.125) <= 0.04);
        if (th >= 4) t1 += c;
    }
    CHECK(std::abs(t1 / double(passed) - 0.5) <= 0.05);
}

TEST_CASE("QFac test: a phase offset lowers the win rate") {
    const auto q = small_qfac();
    const auto off = adv::make_adversary("phase-offset", {{"k", "2"}});
    int honest = 0, shifted = 0;
    const int n = 1500;
    for (int i = 0; i < n; ++i) {
        const auto seed = derive_seed(5, static_cast<std::uint64_t>(i));
        honest += run_qfac_test(q, honest_adversary(), seed).score == Score::win;
        shifted += run_qfac_test(q, *off, seed).score == Score::win;
    }
    const double opt = 0.5 + 0.5 * std::pow(std::cos(std::numbers::pi / 8), 2);
    CHECK(std::abs(honest / double(n) - opt) < 0.03);
    CHECK(shifted / double(n) < opt - 0.05);
}

TEST_CASE("QFac blindness gap vanishes") { CHECK(qfac_blindness_gap(3, DRule::tail_zero) < 1e-9); }

TEST_CASE("KP honest run") {
    KpParams p;
    p.n = 2;
    p.m0 = 4;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto o = run_kp(p, honest_adversary(), seed, ExecMode::branch);
        CHECK(o.pass_probability() == doctest::Approx(1));
    }
}
