#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rspv/functionalities.hpp"
#include "rspv/protocol.hpp"

namespace rspv::proto {

enum class Profile { paper, scaled };

struct NotUnary : ProtocolError { using ProtocolError::ProtocolError; };
struct PreconditionViolated : ProtocolError { using ProtocolError::ProtocolError; };

// ---------------------------------------------------------------- OneBlock

struct OneBlockParams {
    int m = 4;
    double eps = 0.5;
    int kappa = 8;
    func::Bb84Source source = nullptr;  // rigged oracle for tests
};

int one_block_rounds(int m, int kappa);  // L = 4(m + kappa)

// Registers in the current scope: server "Q" (m qubits); client "x0", "x1"
// (m bits, char i = qubit i).
void one_block(Session& s, const OneBlockParams& p);
ProtocolOutcome run_one_block(const OneBlockParams& p, const Adversary& adv, std::uint64_t seed,
                              ExecMode mode = ExecMode::sample);

struct TensorParams {
    int m = 4;
    int n = 2;
    double eps = 0.5;
    int kappa = 8;
    func::Bb84Source source = nullptr;
};

// Blocks in sub-scopes "b1".."bn", each holding Q, x0, x1.
void one_block_tensor(Session& s, const TensorParams& p);
ProtocolOutcome run_one_block_tensor(const TensorParams& p, const Adversary& adv, std::uint64_t seed,
                                     ExecMode mode = ExecMode::sample);

// ---------------------------------------------------------------- MultiBlock

struct MultiBlockParams {
    int m = 4;
    int n = 2;
    double eps = 0.5;
    int kappa = 8;
    Profile profile = Profile::scaled;
};

double multi_block_eps0(const MultiBlockParams& p);  // eps - 10n/sqrt(m)
bool multi_block_precondition(const MultiBlockParams& p);  // eps > 11n/sqrt(m)

// Test mode: reported xor bits then a full computational reveal, checked by the client.
void multi_block_test(Session& s, const MultiBlockParams& p);
// Comp mode: client keys re-paired by the reported xor bits into client
// registers "o<i>.x0", "o<i>.x1"; server blocks stay in "b<i>/Q".
void multi_block_comp(Session& s, const MultiBlockParams& p);
TwoModeProtocol multi_block_two_mode(const MultiBlockParams& p);
ProtocolOutcome run_multi_block_test(const MultiBlockParams& p, const Adversary& adv, std::uint64_t seed,
                                     ExecMode mode = ExecMode::sample);
ProtocolOutcome run_multi_block_comp(const MultiBlockParams& p, const Adversary& adv, std::uint64_t seed,
                                     ExecMode mode = ExecMode::sample);

// ---------------------------------------------------------------- IT-core

// guess_measure: projective test of one block against a guessed x1.
// flip: X on the guessed position of one block before the check.
enum class Adv2Kind { honest, measure_block1, random_xor, guess_measure, flip };
enum class Adv3Kind { honest, flip };

struct ItcoreAdversary {
    Adv2Kind adv2 = Adv2Kind::honest;
    Adv3Kind adv3 = Adv3Kind::honest;
    int block = 1;     // targeted block (1-based)
    int position = 0;  // guessed position
    std::string name() const;
};

std::vector<ItcoreAdversary> guess_attack_family(int n, int m);

struct ItcoreResult {
    double distance = 0;              // real vs simulated
    std::vector<double> step_deviation;  // hybrid steps
    double bound_total = 0;           // 4n/sqrt(m)
    double bound_step = 0;            // 2n/sqrt(m)
    double bound_step_tight = 0;      // 2/sqrt(m)
};

struct TooLarge : ProtocolError { using ProtocolError::ProtocolError; };

// Exact distance between the real post-test state and the simulator's,
// averaged over all key positions (x0 fixed to even-parity base strings).
ItcoreResult multiblock_itcore(int m, int n, const ItcoreAdversary& adv,
                               const std::vector<std::uint64_t>& base_x0 = {});
double multiblock_itcore_distance(int m, int n, const ItcoreAdversary& adv);

// ---------------------------------------------------------------- KP

std::string u2b(const std::string& s);        // 0-based index of the single 1, msb first
std::string b2u(const std::string& bin, int m);
int log2_exact(int m);

struct AmpSetting {
    long rounds = 2;     // L of the cut-and-choose stage
    double p_test = 0.5;
};

struct KpParams {
    int n = 2;
    double eps = 0.5;
    int kappa = 8;
    Profile profile = Profile::scaled;
    int m0 = 4;          // scaled profile only
    bool amplify = true;
    AmpSetting amp;
};

int kp_paper_m0(int n, double eps);  // smallest power of 2 above (12 n0/eps)^2
int kp_m0(const KpParams& p);

// Outputs in the current scope: server "q" (1 qubit), "K" (n qubits);
// client "kx0", "kx1" (n bits).
void kp(Session& s, const KpParams& p);
ProtocolOutcome run_kp(const KpParams& p, const Adversary& adv, std::uint64_t seed,
                       ExecMode mode = ExecMode::sample);

// The honest server transform on one prepared MultiBlock output, exposed
// for the reversibility check. `prefix` is the round scope holding b<i>/Q.
void kp_honest_transform(ServerView& v, const std::string& prefix, int n, int m0);

// ---------------------------------------------------------------- QFac

enum class DRule {
    zero_only,  // fail iff d = 0^n
    tail_zero,  // fail iff d vanishes outside the two phase positions
};

struct QfacParams {
    KpParams kp;  // kp.n is the key width (kappa of the toy instance)
    DRule rule = DRule::tail_zero;
};

int circular_distance(int a, int b);
bool qfac_flag_ok(int theta, int phi, int r);
bool qfac_wins(int theta, int phi, int r);
// Phase delivered by the honest step 2 for keys (x0, x1) and outcome d.
int qfac_theta(const std::string& x0, const std::string& x1, const std::string& d);
bool qfac_d_rejected(const std::string& d, DRule rule);

// Client "theta" holds theta1 theta2 theta3 (msb first); server "q" holds |+_theta>.
void qfac_comp(Session& s, const QfacParams& p);
void qfac_test(Session& s, const QfacParams& p);
TwoModeProtocol qfac_two_mode(const QfacParams& p);
ProtocolOutcome run_qfac_test(const QfacParams& p, const Adversary& adv, std::uint64_t seed,
                              ExecMode mode = ExecMode::sample);
ProtocolOutcome run_qfac_comp(const QfacParams& p, const Adversary& adv, std::uint64_t seed,
                              ExecMode mode = ExecMode::sample);

struct ThetaRecord {
    int theta = 0;
    int t1 = 0, t2 = 0, t3 = 0;
    static ThetaRecord from_bits(const std::string& bits);
};

// Exact server-side states after step 2 from the ideal KP state with all keys
// enumerated: rho_theta on (q, d), unnormalised, passing d only.
std::vector<qsim::Matrix> qfac_conditional_states(int n, DRule rule);
// max over theta23 of TD((rho_t + rho_{t+4})/2, (1/8) sum rho)
double qfac_blindness_gap(int n, DRule rule);

}  // namespace rspv::proto
