#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rspv/functionalities.hpp"
#include "rspv/protocol.hpp"

namespace rspv::amp {

enum class Profile { paper, scaled };

struct ParameterError : ProtocolError { using ProtocolError::ProtocolError; };
struct RegisterClash : ProtocolError { using ProtocolError::ProtocolError; };

inline constexpr double kOpt = 0.92677669529663688;  // 1/2 + cos^2(pi/8)/2

long protocol0_rounds(double eps, double eps0);
long protocol1_rounds(double eps, double eps0, double delta);
double protocol1_test_prob(double eps, double eps0);
double protocol3r_margin(double eps, double eps0, double delta0, double lambda);  // (1/6)d0(e-e0) - lambda
long protocol3r_rounds(double eps, double eps0, double delta0, double lambda, int kappa);
double protocol3r_threshold(double opt, double eps, double eps0, double delta0, double lambda, long rounds);

struct AmplifierParams {
    double eps = 0.5, eps0 = 0.25, delta0 = 0.9, lambda = 0.0, delta = 0.5;
    int kappa = 1;
    long rounds = 1;
    double p_test = 0.5;
    double threshold = 0;
    double opt = kOpt;
    Profile profile = Profile::scaled;

    // Paper profile recomputes rounds, p_test and threshold from the formulas.
    // Structural constraints are checked in both profiles.
    static AmplifierParams protocol0(double eps, double eps0, Profile profile, long scaled_rounds = 0);
    static AmplifierParams protocol1(double eps, double eps0, double delta, Profile profile,
                                     long scaled_rounds = 0, double scaled_p = 0);
    static AmplifierParams protocol3r(double eps, double eps0, double delta0, double lambda, int kappa,
                                      double opt, Profile profile, long scaled_rounds = 0);
};

// Quantum registers whose name starts with s.q(prefix) are traced out.
void discard_scope(Session& s, const std::string& prefix);

// Round k runs in scope "r<k>" (1-based). All engines return the selected
// round index where there is one.
int amplify_def32_to_def33(Session& s, const Program& sub, long rounds);
void sequential_compose(Session& s, const std::vector<Program>& subs);
int amplify_prersvp(Session& s, const TwoModeProtocol& p, long rounds, double p_test);
// test': all flags pass and wins >= threshold.
void amplify_scored_test(Session& s, const TwoModeProtocol& scored, long rounds, double threshold);
// comp': i_stop uniform, i_stop-1 scored test rounds then one comp round.
int amplify_scored_comp(Session& s, const TwoModeProtocol& scored, long rounds);
TwoModeProtocol amplify_scored(const TwoModeProtocol& scored, long rounds, double threshold);

// Scored stub: the server holds a copy "hint" of a secret client bit that is
// right with probability `opt` and answers it at step "stub.answer" ("r").
// Both modes are scored; comp mode is the same round.
TwoModeProtocol scored_stub(double opt = kOpt);
// Test mode of amplify_scored(scored_stub(opt)) with the protocol-3r threshold.
ProtocolOutcome run_scored_test(const AmplifierParams& a, const Adversary& adv, std::uint64_t seed);

ProtocolOutcome run_def32_to_def33(const Program& sub, const AmplifierParams& a, const Adversary& adv,
                                   std::uint64_t seed);
ProtocolOutcome run_prersvp(const TwoModeProtocol& p, const AmplifierParams& a, const Adversary& adv,
                            std::uint64_t seed, ExecMode mode = ExecMode::sample);

// ---------------------------------------------------------------- ROAV -> RSPV

// Target family of two states {rho_test, rho_comp}, each prepared by the
// client-chosen ideal set-up; then the ROAV step on the delivered state.
struct RoavPlan {
    std::string name = "roav";
    qsim::SparseState test_state;   // on `width` qubits, pure
    qsim::SparseState comp_state;
    int width = 1;
    func::RoavSpec pi_test;
    func::RoavSpec pi_comp;
    std::vector<int> measured;      // local qubits the ROAV acts on
};

// test' = rspv0(test) then pi_test; comp' = rspv0(comp) then pi_comp.
// Delivered state lives in server register "roav.in", outcomes in client "roav.out".
TwoModeProtocol compose_roav_rspv(const RoavPlan& plan);

}  // namespace rspv::amp
