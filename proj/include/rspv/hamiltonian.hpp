#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rspv/protocol.hpp"
#include "rspv/qsim.hpp"

namespace rspv::ham {

struct HamiltonianError : ProtocolError { using ProtocolError::ProtocolError; };
struct TooLarge : ProtocolError { using ProtocolError::ProtocolError; };
struct BudgetExceeded : ProtocolError { using ProtocolError::ProtocolError; };
struct LengthMismatch : ProtocolError { using ProtocolError::ProtocolError; };

struct Term {
    double gamma = 1.0;
    std::string letters;  // over {X, Z, I}, letter t acts on qubit t
};

struct XZHamiltonian {
    int n = 0;
    int locality = 0;  // 0 = no limit
    std::vector<Term> terms;

    void validate() const;
    // "<gamma> <letters>" per line; '#' starts a comment.
    static XZHamiltonian parse(const std::string& text, int locality = 0);
    static XZHamiltonian load(const std::string& path, int locality = 0);
    // qubit 0 is the most significant bit
    qsim::Matrix dense() const;
};

double ground_energy(const XZHamiltonian& h);
// tr(H sigma) for a pure witness (index bit t = qubit t).
double energy_of(const XZHamiltonian& h, const qsim::SparseState& witness);

// Per-round client record: term index and P-measurement bits (char t = qubit t).
struct CompRound {
    int term = 0;
    std::string mr;
};

inline constexpr int kSampleBudget = 20;

// EPR pairs P_k <-> Q_k per round, P_k measured per the sampled term letters.
// Registers: client "j<k>", "mr<k>"; server "qin<k>" (k from 1).
CqEnsemble sample_rho_comp(const XZHamiltonian& h, int K, std::uint64_t seed);

// Bell record per round: char 2t = a_t, char 2t+1 = b_t.
double round_value(const XZHamiltonian& h, const CompRound& r, const std::string& bell);
double val_h(const XZHamiltonian& h, const std::vector<CompRound>& comp, const std::vector<std::string>& bell);

long paper_K(int kappa, double a, double b);

struct EnergyParams {
    XZHamiltonian h;
    double a = -1;
    double b = -0.5;
    int kappa = 1;
    int K = 200;  // scaled round count
    bool paper_profile = false;

    long rounds() const { return paper_profile ? paper_K(kappa, a, b) : K; }
};

struct EnergyTestRecord {
    bool energy_mode = false;
    std::vector<CompRound> comp;
    std::vector<std::string> bell;
    double val = 0;
    bool accept = false;
};

// One trial in the current scope; the server supplies the witness register "w"
// at step "energy.witness" (message: "w"). Sample mode only.
EnergyTestRecord energy_test(Session& s, const EnergyParams& p, const qsim::SparseState& witness);

struct EnergyRun {
    ProtocolOutcome outcome;
    EnergyTestRecord record;
};
EnergyRun run_energy_test(const EnergyParams& p, const qsim::SparseState& witness, const Adversary& adv,
                          std::uint64_t seed);

qsim::SparseState product_state(const std::string& letters);  // over {0, 1, +, -}

}  // namespace rspv::ham
