#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rspv/protocol.hpp"
#include "rspv/qsim.hpp"

namespace rspv::func {

enum class Bb84 { zero, one, plus, minus };

char symbol(Bb84 d);
Bb84 from_symbol(char c);
qsim::SparseState bb84_state(Bb84 d);
// Two-bit client record: basis bit then value bit ('0'->"00", '1'->"01", '+'->"10", '-'->"11").
std::string bb84_code(Bb84 d);
Bb84 bb84_from_code(const std::string& code);

using Bb84Source = std::function<Bb84(std::mt19937_64&)>;
Bb84 draw_bb84(std::mt19937_64& rng);

// One ideal BB84 delivery inside a running session: the client records the
// descriptor in `desc_reg`, the server receives the state in `qubit_reg`; the
// adversary may then act on the qubit (step "bb84.deliver").
Bb84 ideal_bb84_round(Session& s, const std::string& qubit_reg, const std::string& desc_reg,
                      const Bb84Source& source = nullptr);

// Stand-alone run: registers "q" (server) and "desc" (client).
ProtocolOutcome ideal_bb84(std::uint64_t seed, const Adversary& adversary = honest_adversary());

// Uniform family of pure states |phi_i>, with its ideal cq-state builder.
struct TargetState {
    std::string family;
    int width = 1;
    std::vector<qsim::SparseState> states;

    int desc_width() const;
    // sum_i (1/D) |i><i| (x) |phi_i><phi_i| on (desc_reg client, out_reg server).
    CqEnsemble build(const std::string& desc_reg = "desc", const std::string& out_reg = "out") const;
};

TargetState bb84_family();
TargetState phase_family(bool odd_only = false);  // |+_theta>

struct IndexOutOfRangeError : ProtocolError { using ProtocolError::ProtocolError; };

// Set-up with client-chosen inputs: index i from the client, bit b from the server.
ProtocolOutcome ideal_rspv_chosen(const TargetState& family, int i, int server_bit, std::uint64_t seed = 1);
// In-session form: the server bit is produced at step "rspv0.bit" (honest: 0).
// On b=0 `deliver` runs; on b=1 the flag fails and nothing is delivered.
void ideal_chosen_round(Session& s, const Program& deliver);

// ---------------------------------------------------------------- ROAV

struct IncompletePovm : ProtocolError { using ProtocolError::ProtocolError; };

struct RoavSpec {
    // branches[i] holds the Kraus operators of E_i (input width = output width)
    std::vector<std::vector<qsim::Matrix>> branches;
    int input_width = 1;
    int output_width = 1;

    int outcome_width() const;
    void validate() const;
};

RoavSpec bell_povm(int pairs);            // outcome string (a_t, b_t) per pair
RoavSpec computational_povm(int width);

// Applies the POVM to the listed qubits with Born weights; the outcome index
// (msb first) is written to the client register `record_into`. With a sampler
// one outcome is drawn.
CqEnsemble ideal_roav_apply(const RoavSpec& spec, CqEnsemble ens, const std::vector<int>& qubits,
                            const std::string& record_into, std::mt19937_64* sampler = nullptr);

// ---------------------------------------------------------------- toy weak NTCF

struct MalformedKey : ProtocolError { using ProtocolError::ProtocolError; };

// f_b(x) = P(x xor b*s) with a secret injection P: {0,1}^k -> {0,1}^(k+1).
// Deliberately insecure: the public key carries the full table.
struct NtcfKeys {
    std::string public_key;
    std::string secret_key;
    int kappa = 0;
    int range_width = 0;
    double mu = 0;
    std::uint64_t shift = 0;                // s
    std::vector<std::uint64_t> forward;     // P
    std::vector<std::int64_t> inverse;      // P^-1 or -1
};

NtcfKeys toy_ntcf_keygen(double mu, int kappa, std::uint64_t seed);
// Rebuilds keys from their serialised strings; throws MalformedKey.
NtcfKeys toy_ntcf_parse(const std::string& public_key, const std::string& secret_key);
std::optional<std::uint64_t> toy_ntcf_dec(const NtcfKeys& keys, int b, std::uint64_t y);
bool toy_ntcf_chk(const NtcfKeys& keys, int b, std::uint64_t x, std::uint64_t y);
std::uint64_t toy_ntcf_f(const NtcfKeys& keys, int b, std::uint64_t x);
// |b>|x>|0> -> |b>|x>|f_b(x)> on registers of the ensemble (y_reg is added).
CqEnsemble toy_ntcf_eval(const NtcfKeys& keys, CqEnsemble ens, const std::string& b_reg,
                         const std::string& x_reg, const std::string& y_reg);

}  // namespace rspv::func
