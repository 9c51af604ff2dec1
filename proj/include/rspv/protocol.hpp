#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rspv/qsim.hpp"

namespace rspv {

using qsim::CqEnsemble;
using qsim::Label;

enum class Flag { pass, fail };
enum class Score { win, lose, bottom };
enum class ExecMode { sample, branch };

std::string to_string(Flag f);
std::string to_string(Score s);

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct LayoutMismatch : ProtocolError { using ProtocolError::ProtocolError; };
struct AdversaryLocalityError : ProtocolError { using ProtocolError::ProtocolError; };
struct SimulatorTouchesClientRegisters : ProtocolError { using ProtocolError::ProtocolError; };
struct InapplicableProtocol : ProtocolError { using ProtocolError::ProtocolError; };
struct UnknownStrategy : ProtocolError { using ProtocolError::ProtocolError; };

// Length-prefixed byte strings.
std::string encode_message(const std::vector<std::string>& fields);
std::vector<std::string> decode_message(const std::string& bytes);

class Transcript {
public:
    void append(std::string client_msg, std::string server_msg);
    std::size_t size() const { return rounds_.size(); }
    const std::vector<std::pair<std::string, std::string>>& rounds() const { return rounds_; }
    // Client-to-server messages only: what the server gets to see.
    std::string server_visible() const;
    std::string serialize() const;
    bool operator==(const Transcript&) const = default;

private:
    std::vector<std::pair<std::string, std::string>> rounds_;
};

struct ProtocolOutcome {
    Flag flag = Flag::pass;
    std::optional<Score> score;
    std::map<std::string, std::string> client_descriptions;
    CqEnsemble final_state;
    Transcript transcript;

    double pass_probability() const;
    double win_probability() const;  // weight with flag pass and score win
    double score_probability(Score s) const;  // regardless of flag
};

class Session;
class ServerView;

// Identifies a server action point inside a protocol.
struct Step {
    std::string protocol;
    std::string tag;
    int round = 0;
    std::string client_message;
};

using ServerAction = std::function<void(ServerView&)>;

class Adversary {
public:
    virtual ~Adversary() = default;
    virtual std::string name() const = 0;
    virtual bool applies_to(std::string_view protocol) const = 0;
    // Whether this strategy replaces the honest action at the step.
    virtual bool intercepts(const Step& step) const = 0;
    // Runs the server's action; `honest` is the honest behaviour.
    virtual void act(const Step& step, ServerView& view, const ServerAction& honest) const = 0;
};

class HonestAdversary final : public Adversary {
public:
    std::string name() const override { return "honest"; }
    bool applies_to(std::string_view) const override { return true; }
    bool intercepts(const Step&) const override { return false; }
    void act(const Step&, ServerView& view, const ServerAction& honest) const override { honest(view); }
};

const Adversary& honest_adversary();

// Owns the run state: ensemble, random streams, transcript, naming scope.
class Session {
public:
    Session(CqEnsemble initial, std::uint64_t seed, ExecMode mode, const Adversary& adversary,
            std::string protocol_id);

    CqEnsemble& ens() { return ens_; }
    const CqEnsemble& ens() const { return ens_; }
    ExecMode mode() const { return mode_; }
    const Adversary& adversary() const { return *adversary_; }
    const std::string& protocol_id() const { return protocol_; }

    std::mt19937_64& client_rng() { return client_rng_; }
    std::mt19937_64& server_rng() { return server_rng_; }
    std::mt19937_64& nature_rng() { return nature_rng_; }

    // Register names are qualified with the current scope prefix.
    std::string q(const std::string& name) const { return scope_ + name; }
    const std::string& scope() const { return scope_; }
    class Scope {
    public:
        Scope(Session& s, const std::string& part);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Session& s_;
        std::string saved_;
    };

    void add_quantum(const std::string& name, int width, qsim::Side side = qsim::Side::server);
    void add_quantum_state(const std::string& name, int width, const qsim::SparseState& local,
                           qsim::Side side = qsim::Side::server);
    void add_classical(const std::string& name, int width, qsim::Side side);
    bool has(const std::string& name) const { return ens_.layout.contains(q(name)); }
    void discard(const std::string& name);

    // Measurement helpers honour the execution mode.
    void settle();  // collapses to one branch in sample mode

    // Classical computation on every branch; write-once target.
    void compute(const std::string& target, int width, qsim::Side side,
                 const std::function<std::string(const Label&)>& fn);
    // Client-side checks: flag of the current scope becomes fail where pred is false.
    void check(const std::function<bool(const Label&)>& pred);
    void fail();
    void set_score(const std::function<std::optional<bool>(const Label&)>& win);
    std::string flag_register() const { return q("flag"); }
    std::string score_register() const { return q("score"); }
    void init_flag();
    bool flag_exists() const { return ens_.layout.contains(q("flag")); }

    // Global client value (identical across branches); stored as a client register.
    void set_client(const std::string& name, const std::string& bits);
    std::string client_value(const std::string& name) const;  // from the first branch

    // Copies a server classical register into a client register on every branch.
    void receive(const std::string& server_reg, const std::string& client_reg);

    // Client message: a server-readable classical register, same on every branch
    // or computed per branch.
    void send(const std::string& name, const std::string& bits);
    void send(const std::string& name, int width, const std::function<std::string(const Label&)>& fn);

    // Runs the server step through the adversary and records one round.
    // `reply` names the server register carrying the answer (may be empty).
    void server_step(const std::string& tag, const std::string& client_msg, const ServerAction& honest,
                     const std::string& reply = "");
    // Marks the failure of the current scope wherever a sub-scope failed.
    void absorb_flag(const std::string& sub_scope);
    void record_round(const std::string& client_msg, const std::string& server_msg);
    Transcript& transcript() { return transcript_; }
    int round() const { return static_cast<int>(transcript_.size()); }

    ProtocolOutcome finish(const std::vector<std::string>& description_regs, bool scored);

private:
    CqEnsemble ens_;
    ExecMode mode_;
    const Adversary* adversary_;
    std::string protocol_;
    std::mt19937_64 client_rng_, server_rng_, nature_rng_;
    std::string scope_;
    Transcript transcript_;
};

// Restricted handle given to server-side code: every register access is
// checked against the register's side.
class ServerView {
public:
    ServerView(Session& s, std::string error_kind = "adversary");

    const qsim::RegisterLayout& layout() const { return s_.ens().layout; }
    std::string q(const std::string& name) const { return s_.q(name); }
    std::mt19937_64& rng() { return s_.server_rng(); }
    ExecMode mode() const { return s_.mode(); }

    void add_quantum(const std::string& name, int width);
    void add_classical(const std::string& name, int width);
    void apply(const std::vector<std::pair<std::string, int>>& qubits, const qsim::Matrix& gate);
    void apply_map(const std::vector<std::string>& regs, const qsim::BasisMap& map);
    void measure(const std::vector<std::pair<std::string, int>>& qubits, qsim::Basis basis,
                 const std::string& record_into);
    void measure_register(const std::string& reg, qsim::Basis basis, const std::string& record_into);
    void measure_parity(const std::vector<std::pair<std::string, int>>& qubits, const std::string& record_into);
    void discard(const std::string& reg);
    void reset(const std::string& reg);  // trace out and re-prepare |0..0>
    void replace(const std::string& reg, const qsim::SparseState& local);
    // Classical computation over server registers only.
    void compute(const std::string& target, int width, const std::vector<std::string>& inputs,
                 const std::function<std::string(const std::vector<std::string>&)>& fn);
    // Message from the client, readable by the server.
    std::string read_message(const std::string& name) const;
    void flag_fail();  // only simulators may do this

    void allow_flag_write(bool allow) { flag_write_ = allow; }

private:
    void require_server(const std::string& reg) const;
    Session& s_;
    std::string kind_;
    bool flag_write_ = false;
};

// Runs `body` on a fresh session and packages the outcome.
struct RunOptions {
    std::uint64_t seed = 1;
    ExecMode mode = ExecMode::sample;
};
using Program = std::function<void(Session&)>;

struct TwoModeProtocol {
    std::string name;
    Program test;
    Program comp;
    bool scored = false;
    // Number of transcript rounds the modes share before they may differ.
    std::function<int(const Session&)> divergence;
};

ProtocolOutcome run(const std::string& protocol_id, const Program& body, const Adversary& adversary,
                    CqEnsemble initial, RunOptions opts, const std::vector<std::string>& description_regs = {},
                    bool scored = false);

// Branches with flag=fail removed; weights kept (trace = pass probability).
CqEnsemble project_pass(const ProtocolOutcome& out);

// Trace distance between the real passing state and the simulator applied to
// target (x) initial. The simulator may only touch server-side registers and flag.
double compare_to_simulated(const CqEnsemble& real_pass, const CqEnsemble& target,
                            const ServerAction& simulator, const CqEnsemble& initial,
                            const std::vector<std::string>& visible);

// Structural check: serialised server-visible messages agree for the first
// `rounds` rounds.
bool transcripts_agree(const Transcript& a, const Transcript& b, std::size_t rounds);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace rspv
