#include "rspv/protocol.hpp"

#include <algorithm>

namespace rspv {

using qsim::RegKind;
using qsim::Side;

std::string to_string(Flag f) { return f == Flag::pass ? "pass" : "fail"; }

std::string to_string(Score s) {
    switch (s) {
        case Score::win: return "win";
        case Score::lose: return "lose";
        case Score::bottom: return "bottom";
    }
    return "bottom";
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string encode_message(const std::vector<std::string>& fields) {
    std::string out;
    for (const auto& f : fields) {
        auto n = static_cast<std::uint32_t>(f.size());
        for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((n >> s) & 0xFF));
        out += f;
    }
    return out;
}

std::vector<std::string> decode_message(const std::string& bytes) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < bytes.size()) {
        if (i + 4 > bytes.size()) throw ProtocolError("truncated message length");
        std::uint32_t n = 0;
        for (int k = 0; k < 4; ++k) n = (n << 8) | static_cast<unsigned char>(bytes[i + static_cast<std::size_t>(k)]);
        i += 4;
        if (i + n > bytes.size()) throw ProtocolError("truncated message body");
        out.push_back(bytes.substr(i, n));
        i += n;
    }
    return out;
}

// ---------------------------------------------------------------- transcript

void Transcript::append(std::string client_msg, std::string server_msg) {
    rounds_.emplace_back(std::move(client_msg), std::move(server_msg));
}

std::string Transcript::server_visible() const {
    std::vector<std::string> f;
    f.reserve(rounds_.size());
    for (const auto& r : rounds_) f.push_back(r.first);
    return encode_message(f);
}

std::string Transcript::serialize() const {
    std::vector<std::string> f;
    for (const auto& r : rounds_) {
        f.push_back(r.first);
        f.push_back(r.second);
    }
    return encode_message(f);
}

// ---------------------------------------------------------------- outcome

namespace {

bool passes(const Label& l, const std::string& flag = "flag") {
    auto it = l.find(flag);
    return it == l.end() || it->second == "0";
}

}  // namespace

double ProtocolOutcome::pass_probability() const {
    double p = 0;
    for (const auto& b : final_state.branches)
        if (passes(b.label)) p += b.weight;
    return p;
}

double ProtocolOutcome::win_probability() const {
    double p = 0;
    for (const auto& b : final_state.branches) {
        auto it = b.label.find("score");
        if (passes(b.label) && it != b.label.end() && it->second == "1") p += b.weight;
    }
    return p;
}

double ProtocolOutcome::score_probability(Score s) const {
    double p = 0;
    for (const auto& b : final_state.branches) {
        auto it = b.label.find("score");
        Score v = it == b.label.end() ? Score::bottom : (it->second == "1" ? Score::win : Score::lose);
        if (v == s) p += b.weight;
    }
    return p;
}

const Adversary& honest_adversary() {
    static const HonestAdversary h;
    return h;
}

// ---------------------------------------------------------------- session

Session::Session(CqEnsemble initial, std::uint64_t seed, ExecMode mode, const Adversary& adversary,
                 std::string protocol_id)
    : ens_(std::move(initial)),
      mode_(mode),
      adversary_(&adversary),
      protocol_(std::move(protocol_id)),
      client_rng_(derive_seed(seed, 1)),
      server_rng_(derive_seed(seed, 2)),
      nature_rng_(derive_seed(seed, 3)) {
    ens_.layout.set_max_qubits(qsim::kIndexBits);
}

Session::Scope::Scope(Session& s, const std::string& part) : s_(s), saved_(s.scope_) { s_.scope_ += part + "/"; }
Session::Scope::~Scope() { s_.scope_ = saved_; }

void Session::add_quantum(const std::string& name, int width, Side side) {
    ens_ = qsim::add_register(std::move(ens_), q(name), RegKind::quantum, width, side);
}

void Session::add_quantum_state(const std::string& name, int width, const qsim::SparseState& local, Side side) {
    ens_ = qsim::add_quantum_state(std::move(ens_), q(name), width, local, side);
}

void Session::add_classical(const std::string& name, int width, Side side) {
    if (ens_.layout.contains(q(name))) {
        const auto& e = ens_.layout.entry(q(name));
        if (e.kind != RegKind::classical || e.width != width || e.side != side)
            throw LayoutMismatch("register " + q(name) + " redeclared differently");
        return;
    }
    ens_ = qsim::add_register(std::move(ens_), q(name), RegKind::classical, width, side);
}

void Session::discard(const std::string& name) {
    ens_ = qsim::discard(std::move(ens_), q(name), mode_ == ExecMode::sample ? &nature_rng_ : nullptr);
}

void Session::settle() {
    if (mode_ == ExecMode::sample && ens_.branches.size() > 1) ens_ = qsim::sample_branch(std::move(ens_), nature_rng_);
}

void Session::compute(const std::string& target, int width, Side side,
                      const std::function<std::string(const Label&)>& fn) {
    add_classical(target, width, side);
    const std::string t = q(target);
    for (auto& b : ens_.branches) qsim::write_label(b, ens_.layout, t, fn(b.label));
}

void Session::init_flag() {
    add_classical("flag", 1, Side::client);
    const std::string f = q("flag");
    for (auto& b : ens_.branches)
        if (!b.label.count(f)) b.label[f] = "0";
}

void Session::check(const std::function<bool(const Label&)>& pred) {
    init_flag();
    const std::string f = q("flag");
    for (auto& b : ens_.branches)
        if (!pred(b.label)) b.label[f] = "1";
}

void Session::fail() {
    check([](const Label&) { return false; });
}

void Session::absorb_flag(const std::string& sub_scope) {
    init_flag();
    const std::string f = q("flag");
    const std::string sub = sub_scope + "flag";
    for (auto& b : ens_.branches) {
        auto it = b.label.find(sub);
        if (it != b.label.end() && it->second == "1") b.label[f] = "1";
    }
}

void Session::set_score(const std::function<std::optional<bool>(const Label&)>& win) {
    add_classical("score", 1, Side::client);
    const std::string s = q("score");
    for (auto& b : ens_.branches) {
        auto w = win(b.label);
        if (w) qsim::write_label(b, ens_.layout, s, *w ? "1" : "0");
    }
}

void Session::set_client(const std::string& name, const std::string& bits) {
    add_classical(name, static_cast<int>(bits.size()), Side::client);
    const std::string n = q(name);
    for (auto& b : ens_.branches) qsim::write_label(b, ens_.layout, n, bits);
}

std::string Session::client_value(const std::string& name) const {
    if (ens_.branches.empty()) return {};
    auto it = ens_.branches.front().label.find(q(name));
    if (it == ens_.branches.front().label.end()) throw ProtocolError("client register " + q(name) + " unset");
    return it->second;
}

void Session::receive(const std::string& server_reg, const std::string& client_reg) {
    const auto& e = ens_.layout.entry(q(server_reg));
    add_classical(client_reg, e.width, Side::client);
    const std::string src = q(server_reg), dst = q(client_reg);
    for (auto& b : ens_.branches) {
        auto it = b.label.find(src);
        if (it == b.label.end()) throw ProtocolError("server never answered in " + src);
        qsim::write_label(b, ens_.layout, dst, it->second);
    }
}

void Session::send(const std::string& name, const std::string& bits) {
    add_classical(name, static_cast<int>(bits.size()), Side::server);
    const std::string n = q(name);
    for (auto& b : ens_.branches) qsim::write_label(b, ens_.layout, n, bits);
}

void Session::send(const std::string& name, int width, const std::function<std::string(const Label&)>& fn) {
    compute(name, width, Side::server, fn);
}

void Session::record_round(const std::string& client_msg, const std::string& server_msg) {
    transcript_.append(client_msg, server_msg);
}

void Session::server_step(const std::string& tag, const std::string& client_msg, const ServerAction& honest,
                          const std::string& reply) {
    Step step{protocol_, scope_ + tag, round(), client_msg};
    ServerView view(*this);
    adversary_->act(step, view, honest);
    settle();
    std::string answer;
    if (!reply.empty()) {
        const std::string r = q(reply);
        for (std::size_t i = 0; i < ens_.branches.size(); ++i) {
            auto it = ens_.branches[i].label.find(r);
            std::string v = it == ens_.branches[i].label.end() ? std::string("<none>") : it->second;
            if (i == 0) answer = v;
            else if (v != answer) {
                answer = "<branched:" + r + ">";
                break;
            }
        }
    }
    record_round(client_msg, answer);
}

ProtocolOutcome Session::finish(const std::vector<std::string>& description_regs, bool scored) {
    settle();
    ProtocolOutcome out;
    out.flag = Flag::pass;
    for (const auto& b : ens_.branches)
        if (!passes(b.label)) out.flag = Flag::fail;
    if (ens_.branches.empty()) out.flag = Flag::fail;
    const qsim::PureBranch* top = nullptr;
    for (const auto& b : ens_.branches)
        if (!top || b.weight > top->weight) top = &b;
    if (scored) {
        out.score = Score::bottom;
        if (top) {
            auto it = top->label.find("score");
            if (it != top->label.end()) out.score = it->second == "1" ? Score::win : Score::lose;
        }
    }
    if (top)
        for (const auto& d : description_regs) {
            auto it = top->label.find(d);
            if (it != top->label.end()) out.client_descriptions[d] = it->second;
        }
    out.final_state = std::move(ens_);
    out.transcript = std::move(transcript_);
    return out;
}

// ---------------------------------------------------------------- server view

ServerView::ServerView(Session& s, std::string error_kind) : s_(s), kind_(std::move(error_kind)) {}

void ServerView::require_server(const std::string& reg) const {
    const auto& e = s_.ens().layout.entry(reg);
    if (e.side == Side::server) return;
    if (flag_write_ && (reg == "flag" || reg.ends_with("/flag"))) return;
    if (kind_ == "simulator") throw SimulatorTouchesClientRegisters("simulator touched client register " + reg);
    throw AdversaryLocalityError(kind_ + " touched client register " + reg);
}

void ServerView::add_quantum(const std::string& name, int width) { s_.add_quantum(name, width, Side::server); }

void ServerView::add_classical(const std::string& name, int width) { s_.add_classical(name, width, Side::server); }

void ServerView::apply(const std::vector<std::pair<std::string, int>>& qubits, const qsim::Matrix& gate) {
    std::vector<int> idx;
    for (const auto& [reg, i] : qubits) {
        require_server(q(reg));
        idx.push_back(layout().qubit(q(reg), i));
    }
    s_.ens() = qsim::apply_unitary(std::move(s_.ens()), idx, gate);
}

void ServerView::apply_map(const std::vector<std::string>& regs, const qsim::BasisMap& map) {
    qsim::BasisIndex allowed = 0;
    for (const auto& r : regs) {
        require_server(q(r));
        for (int qb : layout().qubits(q(r))) allowed |= qsim::BasisIndex{1} << qb;
    }
    // the map only sees server-side labels
    std::map<const Label*, Label> visible;
    const qsim::RegisterLayout lay = layout();
    qsim::BasisMap wrapped = [&](const Label& full, qsim::BasisIndex i) {
        auto it = visible.find(&full);
        if (it == visible.end()) {
            Label v;
            for (const auto& [k, val] : full)
                if (lay.contains(k) && lay.entry(k).side == Side::server) v[k] = val;
            it = visible.emplace(&full, std::move(v)).first;
        }
        auto r = map(it->second, i);
        if ((r.first ^ i) & ~allowed) throw AdversaryLocalityError(kind_ + " map changed qubits outside its registers");
        return r;
    };
    // maps may read the layout while the ensemble is moved out
    CqEnsemble e = std::move(s_.ens());
    s_.ens().layout = lay;
    s_.ens() = qsim::apply_basis_map(std::move(e), wrapped);
}

void ServerView::measure(const std::vector<std::pair<std::string, int>>& qubits, qsim::Basis basis,
                         const std::string& record_into) {
    std::vector<int> idx;
    for (const auto& [reg, i] : qubits) {
        require_server(q(reg));
        idx.push_back(layout().qubit(q(reg), i));
    }
    if (layout().contains(q(record_into))) require_server(q(record_into));
    auto* sampler = s_.mode() == ExecMode::sample ? &s_.nature_rng() : nullptr;
    s_.ens() = qsim::measure_basis(std::move(s_.ens()), idx, basis, q(record_into), sampler);
    s_.settle();
}

void ServerView::measure_register(const std::string& reg, qsim::Basis basis, const std::string& record_into) {
    std::vector<std::pair<std::string, int>> qs;
    for (int i = 0; i < layout().entry(q(reg)).width; ++i) qs.emplace_back(reg, i);
    measure(qs, basis, record_into);
}

void ServerView::measure_parity(const std::vector<std::pair<std::string, int>>& qubits,
                                const std::string& record_into) {
    std::vector<int> idx;
    for (const auto& [reg, i] : qubits) {
        require_server(q(reg));
        idx.push_back(layout().qubit(q(reg), i));
    }
    if (layout().contains(q(record_into))) require_server(q(record_into));
    auto* sampler = s_.mode() == ExecMode::sample ? &s_.nature_rng() : nullptr;
    s_.ens() = qsim::measure_parity(std::move(s_.ens()), idx, q(record_into), sampler);
    s_.settle();
}

void ServerView::discard(const std::string& reg) {
    require_server(q(reg));
    s_.discard(reg);
}

void ServerView::reset(const std::string& reg) {
    require_server(q(reg));
    int w = layout().entry(q(reg)).width;
    s_.discard(reg);
    s_.add_quantum(reg, w, Side::server);
}

void ServerView::replace(const std::string& reg, const qsim::SparseState& local) {
    require_server(q(reg));
    int w = layout().entry(q(reg)).width;
    s_.discard(reg);
    s_.add_quantum_state(reg, w, local, Side::server);
}

void ServerView::compute(const std::string& target, int width, const std::vector<std::string>& inputs,
                         const std::function<std::string(const std::vector<std::string>&)>& fn) {
    std::vector<std::string> qn;
    for (const auto& i : inputs) {
        require_server(q(i));
        qn.push_back(q(i));
    }
    if (layout().contains(q(target))) require_server(q(target));
    s_.compute(target, width, Side::server, [&](const Label& l) {
        std::vector<std::string> vals;
        for (const auto& n : qn) {
            auto it = l.find(n);
            if (it == l.end()) throw ProtocolError("server register " + n + " unset");
            vals.push_back(it->second);
        }
        return fn(vals);
    });
}

std::string ServerView::read_message(const std::string& name) const {
    require_server(q(name));
    if (s_.ens().branches.empty()) return {};
    auto it = s_.ens().branches.front().label.find(q(name));
    if (it == s_.ens().branches.front().label.end()) throw ProtocolError("no message " + q(name));
    return it->second;
}

void ServerView::flag_fail() {
    if (!flag_write_) require_server(s_.flag_register());
    s_.fail();
}

// ---------------------------------------------------------------- runs

ProtocolOutcome run(const std::string& protocol_id, const Program& body, const Adversary& adversary,
                    CqEnsemble initial, RunOptions opts, const std::vector<std::string>& description_regs,
                    bool scored) {
    if (!adversary.applies_to(protocol_id))
        throw InapplicableProtocol(adversary.name() + " does not apply to " + protocol_id);
    Session s(std::move(initial), opts.seed, opts.mode, adversary, protocol_id);
    s.init_flag();
    if (body) body(s);
    return s.finish(description_regs, scored);
}

CqEnsemble project_pass(const ProtocolOutcome& out) {
    return qsim::select_branches(out.final_state, [](const Label& l) { return passes(l); });
}

double compare_to_simulated(const CqEnsemble& real_pass, const CqEnsemble& target, const ServerAction& simulator,
                            const CqEnsemble& initial, const std::vector<std::string>& visible) {
    CqEnsemble start = qsim::tensor(target, initial);
    Session s(std::move(start), 0, ExecMode::branch, honest_adversary(), "simulator");
    s.init_flag();
    ServerView view(s, "simulator");
    view.allow_flag_write(true);
    if (simulator) simulator(view);
    CqEnsemble sim = qsim::select_branches(s.ens(), [](const Label& l) { return passes(l); });
    return qsim::trace_distance(real_pass, sim, visible);
}

bool transcripts_agree(const Transcript& a, const Transcript& b, std::size_t rounds) {
    if (a.size() < rounds || b.size() < rounds) return false;
    for (std::size_t i = 0; i < rounds; ++i)
        if (encode_message({a.rounds()[i].first}) != encode_message({b.rounds()[i].first})) return false;
    return true;
}

}  // namespace rspv
