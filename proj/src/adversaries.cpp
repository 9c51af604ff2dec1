#include "rspv/adversaries.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "rspv/amplification.hpp"
#include "rspv/hamiltonian.hpp"

namespace rspv::adv {

namespace {

using Intercept = std::function<bool(const Step&)>;
using Act = std::function<void(const Step&, ServerView&, const ServerAction&)>;

class RuleAdversary final : public Adversary {
public:
    RuleAdversary(std::string name, std::vector<std::string> protocols, Intercept intercept, Act act)
        : name_(std::move(name)), protocols_(protocols.begin(), protocols.end()), intercept_(std::move(intercept)),
          act_(std::move(act)) {}

    std::string name() const override { return name_; }
    bool applies_to(std::string_view protocol) const override {
        return protocols_.count("*") || protocols_.count(std::string(protocol));
    }
    bool intercepts(const Step& step) const override { return intercept_(step); }
    void act(const Step& step, ServerView& view, const ServerAction& honest) const override {
        if (intercept_(step))
            act_(step, view, honest);
        else
            honest(view);
    }

private:
    std::string name_;
    std::set<std::string> protocols_;
    Intercept intercept_;
    Act act_;
};

const std::vector<std::string> kMultiBlockFamily = {"kp", "multi_block_comp", "multi_block_test", "qfac_comp",
                                                    "qfac_test"};
const std::vector<std::string> kQfac = {"qfac_comp", "qfac_test"};

// Last server step of each protocol.
const std::map<std::string, std::string>& final_tags() {
    static const std::map<std::string, std::string> m = {
        {"kp", "kp.transform"},           {"multi_block_comp", "multiblock.xor"},
        {"multi_block_test", "multiblock.reveal"}, {"one_block", "one_block.select"},
        {"one_block_tensor", "one_block.select"},  {"qfac_comp", "qfac.hmeasure"},
        {"qfac_test", "qfac.measure"},    {"qubit_test", "qt.measure"},
    };
    return m;
}

std::vector<std::string> keys_of(const std::map<std::string, std::string>& m) {
    std::vector<std::string> k;
    for (const auto& [a, b] : m) k.push_back(a);
    return k;
}

std::string param(const Params& p, const std::string& key, const std::string& fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

int int_param(const Params& p, const std::string& key, int fallback) {
    const std::string v = param(p, key, std::to_string(fallback));
    try {
        std::size_t used = 0;
        int r = std::stoi(v, &used);
        if (used != v.size()) throw BadParameter(key + " must be an integer");
        return r;
    } catch (const std::logic_error&) {
        throw BadParameter(key + " must be an integer");
    }
}

// Parity reports for blocks 2..n against block 1, as the honest server does.
std::vector<std::string> measure_parities(ServerView& v) {
    int n = 0;
    while (v.layout().contains(v.q("b" + std::to_string(n + 1) + "/Q"))) ++n;
    const int m = v.layout().entry(v.q("b1/Q")).width;
    std::vector<std::string> xs;
    for (int i = 2; i <= n; ++i) {
        std::vector<std::pair<std::string, int>> qs;
        for (int t = 0; t < m; ++t) qs.emplace_back("b1/Q", t);
        for (int t = 0; t < m; ++t) qs.emplace_back("b" + std::to_string(i) + "/Q", t);
        xs.push_back("xp" + std::to_string(i));
        v.measure_parity(qs, xs.back());
    }
    return xs;
}

int block_count(const ServerView& v) {
    int n = 0;
    while (v.layout().contains(v.q("b" + std::to_string(n + 1) + "/Q"))) ++n;
    return n;
}

void reset_scope(ServerView& v) {
    const std::string pre = v.q("");
    std::vector<std::string> regs;
    for (const auto& e : v.layout().entries())
        if (e.kind == qsim::RegKind::quantum && e.side == qsim::Side::server && e.name.rfind(pre, 0) == 0)
            regs.push_back(e.name.substr(pre.size()));
    for (const auto& r : regs) v.reset(r);
}

qsim::SparseState tiled_state(const std::string& letters, int width) {
    std::string spec;
    for (int i = 0; i < width; ++i) spec.push_back(letters[static_cast<std::size_t>(i) % letters.size()]);
    return ham::product_state(spec);
}

using Factory = std::function<std::shared_ptr<const Adversary>(const Params&)>;

struct Entry {
    StrategyDescriptor desc;
    Factory make;
};

const std::vector<Entry>& registry() {
    static const std::vector<Entry> r = [] {
        std::vector<Entry> e;
        e.push_back({{"constant-answer", {"qfac_test", "qubit_test"}, {{"r", "0", "reported outcome bit"}},
                      "answers the final measurement with a fixed bit"},
                     [](const Params& p) {
                         const int r = int_param(p, "r", 0);
                         if (r != 0 && r != 1) throw BadParameter("r must be 0 or 1");
                         return std::make_shared<RuleAdversary>(
                             "constant-answer(" + std::to_string(r) + ")",
                             std::vector<std::string>{"qfac_test", "qubit_test"},
                             [](const Step& s) { return tag_is(s.tag, "qfac.measure") || tag_is(s.tag, "qt.measure"); },
                             [r](const Step&, ServerView& v, const ServerAction&) {
                                 v.compute("r", 1, {}, [r](const std::vector<std::string>&) { return r ? "1" : "0"; });
                             });
                     }});
        e.push_back({{"discard-at-end", keys_of(final_tags()), {}, "acts honestly, then resets its quantum registers"},
                     [](const Params&) {
                         return std::make_shared<RuleAdversary>(
                             "discard-at-end", keys_of(final_tags()),
                             [](const Step& s) {
                                 auto it = final_tags().find(s.protocol);
                                 return it != final_tags().end() && tag_is(s.tag, it->second);
                             },
                             [](const Step&, ServerView& v, const ServerAction& honest) {
                                 honest(v);
                                 reset_scope(v);
                             });
                     }});
        e.push_back({{"honest", {"*"}, {}, "follows the protocol"},
                     [](const Params&) { return std::shared_ptr<const Adversary>(&honest_adversary(), [](auto*) {}); }});
        e.push_back({{"lazy-parity", kMultiBlockFamily, {}, "reports random xor bits without measuring"},
                     [](const Params&) {
                         return std::make_shared<RuleAdversary>(
                             "lazy-parity", kMultiBlockFamily, [](const Step& s) { return tag_is(s.tag, "multiblock.xor"); },
                             [](const Step&, ServerView& v, const ServerAction&) {
                                 const int n = block_count(v);
                                 std::string bits;
                                 std::bernoulli_distribution coin(0.5);
                                 for (int i = 2; i <= n; ++i) bits.push_back(coin(v.rng()) ? '1' : '0');
                                 v.compute("xor", n - 1, {}, [bits](const std::vector<std::string>&) { return bits; });
                             });
                     }});
        e.push_back({{"measure-early", kQfac, {}, "measures the key register in Z before the phase step"},
                     [](const Params&) {
                         return std::make_shared<RuleAdversary>(
                             "measure-early", kQfac, [](const Step& s) { return tag_is(s.tag, "qfac.phase"); },
                             [](const Step&, ServerView& v, const ServerAction& honest) {
                                 v.measure_register("K", qsim::Basis::z(), "early");
                                 honest(v);
                             });
                     }});
        e.push_back({{"parity-liar", kMultiBlockFamily, {}, "measures the xor honestly and reports it flipped"},
                     [](const Params&) {
                         return std::make_shared<RuleAdversary>(
                             "parity-liar", kMultiBlockFamily, [](const Step& s) { return tag_is(s.tag, "multiblock.xor"); },
                             [](const Step&, ServerView& v, const ServerAction&) {
                                 auto xs = measure_parities(v);
                                 v.compute("xor", static_cast<int>(xs.size()), xs, [](const std::vector<std::string>& vals) {
                                     std::string r;
                                     for (const auto& x : vals) r.push_back(x == "1" ? '0' : '1');
                                     return r;
                                 });
                             });
                     }});
        std::vector<std::string> phase_protocols = {"qfac_comp", "qfac_test", "qubit_test"};
        e.push_back({{"phase-offset", phase_protocols, {{"k", "1", "offset in eighths of 2 pi"}},
                      "turns the output into |+_(theta+k)>"},
                     [phase_protocols](const Params& p) {
                         const int k = ((int_param(p, "k", 1) % 8) + 8) % 8;
                         return std::make_shared<RuleAdversary>(
                             "phase-offset(" + std::to_string(k) + ")", phase_protocols,
                             [](const Step& s) { return tag_is(s.tag, "qfac.hmeasure") || tag_is(s.tag, "qt.deliver"); },
                             [k](const Step& s, ServerView& v, const ServerAction& honest) {
                                 honest(v);
                                 const std::string reg = tag_is(s.tag, "qt.deliver") ? s.client_message : "q";
                                 v.apply({{reg, 0}}, qsim::phase_gate(k));
                             });
                     }});
        std::vector<std::string> deliver_protocols = {"energy_test", "kp",        "multi_block_comp", "multi_block_test",
                                                      "one_block",   "one_block_tensor", "qfac_comp", "qfac_test",
                                                      "qubit_test"};
        e.push_back({{"state-replacer", deliver_protocols, {{"state", "0", "letters over 0, 1, +, - (tiled)"}},
                      "swaps every delivered state for a fixed product state"},
                     [deliver_protocols](const Params& p) {
                         const std::string st = param(p, "state", "0");
                         if (st.empty() || st.find_first_not_of("01+-") != std::string::npos)
                             throw BadParameter("state letters must be 0, 1, + or -");
                         return std::make_shared<RuleAdversary>(
                             "state-replacer(" + st + ")", deliver_protocols,
                             [](const Step& s) {
                                 return tag_is(s.tag, "bb84.deliver") || tag_is(s.tag, "qt.deliver") ||
                                        tag_is(s.tag, "energy.witness");
                             },
                             [st](const Step& s, ServerView& v, const ServerAction& honest) {
                                 honest(v);
                                 const std::string reg = s.client_message;
                                 v.replace(reg, tiled_state(st, v.layout().entry(v.q(reg)).width));
                             });
                     }});
        e.push_back({{"win-deficit", {"scored_amplifier"}, {{"d", "0.1", "win-rate deficit against the honest rate"}},
                      "flips a fraction of its scored answers"},
                     [](const Params& p) {
                         double d = 0;
                         try {
                             d = std::stod(param(p, "d", "0.1"));
                         } catch (const std::logic_error&) {
                             throw BadParameter("d must be a number");
                         }
                         // flipping with probability q moves the win rate from opt to opt - q(2 opt - 1)
                         const double q = d / (2 * amp::kOpt - 1);
                         if (!(q >= 0 && q <= 1)) throw BadParameter("d out of range");
                         return std::make_shared<RuleAdversary>(
                             "win-deficit(" + param(p, "d", "0.1") + ")", std::vector<std::string>{"scored_amplifier"},
                             [](const Step& s) { return tag_is(s.tag, "stub.answer"); },
                             [q](const Step&, ServerView& v, const ServerAction&) {
                                 const bool flip = std::bernoulli_distribution(q)(v.rng());
                                 v.compute("r", 1, {"hint"}, [flip](const std::vector<std::string>& in) {
                                     return flip ? std::string(in.at(0) == "1" ? "0" : "1") : in.at(0);
                                 });
                             });
                     }});
        std::sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) { return a.desc.name < b.desc.name; });
        return e;
    }();
    return r;
}

}  // namespace

bool tag_is(const std::string& step_tag, const std::string& tag) {
    return step_tag == tag || (step_tag.size() > tag.size() && step_tag.ends_with(tag) &&
                               step_tag[step_tag.size() - tag.size() - 1] == '/');
}

const std::vector<StrategyDescriptor>& descriptors() {
    static const std::vector<StrategyDescriptor> d = [] {
        std::vector<StrategyDescriptor> out;
        for (const auto& e : registry()) out.push_back(e.desc);
        return out;
    }();
    return d;
}

const StrategyDescriptor& descriptor(const std::string& name) {
    for (const auto& d : descriptors())
        if (d.name == name) return d;
    throw UnknownStrategy("unknown strategy " + name);
}

std::shared_ptr<const Adversary> make_adversary(const std::string& name, const Params& params) {
    for (const auto& e : registry()) {
        if (e.desc.name != name) continue;
        for (const auto& [k, v] : params) {
            bool known = false;
            for (const auto& ps : e.desc.params) known = known || ps.name == k;
            if (!known) throw BadParameter(name + " has no parameter " + k);
        }
        return e.make(params);
    }
    throw UnknownStrategy("unknown strategy " + name);
}

void require_applicable(const Adversary& a, const std::string& protocol) {
    if (!a.applies_to(protocol)) throw InapplicableProtocol(a.name() + " does not apply to " + protocol);
}

}  // namespace rspv::adv
