#include "rspv/experiments.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rspv/amplification.hpp"
#include "rspv/hamiltonian.hpp"
#include "rspv/protocols.hpp"
#include "rspv/qubit_test.hpp"

namespace rspv::exp {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

const std::string& get(const std::map<std::string, std::string>& m, const std::string& k, const std::string& fallback) {
    auto it = m.find(k);
    return it == m.end() ? fallback : it->second;
}

long to_long(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        long r = std::stol(v, &used);
        if (used == v.size()) return r;
    } catch (const std::logic_error&) {
    }
    throw ConfigParse(key + ": expected an integer, got '" + v + "'");
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double r = std::stod(v, &used);
        if (used == v.size()) return r;
    } catch (const std::logic_error&) {
    }
    throw ConfigParse(key + ": expected a number, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigParse(key + ": expected true or false, got '" + v + "'");
}

// Typed reads from the [params] section with defaults.
struct P {
    const std::map<std::string, std::string>& m;
    int i(const std::string& k, int d) const { return m.count(k) ? static_cast<int>(to_long(k, m.at(k))) : d; }
    long l(const std::string& k, long d) const { return m.count(k) ? to_long(k, m.at(k)) : d; }
    double f(const std::string& k, double d) const { return m.count(k) ? to_double(k, m.at(k)) : d; }
    bool b(const std::string& k, bool d) const { return m.count(k) ? to_bool(k, m.at(k)) : d; }
    std::string s(const std::string& k, const std::string& d) const { return m.count(k) ? m.at(k) : d; }
};

proto::Profile profile_of(const ExperimentConfig& c) {
    if (c.profile == "paper") return proto::Profile::paper;
    if (c.profile == "scaled") return proto::Profile::scaled;
    throw ConfigParse("profile must be paper or scaled");
}

proto::MultiBlockParams multi_block_params(const ExperimentConfig& c) {
    P p{c.params};
    proto::MultiBlockParams mb{p.i("m", 4), p.i("n", 2), p.f("eps", 0.5), p.i("kappa", 8), profile_of(c)};
    if (mb.m < 2 || mb.n < 1 || mb.kappa < 1) throw ConfigParse("multi_block needs m >= 2, n >= 1, kappa >= 1");
    if (mb.profile == proto::Profile::paper && !proto::multi_block_precondition(mb))
        throw ConfigParse("paper profile requires eps > 11n/sqrt(m)");
    return mb;
}

proto::KpParams kp_params(const ExperimentConfig& c, int default_n = 2) {
    P p{c.params};
    proto::KpParams k;
    k.n = p.i("n", default_n);
    k.eps = p.f("eps", 0.5);
    k.kappa = p.i("kappa", 8);
    k.profile = profile_of(c);
    k.m0 = p.i("m0", 4);
    k.amplify = p.b("amplify", true);
    k.amp.rounds = p.l("rounds", 2);
    k.amp.p_test = p.f("p_test", 0.5);
    if (k.n < 1) throw ConfigParse("kp needs n >= 1");
    if (k.m0 < 2 || (k.m0 & (k.m0 - 1)) != 0) throw ConfigParse("m0 must be a power of two, at least 2");
    if (k.amp.rounds < 1 || !(k.amp.p_test >= 0 && k.amp.p_test < 1))
        throw ConfigParse("amplifier needs rounds >= 1 and p_test in [0,1)");
    return k;
}

proto::QfacParams qfac_params(const ExperimentConfig& c) {
    proto::QfacParams q{kp_params(c, 3), proto::DRule::tail_zero};
    const std::string rule = P{c.params}.s("rule", "tail_zero");
    if (rule == "zero_only")
        q.rule = proto::DRule::zero_only;
    else if (rule != "tail_zero")
        throw ConfigParse("rule must be tail_zero or zero_only");
    if (q.kp.n < 2 || (q.rule == proto::DRule::tail_zero && q.kp.n < 3))
        throw ConfigParse("qfac needs n >= 3 (n >= 2 with zero_only)");
    return q;
}

bool passed(const ProtocolOutcome& o) { return o.flag == Flag::pass; }

std::vector<adv::ParamSpec> kp_schema() {
    return {{"n", "2", "key width"},       {"eps", "0.5", "target error"}, {"kappa", "8", "security parameter"},
            {"m0", "4", "block width (scaled)"}, {"amplify", "true", "cut-and-choose stage"},
            {"rounds", "2", "amplifier rounds"}, {"p_test", "0.5", "amplifier test probability"}};
}

Registry build_registry() {
    Registry r;
    r.push_back({"energy_test", "two-mode energy test for an XZ Hamiltonian", "accept",
                 {{"hamiltonian", "-1 ZZ", "terms separated by ';'"},
                  {"hamiltonian_file", "", "term file, overrides hamiltonian"},
                  {"a", "-1", "yes threshold"},
                  {"b", "-0.5", "no threshold"},
                  {"kappa", "1", "security parameter"},
                  {"K", "200", "rounds (scaled)"},
                  {"witness", "00", "product witness over 0, 1, +, -"}},
                 [](const ExperimentConfig& c, std::shared_ptr<const Adversary> a) -> TrialFn {
                     P p{c.params};
                     ham::EnergyParams e;
                     std::string text = p.s("hamiltonian", "-1 ZZ");
                     std::replace(text.begin(), text.end(), ';', '\n');
                     e.h = p.s("hamiltonian_file", "").empty() ? ham::XZHamiltonian::parse(text)
                                                              : ham::XZHamiltonian::load(p.s("hamiltonian_file", ""));
                     e.a = p.f("a", -1);
                     e.b = p.f("b", -0.5);
                     e.kappa = p.i("kappa", 1);
                     e.K = p.i("K", 200);
                     e.paper_profile = c.profile == "paper";
                     if (!(e.b > e.a) || e.K < 1) throw ConfigParse("energy_test needs b > a and K >= 1");
                     const std::string w = p.s("witness", std::string(static_cast<std::size_t>(e.h.n), '0'));
                     if (static_cast<int>(w.size()) != e.h.n) throw ConfigParse("witness width differs from the Hamiltonian");
                     auto witness = ham::product_state(w);
                     return [e, witness, a](std::uint64_t seed) {
                         return ham::run_energy_test(e, witness, *a, seed).record.accept;
                     };
                 }});
    r.push_back({"kp", "key-pair preparation over amplified MultiBlock", "pass", kp_schema(),
                 [](const ExperimentConfig& c, std::shared_ptr<const Adversary> a) -> TrialFn {
                     auto k = kp_params(c);
                     return [k, a](std::uint64_t seed) { return passed(proto::run_kp(k, *a, seed)); };
                 }});
    std::vector<adv::ParamSpec> mb = {{"m", "4", "block width"},
                                      {"n", "2", "blocks"},
                                      {"eps", "0.5", "target error"},
                                      {"kappa", "8", "security parameter"}};
    r.push_back({"multi_block_comp", "MultiBlock, computation mode", "pass", mb,
                 [](const ExperimentConfig& c, std::shared_ptr<const Adversary> a) -> TrialFn {
                     auto p = multi_block_params(c);
                     return [p, a](std::uint64_t seed) { return passed(proto::run_multi_block_comp(p, *a, seed)); };
                 }});
    r.push_back({"multi_block_test", "MultiBlock, test mode", "pass", mb,
                 [](const ExperimentConfig& c, std::shared_ptr<const Adversary> a) -> TrialFn {
                     auto p = multi_block_params(c);
                     return [p, a](std::uint64_t seed) { return passed(proto::run_multi_block_test(p, *a, seed)); };
                 }});
    r.push_back({"one_block", "OneBlock from ideal BB84 deliveries", "pass",
                 {{"m", "4", "block width"}, {"eps", "0.5", "target error"}, {"kappa", "8", "security parameter"}},
                 [](const ExperimentConfig& c, std::shared_ptr<const Adversary> a) -> TrialFn {
                     P p{c.params};
                     proto::OneBlockParams o{p.i("m", 4), p.f("eps", 0.5), p.i("kappa", 8), nullptr};
                     if (o.m < 2) throw ConfigParse("one_block needs m >= 2");
                     return [o, a](std::uint64_t seed) { return passed(proto::run_one_block(o, *a, seed)); };
                 }});
    r.push_back({"one_block_tensor", "n independent OneBlock runs", "pass", mb,
                 [](const ExperimentConfig& c, std::shared_ptr<const Adversary> a) -> TrialFn {
                     P p{c.params};
                     proto::TensorParams o{p.i("m", 4), p.i("n", 2), p.f("eps", 0.5), p.i("kappa", 8), nullptr};
                     if (o.m < 2 || o.n < 1) throw ConfigParse("one_block_tensor needs m >= 2 and n >= 1");
                     return [o, a](std::uint64_t seed) { return passed(proto::run_one_block_tensor(o, *a, seed)); };
                 }});
    auto qschema = kp_schema();
    qschema.front().default_value = "3";
    qschema.push_back({"rule", "tail_zero", "d rejection rule: tail_zero or zero_only"});
    r.push_back({"qfac_comp", "QFac, computation mode", "pass", qschema,
                 [](const ExperimentConfig& c, std::shared_ptr<const Adversary> a) -> TrialFn {
                     auto q = qfac_params(c);
                     return [q, a](std::uint64_t seed) { return passed(proto::run_qfac_comp(q, *a, seed)); };
                 }});
    r.push_back({"qfac_test", "QFac, scored test mode", "win", qschema,
                 [](const ExperimentConfig& c, std::shared_ptr<const Adversary> a) -> TrialFn {
                     auto q = qfac_params(c);
                     // score is kept apart from the flag: a rejected d still records win or lose
                     return [q, a](std::uint64_t seed) { return proto::run_qfac_test(q, *a, seed).score == Score::win; };
                 }});
    r.push_back({"scored_amplifier", "threshold amplifier over a scored stub round", "pass",
                 {{"rounds", "400", "rounds (scaled)"},
                  {"eps", "0.9", "target error"},
                  {"eps0", "0.3", "sub-protocol error"},
                  {"delta0", "1", "win-rate margin parameter"},
                  {"lambda", "0", "slack"},
                  {"kappa", "1", "security parameter (paper profile)"},
                  {"opt", "0.926776695", "honest win rate of the stub"}},
                 [](const ExperimentConfig& c, std::shared_ptr<const Adversary> a) -> TrialFn {
                     P p{c.params};
                     const auto prof = profile_of(c) == proto::Profile::paper ? amp::Profile::paper : amp::Profile::scaled;
                     amp::AmplifierParams ap;
                     try {
                         ap = amp::AmplifierParams::protocol3r(p.f("eps", 0.9), p.f("eps0", 0.3), p.f("delta0", 1),
                                                               p.f("lambda", 0), p.i("kappa", 1),
                                                               p.f("opt", amp::kOpt), prof, p.l("rounds", 400));
                     } catch (const amp::ParameterError& e) {
                         throw ConfigParse(e.what());
                     }
                     return [ap, a](std::uint64_t seed) { return passed(amp::run_scored_test(ap, *a, seed)); };
                 }});
    r.push_back({"qubit_test", "test of a qubit", "win",
                 {{"backend", "ideal", "ideal or toy-ntcf-demo"}, {"kappa", "3", "toy NTCF domain width"}},
                 [](const ExperimentConfig& c, std::shared_ptr<const Adversary> a) -> TrialFn {
                     P p{c.params};
                     const std::string b = p.s("backend", "ideal");
                     qt::Backend backend;
                     if (b == "ideal")
                         backend = qt::Backend::ideal;
                     else if (b == "toy-ntcf-demo")
                         backend = qt::Backend::toy_ntcf_demo;
                     else
                         throw ConfigParse("backend must be ideal or toy-ntcf-demo");
                     const int kappa = p.i("kappa", 3);
                     if (kappa < 2 || kappa > 12) throw ConfigParse("kappa must lie in [2, 12]");
                     return [backend, kappa, a](std::uint64_t seed) {
                         return qt::run_qubit_test(backend, *a, seed, kappa).score == Score::win;
                     };
                 }});
    std::sort(r.begin(), r.end(), [](const ProtocolEntry& x, const ProtocolEntry& y) { return x.id < y.id; });
    return r;
}

}  // namespace

Sections parse_sections(const std::string& text) {
    Sections out;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line;
        bool quoted = false;
        for (char ch : raw) {
            if (ch == '"') quoted = !quoted;
            if (ch == '#' && !quoted) break;
            line.push_back(ch);
        }
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigParse(where + "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ConfigParse(where + "empty section name");
            out[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigParse(where + "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigParse(where + "empty key");
        if (!value.empty() && value.front() == '"') {
            if (value.size() < 2 || value.back() != '"') throw ConfigParse(where + "unterminated string");
            value = value.substr(1, value.size() - 2);
        }
        if (out[section].count(key)) throw ConfigParse(where + "duplicate key " + key);
        out[section][key] = value;
    }
    return out;
}

ExperimentConfig parse_config(const std::string& text) {
    Sections s = parse_sections(text);
    for (const auto& [name, body] : s)
        if (name != "experiment" && name != "adversary" && name != "params" && name != "expect")
            throw ConfigParse("unknown section [" + name + "]");
    if (!s.count("experiment")) throw ConfigParse("missing [experiment] section");
    ExperimentConfig c;
    const auto& e = s["experiment"];
    static const std::string none;
    for (const auto& [k, v] : e)
        if (k != "name" && k != "protocol" && k != "trials" && k != "seed" && k != "workers" && k != "output" &&
            k != "profile")
            throw ConfigParse("unknown key experiment." + k);
    c.name = get(e, "name", none);
    c.protocol = get(e, "protocol", none);
    if (c.name.empty()) throw ConfigParse("experiment.name is required");
    if (c.protocol.empty()) throw ConfigParse("experiment.protocol is required");
    if (e.count("trials")) c.trials = to_long("trials", e.at("trials"));
    if (e.count("seed")) c.seed = static_cast<std::uint64_t>(to_long("seed", e.at("seed")));
    if (e.count("workers")) c.workers = static_cast<int>(to_long("workers", e.at("workers")));
    c.output = get(e, "output", none);
    c.profile = get(e, "profile", "scaled");
    if (c.trials < 1) throw ConfigParse("trials must be positive");
    if (s.count("adversary")) {
        for (const auto& [k, v] : s["adversary"]) {
            if (k == "name")
                c.adversary = v;
            else
                c.adversary_params[k] = v;
        }
    }
    if (s.count("params")) c.params = s["params"];
    if (s.count("expect")) {
        const auto& x = s["expect"];
        c.gated = true;
        c.expect_lo = x.count("lo") ? to_double("expect.lo", x.at("lo")) : 0.0;
        c.expect_hi = x.count("hi") ? to_double("expect.hi", x.at("hi")) : 1.0;
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigParse("cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

const Registry& default_registry() {
    static const Registry r = build_registry();
    return r;
}

const ProtocolEntry& find_protocol(const Registry& r, const std::string& id) {
    for (const auto& e : r)
        if (e.id == id) return e;
    throw UnknownProtocol("unknown protocol '" + id + "'");
}

std::string list_protocols(const Registry& r) {
    std::vector<const ProtocolEntry*> sorted;
    for (const auto& e : r) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });
    std::ostringstream o;
    for (const auto* e : sorted) {
        o << e->id << "  (" << e->summary << "; counts " << e->success << ")\n";
        for (const auto& p : e->params) o << "    " << p.name << " = " << p.default_value << "  # " << p.help << "\n";
    }
    return o.str();
}

std::string list_adversaries() {
    std::ostringstream o;
    for (const auto& d : adv::descriptors()) {
        o << d.name << "  (" << d.summary << ")\n    protocols:";
        for (const auto& p : d.protocols) o << " " << p;
        o << "\n";
        for (const auto& p : d.params) o << "    " << p.name << " = " << p.default_value << "  # " << p.help << "\n";
    }
    return o.str();
}

void validate(const ExperimentConfig& c, const Registry& r) {
    const auto& entry = find_protocol(r, c.protocol);
    auto a = adv::make_adversary(c.adversary, c.adversary_params);
    adv::require_applicable(*a, c.protocol);
    if (c.workers < 1) throw ConfigParse("workers must be positive");
    // building the trial checks the parameter constraints
    entry.make_trial(c, a);
}

std::map<std::string, std::string> echo(const ExperimentConfig& c) {
    std::map<std::string, std::string> e;
    e["experiment.protocol"] = c.protocol;
    e["experiment.profile"] = c.profile;
    e["adversary.name"] = c.adversary;
    for (const auto& [k, v] : c.adversary_params) e["adversary." + k] = v;
    for (const auto& [k, v] : c.params) e["params." + k] = v;
    return e;
}

ExperimentConfig config_from_echo(const std::string& experiment, const std::map<std::string, std::string>& e) {
    ExperimentConfig c;
    c.name = experiment;
    for (const auto& [k, v] : e) {
        const auto dot = k.find('.');
        if (dot == std::string::npos) throw stats::ReportParse("bad parameter key " + k);
        const std::string sec = k.substr(0, dot), key = k.substr(dot + 1);
        if (sec == "experiment" && key == "protocol")
            c.protocol = v;
        else if (sec == "experiment" && key == "profile")
            c.profile = v;
        else if (sec == "adversary" && key == "name")
            c.adversary = v;
        else if (sec == "adversary")
            c.adversary_params[key] = v;
        else if (sec == "params")
            c.params[key] = v;
        else
            throw stats::ReportParse("bad parameter key " + k);
    }
    if (c.protocol.empty()) throw stats::ReportParse("report lacks the protocol id");
    return c;
}

stats::ExperimentReport run_experiment(const ExperimentConfig& c, const Registry& r) {
    validate(c, r);
    const auto& entry = find_protocol(r, c.protocol);
    auto a = adv::make_adversary(c.adversary, c.adversary_params);
    auto trial = entry.make_trial(c, a);
    stats::ExperimentReport rep = stats::estimate_probability(trial, c.trials, c.seed, c.workers);
    rep.experiment = c.name;
    rep.protocol = c.protocol;
    rep.adversary = a->name();
    rep.parameters = echo(c);
    rep.gated = c.gated;
    rep.expect_lo = c.expect_lo;
    rep.expect_hi = c.expect_hi;
    return rep;
}

ReplayResult replay(const stats::ExperimentReport& report, const Registry& r) {
    ExperimentConfig c = config_from_echo(report.experiment, report.parameters);
    c.trials = report.trials;
    c.seed = report.seed;
    ReplayResult out;
    out.version_mismatch = report.code_version != stats::kCodeVersion;
    out.recorded = report.successes;
    out.replayed = run_experiment(c, r).successes;
    out.match = out.recorded == out.replayed;
    return out;
}

}  // namespace rspv::exp
