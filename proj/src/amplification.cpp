#include "rspv/amplification.hpp"

#include <cmath>

namespace rspv::amp {

using qsim::RegKind;

namespace {

CqEnsemble unit() { return CqEnsemble{qsim::RegisterLayout(qsim::kIndexBits), {{{}, 1.0, {{0, {1, 0}}}}}}; }

// Formula values are rounded up; the small slack keeps exact integers exact.
long ceil_rounds(double x) {
    if (!(x > 0) || !std::isfinite(x)) throw ParameterError("round count must be finite and positive");
    return static_cast<long>(std::ceil(x - 1e-9));
}

void require_gap(double eps, double eps0) {
    if (!(eps > eps0)) throw ParameterError("need eps > eps0");
}

std::string round_scope(long k) { return "r" + std::to_string(k); }

long uniform_index(std::mt19937_64& rng, long lo, long hi) {
    return std::uniform_int_distribution<long>(lo, hi)(rng);
}

}  // namespace

long protocol0_rounds(double eps, double eps0) {
    require_gap(eps, eps0);
    const double d = eps - eps0;
    return ceil_rounds(216.0 / (d * d * d));
}

long protocol1_rounds(double eps, double eps0, double delta) {
    require_gap(eps, eps0);
    if (!(delta > 0)) throw ParameterError("need delta > 0");
    const double d = eps - eps0;
    return ceil_rounds(512.0 / (delta * d * d * d));
}

double protocol1_test_prob(double eps, double eps0) {
    require_gap(eps, eps0);
    return (eps - eps0) / 8.0;
}

double protocol3r_margin(double eps, double eps0, double delta0, double lambda) {
    return delta0 * (eps - eps0) / 6.0 - lambda;
}

long protocol3r_rounds(double eps, double eps0, double delta0, double lambda, int kappa) {
    require_gap(eps, eps0);
    const double g = protocol3r_margin(eps, eps0, delta0, lambda);
    if (!(g > 0)) throw ParameterError("need lambda < delta0 (eps - eps0) / 6");
    return ceil_rounds(4.0 * kappa / (g * g * (eps - eps0)));
}

double protocol3r_threshold(double opt, double eps, double eps0, double delta0, double lambda, long rounds) {
    const double g = protocol3r_margin(eps, eps0, delta0, lambda);
    if (!(g > 0)) throw ParameterError("need lambda < delta0 (eps - eps0) / 6");
    return (opt - 0.5 * g) * static_cast<double>(rounds);
}

AmplifierParams AmplifierParams::protocol0(double eps, double eps0, Profile profile, long scaled_rounds) {
    AmplifierParams a;
    a.eps = eps;
    a.eps0 = eps0;
    a.profile = profile;
    const long paper = protocol0_rounds(eps, eps0);
    a.rounds = profile == Profile::paper ? paper : scaled_rounds;
    if (a.rounds < 1) throw ParameterError("scaled profile needs rounds >= 1");
    return a;
}

AmplifierParams AmplifierParams::protocol1(double eps, double eps0, double delta, Profile profile, long scaled_rounds,
                                           double scaled_p) {
    AmplifierParams a;
    a.eps = eps;
    a.eps0 = eps0;
    a.delta = delta;
    a.profile = profile;
    const long paper_rounds = protocol1_rounds(eps, eps0, delta);
    const double paper_p = protocol1_test_prob(eps, eps0);
    a.rounds = profile == Profile::paper ? paper_rounds : scaled_rounds;
    a.p_test = profile == Profile::paper ? paper_p : scaled_p;
    if (a.rounds < 1) throw ParameterError("scaled profile needs rounds >= 1");
    if (!(a.p_test > 0 && a.p_test < 1)) throw ParameterError("test probability must lie in (0,1)");
    return a;
}

AmplifierParams AmplifierParams::protocol3r(double eps, double eps0, double delta0, double lambda, int kappa,
                                            double opt, Profile profile, long scaled_rounds) {
    AmplifierParams a;
    a.eps = eps;
    a.eps0 = eps0;
    a.delta0 = delta0;
    a.lambda = lambda;
    a.kappa = kappa;
    a.opt = opt;
    a.profile = profile;
    const long paper = protocol3r_rounds(eps, eps0, delta0, lambda, kappa);
    a.rounds = profile == Profile::paper ? paper : scaled_rounds;
    if (a.rounds < 1) throw ParameterError("scaled profile needs rounds >= 1");
    a.threshold = protocol3r_threshold(opt, eps, eps0, delta0, lambda, a.rounds);
    return a;
}

void discard_scope(Session& s, const std::string& prefix) {
    const std::string full = s.q(prefix);
    std::vector<std::string> names;
    for (const auto& e : s.ens().layout.entries()) {
        if (e.name.rfind(full, 0) != 0) continue;
        const std::string rest = e.name.substr(full.size());
        if (e.kind == RegKind::classical && (rest == "flag" || rest == "score")) continue;
        names.push_back(e.name);
    }
    auto* sampler = s.mode() == ExecMode::sample ? &s.nature_rng() : nullptr;
    for (const auto& n : names) s.ens() = qsim::discard(std::move(s.ens()), n, sampler);
}

int amplify_def32_to_def33(Session& s, const Program& sub, long rounds) {
    if (rounds < 1) throw ParameterError("need at least one round");
    const long pick = uniform_index(s.client_rng(), 1, rounds);
    for (long k = 1; k <= rounds; ++k) {
        {
            Session::Scope sc(s, round_scope(k));
            s.init_flag();
            sub(s);
        }
        if (k <= pick) s.absorb_flag(s.q(round_scope(k) + "/"));
        if (k != pick) discard_scope(s, round_scope(k) + "/");
    }
    s.record_round(encode_message({"select", std::to_string(pick)}), "");
    return static_cast<int>(pick);
}

void sequential_compose(Session& s, const std::vector<Program>& subs) {
    for (std::size_t j = 0; j < subs.size(); ++j) {
        const std::string sc_name = "s" + std::to_string(j + 1);
        try {
            Session::Scope sc(s, sc_name);
            s.init_flag();
            subs[j](s);
        } catch (const qsim::LayoutError& e) {
            throw RegisterClash(e.what());
        }
        s.absorb_flag(s.q(sc_name + "/"));
    }
}

int amplify_prersvp(Session& s, const TwoModeProtocol& p, long rounds, double p_test) {
    if (rounds < 1) throw ParameterError("need at least one round");
    if (!(p_test >= 0 && p_test < 1)) throw ParameterError("test probability must lie in [0,1)");
    std::vector<char> test(static_cast<std::size_t>(rounds));
    std::bernoulli_distribution coin(p_test);
    // a draw without any comp round is redrawn
    for (;;) {
        bool any_comp = false;
        for (auto& t : test) {
            t = coin(s.client_rng());
            any_comp = any_comp || !t;
        }
        if (any_comp) break;
    }
    std::vector<long> comps;
    for (long k = 1; k <= rounds; ++k)
        if (!test[static_cast<std::size_t>(k - 1)]) comps.push_back(k);
    const long pick = comps[static_cast<std::size_t>(uniform_index(s.client_rng(), 0, static_cast<long>(comps.size()) - 1))];
    for (long k = 1; k <= rounds; ++k) {
        {
            Session::Scope sc(s, round_scope(k));
            s.init_flag();
            (test[static_cast<std::size_t>(k - 1)] ? p.test : p.comp)(s);
        }
        s.absorb_flag(s.q(round_scope(k) + "/"));
        if (k != pick) discard_scope(s, round_scope(k) + "/");
    }
    s.compute("amp.modes", static_cast<int>(rounds), qsim::Side::client, [&](const Label&) {
        std::string m;
        for (char t : test) m.push_back(t ? '1' : '0');
        return m;
    });
    s.record_round(encode_message({"select", std::to_string(pick)}), "");
    return static_cast<int>(pick);
}

void amplify_scored_test(Session& s, const TwoModeProtocol& scored, long rounds, double threshold) {
    if (rounds < 1) throw ParameterError("need at least one round");
    std::vector<std::string> scores;
    for (long k = 1; k <= rounds; ++k) {
        {
            Session::Scope sc(s, round_scope(k));
            s.init_flag();
            scored.test(s);
            scores.push_back(s.score_register());
        }
        s.absorb_flag(s.q(round_scope(k) + "/"));
        discard_scope(s, round_scope(k) + "/");
    }
    s.check([&](const Label& l) {
        long wins = 0;
        for (const auto& r : scores) {
            auto it = l.find(r);
            if (it != l.end() && it->second == "1") ++wins;
        }
        return static_cast<double>(wins) >= threshold;
    });
}

int amplify_scored_comp(Session& s, const TwoModeProtocol& scored, long rounds) {
    if (rounds < 1) throw ParameterError("need at least one round");
    const long stop = uniform_index(s.client_rng(), 1, rounds);
    for (long k = 1; k <= stop; ++k) {
        {
            Session::Scope sc(s, round_scope(k));
            s.init_flag();
            (k < stop ? scored.test : scored.comp)(s);
        }
        s.absorb_flag(s.q(round_scope(k) + "/"));
        if (k < stop) discard_scope(s, round_scope(k) + "/");
    }
    return static_cast<int>(stop);
}

TwoModeProtocol amplify_scored(const TwoModeProtocol& scored, long rounds, double threshold) {
    TwoModeProtocol t;
    t.name = scored.name + "+threshold";
    t.test = [scored, rounds, threshold](Session& s) { amplify_scored_test(s, scored, rounds, threshold); };
    t.comp = [scored, rounds](Session& s) { amplify_scored_comp(s, scored, rounds); };
    t.scored = false;
    t.divergence = [](const Session& s) { return s.round(); };
    return t;
}

TwoModeProtocol scored_stub(double opt) {
    if (!(opt >= 0 && opt <= 1)) throw ParameterError("opt must lie in [0,1]");
    Program round = [opt](Session& s) {
        const int c = std::bernoulli_distribution(0.5)(s.client_rng());
        const bool right = std::bernoulli_distribution(opt)(s.nature_rng());
        s.set_client("secret", c ? "1" : "0");
        const std::string hint = (c == 1) == right ? "1" : "0";
        s.compute("hint", 1, qsim::Side::server, [hint](const Label&) { return hint; });
        s.server_step(
            "stub.answer", "hint",
            [](ServerView& v) {
                v.compute("r", 1, {"hint"}, [](const std::vector<std::string>& in) { return in.at(0); });
            },
            "r");
        s.receive("r", "r_c");
        const std::string sec = s.q("secret"), rc = s.q("r_c");
        s.set_score([=](const Label& l) -> std::optional<bool> { return l.at(rc) == l.at(sec); });
    };
    TwoModeProtocol t;
    t.name = "scored_stub";
    t.test = round;
    t.comp = round;
    t.scored = true;
    t.divergence = [](const Session& s) { return s.round(); };
    return t;
}

ProtocolOutcome run_scored_test(const AmplifierParams& a, const Adversary& adv, std::uint64_t seed) {
    const TwoModeProtocol stub = scored_stub(a.opt);
    return run(
        "scored_amplifier", [&](Session& s) { amplify_scored_test(s, stub, a.rounds, a.threshold); }, adv, unit(),
        {seed, ExecMode::sample});
}

ProtocolOutcome run_def32_to_def33(const Program& sub, const AmplifierParams& a, const Adversary& adv,
                                   std::uint64_t seed) {
    return run(
        "amplify_def32", [&](Session& s) { amplify_def32_to_def33(s, sub, a.rounds); }, adv, unit(),
        {seed, ExecMode::sample});
}

ProtocolOutcome run_prersvp(const TwoModeProtocol& p, const AmplifierParams& a, const Adversary& adv,
                            std::uint64_t seed, ExecMode mode) {
    return run(
        "amplify_prersvp", [&](Session& s) { amplify_prersvp(s, p, a.rounds, a.p_test); }, adv, unit(),
        {seed, mode});
}

// ---------------------------------------------------------------- ROAV -> RSPV

TwoModeProtocol compose_roav_rspv(const RoavPlan& plan) {
    plan.pi_test.validate();
    plan.pi_comp.validate();
    auto mode = [plan](bool test) {
        return [plan, test](Session& s) {
            const qsim::SparseState& st = test ? plan.test_state : plan.comp_state;
            const func::RoavSpec& spec = test ? plan.pi_test : plan.pi_comp;
            func::ideal_chosen_round(s, [&](Session& ss) { ss.add_quantum_state("roav.in", plan.width, st); });
            if (!s.has("roav.in")) return;
            std::vector<int> qs;
            for (int i : plan.measured) qs.push_back(s.ens().layout.qubit(s.q("roav.in"), i));
            auto* sampler = s.mode() == ExecMode::sample ? &s.nature_rng() : nullptr;
            s.ens() = func::ideal_roav_apply(spec, std::move(s.ens()), qs, s.q("roav.out"), sampler);
        };
    };
    TwoModeProtocol t;
    t.name = plan.name;
    t.test = mode(true);
    t.comp = mode(false);
    t.scored = false;
    t.divergence = [](const Session& s) { return s.round(); };
    return t;
}

}  // namespace rspv::amp
