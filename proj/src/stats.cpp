#include "rspv/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include "rspv/protocol.hpp"

namespace rspv::stats {

using nlohmann::json;

double hoeffding_half_width(long n, double confidence) {
    if (n < 1) throw BadInput("need at least one trial");
    return std::sqrt(std::log(2.0 / (1.0 - confidence)) / (2.0 * static_cast<double>(n)));
}

Interval hoeffding_interval(double estimate, long n, double confidence) {
    const double h = hoeffding_half_width(n, confidence);
    return {std::max(0.0, estimate - h), std::min(1.0, estimate + h)};
}

json to_json(const ExperimentReport& r) {
    json j;
    j["experiment"] = r.experiment;
    j["protocol"] = r.protocol;
    j["adversary"] = r.adversary;
    j["seed"] = r.seed;
    j["trials"] = r.trials;
    j["successes"] = r.successes;
    j["estimate"] = r.estimate;
    j["interval"] = {{"lo", r.interval.lo}, {"hi", r.interval.hi}, {"confidence", kConfidence},
                     {"method", r.interval_method}};
    j["parameters"] = r.parameters;
    j["wall_seconds"] = r.wall_seconds;
    j["code_version"] = r.code_version;
    if (r.gated) j["gate"] = {{"lo", r.expect_lo}, {"hi", r.expect_hi}, {"passed", r.within_gate()}};
    return j;
}

ExperimentReport report_from_json(const json& j) {
    try {
        ExperimentReport r;
        r.experiment = j.at("experiment").get<std::string>();
        r.protocol = j.at("protocol").get<std::string>();
        r.adversary = j.at("adversary").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.trials = j.at("trials").get<long>();
        r.successes = j.at("successes").get<long>();
        r.estimate = j.at("estimate").get<double>();
        r.interval.lo = j.at("interval").at("lo").get<double>();
        r.interval.hi = j.at("interval").at("hi").get<double>();
        r.interval_method = j.at("interval").at("method").get<std::string>();
        r.parameters = j.at("parameters").get<std::map<std::string, std::string>>();
        r.wall_seconds = j.value("wall_seconds", 0.0);
        r.code_version = j.value("code_version", std::string());
        if (j.contains("gate")) {
            r.gated = true;
            r.expect_lo = j.at("gate").at("lo").get<double>();
            r.expect_hi = j.at("gate").at("hi").get<double>();
        }
        return r;
    } catch (const json::exception& e) {
        throw ReportParse(std::string("malformed report: ") + e.what());
    }
}

ExperimentReport estimate_probability(const Trial& trial, long n, std::uint64_t seed, int workers) {
    if (n < 1) throw BadInput("need at least one trial");
    const auto start = std::chrono::steady_clock::now();
    long successes = 0;
    if (workers <= 1) {
        for (long i = 0; i < n; ++i) successes += trial(derive_seed(seed, static_cast<std::uint64_t>(i))) ? 1 : 0;
    } else {
        std::vector<char> hits(static_cast<std::size_t>(n), 0);
#pragma omp parallel for schedule(dynamic, 16) num_threads(workers)
        for (long i = 0; i < n; ++i) hits[static_cast<std::size_t>(i)] = trial(derive_seed(seed, static_cast<std::uint64_t>(i)));
        for (char h : hits) successes += h ? 1 : 0;
    }
    ExperimentReport r;
    r.seed = seed;
    r.trials = n;
    r.successes = successes;
    r.estimate = static_cast<double>(successes) / static_cast<double>(n);
    r.interval = hoeffding_interval(r.estimate, n);
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

double chernoff_bound(double p, double K, double delta, Tail side) {
    if (!(p >= 0 && p <= 1) || !(K >= 0)) throw BadInput("need p in [0,1] and K >= 0");
    if (side == Tail::upper) {
        if (!(delta > 0)) throw BadDelta("upper tail needs delta > 0");
        return std::exp(-delta * delta * p * K / (2.0 + delta));
    }
    if (!(delta > 0 && delta < 1)) throw BadDelta("lower tail needs delta in (0,1)");
    return std::exp(-delta * delta * p * K / 2.0);
}

double markov_bound(double mean, double a) {
    if (!(mean >= 0) || !(a > 0)) throw BadInput("need mean >= 0 and a > 0");
    return std::min(1.0, mean / a);
}

}  // namespace rspv::stats
