#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace rspv::stats {

struct BadDelta : std::invalid_argument { using std::invalid_argument::invalid_argument; };
struct BadInput : std::invalid_argument { using std::invalid_argument::invalid_argument; };
struct ReportParse : std::runtime_error { using std::runtime_error::runtime_error; };

inline constexpr double kConfidence = 0.99;
inline constexpr const char* kCodeVersion = "rspv-lab 1.0";

struct Interval {
    double lo = 0;
    double hi = 1;
};

// sqrt(ln(2/alpha) / (2N)) with alpha = 1 - confidence
double hoeffding_half_width(long n, double confidence = kConfidence);
Interval hoeffding_interval(double estimate, long n, double confidence = kConfidence);

struct ExperimentReport {
    std::string experiment;
    std::string protocol;
    std::string adversary;
    std::uint64_t seed = 0;
    long trials = 0;
    long successes = 0;
    double estimate = 0;
    Interval interval;
    std::string interval_method = "hoeffding";
    std::map<std::string, std::string> parameters;
    double wall_seconds = 0;
    std::string code_version = kCodeVersion;
    // optional acceptance gate: estimate must lie in [expect_lo, expect_hi]
    bool gated = false;
    double expect_lo = 0;
    double expect_hi = 1;

    bool within_gate() const { return !gated || (estimate >= expect_lo && estimate <= expect_hi); }
};

nlohmann::json to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& j);  // throws ReportParse

// Trial i runs with seed derive_seed(seed, i).
using Trial = std::function<bool(std::uint64_t trial_seed)>;

// workers <= 1 runs serially; otherwise trials fan out over OpenMP threads.
// Counts do not depend on the worker count.
ExperimentReport estimate_probability(const Trial& trial, long n, std::uint64_t seed, int workers = 1);

enum class Tail { upper, lower };
// upper: e^{-d^2 pK/(2+d)}, d > 0; lower: e^{-d^2 pK/2}, d in (0,1)
double chernoff_bound(double p, double K, double delta, Tail side);
// min(1, mean / a)
double markov_bound(double mean, double a);

}  // namespace rspv::stats
