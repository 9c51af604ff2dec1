#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rspv/adversaries.hpp"
#include "rspv/stats.hpp"

namespace rspv::exp {

struct ConfigParse : std::runtime_error { using std::runtime_error::runtime_error; };
struct UnknownProtocol : std::runtime_error { using std::runtime_error::runtime_error; };

// TOML-style text: "[section]" headers, "key = value" lines, '#' comments,
// values bare or double-quoted. Keys outside a section go to "".
using Sections = std::map<std::string, std::map<std::string, std::string>>;
Sections parse_sections(const std::string& text);

struct ExperimentConfig {
    std::string name;
    std::string protocol;
    std::string adversary = "honest";
    adv::Params adversary_params;
    std::string profile = "scaled";  // paper | scaled
    std::map<std::string, std::string> params;
    long trials = 1000;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string output;  // empty: "<name>.json" in the default directory
    bool gated = false;
    double expect_lo = 0;
    double expect_hi = 1;
};

// Sections: [experiment] name protocol trials seed workers output profile;
// [adversary] name plus strategy parameters; [params]; [expect] lo hi.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

using TrialFn = std::function<bool(std::uint64_t)>;

struct ProtocolEntry {
    std::string id;
    std::string summary;
    std::string success;  // what a trial counts
    std::vector<adv::ParamSpec> params;
    std::function<TrialFn(const ExperimentConfig&, std::shared_ptr<const Adversary>)> make_trial;
};

using Registry = std::vector<ProtocolEntry>;
const Registry& default_registry();  // sorted by id
const ProtocolEntry& find_protocol(const Registry& r, const std::string& id);  // throws UnknownProtocol

std::string list_protocols(const Registry& r);
std::string list_adversaries();

// Checks protocol, adversary, applicability and the scaled-profile constraints.
void validate(const ExperimentConfig& c, const Registry& r = default_registry());
stats::ExperimentReport run_experiment(const ExperimentConfig& c, const Registry& r = default_registry());

// Config fields echoed into the report so it can be replayed.
std::map<std::string, std::string> echo(const ExperimentConfig& c);
ExperimentConfig config_from_echo(const std::string& experiment, const std::map<std::string, std::string>& e);

struct ReplayResult {
    bool match = false;
    bool version_mismatch = false;
    long recorded = 0;
    long replayed = 0;
};
ReplayResult replay(const stats::ExperimentReport& report, const Registry& r = default_registry());

}  // namespace rspv::exp
