#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "rspv/experiments.hpp"

namespace {

std::string default_out_dir() {
    const char* env = std::getenv("RSPV_OUT_DIR");
    return env && *env ? env : ".";
}

void print_summary(const rspv::stats::ExperimentReport& r) {
    std::printf("%-28s %-18s %-22s %8s %10s %9s  [%.4f, %.4f]%s\n", "experiment", "protocol", "adversary", "trials",
                "successes", "estimate", r.interval.lo, r.interval.hi, "");
    std::printf("%-28s %-18s %-22s %8ld %10ld %9.5f\n", r.experiment.c_str(), r.protocol.c_str(), r.adversary.c_str(),
                r.trials, r.successes, r.estimate);
    if (r.gated)
        std::printf("gate [%.5f, %.5f]: %s\n", r.expect_lo, r.expect_hi, r.within_gate() ? "pass" : "FAIL");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RSPV simulation lab: batch runner"};
    app.require_subcommand(1);
    std::string config_path, report_path, out;
    long trials = 0;
    long long seed = -1;
    int workers = 0;

    auto* run = app.add_subcommand("run", "run an experiment config");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("--seed", seed, "override the seed");
    run->add_option("--trials", trials, "override the trial count");
    run->add_option("--workers", workers, "worker threads");
    run->add_option("--out", out, "report path (default: $RSPV_OUT_DIR/<name>.json)");

    app.add_subcommand("list-protocols", "list registered protocols");
    app.add_subcommand("list-adversaries", "list registered strategies");

    auto* rep = app.add_subcommand("replay", "re-run a report and compare counts");
    rep->add_option("report", report_path, "report file")->required();
    rep->add_option("--workers", workers, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand("list-protocols")) {
            std::cout << rspv::exp::list_protocols(rspv::exp::default_registry());
            return 0;
        }
        if (app.got_subcommand("list-adversaries")) {
            std::cout << rspv::exp::list_adversaries();
            return 0;
        }
        if (app.got_subcommand("run")) {
            auto c = rspv::exp::load_config(config_path);
            if (seed >= 0) c.seed = static_cast<std::uint64_t>(seed);
            if (trials > 0) c.trials = trials;
            if (workers > 0) c.workers = workers;
            auto r = rspv::exp::run_experiment(c);
            std::string path = !out.empty()            ? out
                               : !c.output.empty()     ? c.output
                                                       : (std::filesystem::path(default_out_dir()) / (c.name + ".json")).string();
            std::ofstream f(path);
            if (!f) throw std::runtime_error("cannot write " + path);
            f << rspv::stats::to_json(r).dump(2) << "\n";
            print_summary(r);
            std::printf("report: %s\n", path.c_str());
            return r.within_gate() ? 0 : 2;
        }
        if (app.got_subcommand("replay")) {
            std::ifstream f(report_path);
            if (!f) throw rspv::stats::ReportParse("cannot read " + report_path);
            nlohmann::json j;
            try {
                f >> j;
            } catch (const nlohmann::json::exception& e) {
                throw rspv::stats::ReportParse(std::string("malformed report: ") + e.what());
            }
            auto r = rspv::stats::report_from_json(j);
            if (r.code_version != rspv::stats::kCodeVersion)
                std::fprintf(stderr, "warning: report from '%s', this build is '%s'; comparing anyway\n",
                             r.code_version.c_str(), rspv::stats::kCodeVersion);
            auto res = rspv::exp::replay(r);
            std::printf("recorded %ld, replayed %ld: %s\n", res.recorded, res.replayed, res.match ? "match" : "MISMATCH");
            return res.match ? 0 : 2;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
