#pragma once

#include <json.hpp>

#include <map>

#include "srlab/engine.hpp"
#include "srlab/itrep.hpp"

namespace srlab {

// flat key/value run configuration; unknown keys are rejected
struct RunConfig {
    std::string engine = "gp"; // "gp" | "itea"
    std::uint64_t seed = 0;
    double test_fraction = 0.25;
    double validation_fraction = 0.25;
    bool standardize = false;
    EngineConfig gp;
    ITEAConfig itea;
    std::string digest; // of the effective configuration
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& rc); // defaults filled in
std::string fnv1a_hex(const std::string& s);

struct FitOutcome {
    nlohmann::json model;
    std::vector<GenerationLog> log;
    double r2_train = 0, r2_val = 0, r2_test = 0;
    double nmse_train = 0, nmse_val = 0, nmse_test = 0;
    double size = 0, complexity = 0;
    long runtime_ms = 0;
};

// split -> optional standardization -> evolve -> model document + metrics
FitOutcome run_fit(const RunConfig& rc, Dataset data);

// predictions of a stored model on a feature table (column-name matched,
// standardization replayed); used by cmd_predict
Eigen::ArrayXd model_predict(const nlohmann::json& model, const Dataset& data);

struct ProfileCurve {
    std::string method;
    std::vector<double> threshold;
    std::vector<double> probability;
    double auc = 0;
};

// per-method success curves over a 1001-point threshold grid; values are
// aggregated per dataset across seeds (max or median), negatives clipped to 0
std::vector<ProfileCurve> profile_curves(
    const std::map<std::string, std::map<std::string, std::vector<double>>>& r2_by_method_dataset,
    const std::string& aggregation);

struct FitArgs {
    std::string config, data, target, out, log;
};
struct PredictArgs {
    std::string model, data, out;
};
struct BenchArgs {
    std::string configs_dir, data_dir;
    int seeds = 1;
    std::string out;
};
struct ProfileArgs {
    std::string results, agg = "max", out;
};

int cmd_fit(const FitArgs& a);
int cmd_predict(const PredictArgs& a);
int cmd_bench(const BenchArgs& a);
int cmd_profile(const ProfileArgs& a);

// maps thrown errors onto process exit codes (config 2, data 3, numeric 4)
int run_cli(int argc, char** argv);

} // namespace srlab
