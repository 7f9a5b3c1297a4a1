#include "srlab/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace srlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

SelectionKind selection_from_name(const std::string& s) {
    if (s == "lex-mad-static") return SelectionKind::MadStatic;
    if (s == "lex-mad-semi") return SelectionKind::MadSemi;
    if (s == "lex-mad-dynamic") return SelectionKind::MadDynamic;
    if (s == "lex-mvt-static") return SelectionKind::MvtStatic;
    if (s == "lex-mvt-dynamic") return SelectionKind::MvtDynamic;
    throw config_error("unknown selection kind: '" + s + "'");
}

const char* selection_name(SelectionKind k) {
    switch (k) {
        case SelectionKind::MadStatic: return "lex-mad-static";
        case SelectionKind::MadSemi: return "lex-mad-semi";
        case SelectionKind::MadDynamic: return "lex-mad-dynamic";
        case SelectionKind::MvtStatic: return "lex-mvt-static";
        case SelectionKind::MvtDynamic: return "lex-mvt-dynamic";
    }
    return "?";
}

double want_number(const json& v, const std::string& key) {
    if (!v.is_number()) throw config_error("config: '" + key + "' must be a number");
    return v.get<double>();
}

int want_int(const json& v, const std::string& key) {
    if (!v.is_number_integer()) throw config_error("config: '" + key + "' must be an integer");
    return v.get<int>();
}

bool want_bool(const json& v, const std::string& key) {
    if (!v.is_boolean()) throw config_error("config: '" + key + "' must be a boolean");
    return v.get<bool>();
}

std::string want_string(const json& v, const std::string& key) {
    if (!v.is_string()) throw config_error("config: '" + key + "' must be a string");
    return v.get<std::string>();
}

} // namespace

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

RunConfig parse_run_config(const json& j) {
    if (!j.is_object()) throw config_error("config: top level must be a JSON object");
    RunConfig rc;
    for (const auto& [key, v] : j.items()) {
        if (key == "engine") {
            rc.engine = want_string(v, key);
            if (rc.engine != "gp" && rc.engine != "itea")
                throw config_error("config: engine must be 'gp' or 'itea'");
        } else if (key == "seed") {
            if (!v.is_number_integer() || v.get<long long>() < 0)
                throw config_error("config: 'seed' must be a non-negative integer");
            rc.seed = v.get<std::uint64_t>();
        } else if (key == "test_fraction") {
            rc.test_fraction = want_number(v, key);
        } else if (key == "validation_fraction") {
            rc.validation_fraction = want_number(v, key);
        } else if (key == "standardize") {
            rc.standardize = want_bool(v, key);
        } else if (key == "pop_size") {
            rc.gp.pop_size = want_int(v, key);
        } else if (key == "generations") {
            rc.gp.generations = want_int(v, key);
        } else if (key == "max_size") {
            rc.gp.max_size = want_int(v, key);
        } else if (key == "max_depth") {
            rc.gp.max_depth = want_int(v, key);
        } else if (key == "selection") {
            rc.gp.selection.kind = selection_from_name(want_string(v, key));
        } else if (key == "mvt_weighted") {
            rc.gp.selection.mvt_weighted = want_bool(v, key);
        } else if (key == "objectives") {
            if (!v.is_array() || v.empty())
                throw config_error("config: 'objectives' must be a non-empty array");
            rc.gp.objectives.clear();
            for (const auto& o : v) rc.gp.objectives.push_back(objective_from_name(want_string(o, key)));
        } else if (key == "variation_tolerance") {
            rc.gp.variation_tolerance = want_int(v, key);
        } else if (key == "variation_failure_random") {
            rc.gp.variation_failure_random = want_bool(v, key);
        } else if (key == "variation_weights") {
            if (!v.is_array() || v.size() != kVariationOps)
                throw config_error("config: 'variation_weights' must be an array of " +
                                   std::to_string(kVariationOps) + " numbers");
            for (int i = 0; i < kVariationOps; ++i)
                rc.gp.variation_weights[i] = want_number(v[i], key);
        } else if (key == "opt_iterations") {
            rc.gp.opt_iterations = want_int(v, key);
        } else if (key == "simplify") {
            rc.gp.simplify.enabled = want_bool(v, key);
        } else if (key == "simplify_tolerance") {
            rc.gp.simplify.tolerance = want_number(v, key);
        } else if (key == "simplify_traversal") {
            const auto s = want_string(v, key);
            if (s == "bottom-up") rc.gp.simplify.bottom_up = true;
            else if (s == "top-down") rc.gp.simplify.bottom_up = false;
            else throw config_error("config: 'simplify_traversal' must be 'bottom-up' or 'top-down'");
        } else if (key == "simplify_max_subtree") {
            rc.gp.simplify.max_subtree = want_int(v, key);
        } else if (key == "hash_bits") {
            rc.gp.simplify.hash_bits = want_int(v, key);
        } else if (key == "itea_pop_size") {
            rc.itea.pop_size = want_int(v, key);
        } else if (key == "itea_generations") {
            rc.itea.generations = want_int(v, key);
        } else if (key == "terms_min") {
            rc.itea.terms_min = want_int(v, key);
        } else if (key == "terms_max") {
            rc.itea.terms_max = want_int(v, key);
        } else if (key == "strength_min") {
            rc.itea.strength_min = want_int(v, key);
        } else if (key == "strength_max") {
            rc.itea.strength_max = want_int(v, key);
        } else if (key == "max_nonzero_strengths") {
            rc.itea.max_nonzero_strengths = want_int(v, key);
        } else if (key == "transforms") {
            if (!v.is_array() || v.empty())
                throw config_error("config: 'transforms' must be a non-empty array");
            rc.itea.transforms.clear();
            for (const auto& t : v) rc.itea.transforms.push_back(transform_from_name(want_string(t, key)));
        } else if (key == "heuristic") {
            rc.itea.heuristic = heuristic_from_name(want_string(v, key));
        } else if (key == "tournament_size") {
            rc.itea.tournament_size = want_int(v, key);
        } else if (key == "cache_capacity") {
            const int c = want_int(v, key);
            if (c < 1) throw config_error("config: 'cache_capacity' must be >= 1");
            rc.itea.cache_capacity = static_cast<size_t>(c);
        } else if (key == "lm_iterations") {
            rc.itea.lm_iterations = want_int(v, key);
        } else {
            throw config_error("config: unknown key '" + key + "'");
        }
    }
    rc.gp.validation_fraction = rc.validation_fraction;
    rc.gp.seed = rc.seed;
    rc.itea.seed = rc.seed;
    rc.digest = fnv1a_hex(run_config_to_json(rc).dump());
    return rc;
}

json run_config_to_json(const RunConfig& rc) {
    json j;
    j["engine"] = rc.engine;
    j["seed"] = rc.seed;
    j["test_fraction"] = rc.test_fraction;
    j["validation_fraction"] = rc.validation_fraction;
    j["standardize"] = rc.standardize;
    j["pop_size"] = rc.gp.pop_size;
    j["generations"] = rc.gp.generations;
    j["max_size"] = rc.gp.max_size;
    j["max_depth"] = rc.gp.max_depth;
    j["selection"] = selection_name(rc.gp.selection.kind);
    j["mvt_weighted"] = rc.gp.selection.mvt_weighted;
    json objs = json::array();
    for (Objective o : rc.gp.objectives) objs.push_back(objective_name(o));
    j["objectives"] = std::move(objs);
    j["variation_tolerance"] = rc.gp.variation_tolerance;
    j["variation_failure_random"] = rc.gp.variation_failure_random;
    j["variation_weights"] = rc.gp.variation_weights;
    j["opt_iterations"] = rc.gp.opt_iterations;
    j["simplify"] = rc.gp.simplify.enabled;
    j["simplify_tolerance"] = rc.gp.simplify.tolerance;
    j["simplify_traversal"] = rc.gp.simplify.bottom_up ? "bottom-up" : "top-down";
    j["simplify_max_subtree"] = rc.gp.simplify.max_subtree;
    j["hash_bits"] = rc.gp.simplify.hash_bits;
    j["itea_pop_size"] = rc.itea.pop_size;
    j["itea_generations"] = rc.itea.generations;
    j["terms_min"] = rc.itea.terms_min;
    j["terms_max"] = rc.itea.terms_max;
    j["strength_min"] = rc.itea.strength_min;
    j["strength_max"] = rc.itea.strength_max;
    j["max_nonzero_strengths"] = rc.itea.max_nonzero_strengths;
    json tf = json::array();
    for (Transform t : rc.itea.transforms) tf.push_back(transform_name(t));
    j["transforms"] = std::move(tf);
    j["heuristic"] = heuristic_name(rc.itea.heuristic);
    j["tournament_size"] = rc.itea.tournament_size;
    j["cache_capacity"] = rc.itea.cache_capacity;
    j["lm_iterations"] = rc.itea.lm_iterations;
    return j;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw config_error("config: '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_run_config(j);
}

namespace {

double metric_or_nan(double (*fn)(const Eigen::ArrayXd&, const Eigen::ArrayXd&),
                     const Eigen::ArrayXd& yhat, const Eigen::ArrayXd& y) {
    if (y.size() == 0) return std::nan("");
    try {
        if (!yhat.isFinite().all()) return std::nan("");
        return fn(yhat, y);
    } catch (const std::exception&) {
        return std::nan("");
    }
}

json standardization_to_json(const StandardizationStats& s) {
    json j;
    j["mean"] = std::vector<double>(s.mean.begin(), s.mean.end());
    j["std"] = std::vector<double>(s.std.begin(), s.std.end());
    j["scaled"] = std::vector<int>(s.scaled.begin(), s.scaled.end());
    return j;
}

json it_to_json(const ITExpression& e) {
    json j;
    j["beta0"] = e.beta0;
    json terms = json::array();
    for (const auto& t : e.terms) {
        json tj;
        tj["transform"] = transform_name(t.g);
        tj["strengths"] = t.k;
        tj["theta0"] = t.theta0;
        tj["theta1"] = t.theta1;
        tj["beta"] = t.beta;
        terms.push_back(std::move(tj));
    }
    j["terms"] = std::move(terms);
    return j;
}

ITExpression it_from_json(const json& j) {
    if (!j.is_object() || !j.contains("beta0") || !j.contains("terms"))
        throw data_error("model: malformed interaction-transformation block");
    ITExpression e;
    e.beta0 = j.at("beta0").get<double>();
    for (const auto& tj : j.at("terms")) {
        ITTerm t;
        t.g = transform_from_name(tj.at("transform").get<std::string>());
        t.k = tj.at("strengths").get<std::vector<int>>();
        t.theta0 = tj.at("theta0").get<double>();
        t.theta1 = tj.at("theta1").get<double>();
        t.beta = tj.at("beta").get<double>();
        e.terms.push_back(std::move(t));
    }
    return e;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw data_error("cannot write '" + tmp + "'");
        out << content;
    }
    fs::rename(tmp, path);
}

std::string log_to_csv(const std::vector<GenerationLog>& log) {
    std::string s = "generation,best_train_loss,best_val_loss,median_size,median_complexity,"
                    "n_simplifications,elapsed_ms\n";
    for (const auto& r : log) {
        s += std::to_string(r.generation) + "," + fmt_double(r.best_train_loss) + "," +
             fmt_double(r.best_val_loss) + "," + fmt_double(r.median_size) + "," +
             fmt_double(r.median_complexity) + "," + std::to_string(r.n_simplifications) + "," +
             std::to_string(r.elapsed_ms) + "\n";
    }
    return s;
}

} // namespace

FitOutcome run_fit(const RunConfig& rc, Dataset data) {
    const auto t0 = std::chrono::steady_clock::now();
    split(data, rc.test_fraction, rc.validation_fraction, rc.seed);
    std::optional<StandardizationStats> stats;
    if (rc.standardize) stats = standardize_features(data);

    FitOutcome out;
    json model;
    model["format"] = "sr-model/1";
    model["engine"] = rc.engine;
    model["seed"] = rc.seed;
    model["config_digest"] = rc.digest;
    model["target"] = data.target_name;
    model["feature_names"] = data.feature_names;
    model["standardization"] = stats ? standardization_to_json(*stats) : json(nullptr);

    Eigen::ArrayXd pred_train, pred_val, pred_test;
    if (rc.engine == "gp") {
        EngineConfig ec = rc.gp;
        ec.seed = rc.seed;
        auto res = run_engine(ec, data);
        pred_train = evaluate(res.best.tree, data.x_of(Partition::Train));
        if (!data.rows_of(Partition::Validation).empty())
            pred_val = evaluate(res.best.tree, data.x_of(Partition::Validation));
        if (!data.rows_of(Partition::Test).empty())
            pred_test = evaluate(res.best.tree, data.x_of(Partition::Test));
        model["tree"] = tree_to_json(res.best.tree);
        model["display"] = tree_to_string(res.best.tree, data.feature_names);
        model["picked_by_train_fallback"] = res.val_fallback;
        out.log = std::move(res.log);
        out.size = res.best.metrics.size;
        out.complexity = res.best.metrics.complexity;
    } else {
        ITEAConfig ic = rc.itea;
        ic.seed = rc.seed;
        auto res = itea_run(ic, data.x_of(Partition::Train), data.y_of(Partition::Train));
        pred_train = it_evaluate(res.best, data.x_of(Partition::Train));
        if (!data.rows_of(Partition::Validation).empty())
            pred_val = it_evaluate(res.best, data.x_of(Partition::Validation));
        if (!data.rows_of(Partition::Test).empty())
            pred_test = it_evaluate(res.best, data.x_of(Partition::Test));
        model["itea"] = it_to_json(res.best);
        model["display"] = it_render(res.best, data.feature_names);
        for (size_t g = 0; g < res.history.size(); ++g) {
            GenerationLog row;
            row.generation = static_cast<int>(g);
            row.best_train_loss = res.history[g];
            row.best_val_loss = std::nan("");
            row.median_size = std::nan("");
            row.median_complexity = std::nan("");
            out.log.push_back(row);
        }
        out.size = static_cast<double>(res.best.terms.size());
        out.complexity = std::nan("");
    }

    const Eigen::ArrayXd ytr = data.y_of(Partition::Train).array();
    const Eigen::ArrayXd yv = data.y_of(Partition::Validation).array();
    const Eigen::ArrayXd yte = data.y_of(Partition::Test).array();
    out.r2_train = metric_or_nan(&r2, pred_train, ytr);
    out.r2_val = metric_or_nan(&r2, pred_val, yv);
    out.r2_test = metric_or_nan(&r2, pred_test, yte);
    out.nmse_train = metric_or_nan(&nmse, pred_train, ytr);
    out.nmse_val = metric_or_nan(&nmse, pred_val, yv);
    out.nmse_test = metric_or_nan(&nmse, pred_test, yte);

    json metrics;
    metrics["r2_train"] = out.r2_train;
    metrics["r2_val"] = out.r2_val;
    metrics["r2_test"] = out.r2_test;
    metrics["nmse_train"] = out.nmse_train;
    metrics["nmse_val"] = out.nmse_val;
    metrics["nmse_test"] = out.nmse_test;
    model["metrics"] = std::move(metrics);
    out.model = std::move(model);
    out.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    return out;
}

Eigen::ArrayXd model_predict(const json& model, const Dataset& data) {
    if (!model.is_object() || !model.contains("engine") || !model.contains("feature_names"))
        throw data_error("model: missing engine/feature_names fields");
    const auto names = model.at("feature_names").get<std::vector<std::string>>();

    std::vector<int> cols(names.size(), -1);
    bool by_name = true;
    for (size_t i = 0; i < names.size(); ++i) {
        for (size_t c = 0; c < data.feature_names.size(); ++c)
            if (data.feature_names[c] == names[i]) cols[i] = static_cast<int>(c);
        if (cols[i] < 0) by_name = false;
    }
    if (!by_name) {
        if (data.features() != static_cast<Eigen::Index>(names.size()))
            throw data_error("predict: model expects " + std::to_string(names.size()) +
                             " features, data has " + std::to_string(data.features()));
        for (size_t i = 0; i < names.size(); ++i) cols[i] = static_cast<int>(i);
    }
    Eigen::MatrixXd X(data.rows(), names.size());
    for (size_t i = 0; i < names.size(); ++i) X.col(i) = data.X.col(cols[i]);

    if (model.contains("standardization") && !model.at("standardization").is_null()) {
        const auto& sj = model.at("standardization");
        StandardizationStats s;
        const auto mean = sj.at("mean").get<std::vector<double>>();
        const auto sd = sj.at("std").get<std::vector<double>>();
        const auto scaled = sj.at("scaled").get<std::vector<int>>();
        if (mean.size() != names.size()) throw data_error("model: standardization size mismatch");
        s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
        s.std = Eigen::Map<const Eigen::VectorXd>(sd.data(), sd.size());
        s.scaled.assign(scaled.begin(), scaled.end());
        apply_standardization(X, s);
    }

    const auto engine = model.at("engine").get<std::string>();
    if (engine == "gp") {
        if (!model.contains("tree")) throw data_error("model: missing tree");
        Node tree = tree_from_json(model.at("tree"));
        int max_index = -1;
        for_each_node(tree, [&](const Node& n) {
            if (n.op == Op::Var) max_index = std::max(max_index, n.index);
        });
        if (max_index >= X.cols())
            throw data_error("predict: model references feature index " + std::to_string(max_index) +
                             ", data has " + std::to_string(X.cols()));
        return evaluate(tree, X);
    }
    if (engine == "itea") {
        if (!model.contains("itea")) throw data_error("model: missing itea block");
        ITExpression e = it_from_json(model.at("itea"));
        for (const auto& t : e.terms)
            if (t.k.size() != static_cast<size_t>(X.cols()))
                throw data_error("predict: model expects " + std::to_string(t.k.size()) +
                                 " features, data has " + std::to_string(X.cols()));
        return it_evaluate(e, X);
    }
    throw data_error("model: unknown engine '" + engine + "'");
}

std::vector<ProfileCurve> profile_curves(
    const std::map<std::string, std::map<std::string, std::vector<double>>>& r2_by_method_dataset,
    const std::string& aggregation) {
    if (aggregation != "max" && aggregation != "median")
        throw config_error("profile: aggregation must be 'max' or 'median'");
    if (r2_by_method_dataset.empty()) throw data_error("profile: no result rows");

    std::vector<ProfileCurve> curves;
    for (const auto& [method, datasets] : r2_by_method_dataset) {
        std::vector<double> values;
        for (const auto& [dataset, runs] : datasets) {
            if (runs.empty()) continue;
            double v;
            if (aggregation == "max") {
                v = *std::max_element(runs.begin(), runs.end());
            } else {
                std::vector<double> s(runs);
                std::sort(s.begin(), s.end());
                const size_t n = s.size();
                v = n % 2 ? s[n / 2] : (s[n / 2 - 1] + s[n / 2]) / 2.0;
            }
            values.push_back(std::max(0.0, v)); // negatives clip to zero here only
        }
        if (values.empty()) throw data_error("profile: method '" + method + "' has no runs");

        ProfileCurve c;
        c.method = method;
        const double d = static_cast<double>(values.size());
        for (int k = 0; k <= 1000; ++k) {
            const double x = k / 1000.0;
            int hit = 0;
            for (double v : values) {
                // the origin reports strictly positive successes so that an
                // all-failure profile integrates to exactly zero
                if (k == 0 ? v > 0 : v >= x) ++hit;
            }
            c.threshold.push_back(x);
            c.probability.push_back(hit / d);
        }
        // factor the uniform step out of the trapezoid sum so flat curves
        // integrate without drift (all-ones must give exactly 1.0)
        double midsum = 0;
        for (size_t k = 0; k + 1 < c.probability.size(); ++k)
            midsum += (c.probability[k] + c.probability[k + 1]) / 2.0;
        c.auc = midsum * 0.001;
        curves.push_back(std::move(c));
    }
    return curves;
}

int cmd_fit(const FitArgs& a) {
    RunConfig rc = load_run_config(a.config);
    Dataset data = load_csv(a.data, a.target);
    FitOutcome out = run_fit(rc, std::move(data));
    write_text_atomic(a.out, out.model.dump(2) + "\n");
    if (!a.log.empty()) write_text_atomic(a.log, log_to_csv(out.log));
    std::cout << "fit: r2_test=" << fmt_double(out.r2_test)
              << " r2_train=" << fmt_double(out.r2_train) << " model=" << a.out << "\n";
    return 0;
}

int cmd_predict(const PredictArgs& a) {
    std::ifstream in(a.model);
    if (!in) throw data_error("model: cannot open '" + a.model + "'");
    json model;
    try {
        in >> model;
    } catch (const json::parse_error& e) {
        throw data_error("model: '" + a.model + "' is not valid JSON: " + e.what());
    }
    Dataset data = load_csv_features(a.data);
    // a stored target column is not a feature
    if (model.contains("target")) {
        const auto target = model.at("target").get<std::string>();
        for (size_t c = 0; c < data.feature_names.size(); ++c) {
            if (data.feature_names[c] != target) continue;
            Eigen::MatrixXd X(data.X.rows(), data.X.cols() - 1);
            std::vector<std::string> names;
            int k = 0;
            for (Eigen::Index i = 0; i < data.X.cols(); ++i) {
                if (i == static_cast<Eigen::Index>(c)) continue;
                X.col(k++) = data.X.col(i);
                names.push_back(data.feature_names[i]);
            }
            data.X = std::move(X);
            data.feature_names = std::move(names);
            break;
        }
    }
    Eigen::ArrayXd pred = model_predict(model, data);
    std::string csv = "prediction\n";
    for (Eigen::Index i = 0; i < pred.size(); ++i) csv += fmt_double(pred(i)) + "\n";
    write_text_atomic(a.out, csv);
    return 0;
}

namespace {

struct BenchRow {
    std::string dataset, method;
    int seed = 0;
    std::string rest; // metric columns, kept verbatim on resume
};

const char* kBenchHeader =
    "dataset,method,seed,r2_train,r2_val,r2_test,nmse_train,nmse_val,nmse_test,size,complexity,"
    "runtime_ms";

std::vector<BenchRow> read_bench_rows(const std::string& path) {
    std::vector<BenchRow> rows;
    std::ifstream in(path);
    if (!in) return rows;
    std::string line;
    if (!std::getline(in, line)) return rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        BenchRow r;
        size_t p1 = line.find(',');
        size_t p2 = p1 == std::string::npos ? p1 : line.find(',', p1 + 1);
        size_t p3 = p2 == std::string::npos ? p2 : line.find(',', p2 + 1);
        if (p3 == std::string::npos) throw data_error("bench: malformed results row: " + line);
        r.dataset = line.substr(0, p1);
        r.method = line.substr(p1 + 1, p2 - p1 - 1);
        r.seed = std::stoi(line.substr(p2 + 1, p3 - p2 - 1));
        r.rest = line.substr(p3 + 1);
        rows.push_back(std::move(r));
    }
    return rows;
}

class FileLock {
public:
    explicit FileLock(const std::string& path) {
        fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
        if (fd_ >= 0) ::flock(fd_, LOCK_EX);
    }
    ~FileLock() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
    }

private:
    int fd_ = -1;
};

} // namespace

int cmd_bench(const BenchArgs& a) {
    if (a.seeds < 1) throw config_error("bench: need at least one seed");
    if (!fs::is_directory(a.configs_dir))
        throw config_error("bench: '" + a.configs_dir + "' is not a directory");
    if (!fs::is_directory(a.data_dir))
        throw data_error("bench: '" + a.data_dir + "' is not a directory");
    std::vector<fs::path> configs, datasets;
    for (const auto& e : fs::directory_iterator(a.configs_dir))
        if (e.path().extension() == ".json") configs.push_back(e.path());
    for (const auto& e : fs::directory_iterator(a.data_dir))
        if (e.path().extension() == ".csv") datasets.push_back(e.path());
    std::sort(configs.begin(), configs.end());
    std::sort(datasets.begin(), datasets.end());
    if (configs.empty()) throw config_error("bench: no .json configs in '" + a.configs_dir + "'");
    if (datasets.empty()) throw data_error("bench: no .csv datasets in '" + a.data_dir + "'");

    FileLock lock(a.out + ".lock");
    auto rows = read_bench_rows(a.out);
    std::set<std::tuple<std::string, std::string, int>> done;
    for (const auto& r : rows) done.emplace(r.dataset, r.method, r.seed);

    for (const auto& dpath : datasets) {
        const std::string dataset = dpath.stem().string();
        for (const auto& cpath : configs) {
            const std::string method = cpath.stem().string();
            for (int seed = 0; seed < a.seeds; ++seed) {
                if (done.count({dataset, method, seed})) continue;
                RunConfig rc = load_run_config(cpath.string());
                rc.seed = static_cast<std::uint64_t>(seed);
                rc.gp.seed = rc.seed;
                rc.itea.seed = rc.seed;
                Dataset data = load_csv(dpath.string(), ""); // last column is the target
                FitOutcome fo = run_fit(rc, std::move(data));
                BenchRow r;
                r.dataset = dataset;
                r.method = method;
                r.seed = seed;
                r.rest = fmt_double(fo.r2_train) + "," + fmt_double(fo.r2_val) + "," +
                         fmt_double(fo.r2_test) + "," + fmt_double(fo.nmse_train) + "," +
                         fmt_double(fo.nmse_val) + "," + fmt_double(fo.nmse_test) + "," +
                         fmt_double(fo.size) + "," + fmt_double(fo.complexity) + "," +
                         std::to_string(fo.runtime_ms);
                rows.push_back(std::move(r));
                done.emplace(dataset, method, seed);
            }
        }
    }

    std::sort(rows.begin(), rows.end(), [](const BenchRow& x, const BenchRow& y) {
        if (x.dataset != y.dataset) return x.dataset < y.dataset;
        if (x.method != y.method) return x.method < y.method;
        return x.seed < y.seed;
    });
    std::string csv = std::string(kBenchHeader) + "\n";
    for (const auto& r : rows)
        csv += r.dataset + "," + r.method + "," + std::to_string(r.seed) + "," + r.rest + "\n";
    write_text_atomic(a.out, csv);
    std::cout << "bench: " << rows.size() << " rows in " << a.out << "\n";
    return 0;
}

int cmd_profile(const ProfileArgs& a) {
    std::ifstream in(a.results);
    if (!in) throw data_error("profile: cannot open '" + a.results + "'");
    std::string line;
    if (!std::getline(in, line)) throw data_error("profile: '" + a.results + "' is empty");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    auto col = [&](const std::string& name) {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw data_error("profile: results lack column '" + name + "'");
    };
    const int c_dataset = col("dataset"), c_method = col("method"), c_r2 = col("r2_test");

    std::map<std::string, std::map<std::string, std::vector<double>>> grouped;
    int n_rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != header.size())
            throw data_error("profile: row has " + std::to_string(cells.size()) +
                             " cells, header has " + std::to_string(header.size()));
        char* end = nullptr;
        const double v = std::strtod(cells[c_r2].c_str(), &end);
        if (end == cells[c_r2].c_str())
            throw data_error("profile: non-numeric r2_test '" + cells[c_r2] + "'");
        grouped[cells[c_method]][cells[c_dataset]].push_back(v);
        ++n_rows;
    }
    if (n_rows == 0) throw data_error("profile: no result rows in '" + a.results + "'");

    auto curves = profile_curves(grouped, a.agg);
    std::string csv = "method,threshold,probability,auc\n";
    for (const auto& c : curves)
        for (size_t k = 0; k < c.threshold.size(); ++k)
            csv += c.method + "," + fmt_double(c.threshold[k]) + "," +
                   fmt_double(c.probability[k]) + "," + fmt_double(c.auc) + "\n";
    write_text_atomic(a.out, csv);
    std::cout << "profile: " << curves.size() << " methods in " << a.out << "\n";
    return 0;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"symbolic regression laboratory"};
    app.require_subcommand(1);

    FitArgs fit;
    auto* sub_fit = app.add_subcommand("fit", "train a model on a CSV dataset");
    sub_fit->add_option("--config", fit.config, "run configuration (JSON)")->required();
    sub_fit->add_option("--data", fit.data, "training CSV")->required();
    sub_fit->add_option("--target", fit.target, "target column name (default: last column)");
    sub_fit->add_option("--out", fit.out, "model output path (JSON)")->required();
    sub_fit->add_option("--log", fit.log, "per-generation run log path (CSV)");

    PredictArgs pred;
    auto* sub_pred = app.add_subcommand("predict", "evaluate a stored model on new rows");
    sub_pred->add_option("--model", pred.model, "model file (JSON)")->required();
    sub_pred->add_option("--data", pred.data, "feature CSV")->required();
    sub_pred->add_option("--out", pred.out, "prediction output path (CSV)")->required();

    BenchArgs bench;
    auto* sub_bench = app.add_subcommand("bench", "run every config on every dataset");
    sub_bench->add_option("--configs", bench.configs_dir, "directory of config JSONs")->required();
    sub_bench->add_option("--data", bench.data_dir, "directory of dataset CSVs")->required();
    sub_bench->add_option("--seeds", bench.seeds, "seeds 0..N-1 per pair")->required();
    sub_bench->add_option("--out", bench.out, "results CSV (resumable)")->required();

    ProfileArgs prof;
    auto* sub_prof = app.add_subcommand("profile", "success-rate curves from bench results");
    sub_prof->add_option("--results", prof.results, "bench results CSV")->required();
    sub_prof->add_option("--agg", prof.agg, "per-dataset aggregation: max|median")
        ->check(CLI::IsMember({"max", "median"}));
    sub_prof->add_option("--out", prof.out, "curve output path (CSV)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2; // bad usage is a configuration problem
    }

    try {
        if (sub_fit->parsed()) return cmd_fit(fit);
        if (sub_pred->parsed()) return cmd_predict(pred);
        if (sub_bench->parsed()) return cmd_bench(bench);
        if (sub_prof->parsed()) return cmd_profile(prof);
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace srlab
