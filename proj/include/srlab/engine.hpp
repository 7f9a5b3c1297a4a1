#pragma once

#include <array>
#include <optional>

#include "srlab/common.hpp"
#include "srlab/data.hpp"
#include "srlab/expr.hpp"
#include "srlab/moo.hpp"
#include "srlab/select.hpp"
#include "srlab/simplify.hpp"

namespace srlab {

enum class Objective : std::uint8_t { TrainLoss, ValLoss, Complexity, Size, Depth };

Objective objective_from_name(const std::string& name);
const char* objective_name(Objective o);

enum class VariationOp : std::uint8_t {
    Crossover, ToggleOn, ToggleOff, Subtree, Point, Delete, Insert
};
inline constexpr int kVariationOps = 7;

struct VariationBounds {
    int max_size = 128;
    int max_depth = 7;
    int n_features = 0;
};

// one structural edit; nullopt when the operator does not apply to this parent
// (the caller counts that as a failed attempt); results are not yet checked
// against the size/depth budget
std::optional<Node> apply_variation(VariationOp op, const Node& parent, const Node& donor,
                                    const VariationBounds& b, Rng& rng);

struct EngineConfig {
    int pop_size = 80; // even: parents are consumed in pairs
    int generations = 200;
    int max_size = 128;
    int max_depth = 7;
    double validation_fraction = 0.25; // applied by the caller's split step
    int variation_tolerance = 3;       // attempts before the fallback kicks in
    bool variation_failure_random = false; // fallback: fresh random individual instead of a parent copy
    std::array<double, kVariationOps> variation_weights{1, 1, 1, 1, 1, 1, 1};
    SelectorConfig selection;
    std::vector<Objective> objectives{Objective::TrainLoss, Objective::Complexity};
    SimplifyConfig simplify;
    int opt_iterations = 10;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Individual {
    Node tree;
    double train_loss = 0.0;
    double val_loss = 0.0;
    TreeMetrics metrics;
    Eigen::ArrayXd train_pred;
};

struct GenerationLog {
    int generation = 0;
    double best_train_loss = 0.0;
    double best_val_loss = 0.0;
    double median_size = 0.0;
    double median_complexity = 0.0;
    long n_simplifications = 0;
    long elapsed_ms = 0;
};

struct EngineResult {
    Individual best;
    bool val_fallback = false; // champion picked by training loss only
    std::vector<GenerationLog> log;
    std::vector<SimplifyEvent> simplify_events;
    std::vector<Individual> population; // final generation
};

// evolves trees on the dataset's train partition, scores champions on the
// validation partition; the dataset must already be split
EngineResult run_engine(const EngineConfig& cfg, const Dataset& data);

} // namespace srlab
