#pragma once

#include <Eigen/Dense>

#include <array>

#include "srlab/common.hpp"
#include "srlab/optim.hpp"

namespace srlab {

enum class Transform : std::uint8_t { Id, Sin, Cos, Tan, Sqrt, Log, Exp, Abs };

const char* transform_name(Transform t);
Transform transform_from_name(const std::string& name);

// one term: beta * g(theta0 + theta1 * prod_j x_j^k_j)
struct ITTerm {
    Transform g = Transform::Id;
    std::vector<int> k; // one integer strength per feature
    double theta0 = 0.0;
    double theta1 = 1.0;
    double beta = 0.0;
};

struct ITExpression {
    double beta0 = 0.0;
    std::vector<ITTerm> terms;
};

int nonzero_strengths(const ITTerm& term);
Eigen::ArrayXd it_evaluate(const ITExpression& e, const Eigen::MatrixXd& X);
std::string it_render(const ITExpression& e, const std::vector<std::string>& names);

// order-invariant structural identity over the (g, k) multiset; fitted
// parameters never participate
std::string it_canonical_key(const ITExpression& e);
// permutation that lists terms in canonical order
std::vector<int> it_canonical_order(const ITExpression& e);

// fitted parameters in canonical term order, for cache storage
struct ITParams {
    double beta0 = 0.0;
    std::vector<double> beta, theta0, theta1;
};
ITParams it_extract_params(const ITExpression& e);
void it_apply_params(ITExpression& e, const ITParams& p);

enum class FitHeuristic { Ols, Lm, OlsLm, LmOls };
FitHeuristic heuristic_from_name(const std::string& name);
const char* heuristic_name(FitHeuristic h);

struct ITEAConfig {
    int pop_size = 250;
    int generations = 400;
    int terms_min = 2;
    int terms_max = 15;
    int strength_min = -3;
    int strength_max = 3;
    int max_nonzero_strengths = 2;
    std::vector<Transform> transforms = {Transform::Id,  Transform::Sin, Transform::Cos,
                                         Transform::Tan, Transform::Sqrt, Transform::Log,
                                         Transform::Exp, Transform::Abs};
    FitHeuristic heuristic = FitHeuristic::Ols;
    int lm_iterations = 10;
    int tournament_size = 3;
    size_t cache_capacity = 10000;
    std::uint64_t seed = 0;

    void validate() const;
};

ITExpression it_random(const ITEAConfig& cfg, int n_features, Rng& rng);
// one of expand / shrink / local-modification, drawn uniformly among the
// moves applicable at the current term count
ITExpression it_mutate(const ITExpression& e, const ITEAConfig& cfg, Rng& rng);

// broken parameters collapse to neutral elements: additive roles (beta0, beta,
// theta0) to 0, multiplicative roles (theta1) to 1
void it_neutral_fallback(ITExpression& e);

struct ITFitOutcome {
    ITExpression expr;
    double loss = 0.0; // training nmse; +inf when even the fallback is non-finite
    bool fell_back = false;
};

ITFitOutcome it_fit(const ITExpression& e, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const ITEAConfig& cfg, Rng& rng);

using ITParamCache = LruCache<std::string, ITParams>;

// hit: stored parameters are re-applied, never refined; miss: fit, then store
// the fitted values only when they beat the neutral baseline — failed or
// non-improving fits keep neutral parameters for the round, unmemoized
ITFitOutcome cache_get_or_fit(ITParamCache& cache, const ITExpression& e,
                              const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const ITEAConfig& cfg, Rng& rng, bool* hit = nullptr);

struct ITEAResult {
    ITExpression best;
    double best_loss = 0.0;
    std::vector<double> history; // best loss per generation (index 0 = initial)
    long cache_hits = 0;
    long cache_misses = 0;
};

ITEAResult itea_run(const ITEAConfig& cfg, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

} // namespace srlab
