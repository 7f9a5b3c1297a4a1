#pragma once

#include <Eigen/Dense>

#include <optional>

#include "srlab/common.hpp"

namespace srlab {

// lower-median convention: for even lengths the smaller middle value
double lower_median(std::vector<double> v);
// median absolute deviation around the lower median
double mad(const std::vector<double>& v);

// variance-minimizing split threshold: candidates are midpoints of consecutive
// distinct sorted values, objective Var(l)/|l| + Var(r)/|r| with l = {e < t},
// r = {e >= t}; ties resolve to the smallest candidate; nullopt when no split
// exists (all values equal) or no candidate has a finite objective
std::optional<double> mvt_threshold(const std::vector<double>& v, bool weighted = false);

enum class SelectionKind {
    MadStatic,   // population mask per case, pool keeps best-mask members
    MadSemi,     // pool elite, population epsilon
    MadDynamic,  // pool elite, pool epsilon
    MvtStatic,   // population threshold mask per case
    MvtDynamic,  // pool threshold per case
};

struct SelectorConfig {
    SelectionKind kind = SelectionKind::MadSemi;
    bool mvt_weighted = false;
};

// errors(t, p): case t, individual p; +inf marks an invalid individual.
// Population-level state (epsilons, masks, thresholds) is precomputed once.
class Selector {
public:
    Selector(Eigen::MatrixXd errors, SelectorConfig cfg);

    // runs one lexicase pass over a shuffled case order; survivors beyond the
    // last case are resolved by a uniform draw; cases_used reports how many
    // cases the pass consumed before stopping
    int select(Rng& rng, int* cases_used = nullptr) const;

    const Eigen::MatrixXd& errors() const { return errors_; }

private:
    Eigen::MatrixXd errors_;
    SelectorConfig cfg_;
    std::vector<double> epsilon_;                  // MAD static/semi
    std::vector<std::vector<std::uint8_t>> mask_;  // static variants: pass = 0
};

// k distinct entrants per tournament (fresh draw each call); lowest fitness
// wins, ties to lowest index
int select_tournament(const std::vector<double>& fitness, int k, Rng& rng);

} // namespace srlab
