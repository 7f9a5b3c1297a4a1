#pragma once

#include <utility>
#include <vector>

#include "srlab/common.hpp"

namespace srlab {

enum class Dominance { Left, Right, Equal, None };

// minimization everywhere; +inf entries compare normally
Dominance dominates(const std::vector<double>& a, const std::vector<double>& b);

// fronts in rank order; front 0 is the non-dominated set, members keep their
// original index order inside each front
std::vector<std::vector<int>> nondominated_sort(const std::vector<std::vector<double>>& objs);

// crowding distances for one front; per-objective ranges normalize the gaps
// (a zero range contributes nothing), boundary members get +inf
std::vector<double> crowding_distance(const std::vector<std::vector<double>>& objs,
                                      const std::vector<int>& front);

// classic fill-by-front survival to exactly `survivors` members; a partial
// front is trimmed by descending crowding distance (ties: first objective,
// then index), so the first-objective extreme always makes it through
std::vector<int> survive(const std::vector<std::vector<double>>& objs, int survivors);

struct FinalCandidate {
    double val_loss = 0.0;
    double complexity = 0.0;
    int size = 0;
    double train_loss = 0.0;
};

// champion by validation loss with ties broken by complexity, then size, then
// index; when no candidate has a finite validation loss the pick falls back to
// training loss and the flag is set
std::pair<int, bool> pick_final(const std::vector<FinalCandidate>& cands);

} // namespace srlab
