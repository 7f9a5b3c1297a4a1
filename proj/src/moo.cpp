#include "srlab/moo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace srlab {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Dominance dominates(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) throw config_error("dominance: objective sizes differ");
    bool a_better = false, b_better = false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) a_better = true;
        else if (b[i] < a[i]) b_better = true;
    }
    if (a_better && !b_better) return Dominance::Left;
    if (b_better && !a_better) return Dominance::Right;
    if (!a_better && !b_better) return Dominance::Equal;
    return Dominance::None;
}

std::vector<std::vector<int>> nondominated_sort(const std::vector<std::vector<double>>& objs) {
    const int n = static_cast<int>(objs.size());
    std::vector<int> dominated_by(n, 0);
    std::vector<std::vector<int>> dominates_list(n);
    for (int i = 0; i < n; ++i) {
        for (int k = i + 1; k < n; ++k) {
            switch (dominates(objs[i], objs[k])) {
                case Dominance::Left:
                    dominates_list[i].push_back(k);
                    ++dominated_by[k];
                    break;
                case Dominance::Right:
                    dominates_list[k].push_back(i);
                    ++dominated_by[i];
                    break;
                default: break;
            }
        }
    }
    std::vector<std::vector<int>> fronts;
    std::vector<int> current;
    for (int i = 0; i < n; ++i)
        if (dominated_by[i] == 0) current.push_back(i);
    while (!current.empty()) {
        fronts.push_back(current);
        std::vector<int> next;
        for (int i : current)
            for (int k : dominates_list[i])
                if (--dominated_by[k] == 0) next.push_back(k);
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }
    return fronts;
}

std::vector<double> crowding_distance(const std::vector<std::vector<double>>& objs,
                                      const std::vector<int>& front) {
    const int m = static_cast<int>(front.size());
    std::vector<double> dist(m, 0.0);
    if (m == 0) return dist;
    const size_t n_obj = objs[front[0]].size();
    std::vector<int> order(m);
    for (size_t o = 0; o < n_obj; ++o) {
        for (int i = 0; i < m; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return objs[front[a]][o] < objs[front[b]][o];
        });
        dist[order[0]] = kInf;
        dist[order[m - 1]] = kInf;
        const double lo = objs[front[order[0]]][o];
        const double hi = objs[front[order[m - 1]]][o];
        const double range = hi - lo;
        if (!(range > 0) || !std::isfinite(range)) continue; // degenerate span adds nothing
        for (int i = 1; i + 1 < m; ++i) {
            const double gap = objs[front[order[i + 1]]][o] - objs[front[order[i - 1]]][o];
            dist[order[i]] += gap / range;
        }
    }
    return dist;
}

std::vector<int> survive(const std::vector<std::vector<double>>& objs, int survivors) {
    if (survivors <= 0) throw config_error("survive: need a positive survivor count");
    if (static_cast<int>(objs.size()) < survivors)
        throw config_error("survive: pool smaller than survivor count");

    std::vector<int> keep;
    keep.reserve(survivors);
    for (const auto& front : nondominated_sort(objs)) {
        const int room = survivors - static_cast<int>(keep.size());
        if (room <= 0) break;
        if (static_cast<int>(front.size()) <= room) {
            keep.insert(keep.end(), front.begin(), front.end());
            continue;
        }
        auto dist = crowding_distance(objs, front);
        std::vector<int> order(front.size());
        for (size_t i = 0; i < front.size(); ++i) order[i] = static_cast<int>(i);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            if (dist[a] != dist[b]) return dist[a] > dist[b];
            if (objs[front[a]][0] != objs[front[b]][0]) return objs[front[a]][0] < objs[front[b]][0];
            return front[a] < front[b];
        });
        for (int i = 0; i < room; ++i) keep.push_back(front[order[i]]);
        break;
    }
    return keep;
}

std::pair<int, bool> pick_final(const std::vector<FinalCandidate>& cands) {
    if (cands.empty()) throw config_error("pick_final: no candidates");
    auto better = [](double a, double b) { return a < b; };

    int best = -1;
    for (size_t i = 0; i < cands.size(); ++i) {
        if (!std::isfinite(cands[i].val_loss)) continue;
        if (best < 0) {
            best = static_cast<int>(i);
            continue;
        }
        const auto& c = cands[i];
        const auto& b = cands[best];
        if (better(c.val_loss, b.val_loss) ||
            (c.val_loss == b.val_loss &&
             (better(c.complexity, b.complexity) ||
              (c.complexity == b.complexity && c.size < b.size))))
            best = static_cast<int>(i);
    }
    if (best >= 0) return {best, false};

    // nobody generalizes: fall back to training loss
    best = 0;
    for (size_t i = 1; i < cands.size(); ++i)
        if (cands[i].train_loss < cands[best].train_loss) best = static_cast<int>(i);
    return {best, true};
}

} // namespace srlab
