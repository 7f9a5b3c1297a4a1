#include "srlab/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace srlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// |e - m| with the convention that two equal infinities deviate by zero
double deviation(double e, double m) {
    if (e == m) return 0.0;
    return std::abs(e - m);
}

double pop_variance(const std::vector<double>& v, size_t lo, size_t hi) {
    // v[lo, hi) — caller passes a sorted slice
    const double n = static_cast<double>(hi - lo);
    double mean = 0.0;
    for (size_t i = lo; i < hi; ++i) mean += v[i];
    mean /= n;
    double var = 0.0;
    for (size_t i = lo; i < hi; ++i) var += (v[i] - mean) * (v[i] - mean);
    return var / n;
}

} // namespace

double lower_median(std::vector<double> v) {
    if (v.empty()) throw numeric_error("median of an empty vector");
    const size_t k = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + k, v.end());
    return v[k];
}

double mad(const std::vector<double>& v) {
    const double m = lower_median(v);
    std::vector<double> dev(v.size());
    for (size_t i = 0; i < v.size(); ++i) dev[i] = deviation(v[i], m);
    return lower_median(std::move(dev));
}

std::optional<double> mvt_threshold(const std::vector<double>& v, bool weighted) {
    if (v.size() < 2) return std::nullopt;
    std::vector<double> s(v);
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());

    bool found = false;
    double best_tau = 0.0, best_obj = 0.0;
    size_t left = 1; // |{e < tau}| while scanning candidate midpoints
    for (size_t i = 1; i < s.size(); ++i, ++left) {
        if (s[i] == s[i - 1]) continue;
        const double tau = s[i - 1] + (s[i] - s[i - 1]) / 2.0;
        if (!std::isfinite(tau)) continue;
        const double vl = pop_variance(s, 0, left);
        const double vr = pop_variance(s, left, s.size());
        const double obj = weighted ? (left * vl + (n - left) * vr) / n
                                    : vl / left + vr / (n - left);
        if (!std::isfinite(obj)) continue;
        if (!found || obj < best_obj) { // strict: ties keep the smallest tau
            found = true;
            best_obj = obj;
            best_tau = tau;
        }
    }
    if (!found) return std::nullopt;
    return best_tau;
}

Selector::Selector(Eigen::MatrixXd errors, SelectorConfig cfg)
    : errors_(std::move(errors)), cfg_(cfg) {
    const auto cases = errors_.rows();
    const auto pop = errors_.cols();
    if (pop == 0) throw config_error("selector: empty population");

    if (cfg_.kind == SelectionKind::MadStatic || cfg_.kind == SelectionKind::MadSemi) {
        epsilon_.resize(cases);
        for (Eigen::Index t = 0; t < cases; ++t) {
            std::vector<double> row(errors_.row(t).begin(), errors_.row(t).end());
            epsilon_[t] = mad(row);
        }
    }
    if (cfg_.kind == SelectionKind::MadStatic) {
        mask_.assign(cases, std::vector<std::uint8_t>(pop, 1));
        for (Eigen::Index t = 0; t < cases; ++t) {
            const double elite = errors_.row(t).minCoeff();
            for (Eigen::Index p = 0; p < pop; ++p)
                if (errors_(t, p) <= elite + epsilon_[t]) mask_[t][p] = 0;
        }
    }
    if (cfg_.kind == SelectionKind::MvtStatic) {
        // a +inf error sits above any finite threshold, so the threshold is
        // computed on the finite entries and the infinite ones always fail
        mask_.assign(cases, std::vector<std::uint8_t>(pop, 0));
        for (Eigen::Index t = 0; t < cases; ++t) {
            std::vector<double> row;
            row.reserve(pop);
            for (Eigen::Index p = 0; p < pop; ++p)
                if (std::isfinite(errors_(t, p))) row.push_back(errors_(t, p));
            if (row.empty()) continue; // nobody finite: the case filters nobody
            auto tau = mvt_threshold(row, cfg_.mvt_weighted);
            for (Eigen::Index p = 0; p < pop; ++p) {
                const double e = errors_(t, p);
                if (!std::isfinite(e))
                    mask_[t][p] = 1;
                else if (tau)
                    mask_[t][p] = e < *tau ? 0 : 1;
            }
        }
    }
}

int Selector::select(Rng& rng, int* cases_used) const {
    const auto cases = errors_.rows();
    const auto pop = errors_.cols();

    std::vector<int> order(cases);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<int> pool(pop);
    std::iota(pool.begin(), pool.end(), 0);
    std::vector<int> next;

    int used = 0;
    for (int t : order) {
        if (pool.size() == 1) break;
        ++used;
        next.clear();
        switch (cfg_.kind) {
            case SelectionKind::MadStatic:
            case SelectionKind::MvtStatic: {
                std::uint8_t best = 1;
                for (int p : pool) best = std::min(best, mask_[t][p]);
                for (int p : pool)
                    if (mask_[t][p] == best) next.push_back(p);
                break;
            }
            case SelectionKind::MadSemi: {
                double elite = kInf;
                for (int p : pool) elite = std::min(elite, errors_(t, p));
                for (int p : pool)
                    if (errors_(t, p) <= elite + epsilon_[t]) next.push_back(p);
                break;
            }
            case SelectionKind::MadDynamic: {
                double elite = kInf;
                std::vector<double> vals;
                vals.reserve(pool.size());
                for (int p : pool) {
                    elite = std::min(elite, errors_(t, p));
                    vals.push_back(errors_(t, p));
                }
                const double eps = mad(vals);
                for (int p : pool)
                    if (errors_(t, p) <= elite + eps) next.push_back(p);
                break;
            }
            case SelectionKind::MvtDynamic: {
                // finite members only; +inf lands above any threshold
                std::vector<int> finite;
                std::vector<double> vals;
                for (int p : pool)
                    if (std::isfinite(errors_(t, p))) {
                        finite.push_back(p);
                        vals.push_back(errors_(t, p));
                    }
                if (finite.empty()) {
                    next = pool;
                    break;
                }
                auto tau = mvt_threshold(vals, cfg_.mvt_weighted);
                if (!tau) {
                    next = finite;
                    break;
                }
                for (int p : finite)
                    if (errors_(t, p) < *tau) next.push_back(p);
                break;
            }
        }
        if (!next.empty()) pool.swap(next);
        // an empty survivor set (everyone +inf on a semi/dynamic case after an
        // all-inf elite) keeps the previous pool
    }
    if (cases_used) *cases_used = used;
    if (pool.size() == 1) return pool[0];
    return pool[rand_int(rng, 0, static_cast<int>(pool.size()) - 1)];
}

int select_tournament(const std::vector<double>& fitness, int k, Rng& rng) {
    const int n = static_cast<int>(fitness.size());
    if (n == 0) throw config_error("tournament: empty population");
    if (k < 1) throw config_error("tournament: size must be >= 1");
    k = std::min(k, n);
    // distinct entrants within one tournament (partial Fisher-Yates); draws
    // are independent across tournaments
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    int best = -1;
    for (int i = 0; i < k; ++i) {
        std::swap(idx[i], idx[rand_int(rng, i, n - 1)]);
        const int c = idx[i];
        if (best < 0 || fitness[c] < fitness[best] || (fitness[c] == fitness[best] && c < best))
            best = c;
    }
    return best;
}

} // namespace srlab
