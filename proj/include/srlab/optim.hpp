#pragma once

#include <Eigen/Dense>

#include <functional>
#include <list>
#include <optional>
#include <unordered_map>

#include "srlab/common.hpp"

namespace srlab {

struct OlsResult {
    Eigen::VectorXd beta;
    bool used_ridge = false;
};

// least squares via column-pivoted QR; rank deficiency falls back to the
// ridge-regularized normal equations (lambda = 1e-8); nullopt on non-finite
// inputs or a non-finite solution
std::optional<OlsResult> ols_fit(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y);

inline constexpr double kRidge = 1e-8;

struct LmOptions {
    int max_iters = 10;
    double damping_init = 1e-3;
    double damping_factor = 10.0; // x on reject, / on accept
    double damping_max = 1e12;
    double rel_tol = 1e-9; // relative improvement below this stops
};

struct LmResult {
    Eigen::VectorXd theta;
    double loss = 0.0; // squared residual norm
    int iterations = 0;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// damped least squares on a residual vector h(theta); the Jacobian comes from
// central differences with step sqrt(eps)*(1+|theta_i|); accepted steps never
// increase the loss and the best-seen point is returned; nullopt when the
// residual is non-finite at theta0
std::optional<LmResult> lm_fit(const ResidualFn& h, Eigen::VectorXd theta0,
                               const LmOptions& opt = {},
                               std::vector<double>* loss_trace = nullptr);

// bounded LRU map; get() refreshes recency, put() evicts the stalest entry
template <typename K, typename V>
class LruCache {
public:
    explicit LruCache(size_t capacity) : capacity_(capacity) {}

    V* get(const K& key) {
        auto it = index_.find(key);
        if (it == index_.end()) return nullptr;
        order_.splice(order_.begin(), order_, it->second);
        return &it->second->second;
    }

    void put(const K& key, V value) {
        auto it = index_.find(key);
        if (it != index_.end()) {
            it->second->second = std::move(value);
            order_.splice(order_.begin(), order_, it->second);
            return;
        }
        order_.emplace_front(key, std::move(value));
        index_[key] = order_.begin();
        if (order_.size() > capacity_) {
            index_.erase(order_.back().first);
            order_.pop_back();
        }
    }

    size_t size() const { return order_.size(); }
    size_t capacity() const { return capacity_; }

private:
    size_t capacity_;
    std::list<std::pair<K, V>> order_; // front = most recent
    std::unordered_map<K, typename std::list<std::pair<K, V>>::iterator> index_;
};

} // namespace srlab
