#include "srlab/optim.hpp"

#include <cmath>
#include <limits>

namespace srlab {

std::optional<OlsResult> ols_fit(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y) {
    if (!phi.allFinite() || !y.allFinite()) return std::nullopt;
    if (phi.rows() != y.rows() || phi.rows() == 0 || phi.cols() == 0) return std::nullopt;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);
    OlsResult out;
    if (qr.rank() == phi.cols()) {
        out.beta = qr.solve(y);
        if (out.beta.allFinite()) return out;
    }
    // rank deficient (duplicate/constant columns): ridge keeps it solvable
    Eigen::MatrixXd a = phi.transpose() * phi;
    a.diagonal().array() += kRidge;
    out.beta = a.ldlt().solve(phi.transpose() * y);
    out.used_ridge = true;
    if (!out.beta.allFinite()) return std::nullopt;
    return out;
}

namespace {

bool jacobian(const ResidualFn& h, const Eigen::VectorXd& theta, Eigen::Index rows,
              Eigen::MatrixXd& j) {
    static const double root_eps = std::sqrt(std::numeric_limits<double>::epsilon());
    const auto p = theta.size();
    j.resize(rows, p);
    Eigen::VectorXd t = theta;
    for (Eigen::Index i = 0; i < p; ++i) {
        const double step = root_eps * (1.0 + std::abs(theta(i)));
        t(i) = theta(i) + step;
        Eigen::VectorXd hp = h(t);
        t(i) = theta(i) - step;
        Eigen::VectorXd hm = h(t);
        t(i) = theta(i);
        if (hp.size() != rows || hm.size() != rows) return false;
        j.col(i) = (hp - hm) / (2.0 * step);
    }
    return j.allFinite();
}

} // namespace

std::optional<LmResult> lm_fit(const ResidualFn& h, Eigen::VectorXd theta0, const LmOptions& opt,
                               std::vector<double>* loss_trace) {
    Eigen::VectorXd residual = h(theta0);
    if (!residual.allFinite()) return std::nullopt;

    Eigen::VectorXd theta = std::move(theta0);
    double loss = residual.squaredNorm();
    if (loss_trace) loss_trace->push_back(loss);

    LmResult best{theta, loss, 0};
    if (theta.size() == 0 || opt.max_iters == 0) return best;

    const auto rows = residual.size();
    double lambda = opt.damping_init;
    Eigen::MatrixXd j;

    for (int iter = 1; iter <= opt.max_iters; ++iter) {
        if (!jacobian(h, theta, rows, j)) break;
        const Eigen::MatrixXd jtj = j.transpose() * j;
        const Eigen::VectorXd g = j.transpose() * residual;

        bool accepted = false;
        double prev_loss = loss;
        while (lambda <= opt.damping_max) {
            Eigen::MatrixXd a = jtj;
            a.diagonal().array() += lambda;
            Eigen::VectorXd delta = a.ldlt().solve(-g);
            if (delta.allFinite()) {
                Eigen::VectorXd trial = theta + delta;
                Eigen::VectorXd trial_res = h(trial);
                if (trial_res.allFinite() && trial_res.squaredNorm() < loss) {
                    theta = std::move(trial);
                    residual = std::move(trial_res);
                    loss = residual.squaredNorm();
                    lambda /= opt.damping_factor;
                    accepted = true;
                    break;
                }
            }
            lambda *= opt.damping_factor;
        }
        if (!accepted) break; // damping overflow: stalled
        if (loss_trace) loss_trace->push_back(loss);
        best = {theta, loss, iter};
        if (prev_loss - loss < opt.rel_tol * prev_loss) break;
    }
    return best;
}

} // namespace srlab
