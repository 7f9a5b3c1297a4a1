#pragma once

#include <Eigen/Dense>

#include "srlab/common.hpp"

namespace srlab {

enum class Partition : std::uint8_t { Train, Validation, Test };

struct Dataset {
    Eigen::MatrixXd X; // rows x features
    Eigen::VectorXd y; // empty when loaded without a target
    std::vector<std::string> feature_names;
    std::string target_name;
    std::vector<Partition> partition; // per row; everything starts as Train

    Eigen::Index rows() const { return X.rows(); }
    Eigen::Index features() const { return X.cols(); }
    std::vector<int> rows_of(Partition p) const;
    Eigen::MatrixXd x_of(Partition p) const;
    Eigen::VectorXd y_of(Partition p) const;
};

// numeric CSV with a header row; the target column is removed from the
// feature block; parse failures name the offending row and column
Dataset load_csv(const std::string& path, const std::string& target);
Dataset load_csv_features(const std::string& path); // no target required

// seeded shuffle; |test| = round(tf * rows), |validation| = round(vf * rest);
// a positive fraction that rounds to an empty partition is an error
void split(Dataset& d, double test_fraction, double validation_fraction, std::uint64_t seed);

struct StandardizationStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd std; // population convention
    std::vector<std::uint8_t> scaled; // constant columns stay unscaled
};

// statistics from the train partition, applied to every row
StandardizationStats standardize_features(Dataset& d);
void apply_standardization(Eigen::MatrixXd& X, const StandardizationStats& s);

double mse(const Eigen::ArrayXd& yhat, const Eigen::ArrayXd& y);
// both normalize by the population variance of y; zero variance is an error
double nmse(const Eigen::ArrayXd& yhat, const Eigen::ArrayXd& y);
double r2(const Eigen::ArrayXd& yhat, const Eigen::ArrayXd& y);

double population_variance(const Eigen::ArrayXd& v);

} // namespace srlab
