#include "srlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

namespace srlab {

std::vector<int> Dataset::rows_of(Partition p) const {
    std::vector<int> out;
    for (size_t i = 0; i < partition.size(); ++i)
        if (partition[i] == p) out.push_back(static_cast<int>(i));
    return out;
}

Eigen::MatrixXd Dataset::x_of(Partition p) const {
    auto idx = rows_of(p);
    Eigen::MatrixXd out(idx.size(), X.cols());
    for (size_t i = 0; i < idx.size(); ++i) out.row(i) = X.row(idx[i]);
    return out;
}

Eigen::VectorXd Dataset::y_of(Partition p) const {
    auto idx = rows_of(p);
    Eigen::VectorXd out(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) out(i) = y(idx[i]);
    return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // trim surrounding whitespace
        size_t a = cell.find_first_not_of(" \t\r");
        size_t b = cell.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

double parse_cell(const std::string& s, int row, const std::string& col) {
    const char* p = s.c_str();
    char* end = nullptr;
    double v = std::strtod(p, &end);
    if (s.empty() || end != p + s.size())
        throw data_error("csv: non-numeric value '" + s + "' at data row " + std::to_string(row) +
                         ", column '" + col + "'");
    return v;
}

Dataset load_csv_impl(const std::string& path, const std::string& target, bool need_target) {
    std::ifstream in(path);
    if (!in) throw data_error("csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw data_error("csv: '" + path + "' is empty");
    auto header = split_line(line);
    if (header.empty()) throw data_error("csv: '" + path + "' has an empty header");

    int target_col = -1;
    if (!target.empty()) {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == target) target_col = static_cast<int>(i);
        if (target_col < 0 && need_target) {
            std::string cols;
            for (size_t i = 0; i < header.size(); ++i) cols += (i ? ", " : "") + header[i];
            throw data_error("csv: target column '" + target + "' not found in '" + path +
                             "' (columns: " + cols + ")");
        }
    }

    std::vector<std::vector<double>> rows;
    int rowno = 0;
    while (std::getline(in, line)) {
        ++rowno;
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != header.size())
            throw data_error("csv: data row " + std::to_string(rowno) + " has " +
                             std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(header.size()));
        std::vector<double> vals(cells.size());
        for (size_t i = 0; i < cells.size(); ++i) vals[i] = parse_cell(cells[i], rowno, header[i]);
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw data_error("csv: '" + path + "' has no data rows");

    Dataset d;
    int n_feat = static_cast<int>(header.size()) - (target_col >= 0 ? 1 : 0);
    if (n_feat == 0) throw data_error("csv: '" + path + "' has no feature columns besides the target");
    d.X.resize(rows.size(), n_feat);
    if (target_col >= 0) {
        d.y.resize(rows.size());
        d.target_name = target;
    }
    for (size_t i = 0; i < header.size(); ++i)
        if (static_cast<int>(i) != target_col) d.feature_names.push_back(header[i]);
    for (size_t r = 0; r < rows.size(); ++r) {
        int c_out = 0;
        for (size_t c = 0; c < header.size(); ++c) {
            if (static_cast<int>(c) == target_col)
                d.y(r) = rows[r][c];
            else
                d.X(r, c_out++) = rows[r][c];
        }
    }
    d.partition.assign(rows.size(), Partition::Train);
    return d;
}

} // namespace

Dataset load_csv(const std::string& path, const std::string& target) {
    if (!target.empty()) return load_csv_impl(path, target, true);
    // unnamed target defaults to the last column
    std::ifstream in(path);
    if (!in) throw data_error("csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw data_error("csv: '" + path + "' is empty");
    auto header = split_line(line);
    if (header.empty()) throw data_error("csv: '" + path + "' has an empty header");
    return load_csv_impl(path, header.back(), true);
}

Dataset load_csv_features(const std::string& path) {
    return load_csv_impl(path, "", false);
}

void split(Dataset& d, double test_fraction, double validation_fraction, std::uint64_t seed) {
    if (test_fraction < 0 || test_fraction >= 1 || validation_fraction < 0 || validation_fraction >= 1)
        throw config_error("split: fractions must lie in [0, 1)");
    const int n = static_cast<int>(d.rows());
    if (n == 0) throw data_error("split: dataset has no rows");

    int n_test = static_cast<int>(std::lround(test_fraction * n));
    int n_val = static_cast<int>(std::lround(validation_fraction * (n - n_test)));
    if (test_fraction > 0 && n_test == 0)
        throw data_error("split: test fraction " + std::to_string(test_fraction) +
                         " yields an empty test partition for " + std::to_string(n) + " rows");
    if (validation_fraction > 0 && n_val == 0)
        throw data_error("split: validation fraction " + std::to_string(validation_fraction) +
                         " yields an empty validation partition");
    if (n - n_test - n_val <= 0) throw data_error("split: no rows left for training");

    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    d.partition.assign(n, Partition::Train);
    for (int i = 0; i < n_test; ++i) d.partition[idx[i]] = Partition::Test;
    for (int i = n_test; i < n_test + n_val; ++i) d.partition[idx[i]] = Partition::Validation;
}

StandardizationStats standardize_features(Dataset& d) {
    auto train = d.rows_of(Partition::Train);
    if (train.empty()) throw data_error("standardize: no training rows");
    const auto p = d.features();
    StandardizationStats s;
    s.mean.resize(p);
    s.std.resize(p);
    s.scaled.assign(p, 1);
    const double n = static_cast<double>(train.size());
    for (Eigen::Index c = 0; c < p; ++c) {
        double m = 0;
        for (int r : train) m += d.X(r, c);
        m /= n;
        double v = 0;
        for (int r : train) v += (d.X(r, c) - m) * (d.X(r, c) - m);
        v /= n;
        s.mean(c) = m;
        s.std(c) = std::sqrt(v);
        if (s.std(c) < 1e-12) {
            s.scaled[c] = 0; // constant feature: left as-is
            s.std(c) = 1.0;
            s.mean(c) = 0.0;
        }
    }
    apply_standardization(d.X, s);
    return s;
}

void apply_standardization(Eigen::MatrixXd& X, const StandardizationStats& s) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        if (!s.scaled[c]) continue;
        X.col(c) = (X.col(c).array() - s.mean(c)) / s.std(c);
    }
}

double population_variance(const Eigen::ArrayXd& v) {
    const double m = v.mean();
    return (v - m).square().mean();
}

double mse(const Eigen::ArrayXd& yhat, const Eigen::ArrayXd& y) {
    if (yhat.size() != y.size() || y.size() == 0)
        throw data_error("mse: prediction and target lengths differ or are zero");
    return (yhat - y).square().mean();
}

double nmse(const Eigen::ArrayXd& yhat, const Eigen::ArrayXd& y) {
    const double var = population_variance(y);
    if (!(var > 0)) throw numeric_error("nmse: target has zero variance");
    return mse(yhat, y) / var;
}

double r2(const Eigen::ArrayXd& yhat, const Eigen::ArrayXd& y) {
    const double var = population_variance(y);
    if (!(var > 0)) throw numeric_error("r2: target has zero variance");
    return 1.0 - mse(yhat, y) / var;
}

} // namespace srlab
