#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace srlab {

// error taxonomy maps 1:1 onto CLI exit codes (2/3/4)
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// inclusive bounds
inline int rand_int(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double rand_real(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double rand_norm(Rng& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline bool rand_bool(Rng& rng) {
    return std::uniform_int_distribution<int>(0, 1)(rng) == 1;
}

template <typename T>
const T& rand_pick(Rng& rng, const std::vector<T>& v) {
    return v[rand_int(rng, 0, static_cast<int>(v.size()) - 1)];
}

} // namespace srlab
