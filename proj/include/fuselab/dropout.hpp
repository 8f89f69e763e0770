#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fuselab/errors.hpp"
#include "fuselab/matrix.hpp"
#include "fuselab/rng.hpp"

namespace fuselab {

enum class Mode { Train, Infer };

inline void check_dropout_rate(double rate) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw DomainError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
}

/// Inverted-dropout mask: 0 with probability `rate`, otherwise 1/(1−rate).
template <class T>
Matrix<T> dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    check_dropout_rate(rate);
    Matrix<T> mask(rows, cols);
    const T keep = static_cast<T>(1.0 / (1.0 - rate));
    for (auto& m : mask.values()) m = rng.uniform() < rate ? T{0} : keep;
    return mask;
}

template <class T>
std::vector<T> dropout_apply(std::span<const T> x, double rate, Rng& rng, Mode mode) {
    check_dropout_rate(rate);
    std::vector<T> out(x.begin(), x.end());
    if (mode == Mode::Infer || rate == 0.0) return out;
    const T keep = static_cast<T>(1.0 / (1.0 - rate));
    for (auto& v : out) v = rng.uniform() < rate ? T{0} : v * keep;
    return out;
}

}  // namespace fuselab
