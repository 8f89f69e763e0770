#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "fuselab/errors.hpp"

namespace fuselab {

/// Objective value plus an optional signature of the piecewise regime the
/// evaluation landed in (e.g. the ReLU activation pattern). Coordinates whose
/// ±eps probes change regime straddle a kink and are not differentiable there.
struct Probe {
    double value = 0.0;
    std::uint64_t regime = 0;
};

struct GradCheckOptions {
    double eps = 1e-3;
    /// Coordinates to check; empty checks all of them.
    std::vector<std::size_t> coordinates;
    bool skip_regime_changes = true;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
};

inline double gradient_relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

namespace detail {

template <class F>
Probe evaluate_probe(F& f, std::span<const double> theta) {
    using R = std::invoke_result_t<F&, std::span<const double>>;
    Probe p;
    if constexpr (std::is_same_v<std::decay_t<R>, Probe>) {
        p = f(theta);
    } else {
        p.value = static_cast<double>(f(theta));
    }
    if (!std::isfinite(p.value)) throw EvaluationError("grad_check: objective is not finite");
    return p;
}

}  // namespace detail

/// Compares `analytic` against central differences
/// (f(θ+eps·eᵢ) − f(θ−eps·eᵢ)) / (2·eps) coordinate by coordinate.
/// `f` maps a parameter span to either a double or a Probe.
template <class F>
GradCheckResult grad_check(F&& f, std::span<const double> theta,
                           std::span<const double> analytic, const GradCheckOptions& options = {}) {
    if (!(options.eps > 0.0)) throw DomainError("grad_check: eps must be positive");
    if (analytic.size() != theta.size()) {
        throw DimensionError("grad_check: gradient length " + std::to_string(analytic.size()) +
                             " does not match parameter length " + std::to_string(theta.size()));
    }
    std::vector<double> point(theta.begin(), theta.end());
    const Probe center = detail::evaluate_probe(f, std::span<const double>(point));

    std::vector<std::size_t> coords = options.coordinates;
    if (coords.empty()) {
        coords.resize(theta.size());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    }

    GradCheckResult result;
    for (std::size_t i : coords) {
        if (i >= theta.size()) throw DimensionError("grad_check: coordinate out of range");
        const double saved = point[i];
        point[i] = saved + options.eps;
        const Probe plus = detail::evaluate_probe(f, std::span<const double>(point));
        point[i] = saved - options.eps;
        const Probe minus = detail::evaluate_probe(f, std::span<const double>(point));
        point[i] = saved;

        if (options.skip_regime_changes &&
            (plus.regime != center.regime || minus.regime != center.regime)) {
            ++result.skipped;
            continue;
        }
        const double numeric = (plus.value - minus.value) / (2.0 * options.eps);
        const double err = gradient_relative_error(analytic[i], numeric);
        ++result.checked;
        if (result.checked == 1 || err > result.max_relative_error) {
            result.max_relative_error = err;
            result.worst_index = i;
            result.analytic_at_worst = analytic[i];
            result.numeric_at_worst = numeric;
        }
    }
    return result;
}

}  // namespace fuselab
