#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fuselab/errors.hpp"
#include "fuselab/matrix.hpp"

namespace fuselab {

enum class LossKind { Focal, CrossEntropy };

/// Probabilities are clamped here before the log.
inline constexpr double kProbabilityFloor = 1e-12;

namespace detail {

template <class T>
void check_loss_args(std::span<const T> probs, int label, double gamma) {
    if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
        throw DomainError("class label " + std::to_string(label) + " out of range");
    if (!(gamma >= 0.0)) throw DomainError("focal gamma must be non-negative");
    double total = 0.0;
    for (T p : probs) total += static_cast<double>(p);
    if (std::abs(total - 1.0) > 1e-5)
        throw DomainError("probabilities sum to " + std::to_string(total) + ", expected 1");
}

inline double class_weight(std::span<const double> weights, int label) {
    return weights.empty() ? 1.0 : weights[static_cast<std::size_t>(label)];
}

/// d loss / d p_label for the clamped focal loss.
inline double focal_dloss_dp(double p, double gamma, double alpha) {
    if (p < kProbabilityFloor) return 0.0;
    const double q = 1.0 - p;
    double d = std::pow(q, gamma) / p;
    if (gamma != 0.0 && q > 0.0) d -= gamma * std::pow(q, gamma - 1.0) * std::log(p);
    return -alpha * d;
}

}  // namespace detail

/// −α·(1−p)^γ·ln p for p = probs[label].
template <class T>
double focal_loss(std::span<const T> probs, int label, double gamma,
                  std::span<const double> class_weights = {}) {
    detail::check_loss_args(probs, label, gamma);
    const double p = std::max(static_cast<double>(probs[static_cast<std::size_t>(label)]),
                              kProbabilityFloor);
    const double alpha = detail::class_weight(class_weights, label);
    return -alpha * std::pow(1.0 - p, gamma) * std::log(p);
}

template <class T>
double cross_entropy(std::span<const T> probs, int label) {
    detail::check_loss_args(probs, label, 0.0);
    const double p = std::max(static_cast<double>(probs[static_cast<std::size_t>(label)]),
                              kProbabilityFloor);
    return -std::log(p);
}

/// Gradient of focal_loss with respect to the probability vector.
template <class T>
std::vector<double> focal_loss_grad_probs(std::span<const T> probs, int label, double gamma,
                                          std::span<const double> class_weights = {}) {
    detail::check_loss_args(probs, label, gamma);
    std::vector<double> g(probs.size(), 0.0);
    g[static_cast<std::size_t>(label)] = detail::focal_dloss_dp(
        static_cast<double>(probs[static_cast<std::size_t>(label)]), gamma,
        detail::class_weight(class_weights, label));
    return g;
}

/// Gradient of focal_loss(softmax(z)) with respect to the logits z, given
/// p = softmax(z): dL/dz_j = dL/dp_y · p_y · (δ_jy − p_j).
template <class T>
std::vector<double> focal_loss_grad_logits(std::span<const T> probs, int label, double gamma,
                                           std::span<const double> class_weights = {}) {
    detail::check_loss_args(probs, label, gamma);
    const auto y = static_cast<std::size_t>(label);
    const double py = static_cast<double>(probs[y]);
    const double scale =
        detail::focal_dloss_dp(py, gamma, detail::class_weight(class_weights, label)) * py;
    std::vector<double> g(probs.size());
    for (std::size_t j = 0; j < probs.size(); ++j)
        g[j] = scale * ((j == y ? 1.0 : 0.0) - static_cast<double>(probs[j]));
    return g;
}

struct LossSpec {
    LossKind kind = LossKind::Focal;
    double gamma = 2.0;
    std::array<double, 3> class_weights{1.0, 1.0, 1.0};

    /// Cross-entropy is focal loss at γ = 0 with unit weights.
    double effective_gamma() const { return kind == LossKind::Focal ? gamma : 0.0; }
};

template <class T>
struct BatchLoss {
    double mean = 0.0;
    Matrix<T> d_logits;  // gradient of the batch mean
};

/// Mean loss over rows of `probs` and its gradient with respect to the logits.
template <class T>
BatchLoss<T> batch_loss(const Matrix<T>& probs, std::span<const int> labels, const LossSpec& spec) {
    if (probs.rows() != labels.size())
        throw DimensionError("batch_loss: " + std::to_string(probs.rows()) +
                             " probability rows for " + std::to_string(labels.size()) + " labels");
    if (probs.rows() == 0) throw InputError("batch_loss: empty batch");
    const double gamma = spec.effective_gamma();
    std::span<const double> weights;
    if (spec.kind == LossKind::Focal) weights = spec.class_weights;
    BatchLoss<T> out{0.0, Matrix<T>(probs.rows(), probs.cols())};
    const double inv = 1.0 / static_cast<double>(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        auto row = probs.row(i);
        out.mean += focal_loss<T>(row, labels[i], gamma, weights);
        auto g = focal_loss_grad_logits<T>(row, labels[i], gamma, weights);
        for (std::size_t j = 0; j < g.size(); ++j) out.d_logits(i, j) = static_cast<T>(g[j] * inv);
    }
    out.mean *= inv;
    return out;
}

}  // namespace fuselab
