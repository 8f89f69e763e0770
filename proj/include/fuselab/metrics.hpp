#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

#include <json.hpp>

namespace fuselab {

/// counts[i][j]: samples of true class i predicted as class j.
struct ConfusionMatrix {
    std::array<std::array<std::uint64_t, 3>, 3> counts{};

    std::uint64_t total() const;
    std::uint64_t trace() const;
    std::uint64_t row_sum(std::size_t i) const;
    std::uint64_t col_sum(std::size_t j) const;
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
};

struct MetricsReport {
    double accuracy = 0.0;
    std::array<ClassScores, 3> per_class{};
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    ConfusionMatrix confusion;

    std::array<double, 3> class_f1() const {
        return {per_class[0].f1, per_class[1].f1, per_class[2].f1};
    }
};

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels);

/// Scores derived from a confusion matrix; every 0/0 ratio is taken as 0.
MetricsReport report(const ConfusionMatrix& cm);

nlohmann::json to_json(const MetricsReport& r);

}  // namespace fuselab
