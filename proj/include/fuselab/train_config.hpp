#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "fuselab/losses.hpp"
#include "fuselab/metrics.hpp"

namespace fuselab {

enum class SelectionMetric { MacroF1, WeightedF1, Accuracy };

/// JSON spellings: macro_f1, weighted_f1, accuracy.
std::string_view to_string(SelectionMetric m);
SelectionMetric parse_selection_metric(std::string_view name);

/// JSON spellings: focal, cross_entropy.
std::string_view to_string(LossKind k);
LossKind parse_loss_kind(std::string_view name);

double metric_value(const MetricsReport& r, SelectionMetric m);

struct TrainConfig {
    double learning_rate = 1e-3;
    double focal_gamma = 2.0;
    double dropout_rate = 0.0;
    LossKind loss_kind = LossKind::Focal;
    int batch_size = 32;
    int max_epochs = 100;
    int patience = 5;
    std::uint64_t seed = 42;
    SelectionMetric selection_metric = SelectionMetric::MacroF1;

    /// Throws DomainError on any out-of-range field.
    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::json to_json(const TrainConfig& c);
/// Requires exactly the TrainConfig field names.
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace fuselab
