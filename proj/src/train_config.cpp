#include "fuselab/train_config.hpp"

#include <set>

#include "fuselab/errors.hpp"

namespace fuselab {

std::string_view to_string(SelectionMetric m) {
    switch (m) {
        case SelectionMetric::MacroF1: return "macro_f1";
        case SelectionMetric::WeightedF1: return "weighted_f1";
        case SelectionMetric::Accuracy: return "accuracy";
    }
    return "unknown";
}

SelectionMetric parse_selection_metric(std::string_view name) {
    if (name == "macro_f1" || name == "macro-f1") return SelectionMetric::MacroF1;
    if (name == "weighted_f1" || name == "weighted-f1") return SelectionMetric::WeightedF1;
    if (name == "accuracy") return SelectionMetric::Accuracy;
    throw InputError("unknown selection metric '" + std::string(name) + "'");
}

std::string_view to_string(LossKind k) {
    return k == LossKind::Focal ? "focal" : "cross_entropy";
}

LossKind parse_loss_kind(std::string_view name) {
    if (name == "focal") return LossKind::Focal;
    if (name == "cross_entropy" || name == "ce") return LossKind::CrossEntropy;
    throw InputError("unknown loss kind '" + std::string(name) + "'");
}

double metric_value(const MetricsReport& r, SelectionMetric m) {
    switch (m) {
        case SelectionMetric::MacroF1: return r.macro_f1;
        case SelectionMetric::WeightedF1: return r.weighted_f1;
        case SelectionMetric::Accuracy: return r.accuracy;
    }
    return 0.0;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw DomainError("learning_rate must be positive");
    if (!(focal_gamma >= 0.0)) throw DomainError("focal_gamma must be non-negative");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw DomainError("dropout_rate must lie in [0, 1)");
    if (batch_size < 1) throw DomainError("batch_size must be at least 1");
    if (max_epochs < 1) throw DomainError("max_epochs must be at least 1");
    if (patience < 1) throw DomainError("patience must be at least 1");
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"focal_gamma", c.focal_gamma},
            {"dropout_rate", c.dropout_rate},
            {"loss_kind", std::string(to_string(c.loss_kind))},
            {"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},
            {"patience", c.patience},
            {"seed", c.seed},
            {"selection_metric", std::string(to_string(c.selection_metric))}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> fields{"learning_rate", "focal_gamma", "dropout_rate",
                                              "loss_kind",     "batch_size",  "max_epochs",
                                              "patience",      "seed",        "selection_metric"};
    if (!j.is_object()) throw InputError("train config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!fields.count(key)) throw InputError("unknown train config field '" + key + "'");
    for (const auto& f : fields)
        if (!j.contains(f)) throw InputError("train config is missing field '" + f + "'");
    TrainConfig c;
    try {
        c.learning_rate = j.at("learning_rate").get<double>();
        c.focal_gamma = j.at("focal_gamma").get<double>();
        c.dropout_rate = j.at("dropout_rate").get<double>();
        c.loss_kind = parse_loss_kind(j.at("loss_kind").get<std::string>());
        c.batch_size = j.at("batch_size").get<int>();
        c.max_epochs = j.at("max_epochs").get<int>();
        c.patience = j.at("patience").get<int>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.selection_metric = parse_selection_metric(j.at("selection_metric").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed train config: ") + e.what());
    }
    c.validate();
    return c;
}

}  // namespace fuselab
