#pragma once

#include <array>
#include <functional>

#include "fuselab/dataset.hpp"
#include "fuselab/fusion_model.hpp"
#include "fuselab/history.hpp"
#include "fuselab/matrix.hpp"
#include "fuselab/metrics.hpp"
#include "fuselab/train_config.hpp"

namespace fuselab {

struct TrainOptions {
    /// Focal-loss α per class; ignored for cross-entropy.
    std::array<double, 3> class_weights{1.0, 1.0, 1.0};
    /// Evaluate the training split after every epoch (fills train_accuracy).
    bool track_train_accuracy = false;
    /// Called after each epoch; returning false stops training.
    std::function<bool(const EpochRecord&)> on_epoch;
};

struct TrainResult {
    FusionModel<float> model;  // parameters from the best validation epoch
    TrainHistory history;
};

/// Mini-batch Adam training with per-epoch validation and early stopping.
/// The data order is shuffled each epoch from a generator seeded by
/// config.seed; dropout draws from a separate stream of the same seed.
TrainResult train(FusionModel<float> model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config, const TrainOptions& options = {});

/// Row i holds class probabilities for record i (inference mode).
Matrix<float> predict_probabilities(const FusionModel<float>& model, const Dataset& ds);

std::vector<int> argmax_rows(const Matrix<float>& probs);

MetricsReport evaluate(const FusionModel<float>& model, const Dataset& ds);

/// α_c = n / (3·n_c), zero-count classes get weight 0.
std::array<double, 3> inverse_frequency_weights(const Dataset& ds);

/// Throws DimensionError when the dataset cannot feed the model.
void check_compatible(const FusionModel<float>& model, const Dataset& ds);

}  // namespace fuselab
