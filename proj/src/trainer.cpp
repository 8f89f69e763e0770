#include "fuselab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "fuselab/adam.hpp"
#include "fuselab/errors.hpp"
#include "fuselab/fusion.hpp"
#include "fuselab/losses.hpp"
#include "fuselab/rng.hpp"

namespace fuselab {

namespace {

constexpr std::size_t kEvalBatch = 256;
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kDropoutStream = 2;

}  // namespace

void check_compatible(const FusionModel<float>& model, const Dataset& ds) {
    if (ds.text_dim != model.dims.text_dim || ds.image_dim != model.dims.image_dim)
        throw DimensionError("dataset dimensions " + std::to_string(ds.text_dim) + "/" +
                             std::to_string(ds.image_dim) + " do not match model dimensions " +
                             std::to_string(model.dims.text_dim) + "/" +
                             std::to_string(model.dims.image_dim));
}

Matrix<float> predict_probabilities(const FusionModel<float>& model, const Dataset& ds) {
    check_compatible(model, ds);
    Matrix<float> probs(ds.size(), kNumClasses);
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < ds.size(); start += kEvalBatch) {
        const std::size_t end = std::min(ds.size(), start + kEvalBatch);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        auto batch = make_batch<float>(ds, idx);
        auto cache = forward_batch(model, batch.text, batch.image);
        for (std::size_t i = 0; i < idx.size(); ++i)
            std::copy(cache.probs.row(i).begin(), cache.probs.row(i).end(),
                      probs.row(start + i).begin());
    }
    return probs;
}

std::vector<int> argmax_rows(const Matrix<float>& probs) {
    std::vector<int> out(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        auto r = probs.row(i);
        out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return out;
}

MetricsReport evaluate(const FusionModel<float>& model, const Dataset& ds) {
    if (ds.empty()) throw InputError("cannot evaluate on an empty dataset");
    auto preds = argmax_rows(predict_probabilities(model, ds));
    std::vector<int> labels;
    labels.reserve(ds.size());
    for (const auto& r : ds.records) labels.push_back(r.label_index());
    return report(confusion(preds, labels));
}

std::array<double, 3> inverse_frequency_weights(const Dataset& ds) {
    const auto counts = class_distribution(ds);
    std::array<double, 3> w{};
    for (std::size_t c = 0; c < 3; ++c)
        w[c] = counts[c] == 0 ? 0.0
                              : static_cast<double>(ds.size()) / (3.0 * static_cast<double>(counts[c]));
    return w;
}

TrainResult train(FusionModel<float> model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config, const TrainOptions& options) {
    config.validate();
    if (train_set.empty()) throw InputError("training set is empty");
    if (val_set.empty()) throw InputError("validation set is empty");
    check_compatible(model, train_set);
    check_compatible(model, val_set);
    {
        std::unordered_set<std::string> ids;
        for (const auto& r : train_set.records) ids.insert(r.id);
        for (const auto& r : val_set.records)
            if (ids.count(r.id))
                throw InputError("record '" + r.id + "' appears in both training and validation sets");
    }

    const LossSpec loss{config.loss_kind, config.focal_gamma, options.class_weights};
    Rng shuffle_rng(derive_seed(config.seed, kShuffleStream));
    Rng dropout_rng(derive_seed(config.seed, kDropoutStream));
    AdamState<float> adam = AdamState<float>::for_model(model);

    TrainResult result{model, {}};
    double best_metric = -1.0;
    int since_best = 0;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch_size = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        int batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + batch_size);
            std::span<const std::size_t> idx(order.data() + start, end - start);
            auto batch = make_batch<float>(train_set, idx);
            auto masks = DropoutMasks<float>::sample(idx.size(), model.dims, config.dropout_rate,
                                                     dropout_rng);
            auto cache = forward_batch(model, batch.text, batch.image, std::move(masks));
            auto bl = batch_loss(cache.probs, batch.labels, loss);
            if (!std::isfinite(bl.mean))
                throw DivergenceError(epoch, batch_index,
                                      "non-finite loss at epoch " + std::to_string(epoch) +
                                          ", batch " + std::to_string(batch_index));
            loss_sum += bl.mean * static_cast<double>(idx.size());
            auto grads = backward_batch(model, cache, bl.d_logits);
            adam_step(model, grads, adam, config.learning_rate);
        }
        if (!model.all_finite())
            throw DivergenceError(epoch, batch_index - 1,
                                  "parameters became non-finite at epoch " + std::to_string(epoch));

        const MetricsReport val = evaluate(model, val_set);
        EpochRecord rec = EpochRecord::from_report(
            epoch, loss_sum / static_cast<double>(train_set.size()), val);
        if (options.track_train_accuracy) rec.train_accuracy = evaluate(model, train_set).accuracy;

        const double metric = metric_value(val, config.selection_metric);
        if (metric > best_metric) {
            best_metric = metric;
            since_best = 0;
            result.model = model;
            result.history.best_epoch = epoch;
        } else {
            ++since_best;
        }
        result.history.epochs.push_back(rec);

        if (options.on_epoch && !options.on_epoch(rec)) break;
        if (since_best >= config.patience) {
            result.history.stopped_early = epoch < config.max_epochs;
            break;
        }
    }
    return result;
}

}  // namespace fuselab
