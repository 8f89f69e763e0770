#include "fuselab/fusion_gradcheck.hpp"

#include <algorithm>
#include <numeric>

#include "fuselab/fusion.hpp"
#include "fuselab/losses.hpp"
#include "fuselab/rng.hpp"

namespace fuselab {

std::vector<BlockCheck> check_fusion_gradients(FusionKind kind,
                                               const FusionGradCheckOptions& options) {
    Rng rng(options.seed);
    auto model = init_params<double>(kind, derive_seed(options.seed, 7), options.dims);
    const std::size_t n = options.batch_size;
    Matrix<double> text(n, options.dims.text_dim), image(n, options.dims.image_dim);
    for (auto& x : text.values()) x = rng.normal();
    for (auto& x : image.values()) x = rng.normal();
    std::vector<int> labels(n);
    for (auto& y : labels) y = static_cast<int>(rng.index(kNumClasses));
    const auto masks = DropoutMasks<double>::sample(n, options.dims, options.dropout_rate, rng);

    const LossSpec loss{LossKind::Focal, options.gamma, {1.0, 1.0, 1.0}};
    auto base = forward_batch(model, text, image, masks);
    auto bl = batch_loss(base.probs, labels, loss);
    auto grads = backward_batch(model, base, bl.d_logits);

    auto objective = [&](const FusionModel<double>& m) {
        auto c = forward_batch(m, text, image, masks);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            total += focal_loss<double>(c.probs.row(i), labels[i], options.gamma);
        return Probe{total / static_cast<double>(n), c.activation_signature()};
    };

    std::vector<BlockCheck> out;
    for (const auto& name : model.parameter_names()) {
        Matrix<double>& analytic = *grads.find(name);
        if (name == options.fault_block)
            for (auto& g : analytic.values()) g = 1.5 * g + 1e-3;

        FusionModel<double> probe_model = model;
        Matrix<double>& slot = *probe_model.find(name);
        auto f = [&](std::span<const double> theta) {
            std::copy(theta.begin(), theta.end(), slot.values().begin());
            return objective(probe_model);
        };

        GradCheckOptions gc;
        gc.eps = options.eps;
        const std::size_t size = slot.size();
        if (options.coords_per_block > 0 && options.coords_per_block < size) {
            std::vector<std::size_t> all(size);
            std::iota(all.begin(), all.end(), std::size_t{0});
            std::uint64_t tag = 1469598103934665603ull;
            for (char ch : name) tag = (tag ^ static_cast<unsigned char>(ch)) * 1099511628211ull;
            Rng pick(derive_seed(options.seed, tag));
            for (std::size_t i = 0; i < options.coords_per_block; ++i)
                std::swap(all[i], all[i + pick.index(size - i)]);
            gc.coordinates.assign(all.begin(),
                                  all.begin() + static_cast<std::ptrdiff_t>(options.coords_per_block));
            std::sort(gc.coordinates.begin(), gc.coordinates.end());
        }
        const Matrix<double>& original = *model.find(name);
        BlockCheck bc{name, size, grad_check(f, original.values(), analytic.values(), gc)};
        out.push_back(std::move(bc));
    }
    return out;
}

}  // namespace fuselab
