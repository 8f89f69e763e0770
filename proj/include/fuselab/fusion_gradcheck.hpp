#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fuselab/fusion_model.hpp"
#include "fuselab/grad_check.hpp"

namespace fuselab {

struct FusionGradCheckOptions {
    ModelDims dims{};
    std::size_t batch_size = 4;
    double eps = 1e-3;
    double gamma = 2.0;
    /// Fixed dropout masks at this rate are folded into the objective.
    double dropout_rate = 0.0;
    /// Random coordinates checked per tensor; 0 checks every coordinate.
    std::size_t coords_per_block = 0;
    std::uint64_t seed = 42;
    /// Harness self-test: distorts the analytic gradient of this tensor.
    std::string fault_block;
};

struct BlockCheck {
    std::string name;
    std::size_t size = 0;
    GradCheckResult result;
};

/// 64-bit end-to-end check of the batch-mean focal loss against central
/// differences, one report per parameter tensor. Inputs, labels and
/// parameters are drawn from `options.seed`.
std::vector<BlockCheck> check_fusion_gradients(FusionKind kind,
                                               const FusionGradCheckOptions& options = {});

}  // namespace fuselab
