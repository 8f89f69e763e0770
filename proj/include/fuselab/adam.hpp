#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fuselab/errors.hpp"
#include "fuselab/fusion_model.hpp"
#include "fuselab/matrix.hpp"

namespace fuselab {

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment accumulators, one pair per parameter tensor.
template <class T>
struct AdamState {
    AdamHyper hyper;
    std::uint64_t step = 0;
    std::vector<Matrix<T>> m;
    std::vector<Matrix<T>> v;

    static AdamState for_model(const FusionModel<T>& model, AdamHyper hyper = {}) {
        AdamState s;
        s.hyper = hyper;
        model.for_each_parameter([&](const std::string&, const Matrix<T>& p) {
            s.m.emplace_back(p.rows(), p.cols());
            s.v.emplace_back(p.rows(), p.cols());
        });
        return s;
    }
};

/// One bias-corrected Adam update over parallel lists of tensors.
template <class T>
void adam_step(const std::vector<Matrix<T>*>& params, const std::vector<const Matrix<T>*>& grads,
               AdamState<T>& state, double lr) {
    if (params.size() != grads.size())
        throw DimensionError("adam_step: parameter and gradient counts differ");
    if (state.m.empty()) {
        for (const auto* p : params) {
            state.m.emplace_back(p->rows(), p->cols());
            state.v.emplace_back(p->rows(), p->cols());
        }
    }
    if (state.m.size() != params.size())
        throw DimensionError("adam_step: optimizer state does not match parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(state.m[i]))
            throw DimensionError("adam_step: gradient " + grads[i]->shape() +
                                 " does not mirror parameter " + params[i]->shape());
    }

    ++state.step;
    const auto& h = state.hyper;
    const double t = static_cast<double>(state.step);
    const double correct1 = 1.0 - std::pow(h.beta1, t);
    const double correct2 = 1.0 - std::pow(h.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i]->values();
        auto g = grads[i]->values();
        auto m = state.m[i].values();
        auto v = state.v[i].values();
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = static_cast<double>(g[j]);
            const double mj = h.beta1 * static_cast<double>(m[j]) + (1.0 - h.beta1) * gj;
            const double vj = h.beta2 * static_cast<double>(v[j]) + (1.0 - h.beta2) * gj * gj;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double update = lr * (mj / correct1) / (std::sqrt(vj / correct2) + h.epsilon);
            p[j] = static_cast<T>(static_cast<double>(p[j]) - update);
        }
    }
}

template <class T>
void adam_step(FusionModel<T>& model, const FusionModel<T>& grads, AdamState<T>& state,
               double lr) {
    std::vector<Matrix<T>*> params;
    std::vector<const Matrix<T>*> gs;
    model.for_each_parameter([&](const std::string&, Matrix<T>& p) { params.push_back(&p); });
    grads.for_each_parameter([&](const std::string&, const Matrix<T>& g) { gs.push_back(&g); });
    adam_step(params, gs, state, lr);
}

}  // namespace fuselab
