#pragma once

// Batched forward and backward passes for the three fusion heads.
//
// Shapes for a batch of B samples with model width d:
//   text (B×text_dim) ─proj→ t (B×d)      image (B×image_dim) ─proj→ v (B×d)
//   Basic:  fused = [t | v]
//   Self:   tokens C (2B×d), rows 2i = tᵢ, 2i+1 = vᵢ; attention within each
//           pair of rows; fused row i = attended rows 2i,2i+1 laid end to end
//   Dual:   t′ = attend(t·W_Qt, v·W_Kv, v·W_Vv), v′ = attend(v·W_Qv, t·W_Kt,
//           t·W_Vt) with one key each, then Self over [t′; v′]
//   head:   fused →dropout→ affine → relu →dropout→ affine → softmax

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fuselab/dataset.hpp"
#include "fuselab/dropout.hpp"
#include "fuselab/errors.hpp"
#include "fuselab/fusion_model.hpp"
#include "fuselab/kernels.hpp"
#include "fuselab/matrix.hpp"

namespace fuselab {

/// Dropout masks for the two classifier inputs; empty matrices mean no dropout.
template <class T>
struct DropoutMasks {
    Matrix<T> fused;   // B × 2d
    Matrix<T> hidden;  // B × hidden_dim

    static DropoutMasks sample(std::size_t batch, const ModelDims& dims, double rate, Rng& rng) {
        DropoutMasks m;
        if (rate > 0.0) {
            m.fused = dropout_mask<T>(batch, dims.fused_dim(), rate, rng);
            m.hidden = dropout_mask<T>(batch, dims.hidden_dim, rate, rng);
        }
        return m;
    }
};

template <class T>
struct SelfAttentionTrace {
    Matrix<T> tokens;  // 2B × d
    Matrix<T> query;
    Matrix<T> key;
    Matrix<T> value;
    kernels::AttentionOutput<T> attention;  // weights 2B × 2
};

template <class T>
struct CrossAttentionTrace {
    Matrix<T> text_query, text_key, text_value;     // t·W_Qt, t·W_Kt, t·W_Vt
    Matrix<T> image_query, image_key, image_value;  // v·W_Qv, v·W_Kv, v·W_Vv
    kernels::AttentionOutput<T> text_adjusted;      // t′, weights B × 1
    kernels::AttentionOutput<T> image_adjusted;     // v′
};

template <class T>
struct FusionTrace {
    std::optional<CrossAttentionTrace<T>> cross;
    std::optional<SelfAttentionTrace<T>> self;
    Matrix<T> fused;  // B × 2d
};

template <class T>
struct ForwardCache {
    Matrix<T> text_in;
    Matrix<T> image_in;
    Matrix<T> text;   // projected, B × d
    Matrix<T> image;  // projected, B × d
    FusionTrace<T> fusion;
    DropoutMasks<T> masks;
    Matrix<T> fused_in;    // fused after dropout
    Matrix<T> hidden_pre;  // before relu
    Matrix<T> hidden_in;   // after relu and dropout
    Matrix<T> logits;
    Matrix<T> probs;

    /// Bit pattern of the hidden ReLU activations, for kink detection.
    std::uint64_t activation_signature() const {
        std::uint64_t h = 1469598103934665603ull;
        for (T x : hidden_pre.values()) {
            h ^= x > T{0} ? 1u : 0u;
            h *= 1099511628211ull;
        }
        return h;
    }
};

namespace fusion_detail {

template <class T>
Matrix<T> interleave_rows(const Matrix<T>& a, const Matrix<T>& b) {
    if (!a.same_shape(b))
        throw DimensionError("cannot stack modality tokens of shapes " + a.shape() + " and " +
                             b.shape());
    Matrix<T> out(2 * a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        std::copy(a.row(i).begin(), a.row(i).end(), out.row(2 * i).begin());
        std::copy(b.row(i).begin(), b.row(i).end(), out.row(2 * i + 1).begin());
    }
    return out;
}

template <class T>
std::pair<Matrix<T>, Matrix<T>> deinterleave_rows(const Matrix<T>& m) {
    const std::size_t n = m.rows() / 2;
    std::pair<Matrix<T>, Matrix<T>> out{Matrix<T>(n, m.cols()), Matrix<T>(n, m.cols())};
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(m.row(2 * i).begin(), m.row(2 * i).end(), out.first.row(i).begin());
        std::copy(m.row(2 * i + 1).begin(), m.row(2 * i + 1).end(), out.second.row(i).begin());
    }
    return out;
}

template <class T>
Matrix<T> hconcat(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.rows() != b.rows())
        throw DimensionError("cannot concatenate " + a.shape() + " and " + b.shape());
    Matrix<T> out(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto o = out.row(i);
        std::copy(a.row(i).begin(), a.row(i).end(), o.begin());
        std::copy(b.row(i).begin(), b.row(i).end(), o.begin() + static_cast<std::ptrdiff_t>(a.cols()));
    }
    return out;
}

template <class T>
std::pair<Matrix<T>, Matrix<T>> hsplit(const Matrix<T>& m, std::size_t left) {
    std::pair<Matrix<T>, Matrix<T>> out{Matrix<T>(m.rows(), left),
                                        Matrix<T>(m.rows(), m.cols() - left)};
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        std::copy(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(left), out.first.row(i).begin());
        std::copy(r.begin() + static_cast<std::ptrdiff_t>(left), r.end(), out.second.row(i).begin());
    }
    return out;
}

template <class T>
void require_block(const std::optional<AttentionParams<T>>& block, const char* name) {
    if (!block) throw DimensionError(std::string("model has no ") + name + " block");
}

}  // namespace fusion_detail

template <class T>
Matrix<T> project(const Matrix<T>& x, const Affine<T>& layer) {
    return kernels::linear(x, layer.weight, layer.bias);
}

/// Self-attention over the two-token sequence [t; v] of every sample.
template <class T>
SelfAttentionTrace<T> self_attention_trace(const Matrix<T>& t, const Matrix<T>& v,
                                           const AttentionParams<T>& p) {
    SelfAttentionTrace<T> tr;
    tr.tokens = fusion_detail::interleave_rows(t, v);
    tr.query = kernels::matmul(tr.tokens, p.query);
    tr.key = kernels::matmul(tr.tokens, p.key);
    tr.value = kernels::matmul(tr.tokens, p.value);
    tr.attention = kernels::grouped_attention(tr.query, tr.key, tr.value, 2, p.key.cols());
    return tr;
}

/// Cross-modal adjustment: each modality's query attends over the other
/// modality's single key.
template <class T>
CrossAttentionTrace<T> cross_attention_trace(const Matrix<T>& t, const Matrix<T>& v,
                                             const AttentionParams<T>& text_block,
                                             const AttentionParams<T>& image_block) {
    CrossAttentionTrace<T> tr;
    tr.text_query = kernels::matmul(t, text_block.query);
    tr.text_key = kernels::matmul(t, text_block.key);
    tr.text_value = kernels::matmul(t, text_block.value);
    tr.image_query = kernels::matmul(v, image_block.query);
    tr.image_key = kernels::matmul(v, image_block.key);
    tr.image_value = kernels::matmul(v, image_block.value);
    tr.text_adjusted = kernels::grouped_attention(tr.text_query, tr.image_key, tr.image_value, 1,
                                                  image_block.key.cols());
    tr.image_adjusted = kernels::grouped_attention(tr.image_query, tr.text_key, tr.text_value, 1,
                                                   text_block.key.cols());
    return tr;
}

/// Fuses projected modalities according to the model kind.
template <class T>
FusionTrace<T> fuse(const FusionModel<T>& model, const Matrix<T>& t, const Matrix<T>& v) {
    if (!t.same_shape(v) || t.cols() != model.dims.model_dim)
        throw DimensionError("fusion inputs " + t.shape() + " and " + v.shape() +
                             " must both have " + std::to_string(model.dims.model_dim) +
                             " columns");
    FusionTrace<T> tr;
    switch (model.kind) {
        case FusionKind::Basic:
            tr.fused = fusion_detail::hconcat(t, v);
            break;
        case FusionKind::SelfAttention: {
            fusion_detail::require_block(model.self_attn, "self-attention");
            tr.self = self_attention_trace(t, v, *model.self_attn);
            tr.fused = tr.self->attention.output.reshaped(t.rows(), 2 * t.cols());
            break;
        }
        case FusionKind::DualAttention: {
            fusion_detail::require_block(model.cross_text, "text cross-attention");
            fusion_detail::require_block(model.cross_image, "image cross-attention");
            fusion_detail::require_block(model.self_attn, "self-attention");
            tr.cross = cross_attention_trace(t, v, *model.cross_text, *model.cross_image);
            tr.self = self_attention_trace(tr.cross->text_adjusted.output,
                                           tr.cross->image_adjusted.output, *model.self_attn);
            tr.fused = tr.self->attention.output.reshaped(t.rows(), 2 * t.cols());
            break;
        }
    }
    return tr;
}

/// Runs the full head on a batch. `masks` empty → inference behaviour.
template <class T>
ForwardCache<T> forward_batch(const FusionModel<T>& model, const Matrix<T>& text,
                              const Matrix<T>& image, DropoutMasks<T> masks = {}) {
    if (text.rows() != image.rows())
        throw DimensionError("text batch " + text.shape() + " and image batch " + image.shape() +
                             " differ in row count");
    if (text.cols() != model.dims.text_dim || image.cols() != model.dims.image_dim)
        throw DimensionError("inputs " + text.shape() + " / " + image.shape() +
                             " do not match model dimensions " +
                             std::to_string(model.dims.text_dim) + " / " +
                             std::to_string(model.dims.image_dim));
    ForwardCache<T> c;
    c.text_in = text;
    c.image_in = image;
    c.text = project(text, model.text_proj);
    c.image = project(image, model.image_proj);
    c.fusion = fuse(model, c.text, c.image);
    c.masks = std::move(masks);
    c.fused_in = c.masks.fused.empty() ? c.fusion.fused : kernels::hadamard(c.fusion.fused, c.masks.fused);
    c.hidden_pre = project(c.fused_in, model.hidden);
    Matrix<T> act = kernels::relu(c.hidden_pre);
    c.hidden_in = c.masks.hidden.empty() ? std::move(act) : kernels::hadamard(std::move(act), c.masks.hidden);
    c.logits = project(c.hidden_in, model.output);
    c.probs = kernels::softmax_rows(c.logits);
    return c;
}

/// Gradients of a scalar loss with respect to every parameter, given
/// d loss / d logits for the batch.
template <class T>
FusionModel<T> backward_batch(const FusionModel<T>& model, const ForwardCache<T>& c,
                              const Matrix<T>& d_logits) {
    using namespace kernels;
    if (!d_logits.same_shape(c.logits))
        throw DimensionError("logit gradient " + d_logits.shape() + " does not match logits " +
                             c.logits.shape());
    FusionModel<T> g = model.zeros_like();

    auto out = linear_backward(c.hidden_in, model.output.weight, d_logits);
    g.output.weight = std::move(out.weight);
    g.output.bias = std::move(out.bias);
    Matrix<T> d_act = c.masks.hidden.empty() ? std::move(out.input) : hadamard(std::move(out.input), c.masks.hidden);
    Matrix<T> d_hidden_pre = relu_backward(c.hidden_pre, std::move(d_act));

    auto hid = linear_backward(c.fused_in, model.hidden.weight, d_hidden_pre);
    g.hidden.weight = std::move(hid.weight);
    g.hidden.bias = std::move(hid.bias);
    Matrix<T> d_fused = c.masks.fused.empty() ? std::move(hid.input) : hadamard(std::move(hid.input), c.masks.fused);

    const std::size_t batch = c.text.rows(), d = model.dims.model_dim;
    Matrix<T> d_text, d_image;

    auto self_backward = [&](const SelfAttentionTrace<T>& tr, const AttentionParams<T>& p,
                             AttentionParams<T>& gp) {
        Matrix<T> d_attended = std::move(d_fused).reshaped(2 * batch, d);
        auto ga = grouped_attention_backward(tr.query, tr.key, tr.value, tr.attention.weights,
                                             d_attended, 2, p.key.cols());
        gp.query = matmul_tn(tr.tokens, ga.query);
        gp.key = matmul_tn(tr.tokens, ga.key);
        gp.value = matmul_tn(tr.tokens, ga.value);
        Matrix<T> d_tokens = matmul_nt(ga.query, p.query);
        add_inplace(d_tokens, matmul_nt(ga.key, p.key));
        add_inplace(d_tokens, matmul_nt(ga.value, p.value));
        return fusion_detail::deinterleave_rows(d_tokens);
    };

    switch (model.kind) {
        case FusionKind::Basic: {
            auto halves = fusion_detail::hsplit(d_fused, d);
            d_text = std::move(halves.first);
            d_image = std::move(halves.second);
            break;
        }
        case FusionKind::SelfAttention: {
            auto parts = self_backward(*c.fusion.self, *model.self_attn, *g.self_attn);
            d_text = std::move(parts.first);
            d_image = std::move(parts.second);
            break;
        }
        case FusionKind::DualAttention: {
            auto parts = self_backward(*c.fusion.self, *model.self_attn, *g.self_attn);
            const auto& tr = *c.fusion.cross;
            const auto& pt = *model.cross_text;
            const auto& pv = *model.cross_image;
            // t′ attends text queries over image keys/values; v′ the reverse.
            auto gt = grouped_attention_backward(tr.text_query, tr.image_key, tr.image_value,
                                                 tr.text_adjusted.weights, parts.first, 1,
                                                 pv.key.cols());
            auto gv = grouped_attention_backward(tr.image_query, tr.text_key, tr.text_value,
                                                 tr.image_adjusted.weights, parts.second, 1,
                                                 pt.key.cols());
            auto& ct = *g.cross_text;
            auto& cv = *g.cross_image;
            ct.query = matmul_tn(c.text, gt.query);
            ct.key = matmul_tn(c.text, gv.key);
            ct.value = matmul_tn(c.text, gv.value);
            cv.query = matmul_tn(c.image, gv.query);
            cv.key = matmul_tn(c.image, gt.key);
            cv.value = matmul_tn(c.image, gt.value);
            d_text = matmul_nt(gt.query, pt.query);
            add_inplace(d_text, matmul_nt(gv.key, pt.key));
            add_inplace(d_text, matmul_nt(gv.value, pt.value));
            d_image = matmul_nt(gv.query, pv.query);
            add_inplace(d_image, matmul_nt(gt.key, pv.key));
            add_inplace(d_image, matmul_nt(gt.value, pv.value));
            break;
        }
    }

    auto tp = linear_backward(c.text_in, model.text_proj.weight, d_text, false);
    g.text_proj.weight = std::move(tp.weight);
    g.text_proj.bias = std::move(tp.bias);
    auto ip = linear_backward(c.image_in, model.image_proj.weight, d_image, false);
    g.image_proj.weight = std::move(ip.weight);
    g.image_proj.bias = std::move(ip.bias);
    return g;
}

// Single-sample entry points. Vectors are plain spans; results are vectors.

namespace fusion_detail {

template <class T>
Matrix<T> as_row(std::span<const T> x, std::size_t expected, const char* what) {
    if (x.size() != expected)
        throw DimensionError(std::string(what) + " has length " + std::to_string(x.size()) +
                             ", expected " + std::to_string(expected));
    return Matrix<T>::row_vector(x);
}

template <class T>
std::vector<T> to_vector(const Matrix<T>& m) {
    return {m.values().begin(), m.values().end()};
}

}  // namespace fusion_detail

/// t = h_cls·W_t + b_t
template <class T>
std::vector<T> project_text(const FusionModel<T>& model, std::span<const T> h_cls) {
    return fusion_detail::to_vector(project(
        fusion_detail::as_row(h_cls, model.dims.text_dim, "text embedding"), model.text_proj));
}

/// v = g_cls·W_v + b_v
template <class T>
std::vector<T> project_visual(const FusionModel<T>& model, std::span<const T> g_cls) {
    return fusion_detail::to_vector(project(
        fusion_detail::as_row(g_cls, model.dims.image_dim, "image embedding"), model.image_proj));
}

/// c = [t, v]
template <class T>
std::vector<T> basic_fuse(std::span<const T> t, std::span<const T> v) {
    if (t.size() != v.size())
        throw DimensionError("basic_fuse: lengths " + std::to_string(t.size()) + " and " +
                             std::to_string(v.size()) + " differ");
    std::vector<T> c(t.begin(), t.end());
    c.insert(c.end(), v.begin(), v.end());
    return c;
}

template <class T>
std::vector<T> self_attention_fuse(std::span<const T> t, std::span<const T> v,
                                   const AttentionParams<T>& params) {
    const std::size_t d = params.query.rows();
    auto tr = self_attention_trace(fusion_detail::as_row(t, d, "t"), fusion_detail::as_row(v, d, "v"), params);
    return fusion_detail::to_vector(tr.attention.output);
}

template <class T>
std::vector<T> dual_attention_fuse(std::span<const T> t, std::span<const T> v,
                                   const AttentionParams<T>& cross_text,
                                   const AttentionParams<T>& cross_image,
                                   const AttentionParams<T>& self_params) {
    const std::size_t d = self_params.query.rows();
    auto cross = cross_attention_trace(fusion_detail::as_row(t, d, "t"),
                                       fusion_detail::as_row(v, d, "v"), cross_text, cross_image);
    auto tr = self_attention_trace(cross.text_adjusted.output, cross.image_adjusted.output,
                                   self_params);
    return fusion_detail::to_vector(tr.attention.output);
}

/// Classifier logits for one fused vector. With masks, dropout is applied
/// (training); without, inference.
template <class T>
std::vector<T> classify(const FusionModel<T>& model, std::span<const T> fused,
                        const DropoutMasks<T>& masks = {}) {
    Matrix<T> x = fusion_detail::as_row(fused, model.dims.fused_dim(), "fused representation");
    if (!masks.fused.empty()) x = kernels::hadamard(std::move(x), masks.fused);
    Matrix<T> h = kernels::relu(project(x, model.hidden));
    if (!masks.hidden.empty()) h = kernels::hadamard(std::move(h), masks.hidden);
    return fusion_detail::to_vector(project(h, model.output));
}

/// Class probabilities for one record. Train mode samples dropout masks from
/// `rng` at `dropout_rate`; Infer mode ignores both.
template <class T>
std::array<T, kNumClasses> forward(const FusionModel<T>& model, const EmbeddingRecord& record,
                                   Mode mode = Mode::Infer, double dropout_rate = 0.0,
                                   Rng* rng = nullptr) {
    std::vector<T> text(record.text.begin(), record.text.end());
    std::vector<T> image(record.image.begin(), record.image.end());
    DropoutMasks<T> masks;
    if (mode == Mode::Train && dropout_rate > 0.0) {
        if (!rng) throw InputError("training-mode forward needs a random generator");
        masks = DropoutMasks<T>::sample(1, model.dims, dropout_rate, *rng);
    }
    auto c = forward_batch(model, fusion_detail::as_row<T>(text, model.dims.text_dim, "text embedding"),
                           fusion_detail::as_row<T>(image, model.dims.image_dim, "image embedding"),
                           std::move(masks));
    std::array<T, kNumClasses> p{};
    for (std::size_t j = 0; j < kNumClasses; ++j) p[j] = c.probs(0, j);
    return p;
}

/// Gathers records into batch matrices.
template <class T>
struct Batch {
    Matrix<T> text;
    Matrix<T> image;
    std::vector<int> labels;
};

template <class T>
Batch<T> make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
    Batch<T> b{Matrix<T>(indices.size(), ds.text_dim), Matrix<T>(indices.size(), ds.image_dim), {}};
    b.labels.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto& rec = ds.records.at(indices[r]);
        std::copy(rec.text.begin(), rec.text.end(), b.text.row(r).begin());
        std::copy(rec.image.begin(), rec.image.end(), b.image.row(r).begin());
        b.labels.push_back(rec.label_index());
    }
    return b;
}

}  // namespace fuselab
