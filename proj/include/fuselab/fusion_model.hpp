#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fuselab/errors.hpp"
#include "fuselab/matrix.hpp"
#include "fuselab/rng.hpp"

namespace fuselab {

enum class FusionKind : std::uint8_t { Basic = 0, SelfAttention = 1, DualAttention = 2 };

inline constexpr FusionKind kAllFusionKinds[] = {FusionKind::Basic, FusionKind::SelfAttention,
                                                 FusionKind::DualAttention};

/// CLI spelling: basic, self-attn, dual-attn.
std::string_view to_string(FusionKind kind);
FusionKind parse_fusion_kind(std::string_view name);

inline constexpr std::size_t kNumClasses = 3;

/// Layer widths. Defaults are the BERT-base / DINOv2-small CLS widths and a
/// 256-wide shared space; tests shrink them for exhaustive gradient checks.
struct ModelDims {
    std::size_t text_dim = 768;
    std::size_t image_dim = 384;
    std::size_t model_dim = 256;
    std::size_t hidden_dim = 256;

    std::size_t fused_dim() const { return 2 * model_dim; }
    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

template <class T>
struct Affine {
    Matrix<T> weight;  // in × out
    Matrix<T> bias;    // 1 × out
};

template <class T>
struct AttentionParams {
    Matrix<T> query;
    Matrix<T> key;
    Matrix<T> value;
};

/// Trainable parameters of one fusion head. Attention blocks are present
/// only for the kinds that use them:
///   self_attn              SelfAttention, DualAttention
///   cross_text/cross_image DualAttention (W_Qt.. applied to t, W_Qv.. to v)
template <class T>
struct FusionModel {
    FusionKind kind = FusionKind::Basic;
    ModelDims dims;
    Affine<T> text_proj;
    Affine<T> image_proj;
    std::optional<AttentionParams<T>> cross_text;
    std::optional<AttentionParams<T>> cross_image;
    std::optional<AttentionParams<T>> self_attn;
    Affine<T> hidden;
    Affine<T> output;

    /// Visits (name, tensor) in canonical order. The order fixes the model
    /// file layout and the optimizer state layout.
    template <class Fn>
    void for_each_parameter(Fn&& fn) {
        visit(*this, fn);
    }
    template <class Fn>
    void for_each_parameter(Fn&& fn) const {
        visit(*this, fn);
    }

    std::vector<std::string> parameter_names() const {
        std::vector<std::string> names;
        for_each_parameter([&](const std::string& n, const Matrix<T>&) { names.push_back(n); });
        return names;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for_each_parameter([&](const std::string&, const Matrix<T>& m) { n += m.size(); });
        return n;
    }

    Matrix<T>* find(std::string_view name) {
        Matrix<T>* hit = nullptr;
        for_each_parameter([&](const std::string& n, Matrix<T>& m) {
            if (n == name) hit = &m;
        });
        return hit;
    }

    template <class U>
    FusionModel<U> cast() const {
        FusionModel<U> out = FusionModel<U>::skeleton(kind, dims);
        std::vector<const Matrix<T>*> src;
        for_each_parameter([&](const std::string&, const Matrix<T>& m) { src.push_back(&m); });
        std::size_t i = 0;
        out.for_each_parameter([&](const std::string&, Matrix<U>& m) { m = src[i++]->template cast<U>(); });
        return out;
    }

    /// Same structure, every entry zero. Used as a gradient accumulator.
    FusionModel zeros_like() const { return skeleton(kind, dims); }

    bool all_finite() const {
        bool ok = true;
        for_each_parameter([&](const std::string&, const Matrix<T>& m) { ok = ok && m.all_finite(); });
        return ok;
    }

    friend bool operator==(const FusionModel& a, const FusionModel& b) {
        if (a.kind != b.kind || !(a.dims == b.dims)) return false;
        std::vector<const Matrix<T>*> lhs;
        a.for_each_parameter([&](const std::string&, const Matrix<T>& m) { lhs.push_back(&m); });
        std::size_t i = 0;
        bool same = true;
        b.for_each_parameter([&](const std::string&, const Matrix<T>& m) {
            same = same && i < lhs.size() && *lhs[i] == m;
            ++i;
        });
        return same && i == lhs.size();
    }

    /// Zero-filled parameters with the shapes implied by kind and dims.
    static FusionModel skeleton(FusionKind kind, const ModelDims& dims) {
        FusionModel m;
        m.kind = kind;
        m.dims = dims;
        const std::size_t d = dims.model_dim;
        m.text_proj = {Matrix<T>(dims.text_dim, d), Matrix<T>(1, d)};
        m.image_proj = {Matrix<T>(dims.image_dim, d), Matrix<T>(1, d)};
        auto square = [d] {
            return AttentionParams<T>{Matrix<T>(d, d), Matrix<T>(d, d), Matrix<T>(d, d)};
        };
        if (kind == FusionKind::DualAttention) {
            m.cross_text = square();
            m.cross_image = square();
        }
        if (kind != FusionKind::Basic) m.self_attn = square();
        m.hidden = {Matrix<T>(dims.fused_dim(), dims.hidden_dim), Matrix<T>(1, dims.hidden_dim)};
        m.output = {Matrix<T>(dims.hidden_dim, kNumClasses), Matrix<T>(1, kNumClasses)};
        return m;
    }

private:
    template <class Self, class Fn>
    static void visit(Self& self, Fn& fn) {
        auto affine = [&](const char* prefix, auto& a) {
            fn(std::string(prefix) + ".weight", a.weight);
            fn(std::string(prefix) + ".bias", a.bias);
        };
        auto attention = [&](const char* prefix, auto& block) {
            if (!block) return;
            fn(std::string(prefix) + ".query", block->query);
            fn(std::string(prefix) + ".key", block->key);
            fn(std::string(prefix) + ".value", block->value);
        };
        affine("text_proj", self.text_proj);
        affine("image_proj", self.image_proj);
        attention("cross_text", self.cross_text);
        attention("cross_image", self.cross_image);
        attention("self_attn", self.self_attn);
        affine("classifier.hidden", self.hidden);
        affine("classifier.output", self.output);
    }
};

/// Uniform fan-based initialization in ±√(6/(fan_in+fan_out)); biases zero.
/// Draws happen in double and are rounded to T, so float and double models
/// from the same seed agree to float precision.
template <class T>
FusionModel<T> init_params(FusionKind kind, std::uint64_t seed, const ModelDims& dims = {}) {
    FusionModel<T> model = FusionModel<T>::skeleton(kind, dims);
    Rng rng(seed);
    model.for_each_parameter([&](const std::string& name, Matrix<T>& m) {
        if (name.ends_with(".bias")) return;
        const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
        for (auto& x : m.values()) x = static_cast<T>(rng.uniform(-limit, limit));
    });
    return model;
}

}  // namespace fuselab
