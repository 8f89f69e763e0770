#pragma once

#include <string>

#include "fuselab/dataset.hpp"
#include "fuselab/rng.hpp"

namespace fuselab::testing {

/// Class c gets mean offset·(c−1) in every coordinate of both modalities plus
/// unit-variance Gaussian noise. Labels cycle 0,1,2 unless `label_of` is set.
inline Dataset separable_dataset(std::size_t n, std::uint64_t seed, std::uint32_t text_dim = 768,
                                 std::uint32_t image_dim = 384, double offset = 2.0,
                                 const std::string& prefix = "s") {
    Dataset ds;
    ds.text_dim = text_dim;
    ds.image_dim = image_dim;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        EmbeddingRecord r;
        r.id = prefix + std::to_string(i);
        const int c = static_cast<int>(i % 3);
        r.label = static_cast<Sentiment>(c);
        const double mean = offset * (c - 1);
        r.text.resize(text_dim);
        r.image.resize(image_dim);
        for (auto& x : r.text) x = static_cast<float>(mean + rng.normal());
        for (auto& x : r.image) x = static_cast<float>(mean + rng.normal());
        ds.records.push_back(std::move(r));
    }
    return ds;
}

/// Pure noise with labels drawn uniformly.
inline Dataset noise_dataset(std::size_t n, std::uint64_t seed, std::uint32_t text_dim = 768,
                             std::uint32_t image_dim = 384, const std::string& prefix = "n") {
    Dataset ds;
    ds.text_dim = text_dim;
    ds.image_dim = image_dim;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        EmbeddingRecord r;
        r.id = prefix + std::to_string(i);
        r.label = static_cast<Sentiment>(rng.index(3));
        r.text.resize(text_dim);
        r.image.resize(image_dim);
        for (auto& x : r.text) x = static_cast<float>(rng.normal());
        for (auto& x : r.image) x = static_cast<float>(rng.normal());
        ds.records.push_back(std::move(r));
    }
    return ds;
}

}  // namespace fuselab::testing
