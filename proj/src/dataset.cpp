#include "fuselab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "fuselab/byte_io.hpp"
#include "fuselab/errors.hpp"
#include "fuselab/fusion_model.hpp"
#include "fuselab/rng.hpp"

namespace fuselab {

std::string_view to_string(Sentiment s) {
    switch (s) {
        case Sentiment::Negative: return "negative";
        case Sentiment::Neutral: return "neutral";
        case Sentiment::Positive: return "positive";
    }
    return "unknown";
}

Sentiment parse_sentiment(std::string_view name) {
    if (name == "negative") return Sentiment::Negative;
    if (name == "neutral") return Sentiment::Neutral;
    if (name == "positive") return Sentiment::Positive;
    throw InputError("unknown sentiment label '" + std::string(name) + "'");
}

namespace {

bool all_finite(const std::vector<float>& v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

std::string record_tag(std::size_t i, const std::string& id) {
    return "record " + std::to_string(i) + (id.empty() ? "" : " ('" + id + "')");
}

}  // namespace

void Dataset::validate() const {
    if (text_dim == 0 || image_dim == 0) throw InputError("dataset dimensions must be positive");
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.id.empty()) throw InputError(record_tag(i, r.id) + " has an empty id");
        if (r.id.size() > 0xFFFF) throw InputError(record_tag(i, r.id) + " id is too long");
        if (static_cast<std::uint8_t>(r.label) > 2)
            throw InputError(record_tag(i, r.id) + " has an invalid label");
        if (r.text.size() != text_dim || r.image.size() != image_dim)
            throw DimensionError(record_tag(i, r.id) + " vectors do not match the declared " +
                                 std::to_string(text_dim) + "/" + std::to_string(image_dim) +
                                 " dimensions");
        if (!all_finite(r.text) || !all_finite(r.image))
            throw InputError(record_tag(i, r.id) + " contains non-finite values");
        if (!seen.insert(r.id).second)
            throw IntegrityError("duplicate record id '" + r.id + "'");
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.text_dim = text_dim;
    out.image_dim = image_dim;
    out.records.reserve(indices.size());
    for (std::size_t i : indices) out.records.push_back(records.at(i));
    return out;
}

bool same_content(const Dataset& a, const Dataset& b) {
    return a.text_dim == b.text_dim && a.image_dim == b.image_dim && a.records == b.records;
}

std::vector<std::uint8_t> encode_embeddings(const Dataset& dataset) {
    dataset.validate();
    io::ByteWriter w;
    w.raw(std::string_view(kEmbeddingMagic, 4));
    w.u32(kEmbeddingVersion);
    w.u64(dataset.records.size());
    w.u32(dataset.text_dim);
    w.u32(dataset.image_dim);
    w.u32(static_cast<std::uint32_t>(kNumClasses));
    for (const auto& r : dataset.records) {
        w.u16(static_cast<std::uint16_t>(r.id.size()));
        w.raw(r.id);
        w.u8(static_cast<std::uint8_t>(r.label));
        for (float x : r.text) w.f32(x);
        for (float x : r.image) w.f32(x);
    }
    return w.take();
}

Dataset decode_embeddings(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    r.set_context("embedding file header");
    if (bytes.size() < kEmbeddingHeaderBytes)
        throw FormatError("embedding file is " + std::to_string(bytes.size()) +
                          " bytes, shorter than its header");
    if (r.raw(4) != std::string_view(kEmbeddingMagic, 4))
        throw FormatError("not an embedding file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kEmbeddingVersion)
        throw UnsupportedVersionError("unsupported embedding file version " +
                                      std::to_string(version));
    const std::uint64_t count = r.u64();
    Dataset ds;
    ds.text_dim = r.u32();
    ds.image_dim = r.u32();
    const std::uint32_t classes = r.u32();
    if (ds.text_dim == 0 || ds.image_dim == 0)
        throw FormatError("embedding file declares a zero dimension");
    if (classes != kNumClasses)
        throw FormatError("embedding file declares " + std::to_string(classes) +
                          " classes, expected 3");
    // Smallest possible record: u16 + 1-byte id + label + payload.
    const std::uint64_t min_record = 2 + 1 + 1 + 4ull * (ds.text_dim + ds.image_dim);
    if (count > r.remaining() / min_record + 1)
        throw FormatError("embedding file declares " + std::to_string(count) +
                          " records but is too short to hold them");
    ds.records.reserve(static_cast<std::size_t>(count));
    std::unordered_set<std::string> seen;
    for (std::uint64_t i = 0; i < count; ++i) {
        r.set_context("record " + std::to_string(i));
        EmbeddingRecord rec;
        const std::uint16_t id_len = r.u16();
        if (id_len == 0) throw FormatError("record " + std::to_string(i) + " has an empty id");
        rec.id = r.raw(id_len);
        const std::uint8_t label = r.u8();
        if (label > 2)
            throw FormatError("record " + std::to_string(i) + " has invalid label " +
                              std::to_string(label));
        rec.label = static_cast<Sentiment>(label);
        rec.text.resize(ds.text_dim);
        for (auto& x : rec.text) x = r.f32();
        rec.image.resize(ds.image_dim);
        for (auto& x : rec.image) x = r.f32();
        if (!all_finite(rec.text) || !all_finite(rec.image))
            throw FormatError("record " + std::to_string(i) + " contains non-finite values");
        if (!seen.insert(rec.id).second)
            throw IntegrityError("duplicate record id '" + rec.id + "'");
        ds.records.push_back(std::move(rec));
    }
    if (r.remaining() != 0)
        throw FormatError("embedding file has " + std::to_string(r.remaining()) +
                          " trailing bytes after the last record");
    return ds;
}

Dataset load_embeddings(const std::filesystem::path& path) {
    auto bytes = io::read_file(path);
    Dataset ds = decode_embeddings(bytes);
    ds.source = path;
    return ds;
}

void save_embeddings(const Dataset& dataset, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_embeddings(dataset));
}

void SplitSpec::validate() const {
    if (!(train > 0.0 && val > 0.0 && test > 0.0))
        throw DomainError("split fractions must all be positive");
    if (std::abs(train + val + test - 1.0) > 1e-9)
        throw DomainError("split fractions must sum to 1");
}

DatasetSplits stratified_split(const Dataset& dataset, const SplitSpec& spec) {
    spec.validate();
    std::array<std::vector<std::size_t>, 3> by_class;
    for (std::size_t i = 0; i < dataset.records.size(); ++i)
        by_class[static_cast<std::size_t>(dataset.records[i].label)].push_back(i);
    for (std::size_t c = 0; c < 3; ++c) {
        if (by_class[c].size() < 3)
            throw InputError("class '" + std::string(to_string(static_cast<Sentiment>(c))) +
                             "' has " + std::to_string(by_class[c].size()) +
                             " samples; stratified splitting needs at least 3");
    }

    Rng rng(spec.seed);
    const std::array<double, 3> fractions{spec.train, spec.val, spec.test};
    std::array<std::vector<std::size_t>, 3> parts;
    for (auto& members : by_class) {
        rng.shuffle(std::span<std::size_t>(members));
        const std::size_t n = members.size();
        std::array<std::size_t, 3> counts{};
        std::array<double, 3> remainder{};
        std::size_t assigned = 0;
        for (std::size_t s = 0; s < 3; ++s) {
            const double exact = fractions[s] * static_cast<double>(n);
            counts[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
            remainder[s] = exact - static_cast<double>(counts[s]);
            assigned += counts[s];
        }
        while (assigned < n) {
            std::size_t best = 0;
            for (std::size_t s = 1; s < 3; ++s)
                if (remainder[s] > remainder[best]) best = s;
            ++counts[best];
            remainder[best] = -1.0;
            ++assigned;
        }
        std::size_t pos = 0;
        for (std::size_t s = 0; s < 3; ++s)
            for (std::size_t k = 0; k < counts[s]; ++k) parts[s].push_back(members[pos++]);
    }
    for (auto& p : parts) std::sort(p.begin(), p.end());
    return {dataset.subset(parts[0]), dataset.subset(parts[1]), dataset.subset(parts[2])};
}

std::array<std::size_t, 3> class_distribution(const Dataset& dataset) {
    std::array<std::size_t, 3> counts{};
    for (const auto& r : dataset.records) ++counts[static_cast<std::size_t>(r.label)];
    return counts;
}

}  // namespace fuselab
