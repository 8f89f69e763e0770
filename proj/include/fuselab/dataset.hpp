#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace fuselab {

/// Canonical label encoding shared by every file and report.
enum class Sentiment : std::uint8_t { Negative = 0, Neutral = 1, Positive = 2 };

std::string_view to_string(Sentiment s);
Sentiment parse_sentiment(std::string_view name);

/// One sample: frozen text and image CLS embeddings plus its label.
struct EmbeddingRecord {
    std::string id;
    Sentiment label = Sentiment::Neutral;
    std::vector<float> text;   // text_dim
    std::vector<float> image;  // image_dim

    int label_index() const { return static_cast<int>(label); }
    friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

struct Dataset {
    std::vector<EmbeddingRecord> records;
    std::filesystem::path source;
    std::uint32_t text_dim = 768;
    std::uint32_t image_dim = 384;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }

    /// Throws on wrong vector lengths, non-finite entries, empty or duplicate ids.
    void validate() const;

    /// Records at `indices`, same dimensions, no source path.
    Dataset subset(std::span<const std::size_t> indices) const;
};

/// Compares records and dimensions; the source path is ignored.
bool same_content(const Dataset& a, const Dataset& b);

/// EmbeddingFile layout, all little-endian:
///   "MMEB" | u32 version=1 | u64 n_records | u32 text_dim | u32 image_dim |
///   u32 n_classes=3 | records...
/// record: u16 id_len | id bytes | u8 label | text_dim×f32 | image_dim×f32
inline constexpr char kEmbeddingMagic[4] = {'M', 'M', 'E', 'B'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 4 + 4 + 8 + 4 + 4 + 4;

std::vector<std::uint8_t> encode_embeddings(const Dataset& dataset);
Dataset decode_embeddings(std::span<const std::uint8_t> bytes);

Dataset load_embeddings(const std::filesystem::path& path);
/// Writes through a temporary file renamed into place.
void save_embeddings(const Dataset& dataset, const std::filesystem::path& path);

struct SplitSpec {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
    std::uint64_t seed = 42;

    void validate() const;
};

struct DatasetSplits {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Per-class shuffled split; per-class counts are allocated by largest
/// remainder so each deviates from its exact share by less than one sample.
DatasetSplits stratified_split(const Dataset& dataset, const SplitSpec& spec);

std::array<std::size_t, 3> class_distribution(const Dataset& dataset);

}  // namespace fuselab
