#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fuselab/dataset.hpp"

namespace fuselab {

/// One row of the extractor input: `id,text,image_path,label`.
struct ManifestRow {
    std::string id;
    std::string text;
    std::filesystem::path image_path;
    Sentiment label = Sentiment::Neutral;

    friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

/// RFC 4180 CSV with the exact header `id,text,image_path,label`. Quoted
/// fields may hold commas, doubled quotes and newlines. Relative image paths
/// are kept as written.
std::vector<ManifestRow> parse_manifest(std::istream& in);

/// As parse_manifest; relative image paths are resolved against the
/// manifest's directory.
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

void write_manifest(const std::vector<ManifestRow>& rows, std::ostream& out);

/// Rows whose image file does not exist.
std::vector<std::size_t> missing_images(const std::vector<ManifestRow>& rows);

}  // namespace fuselab
