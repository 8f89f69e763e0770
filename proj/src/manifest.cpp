#include "fuselab/manifest.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "fuselab/errors.hpp"

namespace fuselab {

namespace {

constexpr const char* kHeader[] = {"id", "text", "image_path", "label"};

/// Reads one CSV record. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
    fields.clear();
    if (in.peek() == std::char_traits<char>::eof()) return false;
    std::string field;
    bool quoted = false, was_quoted = false;
    ++line;
    for (;;) {
        const int ch = in.get();
        if (ch == std::char_traits<char>::eof()) {
            if (quoted) throw FormatError("manifest line " + std::to_string(line) + ": unterminated quote");
            fields.push_back(std::move(field));
            return true;
        }
        const char c = static_cast<char>(ch);
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get();
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        if (c == '"') {
            if (!field.empty() || was_quoted)
                throw FormatError("manifest line " + std::to_string(line) + ": stray quote");
            quoted = was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            was_quoted = false;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && in.peek() == '\n') in.get();
            fields.push_back(std::move(field));
            return true;
        } else {
            if (was_quoted)
                throw FormatError("manifest line " + std::to_string(line) + ": text after closing quote");
            field += c;
        }
    }
}

bool blank(const std::string& s) {
    return s.find_first_not_of(" \t\r\n\f\v") == std::string::npos;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace

std::vector<ManifestRow> parse_manifest(std::istream& in) {
    std::vector<std::string> fields;
    std::size_t line = 0;
    if (!read_record(in, fields, line)) throw FormatError("manifest is empty");
    if (fields.size() != 4 || fields[0] != kHeader[0] || fields[1] != kHeader[1] ||
        fields[2] != kHeader[2] || fields[3] != kHeader[3])
        throw FormatError("manifest header must be id,text,image_path,label");

    std::vector<ManifestRow> rows;
    std::unordered_set<std::string> ids;
    while (read_record(in, fields, line)) {
        if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
        const std::string where = "manifest line " + std::to_string(line);
        if (fields.size() != 4)
            throw FormatError(where + ": expected 4 fields, found " + std::to_string(fields.size()));
        ManifestRow r;
        r.id = std::move(fields[0]);
        r.text = std::move(fields[1]);
        r.image_path = fields[2];
        if (r.id.empty()) throw InputError(where + ": empty id");
        if (r.id.size() > 0xFFFF) throw InputError(where + ": id longer than 65535 bytes");
        if (blank(r.text)) throw InputError(where + ": empty text for '" + r.id + "'");
        if (fields[2].empty()) throw InputError(where + ": empty image path for '" + r.id + "'");
        try {
            r.label = parse_sentiment(fields[3]);
        } catch (const Error&) {
            throw InputError(where + ": unknown label '" + fields[3] + "'");
        }
        if (!ids.insert(r.id).second) throw IntegrityError(where + ": duplicate id '" + r.id + "'");
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open manifest " + path.string());
    auto rows = parse_manifest(in);
    const auto base = path.parent_path();
    for (auto& r : rows)
        if (r.image_path.is_relative()) r.image_path = base / r.image_path;
    return rows;
}

void write_manifest(const std::vector<ManifestRow>& rows, std::ostream& out) {
    out << "id,text,image_path,label\n";
    for (const auto& r : rows)
        out << quote(r.id) << ',' << quote(r.text) << ',' << quote(r.image_path.string()) << ','
            << to_string(r.label) << '\n';
}

std::vector<std::size_t> missing_images(const std::vector<ManifestRow>& rows) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::error_code ec;
        if (!std::filesystem::is_regular_file(rows[i].image_path, ec)) out.push_back(i);
    }
    return out;
}

}  // namespace fuselab
