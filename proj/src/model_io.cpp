#include "fuselab/model_io.hpp"

#include <map>
#include <string>

#include "fuselab/byte_io.hpp"
#include "fuselab/errors.hpp"

namespace fuselab {

std::vector<std::uint8_t> encode_model(const FusionModel<float>& model) {
    if (!model.all_finite()) throw InputError("refusing to save a model with non-finite parameters");
    io::ByteWriter w;
    w.raw(std::string_view(kModelMagic, 4));
    w.u32(kModelVersion);
    w.u8(static_cast<std::uint8_t>(model.kind));
    w.u32(static_cast<std::uint32_t>(model.parameter_names().size()));
    model.for_each_parameter([&](const std::string& name, const Matrix<float>& m) {
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.raw(name);
        w.u32(static_cast<std::uint32_t>(m.rows()));
        w.u32(static_cast<std::uint32_t>(m.cols()));
        for (float x : m.values()) w.f32(x);
    });
    return w.take();
}

FusionModel<float> decode_model(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    r.set_context("model header");
    if (r.raw(4) != std::string_view(kModelMagic, 4))
        throw FormatError("not a model file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kModelVersion)
        throw UnsupportedVersionError("unsupported model file version " + std::to_string(version));
    const std::uint8_t kind_byte = r.u8();
    if (kind_byte > 2) throw FormatError("unknown fusion kind " + std::to_string(kind_byte));
    const auto kind = static_cast<FusionKind>(kind_byte);
    const std::uint32_t count = r.u32();

    std::map<std::string, Matrix<float>> tensors;
    std::vector<std::string> order;
    for (std::uint32_t i = 0; i < count; ++i) {
        r.set_context("tensor " + std::to_string(i));
        const std::uint16_t name_len = r.u16();
        std::string name = r.raw(name_len);
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        const std::uint64_t n = static_cast<std::uint64_t>(rows) * cols;
        if (n * 4 > r.remaining())
            throw FormatError("tensor '" + name + "' payload is truncated");
        std::vector<float> data(static_cast<std::size_t>(n));
        for (auto& x : data) x = r.f32();
        if (tensors.count(name)) throw FormatError("duplicate tensor '" + name + "'");
        order.push_back(name);
        tensors.emplace(name, Matrix<float>(rows, cols, std::move(data)));
    }
    if (r.remaining() != 0) throw FormatError("trailing bytes after the last tensor");

    auto shape_of = [&](const char* name) -> const Matrix<float>& {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw FormatError(std::string("missing tensor '") + name + "'");
        return it->second;
    };
    ModelDims dims;
    dims.text_dim = shape_of("text_proj.weight").rows();
    dims.image_dim = shape_of("image_proj.weight").rows();
    dims.model_dim = shape_of("text_proj.weight").cols();
    dims.hidden_dim = shape_of("classifier.hidden.weight").cols();
    if (dims.text_dim == 0 || dims.image_dim == 0 || dims.model_dim == 0 || dims.hidden_dim == 0)
        throw FormatError("model declares a zero dimension");

    FusionModel<float> model = FusionModel<float>::skeleton(kind, dims);
    const auto expected = model.parameter_names();
    if (expected != order)
        throw FormatError("tensor set does not match a " + std::string(to_string(kind)) + " model");
    model.for_each_parameter([&](const std::string& name, Matrix<float>& m) {
        Matrix<float>& stored = tensors.at(name);
        if (!stored.same_shape(m))
            throw FormatError("tensor '" + name + "' has shape " + stored.shape() + ", expected " +
                              m.shape());
        m = std::move(stored);
    });
    if (!model.all_finite()) throw FormatError("model contains non-finite parameters");
    return model;
}

void save_model(const FusionModel<float>& model, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_model(model));
}

FusionModel<float> load_model(const std::filesystem::path& path) {
    return decode_model(io::read_file(path));
}

}  // namespace fuselab
