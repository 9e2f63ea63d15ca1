#include "smoe/tensor_io.hpp"

#include "smoe/errors.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <regex>
#include <sstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "NPY float32 I/O assumes a little-endian host");

namespace smoe {

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kHeaderAlign = 64;

std::string shape_literal(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t d = 0; d < shape.size(); ++d) {
        if (d > 0) s += ", ";
        s += std::to_string(shape[d]);
    }
    if (shape.size() == 1) s += ",";
    s += ")";
    return s;
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::vector<std::size_t> parse_shape(const std::string& text) {
    std::vector<std::size_t> shape;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto first = item.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        auto last = item.find_last_not_of(" \t");
        item = item.substr(first, last - first + 1);
        if (item.empty() || !std::all_of(item.begin(), item.end(), ::isdigit))
            throw FormatError("npy: bad shape entry '" + item + "'");
        shape.push_back(std::stoull(item));
    }
    return shape;
}

}  // namespace

std::string_view to_string(Stage stage) {
    return stage == Stage::pre_activation ? "pre_activation" : "post_activation";
}

std::vector<char> encode_npy(const NpyArray& array) {
    if (element_count(array.shape) != array.data.size())
        throw UsageError("npy: shape does not match data length");

    std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': " +
                       shape_literal(array.shape) + ", }";
    // magic(6) + version(2) + header_len(2) + dict + padding + '\n'
    std::size_t total = kMagicLen + 4 + dict.size() + 1;
    std::size_t padded = (total + kHeaderAlign - 1) / kHeaderAlign * kHeaderAlign;
    dict.append(padded - total, ' ');
    dict.push_back('\n');
    if (dict.size() > 0xFFFF) throw UsageError("npy: header too large for v1.0");

    std::vector<char> out;
    out.reserve(padded + array.data.size() * sizeof(float));
    out.insert(out.end(), kMagic, kMagic + kMagicLen);
    out.push_back('\x01');
    out.push_back('\x00');
    auto len = static_cast<std::uint16_t>(dict.size());
    out.push_back(static_cast<char>(len & 0xFF));
    out.push_back(static_cast<char>(len >> 8));
    out.insert(out.end(), dict.begin(), dict.end());
    const auto* raw = reinterpret_cast<const char*>(array.data.data());
    out.insert(out.end(), raw, raw + array.data.size() * sizeof(float));
    return out;
}

NpyArray decode_npy(std::span<const char> bytes) {
    if (bytes.size() < kMagicLen + 4 || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0)
        throw FormatError("npy: bad magic");
    auto major = static_cast<unsigned char>(bytes[6]);
    std::size_t header_len = 0;
    std::size_t offset = 0;
    auto byte = [&](std::size_t i) { return static_cast<std::size_t>(static_cast<unsigned char>(bytes[i])); };
    if (major == 1) {
        header_len = byte(8) | (byte(9) << 8);
        offset = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12) throw FormatError("npy: truncated header");
        header_len = byte(8) | (byte(9) << 8) | (byte(10) << 16) | (byte(11) << 24);
        offset = 12;
    } else {
        throw FormatError("npy: unsupported version " + std::to_string(major));
    }
    if (bytes.size() < offset + header_len) throw FormatError("npy: truncated header");
    std::string header(bytes.data() + offset, header_len);

    static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
    static const std::regex fortran_re(R"('fortran_order'\s*:\s*(True|False))");
    static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
    std::smatch m;
    if (!std::regex_search(header, m, descr_re)) throw FormatError("npy: header missing descr");
    if (m[1] != "<f4") throw FormatError("npy: dtype '" + m[1].str() + "' is not little-endian float32");
    if (!std::regex_search(header, m, fortran_re)) throw FormatError("npy: header missing fortran_order");
    if (m[1] == "True") throw FormatError("npy: fortran_order arrays are not supported");
    if (!std::regex_search(header, m, shape_re)) throw FormatError("npy: header missing shape");

    NpyArray array;
    array.shape = parse_shape(m[1].str());
    std::size_t n = element_count(array.shape);
    std::size_t payload = bytes.size() - offset - header_len;
    if (payload != n * sizeof(float))
        throw FormatError("npy: payload is " + std::to_string(payload) + " bytes, header implies " +
                          std::to_string(n * sizeof(float)));
    array.data.resize(n);
    std::memcpy(array.data.data(), bytes.data() + offset + header_len, payload);
    return array;
}

NpyArray read_npy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_npy(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_npy(const std::filesystem::path& path, const NpyArray& array) {
    auto bytes = encode_npy(array);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

ActivationColumn::ActivationColumn(std::vector<double> values, double epsilon)
    : values_(std::move(values)), epsilon_(epsilon) {
    if (values_.empty()) throw ValidationError("column must have at least one channel");
    if (!(epsilon_ > 0.0)) throw ValidationError("column epsilon must be positive");
}

ActivationTensor::ActivationTensor(std::size_t channels, std::size_t height, std::size_t width,
                                   std::vector<float> values, Stage stage)
    : channels_(channels), height_(height), width_(width), values_(std::move(values)), stage_(stage) {
    if (channels_ == 0 || height_ == 0 || width_ == 0)
        throw ValidationError("tensor dimensions must be >= 1");
    if (values_.size() != channels_ * height_ * width_)
        throw ValidationError("tensor values length does not equal channels*height*width");
    for (std::size_t n = 0; n < values_.size(); ++n) {
        float v = values_[n];
        if (!std::isfinite(v))
            throw ValidationError("non-finite activation at flat index " + std::to_string(n));
        if (stage_ == Stage::post_activation && v < 0.0f)
            throw ValidationError("negative value " + std::to_string(v) +
                                  " in post_activation tensor at flat index " + std::to_string(n));
    }
}

ActivationColumn ActivationTensor::column(std::size_t i, std::size_t j, double epsilon) const {
    if (i >= height_ || j >= width_)
        throw BoundsError("column (" + std::to_string(i) + "," + std::to_string(j) +
                          ") outside " + std::to_string(height_) + "x" + std::to_string(width_));
    std::vector<double> out;
    gather_column(i, j, out);
    return ActivationColumn(std::move(out), epsilon);
}

void ActivationTensor::gather_column(std::size_t i, std::size_t j, std::vector<double>& out) const {
    assert(i < height_ && j < width_);
    out.resize(channels_);
    const std::size_t plane = height_ * width_;
    const float* p = values_.data() + i * width_ + j;
    for (std::size_t k = 0; k < channels_; ++k) out[k] = p[k * plane];
}

ActivationColumn column_view(const ActivationTensor& tensor, std::size_t i, std::size_t j) {
    return tensor.column(i, j);
}

ActivationTensor load_tensor(const std::filesystem::path& path, Stage stage) {
    NpyArray a = read_npy(path);
    if (a.shape.size() != 3)
        throw FormatError(path.string() + ": expected a 3D (channels, height, width) array, got " +
                          std::to_string(a.shape.size()) + "D");
    try {
        return ActivationTensor(a.shape[0], a.shape[1], a.shape[2], std::move(a.data), stage);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void save_tensor(const std::filesystem::path& path, const ActivationTensor& tensor) {
    NpyArray a;
    a.shape = {tensor.channels(), tensor.height(), tensor.width()};
    a.data.assign(tensor.values().begin(), tensor.values().end());
    write_npy(path, a);
}

ScaleManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest " + path.string() + ": " + e.what());
    }

    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };
    auto require_file = [](const std::filesystem::path& p, const std::string& what) {
        if (!std::filesystem::is_regular_file(p))
            throw IoError(what + ": referenced file " + p.string() + " does not exist");
    };

    ScaleManifest m;
    try {
        m.model_name = j.value("model", std::string{});
        const auto& input = j.at("input");
        m.input_image.path = resolve(input.at("path").get<std::string>());
        m.input_image.height = input.at("height").get<std::size_t>();
        m.input_image.width = input.at("width").get<std::size_t>();

        for (const auto& s : j.at("scales")) {
            ScaleEntry e;
            e.scale_index = s.at("index").get<int>();
            e.post_path = resolve(s.at("post").get<std::string>());
            if (s.contains("pre") && !s.at("pre").is_null())
                e.pre_path = resolve(s.at("pre").get<std::string>());
            e.height = s.at("height").get<std::size_t>();
            e.width = s.at("width").get<std::size_t>();
            m.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest " + path.string() + ": " + e.what());
    }

    if (m.entries.empty()) throw ValidationError("manifest has no scales");
    std::sort(m.entries.begin(), m.entries.end(),
              [](const ScaleEntry& a, const ScaleEntry& b) { return a.scale_index < b.scale_index; });
    for (std::size_t n = 0; n < m.entries.size(); ++n) {
        const auto& e = m.entries[n];
        if (e.scale_index != static_cast<int>(n) + 1)
            throw ValidationError("manifest scale indices must be contiguous from 1; found " +
                                  std::to_string(e.scale_index) + " at position " + std::to_string(n + 1));
        if (e.height == 0 || e.width == 0)
            throw ValidationError("scale " + std::to_string(e.scale_index) + " has zero size");
        if (n > 0 && (e.height > m.entries[n - 1].height || e.width > m.entries[n - 1].width))
            throw ValidationError("scale " + std::to_string(e.scale_index) +
                                  " is larger than the scale before it");
    }
    if (m.input_image.height == 0 || m.input_image.width == 0)
        throw ValidationError("manifest input image has zero size");

    require_file(m.input_image.path, "input image");
    for (const auto& e : m.entries) {
        const auto tag = "scale " + std::to_string(e.scale_index);
        require_file(e.post_path, tag + " post");
        if (e.pre_path) require_file(*e.pre_path, tag + " pre");
    }
    return m;
}

}  // namespace smoe
