#include "trim/container.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace trim {

namespace {

constexpr char kMagic[4] = {'T', 'N', 'S', 'R'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t shape_product(const std::vector<std::uint64_t>& shape) {
    std::uint64_t n = 1;
    for (std::uint64_t d : shape) n *= d;
    return n;
}

void append_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32_le(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::uint64_t read_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

float f32_from_le(const unsigned char* p) {
    std::uint32_t bits = read_u32_le(p);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

void append_f32_le(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    append_u32_le(out, bits);
}

} // namespace

void TensorContainer::put(const std::string& name, TensorEntry entry) {
    if (name.empty()) {
        throw format_error("tensor name must be non-empty");
    }
    if (entry.data.size() != shape_product(entry.shape)) {
        throw shape_error("tensor '" + name + "': data length " +
                          std::to_string(entry.data.size()) + " != product(shape)");
    }
    for (float v : entry.data) {
        if (!std::isfinite(v)) {
            throw numeric_error("tensor '" + name + "' holds a non-finite value");
        }
    }
    entries_[name] = std::move(entry);
}

void TensorContainer::put_matrix(const std::string& name, const Matrix& m) {
    TensorEntry e;
    e.shape = {m.rows(), m.cols()};
    e.data = m.data();
    put(name, std::move(e));
}

void TensorContainer::put_vector(const std::string& name, const std::vector<double>& v) {
    TensorEntry e;
    e.shape = {v.size()};
    e.data.reserve(v.size());
    for (double x : v) e.data.push_back(static_cast<float>(x));
    put(name, std::move(e));
}

const TensorEntry& TensorContainer::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw format_error("container has no tensor named '" + name + "'");
    }
    return it->second;
}

Matrix TensorContainer::matrix_at(const std::string& name) const {
    const TensorEntry& e = at(name);
    if (e.shape.size() != 2) {
        throw shape_error("tensor '" + name + "' is not 2-D");
    }
    return Matrix(static_cast<std::size_t>(e.shape[0]), static_cast<std::size_t>(e.shape[1]),
                  e.data);
}

std::vector<float> TensorContainer::vector_at(const std::string& name) const {
    const TensorEntry& e = at(name);
    if (e.shape.size() != 1) {
        throw shape_error("tensor '" + name + "' is not 1-D");
    }
    return e.data;
}

TensorContainer load_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw format_error("cannot open container file '" + path + "'");
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t n = bytes.size();

    if (n < 16 || std::memcmp(p, kMagic, 4) != 0) {
        throw format_error("bad magic in '" + path + "' (not a TNSR container)");
    }
    const std::uint32_t version = read_u32_le(p + 4);
    if (version != kVersion) {
        throw format_error("unsupported container version " + std::to_string(version));
    }
    const std::uint64_t header_len = read_u64_le(p + 8);
    if (header_len > n - 16) {
        throw format_error("container header extends past end of file");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(16, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("container header is not valid JSON: ") + e.what());
    }
    if (!header.is_object()) {
        throw format_error("container header must be a JSON object");
    }

    const std::size_t payload_off = 16 + static_cast<std::size_t>(header_len);
    const std::uint64_t payload_size = n - payload_off;

    TensorContainer out;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> spans; // offset, nbytes
    for (auto it = header.begin(); it != header.end(); ++it) {
        const nlohmann::json& meta = it.value();
        if (!meta.is_object() || !meta.contains("shape") || !meta.contains("offset") ||
            !meta.contains("nbytes")) {
            throw format_error("entry '" + it.key() + "': missing shape/offset/nbytes");
        }
        TensorEntry e;
        for (const auto& d : meta["shape"]) {
            if (!d.is_number_unsigned()) {
                throw format_error("entry '" + it.key() + "': shape must be unsigned ints");
            }
            e.shape.push_back(d.get<std::uint64_t>());
        }
        const std::uint64_t offset = meta["offset"].get<std::uint64_t>();
        const std::uint64_t nbytes = meta["nbytes"].get<std::uint64_t>();
        if (nbytes != shape_product(e.shape) * 4) {
            throw format_error("entry '" + it.key() + "': nbytes != product(shape) * 4");
        }
        if (offset > payload_size || offset + nbytes > payload_size) {
            throw format_error("entry '" + it.key() + "': payload truncated (wants " +
                               std::to_string(nbytes) + " bytes at offset " +
                               std::to_string(offset) + ", payload has " +
                               std::to_string(payload_size) + ")");
        }
        spans.emplace_back(offset, nbytes);
        const unsigned char* src = p + payload_off + offset;
        e.data.resize(shape_product(e.shape));
        for (std::size_t i = 0; i < e.data.size(); ++i) {
            const float v = f32_from_le(src + 4 * i);
            if (!std::isfinite(v)) {
                throw format_error("entry '" + it.key() + "': non-finite value at index " +
                                   std::to_string(i));
            }
            e.data[i] = v;
        }
        out.put(it.key(), std::move(e));
    }

    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) {
        if (spans[i].first < spans[i - 1].first + spans[i - 1].second) {
            throw format_error("container entries overlap in the payload");
        }
    }
    return out;
}

void save_container(const TensorContainer& c, const std::string& path) {
    nlohmann::json header = nlohmann::json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, e] : c.entries()) {
        const std::uint64_t nbytes = static_cast<std::uint64_t>(e.data.size()) * 4;
        header[name] = {{"shape", e.shape}, {"offset", offset}, {"nbytes", nbytes}};
        offset += nbytes;
    }
    const std::string header_str = header.dump();

    std::string bytes;
    bytes.reserve(16 + header_str.size() + offset);
    bytes.append(kMagic, 4);
    append_u32_le(bytes, kVersion);
    append_u64_le(bytes, header_str.size());
    bytes.append(header_str);
    for (const auto& [name, e] : c.entries()) {
        (void)name;
        for (float v : e.data) append_f32_le(bytes, v);
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream outf(tmp, std::ios::binary | std::ios::trunc);
        if (!outf) {
            throw format_error("cannot write container file '" + tmp + "'");
        }
        outf.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    std::filesystem::rename(tmp, path);
}

} // namespace trim
