#pragma once
// Bit-exact binary containers for volumes (MPRV), attention inputs (MPRA),
// contextual token payloads (MPRC), and the JSON result schema.
//
// All multi-byte fields are little-endian; payloads are 32-bit IEEE floats.
// Readers bounds-check declared sizes against the actual file length before
// allocating anything.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medpruner/core.hpp"
#include "medpruner/saliency.hpp"

namespace medpruner {

namespace detail {

static_assert(sizeof(float) == 4, "requires 32-bit float");

inline void put_u16le(std::vector<std::uint8_t>& buf, std::uint16_t v) {
    buf.push_back(static_cast<std::uint8_t>(v & 0xff));
    buf.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

inline void put_u32le(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    buf.push_back(static_cast<std::uint8_t>(v & 0xff));
    buf.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    buf.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    buf.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

inline void put_f32le(std::vector<std::uint8_t>& buf, float v) {
    put_u32le(buf, std::bit_cast<std::uint32_t>(v));
}

// Cursor over a fully loaded file with bounds-checked reads.
class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& buf, std::string name)
        : buf_(buf), name_(std::move(name)) {}

    std::size_t remaining() const { return buf_.size() - pos_; }

    void expect(std::size_t n, const char* what) const {
        if (remaining() < n)
            throw FormatError(name_ + ": truncated " + what + " (need " + std::to_string(n) +
                              " bytes, " + std::to_string(remaining()) + " left)");
    }

    std::uint8_t u8(const char* what) {
        expect(1, what);
        return buf_[pos_++];
    }

    std::uint16_t u16(const char* what) {
        expect(2, what);
        std::uint16_t v = static_cast<std::uint16_t>(buf_[pos_]) |
                          static_cast<std::uint16_t>(buf_[pos_ + 1]) << 8;
        pos_ += 2;
        return v;
    }

    std::uint32_t u32(const char* what) {
        expect(4, what);
        std::uint32_t v = static_cast<std::uint32_t>(buf_[pos_]) |
                          static_cast<std::uint32_t>(buf_[pos_ + 1]) << 8 |
                          static_cast<std::uint32_t>(buf_[pos_ + 2]) << 16 |
                          static_cast<std::uint32_t>(buf_[pos_ + 3]) << 24;
        pos_ += 4;
        return v;
    }

    void magic(const char* expected) {
        expect(4, "magic");
        for (int i = 0; i < 4; ++i) {
            if (buf_[pos_ + i] != static_cast<std::uint8_t>(expected[i]))
                throw FormatError(name_ + ": bad magic (expected \"" + expected + "\")");
        }
        pos_ += 4;
    }

    // Bounds-check first, allocate after.
    std::vector<float> f32_array(std::uint64_t count, const char* what) {
        if (count > remaining() / 4)
            throw FormatError(name_ + ": truncated " + what + " (declared " +
                              std::to_string(count) + " floats, only " +
                              std::to_string(remaining() / 4) + " present)");
        std::vector<float> out(static_cast<std::size_t>(count));
        for (std::uint64_t i = 0; i < count; ++i) {
            std::uint32_t bits = static_cast<std::uint32_t>(buf_[pos_]) |
                                 static_cast<std::uint32_t>(buf_[pos_ + 1]) << 8 |
                                 static_cast<std::uint32_t>(buf_[pos_ + 2]) << 16 |
                                 static_cast<std::uint32_t>(buf_[pos_ + 3]) << 24;
            out[i] = std::bit_cast<float>(bits);
            pos_ += 4;
        }
        return out;
    }

    void expect_end() const {
        if (remaining() != 0)
            throw FormatError(name_ + ": " + std::to_string(remaining()) +
                              " trailing bytes after declared payload");
    }

private:
    const std::vector<std::uint8_t>& buf_;
    std::string name_;
    std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");
    in.seekg(0, std::ios::end);
    const std::streamoff size = in.tellg();
    if (size < 0) throw IoError("cannot determine size of " + path);
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(size));
    if (size > 0) in.read(reinterpret_cast<char*>(buf.data()), size);
    if (!in) throw IoError("failed reading " + path);
    return buf;
}

inline void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& buf) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + path);
}

inline std::uint64_t checked_mul3(std::uint32_t a, std::uint32_t b, std::uint32_t c,
                                  const std::string& name) {
    const std::uint64_t ab = static_cast<std::uint64_t>(a) * b;
    if (c != 0 && ab > UINT64_MAX / c) throw FormatError(name + ": dimension product overflows");
    return ab * c;
}

inline void check_payload_finite(const std::vector<float>& payload, const std::string& name,
                                 const char* what) {
    for (std::size_t i = 0; i < payload.size(); ++i) {
        if (!std::isfinite(payload[i]))
            throw DataError(name + ": non-finite " + what + " value at index " + std::to_string(i));
    }
}

// Round to at most 12 significant digits so emitted JSON numbers are stable.
inline double round_sig12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::strtod(buf, nullptr);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// MPRV volume container
// Layout: "MPRV" | version u8=1 | dtype u8=1 (f32) | reserved u16=0 |
//         D,H,W u32 LE | D*H*W f32 LE, slice-major, row-major within slice.
// ---------------------------------------------------------------------------

inline void write_volume(const Volume& vol, const std::string& path) {
    vol.validate();
    std::vector<std::uint8_t> buf;
    buf.reserve(20 + vol.data.size() * 4);
    buf.insert(buf.end(), {'M', 'P', 'R', 'V'});
    buf.push_back(1);  // version
    buf.push_back(1);  // dtype = f32
    detail::put_u16le(buf, 0);
    detail::put_u32le(buf, vol.depth);
    detail::put_u32le(buf, vol.height);
    detail::put_u32le(buf, vol.width);
    for (float v : vol.data) detail::put_f32le(buf, v);
    detail::write_file_bytes(path, buf);
}

inline Volume read_volume(const std::string& path) {
    const std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    r.magic("MPRV");
    const std::uint8_t version = r.u8("version");
    if (version != 1) throw FormatError(path + ": unsupported version " + std::to_string(version));
    const std::uint8_t dtype = r.u8("dtype");
    if (dtype != 1) throw FormatError(path + ": unsupported dtype " + std::to_string(dtype));
    const std::uint16_t reserved = r.u16("reserved");
    if (reserved != 0) throw FormatError(path + ": reserved field must be zero");
    Volume vol;
    vol.depth = r.u32("depth");
    vol.height = r.u32("height");
    vol.width = r.u32("width");
    if (vol.depth < 1) throw FormatError(path + ": depth must be >= 1");
    if (vol.height < 1) throw FormatError(path + ": height must be >= 1");
    if (vol.width < 1) throw FormatError(path + ": width must be >= 1");
    const std::uint64_t count = detail::checked_mul3(vol.depth, vol.height, vol.width, path);
    vol.data = r.f32_array(count, "volume payload");
    r.expect_end();
    detail::check_payload_finite(vol.data, path, "volume");
    return vol;
}

// ---------------------------------------------------------------------------
// MPRA attention container
// Layout: "MPRA" | version u8=1 | reserved 3 bytes=0 | num_slices u32 LE |
//   per slice: h_n u32, M u32, D_h u32, Q payload (h_n*M*D_h f32 LE,
//   head-major then row-major), K payload (same layout).
// Every block must declare the same M.
// ---------------------------------------------------------------------------

inline void write_attention(const std::vector<HeadStack>& stacks, const std::string& path) {
    if (stacks.empty()) throw ValidationError("attention file must contain at least one slice block");
    for (std::size_t i = 0; i < stacks.size(); ++i) {
        stacks[i].validate();
        if (stacks[i].tokens != stacks[0].tokens)
            throw ValidationError("inconsistent token count: block " + std::to_string(i) +
                                  " has M=" + std::to_string(stacks[i].tokens) + ", expected " +
                                  std::to_string(stacks[0].tokens));
    }
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), {'M', 'P', 'R', 'A'});
    buf.push_back(1);  // version
    buf.insert(buf.end(), {0, 0, 0});
    detail::put_u32le(buf, static_cast<std::uint32_t>(stacks.size()));
    for (const HeadStack& s : stacks) {
        detail::put_u32le(buf, s.num_heads);
        detail::put_u32le(buf, s.tokens);
        detail::put_u32le(buf, s.head_dim);
        for (float v : s.q) detail::put_f32le(buf, v);
        for (float v : s.k) detail::put_f32le(buf, v);
    }
    detail::write_file_bytes(path, buf);
}

inline std::vector<HeadStack> read_attention(const std::string& path) {
    const std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    r.magic("MPRA");
    const std::uint8_t version = r.u8("version");
    if (version != 1) throw FormatError(path + ": unsupported version " + std::to_string(version));
    for (int i = 0; i < 3; ++i) {
        if (r.u8("reserved") != 0) throw FormatError(path + ": reserved bytes must be zero");
    }
    const std::uint32_t num_slices = r.u32("slice count");
    if (num_slices < 1) throw FormatError(path + ": attention file must contain at least one slice block");
    std::vector<HeadStack> stacks;
    stacks.reserve(num_slices);
    for (std::uint32_t b = 0; b < num_slices; ++b) {
        HeadStack s;
        s.num_heads = r.u32("block head count");
        s.tokens = r.u32("block token count");
        s.head_dim = r.u32("block head dim");
        if (s.num_heads < 1 || s.tokens < 1 || s.head_dim < 1)
            throw FormatError(path + ": block " + std::to_string(b) + " dimensions must be >= 1");
        if (b > 0 && s.tokens != stacks[0].tokens)
            throw FormatError(path + ": inconsistent token count: block " + std::to_string(b) +
                              " declares M=" + std::to_string(s.tokens) + ", expected " +
                              std::to_string(stacks[0].tokens));
        const std::uint64_t count = detail::checked_mul3(s.num_heads, s.tokens, s.head_dim, path);
        s.q = r.f32_array(count, "Q payload");
        s.k = r.f32_array(count, "K payload");
        detail::check_payload_finite(s.q, path, "Q");
        detail::check_payload_finite(s.k, path, "K");
        stacks.push_back(std::move(s));
    }
    r.expect_end();
    return stacks;
}

// ---------------------------------------------------------------------------
// MPRC contextual-token sidecar
// Layout: "MPRC" | version u8=1 | dtype u8=1 | reserved u16=0 |
//         count u32 LE | dim u32 LE | count*dim f32 LE.
// Vectors appear in result order: retained slices ascending, clusters by
// ascending center index within each slice.
// ---------------------------------------------------------------------------

inline void write_contextual(const std::vector<std::vector<float>>& vectors, std::uint32_t dim,
                             const std::string& path) {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), {'M', 'P', 'R', 'C'});
    buf.push_back(1);
    buf.push_back(1);
    detail::put_u16le(buf, 0);
    detail::put_u32le(buf, static_cast<std::uint32_t>(vectors.size()));
    detail::put_u32le(buf, dim);
    for (const std::vector<float>& vec : vectors) {
        if (vec.size() != dim)
            throw ValidationError("contextual vector length " + std::to_string(vec.size()) +
                                  " does not match dim " + std::to_string(dim));
        for (float v : vec) detail::put_f32le(buf, v);
    }
    detail::write_file_bytes(path, buf);
}

inline std::vector<std::vector<float>> read_contextual(const std::string& path, std::uint32_t* dim_out = nullptr) {
    const std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    r.magic("MPRC");
    if (r.u8("version") != 1) throw FormatError(path + ": unsupported version");
    if (r.u8("dtype") != 1) throw FormatError(path + ": unsupported dtype");
    if (r.u16("reserved") != 0) throw FormatError(path + ": reserved field must be zero");
    const std::uint32_t count = r.u32("vector count");
    const std::uint32_t dim = r.u32("vector dim");
    const std::uint64_t total = static_cast<std::uint64_t>(count) * dim;
    std::vector<float> flat = r.f32_array(total, "contextual payload");
    r.expect_end();
    detail::check_payload_finite(flat, path, "contextual");
    std::vector<std::vector<float>> out(count);
    for (std::uint32_t i = 0; i < count; ++i)
        out[i].assign(flat.begin() + static_cast<std::size_t>(i) * dim,
                      flat.begin() + static_cast<std::size_t>(i + 1) * dim);
    if (dim_out) *dim_out = dim;
    return out;
}

// ---------------------------------------------------------------------------
// JSON result schema, version 1. Contextual token vectors go to a sibling
// MPRC file at <path>.ctx, referenced by filename.
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json result_to_json(const PruneResult& res, const std::string& contextual_file) {
    using detail::round_sig12;
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["config"] = {
        {"gamma", round_sig12(res.config.gamma)},
        {"tau", round_sig12(res.config.tau)},
        {"temperature", round_sig12(res.config.temperature)},
        {"contextual_ratio", round_sig12(res.config.contextual_ratio)},
        {"patch_size", res.config.patch_size},
        {"embed_dim", res.config.embed_dim},
        {"num_heads", res.config.num_heads},
        {"head_dim", res.config.head_dim},
    };
    j["retained_slices"] = res.slice_selection.retained;
    nlohmann::ordered_json per_slice = nlohmann::ordered_json::array();
    for (const SlicePrune& sp : res.slices) {
        nlohmann::ordered_json clusters = nlohmann::ordered_json::array();
        for (const TokenCluster& c : sp.clusters)
            clusters.push_back({{"center", c.center}, {"members", c.members}});
        per_slice.push_back({{"slice_index", sp.slice_index},
                             {"primary_indices", sp.primary.indices},
                             {"clusters", clusters},
                             {"contextual_dim", res.config.embed_dim}});
    }
    j["per_slice"] = per_slice;
    j["original_tokens"] = res.original_tokens;
    j["retained_tokens"] = res.retained_tokens;
    j["r_rate"] = round_sig12(res.r_rate);
    j["timings_ms"] = {
        {"iaf", round_sig12(res.timings.iaf_ms)},
        {"saliency", round_sig12(res.timings.saliency_ms)},
        {"dins", round_sig12(res.timings.dins_ms)},
        {"merge", round_sig12(res.timings.merge_ms)},
        {"total", round_sig12(res.timings.total_ms)},
    };
    j["contextual_file"] = contextual_file;
    return j;
}

inline void write_result_json(const PruneResult& res, const std::string& path) {
    const std::string sibling = path + ".ctx";
    std::vector<std::vector<float>> vectors;
    for (const SlicePrune& sp : res.slices)
        for (const std::vector<float>& v : sp.contextual_tokens) vectors.push_back(v);
    write_contextual(vectors, res.config.embed_dim, sibling);

    const nlohmann::ordered_json j =
        result_to_json(res, std::filesystem::path(sibling).filename().string());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    out.flush();
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace medpruner
