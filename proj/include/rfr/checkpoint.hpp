#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "rfr/backbone.hpp"
#include "rfr/synthdata.hpp"
#include "rfr/tensor.hpp"

// Checkpoint file: magic "RFRCKPT1", a config/metadata block, a manifest of
// (name, shape, dtype) entries, then little-endian float32 payloads in
// manifest order. Round-trips bit-exactly.

namespace rfr::net {

struct CheckpointMeta {
    BackboneConfig cfg;
    synth::TaskKind task = synth::TaskKind::lowlight;
    bool bridge = false;
    double cfg_dropout_prob = 0.0;
    double t_min = 1e-3;
    int p = 1;
    uint64_t iteration = 0;
};

namespace detail {

inline void put_u8(std::string& s, uint8_t v) { s.push_back(char(v)); }
inline void put_u16(std::string& s, uint16_t v) {
    s.push_back(char(v & 0xff));
    s.push_back(char(v >> 8));
}
inline void put_u32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& s, uint64_t v) {
    for (int i = 0; i < 8; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& s, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(s, bits);
}
inline void put_f32(std::string& s, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(s, bits);
}

struct Reader {
    const std::string& s;
    size_t pos = 0;
    explicit Reader(const std::string& str) : s(str) {}
    void need(size_t n) const {
        if (pos + n > s.size()) throw IoError("checkpoint: truncated file");
    }
    uint8_t u8() {
        need(1);
        return uint8_t(s[pos++]);
    }
    uint16_t u16() {
        need(2);
        uint16_t v = uint16_t(uint8_t(s[pos])) | uint16_t(uint8_t(s[pos + 1])) << 8;
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(s[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(s[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string str(size_t n) {
        need(n);
        std::string v = s.substr(pos, n);
        pos += n;
        return v;
    }
};

}  // namespace detail

inline constexpr char kCheckpointMagic[9] = "RFRCKPT1";

inline void save_checkpoint(const std::string& path, const BackboneParams<float>& params,
                            const CheckpointMeta& meta) {
    std::string out;
    out.append(kCheckpointMagic, 8);
    using namespace detail;
    const BackboneConfig& c = params.cfg;
    put_u32(out, uint32_t(c.in_channels));
    put_u32(out, uint32_t(c.out_channels));
    put_u32(out, uint32_t(c.base_width));
    put_u32(out, uint32_t(c.depth));
    put_u32(out, uint32_t(c.upsample_factor));
    put_u32(out, uint32_t(c.time_embed_dim));
    put_u8(out, c.parameterization == Parameterization::v_pred ? 1 : 0);
    put_u8(out, c.time_embedding ? 1 : 0);
    put_u8(out, uint8_t(c.anchor));
    put_u8(out, uint8_t(meta.task));
    put_u8(out, meta.bridge ? 1 : 0);
    put_u8(out, 0);
    put_u16(out, 0);
    put_f64(out, meta.cfg_dropout_prob);
    put_f64(out, meta.t_min);
    put_u32(out, uint32_t(meta.p));
    put_u64(out, meta.iteration);

    put_u32(out, uint32_t(params.blocks.size()));
    for (const auto& b : params.blocks) {
        put_u16(out, uint16_t(b.name.size()));
        out.append(b.name);
        put_u8(out, uint8_t(b.shape.size()));
        for (int d : b.shape) put_u32(out, uint32_t(d));
        put_u8(out, 0);  // dtype 0 = float32 little-endian
    }
    for (const auto& b : params.blocks)
        for (float v : b.v) put_f32(out, v);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("checkpoint: cannot open for writing: " + path);
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw IoError("checkpoint: write failed: " + path);
}

inline std::pair<BackboneParams<float>, CheckpointMeta> load_checkpoint(
    const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot open: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    detail::Reader r(buf);
    if (r.str(8) != std::string(kCheckpointMagic, 8))
        throw IoError("checkpoint: bad magic in " + path);
    BackboneConfig c;
    CheckpointMeta meta;
    c.in_channels = int(r.u32());
    c.out_channels = int(r.u32());
    c.base_width = int(r.u32());
    c.depth = int(r.u32());
    c.upsample_factor = int(r.u32());
    c.time_embed_dim = int(r.u32());
    c.parameterization = r.u8() ? Parameterization::v_pred : Parameterization::x0_pred;
    c.time_embedding = r.u8() != 0;
    c.anchor = AnchorMode(r.u8());
    meta.task = synth::TaskKind(r.u8());
    meta.bridge = r.u8() != 0;
    r.u8();
    r.u16();
    meta.cfg_dropout_prob = r.f64();
    meta.t_min = r.f64();
    meta.p = int(r.u32());
    meta.iteration = r.u64();
    meta.cfg = c;

    BackboneParams<float> params;
    params.cfg = c;
    uint32_t n = r.u32();
    std::vector<size_t> counts;
    for (uint32_t i = 0; i < n; ++i) {
        ParamBlock<float> b;
        b.name = r.str(r.u16());
        uint8_t nd = r.u8();
        size_t cnt = 1;
        for (uint8_t d = 0; d < nd; ++d) {
            b.shape.push_back(int(r.u32()));
            cnt *= size_t(b.shape.back());
        }
        if (r.u8() != 0) throw IoError("checkpoint: unsupported dtype");
        counts.push_back(cnt);
        params.blocks.push_back(std::move(b));
    }
    for (uint32_t i = 0; i < n; ++i) {
        params.blocks[i].v.resize(counts[i]);
        for (auto& v : params.blocks[i].v) v = r.f32();
    }
    if (r.pos != buf.size()) throw IoError("checkpoint: trailing bytes in " + path);
    return {std::move(params), meta};
}

}  // namespace rfr::net
