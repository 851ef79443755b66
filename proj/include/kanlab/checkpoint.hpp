#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kanlab/layers.hpp"

namespace kanlab {

// Model checkpoint: little-endian binary, magic + format version, the full
// ModelConfig, then the flat parameter vector as raw 64-bit floats, so a
// round trip is bit-exact.

namespace detail {

constexpr char kCheckpointMagic[8] = {'K', 'A', 'N', 'L', 'A', 'B', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline void put_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline void put_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw std::runtime_error("checkpoint: truncated file");
    }
    return v;
}

inline std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw std::runtime_error("checkpoint: truncated file");
    }
    return v;
}

inline double get_f64(std::istream& in) {
    double v = 0.0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw std::runtime_error("checkpoint: truncated file");
    }
    return v;
}

}  // namespace detail

inline void save_model(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_model: cannot write '" + path + "'");
    out.write(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
    detail::put_u32(out, detail::kCheckpointVersion);

    const ModelConfig& cfg = model.config;
    detail::put_u32(out, static_cast<std::uint32_t>(cfg.family));
    detail::put_u32(out, static_cast<std::uint32_t>(cfg.size_class));
    detail::put_u32(out, static_cast<std::uint32_t>(cfg.in_dim));
    detail::put_u32(out, static_cast<std::uint32_t>(cfg.out_dim));
    detail::put_u32(out, static_cast<std::uint32_t>(cfg.widths.size()));
    for (int w : cfg.widths) detail::put_u32(out, static_cast<std::uint32_t>(w));
    detail::put_u32(out, static_cast<std::uint32_t>(cfg.grid));
    detail::put_u32(out, static_cast<std::uint32_t>(cfg.degree));
    detail::put_u32(out, cfg.activation ? static_cast<std::uint32_t>(*cfg.activation) : 0xFFFFFFFFu);
    detail::put_f64(out, cfg.dropout);
    detail::put_f64(out, cfg.domain_lo);
    detail::put_f64(out, cfg.domain_hi);

    std::uint64_t total = 0;
    Model& mutable_model = const_cast<Model&>(model);
    for (Param* p : mutable_model.params()) total += p->size();
    detail::put_u64(out, total);
    for (Param* p : mutable_model.params()) {
        for (double v : p->value.data()) detail::put_f64(out, v);
    }
    if (!out) throw std::runtime_error("save_model: write failed for '" + path + "'");
}

inline Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_model: cannot open '" + path + "'");
    char magic[8];
    if (!in.read(magic, sizeof(magic)) ||
        std::memcmp(magic, detail::kCheckpointMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("load_model: bad magic in '" + path + "'");
    }
    const std::uint32_t version = detail::get_u32(in);
    if (version != detail::kCheckpointVersion) {
        throw std::runtime_error("load_model: unsupported checkpoint version " +
                                 std::to_string(version));
    }

    ModelConfig cfg;
    cfg.family = static_cast<ModelFamily>(detail::get_u32(in));
    cfg.size_class = static_cast<SizeClass>(detail::get_u32(in));
    cfg.in_dim = static_cast<int>(detail::get_u32(in));
    cfg.out_dim = static_cast<int>(detail::get_u32(in));
    const std::uint32_t n_widths = detail::get_u32(in);
    cfg.widths.resize(n_widths);
    for (std::uint32_t i = 0; i < n_widths; ++i) cfg.widths[i] = static_cast<int>(detail::get_u32(in));
    cfg.grid = static_cast<int>(detail::get_u32(in));
    cfg.degree = static_cast<int>(detail::get_u32(in));
    const std::uint32_t act = detail::get_u32(in);
    if (act != 0xFFFFFFFFu) cfg.activation = static_cast<Activation>(act);
    cfg.dropout = detail::get_f64(in);
    cfg.domain_lo = detail::get_f64(in);
    cfg.domain_hi = detail::get_f64(in);

    Model model = build_model(cfg, InitScheme::kaiming_normal, 0);
    std::uint64_t total = 0;
    for (Param* p : model.params()) total += p->size();
    const std::uint64_t stored = detail::get_u64(in);
    if (stored != total) {
        throw std::runtime_error("load_model: parameter count mismatch (file " +
                                 std::to_string(stored) + ", model " + std::to_string(total) + ")");
    }
    for (Param* p : model.params()) {
        for (double& v : p->value.data()) v = detail::get_f64(in);
    }
    return model;
}

}  // namespace kanlab
