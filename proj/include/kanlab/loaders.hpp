#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kanlab/dataset.hpp"

namespace kanlab {

/// Raised by loaders on malformed files; carries enough context to locate
/// the offending byte or row.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw FormatError(path + ": truncated header");
    }
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

}  // namespace detail

/// Load an IDX image/label pair (the MNIST distribution format): big-endian
/// magic 0x00000803 for images (unsigned bytes, 3 dims) and 0x00000801 for
/// labels. Features come out flattened to [N, rows*cols] with raw byte
/// values; callers normalize separately.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw FormatError(images_path + ": cannot open");
    const std::uint32_t img_magic = detail::read_be_u32(img, images_path);
    if (img_magic != 0x00000803u) {
        throw FormatError(images_path + ": bad magic (expected 0x00000803)");
    }
    const std::uint32_t n = detail::read_be_u32(img, images_path);
    const std::uint32_t rows = detail::read_be_u32(img, images_path);
    const std::uint32_t cols = detail::read_be_u32(img, images_path);
    if (n == 0 || rows == 0 || cols == 0) throw FormatError(images_path + ": empty dimensions");
    const std::size_t d = std::size_t(rows) * cols;
    std::vector<unsigned char> pixels(std::size_t(n) * d);
    if (!img.read(reinterpret_cast<char*>(pixels.data()),
                  static_cast<std::streamsize>(pixels.size()))) {
        throw FormatError(images_path + ": truncated pixel data");
    }

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError(labels_path + ": cannot open");
    const std::uint32_t lab_magic = detail::read_be_u32(lab, labels_path);
    if (lab_magic != 0x00000801u) {
        throw FormatError(labels_path + ": bad magic (expected 0x00000801)");
    }
    const std::uint32_t n_labels = detail::read_be_u32(lab, labels_path);
    if (n_labels != n) {
        throw FormatError(labels_path + ": label count " + std::to_string(n_labels) +
                          " != image count " + std::to_string(n));
    }
    std::vector<unsigned char> raw_labels(n_labels);
    if (!lab.read(reinterpret_cast<char*>(raw_labels.data()),
                  static_cast<std::streamsize>(raw_labels.size()))) {
        throw FormatError(labels_path + ": truncated label data");
    }

    Dataset ds;
    ds.features = Tensor({n, d});
    double* dst = ds.features.raw();
    for (std::size_t i = 0; i < pixels.size(); ++i) dst[i] = static_cast<double>(pixels[i]);
    ds.labels.reserve(n);
    int max_label = 0;
    for (unsigned char y : raw_labels) {
        ds.labels.push_back(static_cast<int>(y));
        max_label = std::max(max_label, static_cast<int>(y));
    }
    ds.class_count = max_label + 1;
    ds.name = std::filesystem::path(images_path).filename().string();
    return ds;
}

/// Write an IDX pair; used by fixtures and tools that materialize synthetic
/// image sets in the interchange format.
inline void write_idx(const std::string& images_path, const std::string& labels_path,
                      const std::vector<unsigned char>& pixels, std::uint32_t n,
                      std::uint32_t rows, std::uint32_t cols,
                      const std::vector<unsigned char>& labels) {
    if (pixels.size() != std::size_t(n) * rows * cols || labels.size() != n) {
        throw std::invalid_argument("write_idx: size mismatch");
    }
    auto put_be = [](std::ofstream& out, std::uint32_t v) {
        const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                    static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw FormatError(images_path + ": cannot open for writing");
    put_be(img, 0x00000803u);
    put_be(img, n);
    put_be(img, rows);
    put_be(img, cols);
    img.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError(labels_path + ": cannot open for writing");
    put_be(lab, 0x00000801u);
    put_be(lab, n);
    lab.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
}

namespace detail {

/// RFC-4180-ish field split: quoted fields may contain commas and doubled
/// quotes; a trailing \r is stripped.
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t row,
                                               const std::string& path) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            if (!cur.empty()) {
                throw FormatError(path + ": row " + std::to_string(row) + ": stray quote");
            }
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch == '\r' && i + 1 == line.size()) {
            // tolerate CRLF
        } else {
            cur.push_back(ch);
        }
    }
    if (quoted) throw FormatError(path + ": row " + std::to_string(row) + ": unterminated quote");
    fields.push_back(cur);
    return fields;
}

inline double parse_numeric(const std::string& field, std::size_t row, const std::string& column,
                            const std::string& path) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(field, &pos);
        while (pos < field.size() && (field[pos] == ' ' || field[pos] == '\t')) ++pos;
        if (pos != field.size()) throw std::invalid_argument("trailing garbage");
        return v;
    } catch (const std::exception&) {
        throw FormatError(path + ": row " + std::to_string(row) + ", column '" + column +
                          "': non-numeric value '" + field + "'");
    }
}

}  // namespace detail

/// Load a CSV with a header row into a Dataset. The label column must hold
/// non-negative integers; every other column (or the explicit feature list)
/// must be numeric. class_count = max label + 1.
inline Dataset load_csv(const std::string& path, const std::string& label_column,
                        const std::vector<std::string>& feature_columns = {}) {
    std::ifstream in(path);
    if (!in) throw FormatError(path + ": cannot open");
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": missing header row");
    const std::vector<std::string> header = detail::split_csv_line(line, 0, path);

    std::ptrdiff_t label_idx = -1;
    std::vector<std::size_t> feature_idx;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == label_column) {
            label_idx = static_cast<std::ptrdiff_t>(i);
        } else if (feature_columns.empty() ||
                   std::find(feature_columns.begin(), feature_columns.end(), header[i]) !=
                       feature_columns.end()) {
            feature_idx.push_back(i);
        }
    }
    if (label_idx < 0) throw FormatError(path + ": label column '" + label_column + "' not in header");
    if (feature_idx.empty()) throw FormatError(path + ": no feature columns");
    if (!feature_columns.empty() && feature_idx.size() != feature_columns.size()) {
        throw FormatError(path + ": a requested feature column is missing from the header");
    }

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const std::vector<std::string> fields = detail::split_csv_line(line, row, path);
        if (fields.size() != header.size()) {
            throw FormatError(path + ": row " + std::to_string(row) + ": expected " +
                              std::to_string(header.size()) + " fields, got " +
                              std::to_string(fields.size()));
        }
        const double y = detail::parse_numeric(fields[static_cast<std::size_t>(label_idx)], row,
                                               label_column, path);
        const double y_round = std::nearbyint(y);
        if (std::abs(y - y_round) > 1e-9 || y_round < 0.0) {
            throw FormatError(path + ": row " + std::to_string(row) +
                              ": label must be a non-negative integer, got '" +
                              fields[static_cast<std::size_t>(label_idx)] + "'");
        }
        labels.push_back(static_cast<int>(y_round));
        for (std::size_t j : feature_idx) {
            values.push_back(detail::parse_numeric(fields[j], row, header[j], path));
        }
    }
    if (labels.empty()) throw FormatError(path + ": no data rows");

    Dataset ds;
    ds.features = Tensor({labels.size(), feature_idx.size()}, std::move(values));
    ds.labels = std::move(labels);
    ds.class_count = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
    ds.name = std::filesystem::path(path).filename().string();
    return ds;
}

}  // namespace kanlab
