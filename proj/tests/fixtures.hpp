#pragma once

// Procedurally rendered digit images: a deterministic desk-scale stand-in
// for handwritten-digit data when the real IDX files are not on disk.
// Each sample is a 7x5 glyph drawn onto a side x side canvas under a random
// affine jitter (shift, rotation, scale, stroke intensity) plus pixel noise.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "kanlab/dataset.hpp"

namespace testutil {

inline constexpr std::array<std::array<std::string_view, 7>, 10> kDigitGlyphs = {{
    {"01110", "10001", "10011", "10101", "11001", "10001", "01110"},  // 0
    {"00100", "01100", "00100", "00100", "00100", "00100", "01110"},  // 1
    {"01110", "10001", "00001", "00110", "01000", "10000", "11111"},  // 2
    {"11111", "00010", "00100", "00010", "00001", "10001", "01110"},  // 3
    {"00010", "00110", "01010", "10010", "11111", "00010", "00010"},  // 4
    {"11111", "10000", "11110", "00001", "00001", "10001", "01110"},  // 5
    {"00110", "01000", "10000", "11110", "10001", "10001", "01110"},  // 6
    {"11111", "00001", "00010", "00100", "01000", "01000", "01000"},  // 7
    {"01110", "10001", "10001", "01110", "10001", "10001", "01110"},  // 8
    {"01110", "10001", "10001", "01111", "00001", "00010", "01100"},  // 9
}};

/// Bilinear sample of a binary glyph at fractional coordinates (gy, gx);
/// outside the 7x5 grid reads as 0.
inline double glyph_sample(int digit, double gy, double gx) {
    auto cell = [&](int r, int c) -> double {
        if (r < 0 || r >= 7 || c < 0 || c >= 5) return 0.0;
        return kDigitGlyphs[static_cast<std::size_t>(digit)][static_cast<std::size_t>(r)]
                           [static_cast<std::size_t>(c)] == '1'
                   ? 1.0
                   : 0.0;
    };
    const int r0 = static_cast<int>(std::floor(gy));
    const int c0 = static_cast<int>(std::floor(gx));
    const double fy = gy - r0;
    const double fx = gx - c0;
    return cell(r0, c0) * (1 - fy) * (1 - fx) + cell(r0, c0 + 1) * (1 - fy) * fx +
           cell(r0 + 1, c0) * fy * (1 - fx) + cell(r0 + 1, c0 + 1) * fy * fx;
}

/// Render n jittered digit images with raw byte-range values in [0, 255].
inline std::vector<unsigned char> render_digit_pixels(std::size_t n, std::size_t side,
                                                      std::uint64_t seed,
                                                      std::vector<unsigned char>& labels_out) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(-0.30, 0.30);   // radians
    std::uniform_real_distribution<double> scale_d(0.80, 1.15);
    std::uniform_real_distribution<double> shift(-0.12, 0.12);   // fraction of side
    std::uniform_real_distribution<double> stroke(0.70, 1.00);
    std::normal_distribution<double> noise(0.0, 16.0);

    std::vector<unsigned char> pixels(n * side * side, 0);
    labels_out.resize(n);
    const double cx = (static_cast<double>(side) - 1.0) / 2.0;
    const double cy = cx;
    const double cell_x = 0.75 * static_cast<double>(side) / 5.0;
    const double cell_y = 0.75 * static_cast<double>(side) / 7.0;

    for (std::size_t i = 0; i < n; ++i) {
        const int digit = static_cast<int>(i % 10);
        labels_out[i] = static_cast<unsigned char>(digit);
        const double theta = angle(rng);
        const double s = scale_d(rng);
        const double dx = shift(rng) * static_cast<double>(side);
        const double dy = shift(rng) * static_cast<double>(side);
        const double amp = stroke(rng);
        const double cth = std::cos(theta), sth = std::sin(theta);
        unsigned char* img = pixels.data() + i * side * side;
        for (std::size_t r = 0; r < side; ++r) {
            for (std::size_t c = 0; c < side; ++c) {
                // inverse affine: canvas -> glyph frame
                const double px = (static_cast<double>(c) - cx - dx);
                const double py = (static_cast<double>(r) - cy - dy);
                const double ux = (cth * px + sth * py) / s;
                const double uy = (-sth * px + cth * py) / s;
                const double gx = ux / cell_x + 2.0;
                const double gy = uy / cell_y + 3.0;
                double v = 255.0 * amp * glyph_sample(digit, gy, gx) + noise(rng);
                v = std::clamp(v, 0.0, 255.0);
                img[r * side + c] = static_cast<unsigned char>(std::lround(v));
            }
        }
    }
    return pixels;
}

/// Digit fixture as an in-memory Dataset (raw byte-valued features).
inline kanlab::Dataset make_digit_dataset(std::size_t n, std::size_t side, std::uint64_t seed) {
    std::vector<unsigned char> labels;
    const std::vector<unsigned char> pixels = render_digit_pixels(n, side, seed, labels);
    kanlab::Dataset ds;
    ds.features = kanlab::Tensor({n, side * side});
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        ds.features[i] = static_cast<double>(pixels[i]);
    }
    ds.labels.reserve(n);
    for (unsigned char y : labels) ds.labels.push_back(static_cast<int>(y));
    ds.class_count = 10;
    ds.name = "digits" + std::to_string(side);
    return ds;
}

}  // namespace testutil
