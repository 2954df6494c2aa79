#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tembed {

/// Row-major grayscale image with intensities in [0, 1].
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(std::size_t w, std::size_t h, double fill = 0.0);
    Image(std::size_t w, std::size_t h, std::vector<double> values);

    double& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
    double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }

    bool operator==(const Image&) const = default;
};

/// Throws std::invalid_argument if the dimensions or intensities are invalid.
void validate(const Image& img);

/// Decodes a binary (P5) PGM stream. Comments introduced by '#' are skipped
/// in the header. Samples wider than 8 bits are big-endian as in netpbm.
Image load_pgm(std::span<const std::uint8_t> bytes);
Image load_pgm_file(const std::filesystem::path& path);

/// Encodes as 8-bit P5 with maxval 255, rounding to nearest.
std::vector<std::uint8_t> encode_pgm(const Image& img);
void save_pgm_file(const std::filesystem::path& path, const Image& img);

inline constexpr double kDefaultPadValue = 1.0;

/// Fits the image into a side x side square.
///
/// Images whose larger side exceeds `side` are first box-filtered down so
/// the larger side equals `side` (aspect ratio preserved, smaller side
/// rounded to nearest and at least 1). The content is then centered on a
/// `pad_value` canvas; odd remainders put the extra row/column on the
/// bottom/right.
Image standardize(const Image& img, std::size_t side, double pad_value = kDefaultPadValue);

/// Area-weighted resampling to an arbitrary size (each output pixel is the
/// overlap-weighted mean of the source pixels it covers).
Image resample_area(const Image& img, std::size_t new_width, std::size_t new_height);

} // namespace tembed
