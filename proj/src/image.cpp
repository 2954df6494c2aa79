#include "tembed/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include "tembed/error.hpp"

namespace tembed {

Image::Image(std::size_t w, std::size_t h, double fill) : width(w), height(h), pixels(w * h, fill) {}

Image::Image(std::size_t w, std::size_t h, std::vector<double> values)
    : width(w), height(h), pixels(std::move(values)) {
    validate(*this);
}

void validate(const Image& img) {
    if (img.width < 1 || img.height < 1) throw std::invalid_argument("image dimensions must be positive");
    if (img.pixels.size() != img.width * img.height) {
        throw std::invalid_argument("pixel count does not match width x height");
    }
    for (double v : img.pixels) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("pixel intensity outside [0,1]");
    }
}

namespace {

bool is_space(std::uint8_t c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

class HeaderReader {
public:
    HeaderReader(std::span<const std::uint8_t> bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

    std::size_t pos() const { return pos_; }

    unsigned long read_uint(const char* field) {
        skip_whitespace_and_comments();
        const std::size_t start = pos_;
        unsigned long value = 0;
        while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 0xFFFFFFFFUL) throw ParseError(std::string("PGM ") + field + " too large", start);
            ++pos_;
        }
        if (pos_ == start) throw ParseError(std::string("PGM header: expected ") + field, start);
        return value;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    void expect_single_space() {
        if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) {
            throw ParseError("PGM header: expected whitespace before raster", pos_);
        }
        ++pos_;
    }

private:
    void skip_whitespace_and_comments() {
        while (pos_ < bytes_.size()) {
            const auto c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (is_space(c)) {
                ++pos_;
            } else {
                return;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_;
};

} // namespace

Image load_pgm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw ParseError("PGM: bad magic, expected P5", 0);
    if (bytes.size() > 2 && !is_space(bytes[2]) && bytes[2] != '#') {
        throw ParseError("PGM: bad magic, expected P5", 2);
    }

    HeaderReader header(bytes, 2);
    const std::size_t width_at = header.pos();
    const auto width = header.read_uint("width");
    const auto height = header.read_uint("height");
    if (width == 0 || height == 0) throw ParseError("PGM: zero image dimension", width_at);
    const std::size_t maxval_at = header.pos();
    const auto maxval = header.read_uint("maxval");
    if (maxval == 0 || maxval > 65535) throw ParseError("PGM: maxval must be in [1, 65535]", maxval_at);
    header.expect_single_space();

    const std::size_t raster_at = header.pos();
    const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
    const std::size_t count = static_cast<std::size_t>(width) * height;
    const std::size_t needed = count * bytes_per_sample;
    if (bytes.size() - raster_at < needed) {
        throw ParseError("PGM: truncated raster, expected " + std::to_string(needed) + " bytes, found " +
                             std::to_string(bytes.size() - raster_at),
                         bytes.size());
    }

    Image img(width, height);
    const double scale = 1.0 / static_cast<double>(maxval);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t at = raster_at + i * bytes_per_sample;
        unsigned sample = bytes[at];
        if (bytes_per_sample == 2) sample = (sample << 8) | bytes[at + 1];
        if (sample > maxval) throw ParseError("PGM: sample exceeds maxval", at);
        img.pixels[i] = sample * scale;
    }
    return img;
}

Image load_pgm_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return load_pgm(bytes);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.offset());
    }
}

std::vector<std::uint8_t> encode_pgm(const Image& img) {
    validate(img);
    const std::string header =
        "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + img.pixels.size());
    for (double v : img.pixels) out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    return out;
}

void save_pgm_file(const std::filesystem::path& path, const Image& img) {
    const auto bytes = encode_pgm(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

namespace {

// Overlap-weighted contributions of source cells to one output cell along an axis.
struct AxisWeights {
    std::vector<std::size_t> first;
    std::vector<std::vector<double>> weights;
};

AxisWeights axis_weights(std::size_t src, std::size_t dst) {
    AxisWeights aw;
    aw.first.resize(dst);
    aw.weights.resize(dst);
    const double step = static_cast<double>(src) / static_cast<double>(dst);
    for (std::size_t o = 0; o < dst; ++o) {
        const double lo = o * step;
        const double hi = (o + 1) * step;
        const auto s0 = static_cast<std::size_t>(std::floor(lo));
        const auto s1 = std::min(src, static_cast<std::size_t>(std::ceil(hi)));
        aw.first[o] = s0;
        double total = 0.0;
        for (std::size_t s = s0; s < s1; ++s) {
            const double w = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
            aw.weights[o].push_back(std::max(0.0, w));
            total += aw.weights[o].back();
        }
        for (double& w : aw.weights[o]) w /= total;
    }
    return aw;
}

} // namespace

Image resample_area(const Image& img, std::size_t new_width, std::size_t new_height) {
    validate(img);
    if (new_width < 1 || new_height < 1) throw std::invalid_argument("resample target must be positive");
    if (new_width == img.width && new_height == img.height) return img;

    const AxisWeights wx = axis_weights(img.width, new_width);
    const AxisWeights wy = axis_weights(img.height, new_height);
    Image out(new_width, new_height);
    for (std::size_t oy = 0; oy < new_height; ++oy) {
        for (std::size_t ox = 0; ox < new_width; ++ox) {
            // Accumulate deviations from the first covered pixel so that a
            // constant region reproduces its value bit-exactly.
            const double base = img.at(wx.first[ox], wy.first[oy]);
            double acc = 0.0;
            double lo = base;
            double hi = base;
            for (std::size_t j = 0; j < wy.weights[oy].size(); ++j) {
                const std::size_t sy = wy.first[oy] + j;
                double row = 0.0;
                for (std::size_t i = 0; i < wx.weights[ox].size(); ++i) {
                    const double v = img.at(wx.first[ox] + i, sy);
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                    row += wx.weights[ox][i] * (v - base);
                }
                acc += wy.weights[oy][j] * row;
            }
            // A convex combination stays within the covered range; clamp away rounding.
            out.at(ox, oy) = std::clamp(base + acc, lo, hi);
        }
    }
    return out;
}

Image standardize(const Image& img, std::size_t side, double pad_value) {
    validate(img);
    if (side < 1) throw std::invalid_argument("standardize: target side must be positive");
    if (!(pad_value >= 0.0 && pad_value <= 1.0)) throw std::invalid_argument("pad value outside [0,1]");

    const Image* content = &img;
    Image scaled;
    const std::size_t longest = std::max(img.width, img.height);
    if (longest > side) {
        const double f = static_cast<double>(side) / static_cast<double>(longest);
        auto fit = [&](std::size_t n) {
            if (n == longest) return side;
            return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(n * f)));
        };
        scaled = resample_area(img, fit(img.width), fit(img.height));
        content = &scaled;
    }

    Image out(side, side, pad_value);
    const std::size_t x0 = (side - content->width) / 2;
    const std::size_t y0 = (side - content->height) / 2;
    for (std::size_t y = 0; y < content->height; ++y) {
        std::copy_n(content->pixels.begin() + static_cast<std::ptrdiff_t>(y * content->width), content->width,
                    out.pixels.begin() + static_cast<std::ptrdiff_t>((y0 + y) * side + x0));
    }
    return out;
}

} // namespace tembed
