#include "tembed/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tembed/error.hpp"

namespace tembed {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t pos() const { return pos_; }

    std::uint64_t read(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) throw ParseError(std::string("checkpoint truncated reading ") + what, pos_);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += n;
        return v;
    }

    std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(read(4, what)); }
    std::uint64_t u64(const char* what) { return read(8, what); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t narrow(std::size_t v) {
    if (v > 0xFFFFFFFFu) throw StructuralError("checkpoint: field does not fit in 32 bits");
    return static_cast<std::uint32_t>(v);
}

} // namespace

std::vector<std::uint8_t> encode_checkpoint(const NetworkParams& params) {
    const auto& spec = params.spec();
    std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    put_u32(out, kCheckpointVersion);
    put_u32(out, narrow(spec.input_side));
    put_u32(out, narrow(spec.layers.size()));
    for (const auto& l : spec.layers) {
        put_u32(out, static_cast<std::uint32_t>(l.kind));
        put_u32(out, narrow(l.units));
        put_u32(out, narrow(l.kind == LayerKind::maxpool ? l.window : l.kernel));
        put_u32(out, narrow(l.stride));
    }
    put_u64(out, params.size());
    for (double v : params.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

NetworkParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof kCheckpointMagic || std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
        throw ParseError("checkpoint: bad magic", 0);
    }
    Reader r(bytes.subspan(sizeof kCheckpointMagic));
    const std::size_t base = sizeof kCheckpointMagic;
    const auto version = r.u32("version");
    if (version != kCheckpointVersion) {
        throw ParseError("checkpoint: unsupported format version " + std::to_string(version), base);
    }

    NetworkSpec spec;
    spec.input_side = r.u32("input side");
    const auto n_layers = r.u32("layer count");
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const std::size_t at = base + r.pos();
        const auto kind = r.u32("layer kind");
        const auto units = r.u32("layer units");
        const auto kw = r.u32("layer kernel/window");
        const auto stride = r.u32("layer stride");
        if (kind < 1 || kind > 6) throw ParseError("checkpoint: unknown layer kind " + std::to_string(kind), at);
        LayerSpec l{static_cast<LayerKind>(kind), units, 0, stride, 0};
        if (l.kind == LayerKind::maxpool) {
            l.window = kw;
        } else {
            l.kernel = kw;
        }
        spec.layers.push_back(l);
    }

    NetworkParams params;
    try {
        params = NetworkParams(spec);
    } catch (const StructuralError& e) {
        throw ParseError(std::string("checkpoint: invalid layer spec: ") + e.what(), base);
    }

    const std::size_t count_at = base + r.pos();
    const auto count = r.u64("parameter count");
    if (count != params.size()) {
        throw ParseError("checkpoint: parameter count " + std::to_string(count) + " does not match layer spec (" +
                             std::to_string(params.size()) + ")",
                         count_at);
    }
    for (double& v : params.values()) {
        const std::size_t at = base + r.pos();
        v = std::bit_cast<double>(r.u64("parameters"));
        if (!std::isfinite(v)) throw ParseError("checkpoint: non-finite parameter", at);
    }
    if (base + r.pos() != bytes.size()) throw ParseError("checkpoint: trailing bytes", base + r.pos());
    return params;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params) {
    const auto bytes = encode_checkpoint(params);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

} // namespace tembed
