#include "tembed/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "tembed/error.hpp"
#include "tembed/rng.hpp"
#include "tembed/tsv.hpp"

namespace tembed {

void Dataset::validate() const {
    for (const auto& s : samples) {
        if (s.class_id >= class_names.size()) {
            throw StructuralError("sample '" + s.source_path + "' has class id outside the class table");
        }
    }
}

void SplitSpec::validate() const {
    if (target_size < 8) throw std::invalid_argument("target size must be at least 8");
    if (min_abundance < per_class_val + per_class_test) {
        throw std::invalid_argument("min abundance must be at least per-class val + test");
    }
}

Splits make_splits(const Dataset& data, const SplitSpec& spec) {
    spec.validate();
    data.validate();
    if (data.samples.empty()) throw DatasetError("make_splits: no samples");

    std::vector<std::vector<std::size_t>> by_class(data.class_names.size());
    for (std::size_t i = 0; i < data.samples.size(); ++i) by_class[data.samples[i].class_id].push_back(i);

    Rng rng(spec.seed);
    Splits out;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto members = by_class[c];
        rng.shuffle(std::span(members));
        const auto first = members.begin();
        if (members.size() >= spec.min_abundance) {
            if (members.size() < spec.per_class_val + spec.per_class_test) {
                throw std::logic_error("seen class smaller than val + test");
            }
            const auto val_end = first + static_cast<std::ptrdiff_t>(spec.per_class_val);
            const auto test_end = val_end + static_cast<std::ptrdiff_t>(spec.per_class_test);
            out.seen_classes.push_back(c);
            out.seen_names.push_back(data.class_names[c]);
            out.val.emplace_back(first, val_end);
            out.test.emplace_back(val_end, test_end);
            out.train.emplace_back(test_end, members.end());
        } else {
            const auto n = std::min(members.size(), spec.per_class_test);
            out.unseen_classes.push_back(c);
            out.unseen_names.push_back(data.class_names[c]);
            out.unseen_test.emplace_back(first, first + static_cast<std::ptrdiff_t>(n));
        }
    }
    return out;
}

namespace {

constexpr std::array<const char*, kSyntheticFamilies> kFamilyNames = {
    "ellipse", "ring", "cross", "bar", "triangle", "frame", "dots", "crescent", "tristar", "corner",
};

struct Vec2 {
    double u;
    double v;
};

double dist(Vec2 a, Vec2 b) { return std::hypot(a.u - b.u, a.v - b.v); }

// True if canonical point p (shape nominally within the unit disk) is ink.
bool inside(std::size_t family, Vec2 p, double aspect) {
    const double au = std::abs(p.u);
    const double av = std::abs(p.v);
    switch (family) {
    case 0: return p.u * p.u + (p.v / aspect) * (p.v / aspect) <= 1.0;
    case 1: {
        const double r = std::hypot(p.u, p.v);
        return r >= 0.62 && r <= 1.0;
    }
    case 2: return (au <= 0.22 && av <= 1.0) || (av <= 0.22 && au <= 1.0);
    case 3: return au <= 1.0 && av <= 0.2;
    case 4: {
        // Equilateral triangle: inscribed radius 0.5, circumradius 1.
        for (double deg : {270.0, 30.0, 150.0}) {
            const double a = deg * std::numbers::pi / 180.0;
            if (p.u * std::cos(a) + p.v * std::sin(a) > 0.5) return false;
        }
        return true;
    }
    case 5: {
        const double m = std::max(au, av);
        return m >= 0.58 && m <= 0.85;
    }
    case 6: return dist(p, {0.6, 0.0}) <= 0.36 || dist(p, {-0.6, 0.0}) <= 0.36;
    case 7: return std::hypot(p.u, p.v) <= 1.0 && dist(p, {0.45, 0.0}) > 0.8;
    case 8: {
        for (double deg : {90.0, 210.0, 330.0}) {
            const double a = deg * std::numbers::pi / 180.0;
            const double along = p.u * std::cos(a) + p.v * std::sin(a);
            const double across = -p.u * std::sin(a) + p.v * std::cos(a);
            if (along >= 0.0 && along <= 1.0 && std::abs(across) <= 0.18) return true;
        }
        return false;
    }
    case 9:
        return (p.u >= -0.8 && p.u <= 0.8 && p.v >= -0.8 && p.v <= -0.42) ||
               (p.u >= -0.8 && p.u <= -0.42 && p.v >= -0.8 && p.v <= 0.8);
    default: throw std::logic_error("unknown shape family");
    }
}

Image render_shape(std::size_t class_id, std::size_t side, Rng& rng) {
    const std::size_t family = class_id % kSyntheticFamilies;
    const std::size_t band = class_id / kSyntheticFamilies;
    // Later bands draw smaller shapes so reused families stay distinguishable.
    const double size_scale = std::pow(0.7, static_cast<double>(band));

    const double s = static_cast<double>(side);
    const double radius = s * rng.uniform(0.28, 0.40) * size_scale;
    const double cx = s / 2.0 + s * rng.uniform(-0.08, 0.08);
    const double cy = s / 2.0 + s * rng.uniform(-0.08, 0.08);
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double aspect = rng.uniform(0.45, 0.65);
    const double ink = rng.uniform(0.05, 0.35);
    const double paper = rng.uniform(0.85, 1.0);
    const double ct = std::cos(theta);
    const double st = std::sin(theta);

    Image img(side, side);
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
            const double dx = (x + 0.5 - cx) / radius;
            const double dy = (y + 0.5 - cy) / radius;
            const Vec2 p{ct * dx + st * dy, -st * dx + ct * dy};
            const double base = inside(family, p, aspect) ? ink : paper;
            img.at(x, y) = std::clamp(base + 0.04 * rng.normal(), 0.0, 1.0);
        }
    }
    return img;
}

} // namespace

std::string synthetic_class_name(std::size_t class_id) {
    std::string id = std::to_string(class_id);
    if (id.size() < 2) id.insert(0, 2 - id.size(), '0');
    std::string name = "c" + id + "_" + kFamilyNames[class_id % kSyntheticFamilies];
    if (const std::size_t band = class_id / kSyntheticFamilies; band > 0) name += "_s" + std::to_string(band);
    return name;
}

Dataset generate_synthetic(std::size_t n_classes, std::size_t per_class, std::size_t side, std::uint64_t seed) {
    if (n_classes < 2) throw std::invalid_argument("generate_synthetic: need at least 2 classes");
    if (per_class < 4) throw std::invalid_argument("generate_synthetic: need at least 4 samples per class");
    if (side < 8) throw std::invalid_argument("generate_synthetic: side must be at least 8");

    Dataset data;
    Rng rng(seed);
    for (std::size_t c = 0; c < n_classes; ++c) {
        data.class_names.push_back(synthetic_class_name(c));
        for (std::size_t i = 0; i < per_class; ++i) {
            std::string idx = std::to_string(i);
            if (idx.size() < 5) idx.insert(0, 5 - idx.size(), '0');
            data.samples.push_back({render_shape(c, side, rng), c, data.class_names[c] + "/" + idx + ".pgm"});
        }
    }
    return data;
}

Dataset load_dataset_dir(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());

    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) class_dirs.push_back(entry.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());

    Dataset data;
    for (const auto& dir : class_dirs) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        const std::size_t class_id = data.class_names.size();
        data.class_names.push_back(dir.filename().string());
        for (const auto& f : files) {
            data.samples.push_back({load_pgm_file(f), class_id, f.lexically_relative(root).generic_string()});
        }
    }
    if (data.samples.empty()) throw DatasetError("no PGM samples under " + root.string());
    return data;
}

void write_dataset_dir(const Dataset& data, const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    data.validate();
    for (const auto& name : data.class_names) fs::create_directories(root / name);
    std::vector<std::size_t> counter(data.class_names.size(), 0);
    for (const auto& s : data.samples) {
        std::string idx = std::to_string(counter[s.class_id]++);
        if (idx.size() < 5) idx.insert(0, 5 - idx.size(), '0');
        save_pgm_file(root / data.class_names[s.class_id] / (idx + ".pgm"), s.image);
    }
}

std::string_view to_string(SplitName s) {
    switch (s) {
    case SplitName::train: return "train";
    case SplitName::val: return "val";
    case SplitName::test: return "test";
    case SplitName::unseen: return "unseen";
    }
    return "?";
}

SplitName parse_split_name(std::string_view s) {
    if (s == "train") return SplitName::train;
    if (s == "val") return SplitName::val;
    if (s == "test") return SplitName::test;
    if (s == "unseen") return SplitName::unseen;
    throw std::invalid_argument("unknown split name '" + std::string(s) + "'");
}

std::string format_manifest(const Dataset& data, const Splits& splits) {
    std::string out;
    auto emit = [&](SplitName split, const std::vector<std::size_t>& indices) {
        for (std::size_t i : indices) {
            const auto& s = data.samples.at(i);
            out += to_string(split);
            out += '\t';
            out += data.class_names.at(s.class_id);
            out += '\t';
            out += s.source_path;
            out += '\n';
        }
    };
    for (std::size_t c = 0; c < splits.seen_classes.size(); ++c) {
        emit(SplitName::train, splits.train[c]);
        emit(SplitName::val, splits.val[c]);
        emit(SplitName::test, splits.test[c]);
    }
    for (std::size_t c = 0; c < splits.unseen_classes.size(); ++c) emit(SplitName::unseen, splits.unseen_test[c]);
    return out;
}

std::vector<ManifestEntry> parse_manifest(std::string_view text) {
    std::vector<ManifestEntry> entries;
    std::size_t line_no = 0;
    for (auto line : split_lines(text)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        if (fields.size() != 3) {
            throw std::invalid_argument("manifest line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
        }
        entries.push_back({parse_split_name(fields[0]), std::string(fields[1]), std::string(fields[2])});
    }
    return entries;
}

LoadedManifest load_manifest(const std::filesystem::path& manifest_path) {
    const auto entries = parse_manifest(read_text_file(manifest_path));
    if (entries.empty()) throw DatasetError("empty manifest: " + manifest_path.string());
    const auto base = manifest_path.parent_path();

    std::vector<std::string> seen;
    std::vector<std::string> unseen;
    auto position = [](std::vector<std::string>& names, const std::string& n) {
        const auto it = std::find(names.begin(), names.end(), n);
        if (it != names.end()) return static_cast<std::size_t>(it - names.begin());
        names.push_back(n);
        return names.size() - 1;
    };
    for (const auto& e : entries) {
        if (e.split == SplitName::unseen) {
            position(unseen, e.class_name);
        } else {
            position(seen, e.class_name);
        }
    }
    for (const auto& n : unseen) {
        if (std::find(seen.begin(), seen.end(), n) != seen.end()) {
            throw DatasetError("class '" + n + "' is listed both as seen and unseen");
        }
    }

    LoadedManifest out;
    out.data.class_names = seen;
    out.data.class_names.insert(out.data.class_names.end(), unseen.begin(), unseen.end());
    auto& sp = out.splits;
    sp.seen_names = seen;
    sp.unseen_names = unseen;
    for (std::size_t c = 0; c < seen.size(); ++c) sp.seen_classes.push_back(c);
    for (std::size_t c = 0; c < unseen.size(); ++c) sp.unseen_classes.push_back(seen.size() + c);
    sp.train.resize(seen.size());
    sp.val.resize(seen.size());
    sp.test.resize(seen.size());
    sp.unseen_test.resize(unseen.size());

    for (const auto& e : entries) {
        const std::size_t index = out.data.samples.size();
        std::size_t class_id = 0;
        if (e.split == SplitName::unseen) {
            const std::size_t u = position(unseen, e.class_name);
            class_id = seen.size() + u;
            sp.unseen_test[u].push_back(index);
        } else {
            const std::size_t c = position(seen, e.class_name);
            class_id = c;
            (e.split == SplitName::train ? sp.train : e.split == SplitName::val ? sp.val : sp.test)[c].push_back(index);
        }
        out.data.samples.push_back({load_pgm_file(base / e.relative_path), class_id, e.relative_path});
    }
    return out;
}

} // namespace tembed
