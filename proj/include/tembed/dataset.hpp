#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tembed/image.hpp"

namespace tembed {

struct Sample {
    Image image;
    std::size_t class_id = 0;
    std::string source_path;
};

/// Labeled samples plus the class table their class_ids index into.
struct Dataset {
    std::vector<std::string> class_names;
    std::vector<Sample> samples;

    void validate() const;
};

struct SplitSpec {
    std::size_t target_size = 32;
    std::size_t per_class_val = 100;
    std::size_t per_class_test = 100;
    std::size_t min_abundance = 500;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Per-class sample index lists.
///
/// Seen classes (abundance >= min_abundance) own train/val/test; classes
/// below the threshold are unseen and only appear in unseen_test. Class
/// positions in these lists follow seen_classes / unseen_classes, which hold
/// ids into the originating Dataset's class table, ascending.
struct Splits {
    std::vector<std::string> seen_names;
    std::vector<std::string> unseen_names;
    std::vector<std::size_t> seen_classes;
    std::vector<std::size_t> unseen_classes;
    std::vector<std::vector<std::size_t>> train;
    std::vector<std::vector<std::size_t>> val;
    std::vector<std::vector<std::size_t>> test;
    std::vector<std::vector<std::size_t>> unseen_test;

    bool operator==(const Splits&) const = default;
};

/// Seeded per-class shuffle: the first per_class_val indices go to val, the
/// next per_class_test to test, the rest to train. Unseen classes keep the
/// first min(abundance, per_class_test) of their shuffled indices.
Splits make_splits(const Dataset& data, const SplitSpec& spec);

/// Number of distinct shape families generate_synthetic can draw from.
inline constexpr std::size_t kSyntheticFamilies = 10;

std::string synthetic_class_name(std::size_t class_id);

/// Dark parametric shapes on a light background with additive noise.
///
/// Class c uses shape family c mod kSyntheticFamilies; classes beyond the
/// family count reuse a family with a distinct size band. Samples are
/// emitted class by class in stable order.
Dataset generate_synthetic(std::size_t n_classes, std::size_t per_class, std::size_t side, std::uint64_t seed);

/// One subdirectory per class (sorted by name), each holding *.pgm files
/// (sorted by name). source_path is relative to root.
Dataset load_dataset_dir(const std::filesystem::path& root);

/// Writes samples as root/<class>/<NNNNN>.pgm (8-bit).
void write_dataset_dir(const Dataset& data, const std::filesystem::path& root);

enum class SplitName { train, val, test, unseen };

std::string_view to_string(SplitName s);
SplitName parse_split_name(std::string_view s);

struct ManifestEntry {
    SplitName split;
    std::string class_name;
    std::string relative_path;
};

/// One `split<TAB>class<TAB>path` line per sample: for each seen class its
/// train, val, test entries, then every unseen class's entries.
std::string format_manifest(const Dataset& data, const Splits& splits);
std::vector<ManifestEntry> parse_manifest(std::string_view text);

/// Manifest loaded back into a dataset (class table: seen classes then unseen,
/// in order of first appearance) and the matching splits. Relative paths
/// resolve against the manifest's own directory.
struct LoadedManifest {
    Dataset data;
    Splits splits;
};

LoadedManifest load_manifest(const std::filesystem::path& manifest_path);

} // namespace tembed
