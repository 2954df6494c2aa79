#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tembed/matrix.hpp"

namespace tembed {

/// Embeddings with per-row provenance, as written by the `embed` command.
///
/// Text form: a header `class<TAB>split<TAB>path<TAB>e0<TAB>...<TAB>e{D-1}`,
/// then one row per sample with values in shortest round-trip decimal.
struct EmbeddingTable {
    std::vector<std::string> class_names;
    std::vector<std::string> splits;
    std::vector<std::string> paths;
    Matrix vectors;
};

std::string format_embeddings_tsv(const EmbeddingTable& table);
EmbeddingTable parse_embeddings_tsv(std::string_view text);

/// Writes out_dir/vectors.tsv (one row of tab-separated values per
/// embedding) and out_dir/metadata.tsv (one label per line), both
/// LF-terminated and aligned line by line. Creates out_dir if needed.
void export_projector(const Matrix& embeddings, const std::vector<std::string>& labels,
                      const std::filesystem::path& out_dir);

std::string format_vectors_tsv(const Matrix& embeddings);
Matrix parse_vectors_tsv(std::string_view text);

} // namespace tembed
