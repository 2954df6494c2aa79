#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tembed/classify.hpp"
#include "tembed/dataset.hpp"
#include "tembed/matrix.hpp"
#include "tembed/network.hpp"

namespace tembed {

struct UnseenClassCount {
    std::string name;
    std::size_t samples = 0;
    bool scored = false;
};

/// Half-split classification among classes the network never trained on.
struct OpenSetRun {
    std::vector<UnseenClassCount> classes; // every unseen class, in Splits order
    std::vector<std::string> scored_names; // class table of the report
    std::vector<std::size_t> rows;         // dataset sample index per embedding row
    Matrix embeddings;
    std::vector<std::size_t> labels; // into scored_names
    HalfSplitResult evaluation;
};

/// Embeds every unseen_test sample and runs half_split_evaluate over the
/// unseen classes with at least 2 samples; smaller classes are listed as
/// skipped. Throws ProtocolError when no unseen class qualifies.
OpenSetRun evaluate_unseen(const NetworkParams& params, const Matrix& inputs, const Splits& splits,
                           ClassifierMode mode, std::size_t k, std::uint64_t seed);

/// `#unseen_classes` (class, samples, status) followed by the report sections.
std::string format_open_set_tsv(const OpenSetRun& run);

} // namespace tembed
