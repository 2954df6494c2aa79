#include "tembed/openset.hpp"

#include <algorithm>

#include "tembed/error.hpp"
#include "tembed/train.hpp"

namespace tembed {

OpenSetRun evaluate_unseen(const NetworkParams& params, const Matrix& inputs, const Splits& splits,
                           ClassifierMode mode, std::size_t k, std::uint64_t seed) {
    for (const auto& name : splits.unseen_names) {
        if (std::find(splits.seen_names.begin(), splits.seen_names.end(), name) != splits.seen_names.end()) {
            throw StructuralError("unseen class '" + name + "' also appears among training classes");
        }
    }

    OpenSetRun run;
    for (std::size_t u = 0; u < splits.unseen_test.size(); ++u) {
        const auto& members = splits.unseen_test[u];
        const bool scored = members.size() >= 2;
        run.classes.push_back({splits.unseen_names[u], members.size(), scored});
        if (!scored) continue;
        const std::size_t label = run.scored_names.size();
        run.scored_names.push_back(splits.unseen_names[u]);
        for (std::size_t idx : members) {
            run.rows.push_back(idx);
            run.labels.push_back(label);
        }
    }
    if (run.scored_names.empty()) throw ProtocolError("open-set evaluation: no unseen class has at least 2 samples");

    run.embeddings = embed_rows(params, inputs, run.rows);
    run.evaluation = half_split_evaluate(run.embeddings, run.labels, run.scored_names, mode, k, seed);
    return run;
}

std::string format_open_set_tsv(const OpenSetRun& run) {
    std::string out = "#unseen_classes\nclass\tsamples\tstatus\n";
    for (const auto& c : run.classes) {
        out += c.name + "\t" + std::to_string(c.samples) + "\t" + (c.scored ? "scored" : "skipped") + "\n";
    }
    return out + format_report_tsv(run.evaluation.report);
}

} // namespace tembed
