#include "tembed/cli.hpp"

#include <CLI11.hpp>

#include <array>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "tembed/checkpoint.hpp"
#include "tembed/classify.hpp"
#include "tembed/dataset.hpp"
#include "tembed/error.hpp"
#include "tembed/openset.hpp"
#include "tembed/projector.hpp"
#include "tembed/train.hpp"
#include "tembed/tsv.hpp"

namespace tembed::cli {

namespace fs = std::filesystem;

namespace {

inline constexpr std::array<std::size_t, 5> kSweepK = {1, 3, 5, 10, 20};

// Raised for argument combinations CLI11 cannot express; maps to kUsageError.
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SynthOptions {
    std::size_t classes = 10;
    std::size_t per_class = 200;
    std::size_t side = 32;
    std::uint64_t seed = 1;
    std::size_t rare_classes = 0;
    std::size_t rare_count = 0;
    std::string out;
};

struct SplitOptions {
    std::string data;
    SplitSpec spec;
    std::string out;
};

struct TrainOptions {
    std::string manifest;
    std::string out;
    std::string history;
    std::size_t side = 32;
    std::size_t dim = 128;
    double pad = kDefaultPadValue;
    std::string margins = MarginSchedule::standard().to_string();
    std::string negatives{to_string(NegativeSampling::sample_uniform)};
    TrainConfig config;
};

struct EmbedOptions {
    std::string model;
    std::string manifest;
    std::string split = "all";
    double pad = kDefaultPadValue;
    std::string out;
};

struct EvalOptions {
    std::string model;
    std::string manifest;
    std::string mode = "centroid";
    std::size_t k = kDefaultK;
    std::string split = "test";
    std::uint64_t seed = 1;
    double pad = kDefaultPadValue;
    bool sweep = false;
    std::string out;
};

struct ProjectorOptions {
    std::string embeddings;
    std::string out;
};

void emit(const std::string& path, const std::string& content, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << content;
    } else {
        write_text_file(path, content);
    }
}

void cmd_synth(const SynthOptions& o, std::ostream& err) {
    if (o.rare_classes > o.classes) throw UsageError("--rare-classes exceeds --classes");
    if (o.rare_classes > 0 && (o.rare_count < 1 || o.rare_count > o.per_class)) {
        throw UsageError("--rare-count must be in [1, --per-class]");
    }
    Dataset data = generate_synthetic(o.classes, o.per_class, o.side, o.seed);
    if (o.rare_classes > 0) {
        const std::size_t first_rare = o.classes - o.rare_classes;
        std::vector<Sample> kept;
        std::vector<std::size_t> seen(o.classes, 0);
        for (auto& s : data.samples) {
            if (s.class_id < first_rare || seen[s.class_id] < o.rare_count) {
                ++seen[s.class_id];
                kept.push_back(std::move(s));
            }
        }
        data.samples = std::move(kept);
    }
    write_dataset_dir(data, o.out);
    err << "wrote " << data.samples.size() << " images in " << data.class_names.size() << " classes to " << o.out
        << "\n";
}

void cmd_split(SplitOptions o, std::ostream& out, std::ostream& err) {
    o.spec.validate();
    Dataset data = load_dataset_dir(o.data);
    // Manifest paths are relative to the manifest's own directory.
    const fs::path out_dir = o.out.empty() || o.out == "-" ? fs::current_path() : fs::absolute(o.out).parent_path();
    const fs::path root = fs::absolute(o.data);
    for (auto& s : data.samples) s.source_path = (root / s.source_path).lexically_relative(out_dir).generic_string();
    const Splits splits = make_splits(data, o.spec);
    emit(o.out, format_manifest(data, splits), out);
    err << "seen classes: " << splits.seen_names.size() << ", unseen classes: " << splits.unseen_names.size() << "\n";
}

void cmd_train(TrainOptions o, std::ostream& err) {
    o.config.margin = MarginSchedule::parse(o.margins);
    o.config.negatives = parse_negative_sampling(o.negatives);
    o.config.validate();
    const NetworkSpec spec = default_network(o.side, o.dim);
    spec.shapes();

    const LoadedManifest m = load_manifest(o.manifest);
    const Matrix inputs = prepare_inputs(m.data, o.side, o.pad);
    const TrainResult result = train(o.config, spec, inputs, m.splits, [&](const IterationRecord& r) {
        err << "iteration " << r.iteration << "/" << o.config.iterations << " loss " << format_fixed(r.mean_loss, 6)
            << " val_accuracy " << format_fixed(r.val_centroid_accuracy, 4) << "\n";
    });
    save_checkpoint(o.out, result.params);
    std::string history = o.history;
    if (history.empty()) history = fs::path(o.out).replace_extension(".history.tsv").string();
    write_text_file(history, format_history_tsv(result.history));
    err << "wrote " << o.out << " and " << history << "\n";
}

struct LabeledRows {
    std::vector<std::size_t> rows;
    std::vector<std::size_t> labels;
    std::vector<std::string> splits;
};

LabeledRows seen_rows(const Splits& splits, const std::string& which) {
    LabeledRows r;
    for (std::size_t c = 0; c < splits.seen_names.size(); ++c) {
        const std::array<std::pair<SplitName, const std::vector<std::size_t>*>, 3> lists = {
            {{SplitName::train, &splits.train[c]}, {SplitName::val, &splits.val[c]}, {SplitName::test, &splits.test[c]}}};
        for (const auto& [name, members] : lists) {
            if (which != "all" && which != to_string(name)) continue;
            for (std::size_t idx : *members) {
                r.rows.push_back(idx);
                r.labels.push_back(c);
                r.splits.emplace_back(to_string(name));
            }
        }
    }
    return r;
}

void cmd_embed(const EmbedOptions& o, std::ostream& out, std::ostream& err) {
    const NetworkParams params = load_checkpoint(o.model);
    const LoadedManifest m = load_manifest(o.manifest);
    const Matrix inputs = prepare_inputs(m.data, params.spec().input_side, o.pad);

    LabeledRows sel = seen_rows(m.splits, o.split);
    if (o.split == "all" || o.split == "unseen") {
        for (const auto& members : m.splits.unseen_test) {
            for (std::size_t idx : members) {
                sel.rows.push_back(idx);
                sel.splits.emplace_back(to_string(SplitName::unseen));
            }
        }
    }
    EmbeddingTable table;
    table.vectors = embed_rows(params, inputs, sel.rows);
    table.splits = std::move(sel.splits);
    for (std::size_t idx : sel.rows) {
        const Sample& s = m.data.samples[idx];
        table.class_names.push_back(m.data.class_names[s.class_id]);
        table.paths.push_back(s.source_path);
    }
    emit(o.out, format_embeddings_tsv(table), out);
    err << "embedded " << table.vectors.rows << " samples\n";
}

void cmd_evaluate(const EvalOptions& o, std::ostream& out, std::ostream& err) {
    const ClassifierMode mode = parse_classifier_mode(o.mode);
    const NetworkParams params = load_checkpoint(o.model);
    const LoadedManifest m = load_manifest(o.manifest);
    const Matrix inputs = prepare_inputs(m.data, params.spec().input_side, o.pad);
    const LabeledRows sel = seen_rows(m.splits, o.split);
    const Matrix emb = embed_rows(params, inputs, sel.rows);

    if (!o.sweep) {
        const auto result = half_split_evaluate(emb, sel.labels, m.splits.seen_names, mode, o.k, o.seed);
        emit(o.out, format_report_tsv(result.report), out);
        return;
    }
    std::vector<std::size_t> per_class(m.splits.seen_names.size(), 0);
    for (std::size_t label : sel.labels) ++per_class[label];
    std::size_t references = 0;
    for (std::size_t n : per_class) references += n / 2;
    std::string text = "#sweep\nk\taccuracy\tmacro_f1\n";
    for (std::size_t k : kSweepK) {
        if (k > references) {
            err << "warning: k=" << k << " exceeds the " << references << " reference samples; skipped\n";
            continue;
        }
        const auto result =
            half_split_evaluate(emb, sel.labels, m.splits.seen_names, ClassifierMode::knn, k, o.seed);
        text += std::to_string(k) + "\t" + format_double(result.report.accuracy) + "\t" +
                format_double(result.report.macro_f1) + "\n";
    }
    emit(o.out, text, out);
}

void cmd_evaluate_unseen(const EvalOptions& o, std::ostream& out, std::ostream& err) {
    const ClassifierMode mode = parse_classifier_mode(o.mode);
    const NetworkParams params = load_checkpoint(o.model);
    const LoadedManifest m = load_manifest(o.manifest);
    const Matrix inputs = prepare_inputs(m.data, params.spec().input_side, o.pad);
    const OpenSetRun run = evaluate_unseen(params, inputs, m.splits, mode, o.k, o.seed);
    for (const auto& c : run.classes) {
        if (!c.scored) err << "warning: unseen class '" << c.name << "' has " << c.samples << " samples; skipped\n";
    }
    emit(o.out, format_open_set_tsv(run), out);
}

void cmd_export_projector(const ProjectorOptions& o, std::ostream& err) {
    const EmbeddingTable table = parse_embeddings_tsv(read_text_file(o.embeddings));
    export_projector(table.vectors, table.class_names, o.out);
    err << "wrote " << table.vectors.rows << " vectors to " << o.out << "\n";
}

void add_config(CLI::App* cmd) {
    cmd->add_option("--config", "key=value file; keys are long flag names, flags override it");
}

// Splices `--config FILE` entries into the argument list as `--key=value`
// items placed right after the subcommand, so explicit flags parse later
// and win under the take-last policy.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    if (args.empty()) return args;
    std::vector<std::string> expanded{args.front()};
    std::vector<std::string> rest;
    for (std::size_t i = 1; i < args.size(); ++i) {
        std::string file;
        if (args[i] == "--config" && i + 1 < args.size()) {
            file = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            file = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
            continue;
        }
        std::istringstream in(read_text_file(file));
        for (const CLI::ConfigItem& item : CLI::ConfigINI().from_config(in)) {
            if (!item.parents.empty()) throw CLI::ConfigError("config sections are not supported: " + item.fullname());
            if (item.inputs.empty()) throw CLI::ConfigError("config key '" + item.name + "' has no value");
            // The INI reader splits on commas; every option here takes one value.
            std::string value = item.inputs.front();
            for (std::size_t v = 1; v < item.inputs.size(); ++v) value += "," + item.inputs[v];
            expanded.push_back("--" + item.name + "=" + value);
        }
    }
    expanded.insert(expanded.end(), rest.begin(), rest.end());
    return expanded;
}

void add_eval_flags(CLI::App* cmd, EvalOptions& o) {
    cmd->add_option("--model", o.model, "checkpoint from train")->required();
    cmd->add_option("--manifest", o.manifest, "split manifest")->required();
    cmd->add_option("--mode", o.mode, "classifier")->check(CLI::IsMember({"centroid", "knn"}))->capture_default_str();
    cmd->add_option("--k", o.k, "neighbors for knn")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--seed", o.seed, "half-split seed")->capture_default_str();
    cmd->add_option("--pad", o.pad, "background value for padding")->capture_default_str();
    cmd->add_option("--out", o.out, "report TSV (stdout when omitted)");
    add_config(cmd);
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Triplet-loss image embeddings: split, train, embed, evaluate.", "tembed"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    SynthOptions synth;
    auto* c_synth = app.add_subcommand("synth", "write a synthetic shape dataset as a PGM directory tree");
    c_synth->add_option("--classes", synth.classes, "number of classes")->capture_default_str();
    c_synth->add_option("--per-class", synth.per_class, "images per class")->capture_default_str();
    c_synth->add_option("--side", synth.side, "image side in pixels")->capture_default_str();
    c_synth->add_option("--seed", synth.seed, "random seed")->capture_default_str();
    c_synth->add_option("--rare-classes", synth.rare_classes, "trailing classes truncated to --rare-count images")
        ->capture_default_str();
    c_synth->add_option("--rare-count", synth.rare_count, "images kept per rare class")->capture_default_str();
    c_synth->add_option("--out", synth.out, "output directory")->required();
    add_config(c_synth);

    SplitOptions split;
    auto* c_split = app.add_subcommand("split", "partition a PGM directory tree into train/val/test/unseen");
    c_split->add_option("--data", split.data, "dataset root (one directory per class)")->required();
    c_split->add_option("--val", split.spec.per_class_val, "validation images per seen class")->capture_default_str();
    c_split->add_option("--test", split.spec.per_class_test, "test images per class")->capture_default_str();
    c_split->add_option("--min-abundance", split.spec.min_abundance, "smallest class used for training")
        ->capture_default_str();
    c_split->add_option("--seed", split.spec.seed, "shuffle seed")->capture_default_str();
    c_split->add_option("--out", split.out, "manifest TSV (stdout when omitted)");
    add_config(c_split);

    TrainOptions tr;
    auto* c_train = app.add_subcommand("train", "train the embedding network with the triplet loss");
    c_train->add_option("--manifest", tr.manifest, "split manifest")->required();
    c_train->add_option("--out", tr.out, "checkpoint path")->required();
    c_train->add_option("--history", tr.history, "history TSV (default: checkpoint path with .history.tsv)");
    c_train->add_option("--size", tr.side, "input side S (299 in the original setup; 32 for desk runs)")
        ->capture_default_str();
    c_train->add_option("--dim", tr.dim, "embedding dimension D")->capture_default_str();
    c_train->add_option("--pad", tr.pad, "background value for padding")->capture_default_str();
    c_train->add_option("--batch", tr.config.batch_size, "triplets per batch")->capture_default_str();
    c_train->add_option("--batches-per-iteration", tr.config.batches_per_iteration, "batches per iteration")
        ->capture_default_str();
    c_train->add_option("--iterations", tr.config.iterations, "iterations")->capture_default_str();
    c_train->add_option("--lr", tr.config.learning_rate, "initial learning rate")->capture_default_str();
    c_train->add_option("--decay", tr.config.decay, "learning-rate decay per iteration")->capture_default_str();
    c_train->add_option("--momentum", tr.config.momentum, "SGD momentum")->capture_default_str();
    c_train->add_option("--margins", tr.margins, "margin schedule iteration:alpha,...")->capture_default_str();
    c_train->add_option("--negatives", tr.negatives, "negative sampling")
        ->check(CLI::IsMember({"sample", "class"}))
        ->capture_default_str();
    c_train->add_option("--val-cap", tr.config.val_cap, "validation images per class for diagnostics")
        ->capture_default_str();
    c_train->add_option("--seed", tr.config.seed, "initialization and sampling seed")->capture_default_str();
    add_config(c_train);

    EmbedOptions em;
    auto* c_embed = app.add_subcommand("embed", "embed manifest samples with a trained checkpoint");
    c_embed->add_option("--model", em.model, "checkpoint from train")->required();
    c_embed->add_option("--manifest", em.manifest, "split manifest")->required();
    c_embed->add_option("--split", em.split, "samples to embed")
        ->check(CLI::IsMember({"all", "train", "val", "test", "unseen"}))
        ->capture_default_str();
    c_embed->add_option("--pad", em.pad, "background value for padding")->capture_default_str();
    c_embed->add_option("--out", em.out, "embeddings TSV (stdout when omitted)");
    add_config(c_embed);

    EvalOptions ev;
    auto* c_eval = app.add_subcommand("evaluate", "half-split classification of seen classes");
    add_eval_flags(c_eval, ev);
    c_eval->add_option("--split", ev.split, "seen-class split to evaluate")
        ->check(CLI::IsMember({"train", "val", "test"}))
        ->capture_default_str();
    c_eval->add_flag("--sweep", ev.sweep, "report knn accuracy and macro-F1 for k in 1,3,5,10,20");

    EvalOptions eu;
    auto* c_unseen = app.add_subcommand("evaluate-unseen", "half-split classification of unseen classes");
    eu.mode = "knn";
    add_eval_flags(c_unseen, eu);

    ProjectorOptions pr;
    auto* c_proj = app.add_subcommand("export-projector", "write vectors.tsv and metadata.tsv");
    c_proj->add_option("--embeddings", pr.embeddings, "embeddings TSV from embed")->required();
    c_proj->add_option("--out", pr.out, "output directory")->required();
    add_config(c_proj);

    try {
        const std::vector<std::string> expanded = expand_config(args);
        std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
            app.exit(e, out, err);
            return 0;
        }
        app.exit(e, out, err);
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    }

    try {
        if (c_synth->parsed()) cmd_synth(synth, err);
        if (c_split->parsed()) cmd_split(split, out, err);
        if (c_train->parsed()) cmd_train(tr, err);
        if (c_embed->parsed()) cmd_embed(em, out, err);
        if (c_eval->parsed()) cmd_evaluate(ev, out, err);
        if (c_unseen->parsed()) cmd_evaluate_unseen(eu, out, err);
        if (c_proj->parsed()) cmd_export_projector(pr, err);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return 0;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

} // namespace tembed::cli
