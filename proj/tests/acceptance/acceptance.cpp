// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "tembed/ball_tree.hpp"
#include "tembed/classify.hpp"
#include "tembed/cli.hpp"
#include "tembed/metrics.hpp"
#include "tembed/network.hpp"
#include "tembed/openset.hpp"
#include "tembed/projector.hpp"
#include "tembed/rng.hpp"
#include "tembed/train.hpp"
#include "tembed/triplet.hpp"
#include "tembed/tsv.hpp"

using namespace tembed;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double n = 0.0;
    for (double& x : v) {
        x = rng.normal();
        n += x * x;
    }
    n = std::sqrt(n);
    for (double& x : v) x /= n;
    return v;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// Test-split rows of every seen class, labelled by seen-class position.
void test_rows(const Splits& s, std::vector<std::size_t>& rows, std::vector<std::size_t>& labels) {
    for (std::size_t k = 0; k < s.test.size(); ++k) {
        for (std::size_t i : s.test[k]) {
            rows.push_back(i);
            labels.push_back(k);
        }
    }
}

TrainConfig desk_schedule() {
    TrainConfig c;
    c.batch_size = 20;
    c.iterations = 40;
    c.learning_rate = 0.01;
    c.decay = 0.9;
    c.margin = MarginSchedule({{0, 1.0}, {20, 1.3}, {30, 1.5}});
    c.momentum = 0.9;
    c.seed = 1;
    return c;
}

Outcome gradient_correctness() {
    constexpr double kEps = 1e-5;
    // Same layers and parameter count as the S=32 network; the small input keeps
    // ReLU kinks within eps rare and the run inside its budget.
    const NetworkSpec spec = default_network(8, 16);
    const std::size_t pixels = spec.input_side * spec.input_side;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        NetworkParams params = init_params(spec, seed);
        Rng rng(1000 + seed);
        for (std::size_t l = 0; l < spec.layers.size(); ++l) {
            for (double& b : params.bias(l)) b = rng.uniform(-0.1, 0.1);
        }
        std::array<std::vector<double>, 3> x;
        for (auto& v : x) {
            v.resize(pixels);
            for (double& p : v) p = rng.uniform();
        }
        std::array<ForwardCache, 3> caches;
        const auto ea = forward(params, x[0], caches[0]);
        const auto ep = forward(params, x[1], caches[1]);
        const auto en = forward(params, x[2], caches[2]);
        // Margin puts the loss at 0.5: active, and small enough that rounding stays below the tiniest gradients.
        const double alpha = squared_distance(ea, en) - squared_distance(ea, ep) + 0.5;
        if (triplet_loss(ea, ep, en, alpha) <= 0.0) return {false, "inactive triplet at seed " + std::to_string(seed)};
        const TripletGrads g = triplet_grads(ea, ep, en, alpha);
        std::vector<double> grads(params.size(), 0.0);
        backward(params, caches[0], g.anchor, grads);
        backward(params, caches[1], g.positive, grads);
        backward(params, caches[2], g.negative, grads);

        NetworkParams probe = params;
        auto loss = [&](std::span<const double> values) {
            std::copy(values.begin(), values.end(), probe.values().begin());
            return triplet_loss(embed(probe, x[0]), embed(probe, x[1]), embed(probe, x[2]), alpha);
        };
        const auto r = gradient_check(params.values(), loss, grads, kEps);
        worst = std::max(worst, r.max_relative_error);
    }
    return {worst < 1e-3, "max rel err " + fmt(worst) + " over 20 seeds, " + std::to_string(init_params(spec, 1).size()) +
                              " params"};
}

Outcome ball_tree_exactness() {
    std::size_t mismatches = 0;
    std::size_t queries = 0;
    for (std::size_t dim : {16u, 128u}) {
        Rng rng(dim);
        Matrix pts(1000, dim);
        for (std::size_t i = 0; i < pts.rows; ++i) {
            const auto v = random_unit(rng, dim);
            std::copy(v.begin(), v.end(), pts.row(i).begin());
        }
        const BallTree tree(pts);
        for (int q = 0; q < 100; ++q) {
            const auto query = random_unit(rng, dim);
            for (std::size_t k : {1u, 5u, 10u}) {
                ++queries;
                if (tree.query(query, k) != brute_force(pts, query, k)) ++mismatches;
            }
        }
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches in " + std::to_string(queries) + " queries"};
}

Outcome triplet_algebra() {
    Rng rng(7);
    std::size_t violations = 0;
    double worst_fd = 0.0;
    double worst_identity = 0.0;
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t dim = 2 + rng.index(30);
        const auto a = random_unit(rng, dim);
        const auto p = random_unit(rng, dim);
        const auto n = random_unit(rng, dim);
        const double alpha = rng.uniform(0.0, 2.0);
        const double dap = squared_distance(a, p);
        const double dan = squared_distance(a, n);
        const double l = triplet_loss(a, p, n, alpha);
        if (l < 0.0) ++violations;
        const bool active = dap - dan + alpha > 0.0;
        if (active != (l > 0.0)) ++violations;
        const TripletGrads g = triplet_grads(a, p, n, alpha);
        if (!active) {
            for (const auto* v : {&g.anchor, &g.positive, &g.negative}) {
                if (std::any_of(v->begin(), v->end(), [](double x) { return x != 0.0; })) ++violations;
            }
        } else if (dap - dan + alpha > 1e-3) {
            // Away from the hinge the loss is quadratic, so central differences are exact up to rounding.
            const double eps = 1e-4;
            std::array<std::vector<double>, 3> args{a, p, n};
            const std::array<const std::vector<double>*, 3> analytic{&g.anchor, &g.positive, &g.negative};
            for (std::size_t which = 0; which < 3; ++which) {
                for (std::size_t i = 0; i < dim; ++i) {
                    const double saved = args[which][i];
                    args[which][i] = saved + eps;
                    const double up = triplet_loss(args[0], args[1], args[2], alpha);
                    args[which][i] = saved - eps;
                    const double down = triplet_loss(args[0], args[1], args[2], alpha);
                    args[which][i] = saved;
                    const double numeric = (up - down) / (2 * eps);
                    const double exact = (*analytic[which])[i];
                    const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-6});
                    worst_fd = std::max(worst_fd, std::abs(exact - numeric) / denom);
                }
            }
        }
        double dot = 0.0;
        for (std::size_t i = 0; i < dim; ++i) dot += a[i] * p[i];
        worst_identity = std::max(worst_identity, std::abs(dap - (2.0 - 2.0 * dot)));
    }
    const bool ok = violations == 0 && worst_fd < 1e-6 && worst_identity <= 1e-9;
    return {ok, std::to_string(violations) + " property violations, fd rel err " + fmt(worst_fd) + ", identity err " +
                    fmt(worst_identity)};
}

Outcome end_to_end() {
    const Dataset data = generate_synthetic(8, 200, 32, 1);
    const Splits splits = make_splits(data, {32, 50, 50, 100, 1});
    const Matrix inputs = prepare_inputs(data, 32);
    const TrainResult r = train(desk_schedule(), default_network(32, 16), inputs, splits);

    std::vector<std::size_t> rows;
    std::vector<std::size_t> labels;
    test_rows(splits, rows, labels);
    const Matrix emb = embed_rows(r.params, inputs, rows);
    const HalfSplitResult eval =
        half_split_evaluate(emb, labels, splits.seen_names, ClassifierMode::centroid, 10, 1);

    const auto& first = r.history.records.front().radius;
    const auto& last = r.history.records.back().radius;
    std::size_t shrunk = 0;
    for (std::size_t k = 0; k < first.size(); ++k) shrunk += last[k] < first[k];
    const double fraction = static_cast<double>(shrunk) / static_cast<double>(first.size());
    const bool ok = r.history.records.size() == 40 && eval.report.macro_f1 >= 0.90 && fraction >= 0.75;
    return {ok, "test macro-F1 " + fmt(eval.report.macro_f1) + ", radius shrank for " + std::to_string(shrunk) + "/" +
                    std::to_string(first.size()) + " classes"};
}

Outcome open_set() {
    Dataset data = generate_synthetic(10, 200, 32, 2);
    // Classes 6..9 fall below the abundance threshold and are never trained on.
    std::vector<std::size_t> kept_per_class(10, 0);
    std::vector<Sample> kept;
    for (auto& s : data.samples) {
        if (s.class_id >= 6 && kept_per_class[s.class_id] >= 80) continue;
        ++kept_per_class[s.class_id];
        kept.push_back(std::move(s));
    }
    data.samples = std::move(kept);
    const Splits splits = make_splits(data, {32, 50, 50, 150, 2});
    if (splits.seen_names.size() != 6 || splits.unseen_names.size() != 4) return {false, "unexpected seen/unseen split"};
    const Matrix inputs = prepare_inputs(data, 32);
    TrainConfig config = desk_schedule();
    config.seed = 2;
    const TrainResult r = train(config, default_network(32, 16), inputs, splits);
    const OpenSetRun run = evaluate_unseen(r.params, inputs, splits, ClassifierMode::knn, 10, 2);
    const double chance = 1.0 / static_cast<double>(run.scored_names.size());
    return {run.scored_names.size() == 4 && run.evaluation.report.macro_f1 >= 0.50,
            "unseen macro-F1 " + fmt(run.evaluation.report.macro_f1) + " vs chance " + fmt(chance)};
}

Outcome protocol_fidelity() {
    Rng rng(11);
    const std::size_t classes = 4;
    Matrix pts(classes * 100, 8);
    std::vector<std::size_t> labels;
    for (std::size_t k = 0; k < classes; ++k) {
        for (std::size_t i = 0; i < 100; ++i) {
            auto row = pts.row(k * 100 + i);
            for (std::size_t j = 0; j < row.size(); ++j) row[j] = (j == k ? 1.0 : 0.0) + 0.6 * rng.normal();
            labels.push_back(k);
        }
    }
    const std::vector<std::string> names{"a", "b", "c", "d"};
    std::vector<std::string> problems;
    for (auto mode : {ClassifierMode::centroid, ClassifierMode::knn}) {
        const HalfSplitResult r = half_split_evaluate(pts, labels, names, mode, 10, 3);
        for (std::size_t k = 0; k < classes; ++k) {
            const auto in_ref =
                std::count_if(r.reference.begin(), r.reference.end(), [&](std::size_t i) { return labels[i] == k; });
            if (in_ref != 50 || r.report.confusion.row_sum(k) != 50) problems.push_back("partition not 50/50");
        }
        if (r.report.confoundings.empty()) problems.push_back("no confoundings");
        for (const auto& c : r.report.confoundings) {
            const double scaled = c.rate * 50.0;
            if (std::abs(scaled - std::round(scaled)) > 1e-9) problems.push_back("rate off the 1/50 grid");
        }
        const auto sections = parse_tsv_sections(format_report_tsv(r.report));
        const auto it = sections.find("confoundings");
        if (it == sections.end() || it->second.empty() ||
            it->second.front() != std::vector<std::string>{"true", "predicted", "rate"}) {
            problems.push_back("confounding table layout");
        } else if (it->second.size() != r.report.confoundings.size() + 1) {
            problems.push_back("confounding row count");
        }
    }
    return {problems.empty(), problems.empty() ? "50/50 partitions, rates on the 1/50 grid" : problems.front()};
}

int cli_call(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    return cli::run(args, out, err);
}

// Concatenated bytes of every regular file below dir, keyed by relative path.
std::string tree_bytes(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) all += fs::relative(f, dir).string() + "\n" + read_text_file(f);
    return all;
}

Outcome determinism() {
    std::vector<std::string> runs;
    for (int rep = 0; rep < 2; ++rep) {
        const fs::path dir = fs::temp_directory_path() / ("tembed_acceptance_det" + std::to_string(rep));
        fs::remove_all(dir);
        fs::create_directories(dir);
        const std::string d = dir.string();
        const std::vector<std::vector<std::string>> steps{
            {"synth", "--classes", "5", "--per-class", "30", "--side", "16", "--rare-classes", "1", "--rare-count", "8",
             "--out", d + "/data"},
            {"split", "--data", d + "/data", "--val", "5", "--test", "10", "--min-abundance", "20", "--out",
             d + "/manifest.tsv"},
            {"train", "--manifest", d + "/manifest.tsv", "--size", "16", "--dim", "8", "--iterations", "3",
             "--batches-per-iteration", "5", "--momentum", "0.9", "--out", d + "/model.bin"},
            {"embed", "--model", d + "/model.bin", "--manifest", d + "/manifest.tsv", "--out", d + "/emb.tsv"},
            {"evaluate", "--model", d + "/model.bin", "--manifest", d + "/manifest.tsv", "--out", d + "/eval.tsv"},
            {"evaluate", "--model", d + "/model.bin", "--manifest", d + "/manifest.tsv", "--mode", "knn", "--k", "3",
             "--sweep", "--out", d + "/sweep.tsv"},
            {"evaluate-unseen", "--model", d + "/model.bin", "--manifest", d + "/manifest.tsv", "--k", "3", "--out",
             d + "/unseen.tsv"},
            {"export-projector", "--embeddings", d + "/emb.tsv", "--out", d + "/projector"},
        };
        for (const auto& step : steps) {
            if (cli_call(step) != 0) return {false, "'" + step.front() + "' failed"};
        }
        runs.push_back(tree_bytes(dir));
        fs::remove_all(dir);
    }
    return {runs[0] == runs[1], runs[0] == runs[1] ? "8 commands, " + std::to_string(runs[0].size()) + " bytes identical"
                                                   : "outputs differ between reruns"};
}

Outcome projector_round_trip() {
    const fs::path dir = fs::temp_directory_path() / "tembed_acceptance_projector";
    fs::remove_all(dir);
    Rng rng(13);
    const std::size_t n = 500;
    const std::size_t dim = 16;
    Matrix m(n, dim);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = random_unit(rng, dim);
        std::copy(v.begin(), v.end(), m.row(i).begin());
        labels.push_back("class_" + std::to_string(i % 7));
    }
    export_projector(m, labels, dir);
    const std::string vectors = read_text_file(dir / "vectors.tsv");
    const std::string metadata = read_text_file(dir / "metadata.tsv");
    const auto vector_lines = split_lines(vectors);
    const auto metadata_lines = split_lines(metadata);
    bool well_formed = vector_lines.size() == n && metadata_lines.size() == n;
    for (const auto& line : vector_lines) {
        const auto fields = split_tabs(line);
        if (fields.size() != dim) well_formed = false;
        for (const auto& f : fields) {
            std::size_t used = 0;
            try {
                std::stod(std::string(f), &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != f.size()) well_formed = false;
        }
    }
    const Matrix back = parse_vectors_tsv(vectors);
    double worst = 0.0;
    if (back.rows == n && back.cols == dim) {
        for (std::size_t i = 0; i < m.data.size(); ++i) worst = std::max(worst, std::abs(back.data[i] - m.data[i]));
    } else {
        well_formed = false;
    }
    fs::remove_all(dir);
    return {well_formed && worst <= 1e-9,
            std::to_string(vector_lines.size()) + "/" + std::to_string(metadata_lines.size()) +
                " lines, max abs err " + fmt(worst)};
}

struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double budget_seconds; // CPU seconds, 0 means unbounded
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {"gradient-correctness", gradient_correctness, 120},
        {"ball-tree-exactness", ball_tree_exactness, 0},
        {"triplet-algebra", triplet_algebra, 0},
        {"end-to-end-desk-training", end_to_end, 900},
        {"open-set", open_set, 1200},
        {"protocol-fidelity", protocol_fidelity, 0},
        {"determinism", determinism, 0},
        {"projector-round-trip", projector_round_trip, 0},
    };
    // Optional arguments select criteria by name.
    const std::vector<std::string> only(argv + 1, argv + argc);
    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        const std::clock_t cpu_start = std::clock();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const double cpu = static_cast<double>(std::clock() - cpu_start) / CLOCKS_PER_SEC;
        if (c.budget_seconds > 0 && cpu > c.budget_seconds) {
            o.pass = false;
            o.detail += ", over the " + fmt(c.budget_seconds) + " s CPU budget";
        }
        std::printf("%s %s (%.1f s cpu, %.1f s wall): %s\n", o.pass ? "PASS" : "FAIL", c.name, cpu, seconds,
                    o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}
