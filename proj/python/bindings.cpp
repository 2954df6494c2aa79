#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "tembed/ball_tree.hpp"
#include "tembed/checkpoint.hpp"
#include "tembed/classify.hpp"
#include "tembed/cli.hpp"
#include "tembed/dataset.hpp"
#include "tembed/error.hpp"
#include "tembed/metrics.hpp"
#include "tembed/network.hpp"
#include "tembed/openset.hpp"
#include "tembed/projector.hpp"
#include "tembed/train.hpp"
#include "tembed/triplet.hpp"

namespace py = pybind11;
using namespace tembed;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
    const auto r = static_cast<std::size_t>(a.shape(0));
    const auto c = static_cast<std::size_t>(a.shape(1));
    return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

std::vector<double> to_vector(const Array& a) {
    if (a.ndim() != 1) throw std::invalid_argument("expected a 1-d array");
    return {a.data(), a.data() + a.size()};
}

Array to_array(const Matrix& m) {
    Array out({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

Array to_array(const std::vector<double>& v) {
    Array out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::dict report_dict(const EvalReport& r) {
    const ConfusionMatrix& cm = r.confusion;
    py::array_t<std::uint64_t> confusion({cm.classes(), cm.classes()});
    auto view = confusion.mutable_unchecked<2>();
    for (std::size_t t = 0; t < cm.classes(); ++t) {
        for (std::size_t p = 0; p < cm.classes(); ++p) view(t, p) = cm.at(t, p);
    }
    py::list confoundings;
    for (const auto& c : r.confoundings) {
        confoundings.append(py::make_tuple(cm.class_names()[c.true_class], cm.class_names()[c.predicted_class], c.rate));
    }
    py::dict d;
    d["class_names"] = cm.class_names();
    d["confusion"] = confusion;
    d["precision"] = r.precision;
    d["recall"] = r.recall;
    d["f1"] = r.f1;
    d["macro_f1"] = r.macro_f1;
    d["accuracy"] = r.accuracy;
    d["confoundings"] = confoundings;
    return d;
}

py::dict half_split_dict(const HalfSplitResult& r) {
    py::dict d = report_dict(r.report);
    d["reference"] = r.reference;
    d["evaluation"] = r.evaluation;
    return d;
}

ClassifierMode mode_of(const std::string& s) { return parse_classifier_mode(s); }

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Triplet-loss image embeddings: data, training, nearest-neighbor evaluation";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<NumericFault>(m, "NumericFault", PyExc_ArithmeticError);
    py::register_exception<StructuralError>(m, "StructuralError", PyExc_ValueError);
    py::register_exception<DatasetError>(m, "DatasetError", PyExc_RuntimeError);
    py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    // Data
    py::class_<Dataset>(m, "Dataset")
        .def_readonly("class_names", &Dataset::class_names)
        .def("__len__", [](const Dataset& d) { return d.samples.size(); })
        .def_property_readonly("labels",
                               [](const Dataset& d) {
                                   std::vector<std::size_t> out;
                                   for (const auto& s : d.samples) out.push_back(s.class_id);
                                   return out;
                               })
        .def_property_readonly("paths",
                               [](const Dataset& d) {
                                   std::vector<std::string> out;
                                   for (const auto& s : d.samples) out.push_back(s.source_path);
                                   return out;
                               })
        .def(
            "image",
            [](const Dataset& d, std::size_t i) {
                const Image& img = d.samples.at(i).image;
                Array out({img.height, img.width});
                std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
                return out;
            },
            py::arg("index"), "Grayscale pixels in [0, 1], shape (height, width).")
        .def(
            "inputs", [](const Dataset& d, std::size_t side, double pad) { return to_array(prepare_inputs(d, side, pad)); },
            py::arg("side"), py::arg("pad") = kDefaultPadValue,
            "Standardized network inputs, one flattened side x side row per sample.")
        .def("write", &write_dataset_dir, py::arg("root"));

    m.def("generate_synthetic", &generate_synthetic, py::arg("n_classes"), py::arg("per_class"), py::arg("side"),
          py::arg("seed") = 1);
    m.def("load_dataset_dir", &load_dataset_dir, py::arg("root"));

    py::class_<Splits>(m, "Splits")
        .def_readonly("seen_names", &Splits::seen_names)
        .def_readonly("unseen_names", &Splits::unseen_names)
        .def_readonly("train", &Splits::train)
        .def_readonly("val", &Splits::val)
        .def_readonly("test", &Splits::test)
        .def_readonly("unseen_test", &Splits::unseen_test);

    m.def(
        "make_splits",
        [](const Dataset& d, std::size_t val, std::size_t test, std::size_t min_abundance, std::uint64_t seed) {
            SplitSpec spec;
            spec.per_class_val = val;
            spec.per_class_test = test;
            spec.min_abundance = min_abundance;
            spec.seed = seed;
            return make_splits(d, spec);
        },
        py::arg("dataset"), py::arg("val") = 100, py::arg("test") = 100, py::arg("min_abundance") = 500,
        py::arg("seed") = 1);
    m.def(
        "load_manifest",
        [](const std::filesystem::path& p) {
            LoadedManifest lm = load_manifest(p);
            return py::make_tuple(std::move(lm.data), std::move(lm.splits));
        },
        py::arg("path"), "Returns (dataset, splits).");

    // Network
    py::class_<NetworkParams>(m, "Network")
        .def(py::init([](std::size_t side, std::size_t dim, std::uint64_t seed) {
                 return init_params(default_network(side, dim), seed);
             }),
             py::arg("side") = 32, py::arg("dim") = 128, py::arg("seed") = 1)
        .def_property_readonly("input_side", [](const NetworkParams& p) { return p.spec().input_side; })
        .def_property_readonly("embedding_dim", [](const NetworkParams& p) { return p.spec().embedding_dim(); })
        .def("__len__", &NetworkParams::size)
        .def("checksum", &NetworkParams::checksum)
        .def(
            "embed", [](const NetworkParams& p, const Array& inputs) { return to_array(embed_rows(p, to_matrix(inputs))); },
            py::arg("inputs"), "Unit-length embeddings for each flattened input row.")
        .def("save", [](const NetworkParams& p, const std::filesystem::path& path) { save_checkpoint(path, p); },
             py::arg("path"))
        .def_static("load", &load_checkpoint, py::arg("path"))
        .def("__eq__", [](const NetworkParams& a, const NetworkParams& b) { return a == b; });

    m.def(
        "train",
        [](const Array& inputs, const Splits& splits, std::size_t dim, std::size_t iterations,
           std::size_t batches_per_iteration, std::size_t batch_size, double learning_rate, double decay,
           double momentum, const std::string& margins, std::uint64_t seed, const IterationCallback& callback) {
            const Matrix x = to_matrix(inputs);
            const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(x.cols))));
            if (side * side != x.cols) throw std::invalid_argument("input rows must be square images");
            TrainConfig c;
            c.iterations = iterations;
            c.batches_per_iteration = batches_per_iteration;
            c.batch_size = batch_size;
            c.learning_rate = learning_rate;
            c.decay = decay;
            c.momentum = momentum;
            c.margin = MarginSchedule::parse(margins);
            c.seed = seed;
            TrainResult r;
            {
                py::gil_scoped_release release;
                IterationCallback wrapped;
                if (callback) {
                    wrapped = [&](const IterationRecord& rec) {
                        py::gil_scoped_acquire acquire;
                        callback(rec);
                    };
                }
                r = train(c, default_network(side, dim), x, splits, wrapped);
            }
            return py::make_tuple(std::move(r.params), std::move(r.history.records));
        },
        py::arg("inputs"), py::arg("splits"), py::arg("dim") = 128, py::arg("iterations") = 40,
        py::arg("batches_per_iteration") = 100, py::arg("batch_size") = 20, py::arg("learning_rate") = 0.01,
        py::arg("decay") = 0.9, py::arg("momentum") = 0.0, py::arg("margins") = "0:1.0,20:1.3,30:1.5",
        py::arg("seed") = 1, py::arg("on_iteration") = IterationCallback{},
        "Trains a network on the training split. Returns (network, history).");

    py::class_<IterationRecord>(m, "IterationRecord")
        .def_readonly("iteration", &IterationRecord::iteration)
        .def_readonly("mean_loss", &IterationRecord::mean_loss)
        .def_readonly("val_centroid_accuracy", &IterationRecord::val_centroid_accuracy)
        .def_readonly("radius", &IterationRecord::radius)
        .def_readonly("drift", &IterationRecord::drift);

    // Triplet loss
    m.def(
        "triplet_loss",
        [](const Array& a, const Array& p, const Array& n, double alpha) {
            return triplet_loss(to_vector(a), to_vector(p), to_vector(n), alpha);
        },
        py::arg("a"), py::arg("p"), py::arg("n"), py::arg("alpha"));
    m.def(
        "triplet_grads",
        [](const Array& a, const Array& p, const Array& n, double alpha) {
            const TripletGrads g = triplet_grads(to_vector(a), to_vector(p), to_vector(n), alpha);
            return py::make_tuple(to_array(g.anchor), to_array(g.positive), to_array(g.negative));
        },
        py::arg("a"), py::arg("p"), py::arg("n"), py::arg("alpha"));
    m.def("margin_at", [](const std::string& schedule, std::size_t it) {
        return margin_at(MarginSchedule::parse(schedule), it);
    }, py::arg("schedule"), py::arg("iteration"));

    // Search and classification
    py::class_<BallTree>(m, "BallTree")
        .def(py::init([](const Array& points, std::size_t leaf_size) { return BallTree(to_matrix(points), leaf_size); }),
             py::arg("points"), py::arg("leaf_size") = BallTree::kDefaultLeafSize)
        .def(
            "query",
            [](const BallTree& t, const Array& q, std::size_t k) {
                const NeighborList nn = t.query(to_vector(q), k);
                std::vector<std::size_t> idx;
                std::vector<double> dist;
                for (const auto& n : nn) {
                    idx.push_back(n.index);
                    dist.push_back(n.distance);
                }
                return py::make_tuple(idx, dist);
            },
            py::arg("query"), py::arg("k"), "Returns (indices, distances), nearest first.")
        .def("__len__", &BallTree::size);
    m.def(
        "brute_force",
        [](const Array& points, const Array& q, std::size_t k) {
            std::vector<std::size_t> idx;
            std::vector<double> dist;
            for (const auto& n : brute_force(to_matrix(points), to_vector(q), k)) {
                idx.push_back(n.index);
                dist.push_back(n.distance);
            }
            return py::make_tuple(idx, dist);
        },
        py::arg("points"), py::arg("query"), py::arg("k"));

    m.def(
        "half_split_evaluate",
        [](const Array& embeddings, const std::vector<std::size_t>& labels, const std::vector<std::string>& names,
           const std::string& mode, std::size_t k, std::uint64_t seed) {
            return half_split_dict(half_split_evaluate(to_matrix(embeddings), labels, names, mode_of(mode), k, seed));
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("class_names"), py::arg("mode") = "centroid",
        py::arg("k") = 10, py::arg("seed") = 1);
    m.def(
        "evaluate_unseen",
        [](const NetworkParams& params, const Array& inputs, const Splits& splits, const std::string& mode,
           std::size_t k, std::uint64_t seed) {
            const OpenSetRun run = evaluate_unseen(params, to_matrix(inputs), splits, mode_of(mode), k, seed);
            py::dict d = half_split_dict(run.evaluation);
            py::list skipped;
            for (const auto& c : run.classes) {
                if (!c.scored) skipped.append(c.name);
            }
            d["skipped"] = skipped;
            d["embeddings"] = to_array(run.embeddings);
            d["labels"] = run.labels;
            return d;
        },
        py::arg("network"), py::arg("inputs"), py::arg("splits"), py::arg("mode") = "knn", py::arg("k") = 10,
        py::arg("seed") = 1);
    m.def(
        "cluster_radius",
        [](const Array& embeddings, const std::vector<std::size_t>& labels, std::size_t n_classes) {
            return cluster_radius(to_matrix(embeddings), labels, n_classes);
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("n_classes"));

    m.def(
        "export_projector",
        [](const Array& vectors, const std::vector<std::string>& labels, const std::filesystem::path& out) {
            export_projector(to_matrix(vectors), labels, out);
        },
        py::arg("vectors"), py::arg("labels"), py::arg("out_dir"));

    m.def(
        "cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out;
            std::ostringstream err;
            int status = 0;
            {
                py::gil_scoped_release release;
                status = cli::run(args, out, err);
            }
            return py::make_tuple(status, out.str(), err.str());
        },
        py::arg("args"), "Runs the command-line tool in-process. Returns (status, stdout, stderr).");
}
