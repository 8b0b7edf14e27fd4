#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "isogplvm/baselines.hpp"
#include "isogplvm/dissimilarity.hpp"
#include "isogplvm/errors.hpp"
#include "isogplvm/geometry.hpp"
#include "isogplvm/graph.hpp"
#include "isogplvm/model.hpp"
#include "isogplvm/nakagami.hpp"
#include "isogplvm/report.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace isogplvm;

namespace {

// Matrices cross the boundary as plain arrays; symmetry etc. is checked here.
DissimilarityMatrix as_dissimilarity(const MatrixXd& d) { return DissimilarityMatrix(d); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Isometric GP latent variable models for dissimilarity data";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  // ---- datasets and distances
  m.def("gen_swiss_roll", [](int n, double noise, std::uint64_t seed) {
    auto sr = gen_swiss_roll(n, noise, seed);
    return py::dict("points"_a = sr.data.points, "ground_truth"_a = sr.ground_truth, "t"_a = sr.t);
  }, py::arg("n"), py::arg("noise") = 0.0, py::arg("seed") = 0);
  m.def("gen_plane", [](int n, double width, double height, std::uint64_t seed) {
    auto pl = gen_plane(n, width, height, seed);
    return py::dict("points"_a = pl.data.points, "ground_truth"_a = pl.ground_truth);
  }, py::arg("n"), py::arg("width") = 2.0, py::arg("height") = 1.5, py::arg("seed") = 0);
  m.def("gen_two_clusters", [](int n_per_cluster, double separation, double sd, std::uint64_t seed) {
    auto ps = gen_two_clusters(n_per_cluster, separation, sd, seed);
    return py::make_tuple(ps.points, ps.labels);
  }, py::arg("n_per_cluster"), py::arg("separation") = 6.0, py::arg("sd") = 0.5, py::arg("seed") = 0,
     "Returns (points, labels).");
  m.def("gen_rotated_glyph", [](int n_frames, int size, std::uint64_t seed) {
    return gen_rotated_glyph(n_frames, size, seed).pixels;
  }, py::arg("n_frames"), py::arg("size") = 32, py::arg("seed") = 0,
     "Frames as rows of row-major size x size pixels.");

  m.def("euclidean_distances", [](const MatrixXd& x) {
    return euclidean_distances(PointSet{x, {}}).values();
  }, py::arg("points"));
  m.def("rotation_invariant_distances", [](const MatrixXd& pixels, int height, int width, int angles) {
    return rotation_invariant_distances(ImageStack{pixels, height, width, {}}, angles).values();
  }, py::arg("pixels"), py::arg("height"), py::arg("width"), py::arg("angles") = 36);
  m.def("lexicographic_distances", [](const MatrixXd& base, const std::vector<int>& labels, double eps,
                                      std::optional<double> r) {
    return lexicographic_distances(as_dissimilarity(base), labels, eps, r).values();
  }, py::arg("base"), py::arg("labels"), py::arg("eps") = 7.0, py::arg("r") = py::none());

  // ---- graph
  m.def("persistence", [](const MatrixXd& d) {
    std::vector<std::pair<double, int>> out;
    for (const auto& e : zero_dim_persistence(as_dissimilarity(d))) out.emplace_back(e.merge_eps, e.components_after);
    return out;
  }, py::arg("distances"), "Single-linkage merges as (eps, components_after).");
  m.def("suggest_eps", [](const MatrixXd& d, int target_components, double margin) {
    const auto dm = as_dissimilarity(d);
    return suggest_eps(zero_dim_persistence(dm), static_cast<int>(dm.size()), target_components, margin);
  }, py::arg("distances"), py::arg("target_components") = 1, py::arg("margin") = 1.0);
  m.def("graph_distances", [](const MatrixXd& d, double eps, int threads) {
    return all_pairs_shortest(build_eps_graph(as_dissimilarity(d), eps), threads);
  }, py::arg("distances"), py::arg("eps"), py::arg("threads") = 1);

  // ---- baselines
  m.def("classical_mds", [](const MatrixXd& d, int q) { return classical_mds(as_dissimilarity(d), q); },
        py::arg("distances"), py::arg("q") = 2);
  m.def("isomap", [](const MatrixXd& d, double eps, int q, int threads) {
    return isomap_initialization(as_dissimilarity(d), eps, q, threads);
  }, py::arg("distances"), py::arg("eps"), py::arg("q") = 2, py::arg("threads") = 1);
  m.def("stress", [](const MatrixXd& d, const MatrixXd& z) { return stress(as_dissimilarity(d), z); });

  // ---- Nakagami
  py::class_<NakagamiParams>(m, "NakagamiParams")
      .def(py::init([](double mm, double omega) { return NakagamiParams{mm, omega}; }),
           py::arg("m"), py::arg("omega"))
      .def_readwrite("m", &NakagamiParams::m)
      .def_readwrite("omega", &NakagamiParams::omega)
      .def("__repr__", [](const NakagamiParams& p) {
        return "NakagamiParams(m=" + std::to_string(p.m) + ", omega=" + std::to_string(p.omega) + ")";
      });
  m.def("nakagami_log_pdf", &log_pdf, py::arg("s"), py::arg("params"));
  m.def("nakagami_cdf", &cdf, py::arg("s"), py::arg("params"));
  m.def("nakagami_log_survival", &log_survival, py::arg("s"), py::arg("params"));
  m.def("nakagami_sample", &sample, py::arg("params"), py::arg("n"), py::arg("seed") = 0);
  m.def("nakagami_estimate", &estimate_params, py::arg("mean_sq"), py::arg("var_sq"));

  // ---- model
  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("latent_dim", &ModelConfig::latent_dim)
      .def_readwrite("eps", &ModelConfig::eps)
      .def_readwrite("curve_segments", &ModelConfig::curve_segments)
      .def_readwrite("mc_samples", &ModelConfig::mc_samples)
      .def_readwrite("inducing", &ModelConfig::inducing)
      .def_readwrite("ambient_dim", &ModelConfig::ambient_dim)
      .def_readwrite("learning_rate", &ModelConfig::learning_rate)
      .def_readwrite("epochs", &ModelConfig::epochs)
      .def_readwrite("block_length", &ModelConfig::block_length)
      .def_readwrite("seed", &ModelConfig::seed)
      .def_readwrite("pair_batch", &ModelConfig::pair_batch)
      .def_readwrite("init_variance", &ModelConfig::init_variance)
      .def_readwrite("init_lengthscale", &ModelConfig::init_lengthscale)
      .def_readwrite("init_cov_scale", &ModelConfig::init_cov_scale)
      .def_readwrite("jitter", &ModelConfig::jitter)
      .def_readwrite("threads", &ModelConfig::threads)
      .def("validate", &ModelConfig::validate)
      .def("to_json", &config_to_json)
      .def_static("from_json", &config_from_json);

  py::class_<FitReport>(m, "FitReport")
      .def_readonly("config", &FitReport::config)
      .def_readonly("elbo_trace", &FitReport::elbo_trace)
      .def_property_readonly("mu", [](const FitReport& r) { return r.latent.mu; })
      .def_property_readonly("log_var", [](const FitReport& r) { return r.latent.log_var; })
      .def_property_readonly("pairs", [](const FitReport& r) {
        py::list out;
        for (const auto& p : r.pairs)
          out.append(py::dict("i"_a = p.i, "j"_a = p.j, "observed"_a = p.observed, "neighbor"_a = p.neighbor,
                              "m"_a = p.params.m, "omega"_a = p.params.omega,
                              "mean_length"_a = p.mean_length, "survival"_a = p.survival));
        return out;
      }, "Per-pair statistics at the fitted latent means.")
      .def("to_json", &report_to_json)
      .def_static("from_json", &report_from_json);

  m.def("fit", [](const MatrixXd& d, const ModelConfig& config, std::optional<MatrixXd> init) {
    const auto dm = as_dissimilarity(d);
    py::gil_scoped_release release;
    return fit(dm, config, init);
  }, py::arg("distances"), py::arg("config"), py::arg("init") = py::none());

  // ---- geometry on a fitted field
  m.def("geodesic", [](const FitReport& r, const VectorXd& a, const VectorXd& b, int segments) {
    GeodesicOptions opt;
    opt.segments = segments;
    const auto g = geodesic(GpJacobian(r.field), a, b, opt);
    return py::make_tuple(g.points, g.expected_length);
  }, py::arg("report"), py::arg("a"), py::arg("b"), py::arg("segments") = 20,
     "Returns (points, expected_length).");
  m.def("expected_metric", [](const FitReport& r, const VectorXd& z) { return expected_metric(r.field, z); });
  m.def("magnification_grid", [](const FitReport& r, const VectorXd& lower, const VectorXd& upper,
                                 const std::vector<int>& resolution, int n_mc, std::uint64_t seed, int threads) {
    const auto g = magnification_grid(GpJacobian(r.field), lower, upper, resolution, n_mc, seed, threads);
    return g.values;
  }, py::arg("report"), py::arg("lower"), py::arg("upper"), py::arg("resolution"), py::arg("n_mc") = 20,
     py::arg("seed") = 0, py::arg("threads") = 1, "Node values, last axis fastest.");

}
