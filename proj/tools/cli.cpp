// isogplvm command-line pipeline: gen -> dist -> graph -> fit -> geometry.
// Exit codes: 0 success, 2 usage or validation error, 3 numerical abort.

#include "isogplvm/baselines.hpp"
#include "isogplvm/dissimilarity.hpp"
#include "isogplvm/errors.hpp"
#include "isogplvm/geometry.hpp"
#include "isogplvm/graph.hpp"
#include "isogplvm/io.hpp"
#include "isogplvm/model.hpp"
#include "isogplvm/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace isogplvm;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw UsageError(what + " not found: " + path);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError("not a number list: " + s);
    }
  }
  return out;
}

// ---- gen -------------------------------------------------------------------

struct GenArgs {
  std::string dataset;
  int n = 300;
  std::uint64_t seed = 0;
  std::string out;
  double noise = 0.0;
  int size = 32;
  double separation = 6.0;
  double sd = 0.5;
  double width = 2.0;
  double height = 1.5;
};

int run_gen(const GenArgs& a) {
  if (a.n <= 0) throw ValidationError("n must be positive");
  if (a.dataset == "swissroll") {
    const auto sr = gen_swiss_roll(a.n, a.noise, a.seed);
    save_points(sr.data, a.out);
    save_csv_matrix(sr.ground_truth, fs::path(a.out).replace_extension(".truth.csv"),
                    {"arc_length", "height"});
    std::printf("swissroll: %d points in R^3 -> %s\n", a.n, a.out.c_str());
  } else if (a.dataset == "glyph") {
    const auto imgs = gen_rotated_glyph(a.n, a.size, a.seed);
    save_images(imgs, a.out);
    std::printf("glyph: %d frames of %dx%d -> %s\n", a.n, a.size, a.size, a.out.c_str());
  } else if (a.dataset == "plane") {
    const auto pl = gen_plane(a.n, a.width, a.height, a.seed);
    save_points(pl.data, a.out);
    save_csv_matrix(pl.ground_truth, fs::path(a.out).replace_extension(".truth.csv"), {"u", "v"});
    std::printf("plane: %d points in R^3 -> %s\n", a.n, a.out.c_str());
  } else if (a.dataset == "two-clusters") {
    if (a.n % 2 != 0) throw ValidationError("two-clusters needs an even n");
    const auto ps = gen_two_clusters(a.n / 2, a.separation, a.sd, a.seed);
    save_points(ps, a.out);
    std::printf("two-clusters: 2 x %d points in R^3 -> %s\n", a.n / 2, a.out.c_str());
  } else {
    throw UsageError("unknown dataset '" + a.dataset +
                     "' (expected swissroll, glyph, plane or two-clusters)");
  }
  return 0;
}

// ---- dist ------------------------------------------------------------------

struct DistArgs {
  std::string metric = "euclid";
  std::string input;
  std::string out;
  int angles = 36;
  double eps = 7.0;
  std::optional<double> r;
  std::string base = "euclid";
  std::string normalize = "none";
};

DissimilarityMatrix base_distances(const Dataset& ds, const std::string& metric, int angles) {
  if (metric == "euclid")
    return ds.is_images ? euclidean_distances(ds.images) : euclidean_distances(ds.points);
  if (metric == "rot") {
    if (!ds.is_images) throw UsageError("metric 'rot' needs an image stack input");
    return rotation_invariant_distances(ds.images, angles);
  }
  throw UsageError("unknown metric '" + metric + "'");
}

int run_dist(const DistArgs& a) {
  require_file(a.input, "input");
  const auto ds = load_dataset(a.input);
  const auto norm = parse_normalization(a.normalize);
  DissimilarityMatrix d;
  if (a.metric == "lex") {
    if (ds.labels().empty()) throw UsageError("metric 'lex' needs labels in the input sidecar");
    d = lexicographic_distances(normalize_distances(base_distances(ds, a.base, a.angles), norm),
                                ds.labels(), a.eps, a.r);
  } else {
    d = normalize_distances(base_distances(ds, a.metric, a.angles), norm);
  }
  save_csv_matrix(d.values(), a.out);
  std::printf("%s distances: %lld x %lld -> %s\n", a.metric.c_str(),
              static_cast<long long>(d.size()), static_cast<long long>(d.size()), a.out.c_str());
  return 0;
}

// ---- graph -----------------------------------------------------------------

struct GraphArgs {
  std::string distances;
  std::optional<double> eps;
  bool persistence = false;
  int target_components = 1;
  double margin = 1.0;
  std::string out;
};

int run_graph(const GraphArgs& a) {
  require_file(a.distances, "distances");
  const auto d = load_csv_distances(a.distances);
  const int n = static_cast<int>(d.size());
  const auto events = zero_dim_persistence(d);
  if (a.persistence) {
    if (!a.out.empty()) write_text(a.out, persistence_csv(events));
    const double eps = a.eps ? *a.eps : suggest_eps(events, n, a.target_components, a.margin);
    std::printf("persistence: %zu merge events; suggested eps %.17g (%d components)\n",
                events.size(), eps, components_at(events, n, eps));
    return 0;
  }
  if (!a.eps) throw UsageError("graph needs --eps or --persistence");
  const double eps = *a.eps;
  const auto g = build_eps_graph(d, eps);
  const int comps = component_count(connected_components(g));
  if (n > 1 && eps <= d.min_offdiagonal())
    std::fprintf(stderr, "warning: eps below minimum distance, graph has %d components\n", n);
  if (!a.out.empty()) write_text(a.out, g.to_json() + "\n");
  std::printf("eps %.17g: %zu edges, %d components\n", eps, g.edges().size(), comps);
  return 0;
}

// ---- fit -------------------------------------------------------------------

struct FitArgs {
  std::string distances;
  std::string config;
  std::string out;
  std::string init;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<double> eps;
  std::optional<double> lr;
  std::optional<int> inducing;
  bool quiet = false;
};

int run_fit(const FitArgs& a, int threads) {
  require_file(a.distances, "distances");
  require_file(a.config, "config");
  const auto d = load_csv_distances(a.distances);
  ModelConfig cfg = load_config(a.config);
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.seed) cfg.seed = *a.seed;
  if (a.eps) cfg.eps = *a.eps;
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.inducing) cfg.inducing = *a.inducing;
  cfg.threads = threads;
  cfg.validate();
  std::optional<MatrixXd> init;
  if (!a.init.empty()) {
    require_file(a.init, "init");
    init = load_csv_matrix(a.init);
  }
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  const int every = std::max(1, cfg.epochs / 20);
  try {
    const auto rep = fit(d, cfg, init, [&](int epoch, double value) {
      if (!a.quiet && (epoch % every == 0 || epoch + 1 == cfg.epochs))
        std::fprintf(stderr, "epoch %d elbo %.6g\n", epoch, value);
    });
    write_text(dir / "report.json", report_to_json(rep));
    write_text(dir / "embedding.csv", embedding_csv(rep.latent));
    write_text(dir / "trace.csv", trace_csv(rep.elbo_trace));
    write_text(dir / "field.json", field_to_json(rep.field));
    std::printf("fit: %d epochs, final elbo %.10g -> %s\n", cfg.epochs,
                rep.elbo_trace.empty() ? 0.0 : rep.elbo_trace.back(), a.out.c_str());
  } catch (const FitAborted& e) {
    write_text(dir / "abort.json", abort_dump_json(e, cfg));
    std::fprintf(stderr, "error: %s (state written to %s)\n", e.what(),
                 (dir / "abort.json").string().c_str());
    return 3;
  }
  return 0;
}

// ---- geometry subcommands --------------------------------------------------

FitReport require_report(const std::string& path) {
  require_file(path, "checkpoint");
  return load_report(path);
}

struct GeodesicArgs {
  std::string report;
  std::vector<std::string> pairs;
  std::string from;
  std::string to;
  int random = 0;
  std::uint64_t seed = 0;
  int segments = 20;
  int max_iter = 2000;
  double tol = 1e-10;
  std::string out;
};

int run_geodesic(const GeodesicArgs& a) {
  const auto rep = require_report(a.report);
  const GpJacobian j(rep.field);
  const auto& mu = rep.latent.mu;
  const int n = static_cast<int>(mu.rows());
  std::vector<std::pair<VectorXd, VectorXd>> queries;
  auto point = [&](int i) -> VectorXd {
    if (i < 0 || i >= n) throw ValidationError("point index out of range: " + std::to_string(i));
    return mu.row(i).transpose();
  };
  for (const auto& p : a.pairs) {
    const auto v = parse_list(p);
    if (v.size() != 2) throw UsageError("--pair expects i,j");
    queries.emplace_back(point(static_cast<int>(v[0])), point(static_cast<int>(v[1])));
  }
  if (!a.from.empty() || !a.to.empty()) {
    const auto za = parse_list(a.from), zb = parse_list(a.to);
    if (static_cast<int>(za.size()) != j.latent_dim() || static_cast<int>(zb.size()) != j.latent_dim())
      throw ValidationError("--from/--to need latent_dim coordinates");
    queries.emplace_back(Eigen::Map<const VectorXd>(za.data(), j.latent_dim()),
                         Eigen::Map<const VectorXd>(zb.data(), j.latent_dim()));
  }
  CounterRng rng(a.seed, Stream::Sampling, {1});
  for (int k = 0; k < a.random; ++k) {
    const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    int jj = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
    if (jj >= i) ++jj;
    queries.emplace_back(point(i), point(jj));
  }
  if (queries.empty()) throw UsageError("geodesic needs --pair, --from/--to or --random");
  GeodesicOptions opt;
  opt.segments = a.segments;
  opt.max_iter = a.max_iter;
  opt.tol = a.tol;
  std::vector<Geodesic> paths;
  for (const auto& [za, zb] : queries) {
    paths.push_back(geodesic(j, za, zb, opt));
    const auto& g = paths.back();
    std::printf("geodesic %zu: length %.10g, converged %s, %d iterations\n", paths.size() - 1,
                g.expected_length, g.converged ? "yes" : "no", g.iterations);
  }
  write_text(a.out, geodesic_csv(paths));
  return 0;
}

struct GridArgs {
  std::string report;
  std::string res = "50";
  int n_mc = 20;
  std::uint64_t seed = 0;
  double margin = 0.1;
  std::string bounds;
  std::string out;
};

int run_metric_grid(const GridArgs& a, int threads) {
  const auto rep = require_report(a.report);
  const GpJacobian j(rep.field);
  const int q = j.latent_dim();
  std::vector<int> res;
  for (double v : parse_list(a.res)) res.push_back(static_cast<int>(v));
  if (res.size() == 1) res.assign(static_cast<std::size_t>(q), res[0]);
  VectorXd lo, hi;
  if (!a.bounds.empty()) {
    const auto b = parse_list(a.bounds);
    if (static_cast<int>(b.size()) != 2 * q) throw UsageError("--bounds needs lo...,hi...");
    lo = Eigen::Map<const VectorXd>(b.data(), q);
    hi = Eigen::Map<const VectorXd>(b.data() + q, q);
  } else {
    lo = rep.latent.mu.colwise().minCoeff().transpose();
    hi = rep.latent.mu.colwise().maxCoeff().transpose();
    const VectorXd pad = (a.margin * (hi - lo)).cwiseMax(1e-6);
    lo -= pad;
    hi += pad;
  }
  const auto grid = magnification_grid(j, lo, hi, res, a.n_mc, a.seed, threads);
  write_text(a.out, grid.to_csv());
  write_text(sidecar_path(a.out), grid.header_json());
  std::printf("metric grid: %lld nodes, values in [%.6g, %.6g] -> %s\n",
              static_cast<long long>(grid.size()), grid.values.minCoeff(), grid.values.maxCoeff(),
              a.out.c_str());
  return 0;
}

struct BaselineArgs {
  std::string distances;
  std::string method = "both";
  double eps = 0.0;
  int q = 2;
  std::string out;
};

int run_baseline(const BaselineArgs& a, int threads) {
  require_file(a.distances, "distances");
  const auto d = load_csv_distances(a.distances);
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  const bool mds = a.method == "mds" || a.method == "both";
  const bool iso = a.method == "isomap" || a.method == "both";
  if (!mds && !iso) throw UsageError("unknown method '" + a.method + "'");
  std::optional<double> s_mds, s_iso;
  if (mds) {
    const MatrixXd z = classical_mds(d, a.q);
    save_csv_matrix(z, dir / "mds.csv");
    s_mds = stress(d, z);
  }
  if (iso) {
    if (!(a.eps > 0.0)) throw ValidationError("isomap needs --eps > 0");
    const auto r = isomap(d, a.eps, a.q, threads);
    MatrixXd out(r.embedding.rows(), a.q + 1);
    for (Eigen::Index k = 0; k < out.rows(); ++k) {
      out(k, 0) = r.kept[static_cast<std::size_t>(k)];
      out.row(k).tail(a.q) = r.embedding.row(k);
    }
    std::vector<std::string> header{"index"};
    for (int c = 0; c < a.q; ++c) header.push_back("z" + std::to_string(c));
    save_csv_matrix(out, dir / "isomap.csv", header);
    // Stress over the kept vertices only.
    const auto k = static_cast<Eigen::Index>(r.kept.size());
    MatrixXd sub(k, k);
    for (Eigen::Index x = 0; x < k; ++x)
      for (Eigen::Index y = 0; y < k; ++y)
        sub(x, y) = d(r.kept[static_cast<std::size_t>(x)], r.kept[static_cast<std::size_t>(y)]);
    s_iso = stress(DissimilarityMatrix(sub), r.embedding);
    if (!r.dropped.empty())
      std::fprintf(stderr, "isomap: dropped %zu vertices outside the largest component\n",
                   r.dropped.size());
  }
  std::printf("stress:");
  if (s_mds) std::printf(" mds %.10g", *s_mds);
  if (s_iso) std::printf(" isomap %.10g", *s_iso);
  std::printf("\n");
  return 0;
}

struct PlotArgs {
  std::string report;
  std::string grid;
  std::string geodesics;
  std::string labels_from;
  std::string title;
  std::string out;
};

MetricGrid load_grid(const std::string& path) {
  require_file(path, "grid");
  const auto header_path = sidecar_path(path);
  require_file(header_path.string(), "grid header");
  const auto h = nlohmann::json::parse(read_text(header_path));
  MetricGrid g;
  const auto lo = h.at("lower").get<std::vector<double>>();
  const auto hi = h.at("upper").get<std::vector<double>>();
  g.lower = Eigen::Map<const VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  g.upper = Eigen::Map<const VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  g.resolution = h.at("resolution").get<std::vector<int>>();
  g.n_mc = h.at("n_mc").get<int>();
  g.seed = h.at("seed").get<std::uint64_t>();
  const MatrixXd m = load_csv_matrix(path);
  g.values = m.col(m.cols() - 1);
  return g;
}

std::vector<Geodesic> load_geodesics(const std::string& path) {
  require_file(path, "geodesics");
  const MatrixXd m = load_csv_matrix(path);
  std::map<int, std::vector<Eigen::Index>> rows;
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows[static_cast<int>(m(r, 0))].push_back(r);
  std::vector<Geodesic> out;
  const auto q = m.cols() - 3;
  for (const auto& [p, idx] : rows) {
    Geodesic g;
    g.points.resize(static_cast<Eigen::Index>(idx.size()), q);
    for (std::size_t k = 0; k < idx.size(); ++k) g.points.row(static_cast<Eigen::Index>(k)) = m.row(idx[k]).segment(2, q);
    g.expected_length = m(idx.front(), m.cols() - 1);
    out.push_back(std::move(g));
  }
  return out;
}

int run_plot(const PlotArgs& a) {
  const auto rep = require_report(a.report);
  if (rep.latent.dim() != 2) throw ValidationError("plot needs a 2-D latent space");
  PlotInput in;
  in.embedding = rep.latent.mu;
  in.title = a.title;
  std::optional<MetricGrid> grid;
  if (!a.grid.empty()) {
    grid = load_grid(a.grid);
    in.grid = &*grid;
  }
  if (!a.geodesics.empty()) in.geodesics = load_geodesics(a.geodesics);
  if (!a.labels_from.empty()) {
    require_file(a.labels_from, "labels source");
    in.labels = load_dataset(a.labels_from).labels();
  }
  write_text(a.out, render_svg(in));
  std::printf("plot -> %s\n", a.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Isometric GP latent variable models for dissimilarity data"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Maximum worker threads")->check(CLI::PositiveNumber);

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  c_gen->add_option("dataset", gen.dataset, "swissroll | glyph | plane | two-clusters")->required();
  c_gen->add_option("--n", gen.n, "Points (frames for glyph)");
  c_gen->add_option("--seed", gen.seed);
  c_gen->add_option("--out", gen.out)->required();
  c_gen->add_option("--noise", gen.noise, "Swiss roll Gaussian noise sd");
  c_gen->add_option("--size", gen.size, "Glyph image side length");
  c_gen->add_option("--separation", gen.separation, "Two-clusters center distance");
  c_gen->add_option("--sd", gen.sd, "Two-clusters blob sd");
  c_gen->add_option("--width", gen.width, "Plane width");
  c_gen->add_option("--height", gen.height, "Plane height");

  DistArgs dist;
  auto* c_dist = app.add_subcommand("dist", "Compute a dissimilarity matrix");
  c_dist->add_option("metric", dist.metric, "euclid | rot | lex")->required();
  c_dist->add_option("--input", dist.input)->required();
  c_dist->add_option("--out", dist.out)->required();
  c_dist->add_option("--angles", dist.angles, "Rotation angles for rot");
  c_dist->add_option("--eps", dist.eps, "Cross-label distance for lex");
  c_dist->add_option("--r", dist.r, "Within-label cap radius for lex (default eps/4)");
  c_dist->add_option("--base", dist.base, "Base metric for lex: euclid | rot");
  c_dist->add_option("--normalize", dist.normalize,
                     "Rescale base distances by their none | max | median | rms (before lex)");

  GraphArgs graph;
  auto* c_graph = app.add_subcommand("graph", "Neighborhood graph diagnostics");
  c_graph->add_option("--distances", graph.distances)->required();
  c_graph->add_option("--eps", graph.eps);
  c_graph->add_flag("--persistence", graph.persistence, "Emit 0-dim persistence events");
  c_graph->add_option("--target-components", graph.target_components);
  c_graph->add_option("--margin", graph.margin, "Multiplier on the suggested eps");
  c_graph->add_option("--out", graph.out);

  FitArgs fa;
  auto* c_fit = app.add_subcommand("fit", "Fit the model");
  c_fit->add_option("--distances", fa.distances)->required();
  c_fit->add_option("--config", fa.config)->required();
  c_fit->add_option("--out", fa.out)->required();
  c_fit->add_option("--init", fa.init, "Initial latent means CSV (N x q)");
  c_fit->add_option("--epochs", fa.epochs);
  c_fit->add_option("--seed", fa.seed);
  c_fit->add_option("--eps", fa.eps);
  c_fit->add_option("--lr", fa.lr);
  c_fit->add_option("--inducing", fa.inducing);
  c_fit->add_flag("--quiet", fa.quiet);

  GeodesicArgs geo;
  auto* c_geo = app.add_subcommand("geodesic", "Geodesics under the expected metric");
  c_geo->add_option("--report", geo.report)->required();
  c_geo->add_option("--pair", geo.pairs, "Point indices i,j (repeatable)");
  c_geo->add_option("--from", geo.from, "Latent coordinates a0,a1,...");
  c_geo->add_option("--to", geo.to, "Latent coordinates b0,b1,...");
  c_geo->add_option("--random", geo.random, "Random point pairs");
  c_geo->add_option("--seed", geo.seed);
  c_geo->add_option("--segments", geo.segments);
  c_geo->add_option("--max-iter", geo.max_iter);
  c_geo->add_option("--tol", geo.tol);
  c_geo->add_option("--out", geo.out)->required();

  GridArgs grid;
  auto* c_grid = app.add_subcommand("metric-grid", "Magnification factor on a latent grid");
  c_grid->add_option("--report", grid.report)->required();
  c_grid->add_option("--res", grid.res, "Nodes per axis, e.g. 50 or 50,40");
  c_grid->add_option("--n-mc", grid.n_mc);
  c_grid->add_option("--seed", grid.seed);
  c_grid->add_option("--margin", grid.margin, "Padding around the embedding, fraction of extent");
  c_grid->add_option("--bounds", grid.bounds, "lo0,lo1,hi0,hi1");
  c_grid->add_option("--out", grid.out)->required();

  BaselineArgs base;
  auto* c_base = app.add_subcommand("baseline", "Classical MDS and IsoMap embeddings");
  c_base->add_option("--distances", base.distances)->required();
  c_base->add_option("--method", base.method, "mds | isomap | both");
  c_base->add_option("--eps", base.eps);
  c_base->add_option("--q", base.q);
  c_base->add_option("--out", base.out)->required();

  PlotArgs plot;
  auto* c_plot = app.add_subcommand("plot", "SVG of embedding, grid and geodesics");
  c_plot->add_option("--report", plot.report)->required();
  c_plot->add_option("--grid", plot.grid);
  c_plot->add_option("--geodesics", plot.geodesics);
  c_plot->add_option("--labels-from", plot.labels_from, "Dataset CSV whose sidecar has labels");
  c_plot->add_option("--title", plot.title);
  c_plot->add_option("--out", plot.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (c_gen->parsed()) return run_gen(gen);
    if (c_dist->parsed()) return run_dist(dist);
    if (c_graph->parsed()) return run_graph(graph);
    if (c_fit->parsed()) return run_fit(fa, threads);
    if (c_geo->parsed()) return run_geodesic(geo);
    if (c_grid->parsed()) return run_metric_grid(grid, threads);
    if (c_base->parsed()) return run_baseline(base, threads);
    if (c_plot->parsed()) return run_plot(plot);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
