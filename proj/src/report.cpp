#include "isogplvm/report.hpp"

#include "isogplvm/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace isogplvm {

using nlohmann::json;

namespace {

json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from(const json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError(what + " has ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json config_json(const ModelConfig& c) {
  return json{{"latent_dim", c.latent_dim},         {"eps", c.eps},
              {"curve_segments", c.curve_segments}, {"mc_samples", c.mc_samples},
              {"inducing", c.inducing},             {"ambient_dim", c.ambient_dim},
              {"learning_rate", c.learning_rate},   {"epochs", c.epochs},
              {"block_length", c.block_length},     {"seed", c.seed},
              {"pair_batch", c.pair_batch},         {"init_variance", c.init_variance},
              {"init_lengthscale", c.init_lengthscale}, {"init_cov_scale", c.init_cov_scale},
              {"jitter", c.jitter}};
}

ModelConfig config_from(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  static const std::set<std::string> known = {
      "latent_dim", "eps",  "curve_segments", "mc_samples",    "inducing",
      "ambient_dim", "learning_rate", "epochs", "block_length", "seed",
      "pair_batch", "init_variance", "init_lengthscale", "init_cov_scale", "jitter", "threads"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ValidationError("unknown config field '" + k + "'");
  if (!j.contains("eps")) throw ValidationError("missing required config field 'eps'");
  ModelConfig c;
  auto get = [&](const char* name, auto& dst) {
    if (!j.contains(name)) return;
    try {
      dst = j.at(name).get<std::decay_t<decltype(dst)>>();
    } catch (const json::exception&) {
      throw ValidationError(std::string("config field '") + name + "' has the wrong type");
    }
  };
  get("latent_dim", c.latent_dim);
  get("eps", c.eps);
  get("curve_segments", c.curve_segments);
  get("mc_samples", c.mc_samples);
  get("inducing", c.inducing);
  get("ambient_dim", c.ambient_dim);
  get("learning_rate", c.learning_rate);
  get("epochs", c.epochs);
  get("block_length", c.block_length);
  get("seed", c.seed);
  get("pair_batch", c.pair_batch);
  get("init_variance", c.init_variance);
  get("init_lengthscale", c.init_lengthscale);
  get("init_cov_scale", c.init_cov_scale);
  get("jitter", c.jitter);
  get("threads", c.threads);
  c.validate();
  return c;
}

json field_json(const JacobianField& f) {
  std::vector<double> ls(f.kernel.log_lengthscales.data(),
                         f.kernel.log_lengthscales.data() + f.kernel.log_lengthscales.size());
  return json{{"ambient_dim", f.ambient_dim},
              {"latent_dim", f.latent_dim},
              {"kernel",
               {{"log_lengthscales", ls},
                {"log_variance", f.kernel.log_variance},
                {"log_jitter", f.kernel.log_jitter}}},
              {"inducing_locations", matrix_json(f.inducing.locations)},
              {"inducing_mean", matrix_json(f.inducing.mean)},
              {"inducing_chol_cov", matrix_json(f.inducing.chol_cov)}};
}

JacobianField field_from(const json& j) {
  try {
    JacobianField f;
    f.ambient_dim = j.at("ambient_dim").get<int>();
    f.latent_dim = j.at("latent_dim").get<int>();
    const auto& k = j.at("kernel");
    const auto ls = k.at("log_lengthscales").get<std::vector<double>>();
    f.kernel.log_lengthscales = Eigen::Map<const VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
    f.kernel.log_variance = k.at("log_variance").get<double>();
    f.kernel.log_jitter = k.at("log_jitter").get<double>();
    f.inducing.locations = matrix_from(j.at("inducing_locations"), "inducing_locations");
    f.inducing.mean = matrix_from(j.at("inducing_mean"), "inducing_mean");
    f.inducing.chol_cov = matrix_from(j.at("inducing_chol_cov"), "inducing_chol_cov");
    f.validate();
    return f;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed field checkpoint: ") + e.what());
  }
}

json parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(what + " is not valid JSON: " + e.what());
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ModelConfig config_from_json(const std::string& text) { return config_from(parse(text, "config")); }

ModelConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_text(path));
}

std::string config_to_json(const ModelConfig& config) { return config_json(config).dump(2) + "\n"; }

std::string field_to_json(const JacobianField& field) { return field_json(field).dump(2) + "\n"; }

JacobianField field_from_json(const std::string& text) { return field_from(parse(text, "field")); }

std::string report_to_json(const FitReport& r) {
  json pairs = json::array();
  for (const auto& p : r.pairs)
    pairs.push_back(json{{"i", p.i},
                         {"j", p.j},
                         {"observed", p.observed},
                         {"neighbor", p.neighbor},
                         {"m", p.params.m},
                         {"omega", p.params.omega},
                         {"mean_length", p.mean_length},
                         {"survival", p.survival}});
  json out{{"kind", "fit_report"},
           {"config", config_json(r.config)},
           {"elbo_trace", r.elbo_trace},
           {"latent", {{"mu", matrix_json(r.latent.mu)}, {"log_var", matrix_json(r.latent.log_var)}}},
           {"field", field_json(r.field)},
           {"pairs", std::move(pairs)}};
  return out.dump(1) + "\n";
}

FitReport report_from_json(const std::string& text) {
  const json j = parse(text, "fit report");
  try {
    FitReport r;
    r.config = config_from(j.at("config"));
    r.elbo_trace = j.at("elbo_trace").get<std::vector<double>>();
    r.latent.mu = matrix_from(j.at("latent").at("mu"), "latent.mu");
    r.latent.log_var = matrix_from(j.at("latent").at("log_var"), "latent.log_var");
    r.latent.validate();
    r.field = field_from(j.at("field"));
    for (const auto& p : j.at("pairs")) {
      PairSnapshot s;
      s.i = p.at("i").get<int>();
      s.j = p.at("j").get<int>();
      s.observed = p.at("observed").get<double>();
      s.neighbor = p.at("neighbor").get<bool>();
      s.params.m = p.at("m").get<double>();
      s.params.omega = p.at("omega").get<double>();
      s.mean_length = p.at("mean_length").get<double>();
      s.survival = p.at("survival").get<double>();
      r.pairs.push_back(s);
    }
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed fit report: ") + e.what());
  }
}

FitReport load_report(const std::filesystem::path& path) { return report_from_json(read_text(path)); }

std::string embedding_csv(const LatentState& latent) {
  std::ostringstream os;
  os << "index";
  for (int d = 0; d < latent.dim(); ++d) os << ",mu" << d;
  for (int d = 0; d < latent.dim(); ++d) os << ",var" << d;
  os << "\n";
  for (Eigen::Index i = 0; i < latent.size(); ++i) {
    os << i;
    for (int d = 0; d < latent.dim(); ++d) os << "," << fmt(latent.mu(i, d));
    for (int d = 0; d < latent.dim(); ++d) os << "," << fmt(std::exp(latent.log_var(i, d)));
    os << "\n";
  }
  return os.str();
}

std::string trace_csv(const std::vector<double>& trace) {
  std::ostringstream os;
  os << "epoch,elbo\n";
  for (std::size_t e = 0; e < trace.size(); ++e) os << e << "," << fmt(trace[e]) << "\n";
  return os.str();
}

std::string abort_dump_json(const FitAborted& err, const ModelConfig& config) {
  json out{{"kind", "fit_abort"},
           {"message", err.what()},
           {"epoch", err.epoch},
           {"config", config_json(config)},
           {"latent", {{"mu", matrix_json(err.latent.mu)}, {"log_var", matrix_json(err.latent.log_var)}}},
           {"field", field_json(err.field)}};
  // Non-finite values serialize as null.
  return out.dump(1) + "\n";
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("failed writing " + path.string());
}

}  // namespace isogplvm
