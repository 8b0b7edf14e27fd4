#include "isogplvm/io.hpp"

#include "isogplvm/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace isogplvm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) {
    const auto b = cur.find_first_not_of(" \t\r");
    const auto e = cur.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Eigen::MatrixXd load_csv_matrix(const fs::path& path, std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t cols = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split_fields(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t k = 0; k < fields.size() && numeric; ++k)
      numeric = parse_double(fields[k], row[k]);
    if (!numeric) {
      if (rows.empty() && lineno == 1) {
        if (header) *header = fields;
        continue;
      }
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
    if (rows.empty()) cols = row.size();
    if (row.size() != cols)
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(cols) + " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

void save_csv_matrix(const Eigen::MatrixXd& m, const fs::path& path,
                     const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  if (!header.empty()) {
    for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
    out << '\n';
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

fs::path sidecar_path(const fs::path& csv_path) {
  fs::path p = csv_path;
  p.replace_extension(".json");
  return p;
}

namespace {

json read_sidecar(const fs::path& csv_path) {
  const auto p = sidecar_path(csv_path);
  if (!fs::exists(p)) return json::object();
  std::ifstream in(p);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("malformed sidecar " + p.string() + ": " + e.what());
  }
}

void write_json(const json& j, const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

}  // namespace

PointSet load_csv_points(const fs::path& path) {
  PointSet ps;
  ps.points = load_csv_matrix(path);
  const json side = read_sidecar(path);
  if (side.contains("labels")) ps.labels = side.at("labels").get<std::vector<int>>();
  ps.validate();
  return ps;
}

DissimilarityMatrix load_csv_distances(const fs::path& path, double symmetry_tol) {
  return DissimilarityMatrix(load_csv_matrix(path), symmetry_tol);
}

void save_points(const PointSet& ps, const fs::path& path) {
  save_csv_matrix(ps.points, path);
  json side = {{"kind", "points"}, {"n", ps.size()}, {"dim", ps.points.cols()}};
  if (ps.has_labels()) side["labels"] = ps.labels;
  write_json(side, sidecar_path(path));
}

void save_images(const ImageStack& imgs, const fs::path& path) {
  save_csv_matrix(imgs.pixels, path);
  json side = {{"kind", "images"}, {"height", imgs.height}, {"width", imgs.width}};
  if (!imgs.labels.empty()) side["labels"] = imgs.labels;
  write_json(side, sidecar_path(path));
}

ImageStack load_images(const fs::path& path) {
  const json side = read_sidecar(path);
  if (!side.contains("height") || !side.contains("width"))
    throw ValidationError("image sidecar for " + path.string() + " lacks height/width");
  ImageStack imgs;
  imgs.pixels = load_csv_matrix(path);
  imgs.height = side.at("height").get<int>();
  imgs.width = side.at("width").get<int>();
  if (side.contains("labels")) imgs.labels = side.at("labels").get<std::vector<int>>();
  imgs.validate();
  return imgs;
}

Dataset load_dataset(const fs::path& path) {
  const json side = read_sidecar(path);
  Dataset ds;
  if (side.value("kind", std::string("points")) == "images") {
    ds.is_images = true;
    ds.images = load_images(path);
  } else {
    ds.points = load_csv_points(path);
  }
  return ds;
}

}  // namespace isogplvm
