#include "isogplvm/graph.hpp"

#include "isogplvm/errors.hpp"
#include "isogplvm/linalg.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

namespace isogplvm {

namespace {

class UnionFind {
public:
  explicit UnionFind(int n) : parent_(static_cast<std::size_t>(n)), rank_(parent_.size(), 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      auto& p = parent_[static_cast<std::size_t>(x)];
      p = parent_[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    auto& ra = rank_[static_cast<std::size_t>(a)];
    auto& rb = rank_[static_cast<std::size_t>(b)];
    if (ra < rb) std::swap(a, b);
    parent_[static_cast<std::size_t>(b)] = a;
    if (ra == rb) ++rank_[static_cast<std::size_t>(a)];
    return true;
  }

private:
  std::vector<int> parent_;
  std::vector<int> rank_;
};

}  // namespace

NeighborGraph::NeighborGraph(int n, double eps, std::vector<Edge> edges)
    : n_(n), eps_(eps), edges_(std::move(edges)) {
  std::sort(edges_.begin(), edges_.end(),
            [](const Edge& a, const Edge& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
  const auto nn = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  bits_.assign((nn + 63) / 64, 0);
  adjacency_.resize(static_cast<std::size_t>(n));
  for (const auto& e : edges_) {
    if (e.i < 0 || e.j >= n || e.i >= e.j)
      throw ValidationError("graph edges must satisfy 0 <= i < j < n");
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight))
      throw ValidationError("graph edge weights must be nonnegative and finite");
    for (auto idx : {static_cast<std::size_t>(e.i) * n + e.j, static_cast<std::size_t>(e.j) * n + e.i})
      bits_[idx / 64] |= std::uint64_t{1} << (idx % 64);
    adjacency_[static_cast<std::size_t>(e.i)].emplace_back(e.j, e.weight);
    adjacency_[static_cast<std::size_t>(e.j)].emplace_back(e.i, e.weight);
  }
  for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());
}

bool NeighborGraph::adjacent(int i, int j) const {
  const auto idx = static_cast<std::size_t>(i) * n_ + j;
  return (bits_[idx / 64] >> (idx % 64)) & 1U;
}

std::string NeighborGraph::to_json() const {
  nlohmann::json j;
  j["n"] = n_;
  j["eps"] = std::isfinite(eps_) ? nlohmann::json(eps_) : nlohmann::json("inf");
  auto& arr = j["edges"] = nlohmann::json::array();
  for (const auto& e : edges_) arr.push_back({e.i, e.j, e.weight});
  return j.dump();
}

NeighborGraph build_eps_graph(const DissimilarityMatrix& d, double eps) {
  if (!(eps > 0.0)) throw ValidationError("graph eps must be positive");
  const auto n = static_cast<int>(d.size());
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (d(i, j) < eps) edges.push_back({i, j, d(i, j)});
  return NeighborGraph(n, eps, std::move(edges));
}

std::vector<int> connected_components(const NeighborGraph& g) {
  const int n = g.size();
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  int next = 0;
  std::vector<int> stack;
  for (int s = 0; s < n; ++s) {
    if (label[static_cast<std::size_t>(s)] >= 0) continue;
    label[static_cast<std::size_t>(s)] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (const auto& [w, _] : g.neighbors(v)) {
        if (label[static_cast<std::size_t>(w)] < 0) {
          label[static_cast<std::size_t>(w)] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  return label;
}

int component_count(const std::vector<int>& labels) {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

std::vector<PersistenceEvent> zero_dim_persistence(const DissimilarityMatrix& d) {
  const auto n = static_cast<int>(d.size());
  std::vector<Edge> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.push_back({i, j, d(i, j)});
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Edge& a, const Edge& b) { return a.weight < b.weight; });
  UnionFind uf(n);
  std::vector<PersistenceEvent> events;
  int count = n;
  for (const auto& p : pairs) {
    if (uf.unite(p.i, p.j)) {
      --count;
      events.push_back({p.weight, count});
      if (count == 1) break;
    }
  }
  return events;
}

int components_at(const std::vector<PersistenceEvent>& events, int n, double eps) {
  int merged = 0;
  for (const auto& e : events)
    if (e.merge_eps < eps) ++merged;
  return n - merged;
}

double suggest_eps(const std::vector<PersistenceEvent>& events, int n, int target_components,
                   double margin) {
  if (margin < 1.0) throw ValidationError("suggest_eps margin must be >= 1");
  double threshold = 0.0;
  int count = n;
  for (const auto& e : events) {
    if (count <= target_components) break;
    threshold = e.merge_eps;
    count = e.components_after;
  }
  if (threshold <= 0.0) threshold = std::numeric_limits<double>::min();
  return margin == 1.0 ? std::nextafter(threshold, std::numeric_limits<double>::infinity())
                       : threshold * margin;
}

std::string persistence_csv(const std::vector<PersistenceEvent>& events) {
  std::ostringstream out;
  out << "eps,components\n";
  char buf[64];
  for (const auto& e : events) {
    std::snprintf(buf, sizeof buf, "%.17g,%d\n", e.merge_eps, e.components_after);
    out << buf;
  }
  return out.str();
}

std::vector<double> dijkstra_from(const NeighborGraph& g, int source) {
  const int n = g.size();
  if (source < 0 || source >= n) throw ValidationError("dijkstra source out of range");
  std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[static_cast<std::size_t>(source)] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [dv, v] = heap.top();
    heap.pop();
    if (dv > dist[static_cast<std::size_t>(v)]) continue;
    for (const auto& [w, weight] : g.neighbors(v)) {
      const double cand = dv + weight;
      if (cand < dist[static_cast<std::size_t>(w)]) {
        dist[static_cast<std::size_t>(w)] = cand;
        heap.emplace(cand, w);
      }
    }
  }
  return dist;
}

Eigen::MatrixXd all_pairs_shortest(const NeighborGraph& g, int threads) {
  const int n = g.size();
  Eigen::MatrixXd out(n, n);
  parallel_blocks(static_cast<std::size_t>(n), threads, [&](std::size_t s) {
    const auto row = dijkstra_from(g, static_cast<int>(s));
    for (int j = 0; j < n; ++j) out(static_cast<Eigen::Index>(s), j) = row[static_cast<std::size_t>(j)];
  });
  // Path sums can differ in the last bit depending on direction.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = std::min(out(i, j), out(j, i));
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

}  // namespace isogplvm
