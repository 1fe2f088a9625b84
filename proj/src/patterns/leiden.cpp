#include "geolens/patterns/leiden.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <random>

namespace geolens::patterns {

namespace {

// Weighted multigraph used across aggregation levels. Self-loops are not
// stored; node degrees are carried separately from the original graph.
struct Level {
  std::vector<std::vector<std::pair<std::size_t, double>>> adj;
  std::vector<double> degree;
  std::size_t size() const { return adj.size(); }
};

struct Partition {
  std::vector<std::size_t> of;
  std::vector<double> degree;  // total degree per community
  std::vector<std::size_t> members;

  explicit Partition(const Level& g) : of(g.size()), degree(g.degree), members(g.size(), 1) {
    std::iota(of.begin(), of.end(), std::size_t{0});
  }
  Partition(const Level& g, std::vector<std::size_t> assignment) : of(std::move(assignment)) {
    const auto k = of.empty() ? 0 : *std::max_element(of.begin(), of.end()) + 1;
    degree.assign(std::max(k, g.size()), 0.0);
    members.assign(degree.size(), 0);
    for (std::size_t v = 0; v < g.size(); ++v) {
      degree[of[v]] += g.degree[v];
      ++members[of[v]];
    }
  }
  void move(std::size_t v, double dv, std::size_t to) {
    degree[of[v]] -= dv;
    --members[of[v]];
    degree[to] += dv;
    ++members[to];
    of[v] = to;
  }
  std::size_t empty_slot() const {
    for (std::size_t c = 0; c < members.size(); ++c) {
      if (members[c] == 0) return c;
    }
    return members.size();
  }
  // Renumbers communities 0..k-1 in order of first appearance.
  std::size_t compact() {
    std::vector<std::size_t> remap(members.size(), SIZE_MAX);
    std::size_t k = 0;
    for (auto& c : of) {
      if (remap[c] == SIZE_MAX) remap[c] = k++;
      c = remap[c];
    }
    std::vector<double> d(k, 0.0);
    std::vector<std::size_t> m(k, 0);
    for (std::size_t c = 0; c < remap.size(); ++c) {
      if (remap[c] != SIZE_MAX) {
        d[remap[c]] = degree[c];
        m[remap[c]] = members[c];
      }
    }
    degree = std::move(d);
    members = std::move(m);
    return k;
  }
};

class Leiden {
 public:
  Leiden(double m2, const LeidenOptions& o) : two_m_(m2), opt_(o), rng_(o.seed) {}

  // Returns true if any node moved.
  bool move_nodes(const Level& g, Partition& p) {
    const auto n = g.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);
    std::deque<std::size_t> queue(order.begin(), order.end());
    std::vector<char> queued(n, 1);
    std::vector<double> link(p.members.size() + 1, 0.0);
    std::vector<std::size_t> touched;
    bool moved = false;
    while (!queue.empty()) {
      const auto v = queue.front();
      queue.pop_front();
      queued[v] = 0;
      const auto from = p.of[v];
      const double dv = g.degree[v];
      touched.clear();
      for (auto [u, w] : g.adj[v]) {
        const auto c = p.of[u];
        if (link[c] == 0.0) touched.push_back(c);
        link[c] += w;
      }
      const double k_from = link[from];
      const double base = p.degree[from] - dv;
      auto gain = [&](std::size_t c, double k_c) {
        const double dc = c == from ? base : p.degree[c];
        return (k_c - k_from) - opt_.resolution * dv * (dc - base) / two_m_;
      };
      std::size_t best = from;
      double best_gain = 0.0;
      std::sort(touched.begin(), touched.end());
      for (auto c : touched) {
        if (c == from) continue;
        const double g_c = gain(c, link[c]);
        if (g_c > best_gain + 1e-12) {
          best_gain = g_c;
          best = c;
        }
      }
      if (p.members[from] > 1) {
        const double ge = -k_from + opt_.resolution * dv * base / two_m_;
        if (ge > best_gain + 1e-12) {
          best_gain = ge;
          best = p.empty_slot();
          if (best == p.members.size()) {
            p.members.push_back(0);
            p.degree.push_back(0.0);
            link.push_back(0.0);
          }
        }
      }
      for (auto c : touched) link[c] = 0.0;
      if (best != from) {
        p.move(v, dv, best);
        moved = true;
        for (const auto& [u, w] : g.adj[v]) {
          if (!queued[u] && p.of[u] != best) {
            queued[u] = 1;
            queue.push_back(u);
          }
        }
      }
    }
    return moved;
  }

  Partition refine(const Level& g, const Partition& p) {
    Partition r(g);
    const auto n = g.size();
    // Edge weight from each node into its own (non-refined) community.
    std::vector<double> into(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      for (auto [u, w] : g.adj[v]) {
        if (p.of[u] == p.of[v]) into[v] += w;
      }
    }
    // Refined-community edge weight into its parent community.
    std::vector<double> r_into = into;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);
    std::vector<double> link(n, 0.0);
    std::vector<std::size_t> touched;
    for (auto v : order) {
      if (r.members[r.of[v]] != 1) continue;
      const double dv = g.degree[v];
      const double dC = p.degree[p.of[v]];
      if (into[v] < opt_.resolution * dv * (dC - dv) / two_m_) continue;
      touched.clear();
      for (auto [u, w] : g.adj[v]) {
        if (p.of[u] != p.of[v]) continue;
        const auto c = r.of[u];
        if (c == r.of[v]) continue;
        if (link[c] == 0.0) touched.push_back(c);
        link[c] += w;
      }
      std::sort(touched.begin(), touched.end());
      std::vector<std::pair<std::size_t, double>> candidates;
      double best = 0.0;
      for (auto c : touched) {
        const double dT = r.degree[c];
        if (r_into[c] < opt_.resolution * dT * (dC - dT) / two_m_) continue;
        const double q = link[c] - opt_.resolution * dv * dT / two_m_;
        if (q >= 0.0) {
          candidates.emplace_back(c, q);
          best = std::max(best, q);
        }
      }
      for (auto c : touched) link[c] = 0.0;
      if (candidates.empty()) continue;
      std::vector<double> prob;
      prob.reserve(candidates.size());
      for (auto& [c, q] : candidates) prob.push_back(std::exp((q - best) / opt_.randomness));
      std::discrete_distribution<std::size_t> pick(prob.begin(), prob.end());
      const auto target = candidates[pick(rng_)].first;
      // Update edge weight of the merged refined community into C.
      const auto old = r.of[v];
      double v_to_target = 0.0;
      for (auto [u, w] : g.adj[v]) {
        if (r.of[u] == target) v_to_target += w;
      }
      r_into[target] = r_into[target] + r_into[old] - 2.0 * v_to_target;
      r_into[old] = 0.0;
      r.move(v, dv, target);
    }
    return r;
  }

  static Level aggregate(const Level& g, const Partition& r, std::size_t k) {
    Level out;
    out.adj.resize(k);
    out.degree.assign(k, 0.0);
    std::vector<std::map<std::size_t, double>> acc(k);
    for (std::size_t v = 0; v < g.size(); ++v) {
      out.degree[r.of[v]] += g.degree[v];
      for (auto [u, w] : g.adj[v]) {
        if (r.of[u] != r.of[v]) acc[r.of[v]][r.of[u]] += w;
      }
    }
    for (std::size_t c = 0; c < k; ++c) out.adj[c].assign(acc[c].begin(), acc[c].end());
    return out;
  }

 private:
  double two_m_;
  LeidenOptions opt_;
  std::mt19937_64 rng_;
};

// Splits communities into connected components of the original graph.
std::vector<std::vector<std::size_t>> connected_parts(const dataset::SpatialWeights& graph,
                                                      const std::vector<std::size_t>& membership) {
  const auto n = graph.size();
  std::vector<char> seen(n, 0);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::vector<std::size_t> comp{s};
    seen[s] = 1;
    for (std::size_t q = 0; q < comp.size(); ++q) {
      for (auto u : graph.neighbors[comp[q]]) {
        if (!seen[u] && membership[u] == membership[s]) {
          seen[u] = 1;
          comp.push_back(u);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() > b.size() : a.front() < b.front();
  });
  return out;
}

}  // namespace

double modularity(const dataset::SpatialWeights& graph, const std::vector<std::size_t>& membership, double resolution) {
  double two_m = 0.0;
  for (const auto& nb : graph.neighbors) two_m += static_cast<double>(nb.size());
  if (two_m == 0.0) return 0.0;
  const auto k = membership.empty() ? 0 : *std::max_element(membership.begin(), membership.end()) + 1;
  std::vector<double> internal(k, 0.0), degree(k, 0.0);
  for (std::size_t v = 0; v < graph.size(); ++v) {
    degree[membership[v]] += static_cast<double>(graph.neighbors[v].size());
    for (auto u : graph.neighbors[v]) {
      if (membership[u] == membership[v]) internal[membership[v]] += 1.0;
    }
  }
  double q = 0.0;
  for (std::size_t c = 0; c < k; ++c) q += internal[c] / two_m - resolution * (degree[c] / two_m) * (degree[c] / two_m);
  return q;
}

std::vector<std::size_t> membership_of(const std::vector<std::vector<std::size_t>>& communities, std::size_t n) {
  std::vector<std::size_t> m(n, 0);
  for (std::size_t c = 0; c < communities.size(); ++c) {
    for (auto v : communities[c]) m[v] = c;
  }
  return m;
}

std::vector<std::vector<std::size_t>> leiden_communities(const dataset::SpatialWeights& graph, const LeidenOptions& options) {
  const auto n = graph.size();
  if (n == 0) return {};
  Level base;
  base.adj.resize(n);
  base.degree.resize(n);
  double two_m = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    for (auto u : graph.neighbors[v]) base.adj[v].emplace_back(u, 1.0);
    base.degree[v] = static_cast<double>(graph.neighbors[v].size());
    two_m += base.degree[v];
  }
  if (two_m == 0.0) {
    std::vector<std::vector<std::size_t>> singles;
    for (std::size_t v = 0; v < n; ++v) singles.push_back({v});
    return singles;
  }

  Leiden leiden(two_m, options);
  std::vector<std::size_t> node_of(n);  // original node -> current level node
  std::iota(node_of.begin(), node_of.end(), std::size_t{0});
  Level g = base;
  Partition p(g);
  for (int level = 0; level < options.max_levels; ++level) {
    leiden.move_nodes(g, p);
    const auto k = p.compact();
    if (k == g.size()) break;
    Partition r = leiden.refine(g, p);
    const auto kr = r.compact();
    // Each refined community sits inside exactly one community of p.
    std::vector<std::size_t> lifted(kr);
    for (std::size_t v = 0; v < g.size(); ++v) lifted[r.of[v]] = p.of[v];
    g = Leiden::aggregate(g, r, kr);
    for (auto& x : node_of) x = r.of[x];
    p = Partition(g, lifted);
  }
  std::vector<std::size_t> membership(n);
  for (std::size_t v = 0; v < n; ++v) membership[v] = p.of[node_of[v]];
  return connected_parts(graph, membership);
}

}  // namespace geolens::patterns
