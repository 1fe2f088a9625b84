#include "geolens/dataset/weights.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>

namespace geolens::dataset {

namespace {

// Coordinates are snapped to a 1e-9 grid so that boundaries digitised from
// the same source compare exactly.
constexpr double kSnap = 1e9;

struct IPoint {
  std::int64_t x;
  std::int64_t y;
  friend auto operator<=>(const IPoint&, const IPoint&) = default;
};

struct Box {
  std::int64_t min_x, min_y, max_x, max_y;
  bool intersects(const Box& o) const {
    return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y;
  }
  bool contains(const IPoint& p) const { return min_x <= p.x && p.x <= max_x && min_y <= p.y && p.y <= max_y; }
};

struct Segment {
  IPoint a, b;
  Box box;
};

struct Shape {
  std::vector<std::vector<IPoint>> rings;        // all rings, exterior first per polygon
  std::vector<std::vector<IPoint>> exteriors;    // exterior rings with their holes following in `holes`
  std::vector<std::vector<std::vector<IPoint>>> holes;
  std::vector<IPoint> vertices;                  // sorted, unique
  std::vector<Segment> segments;
  Box box;
};

IPoint snap(const LonLat& p) { return {std::llround(p.lon * kSnap), std::llround(p.lat * kSnap)}; }

std::vector<IPoint> snap_ring(const Ring& ring) {
  std::vector<IPoint> out;
  out.reserve(ring.size());
  for (const auto& p : ring) {
    IPoint q = snap(p);
    if (out.empty() || out.back() != q) out.push_back(q);
  }
  while (out.size() > 1 && out.front() == out.back()) out.pop_back();
  return out;
}

Shape build_shape(const Geometry& g) {
  Shape s;
  s.box = {INT64_MAX, INT64_MAX, INT64_MIN, INT64_MIN};
  for (const auto& poly : g.polygons) {
    s.exteriors.push_back(snap_ring(poly.exterior));
    s.rings.push_back(s.exteriors.back());
    std::vector<std::vector<IPoint>> hs;
    for (const auto& h : poly.holes) {
      hs.push_back(snap_ring(h));
      s.rings.push_back(hs.back());
    }
    s.holes.push_back(std::move(hs));
  }
  for (const auto& ring : s.rings) {
    for (std::size_t i = 0; i < ring.size(); ++i) {
      const IPoint a = ring[i];
      const IPoint b = ring[(i + 1) % ring.size()];
      s.vertices.push_back(a);
      s.box.min_x = std::min(s.box.min_x, a.x);
      s.box.min_y = std::min(s.box.min_y, a.y);
      s.box.max_x = std::max(s.box.max_x, a.x);
      s.box.max_y = std::max(s.box.max_y, a.y);
      s.segments.push_back({a, b, {std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.x, b.x), std::max(a.y, b.y)}});
    }
  }
  std::sort(s.vertices.begin(), s.vertices.end());
  s.vertices.erase(std::unique(s.vertices.begin(), s.vertices.end()), s.vertices.end());
  return s;
}

int orientation(const IPoint& a, const IPoint& b, const IPoint& c) {
  const __int128 v = static_cast<__int128>(b.x - a.x) * (c.y - a.y) - static_cast<__int128>(b.y - a.y) * (c.x - a.x);
  return (v > 0) - (v < 0);
}

bool on_segment(const IPoint& p, const Segment& s) { return orientation(s.a, s.b, p) == 0 && s.box.contains(p); }

// Closed-segment intersection, touching and collinear overlap included.
bool segments_touch(const Segment& s, const Segment& t) {
  if (!s.box.intersects(t.box)) return false;
  const int o1 = orientation(s.a, s.b, t.a);
  const int o2 = orientation(s.a, s.b, t.b);
  const int o3 = orientation(t.a, t.b, s.a);
  const int o4 = orientation(t.a, t.b, s.b);
  if (o1 != o2 && o3 != o4) return true;
  return on_segment(t.a, s) || on_segment(t.b, s) || on_segment(s.a, t) || on_segment(s.b, t);
}

bool share_vertex(const Shape& a, const Shape& b) {
  auto i = a.vertices.begin();
  auto j = b.vertices.begin();
  while (i != a.vertices.end() && j != b.vertices.end()) {
    if (*i == *j) return true;
    if (*i < *j) ++i; else ++j;
  }
  return false;
}

bool boundaries_touch(const Shape& a, const Shape& b) {
  const Box overlap{std::max(a.box.min_x, b.box.min_x), std::max(a.box.min_y, b.box.min_y),
                    std::min(a.box.max_x, b.box.max_x), std::min(a.box.max_y, b.box.max_y)};
  std::vector<const Segment*> sa, sb;
  for (const auto& s : a.segments) if (s.box.intersects(overlap)) sa.push_back(&s);
  for (const auto& s : b.segments) if (s.box.intersects(overlap)) sb.push_back(&s);
  for (const auto* s : sa) {
    for (const auto* t : sb) {
      if (segments_touch(*s, *t)) return true;
    }
  }
  return false;
}

// Strict interior test via ray crossing; boundary points were handled already.
bool inside_ring(const IPoint& p, const std::vector<IPoint>& ring) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const IPoint& a = ring[i];
    const IPoint& b = ring[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      // x-coordinate of the crossing compared exactly: p.x < a.x + (p.y-a.y)(b.x-a.x)/(b.y-a.y)
      const __int128 lhs = static_cast<__int128>(p.x - a.x) * (b.y - a.y);
      const __int128 rhs = static_cast<__int128>(p.y - a.y) * (b.x - a.x);
      const bool less = (b.y - a.y) > 0 ? lhs < rhs : lhs > rhs;
      if (less) inside = !inside;
    }
  }
  return inside;
}

bool inside_shape(const IPoint& p, const Shape& s) {
  if (!s.box.contains(p)) return false;
  for (std::size_t k = 0; k < s.exteriors.size(); ++k) {
    if (!inside_ring(p, s.exteriors[k])) continue;
    bool in_hole = false;
    for (const auto& h : s.holes[k]) in_hole = in_hole || inside_ring(p, h);
    if (!in_hole) return true;
  }
  return false;
}

}  // namespace

double SpatialWeights::total_weight() const {
  double s = 0.0;
  for (std::size_t i = 0; i < neighbors.size(); ++i) s += weight(i) * static_cast<double>(neighbors[i].size());
  return s;
}

SpatialWeights SpatialWeights::row_standardized() const {
  SpatialWeights out = *this;
  out.standardization = Standardization::row;
  return out;
}

SpatialWeights SpatialWeights::induced(const std::vector<std::size_t>& nodes) const {
  std::vector<std::size_t> position(neighbors.size(), SIZE_MAX);
  for (std::size_t k = 0; k < nodes.size(); ++k) position[nodes[k]] = k;
  SpatialWeights out;
  out.standardization = standardization;
  out.neighbors.resize(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    for (std::size_t j : neighbors[nodes[k]]) {
      if (position[j] != SIZE_MAX) out.neighbors[k].push_back(position[j]);
    }
    std::sort(out.neighbors[k].begin(), out.neighbors[k].end());
  }
  return out;
}

SpatialWeights queen_adjacency(const GeoFeatureTable& table) {
  const std::size_t n = table.size();
  std::vector<Shape> shapes;
  shapes.reserve(n);
  for (const auto& g : table.geometries) shapes.push_back(build_shape(g));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::pair(shapes[a].box.min_x, a) < std::pair(shapes[b].box.min_x, b);
  });

  SpatialWeights w;
  w.neighbors.resize(n);
  for (std::size_t oi = 0; oi < n; ++oi) {
    const std::size_t i = order[oi];
    for (std::size_t oj = oi + 1; oj < n; ++oj) {
      const std::size_t j = order[oj];
      if (shapes[j].box.min_x > shapes[i].box.max_x) break;
      if (!shapes[i].box.intersects(shapes[j].box)) continue;
      bool adjacent = share_vertex(shapes[i], shapes[j]) || boundaries_touch(shapes[i], shapes[j]);
      if (!adjacent) {
        const bool overlap = inside_shape(shapes[i].vertices.front(), shapes[j]) ||
                             inside_shape(shapes[j].vertices.front(), shapes[i]);
        if (overlap) {
          adjacent = true;
          w.notes.push_back("regions '" + table.region_ids[std::min(i, j)] + "' and '" +
                            table.region_ids[std::max(i, j)] + "' overlap; treated as adjacent");
        }
      }
      if (adjacent) {
        w.neighbors[i].push_back(j);
        w.neighbors[j].push_back(i);
      }
    }
  }
  for (auto& nb : w.neighbors) std::sort(nb.begin(), nb.end());
  std::sort(w.notes.begin(), w.notes.end());
  return w;
}

}  // namespace geolens::dataset
