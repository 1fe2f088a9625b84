#include "geolens/dataset/geometry.hpp"

#include <cmath>

namespace geolens::dataset {

namespace {

struct Moments {
  double area = 0.0;  // signed
  double cx = 0.0;    // area-weighted first moments
  double cy = 0.0;
};

// Moments about origin; a nearby origin avoids cancellation in the cross products.
Moments ring_moments(const Ring& ring, LonLat origin = {}) {
  Moments m;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double ax = ring[i].lon - origin.lon, ay = ring[i].lat - origin.lat;
    const double bx = ring[(i + 1) % n].lon - origin.lon, by = ring[(i + 1) % n].lat - origin.lat;
    const double cross = ax * by - bx * ay;
    m.area += cross;
    m.cx += (ax + bx) * cross;
    m.cy += (ay + by) * cross;
  }
  m.area *= 0.5;
  m.cx /= 6.0;
  m.cy /= 6.0;
  return m;
}

}  // namespace

double signed_area(const Ring& ring) { return ring.empty() ? 0.0 : ring_moments(ring, ring.front()).area; }

LonLat representative_centroid(const Geometry& geometry) {
  const Polygon* best = nullptr;
  double best_area = -1.0;
  for (const auto& poly : geometry.polygons) {
    const double a = std::abs(signed_area(poly.exterior));
    if (a > best_area) {
      best_area = a;
      best = &poly;
    }
  }
  if (best == nullptr) return {};

  // Orientation-independent: exterior counts positive, holes negative.
  const LonLat origin = best->exterior.empty() ? LonLat{} : best->exterior.front();
  auto add = [&](Moments& acc, const Ring& ring, double sign) {
    Moments m = ring_moments(ring, origin);
    const double s = (m.area < 0 ? -1.0 : 1.0) * sign;
    acc.area += s * m.area;
    acc.cx += s * m.cx;
    acc.cy += s * m.cy;
  };
  Moments total;
  add(total, best->exterior, 1.0);
  for (const auto& h : best->holes) add(total, h, -1.0);

  if (std::abs(total.area) < 1e-300) {
    LonLat mean;
    for (const auto& p : best->exterior) {
      mean.lon += p.lon;
      mean.lat += p.lat;
    }
    const double k = static_cast<double>(best->exterior.size());
    return {mean.lon / k, mean.lat / k};
  }
  return {origin.lon + total.cx / total.area, origin.lat + total.cy / total.area};
}

}  // namespace geolens::dataset
