#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tightknot/geometry.hpp"

namespace tightknot {

/// Radius of the circle tangent to both edges at vertex i, using the shorter
/// adjacent edge: min(l_{i-1}, l_i) / (2 tan(theta_i / 2)). Infinite for
/// straight vertices.
inline std::vector<double> per_vertex_radius(const Polygon& p) {
  const std::vector<double> theta = turning_angles(p);
  std::vector<double> r(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (theta[i] >= M_PI - 1e-12)
      throw std::domain_error("doubled-back edge at vertex " + std::to_string(i));
    const double l = std::min(p.edge_length(p.prev(i)), p.edge_length(i));
    const double t = std::tan(0.5 * theta[i]);
    r[i] = (t <= 0.0) ? std::numeric_limits<double>::infinity() : l / (2.0 * t);
  }
  return r;
}

/// Smallest local radius of curvature proxy over all vertices.
inline double min_rad(const Polygon& p) {
  const std::vector<double> r = per_vertex_radius(p);
  return *std::min_element(r.begin(), r.end());
}

/// A non-excluded edge pair together with its closest-point data.
struct CandidatePair {
  std::size_t edge_a = 0;  // edge_a < edge_b
  std::size_t edge_b = 0;
  double s = 0.0;
  double t = 0.0;
  double dist = 0.0;
};

/// Cyclic index distance between edges.
inline std::size_t edge_index_distance(std::size_t i, std::size_t j, std::size_t n) {
  const std::size_t d = (i < j) ? j - i : i - j;
  return std::min(d, n - d);
}

namespace detail {

/// Exclusion window for a thickness estimate: pairs with index distance at
/// or below the window are controlled by the curvature bound, not by
/// self-contacts.
inline std::size_t exclusion_window(const Polygon& p, double thickness_estimate) {
  const double med = min_edge_length(p);
  const double w = std::ceil(M_PI * std::max(thickness_estimate, 0.0) / med);
  const double capped = std::min(w, static_cast<double>(p.size()));
  return std::max<std::size_t>(1, static_cast<std::size_t>(capped));
}

inline double min_pair_distance_beyond(const Polygon& p, std::size_t window) {
  const std::size_t n = p.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& a0 = p[i];
    const Vec3 a1 = p[p.next(i)];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (edge_index_distance(i, j, n) <= window) continue;
      const SegmentClosest c = segment_closest(a0, a1, p[j], p[p.next(j)]);
      best = std::min(best, c.dist);
    }
  }
  return best;
}

}  // namespace detail

/// Result of the self-distance pass: the converged exclusion window and the
/// doubly-critical self-distance estimate (infinite when every pair is
/// excluded, e.g. for convex curves).
struct SelfDistanceScan {
  std::size_t window = 1;
  double dcsd = std::numeric_limits<double>::infinity();
};

/// Iterates the turning-disk exclusion window to a fixed point, starting from
/// the curvature-only thickness estimate and shrinking it as closer contacts
/// are found.
inline SelfDistanceScan self_distance_scan(const Polygon& p) {
  const double mr = min_rad(p);
  double estimate = mr;
  SelfDistanceScan scan;
  for (int pass = 0; pass < 16; ++pass) {
    scan.window = detail::exclusion_window(p, estimate);
    scan.dcsd = detail::min_pair_distance_beyond(p, scan.window);
    const double next = std::min(mr, 0.5 * scan.dcsd);
    if (next >= estimate - 1e-12) break;
    estimate = next;
  }
  return scan;
}

/// Doubly-critical self-distance: minimum distance over edge pairs outside
/// the turning-disk exclusion window. Returns 0 for self-intersecting input
/// and +infinity when no pair survives the window.
inline double dcsd(const Polygon& p) {
  const double d = self_distance_scan(p).dcsd;
  return (d <= kLengthTol) ? 0.0 : d;
}

enum class Controlling { Kink, Strut };

struct ThicknessBreakdown {
  double min_rad = 0.0;
  double half_dcsd = 0.0;
  double thickness = 0.0;
  Controlling controlling_feature = Controlling::Strut;
  bool embedded = true;
};

/// thickness = min(minRad, dcsd/2); ties resolve to Strut.
inline ThicknessBreakdown thickness_breakdown(const Polygon& p) {
  ThicknessBreakdown out;
  out.min_rad = min_rad(p);
  const double d = dcsd(p);
  out.half_dcsd = 0.5 * d;
  if (d <= kLengthTol) {
    out.thickness = 0.0;
    out.embedded = false;
    out.controlling_feature = Controlling::Strut;
    return out;
  }
  if (out.min_rad < out.half_dcsd) {
    out.thickness = out.min_rad;
    out.controlling_feature = Controlling::Kink;
  } else {
    out.thickness = out.half_dcsd;
    out.controlling_feature = Controlling::Strut;
  }
  return out;
}

inline double thickness(const Polygon& p) { return thickness_breakdown(p).thickness; }

struct RopelengthValues {
  double prop = 0.0;        // polygonal ropelength, length / thickness
  double rop_bound = std::numeric_limits<double>::quiet_NaN();  // see smoothed.hpp
  double resolution = 0.0;  // edges per unit ropelength
};

inline RopelengthValues ropelength(const Polygon& p) {
  const double th = thickness(p);
  if (th <= 0.0) throw std::domain_error("ropelength of non-embedded polygon");
  RopelengthValues out;
  out.prop = polygon_length(p) / th;
  out.resolution = static_cast<double>(p.size()) / out.prop;
  return out;
}

/// Rescales so the polygonal thickness is exactly 1.
inline Polygon normalized_to_unit_thickness(const Polygon& p) {
  const double th = thickness(p);
  if (th <= 0.0) throw std::domain_error("cannot normalize non-embedded polygon");
  return scaled(p, 1.0 / th);
}

}  // namespace tightknot
