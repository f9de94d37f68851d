#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace tightknot {

using Vec3 = Eigen::Vector3d;

constexpr double kLengthTol = 1e-10;  // absolute tolerance on lengths

/// Closed polygonal space curve. Vertex i connects to vertex i+1, and the
/// last vertex connects back to the first. The tube radius convention is 1,
/// so all lengths are in tube-radius units.
class Polygon {
 public:
  Polygon() = default;
  explicit Polygon(std::vector<Vec3> vertices) : v_(std::move(vertices)) {}

  std::size_t size() const { return v_.size(); }
  const Vec3& operator[](std::size_t i) const { return v_[i]; }
  Vec3& operator[](std::size_t i) { return v_[i]; }

  const std::vector<Vec3>& vertices() const { return v_; }
  std::vector<Vec3>& vertices() { return v_; }

  std::size_t next(std::size_t i) const { return i + 1 == v_.size() ? 0 : i + 1; }
  std::size_t prev(std::size_t i) const { return i == 0 ? v_.size() - 1 : i - 1; }

  // Edge i runs from vertex i to vertex i+1 (mod n).
  Vec3 edge(std::size_t i) const { return v_[next(i)] - v_[i]; }
  double edge_length(std::size_t i) const { return edge(i).norm(); }

 private:
  std::vector<Vec3> v_;
};

/// Throws std::invalid_argument unless the polygon has at least 3 vertices,
/// finite coordinates, and no zero-length edge.
inline void validate_polygon(const Polygon& p) {
  if (p.size() < 3)
    throw std::invalid_argument("polygon needs at least 3 vertices, got " +
                                std::to_string(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!p[i].allFinite())
      throw std::invalid_argument("polygon vertex " + std::to_string(i) +
                                  " has non-finite coordinates");
    if (p.edge_length(i) <= kLengthTol)
      throw std::invalid_argument("polygon edge " + std::to_string(i) +
                                  " is degenerate (zero length)");
  }
}

inline double polygon_length(const Polygon& p) {
  validate_polygon(p);
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += p.edge_length(i);
  return total;
}

/// Turning angle at each vertex: the angle in [0, pi) between the incoming
/// and outgoing edge directions.
inline std::vector<double> turning_angles(const Polygon& p) {
  validate_polygon(p);
  std::vector<double> angles(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vec3 in = p[i] - p[p.prev(i)];
    const Vec3 out = p[p.next(i)] - p[i];
    angles[i] = std::atan2(in.cross(out).norm(), in.dot(out));
  }
  return angles;
}

inline double min_edge_length(const Polygon& p) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) m = std::min(m, p.edge_length(i));
  return m;
}

inline double bounding_box_diagonal(const Polygon& p) {
  Vec3 lo = p[0], hi = p[0];
  for (std::size_t i = 1; i < p.size(); ++i) {
    lo = lo.cwiseMin(p[i]);
    hi = hi.cwiseMax(p[i]);
  }
  return (hi - lo).norm();
}

inline Vec3 centroid(const Polygon& p) {
  Vec3 c = Vec3::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) c += p[i];
  return c / static_cast<double>(p.size());
}

// --- rigid motions and reflections -------------------------------------

inline Polygon translated(const Polygon& p, const Vec3& t) {
  Polygon q = p;
  for (std::size_t i = 0; i < q.size(); ++i) q[i] += t;
  return q;
}

inline Polygon scaled(const Polygon& p, double s) {
  Polygon q = p;
  for (std::size_t i = 0; i < q.size(); ++i) q[i] *= s;
  return q;
}

inline Polygon rotated(const Polygon& p, const Eigen::Matrix3d& rot) {
  Polygon q = p;
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = rot * p[i];
  return q;
}

/// Mirror image through the xy-plane.
inline Polygon mirrored(const Polygon& p) {
  Polygon q = p;
  for (std::size_t i = 0; i < q.size(); ++i) q[i].z() = -q[i].z();
  return q;
}

/// Orientation reversal; the vertex set is unchanged.
inline Polygon reversed(const Polygon& p) {
  std::vector<Vec3> w(p.vertices().rbegin(), p.vertices().rend());
  return Polygon(std::move(w));
}

// --- closest points between segments ------------------------------------

struct SegmentClosest {
  double s = 0.0;    // parameter on segment a
  double t = 0.0;    // parameter on segment b
  double dist = 0.0;
};

/// Closest points between segments [a0,a1] and [b0,b1], parameters clamped
/// to [0,1]. Deterministic for parallel segments.
inline SegmentClosest segment_closest(const Vec3& a0, const Vec3& a1,
                                      const Vec3& b0, const Vec3& b1) {
  const Vec3 d1 = a1 - a0;
  const Vec3 d2 = b1 - b0;
  const Vec3 r = a0 - b0;
  const double A = d1.squaredNorm();
  const double E = d2.squaredNorm();
  const double F = d2.dot(r);
  const double C = d1.dot(r);
  const double B = d1.dot(d2);
  const double den = A * E - B * B;

  double s = 0.0;
  // Parallel (or nearly): pick the s that centers the overlap so the result
  // does not depend on endpoint ordering noise.
  if (den > 1e-14 * A * E) {
    s = std::clamp((B * F - C * E) / den, 0.0, 1.0);
  } else if (A > 0.0) {
    const double lo = std::clamp(-C / A, 0.0, 1.0);
    const double hi = std::clamp((B - C) / A, 0.0, 1.0);
    s = 0.5 * (lo + hi);
  }
  double t = (E > 0.0) ? (B * s + F) / E : 0.0;
  if (t < 0.0) {
    t = 0.0;
    s = (A > 0.0) ? std::clamp(-C / A, 0.0, 1.0) : 0.0;
  } else if (t > 1.0) {
    t = 1.0;
    s = (A > 0.0) ? std::clamp((B - C) / A, 0.0, 1.0) : 0.0;
  }
  SegmentClosest out;
  out.s = s;
  out.t = t;
  out.dist = ((a0 + s * d1) - (b0 + t * d2)).norm();
  return out;
}

// --- resampling ----------------------------------------------------------

/// Redistributes n vertices at equal arc-length spacing along the polyline,
/// keeping vertex 0 as the anchor. Edge lengths of the result are equal up
/// to corner-chord error.
inline Polygon resample_equilateral(const Polygon& p, std::size_t n) {
  validate_polygon(p);
  if (n < 3) throw std::invalid_argument("resample needs n >= 3");
  const std::size_t m = p.size();
  std::vector<double> cum(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) cum[i + 1] = cum[i] + p.edge_length(i);
  const double total = cum[m];
  std::vector<Vec3> out(n);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double target = total * static_cast<double>(k) / static_cast<double>(n);
    while (seg + 1 < m && cum[seg + 1] < target) ++seg;
    const double local = (target - cum[seg]) / (cum[seg + 1] - cum[seg]);
    out[k] = p[seg] + local * (p[p.next(seg)] - p[seg]);
  }
  return Polygon(std::move(out));
}

}  // namespace tightknot
