#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <variant>
#include <vector>

#include "tightknot/geometry.hpp"
#include "tightknot/thickness.hpp"

namespace tightknot {

// The C1 curve obtained by replacing each corner with a tangent circular arc
// whose radius matches the per-vertex radius, so the tangent length consumed
// on each side is half the shorter adjacent edge. Straight remainders of the
// original edges connect consecutive arcs.

namespace smooth_detail {

struct SegPrim {
  Vec3 a, b;
};

struct ArcPrim {
  Vec3 center;
  double radius = 0.0;
  Vec3 e1, e2;     // orthonormal in-plane basis; point(phi) = c + r(cos phi e1 + sin phi e2)
  double angle = 0.0;
};

struct Primitive {
  std::variant<SegPrim, ArcPrim> shape;
  double arc_start = 0.0;  // cumulative arclength of the start point
  double length = 0.0;

  Vec3 point(double u) const {
    if (const auto* s = std::get_if<SegPrim>(&shape)) return s->a + u * (s->b - s->a);
    const auto& a = std::get<ArcPrim>(shape);
    const double phi = u * a.angle;
    return a.center + a.radius * (std::cos(phi) * a.e1 + std::sin(phi) * a.e2);
  }

  // Exact closest point (parameter in [0,1]) to an external point.
  double closest_param(const Vec3& x) const {
    if (const auto* s = std::get_if<SegPrim>(&shape)) {
      const Vec3 d = s->b - s->a;
      const double dd = d.squaredNorm();
      if (dd <= 0.0) return 0.0;
      return std::clamp((x - s->a).dot(d) / dd, 0.0, 1.0);
    }
    const auto& a = std::get<ArcPrim>(shape);
    const Vec3 w = x - a.center;
    const double al = w.dot(a.e1);
    const double be = w.dot(a.e2);
    if (al * al + be * be < 1e-24) return 0.0;
    const double phi = std::atan2(be, al);
    if (phi >= 0.0 && phi <= a.angle) return phi / a.angle;
    // Clamp to the nearer endpoint.
    const double d0 = (x - point(0.0)).squaredNorm();
    const double d1 = (x - point(1.0)).squaredNorm();
    return d0 <= d1 ? 0.0 : 1.0;
  }

  // Loose bounding sphere for pair pruning.
  void bounding_sphere(Vec3& c, double& r) const {
    const Vec3 p0 = point(0.0), p1 = point(1.0), pm = point(0.5);
    c = (p0 + p1 + pm) / 3.0;
    r = std::sqrt(std::max({(p0 - c).squaredNorm(), (p1 - c).squaredNorm(),
                            (pm - c).squaredNorm()})) +
        0.26 * length;  // sag margin; chord/arc deviation is below length/4
  }
};

struct SplicedCurve {
  std::vector<Primitive> prims;
  double total_length = 0.0;
  double min_arc_radius = std::numeric_limits<double>::infinity();
};

inline SplicedCurve build_spliced(const Polygon& p) {
  const std::vector<double> theta = turning_angles(p);
  const std::vector<double> radius = per_vertex_radius(p);
  const std::size_t n = p.size();

  std::vector<double> tangent_offset(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (theta[i] > 1e-9)
      tangent_offset[i] = 0.5 * std::min(p.edge_length(p.prev(i)), p.edge_length(i));

  SplicedCurve curve;
  double cum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (theta[i] > 1e-9) {
      const Vec3 u_in = (p[i] - p[p.prev(i)]).normalized();
      const Vec3 u_out = (p[p.next(i)] - p[i]).normalized();
      Vec3 n0 = u_out - u_out.dot(u_in) * u_in;
      n0.normalize();
      ArcPrim arc;
      arc.radius = radius[i];
      const Vec3 t0 = p[i] - tangent_offset[i] * u_in;
      arc.center = t0 + arc.radius * n0;
      arc.e1 = -n0;
      arc.e2 = u_in;
      arc.angle = theta[i];
      Primitive prim;
      prim.shape = arc;
      prim.arc_start = cum;
      prim.length = arc.radius * arc.angle;
      curve.min_arc_radius = std::min(curve.min_arc_radius, arc.radius);
      cum += prim.length;
      curve.prims.push_back(prim);
    }
    const double straight = p.edge_length(i) - tangent_offset[i] - tangent_offset[p.next(i)];
    if (straight > 1e-9) {
      const Vec3 dir = p.edge(i).normalized();
      SegPrim seg;
      seg.a = p[i] + tangent_offset[i] * dir;
      seg.b = p[p.next(i)] - tangent_offset[p.next(i)] * dir;
      Primitive prim;
      prim.shape = seg;
      prim.arc_start = cum;
      prim.length = straight;
      cum += straight;
      curve.prims.push_back(prim);
    }
  }
  curve.total_length = cum;
  return curve;
}

/// Local minimum of the distance between two primitives by alternating exact
/// projections from several seeds.
inline double primitive_distance(const Primitive& a, const Primitive& b) {
  double best = std::numeric_limits<double>::infinity();
  for (int seed = 0; seed < 5; ++seed) {
    double u = seed / 4.0;
    Vec3 x = a.point(u);
    double v = b.closest_param(x);
    for (int it = 0; it < 40; ++it) {
      const Vec3 y = b.point(v);
      const double u2 = a.closest_param(y);
      const Vec3 x2 = a.point(u2);
      const double v2 = b.closest_param(x2);
      if (std::abs(u2 - u) + std::abs(v2 - v) < 1e-13) {
        u = u2;
        v = v2;
        break;
      }
      u = u2;
      v = v2;
    }
    best = std::min(best, (a.point(u) - b.point(v)).norm());
  }
  return best;
}

/// Cyclic gap between two arclength intervals along the closed curve.
inline double interval_gap(double s0, double l0, double s1, double l1, double total) {
  const double e0 = s0 + l0;
  const double e1 = s1 + l1;
  double g1 = s1 - e0;  // forward from a to b
  if (g1 < 0.0) g1 += total;
  double g2 = s0 - e1;  // forward from b to a
  if (g2 < 0.0) g2 += total;
  const double g = std::min(g1, g2);
  // Overlapping or touching intervals have zero gap.
  return (g >= total - (l0 + l1)) ? 0.0 : g;
}

inline double spliced_self_distance(const SplicedCurve& c, double t_est) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t m = c.prims.size();
  std::vector<Vec3> bc(m);
  std::vector<double> br(m);
  for (std::size_t i = 0; i < m; ++i) c.prims[i].bounding_sphere(bc[i], br[i]);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double gap = interval_gap(c.prims[i].arc_start, c.prims[i].length,
                                      c.prims[j].arc_start, c.prims[j].length,
                                      c.total_length);
      if (gap <= M_PI * t_est) continue;
      if ((bc[i] - bc[j]).norm() - br[i] - br[j] >= best) continue;
      best = std::min(best, primitive_distance(c.prims[i], c.prims[j]));
    }
  }
  return best;
}

}  // namespace smooth_detail

/// Length of the arc-spliced C1 curve divided by its measured thickness.
/// This is an upper bound for the minimum ropelength of the knot type.
inline double smoothed_rop_bound(const Polygon& p) {
  const ThicknessBreakdown tb = thickness_breakdown(p);
  if (!tb.embedded) throw std::domain_error("smoothed bound of non-embedded polygon");

  const smooth_detail::SplicedCurve curve = smooth_detail::build_spliced(p);
  double estimate = curve.min_arc_radius;
  double th = estimate;
  for (int pass = 0; pass < 16; ++pass) {
    const double d = smooth_detail::spliced_self_distance(curve, estimate);
    th = std::min(curve.min_arc_radius, 0.5 * d);
    if (th >= estimate - 1e-12) break;
    estimate = th;
  }
  if (!(th > 0.0)) throw std::domain_error("spliced curve is not embedded");
  return curve.total_length / th;
}

}  // namespace tightknot
