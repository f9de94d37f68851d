#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tightknot/geometry.hpp"

namespace tightknot {

namespace hull_detail {

inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                      const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

struct Face {
  int a, b, c;
  Vec3 normal;
  double offset;
};

inline Face make_face(const std::vector<Vec3>& pts, int a, int b, int c) {
  Face f{a, b, c, Vec3::Zero(), 0.0};
  f.normal = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
  const double n = f.normal.norm();
  if (n > 0.0) f.normal /= n;
  f.offset = f.normal.dot(pts[a]);
  return f;
}

}  // namespace hull_detail

/// Convex hull of a 3D point set. For full-rank input `faces` holds the
/// triangulated boundary; for (near-)planar input `planar` is set and
/// `planar_loop` holds the 2D hull vertex indices in order.
struct ConvexHull {
  std::vector<hull_detail::Face> faces;
  bool planar = false;
  std::vector<int> planar_loop;
  Vec3 plane_u, plane_v, plane_origin;  // basis for the planar case
};

inline ConvexHull convex_hull(const std::vector<Vec3>& pts) {
  using namespace hull_detail;
  if (pts.size() < 3) throw std::invalid_argument("hull needs at least 3 points");
  const int n = static_cast<int>(pts.size());

  Vec3 lo = pts[0], hi = pts[0];
  for (const Vec3& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diag = (hi - lo).norm();
  const double eps = std::max(1e-12, 1e-9 * diag);

  // Seed simplex: two extreme points, then max area, then max volume.
  int i0 = 0;
  for (int i = 1; i < n; ++i)
    if (pts[i].x() < pts[i0].x() ||
        (pts[i].x() == pts[i0].x() &&
         (pts[i].y() < pts[i0].y() ||
          (pts[i].y() == pts[i0].y() && pts[i].z() < pts[i0].z()))))
      i0 = i;
  int i1 = -1;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double d = (pts[i] - pts[i0]).norm();
    if (d > best) {
      best = d;
      i1 = i;
    }
  }
  int i2 = -1;
  best = -1.0;
  const Vec3 dir = (pts[i1] - pts[i0]).normalized();
  for (int i = 0; i < n; ++i) {
    const Vec3 w = pts[i] - pts[i0];
    const double d = (w - w.dot(dir) * dir).norm();
    if (d > best) {
      best = d;
      i2 = i;
    }
  }
  Vec3 nrm = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]);
  int i3 = -1;
  best = eps;
  if (nrm.norm() > 0.0) {
    nrm.normalize();
    for (int i = 0; i < n; ++i) {
      const double d = std::abs(nrm.dot(pts[i] - pts[i0]));
      if (d > best) {
        best = d;
        i3 = i;
      }
    }
  }

  ConvexHull hull;
  if (i3 < 0) {
    // Planar: 2D monotone chain in the plane spanned by (dir, w).
    hull.planar = true;
    hull.plane_origin = pts[i0];
    hull.plane_u = dir;
    Vec3 v = pts[i2] - pts[i0];
    v -= v.dot(dir) * dir;
    hull.plane_v = (v.norm() > 0.0) ? v.normalized() : dir.unitOrthogonal();
    std::vector<std::pair<Eigen::Vector2d, int>> flat(n);
    for (int i = 0; i < n; ++i) {
      const Vec3 w = pts[i] - hull.plane_origin;
      flat[i] = {{w.dot(hull.plane_u), w.dot(hull.plane_v)}, i};
    }
    std::sort(flat.begin(), flat.end(), [](const auto& a, const auto& b) {
      return a.first.x() < b.first.x() ||
             (a.first.x() == b.first.x() && a.first.y() < b.first.y());
    });
    auto cross2 = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                     const Eigen::Vector2d& b) {
      return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
    };
    // Monotone chain: lower hull then upper hull.
    std::vector<int> chain;
    for (int i = 0; i < n; ++i) {
      while (chain.size() >= 2 &&
             cross2(flat[chain[chain.size() - 2]].first,
                    flat[chain[chain.size() - 1]].first, flat[i].first) <= 0.0)
        chain.pop_back();
      chain.push_back(i);
    }
    chain.pop_back();
    const std::size_t mid = chain.size();
    for (int i = n - 1; i >= 0; --i) {
      while (chain.size() >= mid + 2 &&
             cross2(flat[chain[chain.size() - 2]].first,
                    flat[chain[chain.size() - 1]].first, flat[i].first) <= 0.0)
        chain.pop_back();
      chain.push_back(i);
    }
    chain.pop_back();
    hull.planar_loop.reserve(chain.size());
    for (int ci : chain) hull.planar_loop.push_back(flat[ci].second);
    return hull;
  }

  // Full-rank incremental hull.
  if (nrm.dot(pts[i3] - pts[i0]) > 0.0) std::swap(i1, i2);
  std::vector<Face> faces = {make_face(pts, i0, i1, i2), make_face(pts, i0, i2, i3),
                             make_face(pts, i2, i1, i3), make_face(pts, i1, i0, i3)};

  for (int i = 0; i < n; ++i) {
    if (i == i0 || i == i1 || i == i2 || i == i3) continue;
    std::vector<char> visible(faces.size(), 0);
    bool any = false;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (faces[f].normal.dot(pts[i]) > faces[f].offset + eps) {
        visible[f] = 1;
        any = true;
      }
    }
    if (!any) continue;
    // Horizon: directed edges of visible faces whose reverse edge is not in a
    // visible face.
    std::vector<std::pair<int, int>> edges;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!visible[f]) continue;
      const std::array<std::pair<int, int>, 3> es = {
          std::make_pair(faces[f].a, faces[f].b), {faces[f].b, faces[f].c},
          {faces[f].c, faces[f].a}};
      for (const auto& e : es) edges.push_back(e);
    }
    std::vector<std::pair<int, int>> horizon;
    for (const auto& e : edges) {
      bool has_reverse = false;
      for (const auto& e2 : edges)
        if (e2.first == e.second && e2.second == e.first) {
          has_reverse = true;
          break;
        }
      if (!has_reverse) horizon.push_back(e);
    }
    std::vector<Face> next;
    for (std::size_t f = 0; f < faces.size(); ++f)
      if (!visible[f]) next.push_back(faces[f]);
    for (const auto& e : horizon) next.push_back(make_face(pts, e.first, e.second, i));
    faces.swap(next);
  }
  hull.faces = std::move(faces);
  return hull;
}

/// Distance from a point to the hull surface. For planar hulls this is the
/// distance to the boundary loop (so interior points of a flat hull are NOT
/// "on" the hull).
inline double distance_to_hull_surface(const ConvexHull& hull,
                                       const std::vector<Vec3>& pts, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  if (hull.planar) {
    const std::size_t m = hull.planar_loop.size();
    for (std::size_t i = 0; i < m; ++i) {
      const Vec3& a = pts[hull.planar_loop[i]];
      const Vec3& b = pts[hull.planar_loop[(i + 1) % m]];
      const SegmentClosest c = segment_closest(p, p, a, b);
      best = std::min(best, c.dist);
    }
    return best;
  }
  for (const auto& f : hull.faces) {
    const Vec3 q =
        hull_detail::closest_point_on_triangle(p, pts[f.a], pts[f.b], pts[f.c]);
    best = std::min(best, (p - q).norm());
  }
  return best;
}

}  // namespace tightknot
