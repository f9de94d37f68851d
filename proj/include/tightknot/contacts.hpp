#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "tightknot/geometry.hpp"
#include "tightknot/io.hpp"
#include "tightknot/thickness.hpp"

namespace tightknot {

constexpr double kDefaultStrutGap = 1e-3;     // activation gap for struts
constexpr double kDefaultKinkTol = 1e-4;      // activation tolerance, radians
constexpr double kTubeDiameter = 2.0;

/// Active tube-to-tube contact between two non-adjacent edges.
struct Strut {
  std::size_t edge_a = 0;  // edge_a < edge_b
  std::size_t edge_b = 0;
  double s = 0.0;          // closest point parameter on edge_a
  double t = 0.0;          // closest point parameter on edge_b
  double gap = 0.0;        // distance - 2
};

/// Vertex at (or beyond) the turning-angle bound of the unit tube.
struct Kink {
  std::size_t vertex = 0;
  double excess = 0.0;  // theta - theta_max(mean adjacent edge length)
};

/// Largest turning angle compatible with local radius >= 1 at edge length l.
/// Solves l / (2 tan(theta/2)) = 1.
inline double kink_angle_limit(double edge_length) {
  return 2.0 * std::atan(0.5 * edge_length);
}

/// All non-excluded edge pairs with distance <= 2 + activation_gap.
/// `window` is the converged turning-disk exclusion window; pass the value
/// from self_distance_scan or let the overload compute it.
inline std::vector<Strut> find_struts(const Polygon& p, double activation_gap,
                                      std::size_t window) {
  const std::size_t n = p.size();
  std::vector<Strut> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& a0 = p[i];
    const Vec3 a1 = p[p.next(i)];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (edge_index_distance(i, j, n) <= window) continue;
      const SegmentClosest c = segment_closest(a0, a1, p[j], p[p.next(j)]);
      if (c.dist <= kTubeDiameter + activation_gap)
        out.push_back({i, j, c.s, c.t, c.dist - kTubeDiameter});
    }
  }
  return out;
}

inline std::vector<Strut> find_struts(const Polygon& p,
                                      double activation_gap = kDefaultStrutGap) {
  return find_struts(p, activation_gap, self_distance_scan(p).window);
}

/// Vertices whose turning angle is within activation_tol of the bound (or
/// beyond it).
inline std::vector<Kink> find_kinks(const Polygon& p,
                                    double activation_tol = kDefaultKinkTol) {
  const std::vector<double> theta = turning_angles(p);
  std::vector<Kink> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double mean_l = 0.5 * (p.edge_length(p.prev(i)) + p.edge_length(i));
    const double excess = theta[i] - kink_angle_limit(mean_l);
    if (excess >= -activation_tol) out.push_back({i, excess});
  }
  return out;
}

/// Gradient of total length with respect to every vertex coordinate:
/// unit(v_i - v_{i-1}) + unit(v_i - v_{i+1}) per vertex.
inline Eigen::VectorXd length_gradient(const Polygon& p) {
  validate_polygon(p);
  Eigen::VectorXd g(3 * p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vec3 a = (p[i] - p[p.prev(i)]).normalized();
    const Vec3 b = (p[i] - p[p.next(i)]).normalized();
    g.segment<3>(3 * i) = a + b;
  }
  return g;
}

/// Column-sparse matrix; rows are vertex coordinates, columns are constraint
/// gradients.
struct SparseMatrix {
  struct Entry {
    int row;
    double value;
  };
  int rows = 0;
  std::vector<std::vector<Entry>> cols;

  int col_count() const { return static_cast<int>(cols.size()); }

  double col_dot(int j, const Eigen::VectorXd& x) const {
    double s = 0.0;
    for (const Entry& e : cols[j]) s += e.value * x[e.row];
    return s;
  }

  void add_col_scaled(int j, double w, Eigen::VectorXd& x) const {
    for (const Entry& e : cols[j]) x[e.row] += w * e.value;
  }

  double col_col_dot(int j, int k) const {
    // Entries are sorted by row.
    double s = 0.0;
    std::size_t a = 0, b = 0;
    const auto& cj = cols[j];
    const auto& ck = cols[k];
    while (a < cj.size() && b < ck.size()) {
      if (cj[a].row < ck[b].row)
        ++a;
      else if (cj[a].row > ck[b].row)
        ++b;
      else
        s += cj[a++].value * ck[b++].value;
    }
    return s;
  }

  Eigen::VectorXd multiply(const Eigen::VectorXd& lambda) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(rows);
    for (int j = 0; j < col_count(); ++j) add_col_scaled(j, lambda[j], y);
    return y;
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, col_count());
    for (int j = 0; j < col_count(); ++j)
      for (const Entry& e : cols[j]) m(e.row, j) = e.value;
    return m;
  }
};

/// Active constraints plus the rigidity matrix whose unit-norm columns are
/// their gradients. Strut columns come first, kink columns after, matching
/// the strut/kink vectors.
struct ContactSet {
  std::vector<Strut> struts;
  std::vector<Kink> kinks;
  SparseMatrix rigidity;
  std::vector<double> column_norm;  // gradient norm before unit scaling
};

namespace contact_detail {

inline void push_entries(std::vector<SparseMatrix::Entry>& col, std::size_t vertex,
                         const Vec3& grad) {
  for (int k = 0; k < 3; ++k)
    col.push_back({static_cast<int>(3 * vertex + k), grad[k]});
}

inline void finish_column(std::vector<SparseMatrix::Entry>& col, double& norm_out) {
  std::sort(col.begin(), col.end(),
            [](const SparseMatrix::Entry& a, const SparseMatrix::Entry& b) {
              return a.row < b.row;
            });
  double n2 = 0.0;
  for (const auto& e : col) n2 += e.value * e.value;
  norm_out = std::sqrt(n2);
  if (norm_out > 0.0)
    for (auto& e : col) e.value /= norm_out;
}

/// Gradient of the turning angle at vertex b of the triple (a, b, c), written
/// into ga/gb/gc.
inline void turning_angle_gradient(const Vec3& a, const Vec3& b, const Vec3& c,
                                   Vec3& ga, Vec3& gb, Vec3& gc) {
  const Vec3 u = b - a;
  const Vec3 w = c - b;
  const double lu = u.norm(), lw = w.norm();
  const Vec3 uh = u / lu, wh = w / lw;
  const double cos_t = std::clamp(uh.dot(wh), -1.0, 1.0);
  const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
  if (sin_t < 1e-12) {
    // Straight or doubled-back: angle gradient is not defined; callers only
    // build kink columns at clearly bent vertices.
    ga = gb = gc = Vec3::Zero();
    return;
  }
  const Vec3 du = (cos_t * uh - wh) / (lu * sin_t);  // d theta / d u
  const Vec3 dw = (cos_t * wh - uh) / (lw * sin_t);  // d theta / d w
  ga = -du;
  gb = du - dw;
  gc = dw;
}

}  // namespace contact_detail

/// Builds the rigidity matrix for the given contacts. Each strut column is
/// the gradient of the closest-point distance at frozen (s, t); each kink
/// column is the gradient of the feasibility margin theta_max(mean edge
/// length) - theta. Columns are scaled to unit norm.
inline ContactSet build_rigidity_matrix(const Polygon& p,
                                        std::vector<Strut> struts,
                                        std::vector<Kink> kinks) {
  ContactSet cs;
  cs.struts = std::move(struts);
  cs.kinks = std::move(kinks);
  cs.rigidity.rows = static_cast<int>(3 * p.size());
  cs.rigidity.cols.reserve(cs.struts.size() + cs.kinks.size());
  cs.column_norm.reserve(cs.struts.size() + cs.kinks.size());

  for (const Strut& st : cs.struts) {
    const Vec3 xa = p[st.edge_a] + st.s * p.edge(st.edge_a);
    const Vec3 xb = p[st.edge_b] + st.t * p.edge(st.edge_b);
    const Vec3 d = xa - xb;
    const double dist = d.norm();
    if (dist <= kLengthTol)
      throw std::domain_error("strut with coincident closest points (non-embedded)");
    const Vec3 dh = d / dist;
    std::vector<SparseMatrix::Entry> col;
    col.reserve(12);
    contact_detail::push_entries(col, st.edge_a, (1.0 - st.s) * dh);
    contact_detail::push_entries(col, p.next(st.edge_a), st.s * dh);
    contact_detail::push_entries(col, st.edge_b, -(1.0 - st.t) * dh);
    contact_detail::push_entries(col, p.next(st.edge_b), -st.t * dh);
    double norm = 0.0;
    contact_detail::finish_column(col, norm);
    cs.rigidity.cols.push_back(std::move(col));
    cs.column_norm.push_back(norm);
  }

  for (const Kink& k : cs.kinks) {
    const std::size_t i = k.vertex;
    const Vec3 &a = p[p.prev(i)], &b = p[i], &c = p[p.next(i)];
    Vec3 ta, tb, tc;
    contact_detail::turning_angle_gradient(a, b, c, ta, tb, tc);
    // Margin m = theta_max(mean l) - theta; the theta_max term pulls in the
    // edge-length dependence of the bound.
    const double l_in = (b - a).norm(), l_out = (c - b).norm();
    const double mean_l = 0.5 * (l_in + l_out);
    const double dlim = 1.0 / (1.0 + 0.25 * mean_l * mean_l);  // d theta_max / d l
    const Vec3 uh = (b - a) / l_in, wh = (c - b) / l_out;
    const Vec3 ga = dlim * 0.5 * (-uh) - ta;
    const Vec3 gb = dlim * 0.5 * (uh - wh) - tb;
    const Vec3 gc = dlim * 0.5 * (wh)-tc;
    std::vector<SparseMatrix::Entry> col;
    col.reserve(9);
    contact_detail::push_entries(col, p.prev(i), ga);
    contact_detail::push_entries(col, i, gb);
    contact_detail::push_entries(col, p.next(i), gc);
    double norm = 0.0;
    contact_detail::finish_column(col, norm);
    cs.rigidity.cols.push_back(std::move(col));
    cs.column_norm.push_back(norm);
  }
  return cs;
}

/// Detects contacts with default activation thresholds and assembles the
/// rigidity matrix.
inline ContactSet detect_contacts(const Polygon& p,
                                  double strut_gap = kDefaultStrutGap,
                                  double kink_tol = kDefaultKinkTol) {
  return build_rigidity_matrix(p, find_struts(p, strut_gap), find_kinks(p, kink_tol));
}

inline void write_contacts_csv(std::ostream& os, const ContactSet& cs) {
  os << "type,edge_a,edge_b,s,t,gap_or_excess\n";
  for (const Strut& s : cs.struts)
    os << "strut," << s.edge_a << ',' << s.edge_b << ',' << format_double(s.s)
       << ',' << format_double(s.t) << ',' << format_double(s.gap) << '\n';
  for (const Kink& k : cs.kinks)
    os << "kink," << k.vertex << ",,,," << format_double(k.excess) << '\n';
}

}  // namespace tightknot
