#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "tightknot/contacts.hpp"
#include "tightknot/geometry.hpp"
#include "tightknot/snnls.hpp"
#include "tightknot/thickness.hpp"

namespace tightknot {

struct TightenConfig {
  double target_residual = 0.01;
  int max_steps = 20000;
  double initial_step = 0.1;    // cap on the max per-vertex displacement
  int resample_every = 100;     // accepted steps between equilateral resamples
  double target_resolution = 8.0;
  unsigned long rng_seed = 0;

  void validate() const {
    if (!(target_residual > 0.0 && target_residual < 1.0))
      throw std::invalid_argument("target_residual must be in (0,1)");
    if (target_resolution < 8.0)
      throw std::invalid_argument("target_resolution must be at least 8");
    if (max_steps < 1 || initial_step <= 0.0 || resample_every < 1)
      throw std::invalid_argument("bad tighten configuration");
  }
};

struct StepRecord {
  int step = 0;
  double length = 0.0;     // after renormalization to unit thickness
  double thickness = 1.0;  // measured before renormalization
  double residual = 1.0;   // residual fraction of the pre-move state
  std::size_t strut_count = 0;
  std::size_t kink_count = 0;
  bool accepted = false;
};

struct TightenResult {
  Polygon polygon;  // normalized to thickness 1
  std::vector<StepRecord> trace;
  bool converged = false;
  int steps_taken = 0;
  double final_residual = 1.0;

  double prop() const { return polygon_length(polygon); }  // thickness is 1
};

struct CorrectionFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace tighten_detail {

struct Violation {
  bool is_strut = false;
  std::size_t a = 0, b = 0;  // edges for struts; (vertex, unused) for kinks
  double s = 0.0, t = 0.0;
  double margin = 0.0;  // negative = violated
};

/// Feasibility margins below zero: strut gaps and the kink margin measured
/// against the shorter adjacent edge, so that margin >= 0 at every vertex
/// and gap >= 0 on every pair implies polygonal thickness >= 1.
inline std::vector<Violation> find_violations(const Polygon& p, std::size_t window) {
  std::vector<Violation> out;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& a0 = p[i];
    const Vec3 a1 = p[p.next(i)];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (edge_index_distance(i, j, n) <= window) continue;
      const SegmentClosest c = segment_closest(a0, a1, p[j], p[p.next(j)]);
      if (c.dist < kTubeDiameter)
        out.push_back({true, i, j, c.s, c.t, c.dist - kTubeDiameter});
    }
  }
  const std::vector<double> theta = turning_angles(p);
  for (std::size_t i = 0; i < n; ++i) {
    const double lmin = std::min(p.edge_length(p.prev(i)), p.edge_length(i));
    const double margin = kink_angle_limit(lmin) - theta[i];
    if (margin < 0.0) out.push_back({false, i, 0, 0.0, 0.0, margin});
  }
  return out;
}

inline double worst_margin(const std::vector<Violation>& v) {
  double w = 0.0;
  for (const auto& x : v) w = std::min(w, x.margin);
  return w;
}

/// Minimum-norm displacement with J^T delta = -margins, built from the
/// unnormalized constraint gradients.
inline void apply_newton_correction(Polygon& p, const std::vector<Violation>& viol) {
  const int nc = static_cast<int>(viol.size());
  std::vector<Eigen::VectorXd> grads;  // dense per-constraint gradients (3n)
  grads.reserve(nc);
  const int dim = static_cast<int>(3 * p.size());
  for (const Violation& v : viol) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    if (v.is_strut) {
      const Vec3 xa = p[v.a] + v.s * p.edge(v.a);
      const Vec3 xb = p[v.b] + v.t * p.edge(v.b);
      const double dist = (xa - xb).norm();
      if (dist <= kLengthTol) throw CorrectionFailed("coincident strut points");
      const Vec3 dh = (xa - xb) / dist;
      g.segment<3>(3 * v.a) = (1.0 - v.s) * dh;
      g.segment<3>(3 * p.next(v.a)) = v.s * dh;
      g.segment<3>(3 * v.b) = -(1.0 - v.t) * dh;
      g.segment<3>(3 * p.next(v.b)) = -v.t * dh;
    } else {
      const std::size_t i = v.a;
      Vec3 ta, tb, tc;
      contact_detail::turning_angle_gradient(p[p.prev(i)], p[i], p[p.next(i)], ta,
                                             tb, tc);
      const double l_in = p.edge_length(p.prev(i));
      const double l_out = p.edge_length(i);
      const bool in_shorter = l_in <= l_out;
      const double lmin = in_shorter ? l_in : l_out;
      const double dlim = 1.0 / (1.0 + 0.25 * lmin * lmin);
      const Vec3 uh = (p[i] - p[p.prev(i)]) / l_in;
      const Vec3 wh = (p[p.next(i)] - p[i]) / l_out;
      // margin = theta_max(min edge) - theta
      if (in_shorter) {
        g.segment<3>(3 * p.prev(i)) = -dlim * uh - ta;
        g.segment<3>(3 * i) = dlim * uh - tb;
        g.segment<3>(3 * p.next(i)) = -tc;
      } else {
        g.segment<3>(3 * p.prev(i)) = -ta;
        g.segment<3>(3 * i) = -dlim * wh - tb;
        g.segment<3>(3 * p.next(i)) = dlim * wh - tc;
      }
    }
    grads.push_back(std::move(g));
  }

  Eigen::MatrixXd gram(nc, nc);
  Eigen::VectorXd rhs(nc);
  for (int i = 0; i < nc; ++i) {
    rhs(i) = -viol[i].margin;
    for (int j = 0; j <= i; ++j) {
      gram(i, j) = grads[i].dot(grads[j]);
      gram(j, i) = gram(i, j);
    }
    gram(i, i) += 1e-10;  // ridge for near-duplicate contacts
  }
  const Eigen::VectorXd w = gram.ldlt().solve(rhs);
  for (std::size_t i = 0; i < p.size(); ++i) {
    Vec3 delta = Vec3::Zero();
    for (int c = 0; c < nc; ++c) delta += w(c) * grads[c].segment<3>(3 * i);
    p[i] += delta;
  }
}

}  // namespace tighten_detail

/// Removes constraint violations (negative strut gaps, over-bent vertices)
/// by Newton iterations on the linearized constraints. Throws
/// CorrectionFailed if the worst violation does not come under 1e-6 within
/// 10 iterations or grows along the way.
inline Polygon correct_constraints(const Polygon& input) {
  constexpr double kTol = 1e-6;
  Polygon p = input;
  const std::size_t window = self_distance_scan(p).window;
  double prev_worst = -std::numeric_limits<double>::infinity();
  for (int pass = 0; pass < 10; ++pass) {
    const auto viol = tighten_detail::find_violations(p, window);
    const double worst = tighten_detail::worst_margin(viol);
    if (worst >= -kTol) return p;
    if (pass > 0 && worst < 2.0 * prev_worst)
      throw CorrectionFailed("constraint correction diverging");
    prev_worst = worst;
    tighten_detail::apply_newton_correction(p, viol);
  }
  const double final_worst =
      tighten_detail::worst_margin(tighten_detail::find_violations(p, window));
  if (final_worst < -kTol)
    throw CorrectionFailed("constraint correction did not converge");
  return p;
}

struct StepOutcome {
  Polygon polygon;  // next state (normalized) when accepted
  StepRecord record;
};

/// One descent attempt from a unit-thickness state: resolve the length
/// gradient against the active contacts, move along the resolved direction
/// with the given max per-vertex displacement, correct, renormalize, and
/// accept only if the length strictly decreased with thickness intact.
inline StepOutcome step_once(const Polygon& p, double step_size) {
  StepOutcome out;
  const double old_length = polygon_length(p);

  const SelfDistanceScan scan = self_distance_scan(p);
  std::vector<Strut> struts = find_struts(p, kDefaultStrutGap, scan.window);
  std::vector<Kink> kinks = find_kinks(p, kDefaultKinkTol);
  out.record.strut_count = struts.size();
  out.record.kink_count = kinks.size();
  const ContactSet cs = build_rigidity_matrix(p, std::move(struts), std::move(kinks));
  const Eigen::VectorXd g = length_gradient(p);

  Eigen::VectorXd resolved;
  if (cs.rigidity.col_count() == 0) {
    resolved = g;
    out.record.residual = 1.0;
  } else {
    SnnlsSolution sol = solve_snnls(cs.rigidity, g);
    resolved = std::move(sol.resolved);
    out.record.residual = sol.residual_fraction;
  }

  double max_vertex = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    max_vertex = std::max(max_vertex, resolved.segment<3>(3 * i).norm());
  out.record.length = old_length;
  out.record.accepted = false;
  out.polygon = p;
  if (max_vertex < 1e-15) return out;  // nothing left to resolve

  Polygon trial = p;
  const double scale = step_size / max_vertex;
  for (std::size_t i = 0; i < trial.size(); ++i)
    trial[i] -= scale * resolved.segment<3>(3 * i);

  try {
    trial = correct_constraints(trial);
  } catch (const CorrectionFailed&) {
    return out;
  }

  const double th = thickness(trial);
  out.record.thickness = th;
  if (th < 1.0 - 1e-6) return out;  // tube integrity lost: reject

  Polygon renorm = scaled(trial, 1.0 / th);
  const double new_length = polygon_length(renorm);
  if (new_length >= old_length) return out;

  out.record.length = new_length;
  out.record.accepted = true;
  out.polygon = std::move(renorm);
  return out;
}

/// Constrained gradient descent until the residual target, a length plateau,
/// a stall, or the step budget. The returned polygon has thickness 1.
inline TightenResult tighten(const Polygon& start, const TightenConfig& cfg) {
  cfg.validate();
  TightenResult result;

  Polygon p = resample_equilateral(start, start.size());
  p = correct_constraints(p);
  p = normalized_to_unit_thickness(p);

  double step_size = cfg.initial_step;
  int consec_accept = 0, consec_reject = 0;
  int accepted_since_resample = 0;
  std::vector<double> length_history;
  length_history.push_back(polygon_length(p));

  int step = 0;
  for (; step < cfg.max_steps; ++step) {
    StepOutcome o = step_once(p, step_size);
    o.record.step = step;
    result.trace.push_back(o.record);

    if (o.record.accepted) {
      p = std::move(o.polygon);
      consec_reject = 0;
      if (++consec_accept >= 5) {
        step_size = std::min(2.0 * step_size, cfg.initial_step);
        consec_accept = 0;
      }
      length_history.push_back(o.record.length);
      if (o.record.residual <= cfg.target_residual) {
        ++step;
        break;
      }
      if (++accepted_since_resample >= cfg.resample_every) {
        accepted_since_resample = 0;
        try {
          Polygon r = resample_equilateral(p, p.size());
          r = correct_constraints(r);
          p = normalized_to_unit_thickness(r);
        } catch (const CorrectionFailed&) {
          // keep the unresampled polygon and carry on
        }
      }
    } else {
      consec_accept = 0;
      step_size *= 0.5;
      if (++consec_reject >= 10) {
        ++step;
        break;  // stalled
      }
    }

    // Plateau: relative length decrease below 1e-9 over the last 200 steps.
    const std::size_t h = length_history.size();
    if (h > 200) {
      const double then = length_history[h - 201];
      const double now = length_history[h - 1];
      if ((then - now) / then < 1e-9) {
        ++step;
        break;
      }
    }
  }

  result.steps_taken = step;
  result.final_residual = residual_of(p);
  result.converged = result.final_residual <= cfg.target_residual;
  result.polygon = std::move(p);
  return result;
}

/// Randomized exploration: pushes the polygon around a random torus axis,
/// resolving the motion against the tube constraints so the output stays
/// embedded. Deterministic for a given seed; vertex count is unchanged.
inline Polygon mangle(const Polygon& start, unsigned long seed, int steps) {
  Polygon p = normalized_to_unit_thickness(start);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> speed(0.5, 2.0);

  Vec3 axis = Vec3::UnitZ(), center = Vec3::Zero();
  double omega = 1.0;
  constexpr double kMangleStep = 0.1;

  for (int it = 0; it < steps; ++it) {
    if (it % 50 == 0) {
      axis = Vec3(unit(rng), unit(rng), unit(rng));
      if (axis.norm() < 1e-3) axis = Vec3::UnitZ();
      axis.normalize();
      const double r = 0.25 * bounding_box_diagonal(p);
      center = centroid(p) + r * Vec3(unit(rng), unit(rng), unit(rng));
      omega = speed(rng);
    }

    Eigen::VectorXd field(3 * p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
      field.segment<3>(3 * i) = omega * axis.cross(p[i] - center);

    const ContactSet cs = detect_contacts(p);
    Eigen::VectorXd motion = field;
    if (cs.rigidity.col_count() > 0) {
      const SnnlsSolution sol = solve_snnls(cs.rigidity, -field);
      motion = field + cs.rigidity.multiply(sol.lambda);
    }
    double max_vertex = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      max_vertex = std::max(max_vertex, motion.segment<3>(3 * i).norm());
    if (max_vertex < 1e-12) continue;

    Polygon trial = p;
    const double scale = kMangleStep / max_vertex;
    for (std::size_t i = 0; i < trial.size(); ++i)
      trial[i] += scale * motion.segment<3>(3 * i);
    try {
      trial = correct_constraints(trial);
    } catch (const CorrectionFailed&) {
      return p;  // last valid polygon
    }
    const double th = thickness(trial);
    if (th <= 0.0) return p;
    p = scaled(trial, 1.0 / th);
  }
  return p;
}

/// Tightens every start with a capped coarse pass and returns the result
/// with the smallest ropelength; ties break to the lowest start index.
inline TightenResult best_of_ensemble(const std::vector<Polygon>& starts,
                                      const TightenConfig& cfg) {
  if (starts.empty()) throw std::invalid_argument("empty ensemble");
  TightenConfig coarse = cfg;
  coarse.max_steps = std::min(cfg.max_steps, 600);
  std::optional<TightenResult> best;
  for (const Polygon& s : starts) {
    TightenResult r = tighten(s, coarse);
    if (!best || r.prop() < best->prop() - 1e-12) best = std::move(r);
  }
  return std::move(*best);
}

}  // namespace tightknot
