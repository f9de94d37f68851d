#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tightknot/contacts.hpp"

namespace tightknot {

struct SnnlsSolution {
  Eigen::VectorXd lambda;             // nonnegative contact forces, one per column
  Eigen::VectorXd resolved;           // g - A lambda
  double residual_fraction = 1.0;     // |resolved| / |g|
  bool converged = true;
  int iterations = 0;
};

namespace snnls_detail {

/// Dense Cholesky of the active-set Gram matrix with O(p^2) column append.
/// Removal triggers a refactor, which is the rare path.
class ActiveGram {
 public:
  explicit ActiveGram(const SparseMatrix& A) : A_(&A) {}

  int size() const { return static_cast<int>(active_.size()); }
  const std::vector<int>& active() const { return active_; }

  // Returns false if the new column is numerically dependent on the set.
  bool push(int col) {
    const int p = size();
    grow_capacity(p + 1);
    for (int i = 0; i < p; ++i) G_(i, p) = A_->col_col_dot(active_[i], col);
    G_(p, p) = A_->col_col_dot(col, col);
    // New Cholesky row: L l = G(0..p-1, p), d^2 = G(p,p) - l.l
    Eigen::VectorXd l(p);
    for (int i = 0; i < p; ++i) {
      double s = G_(i, p);
      for (int k = 0; k < i; ++k) s -= L_(i, k) * l(k);
      l(i) = s / L_(i, i);
    }
    const double d2 = G_(p, p) - l.squaredNorm();
    if (d2 <= 1e-12 * std::max(1.0, G_(p, p))) return false;
    for (int i = 0; i < p; ++i) {
      L_(p, i) = l(i);
      G_(p, i) = G_(i, p);
    }
    L_(p, p) = std::sqrt(d2);
    active_.push_back(col);
    return true;
  }

  void remove(const std::vector<int>& positions_sorted_desc) {
    for (int pos : positions_sorted_desc) active_.erase(active_.begin() + pos);
    refactor();
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    const int p = size();
    Eigen::VectorXd y(p);
    for (int i = 0; i < p; ++i) {
      double s = rhs(i);
      for (int k = 0; k < i; ++k) s -= L_(i, k) * y(k);
      y(i) = s / L_(i, i);
    }
    Eigen::VectorXd x(p);
    for (int i = p - 1; i >= 0; --i) {
      double s = y(i);
      for (int k = i + 1; k < p; ++k) s -= L_(k, i) * x(k);
      x(i) = s / L_(i, i);
    }
    return x;
  }

 private:
  void grow_capacity(int need) {
    if (G_.rows() >= need) return;
    const int cap = std::max(need, static_cast<int>(G_.rows()) * 2 + 8);
    Eigen::MatrixXd g2 = Eigen::MatrixXd::Zero(cap, cap);
    Eigen::MatrixXd l2 = Eigen::MatrixXd::Zero(cap, cap);
    const int p = size();
    g2.topLeftCorner(p, p) = G_.topLeftCorner(p, p);
    l2.topLeftCorner(p, p) = L_.topLeftCorner(p, p);
    G_.swap(g2);
    L_.swap(l2);
  }

  void refactor() {
    const int p = size();
    grow_capacity(p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j <= i; ++j) {
        G_(i, j) = A_->col_col_dot(active_[i], active_[j]);
        G_(j, i) = G_(i, j);
      }
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < i; ++j) {
        double s = G_(i, j);
        for (int k = 0; k < j; ++k) s -= L_(i, k) * L_(j, k);
        L_(i, j) = s / L_(j, j);
      }
      double s = G_(i, i);
      for (int k = 0; k < i; ++k) s -= L_(i, k) * L_(i, k);
      L_(i, i) = std::sqrt(std::max(s, 1e-300));
    }
  }

  const SparseMatrix* A_;
  std::vector<int> active_;
  Eigen::MatrixXd G_;
  Eigen::MatrixXd L_;
};

}  // namespace snnls_detail

/// Lawson-Hanson style active-set solve of min |A lambda - g| over lambda >= 0.
/// Deterministic: the entering column is the lowest index within 1e-12 of the
/// maximum correlation, and a column removed in one iteration may not
/// immediately re-enter on the next.
inline SnnlsSolution solve_snnls(const SparseMatrix& A, const Eigen::VectorXd& g) {
  const int m = A.rows;
  const int k = A.col_count();
  if (g.size() != m) throw std::invalid_argument("snnls: dimension mismatch");

  SnnlsSolution sol;
  sol.lambda = Eigen::VectorXd::Zero(k);
  const double gnorm = g.norm();
  if (k == 0 || gnorm == 0.0) {
    sol.resolved = g;
    sol.residual_fraction = (gnorm == 0.0) ? 0.0 : 1.0;
    return sol;
  }

  snnls_detail::ActiveGram gram(A);
  std::vector<char> in_active(k, 0), blocked(k, 0), just_removed(k, 0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(k);  // dense copy of lambda
  Eigen::VectorXd atg(k);
  for (int j = 0; j < k; ++j) atg(j) = A.col_dot(j, g);

  const double entry_tol = 1e-11 * gnorm;
  const int max_iter = 50 * k;
  int iter = 0;
  bool converged = false;

  auto rhs_for_active = [&]() {
    const auto& act = gram.active();
    Eigen::VectorXd rhs(act.size());
    for (std::size_t i = 0; i < act.size(); ++i) rhs(i) = atg(act[i]);
    return rhs;
  };

  while (iter < max_iter) {
    ++iter;
    // Correlations of the residual with inactive columns.
    Eigen::VectorXd Ax = Eigen::VectorXd::Zero(m);
    for (int j : gram.active()) A.add_col_scaled(j, x(j), Ax);
    const Eigen::VectorXd r = g - Ax;
    int enter = -1;
    double wmax = entry_tol;
    for (int j = 0; j < k; ++j) {
      if (in_active[j] || blocked[j] || just_removed[j]) continue;
      const double w = A.col_dot(j, r);
      if (w > wmax + 1e-12) {
        wmax = w;
        enter = j;
      }
    }
    std::fill(just_removed.begin(), just_removed.end(), 0);
    if (enter < 0) {
      converged = true;
      break;
    }
    if (!gram.push(enter)) {
      blocked[enter] = 1;  // dependent column; unblocked when the set changes
      continue;
    }
    in_active[enter] = 1;
    std::fill(blocked.begin(), blocked.end(), 0);

    // Inner loop: keep the unconstrained active solve feasible.
    while (true) {
      const Eigen::VectorXd z = gram.solve(rhs_for_active());
      const auto& act = gram.active();
      bool all_positive = true;
      double alpha = 1.0;
      for (std::size_t i = 0; i < act.size(); ++i) {
        if (z(i) <= 0.0) {
          all_positive = false;
          const double xi = x(act[i]);
          if (xi - z(i) > 0.0) alpha = std::min(alpha, xi / (xi - z(i)));
        }
      }
      if (all_positive) {
        for (std::size_t i = 0; i < act.size(); ++i) x(act[i]) = z(i);
        break;
      }
      std::vector<int> drop;
      for (std::size_t i = 0; i < act.size(); ++i) {
        const double xnew = x(act[i]) + alpha * (z(i) - x(act[i]));
        x(act[i]) = xnew;
        if (z(i) <= 0.0 && xnew <= 1e-14) drop.push_back(static_cast<int>(i));
      }
      if (drop.empty()) {
        // Numerical stall: drop the most negative direction.
        int worst = 0;
        for (std::size_t i = 1; i < act.size(); ++i)
          if (z(i) < z(worst)) worst = static_cast<int>(i);
        drop.push_back(worst);
      }
      std::sort(drop.rbegin(), drop.rend());
      for (int pos : drop) {
        const int col = act[pos];
        in_active[col] = 0;
        just_removed[col] = 1;
        x(col) = 0.0;
      }
      gram.remove(drop);
      std::fill(blocked.begin(), blocked.end(), 0);
      if (gram.size() == 0) break;
      ++iter;
      if (iter >= max_iter) break;
    }
  }

  // One step of iterative refinement sharpens the KKT stationarity of the
  // normal-equation solve.
  if (gram.size() > 0) {
    Eigen::VectorXd Ax = Eigen::VectorXd::Zero(m);
    for (int j : gram.active()) A.add_col_scaled(j, x(j), Ax);
    const Eigen::VectorXd r = g - Ax;
    const auto& act = gram.active();
    Eigen::VectorXd rhs(act.size());
    for (std::size_t i = 0; i < act.size(); ++i) rhs(i) = A.col_dot(act[i], r);
    const Eigen::VectorXd delta = gram.solve(rhs);
    for (std::size_t i = 0; i < act.size(); ++i)
      x(act[i]) = std::max(0.0, x(act[i]) + delta(i));
  }

  sol.lambda = x;
  Eigen::VectorXd Ax = Eigen::VectorXd::Zero(m);
  for (int j = 0; j < k; ++j)
    if (x(j) != 0.0) A.add_col_scaled(j, x(j), Ax);
  sol.resolved = g - Ax;
  sol.residual_fraction = sol.resolved.norm() / gnorm;
  sol.converged = converged;
  sol.iterations = iter;
  return sol;
}

/// Fraction of the length gradient left unresolved by the active contacts.
/// 1.0 when there are no contacts at all.
inline double residual_of(const Polygon& p) {
  const ContactSet cs = detect_contacts(p);
  if (cs.rigidity.col_count() == 0) return 1.0;
  const Eigen::VectorXd g = length_gradient(p);
  return solve_snnls(cs.rigidity, g).residual_fraction;
}

}  // namespace tightknot
