#pragma once

// Root finding for Psi_n(theta, h_hat) = 0 over the parameter box: damped
// Newton with a central finite-difference Jacobian, a lattice-scan fallback,
// and the one-step update theta + I^{-1} Psi.

#include "zest/csv.hpp"
#include "zest/model.hpp"
#include "zest/stats.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

namespace zest {

struct TraceRow {
  int iteration;
  double psi_norm;
  double step_norm;
};

struct SolveResult {
  Vec theta;
  double psi_norm = 0.0;
  std::vector<TraceRow> trace;
  bool used_grid = false;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, std::vector<TraceRow> trace, Vec last)
      : Error(ErrorKind::NonConvergence, what), trace_(std::move(trace)), last_(std::move(last)) {}
  const std::vector<TraceRow>& trace() const { return trace_; }
  const Vec& last_iterate() const { return last_; }

 private:
  std::vector<TraceRow> trace_;
  Vec last_;
};

/// Signals the caller to reseed from the lattice scan.
class SingularJacobian : public Error {
 public:
  explicit SingularJacobian(const std::string& what) : Error(ErrorKind::SingularMatrix, what) {}
};

/// tol = 1e-2 r_n^{-1} n^{-1/4}, which is o(r_n^{-1}) along the n schedule.
inline double operational_tolerance(double r_n, double n) { return 1e-2 / r_n * std::pow(n, -0.25); }

template <typename Psi>
Mat fd_jacobian(Psi&& psi, const Vec& theta, const ParamSpace& box) {
  const int d = static_cast<int>(theta.size());
  Mat J(d, d);
  for (int j = 0; j < d; ++j) {
    const double h = 1e-5 * (box.upper[j] - box.lower[j]);
    Vec tp = theta, tm = theta;
    tp[j] += h;
    tm[j] -= h;
    J.col(j) = (psi(tp) - psi(tm)) / (2.0 * h);
  }
  return J;
}

template <typename Psi>
SolveResult newton_solve(Psi&& psi, const Vec& theta_init, const ParamSpace& box, double tol, int max_iter = 50) {
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "newton_solve: tol must be > 0");
  if (!box.contains(theta_init)) throw Error(ErrorKind::InvalidArgument, "newton_solve: theta_init outside the box");
  SolveResult res;
  Vec theta = theta_init;
  Vec f = psi(theta);
  double fn = f.norm();
  res.trace.push_back({0, fn, 0.0});
  for (int it = 1; it <= max_iter && fn > tol; ++it) {
    const Mat J = fd_jacobian(psi, theta, box);
    Eigen::FullPivLU<Mat> lu(J);
    if (lu.rank() < J.cols() || !std::isfinite(J.norm()))
      throw SingularJacobian("newton_solve: singular finite-difference Jacobian");
    const Vec step = -lu.solve(f);
    double lambda = 1.0;
    bool accepted = false;
    Vec next;
    Vec fnext;
    for (int halve = 0; halve < 30; ++halve, lambda *= 0.5) {
      next = box.clamp(theta + lambda * step);
      fnext = psi(next);
      if (fnext.norm() < fn) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // stagnation
    const double step_norm = (next - theta).norm();
    theta = next;
    f = fnext;
    fn = f.norm();
    res.trace.push_back({it, fn, step_norm});
    if (step_norm <= 1e-15 * (1.0 + theta.norm())) break;
  }
  res.theta = theta;
  res.psi_norm = fn;
  if (fn > tol)
    throw NonConvergence("newton_solve: |Psi| = " + csv::num(fn) + " above tol = " + csv::num(tol), res.trace,
                         theta);
  return res;
}

/// Regular lattice over the parameter box with `per_dim` points per axis.
inline std::vector<Vec> theta_lattice(const ParamSpace& box, int per_dim) {
  const int d = box.dim();
  std::vector<Vec> out;
  std::vector<int> idx(d, 0);
  while (true) {
    Vec th(d);
    for (int i = 0; i < d; ++i)
      th[i] = per_dim == 1 ? 0.5 * (box.lower[i] + box.upper[i])
                           : box.lower[i] + (box.upper[i] - box.lower[i]) * idx[i] / (per_dim - 1);
    out.push_back(th);
    int k = 0;
    while (k < d && ++idx[k] == per_dim) idx[k++] = 0;
    if (k == d) break;
  }
  return out;
}

/// Minimizes |psi| over theta_lattice(box, per_dim).
template <typename Psi>
Vec grid_scan(Psi&& psi, const ParamSpace& box, int per_dim) {
  Vec best;
  double best_norm = std::numeric_limits<double>::infinity();
  for (const Vec& th : theta_lattice(box, per_dim)) {
    const double v = psi(th).norm();
    if (v < best_norm) {
      best_norm = v;
      best = th;
    }
  }
  return best;
}

/// Newton from `init` when given, otherwise (or after a singular Jacobian)
/// from the best lattice point.
template <typename Psi>
SolveResult solve_z(Psi&& psi, const ParamSpace& box, std::optional<Vec> init, double tol, int max_iter = 50,
                    int grid_per_dim = 21) {
  bool from_grid = !init.has_value();
  Vec start = init ? box.clamp(*init) : grid_scan(psi, box, grid_per_dim);
  try {
    SolveResult r = newton_solve(psi, start, box, tol, max_iter);
    r.used_grid = from_grid;
    return r;
  } catch (const SingularJacobian&) {
    if (from_grid) throw;
  }
  SolveResult r = newton_solve(psi, grid_scan(psi, box, grid_per_dim), box, tol, max_iter);
  r.used_grid = true;
  return r;
}

/// theta_init + I^{-1} psi_val: one Newton step with derivative matrix -I.
inline Vec one_step(const Vec& theta_init, const Vec& psi_val, const Mat& info) {
  Eigen::FullPivLU<Mat> lu(info);
  if (lu.rank() < info.cols()) throw Error(ErrorKind::SingularMatrix, "one_step: information matrix is singular");
  return theta_init + lu.solve(psi_val);
}

struct SandwichInput {
  Vec theta_hat;
  Vec psi_at_truth;  // Psi_n(theta0, h0)
};

struct SandwichReport {
  std::vector<double> residuals;
  double median = 0.0;
};

/// |r_n (-I)(theta_hat - theta0) + r_n Psi_n(theta0, h0)| per replication.
inline SandwichReport sandwich_check(const std::vector<SandwichInput>& reps, const Vec& theta0, const Mat& info,
                                     double r_n) {
  SandwichReport r;
  for (const auto& s : reps)
    r.residuals.push_back((r_n * (-info * (s.theta_hat - theta0)) + r_n * s.psi_at_truth).norm());
  r.median = stats::median(r.residuals);
  return r;
}

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  csv::write_row(os, {"iteration", "psi_norm", "step_norm"});
  for (const auto& t : trace)
    csv::write_row(os, {std::to_string(t.iteration), csv::num(t.psi_norm), csv::num(t.step_norm)});
}

}  // namespace zest
