#pragma once

// Small-scale convex solvers used to cross-check the iteration engine. Nothing
// here calls into estimators.hpp; the only shared code is the Dictionary type.

#include <stop_token>

#include "wspice/linmodel.hpp"

namespace wspice::oracle {

struct ConvexSolveResult {
  CVector x;
  double objective = 0.0;
  int iterations = 0;
  /// Relative change of the exact objective over the final 100 iterations.
  double certificate = 0.0;
};

struct SmoothingSchedule {
  double mu_start = 1e-2;
  double mu_end = 1e-8;
  double factor = 10.0;
  int max_iters_per_stage = 10000;
};

/// The l1 solvers run accelerated gradient descent on a smoothed objective for each
/// level of the schedule, then polish on the exact objective by ADMM. Both throw
/// NotConverged when the certificate exceeds 1e-9.

/// min ‖W1^{1/2}(y - Bx)‖₁ + ‖W2^{1/2} x‖₁ with W1 length N, W2 length M.
ConvexSolveResult solve_l1_lad(const Dictionary& dict, const CVector& y, const RVector& W1, const RVector& W2,
                               const SmoothingSchedule& schedule = {}, std::stop_token stop = {});

/// min w ‖y - Bx‖₂ + Σ sqrt(c_k) |x_k|.
ConvexSolveResult solve_sqrt_lasso(const Dictionary& dict, const CVector& y, double w, const RVector& col_weights,
                                   const SmoothingSchedule& schedule = {}, std::stop_token stop = {});

/// min (y - Bx)* S^{-1} (y - Bx) + Σ |x_k|² / p_k by the normal equations
/// (B* S^{-1} B + Π^{-1}) x = B* S^{-1} y. Requires every p_k > 0.
ConvexSolveResult solve_inner_ls(const Dictionary& dict, const CVector& y, const PowerEstimate& p);

/// Exact objectives, for evaluating candidate points.
double l1_lad_objective(const Dictionary& dict, const CVector& y, const RVector& W1, const RVector& W2, const CVector& x);
double sqrt_lasso_objective(const Dictionary& dict, const CVector& y, double w, const RVector& col_weights,
                            const CVector& x);

struct SpiceDirectResult {
  PowerEstimate powers;
  double objective = 0.0;
  int iterations = 0;
  /// ‖p - P(p - ∇f)‖∞ at exit.
  double projected_gradient = 0.0;
};

/// y* R(p)^{-1} y + Σ w_k p_k over p >= 0 by two-metric projected Newton with
/// Armijo backtracking along the projection arc. Throws NotConverged when the
/// projected gradient at exit exceeds 1e-5 * max w.
SpiceDirectResult minimize_spice_direct(const Dictionary& dict, const CVector& y, const RVector& weights,
                                        int max_iters = 2000, std::stop_token stop = {});

}  // namespace wspice::oracle
