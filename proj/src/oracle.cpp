#include "wspice/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "wspice/errors.hpp"

namespace wspice::oracle {

namespace {

void check_cancel(const std::stop_token& stop) {
  if (stop.stop_requested()) throw Error(ErrorKind::Cancelled, "oracle solve cancelled");
}

// F_mu(x) = Σ residual terms + Σ_k u_k sqrt(|x_k|² + mu²), r = y - Bx. The
// residual terms are Σ_i v_i sqrt(|r_i|² + mu²) (per-entry) or
// v_0 sqrt(‖r‖² + mu²) (one group).
struct SmoothedProblem {
  const CMatrix& B;
  const CVector& y;
  RVector v;
  RVector u;
  bool grouped = false;

  double exact(const CVector& x) const {
    const CVector r = y - B * x;
    const double data = grouped ? v[0] * r.norm() : v.dot(r.cwiseAbs());
    return data + u.dot(x.cwiseAbs());
  }

  double smoothed(const CVector& x, double mu) const {
    const CVector r = y - B * x;
    const double mu2 = mu * mu;
    double data = 0.0;
    if (grouped) {
      data = v[0] * std::sqrt(r.squaredNorm() + mu2);
    } else {
      for (Index i = 0; i < r.size(); ++i) data += v[i] * std::sqrt(std::norm(r[i]) + mu2);
    }
    double pen = 0.0;
    for (Index k = 0; k < x.size(); ++k) pen += u[k] * std::sqrt(std::norm(x[k]) + mu2);
    return data + pen;
  }

  // Real gradient written as a complex vector: Re<grad, dx> is the first-order change.
  CVector gradient(const CVector& x, double mu) const {
    const CVector r = y - B * x;
    const double mu2 = mu * mu;
    CVector dr(r.size());
    if (grouped) {
      dr = r * (v[0] / std::sqrt(r.squaredNorm() + mu2));
    } else {
      for (Index i = 0; i < r.size(); ++i) dr[i] = r[i] * (v[i] / std::sqrt(std::norm(r[i]) + mu2));
    }
    CVector g = -(B.adjoint() * dr);
    for (Index k = 0; k < x.size(); ++k) g[k] += x[k] * (u[k] / std::sqrt(std::norm(x[k]) + mu2));
    return g;
  }
};

double relative_drop(const std::vector<double>& history, std::size_t window) {
  const std::size_t back = std::min(window, history.size() - 1);
  const double last = history.back();
  return std::abs(history[history.size() - 1 - back] - last) / std::max(std::abs(last), std::numeric_limits<double>::min());
}

double re_dot(const CVector& a, const CVector& b) { return a.dot(b).real(); }

// Accelerated gradient on F_mu with backtracking and function-value restart.
// Returns the number of iterations spent.
int smoothed_stage(const SmoothedProblem& prob, double mu, CVector& x, double& L, int max_iters,
                   const std::stop_token& stop) {
  constexpr std::size_t kWindow = 100;
  CVector z = x;
  double t = 1.0;
  double fx = prob.smoothed(x, mu);
  bool restarted = false;
  std::vector<double> history{prob.exact(x)};
  int it = 0;
  while (it < max_iters) {
    if ((it & 255) == 0) check_cancel(stop);
    ++it;
    const CVector gz = prob.gradient(z, mu);
    const double fz = prob.smoothed(z, mu);
    L *= 0.5;
    CVector xn;
    double fxn = 0.0;
    for (int bt = 0; bt < 200; ++bt) {
      xn = z - gz / L;
      fxn = prob.smoothed(xn, mu);
      const CVector dx = xn - z;
      if (fxn <= fz + re_dot(gz, dx) + 0.5 * L * dx.squaredNorm() + 1e-15 * std::abs(fz)) break;
      L *= 2.0;
    }
    if (fxn > fx) {
      // A plain gradient step from x that fails to descend means x is
      // stationary to rounding.
      if (restarted) break;
      z = x;
      t = 1.0;
      restarted = true;
      continue;
    }
    restarted = false;
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const CVector step = xn - x;
    z = xn + ((t - 1.0) / tn) * step;
    t = tn;
    x = std::move(xn);
    fx = fxn;
    history.push_back(prob.exact(x));
    if (step.norm() <= 1e-15 * (1.0 + x.norm())) break;
    if (history.size() > kWindow && relative_drop(history, kWindow) < 1e-12) break;
  }
  return it;
}

CVector soft_threshold(const CVector& v, const RVector& tau) {
  CVector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    out[i] = a > tau[i] ? v[i] * ((a - tau[i]) / a) : cplx(0.0, 0.0);
  }
  return out;
}

CVector group_threshold(const CVector& v, double tau) {
  const double a = v.norm();
  return a > tau ? CVector(v * ((a - tau) / a)) : CVector(CVector::Zero(v.size()));
}

// Exact polish by ADMM on min f(z) s.t. z = w, [B I] w = y, starting from x.
// The x block of the projected iterate is always paired with r = y - Bx, so
// every recorded objective is attained by a feasible point.
int splitting_polish(const SmoothedProblem& prob, CVector& x, double& certificate, int max_iters,
                     const std::stop_token& stop) {
  constexpr std::size_t kWindow = 100;
  const Index M = prob.B.cols();
  const Index N = prob.B.rows();
  CMatrix G = prob.B * prob.B.adjoint();
  G.diagonal().array() += 1.0;
  const Eigen::LLT<CMatrix> gram(G);

  auto project = [&](const CVector& v) {
    const CVector e = prob.B * v.head(M) + v.tail(N) - prob.y;
    const CVector c = gram.solve(e);
    CVector out(M + N);
    out.head(M) = v.head(M) - prob.B.adjoint() * c;
    out.tail(N) = v.tail(N) - c;
    return out;
  };

  const double scale = std::max(prob.y.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  double rho = (prob.u.mean() + prob.v.mean()) / scale;
  CVector z(M + N);
  z.head(M) = x;
  z.tail(N) = prob.y - prob.B * x;
  CVector lambda = CVector::Zero(M + N);

  CVector best = x;
  double best_obj = prob.exact(x);
  std::vector<double> history{best_obj};
  int it = 0;
  int settled_at = -1;
  while (it < max_iters) {
    if ((it & 255) == 0) check_cancel(stop);
    ++it;
    const CVector w = project(z - lambda);
    const CVector target = w + lambda;
    CVector zn(M + N);
    zn.head(M) = soft_threshold(target.head(M), prob.u / rho);
    zn.tail(N) = prob.grouped ? group_threshold(target.tail(N), prob.v[0] / rho)
                              : soft_threshold(target.tail(N), prob.v / rho);
    const double primal = (w - zn).norm();
    const double dual = rho * (zn - z).norm();
    lambda += w - zn;
    z = std::move(zn);

    const CVector xc = w.head(M);
    const double obj = prob.exact(xc);
    if (obj < best_obj) {
      best_obj = obj;
      best = xc;
    }
    history.push_back(obj);

    // Run one more full window after the residuals settle so the certificate
    // measures the settled iterates rather than the approach.
    const double tol = 1e-14 * (scale + z.norm());
    if (settled_at < 0 && primal <= tol && dual <= rho * tol) settled_at = it;
    if (settled_at >= 0 && it - settled_at >= static_cast<int>(kWindow)) break;
    if (it % 50 == 0) {
      if (primal > 10.0 * dual / rho) {
        rho *= 2.0;
        lambda /= 2.0;
      } else if (dual / rho > 10.0 * primal) {
        rho /= 2.0;
        lambda *= 2.0;
      }
    }
  }
  x = best;
  certificate = relative_drop(history, kWindow);
  return it;
}

ConvexSolveResult solve_smoothed(const SmoothedProblem& prob, const SmoothingSchedule& sched, std::stop_token stop) {
  if (!(sched.mu_start >= sched.mu_end) || !(sched.mu_end > 0.0) || !(sched.factor > 1.0) ||
      sched.max_iters_per_stage < 1) {
    throw Error(ErrorKind::ConfigError, "invalid smoothing schedule");
  }
  ConvexSolveResult res;
  res.x = CVector::Zero(prob.B.cols());
  if (prob.y.squaredNorm() == 0.0) return res;

  const double scale = prob.y.cwiseAbs().maxCoeff();
  double L = 1.0;
  for (double mu_rel = sched.mu_start; mu_rel >= sched.mu_end * (1.0 - 1e-12); mu_rel /= sched.factor) {
    res.iterations += smoothed_stage(prob, mu_rel * scale, res.x, L, sched.max_iters_per_stage, stop);
  }
  res.iterations += splitting_polish(prob, res.x, res.certificate, 10 * sched.max_iters_per_stage, stop);
  res.objective = prob.exact(res.x);
  if (!(res.certificate <= 1e-9)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "convex solve stalled: final relative objective change %.3e after %d iterations",
                  res.certificate, res.iterations);
    throw Error(ErrorKind::NotConverged, buf);
  }
  return res;
}

void require_positive(const RVector& w, const char* what) {
  for (Index k = 0; k < w.size(); ++k) {
    if (!(w[k] > 0.0)) throw Error(ErrorKind::NonpositiveWeight, std::string(what) + " must be positive", k);
  }
}

}  // namespace

double l1_lad_objective(const Dictionary& dict, const CVector& y, const RVector& W1, const RVector& W2,
                        const CVector& x) {
  const CVector r = y - dict.regressors() * x;
  return W1.cwiseSqrt().dot(r.cwiseAbs()) + W2.cwiseSqrt().dot(x.cwiseAbs());
}

double sqrt_lasso_objective(const Dictionary& dict, const CVector& y, double w, const RVector& col_weights,
                            const CVector& x) {
  return w * (y - dict.regressors() * x).norm() + col_weights.cwiseSqrt().dot(x.cwiseAbs());
}

ConvexSolveResult solve_l1_lad(const Dictionary& dict, const CVector& y, const RVector& W1, const RVector& W2,
                               const SmoothingSchedule& schedule, std::stop_token stop) {
  if (y.size() != dict.rows() || W1.size() != dict.rows() || W2.size() != dict.signals()) {
    throw Error(ErrorKind::DimensionMismatch, "l1-LAD inputs have inconsistent dimensions");
  }
  require_positive(W1, "W1");
  require_positive(W2, "W2");
  SmoothedProblem prob{dict.regressors(), y, W1.cwiseSqrt(), W2.cwiseSqrt(), false};
  return solve_smoothed(prob, schedule, stop);
}

ConvexSolveResult solve_sqrt_lasso(const Dictionary& dict, const CVector& y, double w, const RVector& col_weights,
                                   const SmoothingSchedule& schedule, std::stop_token stop) {
  if (y.size() != dict.rows() || col_weights.size() != dict.signals()) {
    throw Error(ErrorKind::DimensionMismatch, "square-root LASSO inputs have inconsistent dimensions");
  }
  if (!(w > 0.0)) throw Error(ErrorKind::NonpositiveWeight, "residual weight must be positive");
  require_positive(col_weights, "column weights");
  SmoothedProblem prob{dict.regressors(), y, RVector::Constant(1, w), col_weights.cwiseSqrt(), true};
  return solve_smoothed(prob, schedule, stop);
}

ConvexSolveResult solve_inner_ls(const Dictionary& dict, const CVector& y, const PowerEstimate& p) {
  if (y.size() != dict.rows() || p.size() != dict.atoms() || p.signal_count() != dict.signals()) {
    throw Error(ErrorKind::DimensionMismatch, "inner least-squares inputs have inconsistent dimensions");
  }
  for (Index k = 0; k < p.size(); ++k) {
    if (!(p[k] > 0.0)) throw Error(ErrorKind::ConfigError, "inner problem requires strictly positive powers", k);
  }
  const CMatrix& B = dict.regressors();
  const RVector s_inv = p.noise().cwiseInverse();
  CMatrix G = B.adjoint() * s_inv.asDiagonal() * B;
  G.diagonal().real() += p.signal().cwiseInverse();
  const CVector rhs = B.adjoint() * s_inv.asDiagonal() * y;
  Eigen::LLT<CMatrix> llt(G);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NotPositiveDefinite, "normal matrix not positive definite");

  ConvexSolveResult res;
  res.x = llt.solve(rhs);
  const CVector r = y - B * res.x;
  res.objective = r.cwiseAbs2().dot(s_inv) + res.x.cwiseAbs2().dot(p.signal().cwiseInverse());
  res.iterations = 1;
  return res;
}

namespace {

struct SpiceEval {
  double f = 0.0;
  RVector grad;
  RMatrix hess;
};

bool spice_eval(const CMatrix& A, const CVector& y, const RVector& w, const RVector& p, bool with_hess, SpiceEval& out) {
  const Index N = A.rows();
  CMatrix R = CMatrix::Zero(N, N);
  for (Index k = 0; k < A.cols(); ++k) {
    if (p[k] != 0.0) R.noalias() += p[k] * A.col(k) * A.col(k).adjoint();
  }
  Eigen::LLT<CMatrix> llt(R);
  if (llt.info() != Eigen::Success) return false;
  const CVector z = llt.solve(y);
  const CVector g = A.adjoint() * z;
  out.f = y.dot(z).real() + w.dot(p);
  if (!std::isfinite(out.f)) return false;
  out.grad = w - g.cwiseAbs2();
  if (with_hess) {
    const CMatrix W = llt.matrixL().solve(A);
    const CMatrix H = W.adjoint() * W;
    out.hess = 2.0 * (g.conjugate().asDiagonal() * H * g.asDiagonal()).real();
  }
  return true;
}

}  // namespace

// Relative to max w. Line searches end once the decrease drops below the rounding
// noise of y*R^{-1}y, which leaves residuals around 1e-6 on ill-conditioned R.
constexpr double kDirectTolerance = 1e-5;

std::string fmt_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

SpiceDirectResult minimize_spice_direct(const Dictionary& dict, const CVector& y, const RVector& weights,
                                        int max_iters, std::stop_token stop) {
  const CMatrix& A = dict.augmented();
  const Index n = dict.atoms();
  const Index M = dict.signals();
  if (y.size() != dict.rows() || weights.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "SPICE oracle inputs have inconsistent dimensions");
  }
  require_positive(weights, "weights");
  const double energy = y.squaredNorm() / static_cast<double>(dict.rows());
  if (!(energy > 0.0)) throw Error(ErrorKind::ZeroData, "data vector is zero");

  RVector lb = RVector::Zero(n);
  lb.tail(dict.rows()).setConstant(1e-12 * energy);

  RVector p(n);
  p.head(M).setConstant(energy / static_cast<double>(n));
  p.tail(dict.rows()).setConstant(energy);
  p = p.cwiseQuotient(weights.cwiseSqrt());

  SpiceDirectResult res;
  SpiceEval cur;
  if (!spice_eval(A, y, weights, p, true, cur)) throw Error(ErrorKind::NotPositiveDefinite, "oracle start point singular");

  auto projected_residual = [&](const RVector& x, const RVector& grad) {
    const double s = std::max(x.maxCoeff(), std::numeric_limits<double>::min());
    return (x - (x - s * grad).cwiseMax(lb)).cwiseAbs().maxCoeff() / s;
  };

  constexpr double kArmijo = 1e-4;
  int stalls = 0;
  for (int it = 0; it < max_iters; ++it) {
    check_cancel(stop);
    res.projected_gradient = projected_residual(p, cur.grad);
    if (res.projected_gradient <= 1e-13) break;

    const double eps = std::min(1e-3 * p.maxCoeff(), res.projected_gradient * p.maxCoeff());
    std::vector<Index> free_idx;
    std::vector<char> active(static_cast<std::size_t>(n), 0);
    for (Index k = 0; k < n; ++k) {
      if (p[k] - lb[k] <= eps && cur.grad[k] > 0.0) {
        active[static_cast<std::size_t>(k)] = 1;
      } else {
        free_idx.push_back(k);
      }
    }

    RVector dir = RVector::Zero(n);
    const Index nf = static_cast<Index>(free_idx.size());
    if (nf > 0) {
      RMatrix Hf(nf, nf);
      RVector gf(nf);
      for (Index a = 0; a < nf; ++a) {
        gf[a] = cur.grad[free_idx[a]];
        for (Index b = 0; b < nf; ++b) Hf(a, b) = cur.hess(free_idx[a], free_idx[b]);
      }
      const double diag_scale = std::max(Hf.diagonal().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
      RVector df;
      bool ok = false;
      for (double lambda = 0.0; lambda <= diag_scale; lambda = lambda == 0.0 ? 1e-14 * diag_scale : lambda * 100.0) {
        RMatrix Hr = Hf;
        Hr.diagonal().array() += lambda;
        Eigen::LDLT<RMatrix> ldlt(Hr);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) continue;
        const RVector D = ldlt.vectorD();
        if (!(D.minCoeff() > 1e-12 * D.maxCoeff())) continue;
        df = -ldlt.solve(gf);
        if (df.allFinite() && df.dot(gf) < 0.0) {
          ok = true;
          break;
        }
      }
      if (!ok) df = -gf.cwiseQuotient(Hf.diagonal().cwiseAbs().cwiseMax(1e-300));
      for (Index a = 0; a < nf; ++a) dir[free_idx[a]] = df[a];
    }
    for (Index k = 0; k < n; ++k) {
      if (active[static_cast<std::size_t>(k)]) dir[k] = -cur.grad[k] / std::max(cur.hess(k, k), 1e-300);
    }

    double alpha = 1.0;
    bool accepted = false;
    SpiceEval trial;
    RVector p_new;
    for (int bt = 0; bt < 80; ++bt, alpha *= 0.5) {
      p_new = (p + alpha * dir).cwiseMax(lb);
      if (!spice_eval(A, y, weights, p_new, false, trial)) continue;
      const double predicted = std::max(cur.grad.dot(p - p_new), 0.0);
      if (cur.f - trial.f > 0.0 && cur.f - trial.f >= kArmijo * predicted) {
        accepted = true;
        break;
      }
    }
    ++res.iterations;
    if (!accepted) break;

    const double decrease = cur.f - trial.f;
    p = p_new;
    if (!spice_eval(A, y, weights, p, true, cur)) throw Error(ErrorKind::NotPositiveDefinite, "oracle iterate singular");
    stalls = decrease <= 1e-16 * std::abs(cur.f) ? stalls + 1 : 0;
    if (stalls >= 3) break;
  }
  res.projected_gradient = projected_residual(p, cur.grad);
  if (!(res.projected_gradient <= kDirectTolerance * weights.maxCoeff())) {
    throw Error(ErrorKind::NotConverged, "SPICE oracle stopped after " + std::to_string(res.iterations) +
                                             " iterations with projected gradient " +
                                             fmt_sci(res.projected_gradient));
  }
  res.objective = cur.f;
  res.powers = PowerEstimate(p, M);
  return res;
}

}  // namespace wspice::oracle
