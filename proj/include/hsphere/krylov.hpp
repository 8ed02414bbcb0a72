#pragma once

#include <functional>
#include <vector>

#include "hsphere/common.hpp"

namespace hsphere {

// ---------------------------------------------------------------------------
// MINRES for an operator that is self-adjoint in a caller-supplied inner
// product. Works on any Eigen-like type with +,-,* and a dot functor; handles
// indefinite and (consistently) singular systems, which is what the Newton
// step at a saddle needs.
// ---------------------------------------------------------------------------

template <typename X>
struct MinresResult {
  X x;
  int iterations = 0;
  double rel_residual = 1.0;
};

template <typename X, typename Apply, typename Dot>
MinresResult<X> minres(const Apply& apply, const Dot& dot, const X& b, double tol, int maxit) {
  MinresResult<X> out;
  out.x = X::Zero(b.rows(), b.cols());
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) return out;

  X r = b;
  double beta = bnorm;
  X v_prev = X::Zero(b.rows(), b.cols());
  X v = r / beta;
  X d = X::Zero(b.rows(), b.cols());
  X d_prev = X::Zero(b.rows(), b.cols());
  double c = -1.0, s = 0.0;
  double eta = beta;
  double delta1 = 0.0, epsilon = 0.0;

  for (int k = 1; k <= maxit; ++k) {
    X p = apply(v);
    const double alpha = dot(v, p);
    p = p - alpha * v - beta * v_prev;
    const double beta_next = std::sqrt(std::max(0.0, dot(p, p)));

    // previous rotation
    const double delta2 = c * delta1 + s * alpha;
    const double gamma1 = s * delta1 - c * alpha;
    const double epsilon_next = s * beta_next;
    const double delta1_next = -c * beta_next;

    // new rotation
    const double gamma2 = std::hypot(gamma1, beta_next);
    if (gamma2 == 0.0) break;  // breakdown: solution reached or singular direction
    c = gamma1 / gamma2;
    s = beta_next / gamma2;

    X dnew = (v - delta2 * d - epsilon * d_prev) / gamma2;
    out.x = out.x + (c * eta) * dnew;
    eta = s * eta;

    d_prev = d;
    d = dnew;
    v_prev = v;
    if (beta_next < 1e-300) {
      out.iterations = k;
      out.rel_residual = std::abs(eta) / bnorm;
      return out;
    }
    v = p / beta_next;
    beta = beta_next;
    delta1 = delta1_next;
    epsilon = epsilon_next;

    out.iterations = k;
    out.rel_residual = std::abs(eta) / bnorm;
    if (out.rel_residual < tol) return out;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lanczos with full reorthogonalization for a self-adjoint operator in an
// M-inner product; returns Ritz pairs of the operator. Used in shift-invert
// form for the generalized eigenproblem S x = theta M x.
// ---------------------------------------------------------------------------

struct RitzPair {
  double value = 0.0;
  double residual = 0.0;  // |beta_{k+1} * last component|
  Vec vector;
};

inline std::vector<RitzPair> lanczos_ritz(const std::function<Vec(const Vec&)>& apply,
                                          const std::function<double(const Vec&, const Vec&)>& dot,
                                          int n, int steps, Rng& rng) {
  steps = std::min(steps, n);
  std::vector<Vec> basis;
  basis.reserve(steps);
  Vec alpha_d(steps), beta_d(steps);

  Vec v = rng.normal_vec(n);
  v /= std::sqrt(dot(v, v));
  basis.push_back(v);
  double beta_last = 0.0;
  int k = 0;
  for (; k < steps; ++k) {
    Vec w = apply(basis[k]);
    const double a = dot(w, basis[k]);
    alpha_d(k) = a;
    w -= a * basis[k];
    if (k > 0) w -= beta_d(k - 1) * basis[k - 1];
    for (int pass = 0; pass < 2; ++pass)  // full reorthogonalization
      for (const auto& q : basis) w -= dot(w, q) * q;
    const double b = std::sqrt(std::max(0.0, dot(w, w)));
    beta_last = b;
    if (k + 1 < steps) {
      if (b < 1e-13) {
        ++k;
        break;
      }
      beta_d(k) = b;
      basis.push_back(w / b);
    }
  }
  const int m = k == steps ? steps : k;
  Mat T = Mat::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    T(i, i) = alpha_d(i);
    if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta_d(i);
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(T);
  if (es.info() != Eigen::Success) throw EigSolverFailure("lanczos: tridiagonal solve failed");
  std::vector<RitzPair> out(m);
  for (int i = 0; i < m; ++i) {
    out[i].value = es.eigenvalues()(i);
    out[i].residual = std::abs(beta_last * es.eigenvectors()(m - 1, i));
    Vec y = Vec::Zero(n);
    for (int j = 0; j < m; ++j) y += es.eigenvectors()(j, i) * basis[j];
    out[i].vector = y;
  }
  return out;
}

}  // namespace hsphere
