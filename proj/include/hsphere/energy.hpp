#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "hsphere/common.hpp"
#include "hsphere/geometry.hpp"
#include "hsphere/mesh.hpp"

namespace hsphere {

// alpha >= 1 exponent, lambda >= 0 form scaling, tau in (0,1] the generalized
// functional weight (1 for the main functional).
struct FunctionalParams {
  double alpha = 1.0;
  double lambda = 0.0;
  double tau = 1.0;

  void validate() const {
    if (!(alpha >= 1.0)) throw ValidationError("params: alpha must be >= 1");
    if (!(lambda >= 0.0)) throw ValidationError("params: lambda must be >= 0");
    if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("params: tau must be in (0,1]");
  }

  // weight on the omega term in the generalized functional
  double omega_weight() const { return lambda * std::pow(tau, alpha - 1.0); }
};

inline void validate_state(const DomainMesh& mesh, const TargetManifold& target, const MapState& u) {
  if (u.rows() != mesh.n_vertices() || u.cols() != target.ambient_dim())
    throw ValidationError("map state has wrong shape");
  for (int v = 0; v < u.rows(); ++v)
    if (!target.on_manifold(u.row(v).transpose(), 100.0))
      throw PointOffManifold("map state: vertex off the target manifold");
}

// mass (lumped L^2) inner product of vertex fields
inline double mass_dot(const DomainMesh& mesh, const Mat& a, const Mat& b) {
  double s = 0.0;
  for (int v = 0; v < a.rows(); ++v) s += mesh.vertex_area(v) * a.row(v).dot(b.row(v));
  return s;
}

inline double mass_norm(const DomainMesh& mesh, const Mat& a) {
  return std::sqrt(mass_dot(mesh, a, a));
}

inline TangentField project_field(const TargetManifold& target, const MapState& u, const Mat& x) {
  TangentField out(x.rows(), x.cols());
  for (int v = 0; v < x.rows(); ++v)
    out.row(v) = target.tangent_project(u.row(v).transpose(), x.row(v).transpose()).transpose();
  return out;
}

// nearest-point retraction, second-order on every built-in target
inline MapState retract(const TargetManifold& target, const MapState& u, const Mat& step) {
  MapState out(u.rows(), u.cols());
  for (int v = 0; v < u.rows(); ++v)
    out.row(v) = target.project((u.row(v) + step.row(v)).transpose()).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Scalar functionals
// ---------------------------------------------------------------------------

inline double dirichlet(const DomainMesh& mesh, const MapState& u) {
  double e = 0.0;
  for (int t = 0; t < mesh.n_triangles(); ++t)
    e += 0.5 * mesh.map_gradient(u, t).squaredNorm() * mesh.tri_area(t);
  return e;
}

inline double alpha_energy(const DomainMesh& mesh, const MapState& u, const FunctionalParams& p) {
  double e = 0.0;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const double s = p.tau + mesh.map_gradient(u, t).squaredNorm();
    e += 0.5 * std::pow(s, p.alpha) * mesh.tri_area(t);
  }
  return e;
}

// int u*omega with the form evaluated at triangle-barycenter image values
inline double omega_term(const DomainMesh& mesh, const MapState& u, const TwoForm& form) {
  if (form.is_zero()) return 0.0;
  double e = 0.0;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const Mat D = mesh.map_gradient(u, t);
    Vec ubar = (u.row(mesh.F(t, 0)) + u.row(mesh.F(t, 1)) + u.row(mesh.F(t, 2))).transpose() / 3.0;
    const Mat W = form.omega(ubar);
    e += (D.row(0) * W * D.row(1).transpose()).value() * mesh.tri_area(t);
  }
  return e;
}

inline double total_energy(const DomainMesh& mesh, const MapState& u, const TwoForm& form,
                           const FunctionalParams& p) {
  double e = alpha_energy(mesh, u, p);
  if (p.lambda != 0.0 && !form.is_zero()) e += p.omega_weight() * omega_term(mesh, u, form);
  return e;
}

// per-vertex energy density: area-weighted average of incident triangle densities
inline Vec vertex_energy_density(const DomainMesh& mesh, const MapState& u) {
  Vec num = Vec::Zero(mesh.n_vertices());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const double d = mesh.map_gradient(u, t).squaredNorm() * mesh.tri_area(t) / 3.0;
    for (int i = 0; i < 3; ++i) num(mesh.F(t, i)) += d;
  }
  return num.cwiseQuotient(mesh.vertex_area);
}

// ---------------------------------------------------------------------------
// First variation.  The returned field G is tangential and mass-normalized:
// <G, V>_mass = dE(u)(V) for every tangent field V, so G vanishes exactly at
// discrete critical points.
// ---------------------------------------------------------------------------

struct GradientResult {
  TangentField grad;   // tangential, mass-normalized
  Mat ambient_force;   // dE/du before projection (used by the Hessian)
  double norm = 0.0;   // mass norm of grad
};

namespace detail {

// accumulates dE/dU for one triangle into rows of `force`
inline void accumulate_triangle_force(const DomainMesh& mesh, const TwoForm& form,
                                      const FunctionalParams& p, const MapState& u, int t,
                                      Mat& force) {
  const auto& G = mesh.tri_grad[t];
  const double A = mesh.tri_area(t);
  Mat U(3, u.cols());
  for (int i = 0; i < 3; ++i) U.row(i) = u.row(mesh.F(t, i));
  const Mat D = G * U;
  const double s = p.tau + D.squaredNorm();
  Mat dEdU = G.transpose() * (p.alpha * std::pow(s, p.alpha - 1.0) * A * D);
  const double w = p.omega_weight();
  if (w != 0.0 && !form.is_zero()) {
    const Vec ubar = (U.row(0) + U.row(1) + U.row(2)).transpose() / 3.0;
    const Mat W = form.omega(ubar);
    const Vec d1 = D.row(0).transpose(), d2 = D.row(1).transpose();
    Mat R(2, u.cols());
    R.row(0) = (W * d2).transpose();
    R.row(1) = -(W * d1).transpose();
    dEdU += (w * A) * (G.transpose() * R);
    Vec c(u.cols());
    for (int k = 0; k < u.cols(); ++k) c(k) = d1.dot(form.d_omega(ubar, k) * d2);
    for (int i = 0; i < 3; ++i) dEdU.row(i) += (w * A / 3.0) * c.transpose();
  }
  for (int i = 0; i < 3; ++i) force.row(mesh.F(t, i)) += dEdU.row(i);
}

}  // namespace detail

inline GradientResult gradient(const DomainMesh& mesh, const TargetManifold& target,
                               const TwoForm& form, const FunctionalParams& p, const MapState& u) {
  GradientResult r;
  r.ambient_force = Mat::Zero(u.rows(), u.cols());
  for (int t = 0; t < mesh.n_triangles(); ++t)
    detail::accumulate_triangle_force(mesh, form, p, u, t, r.ambient_force);
  r.grad.resize(u.rows(), u.cols());
  for (int v = 0; v < u.rows(); ++v) {
    const Vec pg = target.tangent_project(u.row(v).transpose(), r.ambient_force.row(v).transpose());
    r.grad.row(v) = pg.transpose() / mesh.vertex_area(v);
  }
  r.norm = mass_norm(mesh, r.grad);
  return r;
}

// ---------------------------------------------------------------------------
// Second variation.  HessianOperator applies the exact Riemannian Hessian of
// the discrete functional at u: the ambient second derivative plus the
// Weingarten correction <dE, A(V,W)> from the curvature of the constraint.
// <apply(V), W>_mass = d^2 E(u)(V, W), symmetric by construction.
// ---------------------------------------------------------------------------

class HessianOperator {
 public:
  HessianOperator(const DomainMesh& mesh, const TargetManifold& target, const TwoForm& form,
                  const FunctionalParams& p, const MapState& u)
      : mesh_(mesh), target_(target), p_(p), u_(u) {
    const int K = static_cast<int>(u.cols());
    const bool with_omega = p.omega_weight() != 0.0 && !form.is_zero();
    tris_.resize(mesh.n_triangles());
    Mat force = Mat::Zero(u.rows(), K);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
      auto& td = tris_[t];
      Mat U(3, K);
      for (int i = 0; i < 3; ++i) U.row(i) = u.row(mesh.F(t, i));
      td.D = mesh.tri_grad[t] * U;
      td.s = p.tau + td.D.squaredNorm();
      detail::accumulate_triangle_force(mesh, form, p, u, t, force);
      if (with_omega) {
        const Vec ubar = (U.row(0) + U.row(1) + U.row(2)).transpose() / 3.0;
        td.W = form.omega(ubar);
        td.dW.clear();
        for (int k = 0; k < K; ++k) {
          Mat dw = form.d_omega(ubar, k);
          if (dw.cwiseAbs().maxCoeff() > 0.0) td.dW.emplace_back(k, std::move(dw));
        }
        td.ddW.clear();
        for (int k = 0; k < K; ++k)
          for (int l = 0; l < K; ++l) {
            Mat ddw = form.dd_omega(ubar, k, l);
            if (ddw.cwiseAbs().maxCoeff() > 0.0) td.ddW.emplace_back(k, l, std::move(ddw));
          }
        td.has_omega = true;
      }
    }
    ambient_force_ = std::move(force);
  }

  const Mat& ambient_force() const { return ambient_force_; }

  // second derivative of the triangle contribution against the local vertex
  // field Vt (3 x K): returns the local force d/dVt' [ d^2 E_t ]
  Mat local_apply(int t, const Mat& Vt) const {
    const int K = static_cast<int>(u_.cols());
    const auto& td = tris_[t];
    const auto& G = mesh_.tri_grad[t];
    const double A = mesh_.tri_area(t);
    const Mat B = G * Vt;
    const double db = td.D.cwiseProduct(B).sum();
    Mat R = p_.alpha * A *
            (std::pow(td.s, p_.alpha - 1.0) * B +
             2.0 * (p_.alpha - 1.0) * std::pow(td.s, p_.alpha - 2.0) * db * td.D);
    Mat dF = G.transpose() * R;
    if (td.has_omega) {
      const double w = p_.omega_weight();
      const Vec d1 = td.D.row(0).transpose(), d2 = td.D.row(1).transpose();
      const Vec b1 = B.row(0).transpose(), b2 = B.row(1).transpose();
      const Vec vbar = (Vt.row(0) + Vt.row(1) + Vt.row(2)).transpose() / 3.0;
      Mat dWv = Mat::Zero(K, K);  // sum_k vbar_k dW_k
      for (const auto& [k, dw] : td.dW) dWv += vbar(k) * dw;
      Mat Rw(2, K);
      Rw.row(0) = (td.W * b2 + dWv * d2).transpose();
      Rw.row(1) = -(td.W * b1 + dWv * d1).transpose();
      dF += (w * A) * (G.transpose() * Rw);
      Vec c = Vec::Zero(K);
      for (const auto& [k, dw] : td.dW) c(k) += b1.dot(dw * d2) + d1.dot(dw * b2);
      for (const auto& [k, l, ddw] : td.ddW) c(k) += vbar(l) * d1.dot(ddw * d2);
      for (int i = 0; i < 3; ++i) dF.row(i) += (w * A / 3.0) * c.transpose();
    }
    return dF;
  }

  TangentField apply(const TangentField& V) const {
    const int K = static_cast<int>(u_.cols());
    Mat h = Mat::Zero(u_.rows(), K);
    for (int t = 0; t < mesh_.n_triangles(); ++t) {
      Mat Vt(3, K);
      for (int i = 0; i < 3; ++i) Vt.row(i) = V.row(mesh_.F(t, i));
      const Mat dF = local_apply(t, Vt);
      for (int i = 0; i < 3; ++i) h.row(mesh_.F(t, i)) += dF.row(i);
    }
    // tangential projection + Weingarten correction, mass normalization
    TangentField out(u_.rows(), K);
    for (int v = 0; v < u_.rows(); ++v) {
      const Vec y = u_.row(v).transpose();
      Vec hv = target_.tangent_project(y, h.row(v).transpose());
      hv += target_.shape_correction(y, ambient_force_.row(v).transpose(), V.row(v).transpose());
      out.row(v) = hv.transpose() / mesh_.vertex_area(v);
    }
    return out;
  }

  double bilinear(const TangentField& V, const TangentField& W) const {
    return mass_dot(mesh_, apply(V), W);
  }

 private:
  struct TriData {
    Mat D;        // 2 x K frame gradient
    double s = 0;
    bool has_omega = false;
    Mat W;
    std::vector<std::pair<int, Mat>> dW;
    std::vector<std::tuple<int, int, Mat>> ddW;
  };

  const DomainMesh& mesh_;
  const TargetManifold& target_;
  FunctionalParams p_;
  MapState u_;
  std::vector<TriData> tris_;
  Mat ambient_force_;
};

inline TangentField hessian_apply(const DomainMesh& mesh, const TargetManifold& target,
                                  const TwoForm& form, const FunctionalParams& p, const MapState& u,
                                  const TangentField& V) {
  return HessianOperator(mesh, target, form, p, u).apply(V);
}

}  // namespace hsphere
