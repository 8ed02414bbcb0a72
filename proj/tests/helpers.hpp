#pragma once

// Shared test fixtures: deterministic smooth random states, target x form
// sampling matrix, finite-difference probes.

#include <utility>
#include <vector>

#include "hsphere/energy.hpp"
#include "hsphere/geometry.hpp"
#include "hsphere/mesh.hpp"
#include "hsphere/sphere_chart.hpp"

namespace hsphere::testing {

// low-order polynomial basis in the domain coordinates, smooth on the sphere
inline Vec poly_basis(const Vec3& x) {
  Vec b(9);
  b << 1.0, x(0), x(1), x(2), x(0) * x(1), x(1) * x(2), x(0) * x(2),
      x(0) * x(0) - x(1) * x(1), x(2) * x(2) - x(0) * x(0);
  return b;
}

inline Vec anchor_point(const TargetManifold& m, Rng& rng) {
  Vec y = Vec::Ones(m.ambient_dim()) + 0.2 * rng.normal_vec(m.ambient_dim());
  if (m.kind() == TargetKind::FlatEuclidean) return 0.3 * y;
  return m.project(y);
}

// anchor + smooth ambient polynomial field, projected back to the target
inline MapState random_smooth_state(const DomainMesh& mesh, const TargetManifold& m, Rng& rng) {
  const int K = m.ambient_dim();
  const Vec c = anchor_point(m, rng);
  const double amp = std::min(0.35 * m.scale(), 0.4 * std::min(m.tubular_radius(), 1e6));
  Mat coeff(9, K);
  for (int i = 0; i < 9; ++i)
    for (int k = 0; k < K; ++k) coeff(i, k) = rng.normal() / (1.0 + i);
  MapState u(mesh.n_vertices(), K);
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    const Vec b = poly_basis(mesh.V.row(v).transpose());
    Vec y = c + amp * (coeff.transpose() * b) / 3.0;
    u.row(v) = m.project(y).transpose();
  }
  return u;
}

inline TangentField random_tangent_field(const DomainMesh& mesh, const TargetManifold& m, Rng& rng,
                                         const MapState& u) {
  const int K = m.ambient_dim();
  Mat coeff(9, K);
  for (int i = 0; i < 9; ++i)
    for (int k = 0; k < K; ++k) coeff(i, k) = rng.normal() / (1.0 + i);
  TangentField V(mesh.n_vertices(), K);
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    const Vec b = poly_basis(mesh.V.row(v).transpose());
    V.row(v) = m.tangent_project(u.row(v).transpose(), coeff.transpose() * b / 3.0).transpose();
  }
  return V;
}

// the built-in target x form sampling matrix used across the FD suites
inline std::vector<std::pair<TargetManifold, TwoForm>> target_form_matrix() {
  std::vector<std::pair<TargetManifold, TwoForm>> out;
  out.emplace_back(TargetManifold::round_sphere(2, 1.0), TwoForm::volume(3, 0.5));
  out.emplace_back(TargetManifold::round_sphere(3, 1.0), TwoForm::cosine(4, 0.5, 1.5));
  out.emplace_back(TargetManifold::round_sphere(4, 1.3), TwoForm::zero(5));
  Vec axes(3);
  axes << 1.5, 1.0, 0.8;
  out.emplace_back(TargetManifold::ellipsoid(axes), TwoForm::cosine(3, 0.4, 1.0));
  out.emplace_back(TargetManifold::flat_euclidean(3), TwoForm::volume(3, -2.0 / 3.0));
  Vec per(3);
  per << 2 * M_PI, 5.0, 7.0;
  out.emplace_back(TargetManifold::flat_torus(3, per), TwoForm::cosine(6, 0.3, 1.2));
  return out;
}

inline double fd_directional(const DomainMesh& mesh, const TargetManifold& target,
                             const TwoForm& form, const FunctionalParams& p, const MapState& u,
                             const TangentField& V, double eps = 1e-5) {
  const double ep = total_energy(mesh, retract(target, u, eps * V), form, p);
  const double em = total_energy(mesh, retract(target, u, -eps * V), form, p);
  return (ep - em) / (2.0 * eps);
}

}  // namespace hsphere::testing
