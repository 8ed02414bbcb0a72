#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "hsphere/energy.hpp"
#include "hsphere/solve.hpp"
#include "hsphere/sphere_chart.hpp"

namespace hsphere {

// ---------------------------------------------------------------------------
// Psi_alpha(r) = [alpha (1+r)^(alpha-1) r - (1+r)^alpha + 1] / (alpha - 1),
// the strictly increasing weight of the balancing identity. The direct form
// cancels catastrophically near alpha = 1, so it is evaluated as
//   r e^{aL} - expm1(aL)/a,  a = alpha - 1, L = log1p(r),
// with the limit Psi_1(r) = r - log(1+r) used for a < 1e-8.
// ---------------------------------------------------------------------------

inline double psi_alpha(double r, double alpha) {
  const double a = alpha - 1.0;
  const double L = std::log1p(r);
  if (a < 1e-8) return r - L;
  const double eaL = std::exp(a * L);
  return r * eaL - std::expm1(a * L) / a;
}

// the three balancing integrals sum_v iota^i(v) Psi_alpha(|grad u|^2_v) m_v
inline Vec3 balancing(const DomainMesh& mesh, const MapState& u, const FunctionalParams& p) {
  const Vec dens = vertex_energy_density(mesh, u);
  Vec3 b = Vec3::Zero();
  for (int v = 0; v < mesh.n_vertices(); ++v)
    b += mesh.vertex_area(v) * psi_alpha(dens(v), p.alpha) * mesh.V.row(v).transpose();
  return b;
}

// ---------------------------------------------------------------------------
// Conformality defects. Per triangle the frame gradient has singular values
// s1 >= s2; the Hopf-differential modulus |s1^2 - s2^2| is rotation-invariant
// and vanishes iff the map is conformal there. The second component is the
// cross term in the minimizing (singular-vector) frame, zero up to rounding.
// ---------------------------------------------------------------------------

struct ConformalityResult {
  double hopf = 0.0;   // area-weighted L2 of s1^2 - s2^2
  double cross = 0.0;  // area-weighted L2 of the aligned-frame cross term
};

inline ConformalityResult conformality(const DomainMesh& mesh, const MapState& u) {
  ConformalityResult out;
  double h2 = 0.0, c2 = 0.0;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const Mat D = mesh.map_gradient(u, t);
    const double a = D.row(0).squaredNorm() - D.row(1).squaredNorm();
    const double b = 2.0 * D.row(0).dot(D.row(1));
    const double mod = std::hypot(a, b);  // = s1^2 - s2^2
    // residual cross term after rotating into the singular frame
    const double theta = 0.5 * std::atan2(b, std::max(a, 1e-300));
    const double cross = -a * std::sin(2 * theta) + b * std::cos(2 * theta);
    h2 += mod * mod * mesh.tri_area(t);
    c2 += cross * cross * mesh.tri_area(t);
  }
  out.hopf = std::sqrt(h2);
  out.cross = std::sqrt(c2);
  return out;
}

// ---------------------------------------------------------------------------
// Pohozaev residuals in the conformal chart at a vertex. The identity tested
// relates the radial/angular boundary balance to the (alpha-1)-weighted bulk
// term; at alpha = 1 the right-hand side vanishes and the residual is the
// boundary defect of conformal harmonicity.
// ---------------------------------------------------------------------------

struct PohozaevRow {
  double geodesic_radius = 0.0;
  double chart_radius = 0.0;
  double lhs = 0.0;       // boundary integral of |u_r|^2 - |u_theta|^2/t^2
  double rhs = 0.0;       // (alpha-1)-weighted bulk term
  double residual = 0.0;  // |lhs - rhs|
  double residual_alt = 0.0;  // second (density-weighted) variant
};

namespace detail {

struct ChartSampler {
  const DomainMesh& mesh;
  const MapState& u;
  SphereChart chart;
  Vec density;  // recovered vertex density |grad u|^2

  ChartSampler(const DomainMesh& m, const MapState& uu, int center)
      : mesh(m), u(uu), chart(m.V.row(center).transpose()), density(vertex_energy_density(m, uu)) {}

  double density_at(const Vec2& w) const {
    const auto mp = locate_point(mesh, chart.from_chart(w));
    double d = 0.0;
    for (int i = 0; i < 3; ++i) d += mp.bary(i) * density(mesh.F(mp.triangle, i));
    return d;
  }

  // chart Jacobian of the flat-triangle parametrization at the located point:
  // the chart point maps to the sphere, then centrally projects onto the
  // triangle plane; all factors are differentiated in closed form, so the
  // derivatives are exact for the piecewise-linear data.
  Eigen::Matrix<double, 3, 2> flat_jacobian(const Vec2& w, const MeshPoint& mp) const {
    const Vec3 ps = chart.from_chart(w);
    const Eigen::Matrix<double, 3, 2> Js = chart.from_chart_jacobian(w);
    const Vec3 p0 = mesh.V.row(mesh.F(mp.triangle, 0));
    const Vec3 n = mesh.tri_frame[mp.triangle].col(0).cross(mesh.tri_frame[mp.triangle].col(1));
    const double np = n.dot(ps), n0 = n.dot(p0);
    // p_flat = (n0 / n.ps) ps
    Eigen::Matrix<double, 3, 2> J = (n0 / np) * Js - (n0 / (np * np)) * ps * (n.transpose() * Js);
    return J;
  }

  // du/dw (K x 2) and d(density)/dw at a chart point
  void gradients(const Vec2& w, Mat& du, Vec2& drho, double& rho) const {
    const Vec3 ps = chart.from_chart(w);
    const auto mp = locate_point(mesh, ps);
    const Eigen::Matrix<double, 3, 2> J = flat_jacobian(w, mp);
    Eigen::Matrix<double, 2, 2> Jf;  // chart -> triangle frame coordinates
    Jf.row(0) = mesh.tri_frame[mp.triangle].col(0).transpose() * J;
    Jf.row(1) = mesh.tri_frame[mp.triangle].col(1).transpose() * J;
    const Mat D = mesh.map_gradient(u, mp.triangle);  // 2 x K in the frame
    du = D.transpose() * Jf;                          // K x 2
    Eigen::Vector3d dv;
    rho = 0.0;
    for (int i = 0; i < 3; ++i) {
      dv(i) = density(mesh.F(mp.triangle, i));
      rho += mp.bary(i) * dv(i);
    }
    const Vec2 g = mesh.tri_grad[mp.triangle] * dv;  // frame gradient of the density
    drho = Jf.transpose() * g;
  }
};

}  // namespace detail

inline std::vector<PohozaevRow> pohozaev_residual(const DomainMesh& mesh,
                                                  const TargetManifold& target,
                                                  const TwoForm& /*form*/,
                                                  const FunctionalParams& p, const MapState& u,
                                                  int center_vertex,
                                                  const std::vector<double>& radii,
                                                  int n_boundary = 64, int n_bulk_r = 24,
                                                  int n_bulk_t = 32) {
  validate_state(mesh, target, u);
  if (center_vertex < 0 || center_vertex >= mesh.n_vertices())
    throw IndexOutOfRange("pohozaev: bad center vertex");
  detail::ChartSampler S(mesh, u, center_vertex);

  std::vector<PohozaevRow> rows;
  for (double rg : radii) {
    if (!(rg > 0.0) || rg > M_PI / 2.0 + 1e-12)
      throw RadiusOutOfChart("pohozaev radius must lie in (0, pi/2]");
    PohozaevRow row;
    row.geodesic_radius = rg;
    const double t = 2.0 * std::tan(0.5 * rg);
    row.chart_radius = t;

    const double fd = 1e-3 * t;
    double lhs = 0.0, lhs_alt_r = 0.0, lhs_alt_t = 0.0;
    for (int k = 0; k < n_boundary; ++k) {
      const double th = 2.0 * M_PI * (k + 0.5) / n_boundary;
      const Vec2 w(t * std::cos(th), t * std::sin(th));
      Vec du1, du2;
      S.gradients(w, fd, du1, du2);
      const Vec2 er(std::cos(th), std::sin(th)), et(-std::sin(th), std::cos(th));
      const Vec dur = er(0) * du1 + er(1) * du2;
      const Vec dut_over_t = et(0) * du1 + et(1) * du2;  // (1/t) du/dtheta
      const double ds = t * 2.0 * M_PI / n_boundary;
      lhs += (dur.squaredNorm() - dut_over_t.squaredNorm()) * ds;
      const double Fpow = std::pow(p.tau + S.density_at(w), p.alpha - 1.0);
      lhs_alt_r += Fpow * dur.squaredNorm() * ds;
      lhs_alt_t += Fpow * dut_over_t.squaredNorm() * ds;
    }
    row.lhs = lhs;

    double rhs = 0.0, rhs_alt = 0.0;
    if (p.alpha > 1.0) {
      for (int j = 0; j < n_bulk_r; ++j) {
        const double r = (j + 0.5) * t / n_bulk_r;
        const double dr = t / n_bulk_r;
        for (int k = 0; k < n_bulk_t; ++k) {
          const double th = 2.0 * M_PI * (k + 0.5) / n_bulk_t;
          const Vec2 w(r * std::cos(th), r * std::sin(th));
          Vec du1, du2;
          S.gradients(w, std::max(fd, 1e-3 * r), du1, du2);
          // chart gradient of the recovered metric density
          const double hstep = std::max(fd, 1e-3 * r);
          const double d1 =
              (S.density_at(w + Vec2(hstep, 0)) - S.density_at(w - Vec2(hstep, 0))) / (2 * hstep);
          const double d2 =
              (S.density_at(w + Vec2(0, hstep)) - S.density_at(w - Vec2(0, hstep))) / (2 * hstep);
          const Vec2 er(std::cos(th), std::sin(th));
          const Vec dur = er(0) * du1 + er(1) * du2;
          const double rho = S.density_at(w);
          const Vec contraction = d1 * du1 + d2 * du2;  // [grad rho . grad u]^m
          const double dA = r * dr * 2.0 * M_PI / n_bulk_t;
          rhs += contraction.dot(dur) * r / (p.tau + rho) * dA;
          rhs_alt += std::pow(p.tau + rho, p.alpha - 1.0) *
                     (du1.squaredNorm() + du2.squaredNorm()) * dA;
        }
      }
      rhs *= -2.0 * (p.alpha - 1.0) / t;
      rhs_alt *= (1.0 - 1.0 / p.alpha) / t;
    }
    row.rhs = rhs;
    row.residual = std::abs(row.lhs - row.rhs);
    const double lhs_alt = (1.0 - 0.5 / p.alpha) * lhs_alt_r - (0.5 / p.alpha) * lhs_alt_t;
    row.residual_alt = std::abs(lhs_alt - rhs_alt);
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Energy identity bookkeeping for a finished continuation:
//   defect = E_alpha(final) - [ E(base) + tau^alpha Area / 2 + sum mu^2 E(w) ].
// ---------------------------------------------------------------------------

inline double energy_identity_defect(const ContinuationReport& rep) {
  if (rep.stages.empty()) throw NoContinuationData("energy_identity_defect: no stages");
  const auto& last = rep.stages.back();
  double bubbles = 0.0;
  if (last.bubble) bubbles += sqr(last.bubble->mu) * last.bubble->bubble_energy;
  const double floor = 0.5 * std::pow(rep.tau, last.alpha) * rep.area;
  return last.e_alpha - (rep.base_energy + floor + bubbles);
}

// ---------------------------------------------------------------------------
// Full diagnostics block.
// ---------------------------------------------------------------------------

struct DiagnosticsReport {
  ConformalityResult conformality;
  std::vector<PohozaevRow> pohozaev;
  Vec3 balancing_vector = Vec3::Zero();
  double balancing_scale = 0.0;  // integral of Psi_alpha for normalization
  double el_residual = 0.0;
  std::optional<double> energy_identity;
};

inline DiagnosticsReport compute_diagnostics(const DomainMesh& mesh, const TargetManifold& target,
                                             const TwoForm& form, const FunctionalParams& p,
                                             const MapState& u, int pohozaev_center,
                                             const std::vector<double>& pohozaev_radii) {
  DiagnosticsReport rep;
  rep.conformality = conformality(mesh, u);
  rep.pohozaev =
      pohozaev_residual(mesh, target, form, p, u, pohozaev_center, pohozaev_radii);
  rep.balancing_vector = balancing(mesh, u, p);
  const Vec dens = vertex_energy_density(mesh, u);
  for (int v = 0; v < mesh.n_vertices(); ++v)
    rep.balancing_scale += mesh.vertex_area(v) * psi_alpha(dens(v), p.alpha);
  rep.el_residual = gradient(mesh, target, form, p, u).norm;
  return rep;
}

}  // namespace hsphere
