#pragma once

#include <cmath>

#include "hsphere/common.hpp"
#include "hsphere/mesh.hpp"

namespace hsphere {

// Conformal (stereographic-type) chart of the round domain sphere centered at
// a point c: chart radius rho = 2 tan(r/2) of the geodesic radius r, so the
// metric is e^phi (dx^2 + dy^2) with e^{phi/2} = 1/(1 + |w|^2/4) and phi(0)=0.
class SphereChart {
 public:
  explicit SphereChart(const Vec3& center) : c_(center.normalized()) {
    // deterministic tangent basis
    int k = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(c_(i)) < std::abs(c_(k))) k = i;
    t1_ = Vec3::Unit(k) - c_(k) * c_;
    t1_.normalize();
    t2_ = c_.cross(t1_);
  }

  Vec2 to_chart(const Vec3& p) const {
    const Vec3 q = p.normalized();
    const double cr = std::clamp(c_.dot(q), -1.0, 1.0);
    const double r = std::acos(cr);
    if (r < 1e-15) return Vec2::Zero();
    const double rc = std::min(r, M_PI - 1e-9);  // keep the antipode finite
    Vec3 d = q - cr * c_;
    const double dn = d.norm();
    // direction is undefined exactly at the antipode; pick the t1 axis
    d = (dn > 1e-14) ? Vec3(d / dn) : t1_;
    const double rho = 2.0 * std::tan(0.5 * rc);
    return rho * Vec2(d.dot(t1_), d.dot(t2_));
  }

  Vec3 from_chart(const Vec2& w) const {
    const double rho = w.norm();
    if (rho < 1e-300) return c_;
    const double r = 2.0 * std::atan(0.5 * rho);
    const Vec2 d = w / rho;
    return std::cos(r) * c_ + std::sin(r) * (d(0) * t1_ + d(1) * t2_);
  }

  // conformal factor e^phi of the round metric in this chart
  double conformal_factor(const Vec2& w) const {
    const double q = 1.0 + 0.25 * w.squaredNorm();
    return 1.0 / (q * q);
  }

  // differential of chart^{-1}: columns are dp/dw_a (3 x 2)
  Eigen::Matrix<double, 3, 2> from_chart_jacobian(const Vec2& w) const {
    Eigen::Matrix<double, 3, 2> J;
    const double rho = w.norm();
    if (rho < 1e-12) {
      // dp/dw at the center: dr/drho = 1, directions map to the tangent basis
      J.col(0) = t1_;
      J.col(1) = t2_;
      return J;
    }
    const double r = 2.0 * std::atan(0.5 * rho);
    const Vec2 d = w / rho;
    const Vec3 T = d(0) * t1_ + d(1) * t2_;
    const double drdrho = 1.0 / (1.0 + 0.25 * rho * rho);
    const Vec3 dpdr = -std::sin(r) * c_ + std::cos(r) * T;
    // dw decomposes into the radial part (d . dw) and the angular part
    for (int a = 0; a < 2; ++a) {
      const Vec2 e = Vec2::Unit(a);
      const double radial = d.dot(e);
      const Vec2 dd = (e - radial * d) / rho;
      J.col(a) = dpdr * (drdrho * radial) + std::sin(r) * (dd(0) * t1_ + dd(1) * t2_);
    }
    return J;
  }

  const Vec3& center() const { return c_; }

 private:
  Vec3 c_, t1_, t2_;
};

// Domain Mobius dilation with the given zoom about a mesh vertex, applied by
// resampling onto the same mesh: out(x) = u(chart^{-1}(chart(x)/zoom)).
// zoom > 1 magnifies the neighborhood of the center.
inline MapState mobius_dilate_resample(const DomainMesh& mesh, const MapState& u,
                                       int center_vertex, double zoom) {
  if (center_vertex < 0 || center_vertex >= mesh.n_vertices())
    throw IndexOutOfRange("mobius_dilate_resample: bad center vertex");
  if (!(zoom > 0)) throw ValidationError("mobius_dilate_resample: zoom must be positive");
  SphereChart chart(mesh.V.row(center_vertex).transpose());
  MapState out(u.rows(), u.cols());
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    const Vec2 w = chart.to_chart(mesh.V.row(v).transpose());
    const Vec3 src = chart.from_chart(w / zoom);
    out.row(v) = interpolate_at(mesh, u, src).transpose();
  }
  return out;
}

}  // namespace hsphere
