#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include "hsphere/common.hpp"

namespace hsphere {

// ===========================================================================
// Target manifolds N embedded in R^K.
//
// Sign conventions (pinned by the unit-sphere oracles in the tests):
//   second_fundamental_form:  A(X,X) = -|X|^2 y  on the unit sphere at y,
//   curvature:                R(X,Y,Z,W) = <A(X,Z),A(Y,W)> - <A(X,W),A(Y,Z)>,
//   so R(X,Y,X,Y) = +1 for orthonormal X,Y on a unit sphere.
// ===========================================================================

enum class TargetKind { RoundSphere, Ellipsoid, FlatEuclidean, FlatTorus };

class TargetManifold {
 public:
  static TargetManifold round_sphere(int n, double radius) {
    if (n < 2 || n > 4) throw ValidationError("round_sphere: n must be 2, 3 or 4");
    if (radius <= 0) throw ValidationError("round_sphere: radius must be positive");
    TargetManifold m;
    m.kind_ = TargetKind::RoundSphere;
    m.ambient_dim_ = n + 1;
    m.intrinsic_dim_ = n;
    m.radius_ = radius;
    m.tubular_radius_ = radius;  // projection well-defined away from the center
    m.scale_ = radius;
    return m;
  }

  static TargetManifold ellipsoid(const Vec& semiaxes) {
    const int K = static_cast<int>(semiaxes.size());
    if (K != 3 && K != 4) throw ValidationError("ellipsoid: need 3 or 4 semiaxes");
    if (semiaxes.minCoeff() <= 0) throw ValidationError("ellipsoid: semiaxes must be positive");
    TargetManifold m;
    m.kind_ = TargetKind::Ellipsoid;
    m.ambient_dim_ = K;
    m.intrinsic_dim_ = K - 1;
    m.axes_ = semiaxes;
    // conservative bound on the reach: smallest radius of curvature
    const double amin = semiaxes.minCoeff(), amax = semiaxes.maxCoeff();
    m.tubular_radius_ = amin * amin / amax;
    m.scale_ = amax;
    return m;
  }

  static TargetManifold flat_euclidean(int K) {
    if (K < 2 || K > 8) throw ValidationError("flat_euclidean: K out of range");
    TargetManifold m;
    m.kind_ = TargetKind::FlatEuclidean;
    m.ambient_dim_ = K;
    m.intrinsic_dim_ = K;
    m.tubular_radius_ = std::numeric_limits<double>::infinity();
    m.scale_ = 1.0;
    return m;
  }

  // Flat k-torus with the given periods, embedded as a product of k circles
  // in R^{2k} (radius L_i / 2pi each); intrinsically flat.
  static TargetManifold flat_torus(int k, const Vec& periods) {
    if (k < 2 || k > 4) throw ValidationError("flat_torus: k must be 2, 3 or 4");
    if (periods.size() != k || periods.minCoeff() <= 0)
      throw ValidationError("flat_torus: need k positive periods");
    TargetManifold m;
    m.kind_ = TargetKind::FlatTorus;
    m.ambient_dim_ = 2 * k;
    m.intrinsic_dim_ = k;
    m.axes_ = periods / (2.0 * M_PI);  // circle radii
    m.tubular_radius_ = m.axes_.minCoeff();
    m.scale_ = m.axes_.maxCoeff();
    return m;
  }

  TargetKind kind() const { return kind_; }
  int ambient_dim() const { return ambient_dim_; }
  int dim() const { return intrinsic_dim_; }
  double tubular_radius() const { return tubular_radius_; }
  double tol_on_manifold() const { return 1e-10 * scale_; }
  double scale() const { return scale_; }
  bool is_flat() const {
    return kind_ == TargetKind::FlatEuclidean || kind_ == TargetKind::FlatTorus;
  }

  std::string kind_string() const {
    std::ostringstream os;
    switch (kind_) {
      case TargetKind::RoundSphere: os << "round_sphere(n=" << intrinsic_dim_ << ",r=" << radius_ << ")"; break;
      case TargetKind::Ellipsoid:   os << "ellipsoid("; for (int i = 0; i < axes_.size(); ++i) os << (i ? "," : "") << axes_(i); os << ")"; break;
      case TargetKind::FlatEuclidean: os << "flat_euclidean(" << ambient_dim_ << ")"; break;
      case TargetKind::FlatTorus:   os << "flat_torus(k=" << intrinsic_dim_ << ")"; break;
    }
    return os.str();
  }

  // ------------------------------------------------------------------
  // Nearest-point projection. Throws OutsideTubularNeighborhood when the
  // point is too far for the projection to be well-defined.
  // ------------------------------------------------------------------
  Vec project(const Vec& y) const {
    check_dim(y);
    switch (kind_) {
      case TargetKind::FlatEuclidean:
        return y;
      case TargetKind::RoundSphere: {
        const double r = y.norm();
        if (r < radius_ - tubular_radius_ + 1e-14 * scale_)
          throw OutsideTubularNeighborhood("project: point at sphere center");
        return (radius_ / r) * y;
      }
      case TargetKind::FlatTorus: {
        Vec p(ambient_dim_);
        for (int i = 0; i < intrinsic_dim_; ++i) {
          const double x = y(2 * i), z = y(2 * i + 1);
          const double r = std::hypot(x, z);
          if (r < 1e-13 * scale_)
            throw OutsideTubularNeighborhood("project: point on torus axis");
          p(2 * i) = axes_(i) * x / r;
          p(2 * i + 1) = axes_(i) * z / r;
        }
        return p;
      }
      case TargetKind::Ellipsoid:
        return project_ellipsoid(y);
    }
    throw Error("unreachable");
  }

  bool on_manifold(const Vec& y, double tol_mult = 1.0) const {
    if (y.size() != ambient_dim_) return false;
    const double tol = tol_on_manifold() * tol_mult;
    switch (kind_) {
      case TargetKind::FlatEuclidean: return true;
      case TargetKind::RoundSphere:   return std::abs(y.norm() - radius_) <= tol;
      case TargetKind::FlatTorus: {
        for (int i = 0; i < intrinsic_dim_; ++i)
          if (std::abs(std::hypot(y(2 * i), y(2 * i + 1)) - axes_(i)) > tol) return false;
        return true;
      }
      case TargetKind::Ellipsoid: {
        double g = -1.0;
        for (int i = 0; i < ambient_dim_; ++i) g += sqr(y(i) / axes_(i));
        return std::abs(g) <= 4.0 * tol / axes_.minCoeff();
      }
    }
    return false;
  }

  // Orthogonal projection of an ambient vector onto T_y N.
  Vec tangent_project(const Vec& y, const Vec& v) const {
    require_on_manifold(y, "tangent_project");
    check_dim(v);
    switch (kind_) {
      case TargetKind::FlatEuclidean:
        return v;
      case TargetKind::RoundSphere: {
        const Vec n = y / radius_;
        return v - n.dot(v) * n;
      }
      case TargetKind::FlatTorus: {
        Vec w = v;
        for (int i = 0; i < intrinsic_dim_; ++i) {
          Vec2 n(y(2 * i), y(2 * i + 1));
          n /= n.norm();
          const double c = n(0) * v(2 * i) + n(1) * v(2 * i + 1);
          w(2 * i) -= c * n(0);
          w(2 * i + 1) -= c * n(1);
        }
        return w;
      }
      case TargetKind::Ellipsoid: {
        const Vec n = unit_normal(y);
        return v - n.dot(v) * n;
      }
    }
    throw Error("unreachable");
  }

  // Second fundamental form A(X,Y): normal-valued, symmetric bilinear.
  // A(X,X) = -|X|^2 y / r^2 on a radius-r sphere.
  Vec second_fundamental_form(const Vec& y, const Vec& X, const Vec& Y) const {
    require_on_manifold(y, "second_fundamental_form");
    switch (kind_) {
      case TargetKind::FlatEuclidean:
        return Vec::Zero(ambient_dim_);
      case TargetKind::RoundSphere:
        return -(X.dot(Y) / (radius_ * radius_)) * y;
      case TargetKind::FlatTorus: {
        Vec a = Vec::Zero(ambient_dim_);
        for (int i = 0; i < intrinsic_dim_; ++i) {
          Vec2 n(y(2 * i), y(2 * i + 1));
          const double r = n.norm();
          n /= r;
          // tangential (angular) components of X, Y in circle plane i
          const double xt = -n(1) * X(2 * i) + n(0) * X(2 * i + 1);
          const double yt = -n(1) * Y(2 * i) + n(0) * Y(2 * i + 1);
          a(2 * i) += -(xt * yt / r) * n(0);
          a(2 * i + 1) += -(xt * yt / r) * n(1);
        }
        return a;
      }
      case TargetKind::Ellipsoid: {
        // level set g = sum y_i^2/a_i^2 - 1; A(X,Y) = -(X^T Hg Y / |grad g|) n
        const Vec g = grad_quadric(y);
        const double gn = g.norm();
        double q = 0.0;
        for (int i = 0; i < ambient_dim_; ++i) q += 2.0 * X(i) * Y(i) / sqr(axes_(i));
        return -(q / gn) * (g / gn);
      }
    }
    throw Error("unreachable");
  }

  // Riemann tensor via the Gauss equation; identically zero for flat kinds.
  double curvature(const Vec& y, const Vec& X, const Vec& Y, const Vec& Z, const Vec& W) const {
    if (is_flat()) {
      require_on_manifold(y, "curvature");
      return 0.0;
    }
    const Vec axz = second_fundamental_form(y, X, Z);
    const Vec ayw = second_fundamental_form(y, Y, W);
    const Vec axw = second_fundamental_form(y, X, W);
    const Vec ayz = second_fundamental_form(y, Y, Z);
    return axz.dot(ayw) - axw.dot(ayz);
  }

  // Ricci curvature Ric(X,X) for unit X, from the Gauss-assembled tensor.
  double ricci(const Vec& y, const Vec& X) const {
    if (is_flat()) return 0.0;
    const Mat F = tangent_frame(y);
    double s = 0.0;
    for (int i = 0; i < F.cols(); ++i) s += curvature(y, X, F.col(i), X, F.col(i));
    return s;
  }

  // Weingarten-type correction used by the exact Riemannian Hessian: returns
  // the tangent vector L with <L, w> = f . A(v, w) for every tangent w.
  Vec shape_correction(const Vec& y, const Vec& f, const Vec& v) const {
    switch (kind_) {
      case TargetKind::FlatEuclidean:
        return Vec::Zero(ambient_dim_);
      case TargetKind::RoundSphere:
        return -(f.dot(y) / (radius_ * radius_)) * v;
      case TargetKind::FlatTorus: {
        Vec out = Vec::Zero(ambient_dim_);
        for (int i = 0; i < intrinsic_dim_; ++i) {
          Vec2 n(y(2 * i), y(2 * i + 1));
          const double r = n.norm();
          n /= r;
          const double fn = f(2 * i) * n(0) + f(2 * i + 1) * n(1);
          const double vt = -n(1) * v(2 * i) + n(0) * v(2 * i + 1);
          out(2 * i) += -(fn * vt / r) * (-n(1));
          out(2 * i + 1) += -(fn * vt / r) * n(0);
        }
        return out;
      }
      case TargetKind::Ellipsoid: {
        const Vec g = grad_quadric(y);
        const double gn = g.norm();
        const double fn = f.dot(g) / gn;
        Vec sv(ambient_dim_);
        for (int i = 0; i < ambient_dim_; ++i) sv(i) = 2.0 * v(i) / sqr(axes_(i));
        return -(fn / gn) * tangent_project(y, sv);
      }
    }
    throw Error("unreachable");
  }

  // Deterministic orthonormal tangent frame (K x dim), Gram-Schmidt over the
  // projected ambient axes in fixed order.
  Mat tangent_frame(const Vec& y) const {
    const int K = ambient_dim_, n = intrinsic_dim_;
    Mat F(K, n);
    int got = 0;
    for (int a = 0; a < K && got < n; ++a) {
      Vec v = tangent_project(y, Vec::Unit(K, a));
      for (int j = 0; j < got; ++j) v -= F.col(j).dot(v) * F.col(j);
      const double nv = v.norm();
      if (nv > 1e-8) F.col(got++) = v / nv;
    }
    if (got != n) throw Error("tangent_frame: degenerate frame");
    return F;
  }

  // Unit normal for the codimension-one kinds (sphere, ellipsoid).
  Vec unit_normal(const Vec& y) const {
    switch (kind_) {
      case TargetKind::RoundSphere: return y / radius_;
      case TargetKind::Ellipsoid: {
        Vec g = grad_quadric(y);
        return g / g.norm();
      }
      default:
        throw Error("unit_normal: target is not a hypersurface");
    }
  }

 private:
  TargetManifold() = default;

  void check_dim(const Vec& y) const {
    if (y.size() != ambient_dim_) throw ValidationError("ambient vector has wrong dimension");
  }

  void require_on_manifold(const Vec& y, const char* who) const {
    check_dim(y);
    if (!on_manifold(y, 100.0))
      throw PointOffManifold(std::string(who) + ": point is off the manifold");
  }

  Vec grad_quadric(const Vec& y) const {
    Vec g(ambient_dim_);
    for (int i = 0; i < ambient_dim_; ++i) g(i) = 2.0 * y(i) / sqr(axes_(i));
    return g;
  }

  Vec project_ellipsoid(const Vec& y) const {
    // nearest point: p_i = y_i a_i^2/(a_i^2 + t), root of phi(t) = sum p_i^2/a_i^2 - 1
    const int K = ambient_dim_;
    auto phi = [&](double t) {
      double s = -1.0;
      for (int i = 0; i < K; ++i) s += sqr(y(i) * axes_(i) / (sqr(axes_(i)) + t));
      return s;
    };
    const double amin2 = sqr(axes_.minCoeff());
    double lo = -amin2 * (1.0 - 1e-12), hi = axes_.maxCoeff() * (y.norm() + axes_.maxCoeff());
    if (phi(lo) < 0)
      throw OutsideTubularNeighborhood("project: point too close to the ellipsoid core");
    while (phi(hi) > 0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {  // bisection; monotone decreasing phi
      const double mid = 0.5 * (lo + hi);
      (phi(mid) > 0 ? lo : hi) = mid;
      if (hi - lo < 1e-16 * (1.0 + std::abs(hi))) break;
    }
    const double t = 0.5 * (lo + hi);
    Vec p(K);
    for (int i = 0; i < K; ++i) p(i) = y(i) * sqr(axes_(i)) / (sqr(axes_(i)) + t);
    // polish the residual radially along the quadric gradient
    double g = -1.0;
    for (int i = 0; i < K; ++i) g += sqr(p(i) / axes_(i));
    if (std::abs(g) > 1e-13) {
      double norm2 = 0.0;
      for (int i = 0; i < K; ++i) norm2 += sqr(p(i) / sqr(axes_(i)));
      const double step = 0.5 * g / norm2;
      for (int i = 0; i < K; ++i) p(i) -= step * p(i) / sqr(axes_(i));
    }
    return p;
  }

  TargetKind kind_ = TargetKind::FlatEuclidean;
  int ambient_dim_ = 3;
  int intrinsic_dim_ = 3;
  double radius_ = 1.0;
  double tubular_radius_ = 1.0;
  double scale_ = 1.0;
  Vec axes_;  // ellipsoid semiaxes or torus circle radii
};

// ===========================================================================
// Two-forms omega on the ambient neighborhood of N.
//
// Coefficients are stored as the antisymmetric matrix W(y) of the expansion
// omega = sum_{i<j} W_ij dy^i ^ dy^j, i.e. W_23 = y^1 for omega = y^1 dy^2^dy^3.
// The pullback density of a map with frame gradient rows d1, d2 is d1^T W d2,
// and the induced tensor is H^k_ij = d_k W_ij + d_i W_jk + d_j W_ki (totally
// antisymmetric). With these conventions the built-in `volume` form with
// coefficient c has d(omega) = 3c dy^1^dy^2^dy^3 and round spheres of radius
// -2/(3c) about the origin are critical points of E + int u*omega.
// ===========================================================================

class TwoForm {
 public:
  using CoeffFn = std::function<Mat(const Vec&)>;

  static TwoForm zero(int K) {
    TwoForm f(K, "zero");
    f.is_zero_ = true;
    return f;
  }

  // W_23 = c y^1, W_31 = c y^2, W_12 = c y^3 on the first three coordinates.
  // d(omega) = 3c dvol_3; round spheres of radius r about the origin solve the
  // flat-target H-surface equation when c = -2/(3r).
  static TwoForm volume(int K, double coef) {
    if (K < 3) throw ValidationError("volume form needs K >= 3");
    TwoForm f(K, "volume");
    f.p1_ = coef;
    f.kind_ = Builtin::Volume;
    return f;
  }

  // The volume-type form matched to prescribed mean curvature h0 > 0: round
  // spheres of radius 1/h0 about the origin are critical.
  static TwoForm cmc(int K, double h0) {
    TwoForm f = volume(K, -2.0 * h0 / 3.0);
    f.name_ = "cmc";
    f.p2_ = h0;
    return f;
  }

  // W_23 = a cos(k y^1), W_31 = a cos(k y^2), W_12 = a cos(k y^3).
  static TwoForm cosine(int K, double amplitude, double wavenumber) {
    if (K < 3) throw ValidationError("cosine form needs K >= 3");
    TwoForm f(K, "cosine");
    f.p1_ = amplitude;
    f.p2_ = wavenumber;
    f.kind_ = Builtin::Cosine;
    return f;
  }

  // Constant coefficient matrix (d omega = 0, so H vanishes).
  static TwoForm constant(const Mat& W) {
    TwoForm f(static_cast<int>(W.rows()), "constant");
    f.kind_ = Builtin::Constant;
    f.cW_ = 0.5 * (W - W.transpose());  // enforce antisymmetry
    return f;
  }

  // omega = y^1 dy^2 ^ dy^3 (linear coefficients; used to pin conventions).
  static TwoForm linear_y1(int K) {
    if (K < 3) throw ValidationError("linear_y1 form needs K >= 3");
    TwoForm f(K, "linear_y1");
    f.kind_ = Builtin::LinearY1;
    return f;
  }

  // User-supplied coefficients with finite-difference derivatives.
  static TwoForm from_callback(int K, CoeffFn fn, double fd_step = 1e-5) {
    TwoForm f(K, "callback");
    f.kind_ = Builtin::Callback;
    f.fn_ = std::move(fn);
    f.fd_step_ = fd_step;
    return f;
  }

  int ambient_dim() const { return K_; }
  bool is_zero() const { return is_zero_; }
  const std::string& name() const { return name_; }
  double param1() const { return p1_; }
  double param2() const { return p2_; }

  // omega_ij(y) as an antisymmetric K x K matrix.
  Mat omega(const Vec& y) const {
    Mat W = Mat::Zero(K_, K_);
    switch (kind_) {
      case Builtin::Zero: break;
      case Builtin::Volume:
        set(W, 1, 2, p1_ * y(0));
        set(W, 2, 0, p1_ * y(1));
        set(W, 0, 1, p1_ * y(2));
        break;
      case Builtin::Cosine:
        set(W, 1, 2, p1_ * std::cos(p2_ * y(0)));
        set(W, 2, 0, p1_ * std::cos(p2_ * y(1)));
        set(W, 0, 1, p1_ * std::cos(p2_ * y(2)));
        break;
      case Builtin::Constant: W = cW_; break;
      case Builtin::LinearY1: set(W, 1, 2, y(0)); break;
      case Builtin::Callback: {
        Mat M = fn_(y);
        W = 0.5 * (M - M.transpose());
        break;
      }
    }
    return W;
  }

  // dW/dy^k as an antisymmetric matrix.
  Mat d_omega(const Vec& y, int k) const {
    Mat W = Mat::Zero(K_, K_);
    switch (kind_) {
      case Builtin::Zero:
      case Builtin::Constant: break;
      case Builtin::Volume:
        if (k == 0) set(W, 1, 2, p1_);
        if (k == 1) set(W, 2, 0, p1_);
        if (k == 2) set(W, 0, 1, p1_);
        break;
      case Builtin::Cosine:
        if (k == 0) set(W, 1, 2, -p1_ * p2_ * std::sin(p2_ * y(0)));
        if (k == 1) set(W, 2, 0, -p1_ * p2_ * std::sin(p2_ * y(1)));
        if (k == 2) set(W, 0, 1, -p1_ * p2_ * std::sin(p2_ * y(2)));
        break;
      case Builtin::LinearY1:
        if (k == 0) set(W, 1, 2, 1.0);
        break;
      case Builtin::Callback: {
        Vec yp = y, ym = y;
        yp(k) += fd_step_;
        ym(k) -= fd_step_;
        W = (omega_raw(yp) - omega_raw(ym)) / (2.0 * fd_step_);
        break;
      }
    }
    return W;
  }

  // d^2 W / dy^k dy^l.
  Mat dd_omega(const Vec& y, int k, int l) const {
    Mat W = Mat::Zero(K_, K_);
    switch (kind_) {
      case Builtin::Zero:
      case Builtin::Constant:
      case Builtin::Volume:
      case Builtin::LinearY1: break;  // coefficients affine, second derivatives vanish
      case Builtin::Cosine:
        if (k == l) {
          if (k == 0) set(W, 1, 2, -p1_ * p2_ * p2_ * std::cos(p2_ * y(0)));
          if (k == 1) set(W, 2, 0, -p1_ * p2_ * p2_ * std::cos(p2_ * y(1)));
          if (k == 2) set(W, 0, 1, -p1_ * p2_ * p2_ * std::cos(p2_ * y(2)));
        }
        break;
      case Builtin::Callback: {
        Vec yp = y, ym = y;
        yp(l) += fd_step_;
        ym(l) -= fd_step_;
        W = (d_omega_fd(yp, k) - d_omega_fd(ym, k)) / (2.0 * fd_step_);
        break;
      }
    }
    return W;
  }

  // H(v1,v2)^k = sum_ij H^k_ij v1^i v2^j with the cyclic coefficient formula.
  Vec induced_H(const Vec& y, const Vec& v1, const Vec& v2) const {
    if (is_zero_) return Vec::Zero(K_);
    std::vector<Mat> dW(K_);
    for (int k = 0; k < K_; ++k) dW[k] = d_omega(y, k);
    Vec h = Vec::Zero(K_);
    for (int k = 0; k < K_; ++k) {
      double s = 0.0;
      for (int i = 0; i < K_; ++i)
        for (int j = 0; j < K_; ++j) {
          const double Hkij = dW[k](i, j) + dW[i](j, k) + dW[j](k, i);
          s += Hkij * v1(i) * v2(j);
        }
      h(k) = s;
    }
    return h;
  }

  // <(nabla_V H)(v1,v2), V> with the flat ambient connection of the extension.
  double grad_H(const Vec& y, const Vec& v1, const Vec& v2, const Vec& V) const {
    if (is_zero_) return 0.0;
    double s = 0.0;
    for (int k = 0; k < K_; ++k) {
      for (int l = 0; l < K_; ++l) {
        if (V(l) == 0.0) continue;
        const Mat dWkl = dd_omega(y, k, l);
        // dH^k_ij/dy^l contracted with v1^i v2^j
        for (int i = 0; i < K_; ++i)
          for (int j = 0; j < K_; ++j) {
            const double dH = dWkl(i, j) + dd_omega_entry(y, i, l, j, k) + dd_omega_entry(y, j, l, k, i);
            s += V(l) * dH * v1(i) * v2(j) * V(k);
          }
      }
    }
    return s;
  }

 private:
  enum class Builtin { Zero, Volume, Cosine, Constant, LinearY1, Callback };

  TwoForm(int K, std::string name) : K_(K), name_(std::move(name)) {}

  static void set(Mat& W, int i, int j, double v) {
    W(i, j) = v;
    W(j, i) = -v;
  }

  Mat omega_raw(const Vec& y) const {
    Mat M = fn_(y);
    return 0.5 * (M - M.transpose());
  }

  Mat d_omega_fd(const Vec& y, int k) const {
    Vec yp = y, ym = y;
    yp(k) += fd_step_;
    ym(k) -= fd_step_;
    return (omega_raw(yp) - omega_raw(ym)) / (2.0 * fd_step_);
  }

  double dd_omega_entry(const Vec& y, int deriv1, int deriv2, int i, int j) const {
    return dd_omega(y, deriv1, deriv2)(i, j);
  }

  int K_;
  std::string name_;
  Builtin kind_ = Builtin::Zero;
  bool is_zero_ = false;
  double p1_ = 0.0, p2_ = 0.0;
  Mat cW_;
  CoeffFn fn_;
  double fd_step_ = 1e-5;
};

}  // namespace hsphere
