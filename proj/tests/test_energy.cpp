#include <catch2/catch_amalgamated.hpp>

#include "hsphere/energy.hpp"
#include "helpers.hpp"

using namespace hsphere;

TEST_CASE("dirichlet energy oracles") {
  auto m = icosphere(4);
  MapState uc = MapState::Ones(m.n_vertices(), 3);
  REQUIRE(dirichlet(m, uc) < 1e-20);

  // identity cover of the unit sphere: E = 4pi within 0.5%
  REQUIRE(std::abs(dirichlet(m, m.V) - 4 * M_PI) < 0.005 * 4 * M_PI);

  // conformal degree-1 cover of a radius-r sphere: E = area = 4 pi r^2
  const double r = 1.7;
  MapState ur = r * m.V;
  REQUIRE(std::abs(dirichlet(m, ur) - 4 * M_PI * r * r) < 0.01 * 4 * M_PI * r * r);
}

TEST_CASE("alpha energy value and monotonicity") {
  auto m = icosphere(3);
  FunctionalParams p{1.3, 0.0, 1.0};
  MapState uc = MapState::Ones(m.n_vertices(), 3);
  REQUIRE(std::abs(alpha_energy(m, uc, p) - 0.5 * m.total_area()) < 1e-12);

  FunctionalParams p1{1.0, 0.0, 1.0};
  REQUIRE(std::abs(alpha_energy(m, m.V, p1) - 6 * M_PI) < 0.005 * 6 * M_PI);

  // integrand is monotone in alpha at tau = 1
  auto s2 = TargetManifold::round_sphere(2, 1.0);
  Rng rng(5);
  for (int i = 0; i < 5; ++i) {
    MapState u = testing::random_smooth_state(m, s2, rng);
    FunctionalParams lo{1.0 + 0.2 * rng.uniform(), 0, 1.0};
    FunctionalParams hi{lo.alpha + 0.3, 0, 1.0};
    REQUIRE(alpha_energy(m, u, hi) >= alpha_energy(m, u, lo));
    // floor: >= tau^alpha Area/2 with equality iff constant
    REQUIRE(alpha_energy(m, u, lo) > 0.5 * m.total_area());
  }
}

TEST_CASE("omega term: signed volume and orientation") {
  auto m = icosphere(4);
  // omega = 1/3 (y1 dy2^dy3 + y2 dy3^dy1 + y3 dy1^dy2) pulls back to the
  // signed enclosed volume by the divergence theorem
  auto f = TwoForm::volume(3, 1.0 / 3.0);
  MapState uc = MapState::Ones(m.n_vertices(), 3);
  REQUIRE(omega_term(m, uc, f) == 0.0);

  const double vol = omega_term(m, m.V, f);
  REQUIRE(std::abs(vol - 4.0 * M_PI / 3.0) < 0.01 * 4.0 * M_PI / 3.0);

  // orientation reversal flips the sign
  DomainMesh rev = m;
  rev.F.col(1).swap(rev.F.col(2));
  detail::mesh_finalize(rev);
  REQUIRE(std::abs(omega_term(rev, rev.V, f) + vol) < 1e-12);
}

TEST_CASE("total energy and the lambda comparison identity") {
  auto m = icosphere(3);
  auto s2 = TargetManifold::round_sphere(2, 1.0);
  auto f = TwoForm::cosine(3, 0.5, 2.0);
  Rng rng(19);
  MapState u = testing::random_smooth_state(m, s2, rng);

  FunctionalParams p0{1.2, 0.0, 1.0};
  REQUIRE(total_energy(m, u, f, p0) == alpha_energy(m, u, p0));

  // exact comparison identity of the monotonicity lemma:
  // E^{l1}/l1 - E^{l2}/l2 = (l2-l1)/(l1 l2) E_alpha(u)
  const double ea = alpha_energy(m, u, p0);
  const double w = omega_term(m, u, f);
  for (auto [l1, l2] : {std::pair{0.5, 1.0}, std::pair{1.0, 2.0}, std::pair{0.7, 3.1}}) {
    const double lhs = (ea / l1 + w) - (ea / l2 + w);
    const double rhs = (l2 - l1) / (l1 * l2) * ea;
    REQUIRE(std::abs(lhs - rhs) < 1e-12 * std::abs(rhs));
  }
}

TEST_CASE("gradient: constant maps are critical") {
  auto m = icosphere(2);
  auto s3 = TargetManifold::round_sphere(3, 1.0);
  auto f = TwoForm::cosine(4, 0.4, 1.5);
  FunctionalParams p{1.1, 0.8, 1.0};
  Vec c(4);
  c << 0.5, -0.5, 0.5, 0.5;
  MapState uc = MapState::Zero(m.n_vertices(), 4);
  uc.rowwise() = (c / c.norm()).transpose();
  auto g = gradient(m, s3, f, p, uc);
  REQUIRE(g.norm <= 1e-12);
}

TEST_CASE("gradient matches finite differences of the energy") {
  Rng rng(23);
  auto m = icosphere(2);
  for (const auto& [target, form] : testing::target_form_matrix()) {
    for (int rep = 0; rep < 3; ++rep) {
      FunctionalParams p{1.0 + 0.4 * rng.uniform(), 0.5 + rng.uniform(), 1.0};
      MapState u = testing::random_smooth_state(m, target, rng);
      TangentField V = testing::random_tangent_field(m, target, rng, u);
      const auto g = gradient(m, target, form, p, u);
      const double directional = mass_dot(m, g.grad, V);
      const double fd = testing::fd_directional(m, target, form, p, u, V);
      REQUIRE(std::abs(fd - directional) <=
              1e-6 * std::max({std::abs(fd), std::abs(directional), 1e-6}));
    }
  }
}

TEST_CASE("cmc form: the matched round sphere is a discrete near-critical point") {
  // with the cmc(h0) form, the outward unit-radius identity sphere at alpha=1
  // has EL residual at the mesh-error scale O(h)
  auto r3 = TargetManifold::flat_euclidean(3);
  double prev = -1;
  for (int s : {2, 3, 4}) {
    auto m = icosphere(s);
    auto f = TwoForm::cmc(3, 1.0);
    FunctionalParams p{1.0, 1.0, 1.0};
    auto g = gradient(m, r3, f, p, m.V);
    if (prev > 0) REQUIRE(g.norm < 0.72 * prev);  // O(h) decay
    prev = g.norm;
  }
  REQUIRE(prev < 0.08);
}

TEST_CASE("hessian: constant maps give the rough laplacian") {
  auto m = icosphere(2);
  auto s2 = TargetManifold::round_sphere(2, 1.0);
  auto f = TwoForm::volume(3, 0.7);
  FunctionalParams p{1.25, 0.9, 1.0};
  MapState uc = MapState::Zero(m.n_vertices(), 3);
  uc.col(2).setConstant(1.0);
  Rng rng(31);
  for (int i = 0; i < 5; ++i) {
    TangentField V = testing::random_tangent_field(m, s2, rng, uc);
    HessianOperator H(m, s2, f, p, uc);
    const double q = mass_dot(m, H.apply(V), V);
    // alpha * tau^{alpha-1} * int |grad V|^2 >= 0 (all grad-u terms vanish)
    double expect = 0.0;
    for (int t = 0; t < m.n_triangles(); ++t)
      expect += p.alpha * m.map_gradient(V, t).squaredNorm() * m.tri_area(t);
    REQUIRE(q >= 0.0);
    REQUIRE(std::abs(q - expect) < 1e-10 * (1.0 + expect));
  }
}

TEST_CASE("hessian symmetry and FD consistency") {
  Rng rng(37);
  auto m = icosphere(2);
  for (const auto& [target, form] : testing::target_form_matrix()) {
    FunctionalParams p{1.0 + 0.35 * rng.uniform(), 0.7, 1.0};
    MapState u = testing::random_smooth_state(m, target, rng);
    TangentField V = testing::random_tangent_field(m, target, rng, u);
    TangentField W = testing::random_tangent_field(m, target, rng, u);
    HessianOperator H(m, target, form, p, u);
    const double lvw = mass_dot(m, H.apply(V), W);
    const double lwv = mass_dot(m, H.apply(W), V);
    REQUIRE(std::abs(lvw - lwv) <= 1e-8 * std::max(1.0, std::abs(lvw)));

    // FD of the gradient with projection transport
    const double eps = 1e-5;
    auto gp = gradient(m, target, form, p, retract(target, u, eps * V));
    auto gm = gradient(m, target, form, p, retract(target, u, -eps * V));
    TangentField fd = project_field(target, u, (gp.grad - gm.grad) / (2 * eps));
    TangentField hv = H.apply(V);
    const double rel = mass_norm(m, fd - hv) / std::max(1e-12, mass_norm(m, hv));
    REQUIRE(rel < 1e-4);
  }
}

TEST_CASE("second variation FD consistency of the energy itself") {
  // d^2/dt^2 E(retract(u, tV)) at t=0 against the quadratic form
  Rng rng(41);
  auto m = icosphere(2);
  auto s2 = TargetManifold::round_sphere(2, 1.0);
  auto f = TwoForm::cosine(3, 0.6, 1.4);
  FunctionalParams p{1.15, 1.1, 1.0};
  MapState u = testing::random_smooth_state(m, s2, rng);
  TangentField V = testing::random_tangent_field(m, s2, rng, u);
  HessianOperator H(m, s2, f, p, u);
  const double q = mass_dot(m, H.apply(V), V);
  const double eps = 1e-4;
  const double e0 = total_energy(m, u, f, p);
  const double ep = total_energy(m, retract(s2, u, eps * V), f, p);
  const double em = total_energy(m, retract(s2, u, -eps * V), f, p);
  const double fd = (ep - 2 * e0 + em) / (eps * eps);
  REQUIRE(std::abs(fd - q) < 5e-5 * std::max(1.0, std::abs(q)));
}

TEST_CASE("conformal reparametrization changes energies only by mesh error") {
  auto r3 = TargetManifold::flat_euclidean(3);
  auto f = TwoForm::volume(3, 1.0 / 3.0);
  double prev_d = -1, prev_w = -1;
  for (int s : {2, 3, 4}) {
    auto m = icosphere(s);
    const double zoom = 1.35;
    MapState u = mobius_dilate_resample(m, m.V, 0, zoom);
    const double derr = std::abs(dirichlet(m, u) - dirichlet(m, m.V));
    const double werr = std::abs(omega_term(m, u, f) - omega_term(m, m.V, f));
    if (prev_d > 0) {
      REQUIRE(derr < 0.75 * prev_d);
      REQUIRE(werr < 0.75 * prev_w);
    }
    prev_d = derr;
    prev_w = werr;
  }
}
