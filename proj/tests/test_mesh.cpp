#include <catch2/catch_amalgamated.hpp>

#include "hsphere/energy.hpp"
#include "hsphere/mesh.hpp"
#include "hsphere/sphere_chart.hpp"

using namespace hsphere;

TEST_CASE("icosphere combinatorics and area") {
  auto m0 = icosphere(0);
  REQUIRE(m0.n_vertices() == 12);
  REQUIRE(m0.n_triangles() == 20);
  auto m2 = icosphere(2);
  REQUIRE(m2.n_vertices() == 162);
  REQUIRE(m2.n_triangles() == 320);
  for (int s = 0; s <= 4; ++s) REQUIRE(icosphere(s).n_vertices() == 10 * (1 << (2 * s)) + 2);

  auto m4 = icosphere(4);
  REQUIRE(std::abs(m4.total_area() - 4.0 * M_PI) < 0.001 * 4.0 * M_PI);
  REQUIRE(std::abs(m4.vertex_area.sum() - m4.total_area()) < 1e-10);
  // flat-triangle areas also close at this resolution
  double flat = 0.0;
  for (int t = 0; t < m4.n_triangles(); ++t) {
    Vec3 a = m4.V.row(m4.F(t, 0)), b = m4.V.row(m4.F(t, 1)), c = m4.V.row(m4.F(t, 2));
    flat += 0.5 * (b - a).cross(c - a).norm();
  }
  REQUIRE(std::abs(flat - 4.0 * M_PI) < 0.002 * 4.0 * M_PI);

  REQUIRE_THROWS_AS(icosphere(-1), SubdivisionOutOfRange);
  REQUIRE_THROWS_AS(icosphere(9), SubdivisionOutOfRange);

  // original vertices keep their positions across subdivision levels
  auto m3 = icosphere(3);
  REQUIRE((m3.V.topRows(12) - m0.V).norm() < 1e-15);
}

TEST_CASE("emitted meshes are closed and consistently oriented") {
  for (int s : {0, 1, 2, 3}) {
    auto m = icosphere(s);
    REQUIRE(m.oriented_closed());
    // outward orientation: positive signed volume
    double vol = 0.0;
    for (int t = 0; t < m.n_triangles(); ++t) {
      Vec3 a = m.V.row(m.F(t, 0)), b = m.V.row(m.F(t, 1)), c = m.V.row(m.F(t, 2));
      vol += a.dot(b.cross(c)) / 6.0;
    }
    REQUIRE(vol > 0.0);
  }
}

TEST_CASE("map gradient is exact for affine data") {
  auto m = icosphere(2);
  // constant map -> zero gradient
  MapState uc = MapState::Zero(m.n_vertices(), 3);
  uc.col(0).setConstant(1.7);
  for (int t = 0; t < m.n_triangles(); ++t)
    REQUIRE(m.map_gradient(uc, t).norm() < 1e-12);

  // affine function of the ambient coordinates restricted to a triangle:
  // the intrinsic gradient must reproduce the tangential part of the slope
  Mat Aff = Mat::Random(3, 3);
  MapState ua = m.V * Aff.transpose();
  for (int t : {0, 11, 101, 319}) {
    const Mat D = m.map_gradient(ua, t);
    const auto& E = m.tri_frame[t];
    // rows of D are d(Aff x)/de_i = Aff e_i
    for (int r = 0; r < 2; ++r)
      REQUIRE((D.row(r).transpose() - Aff * E.col(r)).norm() < 1e-12);
  }

  // frame invariance: |grad|^2 of the identity is 2 for flat triangles on the sphere,
  // independent of the frame choice up to mesh error
  MapState id = m.V;
  for (int t = 0; t < m.n_triangles(); ++t) {
    const double g2 = m.map_gradient(id, t).squaredNorm();
    REQUIRE(g2 > 1.9);
    REQUIRE(g2 < 2.1);
  }

  REQUIRE_THROWS_AS(m.map_gradient(id, m.n_triangles()), IndexOutOfRange);
}

TEST_CASE("annulus energy probes") {
  auto m = icosphere(3);
  MapState id = m.V;
  const double total = dirichlet(m, id);
  REQUIRE(std::abs(m.annulus_energy(id, 0, 0.0, M_PI + 1e-9) - total) < 1e-12);

  MapState uc = MapState::Ones(m.n_vertices(), 3) / std::sqrt(3.0);
  REQUIRE(m.annulus_energy(uc, 0, 0.1, 2.0) < 1e-20);

  // hemisphere of the identity map carries half the energy up to mesh error
  const double half = m.annulus_energy(id, 0, 0.0, M_PI / 2.0);
  REQUIRE(std::abs(half - 0.5 * total) < 0.02 * total);

  REQUIRE_THROWS_AS(m.annulus_energy(id, 0, 1.0, 0.5), ValidationError);
}

TEST_CASE("refinement convergence of conformal-map Dirichlet energy") {
  // any degree-1 conformal self-map of the sphere has continuum energy 4pi;
  // the identity is exact here, a Mobius-dilated map converges at O(h^2)
  REQUIRE(std::abs(dirichlet(icosphere(3), icosphere(3).V) - 4.0 * M_PI) < 1e-10);
  double prev_err = -1.0;
  for (int s : {2, 3, 4}) {
    auto m = icosphere(s);
    SphereChart chart(Vec3(0, 0, 1));
    MapState u(m.n_vertices(), 3);
    for (int v = 0; v < m.n_vertices(); ++v)
      u.row(v) = chart.from_chart(1.5 * chart.to_chart(m.V.row(v).transpose())).transpose();
    const double err = std::abs(dirichlet(m, u) - 4.0 * M_PI);
    if (prev_err > 0) REQUIRE(err < 0.35 * prev_err);  // h^2 would give 0.25
    prev_err = err;
  }
}

TEST_CASE("point location and interpolation") {
  auto m = icosphere(3);
  Rng rng(21);
  Mat Aff = Mat::Random(3, 3);
  MapState ua = m.V * Aff.transpose();
  for (int i = 0; i < 50; ++i) {
    Vec3 p = rng.normal_vec(3);
    p.normalize();
    const auto mp = locate_point(m, p);
    REQUIRE(mp.triangle >= 0);
    REQUIRE(mp.bary.minCoeff() >= -1e-12);
    // interpolation reproduces affine data at the projected point
    Vec3 flat = Vec3::Zero();
    for (int k = 0; k < 3; ++k) flat += mp.bary(k) * m.V.row(m.F(mp.triangle, k)).transpose();
    const Vec got = interpolate(m, ua, mp);
    REQUIRE((got - Aff * flat).norm() < 1e-12);
  }
}

TEST_CASE("mesh export writes indexed triangles") {
  auto m = icosphere(0);
  const std::string path = "/tmp/hsphere_test_mesh.obj";
  m.export_obj(path);
  std::ifstream is(path);
  REQUIRE(is.good());
  int nv = 0, nf = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("v ", 0) == 0) ++nv;
    if (line.rfind("f ", 0) == 0) ++nf;
  }
  REQUIRE(nv == 12);
  REQUIRE(nf == 20);
}
