#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <vector>

#include "hsphere/common.hpp"

namespace hsphere {

// ===========================================================================
// Triangulated domain: the unit 2-sphere with P1 elements. Vertex positions
// double as the coordinate functions iota^i used by the balancing identity.
// Triangles are flat; per-triangle gradients live in an orthonormal frame
// (e1, e2) aligned with the triangle's orientation.
// ===========================================================================

class DomainMesh {
 public:
  Mat V;                                 // n_vertices x 3, all on the unit sphere
  Eigen::MatrixXi F;                     // n_triangles x 3, consistently oriented
  Vec tri_area;                          // flat triangle areas
  Vec vertex_area;                       // lumped (barycentric) vertex weights
  std::vector<Eigen::Matrix<double, 2, 3>> tri_grad;  // vertex values -> frame gradient
  std::vector<Eigen::Matrix<double, 3, 2>> tri_frame; // columns e1, e2
  std::vector<std::vector<int>> vertex_tris;
  int subdivisions = 0;

  int n_vertices() const { return static_cast<int>(V.rows()); }
  int n_triangles() const { return static_cast<int>(F.rows()); }
  double total_area() const { return tri_area.sum(); }

  // Geodesic distance on the round domain sphere.
  double geodesic(const Vec3& a, const Vec3& b) const {
    const double c = std::clamp(a.dot(b), -1.0, 1.0);
    return std::acos(c);
  }
  double geodesic(int va, int vb) const {
    return geodesic(Vec3(V.row(va)), Vec3(V.row(vb)));
  }

  // Frame gradient of a discrete map on one triangle: rows are du/dx1, du/dx2.
  Mat map_gradient(const MapState& u, int t) const {
    if (t < 0 || t >= n_triangles()) throw IndexOutOfRange("map_gradient: bad triangle index");
    Mat ut(3, u.cols());
    for (int i = 0; i < 3; ++i) ut.row(i) = u.row(F(t, i));
    return tri_grad[t] * ut;
  }

  // Dirichlet energy restricted to triangles whose barycenter lies in the
  // geodesic annulus [r_in, r_out] around a vertex.
  double annulus_energy(const MapState& u, int center_vertex, double r_in, double r_out) const {
    if (center_vertex < 0 || center_vertex >= n_vertices())
      throw IndexOutOfRange("annulus_energy: bad center vertex");
    if (!(0.0 <= r_in && r_in < r_out)) throw ValidationError("annulus_energy: need 0 <= r_in < r_out");
    const Vec3 c = V.row(center_vertex);
    double e = 0.0;
    for (int t = 0; t < n_triangles(); ++t) {
      Vec3 b = (V.row(F(t, 0)) + V.row(F(t, 1)) + V.row(F(t, 2))) / 3.0;
      b.normalize();
      const double r = geodesic(c, b);
      if (r < r_in || r > r_out) continue;
      e += 0.5 * map_gradient(u, t).squaredNorm() * tri_area(t);
    }
    return e;
  }

  // Every edge must be shared by exactly two triangles with opposite direction.
  bool oriented_closed() const {
    std::map<std::pair<int, int>, int> count;
    for (int t = 0; t < n_triangles(); ++t)
      for (int e = 0; e < 3; ++e) {
        const int a = F(t, e), b = F(t, (e + 1) % 3);
        count[{a, b}] += 1;
      }
    for (const auto& [edge, c] : count) {
      if (c != 1) return false;
      auto rev = count.find({edge.second, edge.first});
      if (rev == count.end() || rev->second != 1) return false;
    }
    return true;
  }

  // Plain-text indexed triangle export (OBJ subset: vertex and face lines).
  void export_obj(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("mesh export: cannot open " + path);
    char buf[128];
    for (int v = 0; v < n_vertices(); ++v) {
      std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", V(v, 0), V(v, 1), V(v, 2));
      os << buf;
    }
    for (int t = 0; t < n_triangles(); ++t)
      os << "f " << F(t, 0) + 1 << ' ' << F(t, 1) + 1 << ' ' << F(t, 2) + 1 << '\n';
  }
};

namespace detail {

// spherical patch area (solid angle) of an oriented triangle on the unit sphere
inline double spherical_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double num = a.dot(b.cross(c));
  const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(num, den);
}

inline void mesh_finalize(DomainMesh& m) {
  const int nt = m.n_triangles(), nv = m.n_vertices();
  m.tri_area.resize(nt);
  m.vertex_area = Vec::Zero(nv);
  m.tri_grad.resize(nt);
  m.tri_frame.resize(nt);
  m.vertex_tris.assign(nv, {});
  for (int t = 0; t < nt; ++t) {
    const Vec3 p0 = m.V.row(m.F(t, 0)), p1 = m.V.row(m.F(t, 1)), p2 = m.V.row(m.F(t, 2));
    const Vec3 e01 = p1 - p0, e02 = p2 - p0;
    const Vec3 nrm = e01.cross(e02);
    const double twoA = nrm.norm();
    // quadrature weight: the spherical patch, so weights sum exactly to 4 pi;
    // unsigned, orientation information lives in the frame
    m.tri_area(t) = std::abs(spherical_area(p0, p1, p2));
    const Vec3 e1 = e01.normalized();
    const Vec3 e2 = (nrm / twoA).cross(e1);
    m.tri_frame[t].col(0) = e1;
    m.tri_frame[t].col(1) = e2;
    // in-frame 2D coordinates; gradient of barycentric basis = rotated opposite edge / 2A
    const Vec2 q0(0.0, 0.0);
    const Vec2 q1(e01.dot(e1), e01.dot(e2));
    const Vec2 q2(e02.dot(e1), e02.dot(e2));
    auto perp = [](const Vec2& v) { return Vec2(-v(1), v(0)); };
    Eigen::Matrix<double, 2, 3> G;
    G.col(0) = perp(q2 - q1) / twoA;
    G.col(1) = perp(q0 - q2) / twoA;
    G.col(2) = perp(q1 - q0) / twoA;
    m.tri_grad[t] = G;
    for (int i = 0; i < 3; ++i) {
      m.vertex_area(m.F(t, i)) += m.tri_area(t) / 3.0;
      m.vertex_tris[m.F(t, i)].push_back(t);
    }
  }
}

}  // namespace detail

// Icosphere: subdivided icosahedron reprojected to the unit sphere. The 12
// original vertices come first and keep their positions at every level.
inline DomainMesh icosphere(int subdivisions) {
  if (subdivisions < 0 || subdivisions > 8)
    throw SubdivisionOutOfRange("icosphere: subdivisions must be in [0, 8]");
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : verts) v.normalize();
  // outward-oriented icosahedron faces
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vec3 p = (verts[a] + verts[b]).normalized();
      verts.push_back(p);
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    faces = std::move(next);
  }

  DomainMesh m;
  m.subdivisions = subdivisions;
  m.V.resize(static_cast<int>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) m.V.row(static_cast<int>(i)) = verts[i];
  m.F.resize(static_cast<int>(faces.size()), 3);
  for (size_t i = 0; i < faces.size(); ++i)
    for (int j = 0; j < 3; ++j) m.F(static_cast<int>(i), j) = faces[i][j];
  detail::mesh_finalize(m);
  return m;
}

// ---------------------------------------------------------------------------
// Point location and barycentric interpolation on the spherical mesh.
// ---------------------------------------------------------------------------

struct MeshPoint {
  int triangle = -1;
  Vec3 bary = Vec3::Zero();
};

// Locate the triangle whose central projection contains the unit point p.
inline MeshPoint locate_point(const DomainMesh& m, const Vec3& p) {
  MeshPoint best;
  double best_min = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < m.n_triangles(); ++t) {
    const Vec3 a = m.V.row(m.F(t, 0)), b = m.V.row(m.F(t, 1)), c = m.V.row(m.F(t, 2));
    // signed volumes against the ray through p
    const double s0 = p.dot(b.cross(c));
    const double s1 = p.dot(c.cross(a));
    const double s2 = p.dot(a.cross(b));
    const double tot = s0 + s1 + s2;
    if (tot <= 0) continue;
    const double mn = std::min({s0, s1, s2}) / tot;
    if (mn > best_min) {
      best_min = mn;
      best.triangle = t;
      best.bary = Vec3(s0, s1, s2) / tot;
      if (mn >= 0.0) return best;  // strictly inside (or on an edge)
    }
  }
  if (best.triangle < 0) throw Error("locate_point: no triangle found");
  // clamp slightly-outside barycentrics (point on an edge/vertex)
  for (int i = 0; i < 3; ++i) best.bary(i) = std::max(best.bary(i), 0.0);
  best.bary /= best.bary.sum();
  return best;
}

inline Vec interpolate(const DomainMesh& m, const MapState& u, const MeshPoint& mp) {
  Vec out = Vec::Zero(u.cols());
  for (int i = 0; i < 3; ++i) out += mp.bary(i) * u.row(m.F(mp.triangle, i)).transpose();
  return out;
}

inline Vec interpolate_at(const DomainMesh& m, const MapState& u, const Vec3& p) {
  return interpolate(m, u, locate_point(m, p));
}

}  // namespace hsphere
