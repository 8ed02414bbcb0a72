#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace hsphere {

using Vec  = Eigen::VectorXd;
using Mat  = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// A discrete map u : mesh vertices -> R^K (rows = vertices), constrained to
// lie on the target manifold. Tangent fields share the layout.
using MapState     = Eigen::MatrixXd;
using TangentField = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Error taxonomy. Everything fatal is an exception; solver non-convergence is
// reported through status fields, not thrown.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct OutsideTubularNeighborhood : Error { using Error::Error; };
struct PointOffManifold : Error { using Error::Error; };
struct SubdivisionOutOfRange : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };
struct InvalidSweepout : Error { using Error::Error; };
struct EigSolverFailure : Error { using Error::Error; };
struct TargetNotThreeDimensional : Error { using Error::Error; };
struct DegenerateImmersion : Error { using Error::Error; };
struct RadiusOutOfChart : Error { using Error::Error; };
struct NoContinuationData : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct MeshMismatch : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Deterministic RNG. std::distributions are implementation-defined, so the
// few samplers we need are spelled out against a fixed engine.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() {  // [0,1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    // Box-Muller, one value per call (the mate is discarded for simplicity)
    double u1 = 0.0;
    do { u1 = uniform(); } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vec normal_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

 private:
  std::uint64_t state_;
};

inline double sqr(double x) { return x * x; }

}  // namespace hsphere
