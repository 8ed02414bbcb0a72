#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "hsphere/energy.hpp"
#include "hsphere/krylov.hpp"
#include "hsphere/sphere_chart.hpp"

namespace hsphere {

enum class SolveStatus { Converged, MaxItersExceeded, LineSearchStalled, BudgetExhausted };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxItersExceeded: return "max_iters_exceeded";
    case SolveStatus::LineSearchStalled: return "line_search_stalled";
    case SolveStatus::BudgetExhausted: return "budget_exhausted";
  }
  return "?";
}

struct SolveOptions {
  double tol_grad = 1e-6;
  int max_iters = 2000;
  std::string method = "gradient";  // "gradient" (Armijo descent) or "newton" (MINRES)
  double armijo_c = 1e-4;           // sufficient-decrease constant
  double backtrack = 0.5;
  double step0 = 1.0;
  double max_step = std::numeric_limits<double>::infinity();  // cap on vertex displacement
  int minres_maxit = 400;
  double minres_tol = 1e-2;
};

struct SolveReport {
  MapState state;
  int iterations = 0;
  double grad_norm = 0.0;
  std::vector<double> energy_trace;
  std::vector<double> grad_trace;
  bool converged = false;
  SolveStatus status = SolveStatus::MaxItersExceeded;
  std::string method;
};

// ---------------------------------------------------------------------------
// descend: find a critical point of E^{lambda omega}_alpha from u0.
//
// method "gradient" is projected steepest descent with Armijo backtracking and
// retraction to N; energy decreases at every accepted step. It can only reach
// stable critical points. method "newton" solves the tangent-space Newton
// system with MINRES and accepts steps that reduce the gradient norm, which
// also converges to the min-max saddles (the paper-style critical points have
// Morse index >= 1, so a pure descent flow cannot terminate at them).
// ---------------------------------------------------------------------------

inline SolveReport descend(const DomainMesh& mesh, const TargetManifold& target,
                           const TwoForm& form, const FunctionalParams& p, const MapState& u0,
                           const SolveOptions& opt) {
  p.validate();
  validate_state(mesh, target, u0);
  SolveReport rep;
  rep.method = opt.method;
  MapState u = u0;

  auto grad = gradient(mesh, target, form, p, u);
  double energy = total_energy(mesh, u, form, p);
  rep.energy_trace.push_back(energy);
  rep.grad_trace.push_back(grad.norm);

  double step = opt.step0;
  for (int it = 0; it < opt.max_iters; ++it) {
    if (grad.norm <= opt.tol_grad) {
      rep.converged = true;
      rep.status = SolveStatus::Converged;
      break;
    }
    rep.iterations = it + 1;

    if (opt.method == "newton") {
      HessianOperator H(mesh, target, form, p, u);
      auto applyH = [&](const TangentField& v) { return H.apply(v); };
      auto dotM = [&](const Mat& a, const Mat& b) { return mass_dot(mesh, a, b); };
      TangentField rhs = -grad.grad;
      auto mr = minres<Mat>(applyH, dotM, rhs, opt.minres_tol, opt.minres_maxit);
      // accept the longest fraction of the Newton step that reduces |grad|
      bool accepted = false;
      double s = 1.0;
      const double dmax = mr.x.rowwise().norm().maxCoeff();
      if (dmax > opt.max_step) s = opt.max_step / dmax;
      for (int bt = 0; bt < 40; ++bt, s *= opt.backtrack) {
        MapState cand = retract(target, u, s * mr.x);
        auto g2 = gradient(mesh, target, form, p, cand);
        if (g2.norm <= (1.0 - opt.armijo_c * s) * grad.norm) {
          u = std::move(cand);
          grad = std::move(g2);
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        rep.status = SolveStatus::LineSearchStalled;
        break;
      }
      energy = total_energy(mesh, u, form, p);
    } else {
      // Armijo projected descent with an optional displacement cap
      bool accepted = false;
      const double g2 = mass_dot(mesh, grad.grad, grad.grad);
      const double gmax = grad.grad.rowwise().norm().maxCoeff();
      double s = step;
      if (gmax * s > opt.max_step) s = opt.max_step / gmax;
      for (int bt = 0; bt < 60; ++bt, s *= opt.backtrack) {
        MapState cand = retract(target, u, -s * grad.grad);
        const double e2 = total_energy(mesh, cand, form, p);
        if (e2 <= energy - opt.armijo_c * s * g2) {
          u = std::move(cand);
          energy = e2;
          grad = gradient(mesh, target, form, p, u);
          step = std::min(2.0 * s, 1e6);
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        rep.status = SolveStatus::LineSearchStalled;
        break;
      }
    }
    rep.energy_trace.push_back(energy);
    rep.grad_trace.push_back(grad.norm);
  }
  if (grad.norm <= opt.tol_grad) {
    rep.converged = true;
    rep.status = SolveStatus::Converged;
  }
  rep.state = std::move(u);
  rep.grad_norm = grad.norm;
  return rep;
}

// ---------------------------------------------------------------------------
// Sweepouts: one-parameter families with constant-map endpoints.
// ---------------------------------------------------------------------------

struct SweepoutGrid {
  std::vector<double> t;         // parameter samples t_0..t_m
  std::vector<MapState> states;  // one map per sample
  int dimension = 1;             // solver handles one-parameter families only

  int samples() const { return static_cast<int>(states.size()); }

  void validate(const DomainMesh& mesh, const TargetManifold& target) const {
    if (dimension != 1) throw InvalidSweepout("only one-parameter sweepouts are supported");
    if (samples() < 9 || t.size() != states.size())
      throw InvalidSweepout("sweepout needs at least 9 samples (m >= 8)");
    for (const auto& s : states) validate_state(mesh, target, s);
    for (const MapState* end : {&states.front(), &states.back()}) {
      const auto& u = *end;
      double spread = 0.0;
      for (int v = 1; v < u.rows(); ++v) spread = std::max(spread, (u.row(v) - u.row(0)).norm());
      if (spread > 1e-9 * target.scale())
        throw InvalidSweepout("sweepout endpoints must be constant maps");
    }
    double maxd = 0.0;
    for (const auto& s : states) maxd = std::max(maxd, dirichlet(mesh, s));
    if (maxd < 1e-8) throw InvalidSweepout("sweepout is a family of constant maps");
  }
};

struct WidthReport {
  double width_total = 0.0;    // max_t E^{lambda omega}_alpha at termination
  double width_excess = 0.0;   // width_total minus the constant-map floor tau^alpha Area/2
  int apex_index = -1;
  MapState apex_state;
  int sweeps = 0;
  long steps_used = 0;
  std::vector<double> max_trace;  // max over t after each sweep
  SolveStatus status = SolveStatus::Converged;
};

// Round-robin bounded relaxation of the interior samples with frozen
// endpoints; deterministic order, ties broken at the lowest parameter index.
inline WidthReport minmax_width(const DomainMesh& mesh, const TargetManifold& target,
                                const TwoForm& form, const FunctionalParams& p,
                                SweepoutGrid sweep, long budget_steps,
                                int steps_per_sample = 3) {
  p.validate();
  sweep.validate(mesh, target);
  WidthReport rep;
  const double floor = 0.5 * std::pow(p.tau, p.alpha) * mesh.total_area();

  std::vector<double> energy(sweep.samples());
  for (int i = 0; i < sweep.samples(); ++i)
    energy[i] = total_energy(mesh, sweep.states[i], form, p);

  auto record_max = [&]() {
    int arg = 0;
    for (int i = 1; i < sweep.samples(); ++i)
      if (energy[i] > energy[arg]) arg = i;  // strict: ties keep the lowest index
    rep.width_total = energy[arg];
    rep.apex_index = arg;
    rep.max_trace.push_back(energy[arg]);
  };
  record_max();

  SolveOptions step_opt;
  step_opt.max_iters = steps_per_sample;
  step_opt.tol_grad = 0.0;

  long used = 0;
  double prev_max = rep.width_total;
  while (used < budget_steps) {
    for (int i = 1; i + 1 < sweep.samples() && used < budget_steps; ++i) {
      auto r = descend(mesh, target, form, p, sweep.states[i], step_opt);
      sweep.states[i] = std::move(r.state);
      energy[i] = r.energy_trace.back();
      used += std::max(1, r.iterations);
    }
    record_max();
    ++rep.sweeps;
    if (std::abs(rep.max_trace.back() - prev_max) < 1e-12 * (1.0 + std::abs(prev_max))) break;
    prev_max = rep.max_trace.back();
  }
  rep.steps_used = used;
  rep.status = used >= budget_steps ? SolveStatus::BudgetExhausted : SolveStatus::Converged;
  rep.apex_state = sweep.states[rep.apex_index];
  rep.width_excess = rep.width_total - floor;
  return rep;
}

// ---------------------------------------------------------------------------
// lambda scan over a frozen family: the surrogate max_t E^{lambda omega}_alpha
// / lambda is evaluated from cached per-sample energies, so the comparison
// identity of the monotonicity lemma holds to rounding.
// ---------------------------------------------------------------------------

struct ScanRow {
  double alpha = 1.0, lambda = 0.0;
  double width = 0.0, width_over_lambda = 0.0;
  int argmax = 0;
};

inline std::vector<ScanRow> lambda_scan(const DomainMesh& mesh, const TargetManifold& target,
                                        const TwoForm& form, const std::vector<MapState>& family,
                                        const std::vector<double>& alphas,
                                        const std::vector<double>& lambdas, double tau = 1.0) {
  if (family.empty()) throw InvalidSweepout("lambda_scan: empty family");
  for (size_t i = 1; i < lambdas.size(); ++i)
    if (!(lambdas[i] > lambdas[i - 1]) || !(lambdas[0] > 0.0))
      throw ValidationError("lambda_scan: lambdas must be positive and strictly increasing");
  for (const auto& u : family) validate_state(mesh, target, u);

  std::vector<double> w(family.size());
  for (size_t i = 0; i < family.size(); ++i) w[i] = omega_term(mesh, family[i], form);

  std::vector<ScanRow> rows;
  for (double alpha : alphas) {
    FunctionalParams p{alpha, 0.0, tau};
    p.validate();
    const double tw = std::pow(tau, alpha - 1.0);
    std::vector<double> ea(family.size());
    for (size_t i = 0; i < family.size(); ++i) ea[i] = alpha_energy(mesh, family[i], p);
    for (double lambda : lambdas) {
      ScanRow row;
      row.alpha = alpha;
      row.lambda = lambda;
      double best = -std::numeric_limits<double>::infinity();
      for (size_t i = 0; i < family.size(); ++i) {
        const double ratio = ea[i] / lambda + tw * w[i];
        if (ratio > best) {
          best = ratio;
          row.argmax = static_cast<int>(i);
        }
      }
      row.width_over_lambda = best;
      row.width = lambda * best;
      rows.push_back(row);
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// alpha continuation with concentration detection and bubble extraction.
// ---------------------------------------------------------------------------

struct BubbleReport {
  int stage = -1;
  double alpha = 1.0;
  int vertex = -1;              // concentration vertex
  double density_ratio = 0.0;   // max / median vertex energy density
  double lambda_alpha = 0.0;    // 1 / max_T |grad u|
  double mu = 1.0;              // lambda^(2 - 2 alpha)
  double nu = 1.0;              // lambda^(-sqrt(alpha - 1))
  double bubble_energy = 0.0;   // Dirichlet energy of the rescaled bubble map
  double neck_length = 0.0;     // sqrt(E(w)/pi) log nu
  MapState bubble_state;
};

struct StageReport {
  double alpha = 1.0;
  SolveReport solve;
  double e_alpha = 0.0;
  double dirichlet_energy = 0.0;
  double c0_delta_prev = 0.0;  // sup-distance to the previous stage state
  std::optional<BubbleReport> bubble;
};

struct ContinuationReport {
  std::vector<StageReport> stages;
  double tau = 1.0;
  double area = 0.0;
  double cut_radius = 0.0;
  double base_energy = 0.0;       // Dirichlet energy outside the final concentration disk
  bool base_nonconstant = false;  // base_energy >= gap threshold when a bubble was seen
  bool has_bubbles() const {
    for (const auto& s : stages)
      if (s.bubble) return true;
    return false;
  }
};

struct ContinuationOptions {
  SolveOptions stage_solve;
  double conc_factor = 50.0;  // max/median vertex density threshold
  double cut_radius = 0.25;   // geodesic radius separating bubble from base
  double gap_threshold = 0.5; // non-constancy diagnostic level
  double tau = 1.0;
};

inline std::optional<BubbleReport> detect_concentration(const DomainMesh& mesh, const MapState& u,
                                                        double alpha, double conc_factor) {
  const Vec dens = vertex_energy_density(mesh, u);
  std::vector<double> sorted(dens.data(), dens.data() + dens.size());
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = std::max(sorted[sorted.size() / 2], 1e-300);
  int arg = 0;
  dens.maxCoeff(&arg);
  const double ratio = dens(arg) / median;
  if (ratio <= conc_factor) return std::nullopt;

  double max_grad2 = 0.0;
  for (int t = 0; t < mesh.n_triangles(); ++t)
    max_grad2 = std::max(max_grad2, mesh.map_gradient(u, t).squaredNorm());
  BubbleReport b;
  b.alpha = alpha;
  b.vertex = arg;
  b.density_ratio = ratio;
  b.lambda_alpha = 1.0 / std::sqrt(max_grad2);
  b.mu = std::pow(b.lambda_alpha, 2.0 - 2.0 * alpha);
  b.nu = std::pow(b.lambda_alpha, -std::sqrt(std::max(0.0, alpha - 1.0)));
  b.bubble_state = mobius_dilate_resample(mesh, u, arg, 1.0 / b.lambda_alpha);
  b.bubble_energy = dirichlet(mesh, b.bubble_state);
  b.neck_length = std::sqrt(b.bubble_energy / M_PI) * std::log(std::max(1.0, b.nu));
  return b;
}

// ---------------------------------------------------------------------------
// Sweepout builders.
// ---------------------------------------------------------------------------

// Latitude family in a radius-r 3-sphere: sigma(t)(x) = r (sin(pi t) x, cos(pi t)).
// Endpoints are the poles (constant maps); the interior sweeps through round
// 2-spheres with the equator at t = 1/2. Represents the generator of pi_3.
inline SweepoutGrid latitude_sweepout_s3(const DomainMesh& mesh, int samples, double radius = 1.0) {
  if (samples < 9) throw InvalidSweepout("latitude sweepout needs at least 9 samples");
  SweepoutGrid sw;
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / (samples - 1);
    const double theta = M_PI * t;
    MapState u(mesh.n_vertices(), 4);
    u.leftCols(3) = std::sin(theta) * radius * mesh.V;
    u.col(3).setConstant(std::cos(theta) * radius);
    sw.t.push_back(t);
    sw.states.push_back(std::move(u));
  }
  return sw;
}

// Mobius-dilation family of a given map: interior samples reparametrize `base`
// by domain dilations about a vertex with log-zoom spanning [-s_max, s_max];
// the endpoints are the exact constant maps the family limits to.
inline SweepoutGrid dilation_sweepout(const DomainMesh& mesh, const MapState& base,
                                      int center_vertex, int samples, double s_max) {
  if (samples < 9) throw InvalidSweepout("dilation sweepout needs at least 9 samples");
  SweepoutGrid sw;
  const Vec3 c = mesh.V.row(center_vertex).transpose();
  const Vec at_center = interpolate_at(mesh, base, c);
  const Vec at_antipode = interpolate_at(mesh, base, Vec3(-c));
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / (samples - 1);
    MapState u(base.rows(), base.cols());
    if (i == 0) {
      u.rowwise() = at_antipode.transpose();
    } else if (i == samples - 1) {
      u.rowwise() = at_center.transpose();
    } else {
      const double s = s_max * (2.0 * t - 1.0);
      u = mobius_dilate_resample(mesh, base, center_vertex, std::exp(s));
    }
    sw.t.push_back(t);
    sw.states.push_back(std::move(u));
  }
  return sw;
}

inline ContinuationReport alpha_continuation(const DomainMesh& mesh, const TargetManifold& target,
                                             const TwoForm& form, double lambda, const MapState& u0,
                                             const std::vector<double>& schedule,
                                             const ContinuationOptions& opt) {
  if (schedule.empty() || schedule.front() > 1.5)
    throw ValidationError("continuation: schedule must start at alpha <= 1.5");
  for (size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i] < 1.0) throw ValidationError("continuation: alpha must stay >= 1");
    if (i > 0 && !(schedule[i] < schedule[i - 1]))
      throw ValidationError("continuation: schedule must be strictly decreasing");
  }
  ContinuationReport rep;
  rep.tau = opt.tau;
  rep.area = mesh.total_area();
  rep.cut_radius = opt.cut_radius;

  MapState u = u0;
  MapState prev = u0;
  for (size_t j = 0; j < schedule.size(); ++j) {
    FunctionalParams p{schedule[j], lambda, opt.tau};
    StageReport st;
    st.alpha = schedule[j];
    st.solve = descend(mesh, target, form, p, u, opt.stage_solve);
    u = st.solve.state;
    st.e_alpha = alpha_energy(mesh, u, p);
    st.dirichlet_energy = dirichlet(mesh, u);
    st.c0_delta_prev = 0.0;
    for (int v = 0; v < u.rows(); ++v)
      st.c0_delta_prev = std::max(st.c0_delta_prev, (u.row(v) - prev.row(v)).norm());
    prev = u;
    st.bubble = detect_concentration(mesh, u, schedule[j], opt.conc_factor);
    if (st.bubble) st.bubble->stage = static_cast<int>(j);
    rep.stages.push_back(std::move(st));
  }

  const auto& last = rep.stages.back();
  if (last.bubble) {
    const double inside =
        mesh.annulus_energy(u, last.bubble->vertex, 0.0, opt.cut_radius);
    rep.base_energy = last.dirichlet_energy - inside;
  } else {
    rep.base_energy = last.dirichlet_energy;
  }
  rep.base_nonconstant = rep.base_energy >= opt.gap_threshold;
  return rep;
}

}  // namespace hsphere
