#include "coagflux/evolution.hpp"

#include <algorithm>
#include <cmath>

#include "coagflux/errors.hpp"

namespace coagflux {

PhysicalSystem::PhysicalSystem(const KernelSpec& spec,
                               std::shared_ptr<const SizeGrid> grid,
                               double source_epsilon, int workers)
    : grid_(std::move(grid)),
      source_(build_source(source_epsilon, grid_).values),
      table_(grid_, [spec](double x, double y) { return spec.eval(x, y); }),
      workers_(workers) {}

PhysicalSystem::PhysicalSystem(std::shared_ptr<const SizeGrid> grid,
                               const KernelFn& kernel, GridDensity source,
                               int workers)
    : grid_(std::move(grid)),
      source_(std::move(source)),
      table_(grid_, kernel),
      workers_(workers) {}

RhsResult PhysicalSystem::rhs(const GridDensity& f) const {
  CoagRate coag = table_.apply(f, workers_);
  RhsResult out;
  out.rate = std::move(coag.rate);
  out.overflow_mass = coag.overflow_mass;
  out.overflow_number = coag.overflow_number;
  for (int i = 0; i < out.rate.size(); ++i)
    out.rate.values[i] += source_.values[i];
  return out;
}

void SelfSimilarSystem::init_transport(double xi_epsilon) {
  const TransportCutoff xi{xi_epsilon};
  edge_coeff_.resize(grid_->n_cells + 1);
  for (int e = 0; e <= grid_->n_cells; ++e) {
    const double z = grid_->edges[e];
    edge_coeff_[e] = beta_ * z * z * (xi_epsilon <= 0.0 ? 1.0 : xi(z));
  }
}

SelfSimilarSystem::SelfSimilarSystem(const KernelSpec& spec,
                                     std::shared_ptr<const SizeGrid> grid,
                                     const TruncationParams& params, int workers,
                                     TransportScheme scheme)
    : grid_(std::move(grid)),
      beta_(2.0 / (1.0 - spec.gamma())),
      source_(build_source(params.epsilon, grid_).values),
      table_(grid_,
             [bounded = truncate_kernel(spec, params.a, params.level_A,
                                        params.sigma, params.taper_band)](
                 double x, double y) { return bounded.eval(x, y); },
             GainCutoff{params.R}),
      scheme_(scheme),
      workers_(workers) {
  if (spec.gamma() >= 1.0)
    throw ConfigError("self-similar evolution requires gamma < 1");
  if (!(params.R > 2.0 * params.epsilon))
    throw ConfigError("truncation requires 2*epsilon < R");
  init_transport(params.epsilon);
}

SelfSimilarSystem::SelfSimilarSystem(std::shared_ptr<const SizeGrid> grid,
                                     double gamma, const KernelFn& kernel,
                                     const GainCutoff& zeta, double xi_epsilon,
                                     GridDensity source, int workers,
                                     TransportScheme scheme)
    : grid_(std::move(grid)),
      beta_(2.0 / (1.0 - gamma)),
      source_(std::move(source)),
      table_(grid_, kernel, zeta),
      scheme_(scheme),
      workers_(workers) {
  if (gamma >= 1.0) throw ConfigError("self-similar evolution requires gamma < 1");
  init_transport(xi_epsilon);
}

double SelfSimilarSystem::edge_value(const GridDensity& phi, int e) const {
  // Mass flows toward small sizes, so the upwind donor at edge e is cell e.
  if (e <= 0 || e >= grid_->n_cells) return e < grid_->n_cells ? phi.values[e] : 0.0;
  const double right = phi.values[e];
  if (scheme_ == TransportScheme::upwind) return right;
  const double left = phi.values[e - 1];
  return (left > 0.0 && right > 0.0) ? std::sqrt(left * right) : right;
}

RhsResult SelfSimilarSystem::rhs(const GridDensity& phi) const {
  const SizeGrid& g = *grid_;
  CoagRate coag = table_.apply(phi, workers_);
  RhsResult out;
  out.rate = std::move(coag.rate);
  out.overflow_mass = coag.overflow_mass;
  out.overflow_number = coag.overflow_number;
  out.gain_deficit = coag.gain_deficit;
  for (int i = 0; i < g.n_cells; ++i) {
    const double inflow =
        (i + 1 < g.n_cells) ? edge_coeff_[i + 1] * edge_value(phi, i + 1) : 0.0;
    const double outflow = edge_coeff_[i] * edge_value(phi, i);
    out.rate.values[i] += (inflow - outflow) / (g.centers[i] * g.widths[i]) -
                          phi.values[i] + source_.values[i];
  }
  out.transport_outflow = edge_coeff_[0] * phi.values[0];
  return out;
}

SelfSimilarSystem::SplitRhs SelfSimilarSystem::rhs_split(
    const GridDensity& phi) const {
  const SizeGrid& g = *grid_;
  const CoagTable::SplitRate coag = table_.apply_split(phi);
  SplitRhs out;
  out.production.resize(g.n_cells);
  out.sink.resize(g.n_cells);
  for (int i = 0; i < g.n_cells; ++i) {
    const double xw = g.centers[i] * g.widths[i];
    const double inflow =
        (i + 1 < g.n_cells) ? edge_coeff_[i + 1] * edge_value(phi, i + 1) : 0.0;
    out.production[i] =
        coag.gain_count[i] / g.widths[i] + inflow / xw + source_.values[i];
    const double out_edge = edge_coeff_[i] * edge_value(phi, i);
    // denormal cells would overflow the per-phi ratio; their outflow is nil
    const double outflow_per_phi =
        phi.values[i] > 1e-290 ? out_edge / (phi.values[i] * xw) : 0.0;
    out.sink[i] = coag.loss_per_particle[i] + outflow_per_phi + 1.0;
  }
  out.overflow_mass = coag.overflow_mass;
  out.gain_deficit = coag.gain_deficit;
  out.transport_outflow = edge_coeff_[0] * phi.values[0];
  return out;
}

RhsResult rhs_physical(const PhysicalSystem& sys, const GridDensity& f) {
  return sys.rhs(f);
}

RhsResult rhs_selfsimilar(const SelfSimilarSystem& sys, const GridDensity& phi) {
  return sys.rhs(phi);
}

namespace {

// Zero out negatives, returning the mass added by the clip.
double clip_negatives(GridDensity& f) {
  const SizeGrid& g = *f.grid;
  double added = 0.0;
  for (int i = 0; i < f.size(); ++i) {
    if (f.values[i] < 0.0) {
      added += -f.values[i] * g.centers[i] * g.widths[i];
      f.values[i] = 0.0;
    }
  }
  return added;
}

double positivity_dt(const GridDensity& f, const GridDensity& rate, double safety) {
  double dt = std::numeric_limits<double>::infinity();
  for (int i = 0; i < f.size(); ++i) {
    if (rate.values[i] < 0.0 && f.values[i] > 0.0)
      dt = std::min(dt, safety * f.values[i] / (-rate.values[i]));
  }
  return dt;
}

} // namespace

template <class System>
Trajectory evolve(const System& sys, EvolutionState state, double t_end,
                  const StepControl& control, std::vector<double> checkpoint_times) {
  if (!(t_end > state.time))
    throw DomainError("evolve requires t_end beyond the current time");
  checkpoint_times.erase(
      std::remove_if(checkpoint_times.begin(), checkpoint_times.end(),
                     [&](double t) { return t <= state.time || t > t_end; }),
      checkpoint_times.end());
  std::sort(checkpoint_times.begin(), checkpoint_times.end());
  if (checkpoint_times.empty() || checkpoint_times.back() < t_end)
    checkpoint_times.push_back(t_end);

  Trajectory traj;
  state.mode = sys.mode();
  size_t next_cp = 0;
  while (next_cp < checkpoint_times.size()) {
    if (traj.stats.steps++ > control.max_steps)
      throw NumericError("evolve exceeded the step budget");
    const RhsResult r1 = sys.rhs(state.density);
    double dt = std::min(control.dt_max,
                         positivity_dt(state.density, r1.rate, control.safety));
    dt = std::min(dt, checkpoint_times[next_cp] - state.time);

    // Heun step with rejection: a step whose positivity clip would add more
    // than the budget is retried at half the size.
    GridDensity accepted;
    RhsResult r2;
    double clipped = 0.0;
    bool ok = false;
    for (int tries = 0; tries < 60; ++tries) {
      if (!(dt > control.dt_min))
        throw NumericError("integration step collapsed below dt_min (stiffness)");
      GridDensity mid = state.density;
      for (int i = 0; i < mid.size(); ++i) mid.values[i] += dt * r1.rate.values[i];
      clipped = clip_negatives(mid);
      r2 = sys.rhs(mid);
      GridDensity next = state.density;
      for (int i = 0; i < next.size(); ++i)
        next.values[i] += 0.5 * dt * (r1.rate.values[i] + r2.rate.values[i]);
      clipped += clip_negatives(next);
      if (clipped <= control.tol_positivity) {
        accepted = std::move(next);
        ok = true;
        break;
      }
      dt *= 0.5;
    }
    if (!ok) throw NumericError("step rejection loop failed to find a valid dt");

    state.density = std::move(accepted);
    state.time += dt;
    state.overflow_mass += 0.5 * dt * (r1.overflow_mass + r2.overflow_mass);
    state.gain_deficit += 0.5 * dt * (r1.gain_deficit + r2.gain_deficit);
    state.transport_outflow +=
        0.5 * dt * (r1.transport_outflow + r2.transport_outflow);
    state.clipped_mass += clipped;

    traj.stats.dt_min_used = std::min(traj.stats.dt_min_used, dt);
    traj.stats.dt_max_used = std::max(traj.stats.dt_max_used, dt);
    traj.stats.dt_last = dt;

    if (state.time >= checkpoint_times[next_cp] * (1.0 - 1e-14)) {
      state.time = checkpoint_times[next_cp];
      traj.checkpoints.push_back(state);
      ++next_cp;
    }
  }
  return traj;
}

template Trajectory evolve<PhysicalSystem>(const PhysicalSystem&, EvolutionState,
                                           double, const StepControl&,
                                           std::vector<double>);
template Trajectory evolve<SelfSimilarSystem>(const SelfSimilarSystem&,
                                              EvolutionState, double,
                                              const StepControl&,
                                              std::vector<double>);

GridDensity rescale_physical(const GridDensity& f, double t,
                             const KernelSpec& spec) {
  if (!(t > 0.0)) throw DomainError("rescale requires t > 0");
  const ScalingExponents se = spec.scaling_exponents();
  const double size_scale = std::pow(t, se.beta);
  const double amp_scale = std::pow(t, se.alpha);
  const SizeGrid& g = *f.grid;
  auto scaled = std::make_shared<SizeGrid>();
  scaled->x_min = g.x_min / size_scale;
  scaled->x_max = g.x_max / size_scale;
  scaled->n_cells = g.n_cells;
  scaled->ratio = g.ratio;
  scaled->edges.resize(g.edges.size());
  scaled->centers.resize(g.centers.size());
  scaled->widths.resize(g.widths.size());
  for (size_t i = 0; i < g.edges.size(); ++i) scaled->edges[i] = g.edges[i] / size_scale;
  for (int i = 0; i < g.n_cells; ++i) {
    scaled->centers[i] = g.centers[i] / size_scale;
    scaled->widths[i] = g.widths[i] / size_scale;
  }
  GridDensity out;
  out.grid = std::move(scaled);
  out.values.resize(f.values.size());
  for (size_t i = 0; i < f.values.size(); ++i)
    out.values[i] = amp_scale * f.values[i];
  return out;
}

std::vector<double> geometric_checkpoints(double t0, double t1, int count) {
  std::vector<double> out;
  if (count < 1 || !(t1 > t0) || !(t0 > 0.0)) return out;
  for (int i = 1; i <= count; ++i)
    out.push_back(t0 * std::pow(t1 / t0, static_cast<double>(i) / count));
  out.back() = t1;
  return out;
}

} // namespace coagflux
