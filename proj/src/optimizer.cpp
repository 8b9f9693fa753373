#include "neos/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace neos::opt {

const std::array<const char*, ConfigVector::kDim> kConfigVariables = {
    "carrier_count", "layout",     "bearing_noise_std_rad", "frame_rate_hz",
    "boundary_a",    "boundary_b", "link_loss"};

const std::array<bool, ConfigVector::kDim> kConfigIntegerMask = {
    true, true, false, false, true, true, false};

VecX ConfigVector::to_vector() const {
  VecX x(kDim);
  x << double(carrier_count), double(layout == sensor::LayoutId::Cube24 ? 1 : 0),
      bearing_noise_std_rad, frame_rate_hz, double(boundary_a), double(boundary_b),
      link_loss;
  return x;
}

ConfigVector ConfigVector::from_vector(const VecX& x) {
  if (x.size() != kDim) throw RuntimeError("config vector has wrong dimension");
  ConfigVector c;
  c.carrier_count = std::max(1, int(std::llround(x[0])));
  c.layout = std::llround(x[1]) >= 1 ? sensor::LayoutId::Cube24 : sensor::LayoutId::Cube6;
  c.bearing_noise_std_rad = x[2];
  c.frame_rate_hz = x[3];
  c.boundary_a = std::clamp(int(std::llround(x[4])), 1, 11);
  c.boundary_b = std::clamp(int(std::llround(x[5])), c.boundary_a, 11);
  c.link_loss = std::clamp(x[6], 0.0, 0.999);
  return c;
}

namespace {

double reflect_into(double v, double lo, double hi) {
  if (hi <= lo) return lo;
  for (int i = 0; i < 64 && (v < lo || v > hi); ++i) {
    if (v < lo) v = 2.0 * lo - v;
    if (v > hi) v = 2.0 * hi - v;
  }
  return std::clamp(v, lo, hi);
}

VecX round_integers(VecX x, const std::vector<bool>& mask, const VecX& lo, const VecX& hi) {
  for (int j = 0; j < x.size(); ++j)
    if (mask[j]) x[j] = std::clamp(double(std::llround(x[j])), lo[j], hi[j]);
  return x;
}

}  // namespace

DEResult differential_evolution(const std::function<double(const VecX&)>& objective,
                                const VecX& lower, const VecX& upper,
                                const std::vector<bool>& integer_mask,
                                const DEParams& params) {
  const int dim = static_cast<int>(lower.size());
  if (upper.size() != dim || int(integer_mask.size()) != dim)
    throw RuntimeError("bounds/mask dimension mismatch");
  for (int j = 0; j < dim; ++j)
    if (upper[j] < lower[j]) throw RuntimeError("bounds must satisfy lower <= upper");
  if (params.population < 4) throw RuntimeError("DE population must be >= 4");
  if (!(params.weight_f > 0.0 && params.weight_f <= 2.0))
    throw RuntimeError("DE weight F must be in (0, 2]");
  if (!(params.crossover >= 0.0 && params.crossover <= 1.0))
    throw RuntimeError("DE crossover rate must be in [0, 1]");

  auto rng = make_rng(params.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const int np = params.population;
  std::vector<VecX> pop(np);
  std::vector<double> score(np);
  DEResult result;
  result.best_score = std::numeric_limits<double>::infinity();

  for (int i = 0; i < np; ++i) {
    VecX x(dim);
    for (int j = 0; j < dim; ++j) x[j] = lower[j] + (upper[j] - lower[j]) * u01(rng);
    pop[i] = x;
    score[i] = objective(round_integers(x, integer_mask, lower, upper));
    ++result.evaluations;
    if (score[i] < result.best_score) {
      result.best_score = score[i];
      result.best = round_integers(pop[i], integer_mask, lower, upper);
    }
  }
  result.history.push_back(result.best_score);

  std::uniform_int_distribution<int> pick(0, np - 1);
  std::uniform_int_distribution<int> pick_dim(0, dim - 1);
  for (int gen = 0; gen < params.max_generations; ++gen) {
    for (int i = 0; i < np; ++i) {
      int a, b, c;
      do { a = pick(rng); } while (a == i);
      do { b = pick(rng); } while (b == i || b == a);
      do { c = pick(rng); } while (c == i || c == a || c == b);

      VecX trial = pop[i];
      const int j_forced = pick_dim(rng);
      for (int j = 0; j < dim; ++j) {
        const double u = u01(rng);
        if (u < params.crossover || j == j_forced) {
          const double v = pop[a][j] + params.weight_f * (pop[b][j] - pop[c][j]);
          trial[j] = reflect_into(v, lower[j], upper[j]);
        }
      }
      const double s = objective(round_integers(trial, integer_mask, lower, upper));
      ++result.evaluations;
      if (s <= score[i]) {
        pop[i] = trial;
        score[i] = s;
        if (s < result.best_score) {
          result.best_score = s;
          result.best = round_integers(trial, integer_mask, lower, upper);
        }
      }
    }
    result.history.push_back(result.best_score);
  }
  return result;
}

harness::ScenarioSpec apply_config(const harness::ScenarioSpec& base,
                                   const ConfigVector& cfg) {
  harness::ScenarioSpec out = base;
  if (cfg.carrier_count < 1 || cfg.carrier_count > int(base.carriers.size()))
    throw RuntimeError("carrier_count outside the declared carrier list");
  out.carriers.resize(cfg.carrier_count);
  out.sensor.layout = cfg.layout;
  out.link.loss_prob = cfg.link_loss;
  for (auto& c : out.carriers)
    for (auto& m : c.modes) {
      m.bearing_noise_std_rad = cfg.bearing_noise_std_rad;
      m.frame_rate_hz = cfg.frame_rate_hz;
    }
  return out;
}

double evaluate_config(const ConfigVector& cfg, const harness::ScenarioSpec& base,
                       const std::vector<std::uint64_t>& seeds,
                       const harness::OptimizeSpec& opt, ScoreBreakdown* breakdown) {
  ScoreBreakdown local;
  const BoundaryPlacement placement{cfg.boundary_a, cfg.boundary_b, opt.cost_model};
  local.cost_term = opt.cost_model.carrier_weight * cfg.carrier_count +
                    opt.cost_model.frame_rate_weight * cfg.frame_rate_hz +
                    opt.cost_model.bandwidth_weight * placement.crossing_rate();

  double rmse_sum = 0.0, class_sum = 0.0;
  int n = 0;
  for (const auto seed : seeds) {
    try {
      const auto spec = apply_config(base, cfg);
      const auto run = fusion::run_group_scenario(spec, seed);
      for (const auto& [node, m] : run.metrics) {
        const double rel = m.mean_true_range_m > 0.0
                               ? std::min(m.range_rmse_m / m.mean_true_range_m, opt.rmse_cap)
                               : opt.rmse_cap;
        rmse_sum += rel;
        class_sum += m.class_correct ? 0.0 : 1.0;
        ++n;
      }
    } catch (const std::exception&) {
      ++local.failures;
    }
  }
  if (n == 0) {
    local.total = opt.failure_penalty;
    if (breakdown) *breakdown = local;
    return local.total;
  }
  local.rmse_term = rmse_sum / n;
  local.class_term = class_sum / n;
  local.total = opt.w_rmse * local.rmse_term + opt.w_class * local.class_term +
                opt.w_cost * local.cost_term + local.failures * opt.failure_penalty;
  if (breakdown) *breakdown = local;
  return local.total;
}

OptimizationReport optimize_architecture(const harness::ScenarioSpec& base) {
  if (!base.optimize) throw RuntimeError("scenario has no optimize block");
  const auto& opt = *base.optimize;

  // variables without declared bounds stay fixed at the base values
  ConfigVector base_cfg;
  base_cfg.carrier_count = static_cast<int>(base.carriers.size());
  base_cfg.layout = base.sensor.layout;
  base_cfg.link_loss = base.link.loss_prob;
  if (!base.carriers.empty() && !base.carriers.front().modes.empty()) {
    base_cfg.bearing_noise_std_rad =
        base.carriers.front().modes.front().bearing_noise_std_rad;
    base_cfg.frame_rate_hz = base.carriers.front().modes.front().frame_rate_hz;
  }
  const VecX base_x = base_cfg.to_vector();

  VecX lo = base_x, hi = base_x;
  for (int j = 0; j < ConfigVector::kDim; ++j) {
    const auto it = opt.bounds.find(kConfigVariables[j]);
    if (it != opt.bounds.end()) {
      lo[j] = it->second.lo;
      hi[j] = it->second.hi;
    }
  }

  DEParams de;
  de.population = opt.population;
  de.weight_f = opt.weight_f;
  de.crossover = opt.crossover;
  de.max_generations = opt.max_generations;
  de.seed = opt.seed;

  auto objective = [&](const VecX& x) {
    return evaluate_config(ConfigVector::from_vector(x), base, base.seeds, opt);
  };
  const std::vector<bool> mask(kConfigIntegerMask.begin(), kConfigIntegerMask.end());
  const DEResult r = differential_evolution(objective, lo, hi, mask, de);

  OptimizationReport report;
  report.best = ConfigVector::from_vector(r.best);
  report.best_score = r.best_score;
  report.history = r.history;
  report.evaluations = r.evaluations;
  evaluate_config(report.best, base, base.seeds, opt, &report.breakdown);
  return report;
}

}  // namespace neos::opt
