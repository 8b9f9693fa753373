#pragma once

#include <functional>

#include "neos/fusion.hpp"

namespace neos::opt {

/// The eleven information-processing stages of the pipeline; allocation
/// labels for the boundary cost model only.
enum class PipelineStage {
  RawAcquisition = 1,
  Detection = 2,
  Classification = 3,
  Refinement = 4,
  SituationModel = 5,
  IntentRecognition = 6,
  SituationPrediction = 7,
  StrategySynthesis = 8,
  ProgramCreation = 9,
  CommandGeneration = 10,
  CommandExecution = 11,
};

/// Stage split across the sensor / information-management / effector sides:
/// stages <= boundary_a run on the sensor, stages > boundary_b on the
/// effector. Crossing a boundary costs the data rate leaving its stage.
struct BoundaryPlacement {
  int boundary_a = 3;
  int boundary_b = 7;
  harness::CostModelSpec cost_model;

  double crossing_rate() const {
    return cost_model.stage_rates[boundary_a - 1] + cost_model.stage_rates[boundary_b - 1];
  }
};

/// Decision vector of the architecture search. Component order matches
/// kConfigVariables for the flat real-vector encoding.
struct ConfigVector {
  int carrier_count = 1;
  sensor::LayoutId layout = sensor::LayoutId::Cube6;
  double bearing_noise_std_rad = 5e-4;
  double frame_rate_hz = 10.0;
  int boundary_a = 3;
  int boundary_b = 7;
  double link_loss = 0.0;

  static constexpr int kDim = 7;
  VecX to_vector() const;
  static ConfigVector from_vector(const VecX& x);  // rounds integer components
};

extern const std::array<const char*, ConfigVector::kDim> kConfigVariables;
extern const std::array<bool, ConfigVector::kDim> kConfigIntegerMask;

struct DEParams {
  int population = 30;      // NP >= 4
  double weight_f = 0.7;    // differential weight, (0, 2]
  double crossover = 0.9;   // CR, [0, 1]
  int max_generations = 100;
  std::uint64_t seed = 1;
};

struct DEResult {
  VecX best;
  double best_score = 0.0;
  std::vector<double> history;  // best-so-far after init and each generation
  int evaluations = 0;
};

/// DE/rand/1/bin with binomial crossover (forced index), reflection at the
/// box bounds, round-at-evaluation integer handling and greedy selection.
/// Deterministic under the seed.
DEResult differential_evolution(const std::function<double(const VecX&)>& objective,
                                const VecX& lower, const VecX& upper,
                                const std::vector<bool>& integer_mask,
                                const DEParams& params);

struct ScoreBreakdown {
  double rmse_term = 0.0;
  double class_term = 0.0;
  double cost_term = 0.0;
  double total = 0.0;
  int failures = 0;
};

/// Applies the decision vector to the base scenario (carrier subset, layout,
/// noise, frame rate, link loss).
harness::ScenarioSpec apply_config(const harness::ScenarioSpec& base,
                                   const ConfigVector& cfg);

/// Desk-scale objective: mean over seeds of the weighted sum of normalized
/// range RMSE, misclassification rate and the configuration cost. Scenario
/// failures contribute the declared finite penalty.
double evaluate_config(const ConfigVector& cfg, const harness::ScenarioSpec& base,
                       const std::vector<std::uint64_t>& seeds,
                       const harness::OptimizeSpec& opt,
                       ScoreBreakdown* breakdown = nullptr);

struct OptimizationReport {
  ConfigVector best;
  double best_score = 0.0;
  std::vector<double> history;
  int evaluations = 0;
  ScoreBreakdown breakdown;  // of the best configuration
};

/// Runs differential evolution over evaluate_config with bounds taken from
/// the scenario's optimize block (missing variables stay fixed at the base
/// scenario's values).
OptimizationReport optimize_architecture(const harness::ScenarioSpec& base);

}  // namespace neos::opt
