#pragma once

#include <optional>
#include <vector>

#include "neos/sensor.hpp"

namespace neos::filter {

/// One (class, state) pair of the joint classification/estimation task with
/// its conditional Gaussian filter state over [position velocity acceleration].
struct Hypothesis {
  int class_id = 1;
  int state_id = 1;
  scene::MotionModel model;
  Vec9 mean = Vec9::Zero();
  Mat9 cov = Mat9::Identity();
  double log_weight = 0.0;
};

struct FilterSettings {
  int range_ladder_count = 8;
  double meas_noise_floor_rad = 1e-6;
  // optional observation-condition coupling: inflate the bearing noise std by
  // (1 + coeff * integrated extinction); off by default
  bool extinction_noise_scaling = false;
  double extinction_noise_coeff = 1.0;
};

struct HypothesisBank {
  std::vector<Hypothesis> hyps;
  scene::ObjectClassCatalog catalog;
  double time_s = 0.0;
  int psd_clamp_events = 0;

  std::vector<double> weights() const;  // normalized, sums to 1
  double class_weight(int class_id) const;
};

/// Non-rigid probability inequality: a violated predicate multiplies the
/// hypothesis weight by (1 - confidence), never by zero.
struct SoftConstraint {
  enum class Kind {
    MinAltitudeAboveTerrain,  // threshold = minimum clearance, m
    MaxAltitude,              // threshold = geodetic altitude ceiling, m
    MaxSpeed,                 // threshold = m/s
    MinSpeed,
    MaxAccel,                 // threshold = m/s^2
  };
  Kind kind = Kind::MaxSpeed;
  double threshold = 0.0;
  double confidence = 0.5;  // strictly inside (0,1)
};

SoftConstraint::Kind constraint_kind_from_string(const std::string& s);

struct EstimationGrid {
  std::vector<double> times_s;  // strictly increasing

  enum class Regime { Approximation, Extrapolation, Mixed };
  Regime regime(double obs_t_min, double obs_t_max) const;
};

std::string to_string(EstimationGrid::Regime r);

/// Joint estimate over the estimation grid plus causal per-frame diagnostics.
struct GridEstimate {
  double t_s = 0.0;
  int state_id_hat = 1;
  Vec9 mean = Vec9::Zero();  // MAP-class mixture
  Mat9 cov = Mat9::Identity();
};

struct FrameSummary {
  double t_s = 0.0;
  Vec9 mean = Vec9::Zero();  // all-hypothesis mixture, after the update at t
  Mat9 cov = Mat9::Identity();
  std::vector<double> weights;
};

struct EstimateSet {
  int class_id_hat = 1;
  std::vector<std::pair<int, int>> hypothesis_ids;  // (class, state) per column
  std::vector<double> final_weights;
  std::vector<GridEstimate> grid;
  std::vector<FrameSummary> frames;
  EstimationGrid::Regime regime = EstimationGrid::Regime::Approximation;
  int psd_clamp_events = 0;
};

// --- motion-model algebra (shared by predict, smoothing and extrapolation) ---

/// Exact state transition matrix of the model over dt (dt may be negative).
Mat9 motion_transition(const scene::MotionModel& model, double dt_s);

/// Closed-form mean propagation; equals motion_transition(model,dt)*x up to
/// roundoff but evaluates the kinematic expressions componentwise.
Vec9 propagate_mean(const scene::MotionModel& model, const Vec9& x, double dt_s);

/// Discrete process noise over |dt|.
Mat9 process_noise_cov(const scene::MotionModel& model, double dt_s);

/// First-order Markov transition matrix of a class's state set over dt:
/// off-diagonal p_ij = rate_ij*dt clamped so rows remain distributions.
MatX markov_transition_matrix(const scene::ObjectClass& cls, double dt_s);

/// IMM mixing step: given per-state weights, means and covariances and a row
/// stochastic transition matrix, returns mixed weights/means/covariances.
void imm_mix(const MatX& transition, std::vector<double>& weights,
             std::vector<Vec9>& means, std::vector<Mat9>& covs);

/// Clamps negative eigenvalues to zero; returns true when clamping occurred.
bool psd_clamp(Mat9& p);

// --- bank operations ---

/// Range-parameterized initialization from the first two measurements: a
/// geometric ladder of candidate ranges spanning the carrier's detection band
/// is seeded along the latest line of sight and moment-matched into one
/// Gaussian per hypothesis. Uniform initial weights.
HypothesisBank init_bank(const scene::ObjectClassCatalog& catalog,
                         const sensor::ObservationSet& first_measurements,
                         const scene::CarrierCatalog& carriers,
                         const FilterSettings& settings = {});

/// Time update: within-class IMM mixing followed by per-hypothesis moment
/// propagation (exact linear transition plus process noise).
void predict(HypothesisBank& bank, double dt_s);

/// Measurement update against the bearing model on the 2-d tangent plane of
/// the predicted line of sight (sigma-point transform), followed by soft
/// constraints and weight renormalization.
void update(HypothesisBank& bank, const sensor::Measurement& m,
            const scene::CarrierCatalog& carriers,
            const geodesy::Environment* env = nullptr,
            const std::vector<SoftConstraint>& constraints = {},
            const FilterSettings& settings = {});

/// Applies the non-rigid constraint penalties to one hypothesis at its mean;
/// returns the adjusted log-weight.
double apply_soft_constraints(const Hypothesis& hyp,
                              const std::vector<SoftConstraint>& constraints,
                              const geodesy::Environment* env);

/// Full joint solve (needs K >= 3): recursive filtering over the observation
/// set, fixed-interval smoothing inside the observed window, prediction-only
/// extrapolation outside it, and MAP classification.
EstimateSet solve(const sensor::ObservationSet& obs, const EstimationGrid& grid,
                  const scene::ObjectClassCatalog& catalog,
                  const scene::CarrierCatalog& carriers,
                  const geodesy::Environment* env = nullptr,
                  const std::vector<SoftConstraint>& constraints = {},
                  const FilterSettings& settings = {});

// --- task-class reporting ---

struct TrajectoryEndpoint {
  bool reached = false;
  double t_s = 0.0;
  Vec3 position_m = Vec3::Zero();
  Vec9 cov_diagonal = Vec9::Zero();
};

struct TaskClassOutput {
  // A - operative
  double slant_range_m = 0.0;
  double slant_range_std_m = 0.0;
  Vec3 velocity_mps = Vec3::Zero();
  // B - tactical
  std::vector<Vec3> route_m;
  double route_length_m = 0.0;
  // C - strategic
  TrajectoryEndpoint start;
  TrajectoryEndpoint end;
};

struct TaskReportSettings {
  double extrapolation_horizon_s = 600.0;
  double extrapolation_step_s = 0.5;
  double zero_speed_eps_mps = 1.0;
};

/// Task classes A/B/C evaluated from an estimate: instantaneous slant range
/// and velocity, the route polyline, and terminal-predicate endpoints found
/// by backward/forward extrapolation (terrain intersection or zero speed).
TaskClassOutput task_class_report(const EstimateSet& est,
                                  const scene::ObjectClassCatalog& catalog,
                                  const Vec3& latest_carrier_pos_m,
                                  const geodesy::Environment* env = nullptr,
                                  const TaskReportSettings& settings = {});

/// Midpoint of the common perpendicular of two measured rays plus the
/// perpendicular gap. Throws on near-parallel geometry.
struct TriangulationResult {
  Vec3 point_m = Vec3::Zero();
  double residual_m = 0.0;
};
TriangulationResult triangulate_baseline(const sensor::Measurement& m1,
                                         const sensor::Measurement& m2);

}  // namespace neos::filter
