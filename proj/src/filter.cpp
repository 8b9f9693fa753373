#include "neos/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace neos::filter {

using scene::MotionKind;
using scene::MotionModel;

std::vector<double> HypothesisBank::weights() const {
  std::vector<double> w(hyps.size());
  double max_lw = -std::numeric_limits<double>::infinity();
  for (const auto& h : hyps) max_lw = std::max(max_lw, h.log_weight);
  double sum = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    w[i] = std::exp(hyps[i].log_weight - max_lw);
    sum += w[i];
  }
  for (auto& x : w) x /= sum;
  return w;
}

double HypothesisBank::class_weight(int class_id) const {
  const auto w = weights();
  double s = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i)
    if (hyps[i].class_id == class_id) s += w[i];
  return s;
}

SoftConstraint::Kind constraint_kind_from_string(const std::string& s) {
  if (s == "min_altitude_above_terrain") return SoftConstraint::Kind::MinAltitudeAboveTerrain;
  if (s == "max_altitude") return SoftConstraint::Kind::MaxAltitude;
  if (s == "max_speed") return SoftConstraint::Kind::MaxSpeed;
  if (s == "min_speed") return SoftConstraint::Kind::MinSpeed;
  if (s == "max_accel") return SoftConstraint::Kind::MaxAccel;
  throw RuntimeError("unknown constraint kind: " + s);
}

EstimationGrid::Regime EstimationGrid::regime(double obs_t_min, double obs_t_max) const {
  if (times_s.empty()) throw RuntimeError("empty estimation grid");
  const double n_min = times_s.front(), n_max = times_s.back();
  if (n_min >= obs_t_min && n_max <= obs_t_max) return Regime::Approximation;
  if (n_max < obs_t_min || n_min > obs_t_max) return Regime::Extrapolation;
  return Regime::Mixed;
}

std::string to_string(EstimationGrid::Regime r) {
  switch (r) {
    case EstimationGrid::Regime::Approximation: return "approximation";
    case EstimationGrid::Regime::Extrapolation: return "extrapolation";
    case EstimationGrid::Regime::Mixed: return "mixed";
  }
  return "?";
}

// ---------------------------------------------------------------- motion ---

namespace {

Mat3 cross_matrix(const Vec3& a) {
  Mat3 m;
  m << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
  return m;
}

// rotation about the unit turn axis by omega*dt and its position integral
void turn_blocks(const MotionModel& model, double dt, Mat3& rot, Mat3& pos_int) {
  const Vec3 axis = model.turn_axis.normalized();
  const double w = model.turn_rate_radps;
  const Mat3 ax = cross_matrix(axis);
  const Mat3 par = axis * axis.transpose();
  const Mat3 perp = Mat3::Identity() - par;
  const double a = w * dt;
  const double c = std::cos(a), s = std::sin(a);
  rot = par + c * perp + s * ax;
  if (std::abs(w) < 1e-12) {
    pos_int = dt * Mat3::Identity();
  } else {
    pos_int = dt * par + (s / w) * perp + ((1.0 - c) / w) * ax;
  }
}

}  // namespace

Mat9 motion_transition(const MotionModel& model, double dt) {
  Mat9 f = Mat9::Zero();
  f.block<3, 3>(0, 0).setIdentity();
  f.block<3, 3>(3, 3).setIdentity();
  switch (model.kind) {
    case MotionKind::ConstantVelocity:
      f.block<3, 3>(0, 3) = dt * Mat3::Identity();
      break;
    case MotionKind::ConstantAcceleration:
      f.block<3, 3>(0, 3) = dt * Mat3::Identity();
      f.block<3, 3>(0, 6) = 0.5 * dt * dt * Mat3::Identity();
      f.block<3, 3>(3, 6) = dt * Mat3::Identity();
      f.block<3, 3>(6, 6).setIdentity();
      break;
    case MotionKind::CoordinatedTurn: {
      Mat3 rot, pos_int;
      turn_blocks(model, dt, rot, pos_int);
      f.block<3, 3>(0, 3) = pos_int;
      f.block<3, 3>(3, 3) = rot;
      f.block<3, 3>(6, 3) =
          model.turn_rate_radps * cross_matrix(model.turn_axis.normalized()) * rot;
      break;
    }
  }
  return f;
}

Vec9 propagate_mean(const MotionModel& model, const Vec9& x, double dt) {
  const Vec3 r = x.segment<3>(0), v = x.segment<3>(3), a = x.segment<3>(6);
  Vec9 out = Vec9::Zero();
  switch (model.kind) {
    case MotionKind::ConstantVelocity:
      for (int i = 0; i < 3; ++i) {
        out[i] = r[i] + v[i] * dt;
        out[3 + i] = v[i];
      }
      break;
    case MotionKind::ConstantAcceleration:
      for (int i = 0; i < 3; ++i) {
        out[i] = r[i] + v[i] * dt + 0.5 * a[i] * dt * dt;
        out[3 + i] = v[i] + a[i] * dt;
        out[6 + i] = a[i];
      }
      break;
    case MotionKind::CoordinatedTurn: {
      Mat3 rot, pos_int;
      turn_blocks(model, dt, rot, pos_int);
      const Vec3 v1 = rot * v;
      out.segment<3>(0) = r + pos_int * v;
      out.segment<3>(3) = v1;
      out.segment<3>(6) = model.turn_rate_radps * model.turn_axis.normalized().cross(v1);
      break;
    }
  }
  return out;
}

Mat9 process_noise_cov(const MotionModel& model, double dt_s) {
  const double dt = std::abs(dt_s);
  const double q = model.noise_intensity;
  Mat9 cov = Mat9::Zero();
  if (q <= 0.0 || dt == 0.0) return cov;
  const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt, dt5 = dt4 * dt;
  switch (model.kind) {
    case MotionKind::ConstantVelocity:
    case MotionKind::CoordinatedTurn: {
      // white-noise acceleration on (r, v)
      for (int i = 0; i < 3; ++i) {
        cov(i, i) = q * dt3 / 3.0;
        cov(3 + i, 3 + i) = q * dt;
        cov(i, 3 + i) = cov(3 + i, i) = q * dt2 / 2.0;
      }
      if (model.kind == MotionKind::CoordinatedTurn) {
        const double w2 = model.turn_rate_radps * model.turn_rate_radps;
        for (int i = 0; i < 3; ++i) cov(6 + i, 6 + i) = w2 * q * dt;
      }
      break;
    }
    case MotionKind::ConstantAcceleration: {
      // white-noise jerk on (r, v, a)
      for (int i = 0; i < 3; ++i) {
        cov(i, i) = q * dt5 / 20.0;
        cov(3 + i, 3 + i) = q * dt3 / 3.0;
        cov(6 + i, 6 + i) = q * dt;
        cov(i, 3 + i) = cov(3 + i, i) = q * dt4 / 8.0;
        cov(i, 6 + i) = cov(6 + i, i) = q * dt3 / 6.0;
        cov(3 + i, 6 + i) = cov(6 + i, 3 + i) = q * dt2 / 2.0;
      }
      break;
    }
  }
  return cov;
}

MatX markov_transition_matrix(const scene::ObjectClass& cls, double dt_s) {
  const int n = static_cast<int>(cls.states.size());
  MatX p = MatX::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double rate = 0.0;
      if (cls.transition_rates_per_s.rows() == n && cls.transition_rates_per_s.cols() == n)
        rate = cls.transition_rates_per_s(i, j);
      p(i, j) = std::max(0.0, rate * dt_s);
      off += p(i, j);
    }
    if (off > 1.0) {
      p.row(i) /= off;
      off = 1.0;
    }
    p(i, i) = 1.0 - off;
  }
  return p;
}

void imm_mix(const MatX& transition, std::vector<double>& weights,
             std::vector<Vec9>& means, std::vector<Mat9>& covs) {
  const int n = static_cast<int>(weights.size());
  if (transition.rows() != n || transition.cols() != n)
    throw RuntimeError("transition matrix size mismatch");
  std::vector<double> w_out(n, 0.0);
  std::vector<Vec9> m_out(n, Vec9::Zero());
  std::vector<Mat9> p_out(n, Mat9::Zero());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) w_out[j] += weights[i] * transition(i, j);
    if (w_out[j] <= 0.0) {  // unreachable state keeps its own moments
      m_out[j] = means[j];
      p_out[j] = covs[j];
      continue;
    }
    for (int i = 0; i < n; ++i)
      m_out[j] += (weights[i] * transition(i, j) / w_out[j]) * means[i];
    for (int i = 0; i < n; ++i) {
      const Vec9 d = means[i] - m_out[j];
      p_out[j] += (weights[i] * transition(i, j) / w_out[j]) * (covs[i] + d * d.transpose());
    }
  }
  weights = std::move(w_out);
  means = std::move(m_out);
  covs = std::move(p_out);
}

bool psd_clamp(Mat9& p) {
  p = 0.5 * (p + p.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat9> es(p);
  if (es.eigenvalues().minCoeff() >= 0.0) return false;
  Vec9 ev = es.eigenvalues().cwiseMax(0.0);
  p = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  p = 0.5 * (p + p.transpose()).eval();
  return true;
}

// ------------------------------------------------------------------ bank ---

namespace {

void renormalize(HypothesisBank& bank) {
  double max_lw = -std::numeric_limits<double>::infinity();
  for (const auto& h : bank.hyps) max_lw = std::max(max_lw, h.log_weight);
  double sum = 0.0;
  for (const auto& h : bank.hyps) sum += std::exp(h.log_weight - max_lw);
  const double log_sum = max_lw + std::log(sum);
  for (auto& h : bank.hyps) h.log_weight -= log_sum;
}

double effective_bearing_std(const sensor::Measurement& m,
                             const scene::CarrierCatalog& carriers,
                             const FilterSettings& settings) {
  const auto& params = carriers.lookup(m.carrier_id, m.carrier_mode);
  double std_rad = std::max(params.bearing_noise_std_rad, settings.meas_noise_floor_rad);
  if (settings.extinction_noise_scaling)
    std_rad *= 1.0 + settings.extinction_noise_coeff * m.obs_extinction;
  return std_rad;
}

}  // namespace

HypothesisBank init_bank(const scene::ObjectClassCatalog& catalog,
                         const sensor::ObservationSet& first_measurements,
                         const scene::CarrierCatalog& carriers,
                         const FilterSettings& settings) {
  if (first_measurements.size() < 2)
    throw RuntimeError("init_bank needs at least 2 measurements");
  const auto& m1 = first_measurements[0];
  const auto& m2 = first_measurements[1];
  // the line-of-sight rate seed needs two sightings from one vantage point;
  // a cross-carrier difference would read parallax as target motion
  const sensor::Measurement* m1_same = nullptr;
  for (std::size_t k = 1; k < first_measurements.size(); ++k) {
    if (first_measurements[k].carrier_id == m1.carrier_id &&
        first_measurements[k].t_s > m1.t_s) {
      m1_same = &first_measurements[k];
      break;
    }
  }
  const auto& band = carriers.lookup(m2.carrier_id, m2.carrier_mode);
  const double bearing_std = effective_bearing_std(m2, carriers, settings);

  // geometric range ladder across the detection band
  const int n_rungs = std::max(1, settings.range_ladder_count);
  std::vector<double> ranges(n_rungs);
  const double r_lo = band.detect_range_min_m, r_hi = band.detect_range_max_m;
  for (int i = 0; i < n_rungs; ++i) {
    const double frac = n_rungs == 1 ? 0.5 : double(i) / (n_rungs - 1);
    ranges[i] = r_lo * std::pow(r_hi / r_lo, frac);
  }
  const double ladder_step = n_rungs > 1 ? std::pow(r_hi / r_lo, 1.0 / (n_rungs - 1)) : 2.0;

  const Vec3 los = m2.los_dir_meas.normalized();
  Vec3 e1, e2;
  tangent_basis(los, e1, e2);
  const Vec3 los_rate = dt > 0.0 ? ((m2.los_dir_meas - m1.los_dir_meas) / dt).eval()
                                 : Vec3::Zero().eval();

  HypothesisBank bank;
  bank.catalog = catalog;
  bank.time_s = m2.t_s;

  int n_hyps = 0;
  for (const auto& c : catalog.classes) n_hyps += static_cast<int>(c.states.size());
  if (n_hyps == 0) throw RuntimeError("empty catalog");

  for (const auto& c : catalog.classes) {
    for (const auto& s : c.states) {
      Hypothesis h;
      h.class_id = c.class_id;
      h.state_id = s.state_id;
      h.model = s.model;
      h.log_weight = -std::log(double(n_hyps));

      const double v_max = s.model.bounds.speed_max_mps;
      const double sigma_v = std::max(1.0, v_max) / std::sqrt(3.0);
      double sigma_a = 1e-3;
      Vec3 accel_scale = Vec3::Zero();
      if (s.model.kind == MotionKind::ConstantAcceleration) {
        sigma_a = std::max(0.1, s.model.bounds.accel_max_mps2) / std::sqrt(3.0);
      } else if (s.model.kind == MotionKind::CoordinatedTurn) {
        sigma_a = std::abs(s.model.turn_rate_radps) * sigma_v;
      }

      // moment-matched merge of the equally weighted range rungs
      std::vector<Vec9> rung_means(n_rungs);
      std::vector<Mat9> rung_covs(n_rungs);
      for (int i = 0; i < n_rungs; ++i) {
        const double r = ranges[i];
        Vec9 x = Vec9::Zero();
        x.segment<3>(0) = m2.carrier_pos_meas_m + r * los;
        x.segment<3>(3) = r * los_rate;
        if (s.model.kind == MotionKind::CoordinatedTurn)
          x.segment<3>(6) = s.model.turn_rate_radps *
                            s.model.turn_axis.normalized().cross(x.segment<3>(3));

        const double sigma_r = r * 0.5 * (ladder_step - 1.0);
        const double sigma_t = r * std::max(10.0 * bearing_std, 1e-3);
        Mat3 pos_cov = sigma_r * sigma_r * (los * los.transpose()) +
                       sigma_t * sigma_t * (e1 * e1.transpose() + e2 * e2.transpose());
        Mat9 p = Mat9::Zero();
        p.block<3, 3>(0, 0) = pos_cov;
        p.block<3, 3>(3, 3) = sigma_v * sigma_v * Mat3::Identity();
        p.block<3, 3>(6, 6) = sigma_a * sigma_a * Mat3::Identity();
        rung_means[i] = x;
        rung_covs[i] = p;
      }
      Vec9 mean = Vec9::Zero();
      for (const auto& x : rung_means) mean += x / double(n_rungs);
      Mat9 cov = Mat9::Zero();
      for (int i = 0; i < n_rungs; ++i) {
        const Vec9 d = rung_means[i] - mean;
        cov += (rung_covs[i] + d * d.transpose()) / double(n_rungs);
      }
      h.mean = mean;
      h.cov = cov;
      bank.hyps.push_back(std::move(h));
    }
  }
  return bank;
}

void predict(HypothesisBank& bank, double dt_s) {
  if (!(dt_s > 0.0)) throw RuntimeError("predict requires dt > 0");

  // within-class interacting-multiple-model mixing
  for (const auto& c : bank.catalog.classes) {
    if (c.states.size() < 2) continue;
    std::vector<int> idx;
    for (std::size_t i = 0; i < bank.hyps.size(); ++i)
      if (bank.hyps[i].class_id == c.class_id) idx.push_back(static_cast<int>(i));
    if (idx.size() != c.states.size()) continue;

    const auto all_w = bank.weights();
    std::vector<double> w(idx.size());
    std::vector<Vec9> m(idx.size());
    std::vector<Mat9> p(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      w[j] = all_w[idx[j]];
      m[j] = bank.hyps[idx[j]].mean;
      p[j] = bank.hyps[idx[j]].cov;
    }
    imm_mix(markov_transition_matrix(c, dt_s), w, m, p);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      auto& h = bank.hyps[idx[j]];
      h.log_weight = std::log(std::max(w[j], 1e-300));
      h.mean = m[j];
      h.cov = p[j];
    }
  }
  renormalize(bank);

  for (auto& h : bank.hyps) {
    const Mat9 f = motion_transition(h.model, dt_s);
    h.mean = propagate_mean(h.model, h.mean, dt_s);
    h.cov = f * h.cov * f.transpose() + process_noise_cov(h.model, dt_s);
    if (psd_clamp(h.cov)) ++bank.psd_clamp_events;
  }
  bank.time_s += dt_s;
}

double apply_soft_constraints(const Hypothesis& hyp,
                              const std::vector<SoftConstraint>& constraints,
                              const geodesy::Environment* env) {
  double lw = hyp.log_weight;
  const Vec3 pos = hyp.mean.segment<3>(0);
  const Vec3 vel = hyp.mean.segment<3>(3);
  const Vec3 acc = hyp.mean.segment<3>(6);
  for (const auto& c : constraints) {
    if (!(c.confidence > 0.0 && c.confidence < 1.0))
      throw RuntimeError("soft-constraint confidence must be inside (0,1)");
    bool violated = false;
    switch (c.kind) {
      case SoftConstraint::Kind::MaxSpeed: violated = vel.norm() > c.threshold; break;
      case SoftConstraint::Kind::MinSpeed: violated = vel.norm() < c.threshold; break;
      case SoftConstraint::Kind::MaxAccel: violated = acc.norm() > c.threshold; break;
      case SoftConstraint::Kind::MaxAltitude: {
        if (env == nullptr) break;
        const auto g = geodesy::ecef_to_geodetic(geodesy::EcefVector::from(pos),
                                                 env->ellipsoid);
        violated = g.altitude_m > c.threshold;
        break;
      }
      case SoftConstraint::Kind::MinAltitudeAboveTerrain: {
        if (env == nullptr) break;
        const auto g = geodesy::ecef_to_geodetic(geodesy::EcefVector::from(pos),
                                                 env->ellipsoid);
        try {
          const double terrain =
              geodesy::terrain_height_at(env->terrain, g.latitude_rad, g.longitude_rad);
          violated = (g.altitude_m - terrain) < c.threshold;
        } catch (const RuntimeError&) {
          violated = false;  // outside map coverage: no evidence, no penalty
        }
        break;
      }
    }
    if (violated) lw += std::log1p(-c.confidence);
  }
  return lw;
}

void update(HypothesisBank& bank, const sensor::Measurement& m,
            const scene::CarrierCatalog& carriers, const geodesy::Environment* env,
            const std::vector<SoftConstraint>& constraints,
            const FilterSettings& settings) {
  if (m.t_s < bank.time_s - 1e-9) throw RuntimeError("out-of-order update");
  const double std_rad = effective_bearing_std(m, carriers, settings);
  const Mat2 meas_cov = std_rad * std_rad * Mat2::Identity();

  constexpr int n = 9;
  const double lambda = 0.0;  // plain symmetric sigma set
  const double wi = 1.0 / (2.0 * (n + lambda));

  for (auto& h : bank.hyps) {
    const Vec3 rel = h.mean.segment<3>(0) - m.carrier_pos_meas_m;
    if (rel.norm() < 1e-6) continue;  // carrier-coincident mean carries no bearing info
    const Vec3 pred_los = rel.normalized();
    Vec3 e1, e2;
    tangent_basis(pred_los, e1, e2);
    const Vec2 z(e1.dot(m.los_dir_meas), e2.dot(m.los_dir_meas));

    Eigen::SelfAdjointEigenSolver<Mat9> es(h.cov);
    const Mat9 sqrt_cov = es.eigenvectors() *
                          es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                          es.eigenvectors().transpose();
    const double scale = std::sqrt(double(n) + lambda);

    std::array<Vec9, 2 * n> sigma;
    for (int i = 0; i < n; ++i) {
      sigma[2 * i] = h.mean + scale * sqrt_cov.col(i);
      sigma[2 * i + 1] = h.mean - scale * sqrt_cov.col(i);
    }
    auto h_meas = [&](const Vec9& x) {
      const Vec3 d = (x.segment<3>(0) - m.carrier_pos_meas_m);
      const double norm = d.norm();
      if (norm < 1e-9) return Vec2(0, 0);
      const Vec3 u = d / norm;
      return Vec2(e1.dot(u), e2.dot(u));
    };

    Vec2 z_mean = Vec2::Zero();
    std::array<Vec2, 2 * n> zs;
    for (int i = 0; i < 2 * n; ++i) {
      zs[i] = h_meas(sigma[i]);
      z_mean += wi * zs[i];
    }
    Mat2 s_cov = meas_cov;
    Eigen::Matrix<double, 9, 2> c_cov = Eigen::Matrix<double, 9, 2>::Zero();
    for (int i = 0; i < 2 * n; ++i) {
      const Vec2 dz = zs[i] - z_mean;
      s_cov += wi * dz * dz.transpose();
      c_cov += wi * (sigma[i] - h.mean) * dz.transpose();
    }

    const Vec2 innov = z - z_mean;
    const Mat2 s_inv = s_cov.inverse();
    const Eigen::Matrix<double, 9, 2> gain = c_cov * s_inv;
    h.mean += gain * innov;
    h.cov -= gain * s_cov * gain.transpose();
    if (psd_clamp(h.cov)) ++bank.psd_clamp_events;

    const double log_lik = -0.5 * innov.dot(s_inv * innov) -
                           0.5 * std::log(4.0 * kPi * kPi * s_cov.determinant());
    h.log_weight += log_lik;
  }

  for (auto& h : bank.hyps) h.log_weight = apply_soft_constraints(h, constraints, env);
  renormalize(bank);
  bank.time_s = std::max(bank.time_s, m.t_s);
}

// ----------------------------------------------------------------- solve ---

namespace {

struct StepRecord {
  double t = 0.0;
  // per hypothesis, in bank order
  std::vector<Vec9> filt_mean;
  std::vector<Mat9> filt_cov;
  std::vector<Mat9> trans;      // F from previous record time to t
  std::vector<Mat9> pred_cov;   // P- at t (before update)
  std::vector<Vec9> pred_mean;  // x- at t
  std::vector<double> weights;
};

void mixture_moments(const std::vector<Vec9>& means, const std::vector<Mat9>& covs,
                     const std::vector<double>& w, Vec9& mean, Mat9& cov) {
  mean = Vec9::Zero();
  for (std::size_t i = 0; i < means.size(); ++i) mean += w[i] * means[i];
  cov = Mat9::Zero();
  for (std::size_t i = 0; i < means.size(); ++i) {
    const Vec9 d = means[i] - mean;
    cov += w[i] * (covs[i] + d * d.transpose());
  }
}

}  // namespace

EstimateSet solve(const sensor::ObservationSet& obs, const EstimationGrid& grid,
                  const scene::ObjectClassCatalog& catalog,
                  const scene::CarrierCatalog& carriers, const geodesy::Environment* env,
                  const std::vector<SoftConstraint>& constraints,
                  const FilterSettings& settings) {
  if (obs.size() < 3) throw RuntimeError("insufficient observations (need K >= 3)");
  if (grid.times_s.empty()) throw RuntimeError("empty estimation grid");
  for (std::size_t i = 1; i < grid.times_s.size(); ++i)
    if (grid.times_s[i] <= grid.times_s[i - 1])
      throw RuntimeError("estimation grid times must be strictly increasing");

  HypothesisBank bank = init_bank(catalog, obs, carriers, settings);
  const std::size_t n_hyps = bank.hyps.size();

  EstimateSet est;
  for (const auto& h : bank.hyps) est.hypothesis_ids.push_back({h.class_id, h.state_id});

  std::vector<StepRecord> steps;
  auto record_step = [&](const std::vector<Mat9>& trans, const std::vector<Vec9>& pm,
                         const std::vector<Mat9>& pc) {
    StepRecord rec;
    rec.t = bank.time_s;
    rec.weights = bank.weights();
    rec.trans = trans;
    rec.pred_mean = pm;
    rec.pred_cov = pc;
    for (const auto& h : bank.hyps) {
      rec.filt_mean.push_back(h.mean);
      rec.filt_cov.push_back(h.cov);
    }
    steps.push_back(std::move(rec));
  };

  // anchor at the init time (the second measurement)
  record_step(std::vector<Mat9>(n_hyps, Mat9::Identity()),
              std::vector<Vec9>(n_hyps, Vec9::Zero()),
              std::vector<Mat9>(n_hyps, Mat9::Zero()));

  for (std::size_t k = 2; k < obs.size(); ++k) {
    const auto& m = obs[k];
    const double dt = m.t_s - bank.time_s;
    std::vector<Mat9> trans(n_hyps, Mat9::Identity());
    if (dt > 0.0) {
      for (std::size_t i = 0; i < n_hyps; ++i)
        trans[i] = motion_transition(bank.hyps[i].model, dt);
      predict(bank, dt);
    }
    std::vector<Vec9> pred_mean;
    std::vector<Mat9> pred_cov;
    for (const auto& h : bank.hyps) {
      pred_mean.push_back(h.mean);
      pred_cov.push_back(h.cov);
    }
    update(bank, m, carriers, env, constraints, settings);
    record_step(trans, pred_mean, pred_cov);
  }

  est.final_weights = bank.weights();
  est.psd_clamp_events = bank.psd_clamp_events;

  // causal per-frame mixture diagnostics
  for (const auto& s : steps) {
    FrameSummary f;
    f.t_s = s.t;
    f.weights = s.weights;
    mixture_moments(s.filt_mean, s.filt_cov, s.weights, f.mean, f.cov);
    est.frames.push_back(std::move(f));
  }

  // MAP class from the final class-marginal posterior
  double best_w = -1.0;
  for (const auto& c : catalog.classes) {
    double cw = 0.0;
    for (std::size_t i = 0; i < n_hyps; ++i)
      if (est.hypothesis_ids[i].first == c.class_id) cw += est.final_weights[i];
    if (cw > best_w) {
      best_w = cw;
      est.class_id_hat = c.class_id;
    }
  }

  // fixed-interval smoother per hypothesis over the stored states
  const std::size_t n_steps = steps.size();
  std::vector<std::vector<Vec9>> smooth_mean(n_steps, std::vector<Vec9>(n_hyps));
  std::vector<std::vector<Mat9>> smooth_cov(n_steps, std::vector<Mat9>(n_hyps));
  for (std::size_t i = 0; i < n_hyps; ++i) {
    smooth_mean[n_steps - 1][i] = steps[n_steps - 1].filt_mean[i];
    smooth_cov[n_steps - 1][i] = steps[n_steps - 1].filt_cov[i];
  }
  for (std::size_t k = n_steps - 1; k-- > 0;) {
    for (std::size_t i = 0; i < n_hyps; ++i) {
      const Mat9& f = steps[k + 1].trans[i];
      const Mat9& p_pred = steps[k + 1].pred_cov[i];
      const Vec9& x_pred = steps[k + 1].pred_mean[i];
      // regularized inverse of the predicted covariance
      Eigen::SelfAdjointEigenSolver<Mat9> es(p_pred);
      Vec9 ev = es.eigenvalues();
      const double floor_ev = std::max(ev.maxCoeff(), 1.0) * 1e-12;
      Vec9 inv_ev;
      for (int j = 0; j < 9; ++j) inv_ev[j] = 1.0 / std::max(ev[j], floor_ev);
      const Mat9 p_pred_inv =
          es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();
      const Mat9 gain = steps[k].filt_cov[i] * f.transpose() * p_pred_inv;
      smooth_mean[k][i] =
          steps[k].filt_mean[i] + gain * (smooth_mean[k + 1][i] - x_pred);
      Mat9 p = steps[k].filt_cov[i] +
               gain * (smooth_cov[k + 1][i] - p_pred) * gain.transpose();
      psd_clamp(p);
      smooth_cov[k][i] = p;
    }
  }

  // per-grid-time estimates from the MAP class mixture
  const double t_first = steps.front().t, t_last = steps.back().t;
  for (const double tau : grid.times_s) {
    GridEstimate g;
    g.t_s = tau;

    // bracketing stored step
    std::size_t k = 0;
    while (k + 1 < n_steps && steps[k + 1].t <= tau) ++k;
    const bool forward_extrap = tau > t_last;
    const bool backward_extrap = tau < t_first;
    const std::size_t anchor = forward_extrap ? n_steps - 1 : (backward_extrap ? 0 : k);
    const std::vector<Vec9>& base_mean =
        (forward_extrap || backward_extrap) ? steps[anchor].filt_mean : smooth_mean[anchor];
    const std::vector<Mat9>& base_cov =
        (forward_extrap || backward_extrap) ? steps[anchor].filt_cov : smooth_cov[anchor];
    const double dt = tau - steps[anchor].t;

    std::vector<Vec9> means(n_hyps);
    std::vector<Mat9> covs(n_hyps);
    for (std::size_t i = 0; i < n_hyps; ++i) {
      if (dt == 0.0) {
        means[i] = base_mean[i];
        covs[i] = base_cov[i];
      } else {
        const auto& model = bank.hyps[i].model;
        const Mat9 f = motion_transition(model, dt);
        means[i] = propagate_mean(model, base_mean[i], dt);
        covs[i] = f * base_cov[i] * f.transpose() + process_noise_cov(model, dt);
        psd_clamp(covs[i]);
      }
    }

    // weights at the bracketing time, restricted to the MAP class
    const std::vector<double>& w_all = steps[anchor].weights;
    std::vector<double> w(n_hyps, 0.0);
    double w_sum = 0.0;
    int best_i = 0;
    double best_wi = -1.0;
    for (std::size_t i = 0; i < n_hyps; ++i) {
      if (est.hypothesis_ids[i].first != est.class_id_hat) continue;
      w[i] = w_all[i];
      w_sum += w[i];
      if (w[i] > best_wi) {
        best_wi = w[i];
        best_i = static_cast<int>(i);
      }
    }
    if (w_sum <= 0.0) {
      w.assign(n_hyps, 1.0 / double(n_hyps));
    } else {
      for (auto& x : w) x /= w_sum;
    }
    g.state_id_hat = est.hypothesis_ids[best_i].second;
    mixture_moments(means, covs, w, g.mean, g.cov);
    est.grid.push_back(std::move(g));
  }

  est.regime = grid.regime(obs[0].t_s, obs[obs.size() - 1].t_s);
  return est;
}

// ------------------------------------------------------------ task report ---

namespace {

std::optional<double> altitude_above_terrain(const Vec3& pos,
                                             const geodesy::Environment* env) {
  if (env == nullptr) return std::nullopt;
  const auto g =
      geodesy::ecef_to_geodetic(geodesy::EcefVector::from(pos), env->ellipsoid);
  try {
    return g.altitude_m -
           geodesy::terrain_height_at(env->terrain, g.latitude_rad, g.longitude_rad);
  } catch (const RuntimeError&) {
    return std::nullopt;
  }
}

TrajectoryEndpoint extrapolate_to_endpoint(Vec9 x, Mat9 p,
                                           const scene::MotionModel& model,
                                           double t0, double direction,
                                           const geodesy::Environment* env,
                                           const TaskReportSettings& settings) {
  TrajectoryEndpoint ep;
  const double dt = settings.extrapolation_step_s * direction;
  double t = t0;
  auto prev_alt = altitude_above_terrain(x.segment<3>(0), env);
  for (double elapsed = 0.0; elapsed < settings.extrapolation_horizon_s;
       elapsed += settings.extrapolation_step_s) {
    const Mat9 f = motion_transition(model, dt);
    x = propagate_mean(model, x, dt);
    p = f * p * f.transpose() + process_noise_cov(model, dt);
    t += dt;

    const auto alt = altitude_above_terrain(x.segment<3>(0), env);
    const bool hit_terrain = alt && *alt <= 0.0;
    const bool stopped = x.segment<3>(3).norm() <= settings.zero_speed_eps_mps;
    if (hit_terrain || stopped) {
      // refine the terrain crossing linearly within the last step
      if (hit_terrain && prev_alt && *prev_alt > 0.0) {
        const double frac = *prev_alt / (*prev_alt - *alt);
        x = propagate_mean(model, x, -dt * (1.0 - frac));
        t -= dt * (1.0 - frac);
      }
      ep.reached = true;
      ep.t_s = t;
      ep.position_m = x.segment<3>(0);
      ep.cov_diagonal = p.diagonal();
      return ep;
    }
    prev_alt = alt;
  }
  ep.reached = false;
  ep.t_s = t;
  ep.position_m = x.segment<3>(0);
  ep.cov_diagonal = p.diagonal();
  return ep;
}

}  // namespace

TaskClassOutput task_class_report(const EstimateSet& est,
                                  const scene::ObjectClassCatalog& catalog,
                                  const Vec3& latest_carrier_pos_m,
                                  const geodesy::Environment* env,
                                  const TaskReportSettings& settings) {
  if (est.grid.empty()) throw RuntimeError("estimate has no grid samples");
  TaskClassOutput out;

  const auto& last = est.grid.back();
  const Vec3 rel = last.mean.segment<3>(0) - latest_carrier_pos_m;
  out.slant_range_m = rel.norm();
  if (out.slant_range_m > 0.0) {
    const Vec3 u = rel / out.slant_range_m;
    out.slant_range_std_m = std::sqrt(
        std::max(0.0, double(u.transpose() * last.cov.block<3, 3>(0, 0) * u)));
  }
  out.velocity_mps = last.mean.segment<3>(3);

  out.route_m.reserve(est.grid.size());
  for (const auto& g : est.grid) out.route_m.push_back(g.mean.segment<3>(0));
  for (std::size_t i = 1; i < out.route_m.size(); ++i)
    out.route_length_m += (out.route_m[i] - out.route_m[i - 1]).norm();

  const auto& first = est.grid.front();
  const auto& model_last =
      catalog.cls(est.class_id_hat).state(last.state_id_hat).model;
  const auto& model_first =
      catalog.cls(est.class_id_hat).state(first.state_id_hat).model;
  out.start = extrapolate_to_endpoint(first.mean, first.cov, model_first, first.t_s,
                                      -1.0, env, settings);
  out.end = extrapolate_to_endpoint(last.mean, last.cov, model_last, last.t_s, 1.0,
                                    env, settings);
  return out;
}

TriangulationResult triangulate_baseline(const sensor::Measurement& m1,
                                         const sensor::Measurement& m2) {
  const Vec3 p1 = m1.carrier_pos_meas_m, p2 = m2.carrier_pos_meas_m;
  const Vec3 d1 = m1.los_dir_meas.normalized(), d2 = m2.los_dir_meas.normalized();
  if (d1.cross(d2).norm() < 1e-6) throw RuntimeError("degenerate geometry");

  const Vec3 w0 = p1 - p2;
  const double b = d1.dot(d2);
  const double d = d1.dot(w0), e = d2.dot(w0);
  const double denom = 1.0 - b * b;
  const double s1 = (b * e - d) / denom;
  const double s2 = (e - b * d) / denom;
  const Vec3 q1 = p1 + s1 * d1;
  const Vec3 q2 = p2 + s2 * d2;
  return {0.5 * (q1 + q2), (q1 - q2).norm()};
}

}  // namespace neos::filter
