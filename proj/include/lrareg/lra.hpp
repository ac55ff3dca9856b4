#pragma once

#include <utility>
#include <vector>

#include "lrareg/cmaes.hpp"

namespace lrareg {

/// Hyperparameters of the learning-rate adaptation.
struct LraHyper {
  double alpha = 1.4;   // target SNR per unit learning rate
  double beta = 0.4;    // cap on the per-step log change of a rate
  double gamma = 0.1;   // rate-proportional log-step factor
  double beta_ema_mean = 0.1;
  double beta_ema_Sigma = 0.03;
  double delta_min = 1e-8;
  bool step_size_correction = true;
  /// When false the rates stay at their current values (classic CMA-ES at 1).
  bool adapt = true;

  void validate() const;
};

/// Exponential moving averages of a normalized update vector and of its
/// squared norm.
struct SnrEstimator {
  VecX mean_vec;  // E
  double mean_sq = 0.0;  // V
  double beta_ema = 0.1;
};

/// Returned when the averaged updates show no measurable noise.
inline constexpr double kSnrCap = 1e12;

/// Feeds one normalized update into the estimator (EMA factor beta_ema * rate)
/// and returns the bias-corrected SNR estimate, floored at 0.
double estimate_snr(SnrEstimator& est, const VecX& normalized_update, double rate);

/// One step of the multiplicative rate update:
///   rate * exp(min(gamma * rate, beta) * clip(snr / (alpha * rate) - 1, -1, 1)),
/// clamped to [delta_min, 1].
double adapt_rate(double rate, double snr, double alpha, double beta, double gamma,
                  double delta_min = 1e-8);

/// sigma * rate_old / rate_new, keeping sigma^2 scaled with the mean rate.
double correct_step_size(double sigma_next, double rate_old, double rate_new);

struct LraState {
  double delta_mean = 1.0;
  double delta_Sigma = 1.0;
  SnrEstimator snr_mean;
  SnrEstimator snr_Sigma;
  double last_snr_mean = 0.0;
  double last_snr_Sigma = 0.0;
  LraHyper hyper;
};

LraState lra_init(int dim, const LraHyper& hyper = {});

/// Whitened, scale-free forms of an update, relative to the distribution the
/// update was computed from.
VecX normalized_mean_update(const CmaState& state, const UpdateDelta& delta);
VecX normalized_Sigma_update(const CmaState& state, const UpdateDelta& delta);

/// Classic update, SNR estimation, rate adaptation, scaled update and step-size
/// correction. Pure.
std::pair<CmaState, LraState> lra_step(const CmaState& cma, const LraState& lra,
                                       const std::vector<Candidate>& candidates);

}  // namespace lrareg
