#include "lrareg/lra.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "lrareg/errors.hpp"

namespace lrareg {

void LraHyper::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0) || !(gamma > 0.0)) {
    throw InvalidArgument(
        fmt::format("lra: alpha, beta, gamma must be > 0, got {}, {}, {}", alpha, beta, gamma));
  }
  if (!(beta_ema_mean > 0.0 && beta_ema_mean < 1.0) ||
      !(beta_ema_Sigma > 0.0 && beta_ema_Sigma < 1.0)) {
    throw InvalidArgument("lra: EMA factors must lie in (0, 1)");
  }
  if (!(delta_min > 0.0 && delta_min <= 1.0)) {
    throw InvalidArgument("lra: delta_min must lie in (0, 1]");
  }
}

double estimate_snr(SnrEstimator& est, const VecX& normalized_update, double rate) {
  if (!normalized_update.allFinite() || !std::isfinite(rate)) {
    throw NumericalError("estimate_snr: non-finite input");
  }
  if (est.mean_vec.size() != normalized_update.size()) {
    if (est.mean_vec.size() != 0) throw InvalidArgument("estimate_snr: dimension changed");
    est.mean_vec = VecX::Zero(normalized_update.size());
  }
  const double b = est.beta_ema * rate;
  est.mean_vec = (1.0 - b) * est.mean_vec + b * normalized_update;
  est.mean_sq = (1.0 - b) * est.mean_sq + b * normalized_update.squaredNorm();

  const double sq_e = est.mean_vec.squaredNorm();
  const double num = sq_e - (b / (2.0 - b)) * est.mean_sq;
  const double den = est.mean_sq - sq_e;
  if (!(num > 0.0)) return 0.0;
  // With no spread left in the averaged updates the ratio is unbounded.
  if (!(den > 0.0)) return kSnrCap;
  return std::min(num / den, kSnrCap);
}

double adapt_rate(double rate, double snr, double alpha, double beta, double gamma,
                  double delta_min) {
  const double relative = std::clamp(snr / (alpha * rate) - 1.0, -1.0, 1.0);
  const double next = rate * std::exp(std::min(gamma * rate, beta) * relative);
  return std::clamp(next, delta_min, 1.0);
}

double correct_step_size(double sigma_next, double rate_old, double rate_new) {
  if (!(sigma_next > 0.0) || !(rate_old > 0.0) || !(rate_new > 0.0)) {
    throw InvalidArgument(fmt::format(
        "correct_step_size: inputs must be positive, got sigma={} old={} new={}", sigma_next,
        rate_old, rate_new));
  }
  return (rate_old / rate_new) * sigma_next;
}

LraState lra_init(int dim, const LraHyper& hyper) {
  hyper.validate();
  LraState s;
  s.hyper = hyper;
  s.snr_mean.mean_vec = VecX::Zero(dim);
  s.snr_mean.beta_ema = hyper.beta_ema_mean;
  s.snr_Sigma.mean_vec = VecX::Zero(static_cast<Eigen::Index>(dim) * dim);
  s.snr_Sigma.beta_ema = hyper.beta_ema_Sigma;
  return s;
}

VecX normalized_mean_update(const CmaState& state, const UpdateDelta& delta) {
  return state.inv_sqrt_cov() * delta.delta_mean / state.sigma;
}

VecX normalized_Sigma_update(const CmaState& state, const UpdateDelta& delta) {
  const MatX w = state.inv_sqrt_cov() / state.sigma;
  const MatX local = w * delta.delta_Sigma * w;
  // The whitened rank-one building blocks y*y^T - I have squared Frobenius
  // norm 2 per unit weight, hence the 1/sqrt(2).
  return local.reshaped() / std::numbers::sqrt2;
}

std::pair<CmaState, LraState> lra_step(const CmaState& cma, const LraState& lra,
                                       const std::vector<Candidate>& candidates) {
  const UpdateDelta delta = compute_update(cma, candidates);
  LraState next_lra = lra;
  const LraHyper& h = lra.hyper;

  if (h.adapt) {
    next_lra.last_snr_mean =
        estimate_snr(next_lra.snr_mean, normalized_mean_update(cma, delta), lra.delta_mean);
    next_lra.last_snr_Sigma =
        estimate_snr(next_lra.snr_Sigma, normalized_Sigma_update(cma, delta), lra.delta_Sigma);
    next_lra.delta_mean =
        adapt_rate(lra.delta_mean, next_lra.last_snr_mean, h.alpha, h.beta, h.gamma, h.delta_min);
    next_lra.delta_Sigma = adapt_rate(lra.delta_Sigma, next_lra.last_snr_Sigma, h.alpha, h.beta,
                                      h.gamma, h.delta_min);
  }

  CmaState next = apply_update(cma, delta, next_lra.delta_mean, next_lra.delta_Sigma);
  if (h.step_size_correction && next_lra.delta_mean != lra.delta_mean) {
    next.sigma = correct_step_size(next.sigma, lra.delta_mean, next_lra.delta_mean);
  }
  return {std::move(next), std::move(next_lra)};
}

}  // namespace lrareg
