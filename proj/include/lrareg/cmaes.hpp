#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace lrareg {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Population size 4 + floor(ln d).
int default_population(int dim);
/// The more common 4 + floor(3 ln d).
int conventional_population(int dim);

/// Strategy constants of classic CMA-ES with positive log-rank weights over
/// the best floor(lambda/2) candidates (Hansen's defaults).
struct StrategyParams {
  int lambda = 0;
  int mu = 0;
  VecX weights;
  double mu_eff = 0.0;
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_c = 0.0;
  double c_1 = 0.0;
  double c_mu = 0.0;
  double chi_n = 0.0;  // E||N(0, I)||
};

StrategyParams default_strategy(int dim, int lambda);

/// Search distribution N(mean, sigma^2 * cov) with evolution paths.
struct CmaState {
  int dim = 0;
  VecX mean;
  double sigma = 1.0;
  MatX cov;
  VecX p_sigma;
  VecX p_c;
  long generation = 0;
  StrategyParams params;

  // cov = basis * diag(axis^2) * basis^T, refreshed whenever cov changes.
  MatX basis;
  VecX axis;
  // Set when an update produced an eigenvalue below the floor and it was lifted.
  bool eigen_floor_triggered = false;

  int lambda() const { return params.lambda; }
  /// basis * diag(axis); A * A^T = cov.
  MatX sqrt_factor() const;
  /// Symmetric cov^{-1/2}.
  MatX inv_sqrt_cov() const;
};

struct Candidate {
  VecX x;
  double y = 0.0;
  VecX z;  // x = mean + sigma * sqrt_factor() * z
  std::size_t index = 0;
};

/// One classic CMA-ES update, split into the additive increments on the mean
/// and on Sigma = sigma^2 * cov, together with the classic (sigma, cov) pair
/// it came from.
struct UpdateDelta {
  VecX delta_mean;
  MatX delta_Sigma;
  double sigma_factor = 1.0;
  MatX cov_next;
  VecX p_sigma_next;
  VecX p_c_next;
};

/// Throws InvalidArgument if sigma0 <= 0, m0 is empty or lambda < 2.
CmaState cma_init(const VecX& m0, double sigma0, std::optional<int> lambda = std::nullopt);

/// Draws lambda candidates with y left at 0. Throws NumericalError when the
/// covariance factor is degenerate.
std::vector<Candidate> sample(const CmaState& state, Rng& rng);

/// Ranks candidates by (y, index) and forms the classic update. Pure.
UpdateDelta compute_update(const CmaState& state, const std::vector<Candidate>& candidates);

/// m += rate_mean * delta_mean; Sigma += rate_Sigma * delta_Sigma. With both
/// rates equal to 1 the result is exactly the classic CMA-ES step. Rates must
/// lie in (0, 1].
CmaState apply_update(const CmaState& state, const UpdateDelta& delta, double rate_mean,
                      double rate_Sigma);

}  // namespace lrareg
