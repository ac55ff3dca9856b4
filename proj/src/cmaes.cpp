#include "lrareg/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <Eigen/Eigenvalues>

#include "lrareg/errors.hpp"

namespace lrareg {

int default_population(int dim) {
  return 4 + static_cast<int>(std::floor(std::log(static_cast<double>(dim))));
}

int conventional_population(int dim) {
  return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dim))));
}

StrategyParams default_strategy(int dim, int lambda) {
  StrategyParams p;
  const double n = dim;
  p.lambda = lambda;
  p.mu = lambda / 2;
  p.weights.resize(p.mu);
  for (int i = 0; i < p.mu; ++i) {
    p.weights[i] = std::log((lambda + 1) / 2.0) - std::log(i + 1.0);
  }
  p.weights /= p.weights.sum();
  p.mu_eff = 1.0 / p.weights.squaredNorm();

  p.c_sigma = (p.mu_eff + 2.0) / (n + p.mu_eff + 5.0);
  p.d_sigma =
      1.0 + 2.0 * std::max(0.0, std::sqrt((p.mu_eff - 1.0) / (n + 1.0)) - 1.0) + p.c_sigma;
  p.c_c = (4.0 + p.mu_eff / n) / (n + 4.0 + 2.0 * p.mu_eff / n);
  p.c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + p.mu_eff);
  p.c_mu = std::min(1.0 - p.c_1,
                    2.0 * (p.mu_eff - 2.0 + 1.0 / p.mu_eff) / ((n + 2.0) * (n + 2.0) + p.mu_eff));
  p.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
  return p;
}

MatX CmaState::sqrt_factor() const { return basis * axis.asDiagonal(); }

MatX CmaState::inv_sqrt_cov() const {
  return basis * axis.cwiseInverse().asDiagonal() * basis.transpose();
}

namespace {

// Symmetrizes cov, refreshes the eigen cache and lifts eigenvalues below
// 1e-12 * trace / d.
void refresh_eigen(CmaState& s) {
  s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatX> solver(s.cov);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("cma: eigendecomposition of the covariance failed");
  }
  VecX eig = solver.eigenvalues();
  const double floor = 1e-12 * s.cov.trace() / s.dim;
  if (!eig.allFinite() || !std::isfinite(floor)) {
    throw NumericalError("cma: covariance has non-finite entries");
  }
  if (eig.minCoeff() < floor) {
    eig = eig.cwiseMax(floor);
    s.cov = solver.eigenvectors() * eig.asDiagonal() * solver.eigenvectors().transpose();
    s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();
    s.eigen_floor_triggered = true;
  }
  s.basis = solver.eigenvectors();
  s.axis = eig.cwiseSqrt();
}

}  // namespace

CmaState cma_init(const VecX& m0, double sigma0, std::optional<int> lambda) {
  if (m0.size() < 1) throw InvalidArgument("cma_init: dimension must be >= 1");
  if (!m0.allFinite()) throw InvalidArgument("cma_init: non-finite initial mean");
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) {
    throw InvalidArgument(fmt::format("cma_init: sigma0 must be > 0, got {}", sigma0));
  }
  const int dim = static_cast<int>(m0.size());
  const int lam = lambda.value_or(default_population(dim));
  if (lam < 2) throw InvalidArgument(fmt::format("cma_init: lambda must be >= 2, got {}", lam));

  CmaState s;
  s.dim = dim;
  s.mean = m0;
  s.sigma = sigma0;
  s.cov = MatX::Identity(dim, dim);
  s.p_sigma = VecX::Zero(dim);
  s.p_c = VecX::Zero(dim);
  s.generation = 0;
  s.params = default_strategy(dim, lam);
  s.basis = MatX::Identity(dim, dim);
  s.axis = VecX::Ones(dim);
  return s;
}

std::vector<Candidate> sample(const CmaState& state, Rng& rng) {
  if (!(state.axis.minCoeff() > 0.0) || !state.axis.allFinite() || !(state.sigma > 0.0)) {
    throw NumericalError("cma: covariance is not positive definite");
  }
  const MatX a = state.sqrt_factor();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Candidate> out(static_cast<std::size_t>(state.lambda()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    Candidate& c = out[i];
    c.z.resize(state.dim);
    for (int k = 0; k < state.dim; ++k) c.z[k] = normal(rng);
    c.x = state.mean + state.sigma * (a * c.z);
    c.index = i;
  }
  return out;
}

UpdateDelta compute_update(const CmaState& state, const std::vector<Candidate>& candidates) {
  const StrategyParams& p = state.params;
  if (static_cast<int>(candidates.size()) != p.lambda) {
    throw InvalidArgument(fmt::format("compute_update: expected {} candidates, got {}", p.lambda,
                                      candidates.size()));
  }
  for (const auto& c : candidates) {
    if (!std::isfinite(c.y)) throw NumericalError("compute_update: non-finite objective value");
    if (c.x.size() != state.dim) throw InvalidArgument("compute_update: candidate dimension");
  }

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ca = candidates[a];
    const auto& cb = candidates[b];
    return ca.y < cb.y || (ca.y == cb.y && ca.index < cb.index);
  });

  const int n = state.dim;
  // Steps in sigma units, best first.
  MatX steps(n, p.mu);
  for (int i = 0; i < p.mu; ++i) {
    steps.col(i) = (candidates[order[i]].x - state.mean) / state.sigma;
  }
  const VecX y_w = steps * p.weights;

  UpdateDelta d;
  d.delta_mean = state.sigma * y_w;

  d.p_sigma_next = (1.0 - p.c_sigma) * state.p_sigma +
                   std::sqrt(p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff) * (state.inv_sqrt_cov() * y_w);
  const double norm_ps = d.p_sigma_next.norm();
  d.sigma_factor = std::exp((p.c_sigma / p.d_sigma) * (norm_ps / p.chi_n - 1.0));

  const double ps_correction =
      std::sqrt(1.0 - std::pow(1.0 - p.c_sigma, 2.0 * static_cast<double>(state.generation + 1)));
  const double h_sigma =
      norm_ps / ps_correction < (1.4 + 2.0 / (n + 1.0)) * p.chi_n ? 1.0 : 0.0;

  d.p_c_next = (1.0 - p.c_c) * state.p_c +
               h_sigma * std::sqrt(p.c_c * (2.0 - p.c_c) * p.mu_eff) * y_w;

  const double delta_h = (1.0 - h_sigma) * p.c_c * (2.0 - p.c_c);
  const MatX rank_one = d.p_c_next * d.p_c_next.transpose();
  const MatX rank_mu = steps * p.weights.asDiagonal() * steps.transpose();
  d.cov_next = (1.0 + p.c_1 * delta_h - p.c_1 - p.c_mu * p.weights.sum()) * state.cov +
               p.c_1 * rank_one + p.c_mu * rank_mu;
  d.cov_next = 0.5 * (d.cov_next + d.cov_next.transpose()).eval();

  const double sigma_next = state.sigma * d.sigma_factor;
  d.delta_Sigma = sigma_next * sigma_next * d.cov_next - state.sigma * state.sigma * state.cov;
  d.delta_Sigma = 0.5 * (d.delta_Sigma + d.delta_Sigma.transpose()).eval();
  return d;
}

CmaState apply_update(const CmaState& state, const UpdateDelta& delta, double rate_mean,
                      double rate_Sigma) {
  if (!(rate_mean > 0.0 && rate_mean <= 1.0) || !(rate_Sigma > 0.0 && rate_Sigma <= 1.0)) {
    throw InvalidArgument(fmt::format("apply_update: rates must lie in (0, 1], got {} and {}",
                                      rate_mean, rate_Sigma));
  }
  CmaState next = state;
  next.mean = state.mean + rate_mean * delta.delta_mean;
  next.p_sigma = delta.p_sigma_next;
  next.p_c = delta.p_c_next;

  if (rate_Sigma == 1.0) {
    next.sigma = state.sigma * delta.sigma_factor;
    next.cov = delta.cov_next;
  } else {
    // Sigma_next = Sigma + rate * delta_Sigma, split so that sigma moves
    // geometrically by the same fraction of the classic step-size change.
    const MatX Sigma = state.sigma * state.sigma * state.cov + rate_Sigma * delta.delta_Sigma;
    next.sigma = state.sigma * std::pow(delta.sigma_factor, rate_Sigma);
    next.cov = Sigma / (next.sigma * next.sigma);
  }
  if (!(next.sigma > 0.0) || !std::isfinite(next.sigma) || !next.mean.allFinite()) {
    throw NumericalError("apply_update: step size or mean became non-finite");
  }
  next.generation = state.generation + 1;
  refresh_eigen(next);
  return next;
}

}  // namespace lrareg
