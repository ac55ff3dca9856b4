#include <algorithm>
#include <cmath>
#include <numeric>

#include <doctest.h>
#include <Eigen/Eigenvalues>

#include "lrareg/cmaes.hpp"
#include "lrareg/errors.hpp"
#include "lrareg/optimizer.hpp"

using namespace lrareg;

namespace {

double sphere(const VecX& x) { return x.squaredNorm(); }

void evaluate(std::vector<Candidate>& cands, double (*f)(const VecX&)) {
  for (auto& c : cands) c.y = f(c.x);
}

// Textbook (mu/mu_w, lambda) CMA-ES generation written out from scratch.
struct Reference {
  VecX mean;
  double sigma;
  MatX cov;
  VecX ps;
  VecX pc;
};

Reference reference_step(const CmaState& s, std::vector<Candidate> cands) {
  const int n = s.dim;
  const int lambda = static_cast<int>(cands.size());
  const int mu = lambda / 2;
  std::vector<double> w(mu);
  for (int i = 0; i < mu; ++i) w[i] = std::log((lambda + 1) / 2.0) - std::log(i + 1.0);
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  double w2 = 0.0;
  for (double& x : w) {
    x /= wsum;
    w2 += x * x;
  }
  const double mueff = 1.0 / w2;
  const double cs = (mueff + 2) / (n + mueff + 5);
  const double ds = 1 + 2 * std::max(0.0, std::sqrt((mueff - 1) / (n + 1)) - 1) + cs;
  const double cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n);
  const double c1 = 2 / ((n + 1.3) * (n + 1.3) + mueff);
  const double cmu = std::min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) * (n + 2) + mueff));
  const double chin = std::sqrt(n) * (1 - 1.0 / (4 * n) + 1.0 / (21.0 * n * n));

  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return a.y < b.y || (a.y == b.y && a.index < b.index);
  });
  std::vector<VecX> y(mu);
  VecX yw = VecX::Zero(n);
  for (int i = 0; i < mu; ++i) {
    y[i] = (cands[i].x - s.mean) / s.sigma;
    yw += w[i] * y[i];
  }
  Eigen::SelfAdjointEigenSolver<MatX> es(s.cov);
  const MatX cinv_half =
      es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
      es.eigenvectors().transpose();

  Reference r;
  r.mean = s.mean + s.sigma * yw;
  r.ps = (1 - cs) * s.p_sigma + std::sqrt(cs * (2 - cs) * mueff) * cinv_half * yw;
  r.sigma = s.sigma * std::exp(cs / ds * (r.ps.norm() / chin - 1));
  const bool hs = r.ps.norm() / std::sqrt(1 - std::pow(1 - cs, 2.0 * (s.generation + 1))) <
                  (1.4 + 2.0 / (n + 1)) * chin;
  r.pc = (1 - cc) * s.p_c + (hs ? std::sqrt(cc * (2 - cc) * mueff) : 0.0) * yw;
  MatX rank_mu = MatX::Zero(n, n);
  for (int i = 0; i < mu; ++i) rank_mu += w[i] * y[i] * y[i].transpose();
  const double dh = hs ? 0.0 : cc * (2 - cc);
  r.cov = (1 - c1 - cmu + c1 * dh) * s.cov + c1 * r.pc * r.pc.transpose() + cmu * rank_mu;
  return r;
}

}  // namespace

TEST_CASE("population sizes") {
  CHECK(default_population(6) == 5);
  CHECK(conventional_population(6) == 9);
  CHECK(default_population(1) == 4);
}

TEST_CASE("strategy constants") {
  const StrategyParams p = default_strategy(6, 5);
  CHECK(p.mu == 2);
  CHECK(p.weights.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.weights[0] > p.weights[1]);
  CHECK(p.weights.minCoeff() > 0.0);
  CHECK(p.mu_eff == doctest::Approx(1.0 / p.weights.squaredNorm()));
  CHECK(p.c_1 + p.c_mu <= 1.0);
}

TEST_CASE("cma_init validation") {
  CHECK_THROWS_AS(cma_init(VecX(), 1.0), InvalidArgument);
  CHECK_THROWS_AS(cma_init(VecX::Zero(3), 0.0), InvalidArgument);
  CHECK_THROWS_AS(cma_init(VecX::Zero(3), 1.0, 1), InvalidArgument);
  const CmaState s = cma_init(VecX::Constant(6, 2.0), 3.0);
  CHECK(s.lambda() == 5);
  CHECK(s.cov.isIdentity());
  CHECK(s.generation == 0);
}

TEST_CASE("sampling law") {
  CmaState s = cma_init(VecX::Zero(6), 1.0, 10);
  Rng rng(1);
  auto mean_dist = [&](double sigma) {
    s.sigma = sigma;
    double total = 0.0;
    int count = 0;
    for (int n = 0; n < 1000; ++n)
      for (const auto& c : sample(s, rng)) {
        total += (c.x - s.mean).norm();
        ++count;
      }
    return total / count;
  };
  const double r1 = mean_dist(1.0);
  const double r10 = mean_dist(10.0);
  CHECK(r10 / r1 == doctest::Approx(10.0).epsilon(0.05));

  SUBCASE("empirical covariance matches sigma^2 C") {
    CmaState t = cma_init(VecX::Zero(2), 2.0, 10);
    t.cov << 4.0, 1.2, 1.2, 1.0;
    Eigen::SelfAdjointEigenSolver<MatX> es(t.cov);
    t.basis = es.eigenvectors();
    t.axis = es.eigenvalues().cwiseSqrt();
    MatX acc = MatX::Zero(2, 2);
    const int draws = 2000;
    for (int n = 0; n < draws; ++n)
      for (const auto& c : sample(t, rng)) {
        acc += c.x * c.x.transpose();
        CHECK((c.x - 2.0 * t.sqrt_factor() * c.z).norm() < 1e-12);
      }
    acc /= draws * 10.0;
    const MatX expected = 4.0 * t.cov;
    CHECK((acc - expected).cwiseAbs().maxCoeff() < 0.05 * expected.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("compute_update is pure and matches a textbook step") {
  CmaState s = cma_init(VecX::Constant(6, 1.5), 0.7, 9);
  Rng rng(3);
  // take a few generations so the paths and covariance are non-trivial
  for (int g = 0; g < 8; ++g) {
    auto cands = sample(s, rng);
    evaluate(cands, sphere);
    const CmaState before = s;
    const UpdateDelta d = compute_update(s, cands);
    const UpdateDelta again = compute_update(s, cands);
    CHECK(d.delta_mean == again.delta_mean);
    CHECK(d.delta_Sigma == again.delta_Sigma);
    CHECK(s.mean == before.mean);

    const Reference r = reference_step(s, cands);
    const CmaState next = apply_update(s, d, 1.0, 1.0);
    CHECK((next.mean - r.mean).norm() < 1e-12);
    CHECK(next.sigma == doctest::Approx(r.sigma).epsilon(1e-12));
    CHECK((next.cov - r.cov).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((next.p_sigma - r.ps).norm() < 1e-12);
    CHECK((next.p_c - r.pc).norm() < 1e-12);
    s = next;
  }
}

TEST_CASE("ranking ties break by sample index") {
  CmaState s = cma_init(VecX::Zero(2), 1.0, 4);
  Rng rng(4);
  auto cands = sample(s, rng);
  for (auto& c : cands) c.y = 1.0;
  const UpdateDelta d = compute_update(s, cands);
  // equal values: the first mu samples in index order are selected
  const VecX expected = s.params.weights[0] * cands[0].x + s.params.weights[1] * cands[1].x;
  CHECK((d.delta_mean - expected).norm() < 1e-15);
  std::reverse(cands.begin(), cands.end());
  CHECK(compute_update(s, cands).delta_mean == d.delta_mean);
}

TEST_CASE("apply_update scales the classic increments") {
  CmaState s = cma_init(VecX::Constant(4, 3.0), 1.3, 8);
  Rng rng(5);
  auto cands = sample(s, rng);
  evaluate(cands, sphere);
  const UpdateDelta d = compute_update(s, cands);
  const CmaState classic = apply_update(s, d, 1.0, 1.0);

  SUBCASE("rate 1 is the classic state bit for bit") {
    CHECK(classic.mean == VecX(s.mean + d.delta_mean));
    CHECK(classic.sigma == s.sigma * d.sigma_factor);
    CHECK(classic.generation == 1);
  }
  SUBCASE("half mean rate lands on the midpoint") {
    const CmaState half = apply_update(s, d, 0.5, 1.0);
    CHECK((half.mean - 0.5 * (s.mean + classic.mean)).norm() < 1e-12);
  }
  SUBCASE("Sigma moves by the requested fraction") {
    const double rate = 0.3;
    const CmaState part = apply_update(s, d, 1.0, rate);
    const MatX sigma_cov = part.sigma * part.sigma * part.cov;
    const MatX expected = s.sigma * s.sigma * s.cov + rate * d.delta_Sigma;
    CHECK((sigma_cov - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("vanishing rates leave the distribution in place") {
    const CmaState tiny = apply_update(s, d, 1e-12, 1e-12);
    CHECK((tiny.mean - s.mean).norm() < 1e-10);
    CHECK(tiny.sigma == doctest::Approx(s.sigma).epsilon(1e-10));
    CHECK((tiny.cov - s.cov).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK_THROWS_AS(apply_update(s, d, 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(apply_update(s, d, 1.0, 1.5), InvalidArgument);
}

TEST_CASE("compute_update rejects bad input") {
  CmaState s = cma_init(VecX::Zero(3), 1.0, 6);
  Rng rng(6);
  auto cands = sample(s, rng);
  evaluate(cands, sphere);
  cands[2].y = std::nan("");
  CHECK_THROWS_AS(compute_update(s, cands), NumericalError);
  cands.pop_back();
  CHECK_THROWS_AS(compute_update(s, cands), InvalidArgument);
}

TEST_CASE("classic CMA-ES solves the sphere without touching the eigenvalue floor") {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::CmaEs;
  cfg.sigma0 = 1.0;
  cfg.lambda = 9;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MinimizeResult r = minimize(sphere, VecX::Constant(6, 5.0), cfg, seed, 400, 1e-10);
    CHECK(r.best_y < 1e-10);
    CHECK(r.evaluations <= 2000);
    CHECK_FALSE(r.final_state.eigen_floor_triggered);
  }
}

TEST_CASE("rank-based selection ignores monotone transforms of the objective") {
  auto shifted = [](const VecX& x) { return x.squaredNorm() + 123.0; };
  auto monotone = [](const VecX& x) { return std::exp(std::sqrt(x.squaredNorm())); };
  for (OptimizerKind kind : {OptimizerKind::CmaEs, OptimizerKind::LraCma}) {
    OptimizerConfig cfg;
    cfg.kind = kind;
    cfg.sigma0 = 0.5;
    const VecX m0 = VecX::LinSpaced(6, -2.0, 3.0);
    const MinimizeResult a = minimize(sphere, m0, cfg, 77, 60);
    const MinimizeResult b = minimize(shifted, m0, cfg, 77, 60);
    const MinimizeResult c = minimize(monotone, m0, cfg, 77, 60);
    REQUIRE(a.trace.size() == b.trace.size());
    REQUIRE(a.trace.size() == c.trace.size());
    for (std::size_t g = 0; g < a.trace.size(); ++g) {
      CHECK(a.trace[g].mean == b.trace[g].mean);
      CHECK(a.trace[g].mean == c.trace[g].mean);
      CHECK(a.trace[g].sigma == c.trace[g].sigma);
    }
  }
}
