#include "lrareg/optimizer.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <Eigen/Eigenvalues>

#include "lrareg/errors.hpp"
#include "lrareg/parallel.hpp"

namespace lrareg {

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "lra-cma") return OptimizerKind::LraCma;
  if (name == "cma-es") return OptimizerKind::CmaEs;
  throw InvalidArgument(fmt::format("unknown optimizer '{}' (lra-cma, cma-es)", name));
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::LraCma ? "lra-cma" : "cma-es";
}

nlohmann::json to_json_line(const GenerationRecord& r) {
  auto vec = [](const VecX& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return nlohmann::json{{"t", r.generation},
                        {"m", vec(r.mean)},
                        {"sigma", r.sigma},
                        {"eigenvalues", vec(r.eigenvalues)},
                        {"generation_best", r.generation_best},
                        {"best_y", r.best_ever},
                        {"delta_m", r.delta_mean},
                        {"delta_Sigma", r.delta_Sigma},
                        {"snr_m", r.snr_mean},
                        {"snr_Sigma", r.snr_Sigma}};
}

Optimizer::Optimizer(const VecX& m0, const OptimizerConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      cma_(cma_init(m0, cfg.sigma0, cfg.lambda)),
      lra_(lra_init(static_cast<int>(m0.size()), cfg.lra)),
      rng_(seed),
      best_x_(m0),
      best_y_(std::numeric_limits<double>::infinity()) {}

std::vector<Candidate> Optimizer::ask() { return sample(cma_, rng_); }

void Optimizer::offer(const VecX& x, double y) {
  if (!std::isfinite(y)) throw NumericalError("optimizer: non-finite objective value");
  if (y < best_y_) {
    best_y_ = y;
    best_x_ = x;
  }
}

GenerationRecord Optimizer::tell(const std::vector<Candidate>& evaluated) {
  GenerationRecord rec;
  rec.generation = cma_.generation;
  rec.generation_best = std::numeric_limits<double>::infinity();
  // Scan in index order so ties resolve to the lowest index.
  for (const auto& c : evaluated) {
    if (!std::isfinite(c.y)) throw NumericalError("optimizer: non-finite objective value");
    rec.generation_best = std::min(rec.generation_best, c.y);
    offer(c.x, c.y);
  }

  if (cfg_.kind == OptimizerKind::CmaEs) {
    cma_ = apply_update(cma_, compute_update(cma_, evaluated), 1.0, 1.0);
  } else {
    auto [c, l] = lra_step(cma_, lra_, evaluated);
    cma_ = std::move(c);
    lra_ = std::move(l);
  }

  rec.mean = cma_.mean;
  rec.sigma = cma_.sigma;
  rec.eigenvalues = cma_.axis.cwiseAbs2();
  rec.best_ever = best_y_;
  rec.delta_mean = lra_.delta_mean;
  rec.delta_Sigma = lra_.delta_Sigma;
  rec.snr_mean = lra_.last_snr_mean;
  rec.snr_Sigma = lra_.last_snr_Sigma;
  return rec;
}

MinimizeResult minimize(const ObjectiveFn& f, const VecX& m0, const OptimizerConfig& cfg,
                        std::uint64_t seed, long max_generations, std::optional<double> target,
                        std::size_t threads) {
  Optimizer opt(m0, cfg, seed);
  MinimizeResult result;
  for (long g = 0; g < max_generations; ++g) {
    auto cands = opt.ask();
    parallel_for(cands.size(), threads, [&](std::size_t i) { cands[i].y = f(cands[i].x); });
    result.evaluations += cands.size();
    result.trace.push_back(opt.tell(cands));
    if (target && opt.best_y() <= *target) break;
  }
  result.best_x = opt.best_x();
  result.best_y = opt.best_y();
  result.final_state = opt.cma();
  result.final_lra = opt.lra();
  return result;
}

}  // namespace lrareg
