#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrareg/cmaes.hpp"
#include "lrareg/lra.hpp"

namespace lrareg {

enum class OptimizerKind { LraCma, CmaEs };

OptimizerKind parse_optimizer_kind(std::string_view name);
std::string_view to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::LraCma;
  double sigma0 = 10.0;
  std::optional<int> lambda;  // default 4 + floor(ln d)
  LraHyper lra;
};

/// One line of the per-generation trace.
struct GenerationRecord {
  long generation = 0;
  VecX mean;
  double sigma = 0.0;
  VecX eigenvalues;
  double generation_best = 0.0;
  double best_ever = 0.0;
  double delta_mean = 1.0;
  double delta_Sigma = 1.0;
  double snr_mean = 0.0;
  double snr_Sigma = 0.0;
};

nlohmann::json to_json_line(const GenerationRecord& r);

/// Ask/tell driver over CmaState (+ LraState for OptimizerKind::LraCma).
class Optimizer {
 public:
  Optimizer(const VecX& m0, const OptimizerConfig& cfg, std::uint64_t seed);

  std::vector<Candidate> ask();
  /// Candidates from the last ask() with y filled in.
  GenerationRecord tell(const std::vector<Candidate>& evaluated);

  /// Counts an extra evaluation (e.g. the initial mean) toward best-ever.
  void offer(const VecX& x, double y);

  const CmaState& cma() const { return cma_; }
  const LraState& lra() const { return lra_; }
  const OptimizerConfig& config() const { return cfg_; }
  const VecX& best_x() const { return best_x_; }
  double best_y() const { return best_y_; }

 private:
  OptimizerConfig cfg_;
  CmaState cma_;
  LraState lra_;
  Rng rng_;
  VecX best_x_;
  double best_y_;
};

struct MinimizeResult {
  VecX best_x;
  double best_y = 0.0;
  std::size_t evaluations = 0;
  std::vector<GenerationRecord> trace;
  CmaState final_state;
  LraState final_lra;
};

using ObjectiveFn = std::function<double(const VecX&)>;

/// Runs up to max_generations; stops early once best-ever y <= target.
/// Candidate evaluations within a generation run on up to `threads` workers.
MinimizeResult minimize(const ObjectiveFn& f, const VecX& m0, const OptimizerConfig& cfg,
                        std::uint64_t seed, long max_generations,
                        std::optional<double> target = std::nullopt, std::size_t threads = 1);

}  // namespace lrareg
