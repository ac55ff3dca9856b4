#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrareg/optimizer.hpp"
#include "lrareg/similarity.hpp"

namespace lrareg {

struct RegistrationConfig {
  SimilarityConfig similarity;
  OptimizerKind optimizer = OptimizerKind::LraCma;
  double sigma0 = 10.0;
  int generations = 50;
  std::optional<int> lambda;  // default 4 + floor(ln 6) = 5
  std::uint64_t seed = 0;
  double step_mm = 1.0;
  std::size_t threads = 1;
  LraHyper lra;

  void validate() const;
  int population() const;
};

void to_json(nlohmann::json& j, const RegistrationConfig& c);
/// Missing keys keep defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, RegistrationConfig& c);

struct RegistrationResult {
  Pose6 pose;
  double cost = 0.0;
  std::vector<GenerationRecord> trace;
  double seconds = 0.0;
  /// lambda * generations; the injected evaluation of the start pose is
  /// counted separately.
  std::size_t evaluations = 0;
  std::size_t injected_evaluations = 0;
  int generations = 0;

  std::size_t total_evaluations() const { return evaluations + injected_evaluations; }
};

/// Result without the trace; `include_timing = false` drops wall-clock fields.
nlohmann::json to_json(const RegistrationResult& r, bool include_timing = true);

/// Minimizes the objective over 6-DoF poses starting from `initial`. The
/// start pose is evaluated first, and the best pose ever evaluated is
/// returned. Throws NumericalError on a non-finite cost.
RegistrationResult register_pose(const Objective& objective, const Pose6& initial,
                                 const RegistrationConfig& cfg);

RegistrationResult register_pose(std::shared_ptr<const Volume> volume,
                                 const CameraGeometry& camera, const DetectorImage& fixed,
                                 const Pose6& initial, const RegistrationConfig& cfg);

/// Rotations ~ N(0, 10 deg), translations ~ N(0, 15 mm), independent.
/// With truncation, each component is redrawn until |rot| <= max_rot_deg and
/// |trans| <= max_trans_mm.
struct OffsetTruncation {
  double max_rot_deg;
  double max_trans_mm;
};
Pose6 sample_initial_offset(Rng& rng, std::optional<OffsetTruncation> truncation = std::nullopt);

/// Rotations ~ U(-20, 20) deg, in-plane translations ~ U(-30, 30) mm and
/// depth ~ U(-50, 50) mm.
Pose6 sample_test_pose(Rng& rng);

}  // namespace lrareg
