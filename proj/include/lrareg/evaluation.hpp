#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrareg/registration.hpp"

namespace lrareg {

struct LandmarkSet {
  std::vector<Vec3> points;  // volume coordinates, mm
};

/// Mean distance between landmarks mapped by the two poses.
double mtre(const Pose6& a, const Pose6& b, const LandmarkSet& landmarks);

struct PoseError {
  double rotation_deg = 0.0;  // geodesic angle between the rotations
  double translation_mm = 0.0;
};

PoseError pose_error(const Pose6& a, const Pose6& b);

/// 3x3x3 grid spanning the central half of the volume extent.
LandmarkSet default_landmarks(const Volume& volume);

/// |normalize(a) - normalize(b)|.
DetectorImage difference_map(const DetectorImage& a, const DetectorImage& b);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population
  double median = 0.0;
};

Summary summarize(std::vector<double> values);

struct CaseRecord {
  std::size_t case_id = 0;
  Pose6 ground_truth;
  Pose6 initial;
  Pose6 estimate;
  double initial_mtre = 0.0;
  double final_mtre = 0.0;
  PoseError initial_error;
  PoseError final_error;
  double final_cost = 0.0;
  double seconds = 0.0;
  std::size_t evaluations = 0;
  bool failed = false;
  std::string failure;
};

struct Aggregates {
  Summary mtre;
  Summary rotation_deg;
  Summary translation_mm;
  Summary seconds;
  double mean_evaluations = 0.0;
};

struct MethodReport {
  std::string name;
  RegistrationConfig config;
  std::vector<CaseRecord> cases;
  Aggregates final;

  /// Recomputes `final` from the case records.
  void aggregate();
};

/// Scene and protocol shared by every method of a benchmark run.
struct BenchmarkConfig {
  PhantomKind phantom = PhantomKind::Spine;
  Dims3 dims{64, 64, 64};
  double volume_spacing_mm = 3.0;
  CameraGeometry camera{64, 64, 3.192, 1012.0, 506.0};
  std::size_t cases = 10;
  std::uint64_t seed = 0;
  std::optional<OffsetTruncation> offset_truncation;
  std::size_t threads = 1;
  std::optional<std::filesystem::path> diff_map_dir;

  void validate() const;
};

struct MethodSpec {
  std::string name;
  RegistrationConfig config;
};

struct BenchmarkReport {
  BenchmarkConfig config;
  Aggregates initial;  // metrics of the start poses, no optimization
  std::vector<MethodReport> methods;

  /// Recomputes every aggregate from the case records.
  void aggregate();
};

/// Samples per-case ground truth and start poses from (seed, case index),
/// renders the fixed image and runs each method on identical cases. A case
/// that throws is kept with its start-pose metrics and flagged.
BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, const std::vector<MethodSpec>& methods);

/// Volume the benchmark renders from.
Volume benchmark_volume(const BenchmarkConfig& cfg);

nlohmann::json to_json(const BenchmarkReport& report, bool include_timing = true);
void to_json(nlohmann::json& j, const BenchmarkConfig& c);
void from_json(const nlohmann::json& j, BenchmarkConfig& c);

/// Aligned text table: Method | mTRE mean(std) | median | Rot.(deg) | Trans.(mm) | time(s).
std::string format_table(const BenchmarkReport& report);

}  // namespace lrareg
