#pragma once

#include <array>
#include <memory>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrareg/drr.hpp"

namespace lrareg {

/// Square patches of side 2r+1, given by their centers (column, row).
struct PatchSpec {
  int radius = 6;
  std::vector<std::array<int, 2>> centers;
};

enum class MetricKind { Ncc, Lncc, Mncc, Gc };

MetricKind parse_metric_kind(std::string_view name);
std::string_view to_string(MetricKind kind);

struct SimilarityConfig {
  MetricKind kind = MetricKind::Mncc;
  double mu = 0.5;
  int patch_radius = 6;
  // Variance guard, relative to the squared intensity range of each image,
  // i.e. applied as if the images were min-max normalized.
  double epsilon = 1e-8;

  /// Throws InvalidArgument on out-of-range fields.
  void validate() const;
};

void to_json(nlohmann::json& j, const SimilarityConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, SimilarityConfig& c);

/// Pearson correlation of pixel intensities (population statistics). Returns
/// 0 when either image has (relative) variance below epsilon.
double ncc(const DetectorImage& a, const DetectorImage& b, double epsilon = 1e-8);

/// Mean of per-patch NCC over the patch set. Patches flat in both images are
/// skipped; a patch flat in only one image scores 0.
double lncc(const DetectorImage& a, const DetectorImage& b, const PatchSpec& patches,
            double epsilon = 1e-8);

/// (1 - mu) * ncc + mu * lncc over the regular patch grid of radius cfg.patch_radius.
double mncc(const DetectorImage& a, const DetectorImage& b, const SimilarityConfig& cfg);
/// Same, reusing a precomputed patch grid.
double mncc(const DetectorImage& a, const DetectorImage& b, const SimilarityConfig& cfg,
            const PatchSpec& patches);

/// Mean of the NCCs of the x and y central-difference gradient images.
double gradient_correlation(const DetectorImage& a, const DetectorImage& b,
                            double epsilon = 1e-8);

/// Non-overlapping tiling with stride 2r+1 starting at (r, r); the right and
/// bottom remainder margins are left out.
PatchSpec make_patch_grid(int width, int height, int radius);

/// Dispatches on cfg.kind.
double similarity(const DetectorImage& a, const DetectorImage& b, const SimilarityConfig& cfg);

/// Registration cost f(pose) = 1 - similarity(fixed, project(volume, camera, pose)).
/// Immutable after construction and safe to call from several threads.
class Objective {
 public:
  Objective(std::shared_ptr<const Volume> volume, CameraGeometry camera, DetectorImage fixed,
            SimilarityConfig cfg, RenderOptions render = {});

  double operator()(const Pose6& pose) const;
  double score(const DetectorImage& moving) const;

  const Volume& volume() const { return *volume_; }
  const CameraGeometry& camera() const { return camera_; }
  const DetectorImage& fixed() const { return fixed_; }
  const SimilarityConfig& config() const { return cfg_; }
  const RenderOptions& render_options() const { return render_; }

 private:
  std::shared_ptr<const Volume> volume_;
  CameraGeometry camera_;
  DetectorImage fixed_;
  SimilarityConfig cfg_;
  RenderOptions render_;
  PatchSpec patches_;
};

}  // namespace lrareg
