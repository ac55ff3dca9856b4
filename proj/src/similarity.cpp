#include "lrareg/similarity.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "lrareg/errors.hpp"

namespace lrareg {

MetricKind parse_metric_kind(std::string_view name) {
  if (name == "ncc") return MetricKind::Ncc;
  if (name == "lncc") return MetricKind::Lncc;
  if (name == "mncc") return MetricKind::Mncc;
  if (name == "gc") return MetricKind::Gc;
  throw InvalidArgument(fmt::format("unknown metric '{}' (ncc, lncc, mncc, gc)", name));
}

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::Ncc:
      return "ncc";
    case MetricKind::Lncc:
      return "lncc";
    case MetricKind::Mncc:
      return "mncc";
    case MetricKind::Gc:
      return "gc";
  }
  return "?";
}

void SimilarityConfig::validate() const {
  if (kind == MetricKind::Mncc && !(mu > 0.0 && mu < 1.0)) {
    throw InvalidArgument(fmt::format("similarity: mu must lie in (0, 1), got {}", mu));
  }
  if (patch_radius < 1) {
    throw InvalidArgument(fmt::format("similarity: patch_radius must be >= 1, got {}",
                                      patch_radius));
  }
  if (!(epsilon > 0.0)) {
    throw InvalidArgument(fmt::format("similarity: epsilon must be > 0, got {}", epsilon));
  }
}

void to_json(nlohmann::json& j, const SimilarityConfig& c) {
  j = nlohmann::json{{"metric", std::string(to_string(c.kind))},
                     {"mu", c.mu},
                     {"patch_radius", c.patch_radius},
                     {"epsilon", c.epsilon}};
}

void from_json(const nlohmann::json& j, SimilarityConfig& c) {
  if (!j.is_object()) throw InvalidArgument("similarity: expected a JSON object");
  SimilarityConfig out;
  for (const auto& [key, value] : j.items()) {
    if (key == "metric") {
      out.kind = parse_metric_kind(value.get<std::string>());
    } else if (key == "mu") {
      out.mu = value.get<double>();
    } else if (key == "patch_radius") {
      out.patch_radius = value.get<int>();
    } else if (key == "epsilon") {
      out.epsilon = value.get<double>();
    } else {
      throw InvalidArgument(fmt::format("similarity: unknown key '{}'", key));
    }
  }
  out.validate();
  c = out;
}

namespace {

void check_same_dims(const DetectorImage& a, const DetectorImage& b, const char* what) {
  if (a.width != b.width || a.height != b.height) {
    throw InvalidArgument(fmt::format("{}: dimension mismatch {}x{} vs {}x{}", what, a.width,
                                      a.height, b.width, b.height));
  }
  if (a.size() != static_cast<std::size_t>(a.width) * a.height ||
      b.size() != static_cast<std::size_t>(b.width) * b.height) {
    throw InvalidArgument(fmt::format("{}: image data does not match its dims", what));
  }
}

double squared_range(const DetectorImage& img) {
  const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
  const double r = *hi - *lo;
  return r * r;
}

struct WindowScore {
  double r = 0.0;
  bool both_flat = false;
};

// Pearson correlation over the window [x0, x1) x [y0, y1). A side whose
// population variance is <= its floor makes the window score 0.
WindowScore window_ncc(const DetectorImage& a, const DetectorImage& b, int x0, int y0, int x1,
                       int y1, double floor_a, double floor_b) {
  const double n = static_cast<double>(x1 - x0) * (y1 - y0);
  double sum_a = 0.0;
  double sum_b = 0.0;
  for (int v = y0; v < y1; ++v) {
    for (int u = x0; u < x1; ++u) {
      sum_a += a.at(u, v);
      sum_b += b.at(u, v);
    }
  }
  const double mean_a = sum_a / n;
  const double mean_b = sum_b / n;
  double saa = 0.0;
  double sbb = 0.0;
  double sab = 0.0;
  for (int v = y0; v < y1; ++v) {
    for (int u = x0; u < x1; ++u) {
      const double da = a.at(u, v) - mean_a;
      const double db = b.at(u, v) - mean_b;
      saa += da * da;
      sbb += db * db;
      sab += da * db;
    }
  }
  const bool flat_a = saa / n <= floor_a;
  const bool flat_b = sbb / n <= floor_b;
  if (flat_a || flat_b) return {0.0, flat_a && flat_b};
  return {std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0), false};
}

void check_patches(const DetectorImage& img, const PatchSpec& patches) {
  if (patches.centers.empty()) throw InvalidArgument("lncc: empty patch set");
  if (patches.radius < 1) throw InvalidArgument("lncc: patch radius must be >= 1");
  const int r = patches.radius;
  for (const auto& [x, y] : patches.centers) {
    if (x - r < 0 || y - r < 0 || x + r >= img.width || y + r >= img.height) {
      throw InvalidArgument(fmt::format("lncc: patch at ({}, {}) radius {} leaves the {}x{} image",
                                        x, y, r, img.width, img.height));
    }
  }
}

DetectorImage gradient(const DetectorImage& img, bool along_x) {
  DetectorImage g(img.width - 2, img.height - 2, img.spacing_mm);
  for (int v = 1; v + 1 < img.height; ++v) {
    for (int u = 1; u + 1 < img.width; ++u) {
      g.at(u - 1, v - 1) = along_x ? 0.5 * (img.at(u + 1, v) - img.at(u - 1, v))
                                   : 0.5 * (img.at(u, v + 1) - img.at(u, v - 1));
    }
  }
  return g;
}

}  // namespace

double ncc(const DetectorImage& a, const DetectorImage& b, double epsilon) {
  check_same_dims(a, b, "ncc");
  if (a.size() < 2) throw InvalidArgument("ncc: images need at least 2 pixels");
  return window_ncc(a, b, 0, 0, a.width, a.height, epsilon * squared_range(a),
                    epsilon * squared_range(b))
      .r;
}

double lncc(const DetectorImage& a, const DetectorImage& b, const PatchSpec& patches,
            double epsilon) {
  check_same_dims(a, b, "lncc");
  check_patches(a, patches);
  const double floor_a = epsilon * squared_range(a);
  const double floor_b = epsilon * squared_range(b);
  const int r = patches.radius;
  // Patches flat in both images carry no information and are left out of the
  // mean; a patch flat in only one of them scores 0.
  double total = 0.0;
  std::size_t counted = 0;
  for (const auto& [x, y] : patches.centers) {
    const auto w = window_ncc(a, b, x - r, y - r, x + r + 1, y + r + 1, floor_a, floor_b);
    if (w.both_flat) continue;
    total += w.r;
    ++counted;
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

double mncc(const DetectorImage& a, const DetectorImage& b, const SimilarityConfig& cfg,
            const PatchSpec& patches) {
  if (!(cfg.mu > 0.0 && cfg.mu < 1.0)) {
    throw InvalidArgument(fmt::format("mncc: mu must lie in (0, 1), got {}", cfg.mu));
  }
  return (1.0 - cfg.mu) * ncc(a, b, cfg.epsilon) + cfg.mu * lncc(a, b, patches, cfg.epsilon);
}

double mncc(const DetectorImage& a, const DetectorImage& b, const SimilarityConfig& cfg) {
  return mncc(a, b, cfg, make_patch_grid(a.width, a.height, cfg.patch_radius));
}

double gradient_correlation(const DetectorImage& a, const DetectorImage& b, double epsilon) {
  check_same_dims(a, b, "gradient_correlation");
  if (a.width < 3 || a.height < 3) {
    throw InvalidArgument(fmt::format("gradient_correlation: image must be at least 3x3, got {}x{}",
                                      a.width, a.height));
  }
  return 0.5 * (ncc(gradient(a, true), gradient(b, true), epsilon) +
                ncc(gradient(a, false), gradient(b, false), epsilon));
}

PatchSpec make_patch_grid(int width, int height, int radius) {
  if (radius < 1) throw InvalidArgument(fmt::format("patch radius must be >= 1, got {}", radius));
  const int side = 2 * radius + 1;
  if (width < side || height < side) {
    throw InvalidArgument(fmt::format("image {}x{} is smaller than one patch of side {}", width,
                                      height, side));
  }
  PatchSpec spec;
  spec.radius = radius;
  const int nx = width / side;
  const int ny = height / side;
  spec.centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) spec.centers.push_back({radius + i * side, radius + j * side});
  }
  return spec;
}

double similarity(const DetectorImage& a, const DetectorImage& b, const SimilarityConfig& cfg) {
  switch (cfg.kind) {
    case MetricKind::Ncc:
      return ncc(a, b, cfg.epsilon);
    case MetricKind::Lncc:
      return lncc(a, b, make_patch_grid(a.width, a.height, cfg.patch_radius), cfg.epsilon);
    case MetricKind::Mncc:
      return mncc(a, b, cfg);
    case MetricKind::Gc:
      return gradient_correlation(a, b, cfg.epsilon);
  }
  throw InvalidArgument("similarity: unknown metric");
}

Objective::Objective(std::shared_ptr<const Volume> volume, CameraGeometry camera,
                     DetectorImage fixed, SimilarityConfig cfg, RenderOptions render)
    : volume_(std::move(volume)),
      camera_(camera),
      fixed_(std::move(fixed)),
      cfg_(cfg),
      render_(render) {
  if (!volume_ || volume_->empty()) throw InvalidArgument("objective: empty volume");
  if (fixed_.width != camera_.width || fixed_.height != camera_.height) {
    throw InvalidArgument(fmt::format("objective: fixed image {}x{} does not match detector {}x{}",
                                      fixed_.width, fixed_.height, camera_.width,
                                      camera_.height));
  }
  cfg_.validate();
  if (cfg_.kind == MetricKind::Mncc || cfg_.kind == MetricKind::Lncc) {
    patches_ = make_patch_grid(fixed_.width, fixed_.height, cfg_.patch_radius);
  } else if (cfg_.kind == MetricKind::Gc && (fixed_.width < 3 || fixed_.height < 3)) {
    throw InvalidArgument("objective: gradient correlation needs at least a 3x3 detector");
  }
}

double Objective::score(const DetectorImage& moving) const {
  switch (cfg_.kind) {
    case MetricKind::Ncc:
      return ncc(fixed_, moving, cfg_.epsilon);
    case MetricKind::Lncc:
      return lncc(fixed_, moving, patches_, cfg_.epsilon);
    case MetricKind::Mncc:
      return mncc(fixed_, moving, cfg_, patches_);
    case MetricKind::Gc:
      return gradient_correlation(fixed_, moving, cfg_.epsilon);
  }
  throw InvalidArgument("objective: unknown metric");
}

double Objective::operator()(const Pose6& pose) const {
  return 1.0 - score(project(*volume_, camera_, pose, render_));
}

}  // namespace lrareg
