#pragma once

#include <filesystem>
#include <vector>

#include "lrareg/geometry.hpp"
#include "lrareg/volume.hpp"

namespace lrareg {

/// Row-major 2D image; (u, v) = (column, row).
struct DetectorImage {
  int width = 0;
  int height = 0;
  double spacing_mm = 1.0;
  std::vector<double> data;

  DetectorImage() = default;
  DetectorImage(int w, int h, double spacing, double fill = 0.0);
  DetectorImage(int w, int h, double spacing, std::vector<double> values);

  double& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
  double at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
  std::size_t size() const { return data.size(); }
};

struct RenderOptions {
  double step_mm = 1.0;
  std::size_t threads = 1;
};

/// Line-integral DRR. Each pixel's ray runs from the source to the pixel
/// center, is clipped against the posed volume box, and is sampled at
/// step_mm intervals with trilinear interpolation.
DetectorImage project(const Volume& volume, const CameraGeometry& camera, const Pose6& pose,
                      const RenderOptions& options = {});

/// Min-max rescale to [0, 1]; constant images map to zeros.
DetectorImage normalize_image(const DetectorImage& img);

/// Raw little-endian f32 payload plus JSON sidecar (width, height, spacing_mm).
void save_image_raw(const DetectorImage& img, const std::filesystem::path& stem);
DetectorImage load_image_raw(const std::filesystem::path& stem);

/// 16-bit binary PGM of the min-max normalized image.
void save_image_pgm(const DetectorImage& img, const std::filesystem::path& path);

}  // namespace lrareg
