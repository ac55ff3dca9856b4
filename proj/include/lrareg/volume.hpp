#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "lrareg/geometry.hpp"

namespace lrareg {

using Dims3 = std::array<int, 3>;

/// Scalar voxel grid, x-fastest storage, isotropic spacing. Voxel (i, j, k)
/// has its center at ((i + 0.5 - nx/2) * spacing, ...) in volume coordinates,
/// so the volume midpoint is the origin.
class Volume {
 public:
  Volume() = default;
  /// Throws InvalidArgument unless dims > 0, spacing > 0, data size matches
  /// and all values are finite and non-negative.
  Volume(Dims3 dims, double spacing_mm, std::vector<float> data);
  /// Zero-filled volume.
  Volume(Dims3 dims, double spacing_mm);

  const Dims3& dims() const { return dims_; }
  double spacing() const { return spacing_; }
  std::size_t size() const { return data_.size(); }
  const std::vector<float>& data() const { return data_; }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * k);
  }
  float at(int i, int j, int k) const { return data_[index(i, j, k)]; }

  /// Physical extent in mm along each axis.
  Vec3 extent() const;
  /// Center of voxel (i, j, k) in volume coordinates (mm).
  Vec3 voxel_center(int i, int j, int k) const;

  /// Trilinear interpolation at a point in volume coordinates. Neighbours
  /// outside the grid count as zero.
  double sample(const Vec3& p) const;

  bool empty() const { return data_.empty(); }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  Dims3 dims_{0, 0, 0};
  double spacing_ = 1.0;
  std::vector<float> data_;
};

/// Builds a volume by writing into a mutable buffer; used by generators.
class VolumeBuilder {
 public:
  VolumeBuilder(Dims3 dims, double spacing_mm);
  float& at(int i, int j, int k) { return data_[index(i, j, k)]; }
  const Dims3& dims() const { return dims_; }
  double spacing() const { return spacing_; }
  Vec3 voxel_center(int i, int j, int k) const;
  /// Separable Gaussian smoothing in place; samples outside the grid count as 0.
  void blur(double sigma_vox);
  Volume build() &&;

 private:
  std::size_t index(int i, int j, int k) const;
  Dims3 dims_;
  double spacing_;
  std::vector<float> data_;
};

struct VoxelMask {
  Dims3 dims{0, 0, 0};
  std::vector<std::uint8_t> occupied;
};

/// Writes `<stem>.raw` (little-endian f32, x fastest) and `<stem>.json`.
/// `stem` may be given with or without either extension.
void save_volume(const Volume& volume, const std::filesystem::path& stem);
/// Throws IoError on missing/malformed files or header/payload size mismatch.
Volume load_volume(const std::filesystem::path& stem);

Volume apply_mask(const Volume& volume, const VoxelMask& mask);

enum class PhantomKind { Sphere, Box, Spine };

PhantomKind parse_phantom_kind(std::string_view name);
std::string_view to_string(PhantomKind kind);

/// Synthetic volumes standing in for CT. Requires dims >= 16 on every axis.
/// The spine phantom has no mirror symmetry, so every pose component is
/// observable from a single projection.
Volume make_phantom(PhantomKind kind, Dims3 dims, double spacing_mm, std::uint64_t seed);

}  // namespace lrareg
