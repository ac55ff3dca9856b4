#include "lrareg/volume.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lrareg/errors.hpp"

namespace lrareg {

namespace {

void check_dims(const Dims3& dims, double spacing_mm) {
  if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) {
    throw InvalidArgument(
        fmt::format("volume: dims must be positive, got ({}, {}, {})", dims[0], dims[1], dims[2]));
  }
  if (!(spacing_mm > 0.0) || !std::isfinite(spacing_mm)) {
    throw InvalidArgument(fmt::format("volume: spacing must be > 0, got {}", spacing_mm));
  }
}

std::size_t voxel_count(const Dims3& dims) {
  return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
         static_cast<std::size_t>(dims[2]);
}

Vec3 center_of(const Dims3& dims, double spacing, int i, int j, int k) {
  return {(i + 0.5 - 0.5 * dims[0]) * spacing, (j + 0.5 - 0.5 * dims[1]) * spacing,
          (k + 0.5 - 0.5 * dims[2]) * spacing};
}

std::filesystem::path strip_extension(const std::filesystem::path& p) {
  const auto ext = p.extension();
  if (ext == ".raw" || ext == ".json") {
    auto out = p;
    out.replace_extension();
    return out;
  }
  return p;
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

}  // namespace

Volume::Volume(Dims3 dims, double spacing_mm, std::vector<float> data)
    : dims_(dims), spacing_(spacing_mm), data_(std::move(data)) {
  check_dims(dims_, spacing_);
  if (data_.size() != voxel_count(dims_)) {
    throw InvalidArgument(fmt::format("volume: {} values for dims ({}, {}, {})", data_.size(),
                                      dims_[0], dims_[1], dims_[2]));
  }
  for (const float v : data_) {
    if (!std::isfinite(v) || v < 0.0F) {
      throw InvalidArgument("volume: values must be finite and non-negative");
    }
  }
}

Volume::Volume(Dims3 dims, double spacing_mm) : dims_(dims), spacing_(spacing_mm) {
  check_dims(dims_, spacing_);
  data_.assign(voxel_count(dims_), 0.0F);
}

Vec3 Volume::extent() const {
  return Vec3(dims_[0], dims_[1], dims_[2]) * spacing_;
}

Vec3 Volume::voxel_center(int i, int j, int k) const {
  return center_of(dims_, spacing_, i, j, k);
}

double Volume::sample(const Vec3& p) const {
  const double cx = p.x() / spacing_ + 0.5 * dims_[0] - 0.5;
  const double cy = p.y() / spacing_ + 0.5 * dims_[1] - 0.5;
  const double cz = p.z() / spacing_ + 0.5 * dims_[2] - 0.5;
  const double fx0 = std::floor(cx);
  const double fy0 = std::floor(cy);
  const double fz0 = std::floor(cz);
  const int i0 = static_cast<int>(fx0);
  const int j0 = static_cast<int>(fy0);
  const int k0 = static_cast<int>(fz0);
  if (i0 < -1 || j0 < -1 || k0 < -1 || i0 >= dims_[0] || j0 >= dims_[1] || k0 >= dims_[2]) {
    return 0.0;
  }
  const double fx = cx - fx0;
  const double fy = cy - fy0;
  const double fz = cz - fz0;

  if (i0 >= 0 && j0 >= 0 && k0 >= 0 && i0 + 1 < dims_[0] && j0 + 1 < dims_[1] &&
      k0 + 1 < dims_[2]) {
    const std::size_t sx = 1;
    const std::size_t sy = static_cast<std::size_t>(dims_[0]);
    const std::size_t sz = sy * static_cast<std::size_t>(dims_[1]);
    const float* base = data_.data() + index(i0, j0, k0);
    const double c00 = base[0] * (1.0 - fx) + base[sx] * fx;
    const double c10 = base[sy] * (1.0 - fx) + base[sy + sx] * fx;
    const double c01 = base[sz] * (1.0 - fx) + base[sz + sx] * fx;
    const double c11 = base[sz + sy] * (1.0 - fx) + base[sz + sy + sx] * fx;
    const double c0 = c00 * (1.0 - fy) + c10 * fy;
    const double c1 = c01 * (1.0 - fy) + c11 * fy;
    return c0 * (1.0 - fz) + c1 * fz;
  }

  // Border cell: out-of-grid corners are air.
  auto value = [&](int i, int j, int k) -> double {
    if (i < 0 || j < 0 || k < 0 || i >= dims_[0] || j >= dims_[1] || k >= dims_[2]) return 0.0;
    return data_[index(i, j, k)];
  };
  const double c00 = value(i0, j0, k0) * (1.0 - fx) + value(i0 + 1, j0, k0) * fx;
  const double c10 = value(i0, j0 + 1, k0) * (1.0 - fx) + value(i0 + 1, j0 + 1, k0) * fx;
  const double c01 = value(i0, j0, k0 + 1) * (1.0 - fx) + value(i0 + 1, j0, k0 + 1) * fx;
  const double c11 = value(i0, j0 + 1, k0 + 1) * (1.0 - fx) + value(i0 + 1, j0 + 1, k0 + 1) * fx;
  const double c0 = c00 * (1.0 - fy) + c10 * fy;
  const double c1 = c01 * (1.0 - fy) + c11 * fy;
  return c0 * (1.0 - fz) + c1 * fz;
}

VolumeBuilder::VolumeBuilder(Dims3 dims, double spacing_mm) : dims_(dims), spacing_(spacing_mm) {
  check_dims(dims_, spacing_);
  data_.assign(voxel_count(dims_), 0.0F);
}

std::size_t VolumeBuilder::index(int i, int j, int k) const {
  return static_cast<std::size_t>(i) +
         static_cast<std::size_t>(dims_[0]) *
             (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * k);
}

Vec3 VolumeBuilder::voxel_center(int i, int j, int k) const {
  return center_of(dims_, spacing_, i, j, k);
}

void VolumeBuilder::blur(double sigma_vox) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma_vox));
  std::vector<double> kernel(2 * r + 1);
  double total = 0.0;
  for (int o = -r; o <= r; ++o) {
    kernel[o + r] = std::exp(-0.5 * o * o / (sigma_vox * sigma_vox));
    total += kernel[o + r];
  }
  for (double& w : kernel) w /= total;
  const std::array<std::size_t, 3> stride{1, static_cast<std::size_t>(dims_[0]),
                                          static_cast<std::size_t>(dims_[0]) * dims_[1]};
  std::vector<float> tmp(data_.size());
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < dims_[2]; ++k)
      for (int j = 0; j < dims_[1]; ++j)
        for (int i = 0; i < dims_[0]; ++i) {
          const std::array<int, 3> ijk{i, j, k};
          const std::size_t at = index(i, j, k);
          double acc = 0.0;
          for (int o = -r; o <= r; ++o) {
            const int c = ijk[axis] + o;
            if (c < 0 || c >= dims_[axis]) continue;
            acc += kernel[o + r] * data_[at + static_cast<std::ptrdiff_t>(o) * stride[axis]];
          }
          tmp[at] = static_cast<float>(acc);
        }
    data_.swap(tmp);
  }
}

Volume VolumeBuilder::build() && { return Volume(dims_, spacing_, std::move(data_)); }

void save_volume(const Volume& volume, const std::filesystem::path& stem_in) {
  const auto stem = strip_extension(stem_in);
  const auto raw_path = with_suffix(stem, ".raw");
  const auto json_path = with_suffix(stem, ".json");

  std::ofstream raw(raw_path, std::ios::binary | std::ios::trunc);
  if (!raw) throw IoError(fmt::format("cannot write '{}'", raw_path.string()));
  std::vector<unsigned char> bytes(volume.size() * 4);
  for (std::size_t n = 0; n < volume.size(); ++n) {
    const auto bits = std::bit_cast<std::uint32_t>(volume.data()[n]);
    for (int b = 0; b < 4; ++b) bytes[4 * n + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  raw.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!raw) throw IoError(fmt::format("short write to '{}'", raw_path.string()));

  const nlohmann::json header{{"dims", volume.dims()}, {"spacing_mm", volume.spacing()}};
  std::ofstream js(json_path, std::ios::trunc);
  if (!js) throw IoError(fmt::format("cannot write '{}'", json_path.string()));
  js << header.dump(2) << '\n';
  if (!js) throw IoError(fmt::format("short write to '{}'", json_path.string()));
}

Volume load_volume(const std::filesystem::path& stem_in) {
  const auto stem = strip_extension(stem_in);
  const auto raw_path = with_suffix(stem, ".raw");
  const auto json_path = with_suffix(stem, ".json");

  std::ifstream js(json_path);
  if (!js) throw IoError(fmt::format("cannot open volume header '{}'", json_path.string()));
  Dims3 dims{};
  double spacing = 0.0;
  try {
    const auto header = nlohmann::json::parse(js);
    const auto& d = header.at("dims");
    if (!d.is_array() || d.size() != 3) throw IoError("dims must be [nx, ny, nz]");
    for (int a = 0; a < 3; ++a) dims[a] = d.at(a).get<int>();
    spacing = header.at("spacing_mm").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("malformed volume header '{}': {}", json_path.string(), e.what()));
  }
  if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0 || !(spacing > 0.0)) {
    throw IoError(fmt::format("malformed volume header '{}': bad dims or spacing",
                              json_path.string()));
  }

  std::ifstream raw(raw_path, std::ios::binary | std::ios::ate);
  if (!raw) throw IoError(fmt::format("cannot open volume payload '{}'", raw_path.string()));
  const auto bytes_on_disk = static_cast<std::size_t>(raw.tellg());
  const std::size_t expected = voxel_count(dims);
  if (bytes_on_disk != expected * 4) {
    throw IoError(fmt::format("volume payload '{}' holds {} bytes, header needs {} ({} values)",
                              raw_path.string(), bytes_on_disk, expected * 4, expected));
  }
  raw.seekg(0);
  std::vector<unsigned char> bytes(bytes_on_disk);
  raw.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!raw) throw IoError(fmt::format("short read from '{}'", raw_path.string()));
  std::vector<float> data(expected);
  for (std::size_t n = 0; n < expected; ++n) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * n + b]) << (8 * b);
    data[n] = std::bit_cast<float>(bits);
  }
  try {
    return Volume(dims, spacing, std::move(data));
  } catch (const InvalidArgument& e) {
    throw IoError(fmt::format("invalid volume '{}': {}", stem.string(), e.what()));
  }
}

Volume apply_mask(const Volume& volume, const VoxelMask& mask) {
  if (mask.dims != volume.dims() || mask.occupied.size() != volume.size()) {
    throw InvalidArgument(fmt::format("apply_mask: mask dims ({}, {}, {}) do not match volume",
                                      mask.dims[0], mask.dims[1], mask.dims[2]));
  }
  std::vector<float> out(volume.data());
  for (std::size_t n = 0; n < out.size(); ++n) {
    if (!mask.occupied[n]) out[n] = 0.0F;
  }
  return Volume(volume.dims(), volume.spacing(), std::move(out));
}

PhantomKind parse_phantom_kind(std::string_view name) {
  if (name == "sphere") return PhantomKind::Sphere;
  if (name == "box") return PhantomKind::Box;
  if (name == "spine" || name == "spine-like") return PhantomKind::Spine;
  throw InvalidArgument(fmt::format("unknown phantom kind '{}' (sphere, box, spine)", name));
}

std::string_view to_string(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::Sphere:
      return "sphere";
    case PhantomKind::Box:
      return "box";
    case PhantomKind::Spine:
      return "spine";
  }
  return "?";
}

namespace {

struct Cuboid {
  Vec3 lo;
  Vec3 hi;
  float value;
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

// Boxes in fractions of the volume extent (x lateral, y cranio-caudal,
// z depth with +z anterior / towards the source). Vertebra spacing and size
// are uneven so that shifting by one level does not line the stack up again.
std::vector<Cuboid> spine_parts(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  constexpr std::array<double, 5> kLevels{-0.37, -0.2, -0.04, 0.13, 0.33};
  constexpr std::array<double, 5> kGrow{0.8, 1.15, 0.9, 1.25, 1.05};
  constexpr std::array<double, 5> kDensity{0.55, 1.0, 0.65, 0.9, 0.45};
  std::vector<Cuboid> parts;
  for (int k = 0; k < 5; ++k) {
    const double yc = kLevels[k];
    const double grow = kGrow[k];
    const double w = 0.12 * grow * jitter(rng);
    const double h = 0.05 * grow * jitter(rng);
    const auto level = static_cast<float>(kDensity[k] * jitter(rng));

    // body
    parts.push_back({{-w, yc - h, 0.0}, {w, yc + h, 0.2 * grow}, level});
    // arch
    parts.push_back({{-0.1 * grow, yc - 0.03, -0.1}, {0.1 * grow, yc + 0.03, 0.0}, level * 1.2F});
    // spinous process, tilted caudally
    parts.push_back({{-0.02, yc - 0.07 * grow, -0.3}, {0.025, yc, -0.1}, level * 1.3F});
    // transverse processes: the left one is longer
    parts.push_back({{-0.3 * grow, yc - 0.015, -0.07}, {-0.1, yc + 0.025, -0.02}, level * 1.1F});
    parts.push_back({{0.1, yc - 0.025, -0.07}, {0.22 * grow, yc + 0.015, -0.02}, level * 1.1F});
  }
  // rib stubs running in depth: long on the left of level 1, short on the
  // right of level 3, so out-of-plane rotation changes their projected length
  parts.push_back({{-0.42, -0.22, -0.32}, {-0.35, -0.18, 0.3}, 0.9F});
  parts.push_back({{0.3, 0.11, -0.25}, {0.36, 0.15, 0.1}, 0.8F});
  // sacral wedge at the caudal end, off-center
  parts.push_back({{-0.08, 0.42, -0.08}, {0.25, 0.48, 0.15}, 0.65F});
  return parts;
}

}  // namespace

Volume make_phantom(PhantomKind kind, Dims3 dims, double spacing_mm, std::uint64_t seed) {
  if (dims[0] < 16 || dims[1] < 16 || dims[2] < 16) {
    throw InvalidArgument(fmt::format("make_phantom: dims must be >= 16 on every axis, got ({}, "
                                      "{}, {})",
                                      dims[0], dims[1], dims[2]));
  }
  VolumeBuilder b(dims, spacing_mm);
  const Vec3 ext = Vec3(dims[0], dims[1], dims[2]) * spacing_mm;

  switch (kind) {
    case PhantomKind::Sphere: {
      const double radius = 0.25 * std::min({dims[0], dims[1], dims[2]}) * spacing_mm;
      for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
          for (int i = 0; i < dims[0]; ++i)
            if (b.voxel_center(i, j, k).norm() <= radius) b.at(i, j, k) = 1.0F;
      break;
    }
    case PhantomKind::Box: {
      const Vec3 half = ext.cwiseProduct(Vec3(0.25, 0.15, 0.2));
      for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
          for (int i = 0; i < dims[0]; ++i)
            if ((b.voxel_center(i, j, k).cwiseAbs().array() <= half.array()).all())
              b.at(i, j, k) = 1.0F;
      break;
    }
    case PhantomKind::Spine: {
      const auto parts = spine_parts(seed);
      for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
          for (int i = 0; i < dims[0]; ++i) {
            const Vec3 frac = b.voxel_center(i, j, k).cwiseQuotient(ext);
            // Faint soft-tissue envelope, denser caudally and off-center.
            const Vec3 e = (frac - Vec3(0.04, 0.03, 0.0)).cwiseQuotient(Vec3(0.44, 0.5, 0.38));
            float v = e.squaredNorm() <= 1.0 ? static_cast<float>(0.12 + 0.12 * (frac.y() + 0.5))
                                             : 0.0F;
            for (const auto& c : parts) {
              if (c.contains(frac)) v = std::max(v, c.value);
            }
            b.at(i, j, k) = v;
          }
      b.blur(1.5);
      break;
    }
  }
  return std::move(b).build();
}

}  // namespace lrareg
