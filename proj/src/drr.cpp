#include "lrareg/drr.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lrareg/errors.hpp"
#include "lrareg/parallel.hpp"

namespace lrareg {

DetectorImage::DetectorImage(int w, int h, double spacing, double fill)
    : width(w), height(h), spacing_mm(spacing) {
  if (w <= 0 || h <= 0) {
    throw InvalidArgument(fmt::format("image dims must be positive, got {}x{}", w, h));
  }
  data.assign(static_cast<std::size_t>(w) * h, fill);
}

DetectorImage::DetectorImage(int w, int h, double spacing, std::vector<double> values)
    : width(w), height(h), spacing_mm(spacing), data(std::move(values)) {
  if (w <= 0 || h <= 0) {
    throw InvalidArgument(fmt::format("image dims must be positive, got {}x{}", w, h));
  }
  if (data.size() != static_cast<std::size_t>(w) * h) {
    throw InvalidArgument(fmt::format("image: {} values for {}x{}", data.size(), w, h));
  }
}

namespace {

// Slab clipping of the ray o + t*d against the axis-aligned box [-half, half].
bool clip_to_box(const Vec3& o, const Vec3& d, const Vec3& half, double& t0, double& t1) {
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-300) {
      if (o[a] < -half[a] || o[a] > half[a]) return false;
      continue;
    }
    const double inv = 1.0 / d[a];
    double ta = (-half[a] - o[a]) * inv;
    double tb = (half[a] - o[a]) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 >= t1) return false;
  }
  return true;
}

}  // namespace

DetectorImage project(const Volume& volume, const CameraGeometry& camera, const Pose6& pose,
                      const RenderOptions& options) {
  if (!(options.step_mm > 0.0) || !std::isfinite(options.step_mm)) {
    throw InvalidArgument(fmt::format("project: step_mm must be > 0, got {}", options.step_mm));
  }
  if (camera.width <= 0 || camera.height <= 0 || !(camera.spacing_mm > 0.0) ||
      !(camera.siso_mm > 0.0) || !(camera.siso_mm < camera.sid_mm)) {
    throw InvalidArgument("project: degenerate camera geometry");
  }
  if (volume.empty()) throw InvalidArgument("project: empty volume");

  // world = R * q + t + iso  =>  q = R^T (world - iso - t)
  const RigidTransform pose_t = pose_to_transform(pose);
  const Mat3 rt = pose_t.rotation.transpose();
  const Vec3 offset = camera.isocenter() + pose_t.translation;
  const Vec3 source = camera.source();
  const Vec3 origin_v = rt * (source - offset);
  const Vec3 half = 0.5 * volume.extent();
  const double step = options.step_mm;

  DetectorImage img(camera.width, camera.height, camera.spacing_mm);
  parallel_for(static_cast<std::size_t>(camera.height), options.threads, [&](std::size_t row) {
    const int v = static_cast<int>(row);
    for (int u = 0; u < camera.width; ++u) {
      const Vec3 to_pixel = camera.pixel_center(u, v) - source;
      const double length = to_pixel.norm();
      const Vec3 dir_v = rt * (to_pixel / length);
      double t0 = 0.0;
      double t1 = length;
      double sum = 0.0;
      if (clip_to_box(origin_v, dir_v, half, t0, t1)) {
        // Samples sit on a fixed grid along the ray so the clip bounds do not
        // shift them as the pose changes.
        auto n = static_cast<long>(std::ceil(t0 / step - 0.5));
        for (double t = (n + 0.5) * step; t <= t1; t = (++n + 0.5) * step) {
          sum += volume.sample(origin_v + t * dir_v);
        }
      }
      img.at(u, v) = sum * step;
    }
  });
  return img;
}

DetectorImage normalize_image(const DetectorImage& img) {
  DetectorImage out = img;
  if (img.data.empty()) return out;
  const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
  const double min = *lo;
  const double range = *hi - *lo;
  if (!(range > 0.0)) {
    std::fill(out.data.begin(), out.data.end(), 0.0);
    return out;
  }
  for (double& x : out.data) x = (x - min) / range;
  return out;
}

namespace {

std::filesystem::path strip_ext(const std::filesystem::path& p) {
  const auto ext = p.extension();
  if (ext == ".raw" || ext == ".json") {
    auto out = p;
    out.replace_extension();
    return out;
  }
  return p;
}

}  // namespace

void save_image_raw(const DetectorImage& img, const std::filesystem::path& stem_in) {
  const auto stem = strip_ext(stem_in);
  const std::filesystem::path raw_path(stem.string() + ".raw");
  const std::filesystem::path json_path(stem.string() + ".json");
  std::vector<unsigned char> bytes(img.size() * 4);
  for (std::size_t n = 0; n < img.size(); ++n) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(img.data[n]));
    for (int b = 0; b < 4; ++b) bytes[4 * n + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  std::ofstream raw(raw_path, std::ios::binary | std::ios::trunc);
  if (!raw) throw IoError(fmt::format("cannot write '{}'", raw_path.string()));
  raw.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  std::ofstream js(json_path, std::ios::trunc);
  if (!js) throw IoError(fmt::format("cannot write '{}'", json_path.string()));
  js << nlohmann::json{{"width", img.width}, {"height", img.height}, {"spacing_mm", img.spacing_mm}}
            .dump(2)
     << '\n';
  if (!raw || !js) throw IoError(fmt::format("short write for image '{}'", stem.string()));
}

DetectorImage load_image_raw(const std::filesystem::path& stem_in) {
  const auto stem = strip_ext(stem_in);
  const std::filesystem::path raw_path(stem.string() + ".raw");
  const std::filesystem::path json_path(stem.string() + ".json");
  std::ifstream js(json_path);
  if (!js) throw IoError(fmt::format("cannot open image header '{}'", json_path.string()));
  int w = 0;
  int h = 0;
  double spacing = 0.0;
  try {
    const auto header = nlohmann::json::parse(js);
    w = header.at("width").get<int>();
    h = header.at("height").get<int>();
    spacing = header.at("spacing_mm").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("malformed image header '{}': {}", json_path.string(), e.what()));
  }
  if (w <= 0 || h <= 0) throw IoError(fmt::format("bad image dims in '{}'", json_path.string()));
  std::ifstream raw(raw_path, std::ios::binary | std::ios::ate);
  if (!raw) throw IoError(fmt::format("cannot open image payload '{}'", raw_path.string()));
  const auto n_bytes = static_cast<std::size_t>(raw.tellg());
  const std::size_t count = static_cast<std::size_t>(w) * h;
  if (n_bytes != count * 4) {
    throw IoError(fmt::format("image payload '{}' holds {} bytes, header needs {}",
                              raw_path.string(), n_bytes, count * 4));
  }
  raw.seekg(0);
  std::vector<unsigned char> bytes(n_bytes);
  raw.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n_bytes));
  std::vector<double> values(count);
  for (std::size_t n = 0; n < count; ++n) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * n + b]) << (8 * b);
    values[n] = std::bit_cast<float>(bits);
  }
  return DetectorImage(w, h, spacing, std::move(values));
}

void save_image_pgm(const DetectorImage& img, const std::filesystem::path& path) {
  const DetectorImage norm = normalize_image(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  std::vector<unsigned char> bytes(norm.size() * 2);
  for (std::size_t n = 0; n < norm.size(); ++n) {
    const auto q = static_cast<std::uint16_t>(std::lround(norm.data[n] * 65535.0));
    bytes[2 * n] = static_cast<unsigned char>(q >> 8);  // PGM is big-endian
    bytes[2 * n + 1] = static_cast<unsigned char>(q & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("short write to '{}'", path.string()));
}

}  // namespace lrareg
