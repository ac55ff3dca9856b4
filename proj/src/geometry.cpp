#include "lrareg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <Eigen/Geometry>

#include "lrareg/errors.hpp"

namespace lrareg {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

Vec6 Pose6::to_vector() const {
  Vec6 v;
  v << rx, ry, rz, tx, ty, tz;
  return v;
}

Pose6 Pose6::from_vector(const Vec6& v) { return {v[0], v[1], v[2], v[3], v[4], v[5]}; }

bool Pose6::is_finite() const { return to_vector().allFinite(); }

Pose6 operator+(const Pose6& a, const Pose6& b) {
  return Pose6::from_vector(a.to_vector() + b.to_vector());
}

void to_json(nlohmann::json& j, const Pose6& p) {
  j = nlohmann::json::array({p.rx, p.ry, p.rz, p.tx, p.ty, p.tz});
}

void from_json(const nlohmann::json& j, Pose6& p) {
  if (!j.is_array() || j.size() != 6) {
    throw InvalidArgument("pose must be an array of 6 numbers [rx, ry, rz, tx, ty, tz]");
  }
  Vec6 v;
  for (int i = 0; i < 6; ++i) v[i] = j.at(i).get<double>();
  p = Pose6::from_vector(v);
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& rhs) const {
  RigidTransform out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

RigidTransform pose_to_transform(const Pose6& pose) {
  if (!pose.is_finite()) {
    throw InvalidArgument("pose_to_transform: non-finite pose component");
  }
  const Eigen::AngleAxisd rx(pose.rx * kDegToRad, Vec3::UnitX());
  const Eigen::AngleAxisd ry(pose.ry * kDegToRad, Vec3::UnitY());
  const Eigen::AngleAxisd rz(pose.rz * kDegToRad, Vec3::UnitZ());
  RigidTransform t;
  t.rotation = (rz * ry * rx).toRotationMatrix();
  t.translation = Vec3(pose.tx, pose.ty, pose.tz);
  return t;
}

Pose6 transform_to_pose(const RigidTransform& t) {
  const Mat3& r = t.rotation;
  const double sy = std::clamp(-r(2, 0), -1.0, 1.0);
  Pose6 p;
  p.ry = std::asin(sy) / kDegToRad;
  p.rx = std::atan2(r(2, 1), r(2, 2)) / kDegToRad;
  p.rz = std::atan2(r(1, 0), r(0, 0)) / kDegToRad;
  p.tx = t.translation.x();
  p.ty = t.translation.y();
  p.tz = t.translation.z();
  return p;
}

Vec3 CameraGeometry::pixel_center(int u, int v) const {
  return {(u + 0.5 - 0.5 * width) * spacing_mm, (v + 0.5 - 0.5 * height) * spacing_mm, 0.0};
}

Eigen::Vector2d CameraGeometry::project_point(const Vec3& world) const {
  const Vec3 s = source();
  const double depth = s.z() - world.z();
  if (!(depth > 0.0)) {
    throw InvalidArgument("project_point: point is not between source and detector plane");
  }
  const double mag = sid_mm / depth;
  const double x = s.x() + (world.x() - s.x()) * mag;
  const double y = s.y() + (world.y() - s.y()) * mag;
  return {x / spacing_mm + 0.5 * width - 0.5, y / spacing_mm + 0.5 * height - 0.5};
}

CameraGeometry make_camera(std::array<int, 2> detector_px, double spacing_mm, double sid_mm,
                           double siso_mm) {
  if (detector_px[0] <= 0 || detector_px[1] <= 0) {
    throw InvalidArgument(
        fmt::format("camera: detector dims must be positive, got {}x{}", detector_px[0],
                    detector_px[1]));
  }
  if (!(spacing_mm > 0.0) || !std::isfinite(spacing_mm)) {
    throw InvalidArgument(fmt::format("camera: pixel spacing must be > 0, got {}", spacing_mm));
  }
  if (!(sid_mm > 0.0) || !std::isfinite(sid_mm)) {
    throw InvalidArgument(fmt::format("camera: sid must be > 0, got {}", sid_mm));
  }
  if (!(siso_mm > 0.0) || !(siso_mm < sid_mm)) {
    throw InvalidArgument(
        fmt::format("camera: need 0 < siso < sid, got siso={} sid={}", siso_mm, sid_mm));
  }
  return CameraGeometry{detector_px[0], detector_px[1], spacing_mm, sid_mm, siso_mm};
}

CameraGeometry make_camera(std::array<int, 2> detector_px, double spacing_mm, double sid_mm) {
  return make_camera(detector_px, spacing_mm, sid_mm, 0.5 * sid_mm);
}

void to_json(nlohmann::json& j, const CameraGeometry& c) {
  j = nlohmann::json{{"detector_px", {c.width, c.height}},
                     {"spacing_mm", c.spacing_mm},
                     {"sid_mm", c.sid_mm},
                     {"siso_mm", c.siso_mm}};
}

void from_json(const nlohmann::json& j, CameraGeometry& c) {
  if (!j.is_object()) throw InvalidArgument("camera: expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "detector_px" && key != "spacing_mm" && key != "sid_mm" && key != "siso_mm") {
      throw InvalidArgument(fmt::format("camera: unknown key '{}'", key));
    }
  }
  const auto& px = j.at("detector_px");
  if (!px.is_array() || px.size() != 2) {
    throw InvalidArgument("camera: detector_px must be [width, height]");
  }
  const double sid = j.at("sid_mm").get<double>();
  const double siso = j.contains("siso_mm") ? j.at("siso_mm").get<double>() : 0.5 * sid;
  c = make_camera({px.at(0).get<int>(), px.at(1).get<int>()}, j.at("spacing_mm").get<double>(),
                  sid, siso);
}

}  // namespace lrareg
