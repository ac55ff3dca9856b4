#pragma once

#include <array>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace lrareg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Rigid 6-DoF pose: rotations in degrees, translations in mm.
struct Pose6 {
  double rx = 0.0;
  double ry = 0.0;
  double rz = 0.0;
  double tx = 0.0;
  double ty = 0.0;
  double tz = 0.0;

  Vec6 to_vector() const;
  static Pose6 from_vector(const Vec6& v);

  bool is_finite() const;

  friend Pose6 operator+(const Pose6& a, const Pose6& b);
  friend bool operator==(const Pose6&, const Pose6&) = default;
};

void to_json(nlohmann::json& j, const Pose6& p);
void from_json(const nlohmann::json& j, Pose6& p);

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  RigidTransform inverse() const;
  RigidTransform compose(const RigidTransform& rhs) const;  // this ∘ rhs
};

/// R = Rz(rz) * Ry(ry) * Rx(rx), translation (tx, ty, tz).
/// Throws InvalidArgument on non-finite components.
RigidTransform pose_to_transform(const Pose6& pose);

/// Recovers the Euler angles of a transform built by pose_to_transform.
/// Exact inverse for |ry| < 90 degrees.
Pose6 transform_to_pose(const RigidTransform& t);

inline Vec3 transform_point(const RigidTransform& t, const Vec3& p) {
  return t.rotation * p + t.translation;
}

/// Pinhole C-arm. World frame: detector plane z = 0 centered on the origin,
/// source at (0, 0, sid), isocenter at (0, 0, sid - siso).
struct CameraGeometry {
  int width = 0;
  int height = 0;
  double spacing_mm = 0.0;
  double sid_mm = 0.0;
  double siso_mm = 0.0;

  Vec3 source() const { return {0.0, 0.0, sid_mm}; }
  Vec3 isocenter() const { return {0.0, 0.0, sid_mm - siso_mm}; }
  /// World position of the center of pixel (u, v); u indexes columns.
  Vec3 pixel_center(int u, int v) const;
  /// Projects a world point onto the detector, returning continuous pixel
  /// coordinates (u, v) in the same convention as pixel_center.
  Eigen::Vector2d project_point(const Vec3& world) const;

  friend bool operator==(const CameraGeometry&, const CameraGeometry&) = default;
};

CameraGeometry make_camera(std::array<int, 2> detector_px, double spacing_mm, double sid_mm,
                           double siso_mm);
/// Same as make_camera with siso = sid / 2.
CameraGeometry make_camera(std::array<int, 2> detector_px, double spacing_mm, double sid_mm);

void to_json(nlohmann::json& j, const CameraGeometry& c);
/// Validates through make_camera; unknown keys are rejected.
void from_json(const nlohmann::json& j, CameraGeometry& c);

}  // namespace lrareg
