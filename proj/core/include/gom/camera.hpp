#pragma once

#include "gom/so3.hpp"

namespace gom {

/// Pinhole camera. Extrinsics map world to camera space (x right, y down,
/// looking down +z). Pixel (x, y) has its center at (x + 0.5, y + 0.5).
struct Camera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  Vec2 project(const Vec3& cam) const {
    return {fx * cam.x() / cam.z() + cx, fy * cam.y() / cam.z() + cy};
  }
  Vec3 center() const { return -rotation.transpose() * translation; }

  /// Camera at `eye` looking at `target`; `fov_y` in radians, principal point centered.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y,
                        int width, int height);

  bool operator==(const Camera&) const = default;
};

/// Camera on a sphere around `target` (y up) looking at it. Azimuth 0 places
/// the eye on +z; positive elevation raises it.
Camera orbit_camera(const Vec3& target, double distance, double azimuth, double elevation,
                    int width, int height, double fov_y = 0.8);

/// Throws ArgumentError if focal lengths, resolution, principal point or pose are invalid.
void validate(const Camera& camera);

}  // namespace gom
