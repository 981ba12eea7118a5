#include "gom/camera.hpp"

#include <cmath>

#include "gom/error.hpp"

namespace gom {

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y,
                       int width, int height) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = (-up).cross(z);
  if (x.norm() < 1e-12) throw ArgumentError("look_at: up vector parallel to view direction");
  x.normalize();
  const Vec3 y = z.cross(x);
  Camera cam;
  cam.rotation.row(0) = x;
  cam.rotation.row(1) = y;
  cam.rotation.row(2) = z;
  cam.translation = -cam.rotation * eye;
  cam.width = width;
  cam.height = height;
  cam.fy = 0.5 * height / std::tan(0.5 * fov_y);
  cam.fx = cam.fy;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  return cam;
}

Camera orbit_camera(const Vec3& target, double distance, double azimuth, double elevation,
                    int width, int height, double fov_y) {
  if (!(distance > 0.0)) throw ArgumentError("orbit_camera: distance must be positive");
  const Vec3 eye = target + distance * Vec3(std::sin(azimuth) * std::cos(elevation),
                                            std::sin(elevation),
                                            std::cos(azimuth) * std::cos(elevation));
  return Camera::look_at(eye, target, Vec3(0.0, 1.0, 0.0), fov_y, width, height);
}

void validate(const Camera& c) {
  if (c.width <= 0 || c.height <= 0) throw ArgumentError("camera resolution must be positive");
  if (!(c.fx > 0.0) || !(c.fy > 0.0) || !std::isfinite(c.fx) || !std::isfinite(c.fy)) {
    throw ArgumentError("camera focal lengths must be positive");
  }
  if (!(c.cx >= -c.width && c.cx <= 2.0 * c.width) ||
      !(c.cy >= -c.height && c.cy <= 2.0 * c.height)) {
    throw ArgumentError("camera principal point too far outside the image");
  }
  if (!is_rotation(c.rotation, 1e-6) || !c.translation.allFinite()) {
    throw ArgumentError("camera extrinsics are not a rigid transform");
  }
}

}  // namespace gom
