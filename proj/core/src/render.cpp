#include "gom/render.hpp"

#include <algorithm>
#include <cmath>

#include "gom/error.hpp"

namespace gom {

std::optional<RenderMode> parse_render_mode(std::string_view name) {
  if (name == "final") return RenderMode::final_image;
  if (name == "albedo") return RenderMode::albedo;
  if (name == "shading") return RenderMode::shading;
  if (name == "normal") return RenderMode::normal;
  if (name == "mask") return RenderMode::mask;
  return std::nullopt;
}

std::string_view to_string(RenderMode mode) {
  switch (mode) {
    case RenderMode::final_image: return "final";
    case RenderMode::albedo: return "albedo";
    case RenderMode::shading: return "shading";
    case RenderMode::normal: return "normal";
    case RenderMode::mask: return "mask";
  }
  return "final";
}

std::vector<WorldGaussian> world_gaussians(std::span<const Face> faces,
                                           std::span<const Vec3> positions, double epsilon,
                                           std::vector<std::uint32_t>* face_of) {
  std::vector<WorldGaussian> out;
  out.reserve(faces.size());
  if (face_of) face_of->clear();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    try {
      out.push_back(face_gaussian(faces[f], positions, epsilon));
      if (face_of) face_of->push_back(static_cast<std::uint32_t>(f));
    } catch (const DegenerateGeometryError&) {
      // zero-area faces carry no visible surface
    }
  }
  return out;
}

std::vector<Splat2D> project_all(std::span<const WorldGaussian> gaussians, const Camera& cam,
                                 std::vector<std::uint32_t>* source) {
  std::vector<Splat2D> splats;
  splats.reserve(gaussians.size());
  if (source) source->clear();
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    if (auto s = project_gaussian(gaussians[i], cam)) {
      splats.push_back(*s);
      if (source) source->push_back(static_cast<std::uint32_t>(i));
    }
  }
  return splats;
}

Image composite_over(const Image& image, const Image& mask, const Vec3& background) {
  Image out = image;
  for (std::size_t p = 0; p < mask.data.size(); ++p) {
    const double rest = 1.0 - mask.data[p];
    for (int c = 0; c < 3; ++c) out.data[3 * p + c] += rest * background[c];
  }
  return out;
}

RenderOutput render(const Avatar& avatar, const Networks& nets, const Pose& pose,
                    const Camera& cam, const RenderOptions& options) {
  return render_observed(avatar, nets, articulate(avatar, pose, nets, options.refine), cam,
                         options);
}

RenderOutput render_observed(const Avatar& avatar, const Networks& nets,
                             std::vector<Vec3> observed, const Camera& cam,
                             const RenderOptions& options) {
  validate(cam);
  RenderOutput out;
  out.observed_positions = std::move(observed);
  const auto gaussians = world_gaussians(avatar.faces, out.observed_positions, avatar.epsilon);
  out.gaussian_count = gaussians.size();
  const auto splats = project_all(gaussians, cam);
  RasterOutput raster = rasterize(splats, cam.width, cam.height, options.raster);
  out.albedo = std::move(raster.albedo);
  out.mask = std::move(raster.mask);
  out.normals = raster_normals(out.observed_positions, avatar.faces, cam);
  out.shading = nets.shading.empty()
                    ? Image(cam.width, cam.height, 1, 1.0)
                    : shading_map(out.normals, nets.shading, nets.shading_encoding);
  out.image = compose_final(out.albedo, out.shading);
  out.composite = composite_over(out.image, out.mask, options.background);
  if (options.mesh_mask) {
    const double sigma =
        options.silhouette_sigma > 0.0 ? options.silhouette_sigma : default_silhouette_sigma(cam);
    out.mesh_mask = soft_silhouette(out.observed_positions, avatar.faces, cam, sigma);
  }
  return out;
}

namespace {

std::uint8_t quantize(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

}  // namespace

std::vector<std::uint8_t> to_rgba8(const RenderOutput& out, RenderMode mode,
                                   const Vec3& background) {
  const int w = out.albedo.width, h = out.albedo.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<std::uint8_t> rgba(4 * n, 255);
  auto put = [&](std::size_t p, double r, double g, double b) {
    rgba[4 * p] = quantize(r);
    rgba[4 * p + 1] = quantize(g);
    rgba[4 * p + 2] = quantize(b);
  };
  switch (mode) {
    case RenderMode::final_image:
      for (std::size_t p = 0; p < n; ++p) {
        put(p, out.composite.data[3 * p], out.composite.data[3 * p + 1],
            out.composite.data[3 * p + 2]);
      }
      break;
    case RenderMode::albedo: {
      const Image c = composite_over(out.albedo, out.mask, background);
      for (std::size_t p = 0; p < n; ++p) put(p, c.data[3 * p], c.data[3 * p + 1], c.data[3 * p + 2]);
      break;
    }
    case RenderMode::shading: {
      double peak = 0.0;
      for (std::size_t p = 0; p < n; ++p) {
        if (out.normals.face_ids[p] >= 0) peak = std::max(peak, out.shading.data[p]);
      }
      for (std::size_t p = 0; p < n; ++p) {
        const double v = (out.normals.face_ids[p] >= 0 && peak > 0.0) ? out.shading.data[p] / peak : 0.0;
        put(p, v, v, v);
      }
      break;
    }
    case RenderMode::normal:
      for (std::size_t p = 0; p < n; ++p) {
        if (out.normals.face_ids[p] < 0) {
          put(p, 0.0, 0.0, 0.0);
        } else {
          const Vec3& nrm = out.normals.normals[p];
          put(p, 0.5 * nrm.x() + 0.5, 0.5 * nrm.y() + 0.5, 0.5 * nrm.z() + 0.5);
        }
      }
      break;
    case RenderMode::mask:
      for (std::size_t p = 0; p < n; ++p) put(p, out.mask.data[p], out.mask.data[p], out.mask.data[p]);
      break;
  }
  return rgba;
}

}  // namespace gom
