#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "gom/error.hpp"
#include "gom/fit.hpp"

namespace gom {

std::string_view to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::vertices: return "vertices";
    case ParamGroup::rotations: return "rotations";
    case ParamGroup::log_scales: return "log_scales";
    case ParamGroup::colors: return "colors";
    case ParamGroup::deformer: return "deformer";
    case ParamGroup::refiner: return "refiner";
    case ParamGroup::shading: return "shading";
    case ParamGroup::pose_correction: return "pose_correction";
  }
  return "?";
}

std::optional<ParamGroup> parse_param_group(std::string_view name) {
  for (ParamGroup g : kTrainableGroups) {
    if (to_string(g) == name) return g;
  }
  if (name == "pose_correction") return ParamGroup::pose_correction;
  return std::nullopt;
}

namespace {

std::vector<double> flatten_vec3(std::span<const Vec3> v) {
  std::vector<double> out;
  out.reserve(3 * v.size());
  for (const Vec3& x : v) out.insert(out.end(), {x.x(), x.y(), x.z()});
  return out;
}

std::vector<double> flatten_mlp(const Mlp& m) {
  std::vector<double> out(m.parameter_count());
  m.copy_to(out);
  return out;
}

template <typename Get>
std::vector<double> face_field(const Avatar& avatar, Get get) {
  std::vector<double> out;
  out.reserve(3 * avatar.faces.size());
  for (const Face& f : avatar.faces) {
    const Vec3& v = get(f);
    out.insert(out.end(), {v.x(), v.y(), v.z()});
  }
  return out;
}

void check_size(std::span<const double> values, std::size_t expected, ParamGroup group) {
  if (values.size() != expected) {
    throw ArgumentError("set_params(" + std::string(to_string(group)) + "): expected " +
                        std::to_string(expected) + " values, got " + std::to_string(values.size()));
  }
}

void require_finite_image(const Image& img, const char* stage) {
  for (double v : img.data) {
    if (!std::isfinite(v)) throw NumericError(stage, "non-finite value");
  }
}

void require_finite(std::span<const Vec3> v, const char* stage) {
  for (const Vec3& x : v) {
    if (!x.allFinite()) throw NumericError(stage, "non-finite value");
  }
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// d(mean |a - b|)/da scaled by `weight`, accumulated into `out`.
void add_l1_grad(const Image& a, const Image& b, double weight, Image& out) {
  const double k = weight / static_cast<double>(std::max<std::size_t>(a.data.size(), 1));
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] += k * sign(a.data[i] - b.data[i]);
}

void laplacian_grad(std::span<const Vec3> p, std::span<const Face> faces, double weight,
                    std::vector<Vec3>& g) {
  const auto rings = interior_neighbors(p.size(), faces);
  const auto count = std::count_if(rings.begin(), rings.end(), [](const auto& r) { return !r.empty(); });
  if (count == 0) return;
  const double k = 2.0 * weight / static_cast<double>(count);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (rings[i].empty()) continue;
    Vec3 mean = Vec3::Zero();
    for (std::uint32_t j : rings[i]) mean += p[j];
    const double inv = 1.0 / static_cast<double>(rings[i].size());
    mean *= inv;
    const Vec3 gd = k * (p[i] - mean);
    g[i] += gd;
    for (std::uint32_t j : rings[i]) g[j] -= inv * gd;
  }
}

void normal_grad(std::span<const Vec3> p, std::span<const Face> faces, double weight,
                 std::vector<Vec3>& g) {
  const auto pairs = face_adjacency(faces);
  if (pairs.empty()) return;
  std::vector<Vec3> raw(faces.size()), n(faces.size(), Vec3::Zero()), gn(faces.size(), Vec3::Zero());
  std::vector<double> len(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& idx = faces[f].vertex_indices;
    raw[f] = (p[idx[1]] - p[idx[0]]).cross(p[idx[2]] - p[idx[0]]);
    len[f] = raw[f].norm();
    if (len[f] > 0.0) n[f] = raw[f] / len[f];
  }
  const double k = weight / static_cast<double>(pairs.size());
  for (const auto& [a, b] : pairs) {
    gn[a] -= k * n[b];
    gn[b] -= k * n[a];
  }
  for (std::size_t f = 0; f < faces.size(); ++f) {
    if (!(len[f] > 0.0)) continue;
    const Vec3 g_raw = (gn[f] - n[f] * n[f].dot(gn[f])) / len[f];
    const auto& idx = faces[f].vertex_indices;
    const Vec3 e1 = p[idx[1]] - p[idx[0]];
    const Vec3 e2 = p[idx[2]] - p[idx[0]];
    const Vec3 g_e1 = e2.cross(g_raw);
    const Vec3 g_e2 = g_raw.cross(e1);
    g[idx[1]] += g_e1;
    g[idx[2]] += g_e2;
    g[idx[0]] -= g_e1 + g_e2;
  }
}

void color_grad(std::span<const Face> faces, double weight, std::vector<Vec3>& g) {
  const auto pairs = face_adjacency(faces);
  if (pairs.empty()) return;
  const double k = weight / (3.0 * static_cast<double>(pairs.size()));
  for (const auto& [a, b] : pairs) {
    for (int c = 0; c < 3; ++c) {
      const double sa = sigmoid(faces[a].color_logit[c]);
      const double sb = sigmoid(faces[b].color_logit[c]);
      const double s = k * sign(sa - sb);
      g[a][c] += s * sa * (1.0 - sa);
      g[b][c] -= s * sb * (1.0 - sb);
    }
  }
}

}  // namespace

Gradients Gradients::zeros(const Avatar& avatar, const Networks& nets) {
  Gradients g;
  g.vertices.assign(avatar.vertices.size(), Vec3::Zero());
  g.rotations.assign(avatar.faces.size(), Vec3::Zero());
  g.log_scales.assign(avatar.faces.size(), Vec3::Zero());
  g.colors.assign(avatar.faces.size(), Vec3::Zero());
  g.deformer = nets.deformer.zeros_like();
  g.refiner = nets.refiner.zeros_like();
  g.shading = nets.shading.zeros_like();
  g.pose_correction.assign(avatar.rig.joint_count(), Vec3::Zero());
  return g;
}

std::vector<double> Gradients::flatten(ParamGroup group) const {
  switch (group) {
    case ParamGroup::vertices: return flatten_vec3(vertices);
    case ParamGroup::rotations: return flatten_vec3(rotations);
    case ParamGroup::log_scales: return flatten_vec3(log_scales);
    case ParamGroup::colors: return flatten_vec3(colors);
    case ParamGroup::deformer: return flatten_mlp(deformer);
    case ParamGroup::refiner: return flatten_mlp(refiner);
    case ParamGroup::shading: return flatten_mlp(shading);
    case ParamGroup::pose_correction: return flatten_vec3(pose_correction);
  }
  return {};
}

void Gradients::scale(double factor) {
  for (auto* v : {&vertices, &rotations, &log_scales, &colors, &pose_correction}) {
    for (Vec3& x : *v) x *= factor;
  }
  for (Mlp* m : {&deformer, &refiner, &shading}) {
    for (DenseLayer& l : m->layers) {
      l.weight *= factor;
      l.bias *= factor;
    }
  }
}

std::vector<double> get_params(ParamGroup group, const Avatar& avatar, const Networks& nets) {
  switch (group) {
    case ParamGroup::vertices: return flatten_vec3(avatar.positions());
    case ParamGroup::rotations:
      return face_field(avatar, [](const Face& f) -> const Vec3& { return f.local_rotation; });
    case ParamGroup::log_scales:
      return face_field(avatar, [](const Face& f) -> const Vec3& { return f.local_log_scale; });
    case ParamGroup::colors:
      return face_field(avatar, [](const Face& f) -> const Vec3& { return f.color_logit; });
    case ParamGroup::deformer: return flatten_mlp(nets.deformer);
    case ParamGroup::refiner: return flatten_mlp(nets.refiner);
    case ParamGroup::shading: return flatten_mlp(nets.shading);
    case ParamGroup::pose_correction:
      throw ArgumentError("pose_correction is not a stored parameter");
  }
  return {};
}

void set_params(ParamGroup group, std::span<const double> values, Avatar& avatar, Networks& nets) {
  auto set_faces = [&](Vec3 Face::*field) {
    check_size(values, 3 * avatar.faces.size(), group);
    for (std::size_t f = 0; f < avatar.faces.size(); ++f) {
      avatar.faces[f].*field = Vec3(values[3 * f], values[3 * f + 1], values[3 * f + 2]);
    }
  };
  auto set_mlp = [&](Mlp& m) {
    check_size(values, m.parameter_count(), group);
    m.copy_from(values);
  };
  switch (group) {
    case ParamGroup::vertices:
      check_size(values, 3 * avatar.vertices.size(), group);
      for (std::size_t i = 0; i < avatar.vertices.size(); ++i) {
        avatar.vertices[i].position = Vec3(values[3 * i], values[3 * i + 1], values[3 * i + 2]);
      }
      return;
    case ParamGroup::rotations: return set_faces(&Face::local_rotation);
    case ParamGroup::log_scales: return set_faces(&Face::local_log_scale);
    case ParamGroup::colors: return set_faces(&Face::color_logit);
    case ParamGroup::deformer: return set_mlp(nets.deformer);
    case ParamGroup::refiner: return set_mlp(nets.refiner);
    case ParamGroup::shading: return set_mlp(nets.shading);
    case ParamGroup::pose_correction:
      throw ArgumentError("pose_correction is not a stored parameter");
  }
}

Evaluation evaluate(const Avatar& avatar, const Networks& nets, const FrameObservation& obs,
                    const EvalOptions& options, bool with_gradients) {
  const Camera& cam = obs.camera;
  validate(cam);
  if (obs.image.width != cam.width || obs.image.height != cam.height || obs.image.channels != 3 ||
      obs.mask.width != cam.width || obs.mask.height != cam.height || obs.mask.channels != 1) {
    throw ArgumentError("evaluate: observation resolution does not match the camera");
  }
  const LossWeights& w = options.weights;
  const RenderOptions& ro = options.render;

  Evaluation ev;
  RenderOutput& out = ev.render;

  // Articulation.
  ArticulateOptions ao;
  ao.refine = ro.refine;
  ao.correction_offset = options.correction_offset;
  ArticulationTape atape;
  out.observed_positions = articulate(avatar, obs.pose, nets, ao, &atape);
  require_finite(out.observed_positions, "articulate");
  const std::vector<Vec3>& observed = out.observed_positions;

  // Gaussian path.
  std::vector<std::uint32_t> face_of, source;
  const auto gaussians = world_gaussians(avatar.faces, observed, avatar.epsilon, &face_of);
  out.gaussian_count = gaussians.size();
  const auto splats = project_all(gaussians, cam, &source);
  for (const Splat2D& s : splats) {
    if (!s.mean.allFinite() || !s.cov.allFinite() || !s.color.allFinite()) {
      throw NumericError("project", "non-finite splat");
    }
  }
  RasterOutput raster = rasterize(splats, cam.width, cam.height, ro.raster);
  out.albedo = std::move(raster.albedo);
  out.mask = std::move(raster.mask);
  require_finite_image(out.albedo, "rasterize");

  // Mesh path.
  out.normals = raster_normals(observed, avatar.faces, cam);
  ShadingTape stape;
  out.shading = nets.shading.empty() ? Image(cam.width, cam.height, 1, 1.0)
                                     : shading_map(out.normals, nets.shading, nets.shading_encoding,
                                                   &stape);
  require_finite_image(out.shading, "shading");
  out.image = compose_final(out.albedo, out.shading);
  out.composite = composite_over(out.image, out.mask, ro.background);
  const double sigma =
      ro.silhouette_sigma > 0.0 ? ro.silhouette_sigma : default_silhouette_sigma(cam);
  const bool need_mesh_mask = w.reg > 0.0;
  if (need_mesh_mask || ro.mesh_mask) {
    out.mesh_mask = soft_silhouette(observed, avatar.faces, cam, sigma);
    require_finite_image(out.mesh_mask, "silhouette");
  }

  ev.loss = loss_terms(out, obs, avatar, w, nullptr);
  Image g_composite(cam.width, cam.height, 3, 0.0);
  if (options.perceptual) {
    ev.loss.perceptual = options.perceptual->evaluate(out.composite, obs.image,
                                                      with_gradients ? &g_composite : nullptr);
    ev.loss.total += w.lpips * ev.loss.perceptual;
    for (double& v : g_composite.data) v *= w.lpips;
  }
  const double scale = options.loss_scale;
  ev.loss.total *= scale;
  if (!std::isfinite(ev.loss.total)) throw NumericError("loss", "non-finite total");
  if (!with_gradients) return ev;

  Gradients& g = ev.grads;
  g = Gradients::zeros(avatar, nets);

  // Image-space adjoints.
  add_l1_grad(out.composite, obs.image, 1.0, g_composite);
  for (double& v : g_composite.data) v *= scale;
  Image g_mask(cam.width, cam.height, 1, 0.0);
  add_l1_grad(out.mask, obs.mask, scale * w.mask, g_mask);
  Image g_albedo(cam.width, cam.height, 3, 0.0);
  Image g_shading(cam.width, cam.height, 1, 0.0);
  for (std::size_t p = 0; p < g_mask.data.size(); ++p) {
    for (int c = 0; c < 3; ++c) {
      const double gc = g_composite.data[3 * p + c];
      g_mask.data[p] -= gc * ro.background[c];
      g_albedo.data[3 * p + c] = gc * out.shading.data[p];
      g_shading.data[p] += gc * out.albedo.data[3 * p + c];
    }
  }

  std::vector<Vec3> g_observed(observed.size(), Vec3::Zero());

  // Gaussian path backward.
  const auto splat_grads =
      rasterize_backward(splats, cam.width, cam.height, ro.raster, g_albedo, g_mask);
  for (std::size_t s = 0; s < splats.size(); ++s) {
    const std::uint32_t gi = source[s];
    const WorldGaussianGrad wg = project_gaussian_vjp(gaussians[gi], cam, splat_grads[s]);
    const std::uint32_t f = face_of[gi];
    const Face& face = avatar.faces[f];
    const FaceGaussianGrad fg =
        face_gaussian_vjp(face, observed, avatar.epsilon, wg.mean, wg.cov, wg.color);
    for (int k = 0; k < 3; ++k) g_observed[face.vertex_indices[k]] += fg.vertices[k];
    g.rotations[f] += fg.rotation;
    g.log_scales[f] += fg.log_scale;
    g.colors[f] += fg.color_logit;
  }

  // Mesh path backward.
  if (!nets.shading.empty()) {
    const auto g_normals = shading_map_vjp(out.normals, nets.shading, nets.shading_encoding,
                                           stape, g_shading, g.shading);
    const auto gv = raster_normals_vjp(observed, avatar.faces, cam, out.normals, g_normals);
    for (std::size_t i = 0; i < gv.size(); ++i) g_observed[i] += gv[i];
  }
  if (need_mesh_mask) {
    Image g_mesh(cam.width, cam.height, 1, 0.0);
    add_l1_grad(out.mesh_mask, obs.mask, scale * w.reg, g_mesh);
    const auto gv = soft_silhouette_vjp(observed, avatar.faces, cam, sigma, g_mesh);
    for (std::size_t i = 0; i < gv.size(); ++i) g_observed[i] += gv[i];
  }
  require_finite(g_observed, "render backward");

  // Articulation backward.
  ArticulationGrad ag;
  ag.positions.assign(avatar.vertices.size(), Vec3::Zero());
  ag.pose_correction.assign(avatar.rig.joint_count(), Vec3::Zero());
  ag.deformer = std::move(g.deformer);
  ag.refiner = std::move(g.refiner);
  articulate_backward(avatar, nets, atape, g_observed, ag);
  g.vertices = std::move(ag.positions);
  g.pose_correction = std::move(ag.pose_correction);
  g.deformer = std::move(ag.deformer);
  g.refiner = std::move(ag.refiner);

  // Canonical-mesh regularizers.
  const std::vector<Vec3> canonical = avatar.positions();
  laplacian_grad(canonical, avatar.faces, scale * w.reg * w.laplacian, g.vertices);
  normal_grad(canonical, avatar.faces, scale * w.reg * w.normal, g.vertices);
  color_grad(avatar.faces, scale * w.reg * w.color, g.colors);
  require_finite(g.vertices, "articulate backward");
  return ev;
}

double FdReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& g : groups) m = std::max(m, g.max_rel_error);
  return m;
}

const FdGroupReport* FdReport::find(ParamGroup group) const {
  for (const auto& g : groups) {
    if (g.group == group) return &g;
  }
  return nullptr;
}

FdReport fd_check(const Avatar& avatar, const Networks& nets, const FrameObservation& obs,
                  const EvalOptions& options, std::span<const ParamGroup> groups,
                  const FdCheckOptions& fd) {
  if (!(fd.step > 0.0) || !std::isfinite(fd.step)) {
    throw ArgumentError("fd_check: step must be positive and finite");
  }
  Evaluation base = evaluate(avatar, nets, obs, options, true);
  if (fd.corrupt) fd.corrupt(base.grads);

  std::mt19937_64 rng(fd.seed);
  FdReport report;
  for (ParamGroup group : groups) {
    FdGroupReport gr{group};
    const std::vector<double> analytic = base.grads.flatten(group);
    std::vector<std::size_t> entries(analytic.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (fd.max_entries_per_group > 0 && entries.size() > fd.max_entries_per_group) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(fd.max_entries_per_group);
      std::sort(entries.begin(), entries.end());
    }

    auto loss_at = [&](std::size_t e, double delta) {
      if (group == ParamGroup::pose_correction) {
        EvalOptions o = options;
        if (o.correction_offset.empty()) o.correction_offset.assign(avatar.rig.joint_count(), Vec3::Zero());
        o.correction_offset[e / 3][static_cast<int>(e % 3)] += delta;
        return evaluate(avatar, nets, obs, o, false).loss.total;
      }
      Avatar a = avatar;
      Networks n = nets;
      std::vector<double> values = get_params(group, a, n);
      values[e] += delta;
      set_params(group, values, a, n);
      return evaluate(a, n, obs, options, false).loss.total;
    };

    for (std::size_t e : entries) {
      // Central difference, retried with smaller steps while the four one-sided
      // slopes around the point show a kink or jump (ReLU boundary, visibility
      // change): there the loss is not differentiable at scale h.
      double numeric = 0.0;
      double h = fd.step;
      for (int attempt = 0; attempt <= fd.max_refinements; ++attempt, h *= 0.1) {
        const double lm2 = loss_at(e, -2.0 * h), lm1 = loss_at(e, -h);
        const double lp1 = loss_at(e, h), lp2 = loss_at(e, 2.0 * h);
        numeric = (lp1 - lm1) / (2.0 * h);
        const double s1 = (lm1 - lm2) / h, s2 = (base.loss.total - lm1) / h;
        const double s3 = (lp1 - base.loss.total) / h, s4 = (lp2 - lp1) / h;
        const double d1 = s2 - s1, d2 = s3 - s2, d3 = s4 - s3;
        const double scale = std::max({std::abs(s2), std::abs(s3), 1e-6});
        const double roundoff = 64.0 * std::numeric_limits<double>::epsilon() *
                                std::max(1.0, std::abs(base.loss.total)) / h;
        if (std::max(std::abs(d2 - d1), std::abs(d3 - d2)) <=
            fd.smoothness_tolerance * scale + roundoff) {
          break;
        }
        if (attempt < fd.max_refinements) ++gr.refined;
      }
      const double a = analytic[e];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), 1e-6});
      gr.max_rel_error = std::max(gr.max_rel_error, rel);
      gr.max_abs_error = std::max(gr.max_abs_error, abs_err);
      ++gr.checked;
    }
    report.groups.push_back(gr);
  }
  return report;
}

}  // namespace gom
