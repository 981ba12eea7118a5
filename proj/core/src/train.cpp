#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "gom/error.hpp"
#include "gom/fit.hpp"

namespace gom {

namespace {

std::size_t slot(ParamGroup group) { return static_cast<std::size_t>(group); }

void check_config(const TrainConfig& cfg) {
  if (cfg.total_iterations < 0) throw ArgumentError("train: total iterations must be >= 0");
  if (!(cfg.lr_main > 0.0) || !(cfg.lr_refiner > 0.0)) {
    throw ArgumentError("train: learning rates must be > 0");
  }
  for (const auto& lr : cfg.lr_override) {
    if (lr && !(*lr > 0.0)) throw ArgumentError("train: learning rates must be > 0");
  }
  if (cfg.refiner_start < 0 || cfg.deformer_start < 0) {
    throw ArgumentError("train: kick-off iterations must be >= 0");
  }
  // A zero-iteration run is a no-op and keeps the default schedule usable.
  if (cfg.total_iterations > 0 &&
      (cfg.refiner_start > cfg.total_iterations || cfg.deformer_start > cfg.total_iterations)) {
    throw ArgumentError("train: kick-off iterations must not exceed the total");
  }
}

bool output_is_zero(const Mlp& m) {
  if (m.empty()) return true;
  const DenseLayer& last = m.layers.back();
  return last.weight.isZero(0.0) && last.bias.isZero(0.0);
}

}  // namespace

double TrainConfig::learning_rate(ParamGroup group) const {
  if (slot(group) < lr_override.size() && lr_override[slot(group)]) return *lr_override[slot(group)];
  return group == ParamGroup::refiner ? lr_refiner : lr_main;
}

bool TrainConfig::is_frozen(ParamGroup group) const {
  return slot(group) < frozen.size() && frozen[slot(group)];
}

std::string to_json_line(const TrainLogRecord& r) {
  nlohmann::json j;
  j["iteration"] = r.iteration;
  j["frame"] = r.frame;
  j["image"] = r.loss.image;
  j["lpips"] = r.loss.perceptual;
  j["mask"] = r.loss.mask;
  j["mesh_mask"] = r.loss.mesh_mask;
  j["laplacian"] = r.loss.laplacian;
  j["normal"] = r.loss.normal;
  j["color"] = r.loss.color;
  j["reg"] = r.loss.reg;
  j["total"] = r.loss.total;
  j["wall_seconds"] = r.wall_seconds;
  return j.dump();
}

TrainResult train(std::span<const FrameObservation> frames, const Avatar& initial,
                  const Networks& initial_nets, const TrainConfig& cfg,
                  const std::function<void(const TrainLogRecord&)>& on_record,
                  const PerceptualLoss* perceptual) {
  check_config(cfg);
  if (frames.empty()) throw ArgumentError("train: at least one frame is required");

  TrainResult result{initial, initial_nets, {}};
  Avatar& avatar = result.avatar;
  Networks& nets = result.nets;
  if (cfg.total_iterations == 0) return result;

  std::array<AdamState, kTrainableGroups.size()> adam{};
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  const int anneal = cfg.anneal_iterations >= 0
                         ? cfg.anneal_iterations
                         : std::max(1, cfg.total_iterations / 10);
  const double full_window = nets.deformer_encoding.frequencies;

  EvalOptions eo;
  eo.render = cfg.render;
  eo.render.refine = cfg.refine;
  eo.weights = cfg.weights;
  eo.perceptual = perceptual;

  const auto t0 = std::chrono::steady_clock::now();
  for (int it = 0; it < cfg.total_iterations; ++it) {
    if (it == cfg.subdivide_at) {
      avatar = subdivide(avatar);
      for (ParamGroup g : {ParamGroup::vertices, ParamGroup::rotations, ParamGroup::log_scales,
                           ParamGroup::colors}) {
        adam[slot(g)] = AdamState{};
      }
    }
    if (cursor == order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const std::size_t frame = order[cursor++];

    const bool deformer_on = it >= cfg.deformer_start && !cfg.is_frozen(ParamGroup::deformer);
    const bool refiner_on =
        cfg.refine && it >= cfg.refiner_start && !cfg.is_frozen(ParamGroup::refiner);
    if (anneal > 0) {
      const double progress = std::clamp(static_cast<double>(it - cfg.deformer_start) / anneal, 0.0, 1.0);
      nets.deformer_encoding.window = full_window * progress;
    }

    // A frozen deformer whose output layer is exactly zero contributes nothing;
    // skipping it saves a full per-vertex network pass.
    Networks active;
    const Networks* used = &nets;
    if (!deformer_on && output_is_zero(nets.deformer) && !nets.deformer.empty()) {
      active.refiner = nets.refiner;
      active.shading = nets.shading;
      active.deformer_encoding = nets.deformer_encoding;
      active.shading_encoding = nets.shading_encoding;
      used = &active;
    }

    Evaluation ev;
    try {
      ev = evaluate(avatar, *used, frames[frame], eo, true);
    } catch (const NumericError& e) {
      throw NumericError(e.stage(), std::string("non-finite value at iteration ") +
                                        std::to_string(it) + " (" + e.what() + ")");
    }

    auto step_vec3 = [&](ParamGroup g, const std::vector<Vec3>& grad) {
      std::vector<double> p = get_params(g, avatar, nets);
      std::vector<double> gr;
      gr.reserve(3 * grad.size());
      for (const Vec3& x : grad) gr.insert(gr.end(), {x.x(), x.y(), x.z()});
      adam_step(p, gr, adam[slot(g)], cfg.learning_rate(g), cfg.adam);
      set_params(g, p, avatar, nets);
    };
    auto step_mlp = [&](ParamGroup g, Mlp& params, const Mlp& grad) {
      if (params.empty()) return;
      std::vector<double> p(params.parameter_count()), gr(grad.parameter_count());
      params.copy_to(p);
      grad.copy_to(gr);
      adam_step(p, gr, adam[slot(g)], cfg.learning_rate(g), cfg.adam);
      params.copy_from(p);
    };

    if (!cfg.is_frozen(ParamGroup::vertices)) step_vec3(ParamGroup::vertices, ev.grads.vertices);
    if (!cfg.is_frozen(ParamGroup::rotations)) step_vec3(ParamGroup::rotations, ev.grads.rotations);
    if (!cfg.is_frozen(ParamGroup::log_scales)) step_vec3(ParamGroup::log_scales, ev.grads.log_scales);
    if (!cfg.is_frozen(ParamGroup::colors)) step_vec3(ParamGroup::colors, ev.grads.colors);
    if (!cfg.is_frozen(ParamGroup::shading)) step_mlp(ParamGroup::shading, nets.shading, ev.grads.shading);
    if (deformer_on) step_mlp(ParamGroup::deformer, nets.deformer, ev.grads.deformer);
    if (refiner_on) step_mlp(ParamGroup::refiner, nets.refiner, ev.grads.refiner);

    TrainLogRecord rec;
    rec.iteration = it;
    rec.frame = frame;
    rec.loss = ev.loss;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(rec);
    if (on_record) on_record(rec);
  }
  nets.deformer_encoding.window = std::numeric_limits<double>::infinity();
  return result;
}

}  // namespace gom
