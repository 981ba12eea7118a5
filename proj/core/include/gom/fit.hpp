#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gom/articulator.hpp"
#include "gom/camera.hpp"
#include "gom/image.hpp"
#include "gom/model.hpp"
#include "gom/render.hpp"

namespace gom {

/// Weights of the training objective
///   L = L_I + a_lpips L_lpips + a_M L_M + a_reg (L_mask + a_lap L_lap + a_normal L_normal + a_color L_color).
struct LossWeights {
  double lpips = 1.0;
  double mask = 5.0;
  double reg = 1.0;
  double laplacian = 10.0;
  double normal = 0.1;
  double color = 0.05;
};

/// Optional perceptual term (e.g. LPIPS). Returns the value and writes
/// d(value)/d(prediction) into `grad` when it is non-null.
class PerceptualLoss {
 public:
  virtual ~PerceptualLoss() = default;
  virtual double evaluate(const Image& prediction, const Image& target, Image* grad) const = 0;
};

struct FrameObservation {
  Image image;  // H x W x 3 in [0, 1]
  Image mask;   // H x W x 1 in [0, 1]
  Pose pose;    // estimated pose
  Camera camera;
};

struct LossBreakdown {
  double image = 0.0;      // L_I
  double perceptual = 0.0;  // L_lpips
  double mask = 0.0;       // L_M
  double mesh_mask = 0.0;  // L_mask
  double laplacian = 0.0;  // L_lap
  double normal = 0.0;     // L_normal
  double color = 0.0;      // L_color
  double reg = 0.0;        // L_reg
  double total = 0.0;
};

/// `render` must carry the composite image, mask, and mesh mask.
LossBreakdown loss_terms(const RenderOutput& render, const FrameObservation& obs,
                         const Avatar& avatar, const LossWeights& weights,
                         const PerceptualLoss* perceptual = nullptr);

/// Mean squared norm of the uniform Laplacian coordinates over interior vertices.
double laplacian_loss(std::span<const Vec3> positions, std::span<const Face> faces);
/// Mean of (1 - cos) between normals of edge-adjacent faces.
double normal_consistency_loss(std::span<const Vec3> positions, std::span<const Face> faces);
/// Mean absolute albedo difference between edge-adjacent faces.
double color_smoothness_loss(std::span<const Face> faces);

enum class ParamGroup {
  vertices,
  rotations,
  log_scales,
  colors,
  deformer,
  refiner,
  shading,
  pose_correction,  // refiner output; a probe for the gradient gate, not optimized
};
inline constexpr std::array kTrainableGroups{
    ParamGroup::vertices, ParamGroup::rotations, ParamGroup::log_scales, ParamGroup::colors,
    ParamGroup::deformer, ParamGroup::refiner,   ParamGroup::shading};

std::string_view to_string(ParamGroup group);
std::optional<ParamGroup> parse_param_group(std::string_view name);

struct Gradients {
  std::vector<Vec3> vertices;
  std::vector<Vec3> rotations;
  std::vector<Vec3> log_scales;
  std::vector<Vec3> colors;
  Mlp deformer;
  Mlp refiner;
  Mlp shading;
  std::vector<Vec3> pose_correction;

  static Gradients zeros(const Avatar& avatar, const Networks& nets);
  std::vector<double> flatten(ParamGroup group) const;
  void scale(double factor);
};

/// Parameter values of a group as a flat vector, and the inverse.
std::vector<double> get_params(ParamGroup group, const Avatar& avatar, const Networks& nets);
void set_params(ParamGroup group, std::span<const double> values, Avatar& avatar, Networks& nets);

struct EvalOptions {
  RenderOptions render{};
  LossWeights weights{};
  const PerceptualLoss* perceptual = nullptr;
  std::vector<Vec3> correction_offset;  // added to the refiner output
  double loss_scale = 1.0;
};

struct Evaluation {
  LossBreakdown loss;
  Gradients grads;
  RenderOutput render;
};

/// Renders `obs`'s pose and camera, evaluates the objective, and (optionally)
/// back-propagates to every trainable. Throws NumericError naming the stage
/// if a non-finite value appears.
Evaluation evaluate(const Avatar& avatar, const Networks& nets, const FrameObservation& obs,
                    const EvalOptions& options, bool with_gradients = true);

struct FdCheckOptions {
  double step = 1e-5;
  std::size_t max_entries_per_group = 48;  // sampled entries; 0 checks all
  std::uint64_t seed = 7;
  /// Entries whose one-sided slopes disagree (a kink or jump within 2 steps)
  /// are retried with the step divided by 10, at most this many times.
  int max_refinements = 3;
  double smoothness_tolerance = 1e-4;
  /// Test hook applied to the analytic gradients before comparison.
  std::function<void(Gradients&)> corrupt;
};

struct FdGroupReport {
  ParamGroup group;
  std::size_t checked = 0;
  std::size_t refined = 0;  // step reductions caused by non-smooth points
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct FdReport {
  std::vector<FdGroupReport> groups;
  double max_rel_error() const;
  const FdGroupReport* find(ParamGroup group) const;
};

/// Central-difference check of evaluate()'s analytic gradients (loss-only
/// evaluations, so the oracle shares no code with the backward pass).
/// Relative error is |a - f| / max(|a|, |f|, 1e-6).
FdReport fd_check(const Avatar& avatar, const Networks& nets, const FrameObservation& obs,
                  const EvalOptions& options, std::span<const ParamGroup> groups,
                  const FdCheckOptions& fd = {});

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update. A default-constructed state is sized on first use.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamConfig& cfg = {});

struct TrainConfig {
  int total_iterations = 3000;
  double lr_main = 5e-4;
  double lr_refiner = 5e-5;
  /// Per-group learning rates overriding lr_main / lr_refiner when set.
  std::array<std::optional<double>, kTrainableGroups.size()> lr_override{};
  int refiner_start = 1000;
  int deformer_start = 1500;
  int subdivide_at = 500;  // negative disables subdivision
  /// Iterations over which the deformer's frequency window opens after its
  /// kick-off. Negative selects 10% of total_iterations.
  int anneal_iterations = -1;
  std::array<bool, kTrainableGroups.size()> frozen{};
  bool refine = true;
  LossWeights weights{};
  RenderOptions render{};
  std::uint64_t seed = 0;
  AdamConfig adam{};

  /// The full 300K-iteration schedule divided by 100.
  static TrainConfig desk_scale() { return {}; }
  double learning_rate(ParamGroup group) const;
  bool is_frozen(ParamGroup group) const;
};

struct TrainLogRecord {
  int iteration = 0;
  std::size_t frame = 0;
  LossBreakdown loss;
  double wall_seconds = 0.0;
};

/// One line-delimited JSON record.
std::string to_json_line(const TrainLogRecord& record);

struct TrainResult {
  Avatar avatar;
  Networks nets;
  std::vector<TrainLogRecord> log;
};

TrainResult train(std::span<const FrameObservation> frames, const Avatar& initial,
                  const Networks& initial_nets, const TrainConfig& cfg,
                  const std::function<void(const TrainLogRecord&)>& on_record = {},
                  const PerceptualLoss* perceptual = nullptr);

}  // namespace gom
