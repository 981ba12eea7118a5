#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gom/so3.hpp"

namespace gom {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  bool operator==(const DenseLayer& o) const {
    return weight.rows() == o.weight.rows() && weight.cols() == o.weight.cols() &&
           bias.size() == o.bias.size() && weight == o.weight && bias == o.bias;
  }
};

struct MlpTape {
  std::vector<Eigen::MatrixXd> inputs;       // input to each layer
  std::vector<Eigen::MatrixXd> activations;  // pre-activation output of each layer
};

/// Fully connected network with ReLU hidden layers and a linear output layer.
/// Samples are stored as matrix columns.
class Mlp {
 public:
  std::vector<DenseLayer> layers;

  /// `layer_count` linear layers: input -> width -> ... -> width -> output.
  /// Hidden layers use Kaiming-uniform init; the output layer is zeroed when
  /// `zero_output` is set so the network starts as the zero map.
  static Mlp create(int input, int width, int layer_count, int output, std::uint64_t seed,
                    bool zero_output = true);

  bool empty() const { return layers.empty(); }
  int input_dim() const { return empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
  int output_dim() const { return empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }
  int width() const;
  std::size_t parameter_count() const;

  /// Same shapes, all zeros. Used as a gradient accumulator.
  Mlp zeros_like() const;

  void copy_to(std::span<double> out) const;
  void copy_from(std::span<const double> in);

  /// Throws ArgumentError unless the shapes match the given architecture.
  void require_architecture(int input, int width, int layer_count, int output,
                            const char* name) const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, MlpTape& tape) const;

  /// Accumulates parameter gradients into `grad` and returns d(loss)/d(input).
  Eigen::MatrixXd backward(const MlpTape& tape, const Eigen::MatrixXd& grad_out, Mlp& grad) const;

  bool operator==(const Mlp&) const = default;
};

/// Sinusoidal encoding: [x?, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^{L-1} pi x), cos(...)].
/// `window` in [0, L] masks frequency k with a Hann ramp
/// 0.5 * (1 - cos(pi * clamp(window - k, 0, 1))); infinity leaves all bands on.
struct EncodingConfig {
  int frequencies = 6;
  bool include_input = true;
  double window = std::numeric_limits<double>::infinity();

  int output_dim() const { return (include_input ? 3 : 0) + 6 * frequencies; }
  double band_weight(int k) const;
};

Eigen::VectorXd pos_encode(const Vec3& x, const EncodingConfig& cfg);

/// Writes cfg.output_dim() values.
void pos_encode_into(const Vec3& x, const EncodingConfig& cfg, double* out);

/// Gradient w.r.t. x given the gradient w.r.t. the encoding.
Vec3 pos_encode_vjp(const Vec3& x, const EncodingConfig& cfg, const double* grad);

}  // namespace gom
