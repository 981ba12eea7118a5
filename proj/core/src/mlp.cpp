#include "gom/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "gom/error.hpp"

namespace gom {

Mlp Mlp::create(int input, int width, int layer_count, int output, std::uint64_t seed,
                bool zero_output) {
  if (input <= 0 || width <= 0 || output <= 0 || layer_count < 1) {
    throw ArgumentError("Mlp::create: dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  Mlp net;
  for (int l = 0; l < layer_count; ++l) {
    const int in = (l == 0) ? input : width;
    const int out = (l == layer_count - 1) ? output : width;
    DenseLayer layer;
    layer.weight = Eigen::MatrixXd::Zero(out, in);
    layer.bias = Eigen::VectorXd::Zero(out);
    const bool last = (l == layer_count - 1);
    if (!(last && zero_output)) {
      const double bound = std::sqrt(6.0 / in);
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (int c = 0; c < in; ++c) {
        for (int r = 0; r < out; ++r) layer.weight(r, c) = dist(rng);
      }
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

int Mlp::width() const {
  return layers.size() > 1 ? static_cast<int>(layers.front().weight.rows()) : 0;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

Mlp Mlp::zeros_like() const {
  Mlp z;
  for (const auto& l : layers) {
    z.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  }
  return z;
}

void Mlp::copy_to(std::span<double> out) const {
  if (out.size() != parameter_count()) throw ArgumentError("Mlp::copy_to: size mismatch");
  std::size_t o = 0;
  for (const auto& l : layers) {
    std::copy_n(l.weight.data(), l.weight.size(), out.data() + o);
    o += l.weight.size();
    std::copy_n(l.bias.data(), l.bias.size(), out.data() + o);
    o += l.bias.size();
  }
}

void Mlp::copy_from(std::span<const double> in) {
  if (in.size() != parameter_count()) throw ArgumentError("Mlp::copy_from: size mismatch");
  std::size_t o = 0;
  for (auto& l : layers) {
    std::copy_n(in.data() + o, l.weight.size(), l.weight.data());
    o += l.weight.size();
    std::copy_n(in.data() + o, l.bias.size(), l.bias.data());
    o += l.bias.size();
  }
}

void Mlp::require_architecture(int input, int width, int layer_count, int output,
                               const char* name) const {
  auto fail = [&](const std::string& why) {
    throw ArgumentError(std::string(name) + ": expected " + std::to_string(layer_count) +
                        " layers (" + std::to_string(input) + " -> " + std::to_string(width) +
                        " -> " + std::to_string(output) + "), " + why);
  };
  if (layers.size() != static_cast<std::size_t>(layer_count)) {
    fail("got " + std::to_string(layers.size()) + " layers");
  }
  for (int l = 0; l < layer_count; ++l) {
    const int in = (l == 0) ? input : width;
    const int out = (l == layer_count - 1) ? output : width;
    const auto& layer = layers[l];
    if (layer.weight.rows() != out || layer.weight.cols() != in || layer.bias.size() != out) {
      fail("layer " + std::to_string(l) + " is " + std::to_string(layer.weight.rows()) + "x" +
           std::to_string(layer.weight.cols()));
    }
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (h.rows() != layers[l].weight.cols()) throw ArgumentError("Mlp::forward: input dimension");
    Eigen::MatrixXd z = layers[l].weight * h;
    z.colwise() += layers[l].bias;
    if (l + 1 < layers.size()) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, MlpTape& tape) const {
  tape.inputs.clear();
  tape.activations.clear();
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (h.rows() != layers[l].weight.cols()) throw ArgumentError("Mlp::forward: input dimension");
    tape.inputs.push_back(h);
    Eigen::MatrixXd z = layers[l].weight * h;
    z.colwise() += layers[l].bias;
    tape.activations.push_back(z);
    h = (l + 1 < layers.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return h;
}

Eigen::MatrixXd Mlp::backward(const MlpTape& tape, const Eigen::MatrixXd& grad_out,
                              Mlp& grad) const {
  Eigen::MatrixXd g = grad_out;
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (l + 1 < layers.size()) {
      g = g.cwiseProduct((tape.activations[l].array() > 0.0).cast<double>().matrix());
    }
    grad.layers[l].weight.noalias() += g * tape.inputs[l].transpose();
    grad.layers[l].bias += g.rowwise().sum();
    g = layers[l].weight.transpose() * g;
  }
  return g;
}

double EncodingConfig::band_weight(int k) const {
  if (std::isinf(window)) return 1.0;
  const double t = std::clamp(window - k, 0.0, 1.0);
  return 0.5 * (1.0 - std::cos(std::numbers::pi * t));
}

Eigen::VectorXd pos_encode(const Vec3& x, const EncodingConfig& cfg) {
  Eigen::VectorXd out(cfg.output_dim());
  pos_encode_into(x, cfg, out.data());
  return out;
}

void pos_encode_into(const Vec3& x, const EncodingConfig& cfg, double* out) {
  int o = 0;
  if (cfg.include_input) {
    for (int i = 0; i < 3; ++i) out[o++] = x[i];
  }
  for (int k = 0; k < cfg.frequencies; ++k) {
    const double w = cfg.band_weight(k);
    const double freq = std::ldexp(std::numbers::pi, k);
    for (int i = 0; i < 3; ++i) out[o + i] = w * std::sin(freq * x[i]);
    for (int i = 0; i < 3; ++i) out[o + 3 + i] = w * std::cos(freq * x[i]);
    o += 6;
  }
}

Vec3 pos_encode_vjp(const Vec3& x, const EncodingConfig& cfg, const double* grad) {
  Vec3 g = Vec3::Zero();
  int o = 0;
  if (cfg.include_input) {
    for (int i = 0; i < 3; ++i) g[i] += grad[o++];
  }
  for (int k = 0; k < cfg.frequencies; ++k) {
    const double w = cfg.band_weight(k);
    const double freq = std::ldexp(std::numbers::pi, k);
    for (int i = 0; i < 3; ++i) {
      g[i] += w * freq * (grad[o + i] * std::cos(freq * x[i]) - grad[o + 3 + i] * std::sin(freq * x[i]));
    }
    o += 6;
  }
  return g;
}

}  // namespace gom
