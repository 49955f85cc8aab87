#pragma once

#include <random>
#include <string>

#include "dmssn/autograd.hpp"
#include "dmssn/ops.hpp"

namespace dmssn::nn {

using Rng = std::mt19937_64;

/// Xavier-uniform initialized tensor of the given shape.
Tensor xavier(std::vector<int> shape, int fan_in, int fan_out, Rng& rng);

/// Per-position linear layer (a 1x1 convolution).
struct Linear {
  Var weight;  // [out, in]
  Var bias;    // [out]

  Linear() = default;
  Linear(int in, int out, Rng& rng);

  Var operator()(const Var& x) const { return ops::linear(x, weight, bias); }
  int in() const { return weight.value().dim(1); }
  int out() const { return weight.value().dim(0); }
  void collect(const std::string& prefix, NamedParams& out) const;
  void zero();
};

struct Conv2d {
  Var weight;  // [out, k, k, in]
  Var bias;    // [out]
  int stride = 1;
  int padding = 0;

  Conv2d() = default;
  Conv2d(int in, int out, int kernel, int stride, int padding, Rng& rng);

  Var operator()(const Var& x) const { return ops::conv2d(x, weight, bias, stride, padding); }
  int kernel() const { return weight.value().dim(1); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

/// One k x k kernel shared by every channel, "same" padding.
struct SharedSpatialConv {
  Var kernel;  // [k, k]
  Var bias;    // [1]

  SharedSpatialConv() = default;
  SharedSpatialConv(int k, Rng& rng);

  Var operator()(const Var& x) const {
    return ops::shared_spatial_conv(x, kernel, bias, kernel.value().dim(0) / 2);
  }
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct LayerNorm {
  Var gamma;
  Var beta;

  LayerNorm() = default;
  explicit LayerNorm(int channels);

  Var operator()(const Var& x) const { return ops::layer_norm(x, gamma, beta); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

}  // namespace dmssn::nn
