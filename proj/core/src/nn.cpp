#include "dmssn/nn.hpp"

#include <cmath>

namespace dmssn::nn {

Tensor xavier(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Linear::Linear(int in, int out, Rng& rng)
    : weight(parameter(xavier({out, in}, in, out, rng))), bias(parameter(Tensor({out}, 0.0))) {}

void Linear::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

void Linear::zero() {
  weight.mutable_value().fill(0.0);
  bias.mutable_value().fill(0.0);
}

Conv2d::Conv2d(int in, int out, int kernel, int stride_, int padding_, Rng& rng)
    : weight(parameter(xavier({out, kernel, kernel, in}, in * kernel * kernel, out * kernel * kernel, rng))),
      bias(parameter(Tensor({out}, 0.0))),
      stride(stride_),
      padding(padding_) {}

void Conv2d::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

SharedSpatialConv::SharedSpatialConv(int k, Rng& rng)
    : kernel(parameter(xavier({k, k}, k * k, k * k, rng))), bias(parameter(Tensor({1}, 0.0))) {}

void SharedSpatialConv::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".kernel", kernel);
  out.emplace_back(prefix + ".bias", bias);
}

LayerNorm::LayerNorm(int channels)
    : gamma(parameter(Tensor({channels}, 1.0))), beta(parameter(Tensor({channels}, 0.0))) {}

void LayerNorm::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

}  // namespace dmssn::nn
