#include "dmssn/diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>
#include <vector>

#include "dmssn/error.hpp"

namespace dmssn {

EntropyResult information_entropy(const Tensor& x, int bins) {
  if (bins < 2) throw ConfigError("information_entropy: bins must be >= 2");
  if (x.empty()) throw ShapeError("information_entropy: empty input");
  if (!x.all_finite()) throw DataError("information_entropy: non-finite value");
  const auto [lo, hi] = std::minmax_element(x.values().begin(), x.values().end());
  if (*lo == *hi) return {0.0, true};
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  const double span = *hi - *lo;
  for (double v : x.values()) {
    auto b = static_cast<int>((v - *lo) / span * bins);
    ++counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))];
  }
  double h = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return {h, false};
}

CorrelationResult spectral_correlation(const Tensor& encoded, const HyperCube& original) {
  require_map(encoded, "spectral_correlation");
  if (encoded.height() != original.height || encoded.width() != original.width) {
    throw ShapeError("spectral_correlation: encoded and original maps differ in spatial size");
  }
  const std::size_t n = encoded.pixels();
  const int ce = encoded.channels(), co = original.bands;

  // Standardized profiles; empty when a profile has zero variance.
  auto standardize = [n](auto get) {
    std::vector<double> v(n);
    double mean = 0.0;
    for (std::size_t p = 0; p < n; ++p) mean += v[p] = get(p);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double& x : v) {
      x -= mean;
      var += x * x;
    }
    if (var <= 0.0) return std::vector<double>{};
    const double inv = 1.0 / std::sqrt(var);
    for (double& x : v) x *= inv;
    return v;
  };

  CorrelationResult r;
  std::vector<std::vector<double>> enc;
  for (int k = 0; k < ce; ++k) {
    auto v = standardize([&](std::size_t p) { return encoded[p * static_cast<std::size_t>(ce) + static_cast<std::size_t>(k)]; });
    if (v.empty()) ++r.skipped_channels;
    else enc.push_back(std::move(v));
  }
  int used = 0;
  for (int b = 0; b < co; ++b) {
    auto v = standardize([&](std::size_t p) {
      return static_cast<double>(original.values[p * static_cast<std::size_t>(co) + static_cast<std::size_t>(b)]);
    });
    if (v.empty()) {
      ++r.skipped_bands;
      continue;
    }
    double best = 0.0;
    for (const auto& e : enc) {
      double dot = 0.0;
      for (std::size_t p = 0; p < n; ++p) dot += v[p] * e[p];
      best = std::max(best, std::min(1.0, std::abs(dot)));
    }
    r.scc += best;
    ++used;
  }
  if (used > 0) r.scc /= used;
  return r;
}

ReconstructionError reconstruction_error(const Tensor& d, const Tensor& i) {
  require_same_shape(d, i, "reconstruction_error");
  if (d.empty()) throw ShapeError("reconstruction_error: empty input");
  ReconstructionError e;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double diff = d[k] - i[k];
    e.mse += diff * diff;
    e.mae += std::abs(diff);
  }
  e.mse /= static_cast<double>(d.size());
  e.mae /= static_cast<double>(d.size());
  return e;
}

std::string EncodingDiagnostics::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["speed"] = throughput;
  j["params"] = param_count;
  j["ie"] = ie;
  j["scc"] = scc;
  j["mse"] = recon_mse;
  j["mae"] = recon_mae;
  return j.dump();
}

std::string diagnostics_table(const std::vector<EncodingDiagnostics>& rows) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-20s %10s %10s %8s %8s %10s %10s\n", "Encoder", "Speed", "#Param", "IE", "SCC", "MSE",
                "MAE");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-20s %10.2f %10zu %8.4f %8.4f %10.6f %10.6f\n", r.name.c_str(), r.throughput,
                  r.param_count, r.ie, r.scc, r.recon_mse, r.recon_mae);
    os << buf;
  }
  return os.str();
}

double measure_throughput(const std::function<void()>& fn, int runs) {
  if (runs < 1) throw ConfigError("measure_throughput: runs must be >= 1");
  fn();
  std::vector<double> seconds;
  for (int i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::nth_element(seconds.begin(), seconds.begin() + runs / 2, seconds.end());
  const double median = seconds[static_cast<std::size_t>(runs / 2)];
  return median > 0 ? 1.0 / median : std::numeric_limits<double>::infinity();
}

}  // namespace dmssn
