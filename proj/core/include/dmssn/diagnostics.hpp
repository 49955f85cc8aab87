#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dmssn/hsi_data.hpp"
#include "dmssn/tensor.hpp"

namespace dmssn {

struct EntropyResult {
  double bits = 0.0;
  bool degenerate = false;  // constant input
};

/// Base-2 Shannon entropy of a `bins`-bin histogram spanning [min, max].
EntropyResult information_entropy(const Tensor& x, int bins = 256);

struct CorrelationResult {
  double scc = 0.0;
  int skipped_bands = 0;     // zero-variance original bands
  int skipped_channels = 0;  // zero-variance encoded channels
};

/// For every original band, the largest |Pearson r| against any encoded
/// channel (both taken as profiles over pixels); averaged over bands.
CorrelationResult spectral_correlation(const Tensor& encoded, const HyperCube& original);

struct ReconstructionError {
  double mse = 0.0;
  double mae = 0.0;
};

ReconstructionError reconstruction_error(const Tensor& d, const Tensor& i);

struct EncodingDiagnostics {
  std::string name;
  double ie = 0.0;
  double scc = 0.0;
  double recon_mse = 0.0;
  double recon_mae = 0.0;
  std::size_t param_count = 0;
  double throughput = 0.0;  // images per second

  std::string to_json() const;
};

/// Column order: Speed #Param IE SCC MSE MAE.
std::string diagnostics_table(const std::vector<EncodingDiagnostics>& rows);

/// Calls `fn` once to warm up, then `runs` more times; returns images per
/// second from the median wall time.
double measure_throughput(const std::function<void()>& fn, int runs = 10);

}  // namespace dmssn
