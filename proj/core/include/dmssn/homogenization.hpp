#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmssn/hsi_data.hpp"
#include "dmssn/tensor.hpp"

namespace dmssn {

/// Component count used when the caller does not choose one.
inline constexpr int kDefaultGmmComponents = 50;

struct GmmOptions {
  int max_iter = 100;
  double tol = 1e-7;  // on the mean per-sample log-likelihood
  double variance_floor = 1e-6;
  std::uint64_t seed = 0;
  std::size_t max_samples = 20000;  // EM runs on a uniform subsample of at most this many pixels
  int init_restarts = 4;            // k-means++ seedings; the lowest-inertia one starts EM
  int kmeans_iters = 10;
};

/// Diagonal-covariance Gaussian mixture over spectra.
struct GmmModel {
  struct Reseed {
    int iteration;
    int component;
  };

  std::vector<double> weights;                 // M, sums to 1
  std::vector<std::vector<double>> means;      // M x C
  std::vector<std::vector<double>> variances;  // M x C, each >= variance floor
  /// Mean per-sample log-likelihood evaluated at every E-step, ending with
  /// the final parameters. Nondecreasing between reseed events.
  std::vector<double> log_likelihood_trace;
  std::vector<Reseed> reseeds;
  int iterations = 0;
  bool converged = false;

  int components() const { return static_cast<int>(weights.size()); }
  int dims() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }

  /// log(alpha_k) + log N(x | mu_k, diag(var_k)) for every component.
  std::vector<double> log_joint(std::span<const double> x) const;
  /// Posterior responsibilities p(k | x); sums to 1.
  std::vector<double> responsibilities(std::span<const double> x) const;
  void validate() const;

  std::string to_json() const;
  static GmmModel from_json(const std::string& text);
};

/// Flattens a cube into an (H*W) x C sample matrix.
Tensor pixel_matrix(const HyperCube& cube);

/// EM fit from a greedy k-means++ initialization. `pixels` is N x C.
/// A component that loses all responsibility is re-seeded at the sample the
/// model explains worst, and the event is recorded in the model.
GmmModel fit_gmm(const Tensor& pixels, std::optional<int> components, const GmmOptions& opts = {});

struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<int> labels;

  int at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// Most probable component per pixel; ties go to the lowest index.
LabelMap assign_materials(const HyperCube& cube, const GmmModel& model);

/// Replaces every pixel with the mean spectrum of all pixels sharing its label.
HyperCube homogenize(const HyperCube& cube, const LabelMap& labels);

/// fit_gmm + assign_materials + homogenize on one cube.
HyperCube homogenize_cube(const HyperCube& cube, int components, const GmmOptions& opts);

struct PcaResult {
  Tensor scores;                                  // H x W x k projections
  Tensor components;                              // k x C, unit rows, descending variance
  std::vector<double> mean;                       // C
  std::vector<double> eigenvalues;                // all C, descending
  std::vector<double> explained_variance_ratio;  // first k
};

/// Projects mean-centred spectra onto the top-k principal axes of their
/// covariance. Each axis is sign-normalized so its largest-magnitude entry
/// is positive.
PcaResult pca_reduce(const HyperCube& cube, int k);
/// scores * components (+ mean when `add_mean`).
Tensor pca_reconstruct(const PcaResult& pca, bool add_mean = true);

}  // namespace dmssn
