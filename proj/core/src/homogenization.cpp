#include "dmssn/homogenization.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>
#include <random>

namespace dmssn {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::span<const double> row(const Tensor& t, std::size_t i) {
  const auto c = static_cast<std::size_t>(t.dim(1));
  return {t.data() + i * c, c};
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

struct KMeansInit {
  std::vector<std::vector<double>> centres;
  std::vector<int> assignment;
  double inertia = 0.0;
};

// Greedy k-means++ seeding followed by a few Lloyd iterations.
KMeansInit kmeans_init(const Tensor& x, int m, int lloyd_iters, std::mt19937_64& rng) {
  const std::size_t n = static_cast<std::size_t>(x.dim(0));
  const int trials = 2 + static_cast<int>(std::log(static_cast<double>(m)));
  std::vector<std::size_t> chosen{std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)};
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(row(x, i), row(x, chosen[0]));

  while (static_cast<int>(chosen.size()) < m) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t best = 0;
    double best_potential = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
      std::size_t cand;
      if (total > 0) {
        double u = std::uniform_real_distribution<double>(0.0, total)(rng);
        cand = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          u -= d2[i];
          if (u <= 0) {
            cand = i;
            break;
          }
        }
      } else {
        cand = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      }
      double potential = 0.0;
      for (std::size_t i = 0; i < n; ++i) potential += std::min(d2[i], squared_distance(row(x, i), row(x, cand)));
      if (potential < best_potential) {
        best_potential = potential;
        best = cand;
      }
    }
    chosen.push_back(best);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(row(x, i), row(x, best)));
  }

  KMeansInit init;
  for (std::size_t idx : chosen) {
    auto r = row(x, idx);
    init.centres.emplace_back(r.begin(), r.end());
  }
  const std::size_t c = static_cast<std::size_t>(x.dim(1));
  init.assignment.assign(n, 0);
  for (int iter = 0; iter <= lloyd_iters; ++iter) {
    init.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < m; ++k) {
        const double d = squared_distance(row(x, i), init.centres[static_cast<std::size_t>(k)]);
        if (d < best_d) {
          best_d = d;
          init.assignment[i] = k;
        }
      }
      init.inertia += best_d;
    }
    if (iter == lloyd_iters) break;
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(m), std::vector<double>(c, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(m), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(init.assignment[i]);
      ++counts[k];
      auto r = row(x, i);
      for (std::size_t d = 0; d < c; ++d) sums[k][d] += r[d];
    }
    for (std::size_t k = 0; k < static_cast<std::size_t>(m); ++k) {
      if (counts[k] == 0) continue;  // keep the old centre
      for (std::size_t d = 0; d < c; ++d) init.centres[k][d] = sums[k][d] / static_cast<double>(counts[k]);
    }
  }
  return init;
}

}  // namespace

namespace {

// Per-component constants of the log density, so each evaluation costs one
// multiply-add per band.
struct LogDensity {
  std::vector<double> offset;   // log alpha_k - 0.5 (C log 2pi + sum log var)
  std::vector<double> inv_var;  // M x C, flattened
  std::size_t dims = 0;

  explicit LogDensity(const GmmModel& m) : offset(m.weights.size()), dims(static_cast<std::size_t>(m.dims())) {
    inv_var.resize(m.weights.size() * dims);
    for (std::size_t k = 0; k < m.weights.size(); ++k) {
      double s = 0.0;
      for (std::size_t d = 0; d < dims; ++d) {
        s += kLog2Pi + std::log(m.variances[k][d]);
        inv_var[k * dims + d] = 1.0 / m.variances[k][d];
      }
      offset[k] = (m.weights[k] > 0 ? std::log(m.weights[k]) : -std::numeric_limits<double>::infinity()) - 0.5 * s;
    }
  }

  void eval(const GmmModel& m, std::span<const double> x, std::vector<double>& out) const {
    out.resize(offset.size());
    for (std::size_t k = 0; k < offset.size(); ++k) {
      const double* mu = m.means[k].data();
      const double* iv = inv_var.data() + k * dims;
      double q = 0.0;
      for (std::size_t d = 0; d < dims; ++d) {
        const double diff = x[d] - mu[d];
        q += diff * diff * iv[d];
      }
      out[k] = offset[k] - 0.5 * q;
    }
  }
};

}  // namespace

std::vector<double> GmmModel::log_joint(std::span<const double> x) const {
  std::vector<double> out;
  LogDensity(*this).eval(*this, x, out);
  return out;
}

std::vector<double> GmmModel::responsibilities(std::span<const double> x) const {
  std::vector<double> lj = log_joint(x);
  const double norm = log_sum_exp(lj);
  for (double& v : lj) v = std::exp(v - norm);
  return lj;
}

void GmmModel::validate() const {
  const std::size_t m = weights.size();
  if (m == 0) throw ConfigError("GMM has no components");
  if (means.size() != m || variances.size() != m) throw ShapeError("GMM parameter arrays disagree on M");
  const std::size_t c = means.front().size();
  double total = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    if (weights[k] < 0) throw DataError("GMM weight is negative");
    total += weights[k];
    if (means[k].size() != c || variances[k].size() != c) throw ShapeError("GMM component has the wrong dimension");
    for (double v : variances[k]) {
      if (!(v > 0)) throw DataError("GMM variance must be positive");
    }
  }
  if (std::abs(total - 1.0) > 1e-9) throw DataError("GMM weights do not sum to 1");
}

std::string GmmModel::to_json() const {
  nlohmann::json j;
  j["M"] = components();
  j["alpha"] = weights;
  j["mu"] = means;
  j["var"] = variances;
  return j.dump();
}

GmmModel GmmModel::from_json(const std::string& text) {
  GmmModel m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.weights = j.at("alpha").get<std::vector<double>>();
    m.means = j.at("mu").get<std::vector<std::vector<double>>>();
    m.variances = j.at("var").get<std::vector<std::vector<double>>>();
    if (j.at("M").get<int>() != m.components()) throw ConfigError("GMM JSON: M disagrees with alpha length");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("GMM JSON: ") + e.what());
  }
  m.validate();
  return m;
}

Tensor pixel_matrix(const HyperCube& cube) {
  Tensor t({static_cast<int>(cube.pixels()), cube.bands});
  std::copy(cube.values.begin(), cube.values.end(), t.data());
  return t;
}

GmmModel fit_gmm(const Tensor& pixels, std::optional<int> components, const GmmOptions& opts) {
  if (pixels.rank() != 2) throw ShapeError("fit_gmm: pixels must be N x C");
  const int m = components.value_or(kDefaultGmmComponents);
  const std::size_t n_all = static_cast<std::size_t>(pixels.dim(0));
  const std::size_t c = static_cast<std::size_t>(pixels.dim(1));
  if (m < 1) throw ConfigError("fit_gmm: component count must be >= 1");
  if (c < 1) throw ShapeError("fit_gmm: spectra must have at least one band");
  if (n_all < static_cast<std::size_t>(m)) {
    throw DataError("fit_gmm: " + std::to_string(n_all) + " samples cannot support " + std::to_string(m) + " components");
  }
  if (!(opts.variance_floor > 0)) throw ConfigError("fit_gmm: variance floor must be positive");
  if (!pixels.all_finite()) throw DataError("fit_gmm: non-finite sample");

  std::mt19937_64 rng(opts.seed);

  // Uniform subsample without replacement.
  Tensor x = pixels;
  if (n_all > opts.max_samples && opts.max_samples >= static_cast<std::size_t>(m)) {
    std::vector<std::size_t> idx(n_all);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(opts.max_samples);
    std::sort(idx.begin(), idx.end());
    x = Tensor({static_cast<int>(idx.size()), static_cast<int>(c)});
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::copy_n(pixels.data() + idx[i] * c, c, x.data() + i * c);
    }
  }
  const std::size_t n = static_cast<std::size_t>(x.dim(0));

  std::vector<double> global_mean(c, 0.0), global_var(c, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < c; ++d) global_mean[d] += x[i * c + d];
  for (double& v : global_mean) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < c; ++d) global_var[d] += (x[i * c + d] - global_mean[d]) * (x[i * c + d] - global_mean[d]);
  for (double& v : global_var) v = std::max(v / static_cast<double>(n), opts.variance_floor);

  KMeansInit best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, opts.init_restarts); ++r) {
    KMeansInit init = kmeans_init(x, m, opts.kmeans_iters, rng);
    if (init.inertia < best.inertia) best = std::move(init);
  }

  GmmModel model;
  model.weights.assign(static_cast<std::size_t>(m), 0.0);
  model.means = best.centres;
  model.variances.assign(static_cast<std::size_t>(m), std::vector<double>(c, 0.0));
  {
    std::vector<std::size_t> counts(static_cast<std::size_t>(m), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(best.assignment[i]);
      ++counts[k];
      for (std::size_t d = 0; d < c; ++d) {
        const double diff = x[i * c + d] - model.means[k][d];
        model.variances[k][d] += diff * diff;
      }
    }
    for (std::size_t k = 0; k < static_cast<std::size_t>(m); ++k) {
      for (std::size_t d = 0; d < c; ++d) {
        model.variances[k][d] = counts[k] ? std::max(model.variances[k][d] / static_cast<double>(counts[k]), opts.variance_floor)
                                          : global_var[d];
      }
      model.weights[k] = (static_cast<double>(counts[k]) + 1e-10) / (static_cast<double>(n) + 1e-10 * m);
    }
  }

  std::vector<double> resp(n * static_cast<std::size_t>(m));
  std::vector<double> sample_ll(n);
  std::vector<double> lj;
  auto e_step = [&]() {
    const LogDensity density(model);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      density.eval(model, row(x, i), lj);
      const double ll = log_sum_exp(lj);
      sample_ll[i] = ll;
      total += ll;
      for (std::size_t k = 0; k < static_cast<std::size_t>(m); ++k) resp[i * m + k] = std::exp(lj[k] - ll);
    }
    return total / static_cast<double>(n);
  };

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const double ll = e_step();
    model.log_likelihood_trace.push_back(ll);
    model.iterations = iter + 1;
    const auto& trace = model.log_likelihood_trace;
    const bool reseeded_last = !model.reseeds.empty() && model.reseeds.back().iteration == iter - 1;
    if (trace.size() >= 2 && !reseeded_last && trace[trace.size() - 1] - trace[trace.size() - 2] < opts.tol) {
      model.converged = true;
      break;
    }

    // M-step. With a per-dimension floor the constrained optimum for each
    // variance is max(floor, unconstrained), so EM stays monotone.
    std::vector<double> nk(static_cast<std::size_t>(m), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < static_cast<std::size_t>(m); ++k) nk[k] += resp[i * m + k];
    bool reseed = false;
    for (std::size_t k = 0; k < static_cast<std::size_t>(m); ++k) {
      if (nk[k] < 1e-10) {
        reseed = true;
        continue;
      }
      std::vector<double> mu(c, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * m + k];
        if (r == 0.0) continue;
        for (std::size_t d = 0; d < c; ++d) mu[d] += r * x[i * c + d];
      }
      for (double& v : mu) v /= nk[k];
      std::vector<double> var(c, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * m + k];
        if (r == 0.0) continue;
        for (std::size_t d = 0; d < c; ++d) var[d] += r * (x[i * c + d] - mu[d]) * (x[i * c + d] - mu[d]);
      }
      for (double& v : var) v = std::max(v / nk[k], opts.variance_floor);
      model.means[k] = std::move(mu);
      model.variances[k] = std::move(var);
      model.weights[k] = nk[k] / static_cast<double>(n);
    }
    if (reseed) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sample_ll[a] < sample_ll[b]; });
      std::size_t next = 0;
      for (std::size_t k = 0; k < static_cast<std::size_t>(m); ++k) {
        if (nk[k] >= 1e-10) continue;
        const std::size_t pick = order[std::min(next++, n - 1)];
        auto r = row(x, pick);
        model.means[k].assign(r.begin(), r.end());
        model.variances[k] = global_var;
        model.weights[k] = 1.0 / static_cast<double>(n);
        model.reseeds.push_back({iter, static_cast<int>(k)});
      }
    }
    const double wsum = std::accumulate(model.weights.begin(), model.weights.end(), 0.0);
    for (double& w : model.weights) w /= wsum;
  }
  if (!model.converged) model.log_likelihood_trace.push_back(e_step());
  return model;
}

LabelMap assign_materials(const HyperCube& cube, const GmmModel& model) {
  if (cube.bands != model.dims()) {
    throw ShapeError("assign_materials: cube has " + std::to_string(cube.bands) + " bands, model expects " +
                     std::to_string(model.dims()));
  }
  LabelMap out{cube.height, cube.width, std::vector<int>(cube.pixels(), 0)};
  std::vector<double> spectrum(static_cast<std::size_t>(cube.bands));
  std::vector<double> lj;
  const LogDensity density(model);
  for (std::size_t p = 0; p < cube.pixels(); ++p) {
    std::copy_n(cube.values.data() + p * cube.bands, cube.bands, spectrum.begin());
    density.eval(model, spectrum, lj);
    int best = 0;
    for (int k = 1; k < static_cast<int>(lj.size()); ++k) {
      if (lj[static_cast<std::size_t>(k)] > lj[static_cast<std::size_t>(best)]) best = k;
    }
    out.labels[p] = best;
  }
  return out;
}

HyperCube homogenize(const HyperCube& cube, const LabelMap& labels) {
  if (labels.height != cube.height || labels.width != cube.width || labels.labels.size() != cube.pixels()) {
    throw ShapeError("homogenize: label map does not match the cube");
  }
  const int max_label = labels.labels.empty() ? 0 : *std::max_element(labels.labels.begin(), labels.labels.end());
  const auto classes = static_cast<std::size_t>(max_label + 1);
  const auto c = static_cast<std::size_t>(cube.bands);
  std::vector<double> sums(classes * c, 0.0);
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t p = 0; p < cube.pixels(); ++p) {
    const int l = labels.labels[p];
    if (l < 0) throw ShapeError("homogenize: negative label");
    const auto k = static_cast<std::size_t>(l);
    ++counts[k];
    for (std::size_t b = 0; b < c; ++b) sums[k * c + b] += cube.values[p * c + b];
  }
  std::vector<float> means(classes * c, 0.0f);
  for (std::size_t k = 0; k < classes; ++k) {
    if (!counts[k]) continue;
    for (std::size_t b = 0; b < c; ++b) means[k * c + b] = static_cast<float>(sums[k * c + b] / static_cast<double>(counts[k]));
  }
  HyperCube out = cube;
  for (std::size_t p = 0; p < cube.pixels(); ++p) {
    const auto k = static_cast<std::size_t>(labels.labels[p]);
    std::copy_n(means.data() + k * c, c, out.values.data() + p * c);
  }
  return out;
}

HyperCube homogenize_cube(const HyperCube& cube, int components, const GmmOptions& opts) {
  const GmmModel model = fit_gmm(pixel_matrix(cube), components, opts);
  return homogenize(cube, assign_materials(cube, model));
}

PcaResult pca_reduce(const HyperCube& cube, int k) {
  const int c = cube.bands;
  if (k < 1 || k > c) {
    throw ConfigError("pca_reduce: k = " + std::to_string(k) + " must lie in [1, " + std::to_string(c) + "]");
  }
  const auto n = static_cast<Eigen::Index>(cube.pixels());
  Eigen::MatrixXd x(n, c);
  for (Eigen::Index p = 0; p < n; ++p)
    for (int b = 0; b < c; ++b) x(p, b) = cube.values[static_cast<std::size_t>(p) * c + b];
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigen sorts ascending.
  Eigen::VectorXd values = eig.eigenvalues().reverse();
  Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  for (int j = 0; j < c; ++j) {
    Eigen::Index arg;
    vectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, j) < 0) vectors.col(j) *= -1.0;
  }

  PcaResult out;
  out.mean.assign(mean.data(), mean.data() + c);
  const double total = std::max(values.sum(), 0.0);
  for (int j = 0; j < c; ++j) out.eigenvalues.push_back(std::max(values(j), 0.0));
  for (int j = 0; j < k; ++j) out.explained_variance_ratio.push_back(total > 0 ? out.eigenvalues[static_cast<std::size_t>(j)] / total : 0.0);
  out.components = Tensor({k, c});
  for (int j = 0; j < k; ++j)
    for (int b = 0; b < c; ++b) out.components[static_cast<std::size_t>(j) * c + b] = vectors(b, j);
  const Eigen::MatrixXd scores = x * vectors.leftCols(k);
  out.scores = Tensor::map(cube.height, cube.width, k);
  for (Eigen::Index p = 0; p < n; ++p)
    for (int j = 0; j < k; ++j) out.scores[static_cast<std::size_t>(p) * k + j] = scores(p, j);
  return out;
}

Tensor pca_reconstruct(const PcaResult& pca, bool add_mean) {
  const int k = pca.components.dim(0), c = pca.components.dim(1);
  Tensor out = Tensor::map(pca.scores.height(), pca.scores.width(), c);
  for (std::size_t p = 0; p < pca.scores.pixels(); ++p) {
    for (int b = 0; b < c; ++b) {
      double v = add_mean ? pca.mean[static_cast<std::size_t>(b)] : 0.0;
      for (int j = 0; j < k; ++j) v += pca.scores[p * k + j] * pca.components[static_cast<std::size_t>(j) * c + b];
      out[p * c + b] = v;
    }
  }
  return out;
}

}  // namespace dmssn
