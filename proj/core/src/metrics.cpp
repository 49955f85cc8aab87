#include "dmssn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "dmssn/error.hpp"

namespace dmssn {
namespace {

void check_pair(const SaliencyMask& y, const SaliencyMask& t, const char* what) {
  if (y.height != t.height || y.width != t.width || y.values.size() != t.values.size()) {
    throw ShapeError(std::string(what) + ": prediction " + std::to_string(y.height) + "x" + std::to_string(y.width) +
                     " vs ground truth " + std::to_string(t.height) + "x" + std::to_string(t.width));
  }
  if (y.values.empty()) throw ShapeError(std::string(what) + ": empty map");
  if (!t.is_binary()) throw DataError(std::string(what) + ": ground truth must be binary");
}

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(s / static_cast<double>(v.size()));
  // A constant map can leave rounding noise in the mean; report it as flat.
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*lo == *hi) m.sd = 0.0;
  return m;
}

struct Confusion {
  double tp = 0, fp = 0, fn = 0, tn = 0;
};

Confusion confusion(const SaliencyMask& y, const SaliencyMask& t, double threshold) {
  Confusion c;
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    const bool p = y.values[i] >= threshold;
    const bool g = t.values[i] > 0.5;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

BinaryMetrics from_confusion(const Confusion& c) {
  BinaryMetrics m;
  if (c.tp + c.fp > 0) m.precision = c.tp / (c.tp + c.fp);
  else m.precision_undefined = true;
  if (c.tp + c.fn > 0) m.recall = c.tp / (c.tp + c.fn);
  else m.recall_undefined = true;
  if (m.precision + m.recall > 0) m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
  else m.f1_undefined = true;
  return m;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

BinaryMetrics binary_metrics(const SaliencyMask& y, const SaliencyMask& t, double threshold) {
  check_pair(y, t, "binary_metrics");
  if (threshold < 0.0 || threshold > 1.0) throw ConfigError("binary_metrics: threshold must lie in [0, 1]");
  return from_confusion(confusion(y, t, threshold));
}

std::vector<double> curve_thresholds(int n) {
  if (n < 1) throw ConfigError("curve metrics need at least one threshold");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j) out[static_cast<std::size_t>(j - 1)] = static_cast<double>(j) / (n + 1);
  return out;
}

CurveMetrics curve_metrics(const SaliencyMask& y, const SaliencyMask& t, int n_thresholds) {
  check_pair(y, t, "curve_metrics");
  const std::size_t pos = t.count_positive();
  if (pos == 0 || pos == t.size()) throw DataError("curve_metrics: ground truth is constant, AUC is undefined");
  const double neg = static_cast<double>(t.size() - pos);

  CurveMetrics out;
  std::vector<std::pair<double, double>> roc{{0.0, 0.0}, {1.0, 1.0}};
  for (double tau : curve_thresholds(n_thresholds)) {
    const Confusion c = confusion(y, t, tau);
    out.avg_f1 += from_confusion(c).f1;
    roc.emplace_back(c.fp / neg, c.tp / static_cast<double>(pos));
  }
  out.avg_f1 /= n_thresholds;
  std::sort(roc.begin(), roc.end());
  for (std::size_t i = 1; i < roc.size(); ++i) {
    out.auc += (roc[i].first - roc[i - 1].first) * (roc[i].second + roc[i - 1].second) / 2;
  }
  return out;
}

double roc_auc_exact(const SaliencyMask& y, const SaliencyMask& t) {
  check_pair(y, t, "roc_auc_exact");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (t.values[i] > 0.5 ? pos : neg).push_back(y.values[i]);
  if (pos.empty() || neg.empty()) throw DataError("roc_auc_exact: ground truth is constant, AUC is undefined");
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double p : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), p);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double correlation_coefficient(const SaliencyMask& y, const SaliencyMask& t) {
  if (y.values.size() != t.values.size() || y.values.empty()) throw ShapeError("correlation_coefficient: size mismatch");
  const Moments my = moments(y.values), mt = moments(t.values);
  if (my.sd == 0.0 || mt.sd == 0.0) throw DataError("correlation_coefficient: a map has zero variance");
  // Written so that y == t gives s / sqrt(s * s), which is exactly 1.
  double s = 0.0, syy = 0.0, stt = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double dy = y.values[i] - my.mean, dt = t.values[i] - mt.mean;
    s += dy * dt;
    syy += dy * dy;
    stt += dt * dt;
  }
  return std::clamp(s / std::sqrt(syy * stt), -1.0, 1.0);
}

double normalized_scanpath_saliency(const SaliencyMask& y, const SaliencyMask& t) {
  check_pair(y, t, "normalized_scanpath_saliency");
  const Moments my = moments(y.values);
  if (my.sd == 0.0) throw DataError("normalized_scanpath_saliency: prediction has zero variance");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (t.values[i] > 0.5) {
      s += (y.values[i] - my.mean) / my.sd;
      ++n;
    }
  }
  if (n == 0) throw DataError("normalized_scanpath_saliency: ground truth has no positive pixels");
  return s / static_cast<double>(n);
}

DistributionMetrics distribution_metrics(const SaliencyMask& y, const SaliencyMask& t) {
  check_pair(y, t, "distribution_metrics");
  DistributionMetrics m;
  for (std::size_t i = 0; i < y.size(); ++i) m.mae += std::abs(y.values[i] - t.values[i]);
  m.mae /= static_cast<double>(y.size());
  try {
    m.cc = correlation_coefficient(y, t);
  } catch (const DataError&) {
  }
  try {
    m.nss = normalized_scanpath_saliency(y, t);
  } catch (const DataError&) {
  }
  return m;
}

EvalReport evaluate(const SaliencyMask& y, const SaliencyMask& t, const EvalOptions& opts) {
  EvalReport r;
  const BinaryMetrics b = binary_metrics(y, t, opts.threshold);
  const CurveMetrics c = curve_metrics(y, t, opts.n_thresholds);
  const DistributionMetrics d = distribution_metrics(y, t);
  r.mae = d.mae;
  r.precision = b.precision;
  r.recall = b.recall;
  r.avg_f1 = c.avg_f1;
  r.auc = c.auc;
  r.cc = d.cc;
  r.nss = d.nss;
  r.threshold_count = opts.n_thresholds;
  r.threshold = opts.threshold;
  return r;
}

EvalReport average_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw DataError("average_reports: no reports");
  EvalReport out;
  out.threshold_count = reports.front().threshold_count;
  out.threshold = reports.front().threshold;
  out.images = 0;
  double cc = 0, nss = 0;
  int ncc = 0, nnss = 0;
  for (const auto& r : reports) {
    out.mae += r.mae;
    out.precision += r.precision;
    out.recall += r.recall;
    out.avg_f1 += r.avg_f1;
    out.auc += r.auc;
    if (r.cc) cc += *r.cc, ++ncc;
    if (r.nss) nss += *r.nss, ++nnss;
    out.images += r.images;
  }
  const double n = static_cast<double>(reports.size());
  out.mae /= n;
  out.precision /= n;
  out.recall /= n;
  out.avg_f1 /= n;
  out.auc /= n;
  if (ncc) out.cc = cc / ncc;
  if (nnss) out.nss = nss / nnss;
  return out;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["mae"] = mae;
  j["precision"] = precision;
  j["recall"] = recall;
  j["avg_f1"] = avg_f1;
  j["auc"] = auc;
  j["cc"] = cc ? nlohmann::ordered_json(*cc) : nlohmann::ordered_json(nullptr);
  j["nss"] = nss ? nlohmann::ordered_json(*nss) : nlohmann::ordered_json(nullptr);
  j["threshold_count"] = threshold_count;
  j["threshold"] = threshold;
  j["images"] = images;
  return j.dump();
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << "# PRE/REC at y >= " << threshold << "; avgF1/AUC over " << threshold_count
     << " thresholds j/(n+1); NSS fixations = ground-truth positives; images = " << images << "\n";
  const char* names[] = {"MAE", "PRE", "REC", "avgF1", "AUC", "CC", "NSS"};
  const std::string vals[] = {fmt(mae), fmt(precision), fmt(recall), fmt(avg_f1), fmt(auc), cc ? fmt(*cc) : "n/a",
                              nss ? fmt(*nss) : "n/a"};
  char buf[16];
  for (const char* n : names) {
    std::snprintf(buf, sizeof buf, "%8s", n);
    os << buf;
  }
  os << "\n";
  for (const auto& v : vals) {
    std::snprintf(buf, sizeof buf, "%8s", v.c_str());
    os << buf;
  }
  os << "\n";
  return os.str();
}

}  // namespace dmssn
