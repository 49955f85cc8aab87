#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <stdexcept>

namespace testing {

using dmssn::Tensor;

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : t.values()) v = d(rng);
  return t;
}

dmssn::HyperCube random_cube(int h, int w, int c, Rng& rng, float lo, float hi) {
  dmssn::HyperCube cube(h, w, c);
  std::uniform_real_distribution<float> d(lo, hi);
  for (float& v : cube.values) v = d(rng);
  return cube;
}

dmssn::SaliencyMask random_binary_mask(int h, int w, Rng& rng, double p) {
  dmssn::SaliencyMask m(h, w);
  std::bernoulli_distribution d(p);
  for (double& v : m.values) v = d(rng) ? 1.0 : 0.0;
  return m;
}

dmssn::SaliencyMask random_map(int h, int w, Rng& rng) {
  dmssn::SaliencyMask m(h, w);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (double& v : m.values) v = d(rng);
  return m;
}

GradCheckReport check_gradients(const dmssn::NamedParams& params, const std::function<dmssn::Var()>& loss, Rng& rng,
                                int coords, double h, double floor) {
  dmssn::zero_grads(params);
  dmssn::backward(loss());
  std::vector<Tensor> analytic;
  for (const auto& [name, p] : params) {
    analytic.push_back(p.grad().empty() ? Tensor(p.shape(), 0.0) : p.grad());
  }
  dmssn::zero_grads(params);

  GradCheckReport report;
  std::normal_distribution<double> normal(0.0, 1.0);
  auto rel = [floor](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}); };
  for (std::size_t gi = 0; gi < params.size(); ++gi) {
    dmssn::Var p = params[gi].second;
    Tensor& w = p.mutable_value();
    const std::size_t n = w.size();
    // Directional derivative along a random unit vector.
    std::vector<double> dir(n);
    double norm = 0.0;
    for (double& d : dir) norm += (d = normal(rng)) * d;
    norm = std::sqrt(norm);
    for (double& d : dir) d /= norm;
    const Tensor saved = w;
    auto eval_shift = [&](double s, const std::vector<double>& d) {
      for (std::size_t i = 0; i < n; ++i) w[i] = saved[i] + s * d[i];
      const double v = loss().value().item();
      w = saved;
      return v;
    };
    double a = 0.0;
    for (std::size_t i = 0; i < n; ++i) a += analytic[gi][i] * dir[i];
    const double num = (eval_shift(h, dir) - eval_shift(-h, dir)) / (2 * h);
    double worst = rel(a, num);
    std::string where = params[gi].first + " (direction) analytic " + std::to_string(a) + " numeric " + std::to_string(num);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int c = 0; c < coords; ++c) {
      const std::size_t i = pick(rng);
      std::vector<double> e(n, 0.0);
      e[i] = 1.0;
      const double nc = (eval_shift(h, e) - eval_shift(-h, e)) / (2 * h);
      const double r = rel(analytic[gi][i], nc);
      if (r > worst) {
        worst = r;
        where = params[gi].first + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic[gi][i]) +
                " numeric " + std::to_string(nc);
      }
    }
    if (worst > report.max_rel_error) {
      report.max_rel_error = worst;
      report.worst = where;
    }
    ++report.groups;
  }
  return report;
}

void jacobi_eigen(std::vector<double> a, int n, std::vector<double>& values, std::vector<std::vector<double>>& vectors) {
  std::vector<double> v(static_cast<std::size_t>(n * n), 0.0);
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i * n + i)] = 1.0;
  auto A = [&](int r, int c) -> double& { return a[static_cast<std::size_t>(r * n + c)]; };
  auto V = [&](int r, int c) -> double& { return v[static_cast<std::size_t>(r * n + c)]; };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(A(p, q)) < 1e-300) continue;
        const double theta = (A(q, q) - A(p, p)) / (2 * A(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](int x, int y) { return A(x, x) > A(y, y); });
  values.clear();
  vectors.clear();
  for (int j : order) {
    values.push_back(A(j, j));
    std::vector<double> col(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) col[static_cast<std::size_t>(k)] = V(k, j);
    vectors.push_back(col);
  }
}

bool oracle_inside(const dmssn::SceneObject& o, int row, int col) {
  const double y = row + 0.5, x = col + 0.5;
  const double dy = y - o.center_row, dx = x - o.center_col;
  const double ry = o.size_rows / 2, rx = o.size_cols / 2;
  if (o.kind == dmssn::ShapeKind::kRectangle) return std::abs(dy) <= ry && std::abs(dx) <= rx;
  return (dy * dy) / (ry * ry) + (dx * dx) / (rx * rx) <= 1.0;
}

std::vector<int> oracle_material_map(const dmssn::SceneSpec& spec) {
  std::vector<int> m(static_cast<std::size_t>(spec.height * spec.width), spec.background_material);
  for (const auto& o : spec.objects)
    for (int r = 0; r < spec.height; ++r)
      for (int c = 0; c < spec.width; ++c)
        if (oracle_inside(o, r, c)) m[static_cast<std::size_t>(r * spec.width + c)] = o.material;
  return m;
}

Tensor naive_linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int out = w.dim(0), in = w.dim(1);
  Tensor y = Tensor::map(x.height(), x.width(), out);
  for (int r = 0; r < x.height(); ++r)
    for (int c = 0; c < x.width(); ++c)
      for (int o = 0; o < out; ++o) {
        double s = b.empty() ? 0.0 : b[static_cast<std::size_t>(o)];
        for (int i = 0; i < in; ++i) s += w[static_cast<std::size_t>(o * in + i)] * x.at(r, c, i);
        y.at(r, c, o) = s;
      }
  return y;
}

Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const int out = w.dim(0), k = w.dim(1), in = w.dim(3);
  const int ho = (x.height() + 2 * pad - k) / stride + 1, wo = (x.width() + 2 * pad - k) / stride + 1;
  Tensor y = Tensor::map(ho, wo, out);
  for (int r = 0; r < ho; ++r)
    for (int c = 0; c < wo; ++c)
      for (int o = 0; o < out; ++o) {
        double s = b.empty() ? 0.0 : b[static_cast<std::size_t>(o)];
        for (int u = 0; u < k; ++u)
          for (int v = 0; v < k; ++v) {
            const int iy = r * stride + u - pad, ix = c * stride + v - pad;
            if (iy < 0 || ix < 0 || iy >= x.height() || ix >= x.width()) continue;
            for (int i = 0; i < in; ++i) s += w[static_cast<std::size_t>(((o * k + u) * k + v) * in + i)] * x.at(iy, ix, i);
          }
        y.at(r, c, o) = s;
      }
  return y;
}

Tensor naive_shared_conv(const Tensor& x, const Tensor& k, double bias) {
  const int ks = k.dim(0), pad = ks / 2;
  Tensor y = Tensor::map(x.height(), x.width(), x.channels());
  for (int r = 0; r < x.height(); ++r)
    for (int c = 0; c < x.width(); ++c)
      for (int ch = 0; ch < x.channels(); ++ch) {
        double s = bias;
        for (int u = 0; u < ks; ++u)
          for (int v = 0; v < ks; ++v) {
            const int iy = r + u - pad, ix = c + v - pad;
            if (iy < 0 || ix < 0 || iy >= x.height() || ix >= x.width()) continue;
            s += k[static_cast<std::size_t>(u * ks + v)] * x.at(iy, ix, ch);
          }
        y.at(r, c, ch) = s;
      }
  return y;
}

Tensor naive_layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  Tensor y = x;
  const int ch = x.channels();
  for (int r = 0; r < x.height(); ++r)
    for (int c = 0; c < x.width(); ++c) {
      double mean = 0, var = 0;
      for (int i = 0; i < ch; ++i) mean += x.at(r, c, i);
      mean /= ch;
      for (int i = 0; i < ch; ++i) var += (x.at(r, c, i) - mean) * (x.at(r, c, i) - mean);
      var /= ch;
      for (int i = 0; i < ch; ++i)
        y.at(r, c, i) = (x.at(r, c, i) - mean) / std::sqrt(var + eps) * gamma[static_cast<std::size_t>(i)] +
                        beta[static_cast<std::size_t>(i)];
    }
  return y;
}

Tensor naive_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
  const int c = q.channels(), hd = c / heads;
  const int nq = q.height() * q.width(), nk = k.height() * k.width();
  Tensor out = Tensor::map(q.height(), q.width(), c);
  for (int h = 0; h < heads; ++h)
    for (int i = 0; i < nq; ++i) {
      std::vector<double> s(static_cast<std::size_t>(nk));
      double mx = -1e300;
      for (int j = 0; j < nk; ++j) {
        double d = 0;
        for (int e = 0; e < hd; ++e) d += q[static_cast<std::size_t>(i * c + h * hd + e)] * k[static_cast<std::size_t>(j * c + h * hd + e)];
        s[static_cast<std::size_t>(j)] = d / std::sqrt(static_cast<double>(hd));
        mx = std::max(mx, s[static_cast<std::size_t>(j)]);
      }
      double z = 0;
      for (double& x : s) z += (x = std::exp(x - mx));
      for (int e = 0; e < hd; ++e) {
        double acc = 0;
        for (int j = 0; j < nk; ++j) acc += s[static_cast<std::size_t>(j)] / z * v[static_cast<std::size_t>(j * c + h * hd + e)];
        out[static_cast<std::size_t>(i * c + h * hd + e)] = acc;
      }
    }
  return out;
}

Tensor naive_gelu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = 0.5 * v * (1 + std::erf(v / std::numbers::sqrt2));
  return y;
}

Tensor naive_add(const Tensor& a, const Tensor& b) {
  Tensor y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
  return y;
}

Tensor naive_concat(const Tensor& a, const Tensor& b) {
  const int ca = a.channels(), cb = b.channels();
  Tensor y = Tensor::map(a.height(), a.width(), ca + cb);
  for (int r = 0; r < a.height(); ++r)
    for (int c = 0; c < a.width(); ++c) {
      for (int i = 0; i < ca; ++i) y.at(r, c, i) = a.at(r, c, i);
      for (int i = 0; i < cb; ++i) y.at(r, c, ca + i) = b.at(r, c, i);
    }
  return y;
}

Tensor naive_resize(const Tensor& x, int oh, int ow) {
  Tensor y = Tensor::map(oh, ow, x.channels());
  auto src = [](int o, int in, int out) {
    double s = (o + 0.5) * in / out - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c) {
      const double sy = src(r, x.height(), oh), sx = src(c, x.width(), ow);
      const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
      const int y1 = std::min(y0 + 1, x.height() - 1), x1 = std::min(x0 + 1, x.width() - 1);
      const double fy = sy - y0, fx = sx - x0;
      for (int ch = 0; ch < x.channels(); ++ch) {
        y.at(r, c, ch) = (1 - fy) * ((1 - fx) * x.at(y0, x0, ch) + fx * x.at(y0, x1, ch)) +
                         fy * ((1 - fx) * x.at(y1, x0, ch) + fx * x.at(y1, x1, ch));
      }
    }
  return y;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TempDir::TempDir() {
  std::string tmpl = (std::filesystem::temp_directory_path() / "dmssn-test-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

Counts count(const dmssn::SaliencyMask& y, const dmssn::SaliencyMask& t, double tau) {
  Counts c;
  for (int r = 0; r < y.height; ++r)
    for (int k = 0; k < y.width; ++k) {
      const bool p = !(y.at(r, k) < tau), g = t.at(r, k) == 1.0;
      c.tp += p && g;
      c.fp += p && !g;
      c.fn += !p && g;
    }
  return c;
}

double oracle_f1(const Counts& c) {
  const double p = c.tp + c.fp ? double(c.tp) / double(c.tp + c.fp) : 0.0;
  const double r = c.tp + c.fn ? double(c.tp) / double(c.tp + c.fn) : 0.0;
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

std::pair<double, double> oracle_curve(const dmssn::SaliencyMask& y, const dmssn::SaliencyMask& t, int n) {
  double pos = 0;
  for (double v : t.values) pos += v;
  const double neg = static_cast<double>(t.size()) - pos;
  double f1 = 0, auc = 0, px = 1, py = 1;  // walk from (1,1) with rising thresholds
  for (int j = 1; j <= n; ++j) {
    const Counts c = count(y, t, double(j) / (n + 1));
    f1 += oracle_f1(c);
    const double x = c.fp / neg, yy = c.tp / pos;
    auc += (px - x) * (py + yy) / 2;
    px = x, py = yy;
  }
  auc += px * py / 2;
  return {f1 / n, auc};
}

double oracle_cc(const dmssn::SaliencyMask& a, const dmssn::SaliencyMask& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a.values[i], sb += b.values[i];
    sab += a.values[i] * b.values[i], saa += a.values[i] * a.values[i], sbb += b.values[i] * b.values[i];
  }
  return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

double oracle_nss(const dmssn::SaliencyMask& y, const dmssn::SaliencyMask& t) {
  const double n = static_cast<double>(y.size());
  double mean = 0;
  for (double v : y.values) mean += v / n;
  double var = 0;
  for (double v : y.values) var += (v - mean) * (v - mean) / n;
  double s = 0, k = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (t.values[i] == 1.0) s += (y.values[i] - mean) / std::sqrt(var), ++k;
  return s / k;
}

}  // namespace testing
