#include "dmssn/objectives.hpp"

#include <cmath>
#include <numbers>

#include "dmssn/error.hpp"

namespace dmssn {
namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void require_binary(const Tensor& t, const char* what) {
  for (double v : t.values()) {
    if (v != 0.0 && v != 1.0) throw DataError(std::string(what) + ": target must be binary");
  }
}

void require_single_channel(const Tensor& a, const Tensor& b, const char* what) {
  require_map(a, what);
  require_same_shape(a, b, what);
  if (a.channels() != 1) throw ShapeError(std::string(what) + ": expected a single-channel map");
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  double s = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - (size - 1) / 2.0;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2 * sigma * sigma));
    s += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= s;
  return g;
}

// Separable "same" filtering with zero padding on an H x W plane.
std::vector<double> blur(const std::vector<double>& x, int h, int w, const std::vector<double>& g) {
  const int r = static_cast<int>(g.size()) / 2;
  std::vector<double> tmp(x.size(), 0.0), out(x.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int cc = c + k;
        if (cc >= 0 && cc < w) s += g[static_cast<std::size_t>(k + r)] * x[static_cast<std::size_t>(y) * w + cc];
      }
      tmp[static_cast<std::size_t>(y) * w + c] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int yy = y + k;
        if (yy >= 0 && yy < h) s += g[static_cast<std::size_t>(k + r)] * tmp[static_cast<std::size_t>(yy) * w + c];
      }
      out[static_cast<std::size_t>(y) * w + c] = s;
    }
  return out;
}

struct SsimParts {
  double mean = 0.0;
  // d mean / d y, filled when requested
  std::vector<double> grad;
};

SsimParts ssim_parts(const Tensor& a, const Tensor& b, const SodLossOptions& opts, bool want_grad) {
  const int h = a.height(), w = a.width();
  const std::size_t n = a.size();
  const auto g = gaussian_window(opts.ssim_window, opts.ssim_sigma);
  const double c1 = opts.ssim_k1 * opts.ssim_k1, c2 = opts.ssim_k2 * opts.ssim_k2;
  std::vector<double> y(a.values().begin(), a.values().end()), t(b.values().begin(), b.values().end());
  std::vector<double> yy(n), tt(n), yt(n);
  for (std::size_t i = 0; i < n; ++i) {
    yy[i] = y[i] * y[i];
    tt[i] = t[i] * t[i];
    yt[i] = y[i] * t[i];
  }
  const auto mu_y = blur(y, h, w, g), mu_t = blur(t, h, w, g);
  const auto e_yy = blur(yy, h, w, g), e_tt = blur(tt, h, w, g), e_yt = blur(yt, h, w, g);

  SsimParts out;
  std::vector<double> da, dbb, dc;
  if (want_grad) da.resize(n), dbb.resize(n), dc.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double n1 = 2 * mu_y[i] * mu_t[i] + c1;
    const double n2 = 2 * (e_yt[i] - mu_y[i] * mu_t[i]) + c2;
    const double d1 = mu_y[i] * mu_y[i] + mu_t[i] * mu_t[i] + c1;
    const double d2 = (e_yy[i] - mu_y[i] * mu_y[i]) + (e_tt[i] - mu_t[i] * mu_t[i]) + c2;
    const double s = n1 * n2 / (d1 * d2);
    out.mean += s;
    if (want_grad) {
      const double scale = s / static_cast<double>(n);
      da[i] = scale * (2 * mu_t[i] / n1 - 2 * mu_t[i] / n2 - 2 * mu_y[i] / d1 + 2 * mu_y[i] / d2);
      dbb[i] = scale * (-1.0 / d2);
      dc[i] = scale * (2.0 / n2);
    }
  }
  out.mean /= static_cast<double>(n);
  if (want_grad) {
    // The window is symmetric, so the adjoint of the blur is the blur itself.
    const auto ga = blur(da, h, w, g), gb = blur(dbb, h, w, g), gc = blur(dc, h, w, g);
    out.grad.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.grad[i] = ga[i] + 2 * y[i] * gb[i] + t[i] * gc[i];
  }
  return out;
}

}  // namespace

Var huber_loss(const Var& x, const Var& y, double delta) {
  require_same_shape(x.value(), y.value(), "huber_loss");
  const Tensor& a = x.value();
  const Tensor& b = y.value();
  const std::size_t n = a.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::abs(a[i] - b[i]);
    s += d <= delta ? 0.5 * d * d : delta * (d - 0.5 * delta);
  }
  return make_node(Tensor::scalar(s / static_cast<double>(n)), {x, y}, [delta, n](Node& self) {
    const Tensor& a = self.inputs[0]->value;
    const Tensor& b = self.inputs[1]->value;
    const double g = self.grad[0] / static_cast<double>(n);
    for (int side = 0; side < 2; ++side) {
      Node& in = *self.inputs[static_cast<std::size_t>(side)];
      if (!in.requires_grad) continue;
      Tensor& d = in.grad_buffer();
      const double sign = side == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < n; ++i) d[i] += sign * g * std::clamp(a[i] - b[i], -delta, delta);
    }
  });
}

double spectral_angle(std::span<const double> a, std::span<const double> b, double eps) {
  const double na = norm(a), nb = norm(b);
  if (!(na * nb >= eps) || na == 0.0 || nb == 0.0) return std::numbers::pi / 2;
  double diff = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double u = a[i] / na, v = b[i] / nb;
    diff += (u - v) * (u - v);
    sum += (u + v) * (u + v);
  }
  return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
}

Var spectral_angle_loss(const Var& x, const Var& y, double eps) {
  require_same_shape(x.value(), y.value(), "spectral_angle_loss");
  const Tensor& a = x.value();
  const std::size_t c = static_cast<std::size_t>(a.shape().back());
  const std::size_t pixels = a.size() / c;
  double s = 0.0;
  for (std::size_t p = 0; p < pixels; ++p) {
    s += spectral_angle({a.data() + p * c, c}, {y.value().data() + p * c, c}, eps);
  }
  return make_node(Tensor::scalar(s / static_cast<double>(pixels)), {x, y}, [eps, c, pixels](Node& self) {
    const double g = self.grad[0] / static_cast<double>(pixels);
    for (int side = 0; side < 2; ++side) {
      Node& in = *self.inputs[static_cast<std::size_t>(side)];
      if (!in.requires_grad) continue;
      const Tensor& u = in.value;
      const Tensor& v = self.inputs[static_cast<std::size_t>(1 - side)]->value;
      Tensor& d = in.grad_buffer();
      std::vector<double> perp(c);
      for (std::size_t p = 0; p < pixels; ++p) {
        const std::span<const double> up{u.data() + p * c, c}, vp{v.data() + p * c, c};
        const double nu = norm(up), nv = norm(vp);
        if (!(nu * nv >= eps) || nu == 0.0 || nv == 0.0) continue;
        // d angle / d u = -(v_hat minus its projection on u_hat) / (|u| sin angle),
        // and that perpendicular part has norm sin angle.
        double cos = 0.0;
        for (std::size_t k = 0; k < c; ++k) cos += (up[k] / nu) * (vp[k] / nv);
        double pn = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
          perp[k] = vp[k] / nv - cos * up[k] / nu;
          pn += perp[k] * perp[k];
        }
        pn = std::sqrt(pn);
        if (pn < 1e-12) continue;
        for (std::size_t k = 0; k < c; ++k) d[p * c + k] -= g * perp[k] / (pn * nu);
      }
    }
  });
}

Var hs_loss(const Var& x, const Var& y, const HsLossOptions& opts, HsTerms* terms) {
  require_same_shape(x.value(), y.value(), "hs_loss");
  Var h = ops::scale(huber_loss(x, y, opts.huber_delta), opts.huber_weight);
  Var s = ops::scale(spectral_angle_loss(x, y, opts.sam_eps), opts.sam_weight);
  if (terms) *terms = {h.value().item(), s.value().item()};
  return ops::add(h, s);
}

double hs_loss(const Tensor& x, const Tensor& y, const HsLossOptions& opts) {
  return hs_loss(constant(x), constant(y), opts).value().item();
}

double mixing_distance(const Tensor& x, const Tensor& y, double eps) {
  require_map(x, "mixing_distance");
  require_same_shape(x, y, "mixing_distance");
  const std::size_t c = static_cast<std::size_t>(x.channels());
  double frob = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) frob += (x[i] - y[i]) * (x[i] - y[i]);
  double angles = 0.0;
  for (std::size_t p = 0; p < x.pixels(); ++p) {
    // arccos(|cos|) folds the angle onto [0, pi/2].
    const double a = spectral_angle({x.data() + p * c, c}, {y.data() + p * c, c}, eps);
    angles += std::min(a, std::numbers::pi - a);
  }
  return (std::sqrt(frob) - angles) / static_cast<double>(x.pixels());
}

Var distillation_loss(const TeacherActivations& teacher, const StudentActivations& student, const HsLossOptions& opts,
                      std::array<HsTerms, 3>* terms) {
  const std::pair<const Var*, const Var*> pairs[3] = {
      {&teacher.e2, &student.e1}, {&teacher.e, &student.e}, {&teacher.d2, &student.d1}};
  const char* names[3] = {"(E_T^2, E_S^1)", "(E_T, E_S)", "(D_T^2, D_S^1)"};
  Var total;
  for (int i = 0; i < 3; ++i) {
    const Tensor& t = pairs[i].first->value();
    const Tensor& s = pairs[i].second->value();
    if (!t.same_shape(s)) {
      throw ConfigError(std::string("distillation pair ") + names[i] + " is incompatible: teacher " +
                        shape_string(t.shape()) + " vs student " + shape_string(s.shape()));
    }
    HsTerms part;
    Var l = hs_loss(*pairs[i].second, constant(t), opts, &part);
    if (terms) (*terms)[static_cast<std::size_t>(i)] = part;
    total = total.defined() ? ops::add(total, l) : l;
  }
  return total;
}

Var bce_loss(const Var& pred, const Tensor& target, double eps) {
  require_single_channel(pred.value(), target, "bce_loss");
  require_binary(target, "bce_loss");
  const Tensor& y = pred.value();
  const std::size_t n = y.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(y[i], eps, 1.0 - eps);
    s -= target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p);
  }
  return make_node(Tensor::scalar(s / static_cast<double>(n)), {pred}, [target, eps, n](Node& self) {
    const Tensor& y = self.inputs[0]->value;
    Tensor& d = self.inputs[0]->grad_buffer();
    const double g = self.grad[0] / static_cast<double>(n);
    // The clamp only guards the log. Passing the gradient straight through it
    // keeps a saturated logistic output trainable: times y (1 - y) from the
    // sigmoid this is y - t.
    constexpr double tiny = 1e-300;
    for (std::size_t i = 0; i < n; ++i) {
      d[i] += g * (-target[i] / std::max(y[i], tiny) + (1.0 - target[i]) / std::max(1.0 - y[i], tiny));
    }
  });
}

double ssim(const Tensor& a, const Tensor& b, const SodLossOptions& opts) {
  require_single_channel(a, b, "ssim");
  return ssim_parts(a, b, opts, false).mean;
}

Var ssim_loss(const Var& pred, const Tensor& target, const SodLossOptions& opts) {
  require_single_channel(pred.value(), target, "ssim_loss");
  const bool want = pred.requires_grad();
  SsimParts parts = ssim_parts(pred.value(), target, opts, want);
  return make_node(Tensor::scalar(1.0 - parts.mean), {pred}, [grad = std::move(parts.grad)](Node& self) {
    Tensor& d = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= self.grad[0] * grad[i];
  });
}

Var iou_loss(const Var& pred, const Tensor& target) {
  require_single_channel(pred.value(), target, "iou_loss");
  const Tensor& y = pred.value();
  double inter = 0.0, uni = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    inter += y[i] * target[i];
    uni += y[i] + target[i] - y[i] * target[i];
  }
  if (uni <= 1e-12) return make_node(Tensor::scalar(0.0), {}, nullptr);  // both maps empty
  return make_node(Tensor::scalar(1.0 - inter / uni), {pred}, [target, inter, uni](Node& self) {
    Tensor& d = self.inputs[0]->grad_buffer();
    const double g = self.grad[0];
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] -= g * (target[i] * uni - inter * (1.0 - target[i])) / (uni * uni);
    }
  });
}

Var sod_loss(const Var& pred, const Tensor& target, const SodLossOptions& opts, SodTerms* terms) {
  Var b = bce_loss(pred, target, opts.bce_eps);
  Var s = ssim_loss(pred, target, opts);
  Var i = iou_loss(pred, target);
  if (terms) *terms = {b.value().item(), s.value().item(), i.value().item()};
  return ops::add(ops::add(b, s), i);
}

double total_loss(double recon, double sod, double dis) { return recon + sod + dis; }

std::map<std::string, double> LossReport::components() const {
  std::map<std::string, double> m{{"huber", recon.huber}, {"sam", recon.sam}, {"bce", sod.bce},
                                  {"ssim", sod.ssim},     {"iou", sod.iou}};
  for (std::size_t i = 0; i < 3; ++i) m["dis_pair" + std::to_string(i)] = dis_pairs[i].total();
  return m;
}

bool LossReport::all_finite() const {
  for (const auto& [k, v] : components()) {
    if (!std::isfinite(v)) return false;
  }
  return std::isfinite(total());
}

}  // namespace dmssn
