#include "dmssn/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dmssn/error.hpp"

namespace dmssn::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

std::vector<int> with_last(std::vector<int> shape, int last) {
  shape.back() = last;
  return shape;
}

struct Interp {
  int i0;
  int i1;
  double w;  // weight of i1
};

std::vector<Interp> interp_table(int in, int out) {
  std::vector<Interp> t(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    int i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
    int i1 = std::min(i0 + 1, in - 1);
    t[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
  }
  return t;
}

// im2col for HxWxC input; rows are output positions.
RowMat im2col(const Tensor& x, int k, int stride, int pad, int ho, int wo) {
  const int h = x.height(), w = x.width(), c = x.channels();
  RowMat cols = RowMat::Zero(static_cast<Eigen::Index>(ho) * wo, static_cast<Eigen::Index>(k) * k * c);
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      double* row = cols.data() + (static_cast<std::size_t>(oy) * wo + ox) * cols.cols();
      for (int u = 0; u < k; ++u) {
        const int iy = oy * stride + u - pad;
        if (iy < 0 || iy >= h) continue;
        for (int v = 0; v < k; ++v) {
          const int ix = ox * stride + v - pad;
          if (ix < 0 || ix >= w) continue;
          const double* src = x.data() + (static_cast<std::size_t>(iy) * w + ix) * c;
          std::copy(src, src + c, row + (static_cast<std::size_t>(u) * k + v) * c);
        }
      }
    }
  }
  return cols;
}

void col2im_add(const RowMat& cols, Tensor& dx, int k, int stride, int pad, int ho, int wo) {
  const int h = dx.height(), w = dx.width(), c = dx.channels();
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      const double* row = cols.data() + (static_cast<std::size_t>(oy) * wo + ox) * cols.cols();
      for (int u = 0; u < k; ++u) {
        const int iy = oy * stride + u - pad;
        if (iy < 0 || iy >= h) continue;
        for (int v = 0; v < k; ++v) {
          const int ix = ox * stride + v - pad;
          if (ix < 0 || ix >= w) continue;
          double* dst = dx.data() + (static_cast<std::size_t>(iy) * w + ix) * c;
          const double* src = row + (static_cast<std::size_t>(u) * k + v) * c;
          for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
      }
    }
  }
}

}  // namespace

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  if (wv.rank() != 2) throw ShapeError("linear: weight must be [out, in]");
  const int out = wv.dim(0), in = wv.dim(1);
  if (xv.rank() < 1 || xv.shape().back() != in) {
    throw ShapeError("linear: input " + shape_string(xv.shape()) + " does not end in " + std::to_string(in));
  }
  if (bias.defined() && (bias.value().rank() != 1 || bias.value().dim(0) != out)) {
    throw ShapeError("linear: bias must be [" + std::to_string(out) + "]");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(xv.size() / static_cast<std::size_t>(in));
  Tensor y(with_last(xv.shape(), out));
  MatMap ym(y.data(), n, out);
  ym.noalias() = ConstMatMap(xv.data(), n, in) * ConstMatMap(wv.data(), out, in).transpose();
  if (bias.defined()) ym.rowwise() += ConstVecMap(bias.value().data(), out).transpose();

  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_node(std::move(y), std::move(inputs), [n, in, out](Node& self) {
    ConstMatMap dy(self.grad.data(), n, out);
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    if (xn.requires_grad) {
      MatMap(xn.grad_buffer().data(), n, in).noalias() += dy * ConstMatMap(wn.value.data(), out, in);
    }
    if (wn.requires_grad) {
      MatMap(wn.grad_buffer().data(), out, in).noalias() += dy.transpose() * ConstMatMap(xn.value.data(), n, in);
    }
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      VecMap(self.inputs[2]->grad_buffer().data(), out) += dy.colwise().sum().transpose();
    }
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  require_map(xv, "conv2d");
  if (wv.rank() != 4 || wv.dim(1) != wv.dim(2) || wv.dim(3) != xv.channels()) {
    throw ShapeError("conv2d: weight " + shape_string(wv.shape()) + " incompatible with input " +
                     shape_string(xv.shape()));
  }
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: invalid stride/padding");
  const int out = wv.dim(0), k = wv.dim(1), cin = xv.channels();
  const int ho = (xv.height() + 2 * padding - k) / stride + 1;
  const int wo = (xv.width() + 2 * padding - k) / stride + 1;
  if (ho < 1 || wo < 1) throw ShapeError("conv2d: kernel larger than padded input");
  if (bias.defined() && (bias.value().rank() != 1 || bias.value().dim(0) != out)) {
    throw ShapeError("conv2d: bias must be [" + std::to_string(out) + "]");
  }

  const Eigen::Index kk = static_cast<Eigen::Index>(k) * k * cin;
  RowMat cols = im2col(xv, k, stride, padding, ho, wo);
  Tensor y = Tensor::map(ho, wo, out);
  MatMap ym(y.data(), cols.rows(), out);
  ym.noalias() = cols * ConstMatMap(wv.data(), out, kk).transpose();
  if (bias.defined()) ym.rowwise() += ConstVecMap(bias.value().data(), out).transpose();

  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool keep_cols = weight.requires_grad();
  return make_node(
      std::move(y), std::move(inputs),
      [cols = keep_cols ? std::move(cols) : RowMat(), k, stride, padding, ho, wo, out, kk](Node& self) {
        const Eigen::Index rows = static_cast<Eigen::Index>(ho) * wo;
        ConstMatMap dy(self.grad.data(), rows, out);
        Node& xn = *self.inputs[0];
        Node& wn = *self.inputs[1];
        if (xn.requires_grad) {
          RowMat dcols = dy * ConstMatMap(wn.value.data(), out, kk);
          col2im_add(dcols, xn.grad_buffer(), k, stride, padding, ho, wo);
        }
        if (wn.requires_grad) MatMap(wn.grad_buffer().data(), out, kk).noalias() += dy.transpose() * cols;
        if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
          VecMap(self.inputs[2]->grad_buffer().data(), out) += dy.colwise().sum().transpose();
        }
      });
}

Var shared_spatial_conv(const Var& x, const Var& kernel, const Var& bias, int padding) {
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  require_map(xv, "shared_spatial_conv");
  if (kv.rank() != 2 || kv.dim(0) != kv.dim(1)) throw ShapeError("shared_spatial_conv: kernel must be [k, k]");
  const int k = kv.dim(0), h = xv.height(), w = xv.width(), c = xv.channels();
  const int ho = h + 2 * padding - k + 1, wo = w + 2 * padding - k + 1;
  if (ho < 1 || wo < 1) throw ShapeError("shared_spatial_conv: kernel larger than padded input");
  const double b = bias.defined() ? bias.value().item() : 0.0;

  Tensor y = Tensor::map(ho, wo, c, b);
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      double* dst = &y.at(oy, ox, 0);
      for (int u = 0; u < k; ++u) {
        const int iy = oy + u - padding;
        if (iy < 0 || iy >= h) continue;
        for (int v = 0; v < k; ++v) {
          const int ix = ox + v - padding;
          if (ix < 0 || ix >= w) continue;
          const double kw = kv[static_cast<std::size_t>(u) * k + v];
          const double* src = &xv.at(iy, ix, 0);
          for (int ch = 0; ch < c; ++ch) dst[ch] += kw * src[ch];
        }
      }
    }
  }

  std::vector<Var> inputs{x, kernel};
  if (bias.defined()) inputs.push_back(bias);
  return make_node(std::move(y), std::move(inputs), [k, h, w, c, ho, wo, padding](Node& self) {
    const Tensor& dy = self.grad;
    Node& xn = *self.inputs[0];
    Node& kn = *self.inputs[1];
    Tensor* dx = xn.requires_grad ? &xn.grad_buffer() : nullptr;
    Tensor* dk = kn.requires_grad ? &kn.grad_buffer() : nullptr;
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        const double* g = &dy.at(oy, ox, 0);
        for (int u = 0; u < k; ++u) {
          const int iy = oy + u - padding;
          if (iy < 0 || iy >= h) continue;
          for (int v = 0; v < k; ++v) {
            const int ix = ox + v - padding;
            if (ix < 0 || ix >= w) continue;
            const std::size_t ki = static_cast<std::size_t>(u) * k + v;
            if (dx) {
              const double kw = kn.value[ki];
              double* d = &dx->at(iy, ix, 0);
              for (int ch = 0; ch < c; ++ch) d[ch] += kw * g[ch];
            }
            if (dk) {
              const double* src = &xn.value.at(iy, ix, 0);
              double acc = 0.0;
              for (int ch = 0; ch < c; ++ch) acc += src[ch] * g[ch];
              (*dk)[ki] += acc;
            }
          }
        }
      }
    }
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      self.inputs[2]->grad_buffer()[0] += dy.sum();
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  ConstVecMap bv(b.value().data(), static_cast<Eigen::Index>(y.size()));
  VecMap(y.data(), static_cast<Eigen::Index>(y.size())) += bv;
  return make_node(std::move(y), {a, b}, [](Node& self) {
    const auto n = static_cast<Eigen::Index>(self.grad.size());
    for (auto& in : self.inputs) {
      if (in->requires_grad) VecMap(in->grad_buffer().data(), n) += ConstVecMap(self.grad.data(), n);
    }
  });
}

Var scale(const Var& x, double factor) {
  Tensor y = x.value();
  for (double& v : y.values()) v *= factor;
  return make_node(std::move(y), {x}, [factor](Node& self) {
    Tensor& dx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += factor * self.grad[i];
  });
}

Var gelu(const Var& x) {
  Tensor y = x.value();
  for (double& v : y.values()) v = gelu_value(v);
  return make_node(std::move(y), {x}, [](Node& self) {
    const Tensor& xv = self.inputs[0]->value;
    Tensor& dx = self.inputs[0]->grad_buffer();
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double t = xv[i];
      const double cdf = 0.5 * (1.0 + std::erf(t / std::numbers::sqrt2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * t * t);
      dx[i] += self.grad[i] * (cdf + t * pdf);
    }
  });
}

Var sigmoid(const Var& x) {
  Tensor y = x.value();
  for (double& v : y.values()) v = 1.0 / (1.0 + std::exp(-v));
  return make_node(std::move(y), {x}, [](Node& self) {
    Tensor& dx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double s = self.value[i];
      dx[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Tensor& xv = x.value();
  const int c = xv.shape().back();
  if (gamma.value().size() != static_cast<std::size_t>(c) || beta.value().size() != static_cast<std::size_t>(c)) {
    throw ShapeError("layer_norm: gamma/beta width must match channels");
  }
  const std::size_t n = xv.size() / static_cast<std::size_t>(c);
  Tensor y(xv.shape());
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double* src = xv.data() + p * c;
    double mean = 0.0;
    for (int i = 0; i < c; ++i) mean += src[i];
    mean /= c;
    double var = 0.0;
    for (int i = 0; i < c; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= c;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[p] = is;
    for (int i = 0; i < c; ++i) {
      const double h = (src[i] - mean) * is;
      xhat[p * c + i] = h;
      y[p * c + i] = h * gamma.value()[i] + beta.value()[i];
    }
  }
  return make_node(std::move(y), {x, gamma, beta},
                   [xhat = std::move(xhat), inv_std = std::move(inv_std), n, c](Node& self) {
                     Node& xn = *self.inputs[0];
                     Node& gn = *self.inputs[1];
                     Node& bn = *self.inputs[2];
                     const Tensor& g = self.grad;
                     if (gn.requires_grad || bn.requires_grad) {
                       Tensor* dg = gn.requires_grad ? &gn.grad_buffer() : nullptr;
                       Tensor* db = bn.requires_grad ? &bn.grad_buffer() : nullptr;
                       for (std::size_t p = 0; p < n; ++p) {
                         for (int i = 0; i < c; ++i) {
                           if (dg) (*dg)[i] += g[p * c + i] * xhat[p * c + i];
                           if (db) (*db)[i] += g[p * c + i];
                         }
                       }
                     }
                     if (xn.requires_grad) {
                       Tensor& dx = xn.grad_buffer();
                       for (std::size_t p = 0; p < n; ++p) {
                         double mean_dh = 0.0, mean_dh_h = 0.0;
                         for (int i = 0; i < c; ++i) {
                           const double dh = g[p * c + i] * gn.value[i];
                           mean_dh += dh;
                           mean_dh_h += dh * xhat[p * c + i];
                         }
                         mean_dh /= c;
                         mean_dh_h /= c;
                         for (int i = 0; i < c; ++i) {
                           const double dh = g[p * c + i] * gn.value[i];
                           dx[p * c + i] += inv_std[p] * (dh - mean_dh - xhat[p * c + i] * mean_dh_h);
                         }
                       }
                     }
                   });
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_map(av, "concat_channels");
  require_map(bv, "concat_channels");
  if (av.height() != bv.height() || av.width() != bv.width()) {
    throw ShapeError("concat_channels: spatial mismatch " + shape_string(av.shape()) + " vs " +
                     shape_string(bv.shape()));
  }
  const int ca = av.channels(), cb = bv.channels();
  Tensor y = Tensor::map(av.height(), av.width(), ca + cb);
  for (std::size_t p = 0; p < av.pixels(); ++p) {
    std::copy_n(av.data() + p * ca, ca, y.data() + p * (ca + cb));
    std::copy_n(bv.data() + p * cb, cb, y.data() + p * (ca + cb) + ca);
  }
  return make_node(std::move(y), {a, b}, [ca, cb](Node& self) {
    const std::size_t pixels = self.value.pixels();
    const int c = ca + cb;
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    if (an.requires_grad) {
      Tensor& d = an.grad_buffer();
      for (std::size_t p = 0; p < pixels; ++p)
        for (int i = 0; i < ca; ++i) d[p * ca + i] += self.grad[p * c + i];
    }
    if (bn.requires_grad) {
      Tensor& d = bn.grad_buffer();
      for (std::size_t p = 0; p < pixels; ++p)
        for (int i = 0; i < cb; ++i) d[p * cb + i] += self.grad[p * c + ca + i];
    }
  });
}

Var slice_channels(const Var& x, int begin, int count) {
  const Tensor& xv = x.value();
  require_map(xv, "slice_channels");
  const int c = xv.channels();
  if (begin < 0 || count < 1 || begin + count > c) throw ShapeError("slice_channels: range out of bounds");
  Tensor y = Tensor::map(xv.height(), xv.width(), count);
  for (std::size_t p = 0; p < xv.pixels(); ++p) {
    std::copy_n(xv.data() + p * c + begin, count, y.data() + p * count);
  }
  return make_node(std::move(y), {x}, [begin, count, c](Node& self) {
    Tensor& d = self.inputs[0]->grad_buffer();
    const std::size_t pixels = self.value.pixels();
    for (std::size_t p = 0; p < pixels; ++p)
      for (int i = 0; i < count; ++i) d[p * c + begin + i] += self.grad[p * count + i];
  });
}

namespace {

void check_attention_shapes(const Tensor& q, const Tensor& k, int heads) {
  require_map(q, "attention(q)");
  require_map(k, "attention(k)");
  if (q.channels() != k.channels()) throw ShapeError("attention: query/key width mismatch");
  if (heads < 1 || q.channels() % heads != 0) {
    throw ShapeError("attention: " + std::to_string(q.channels()) + " channels not divisible by " +
                     std::to_string(heads) + " heads");
  }
}

// Softmax(Q_h K_h^T / sqrt(h)) for one head.
RowMat head_weights(const Tensor& q, const Tensor& k, int head, int hd) {
  const auto nq = static_cast<Eigen::Index>(q.pixels());
  const auto nk = static_cast<Eigen::Index>(k.pixels());
  const int c = q.channels();
  ConstStridedMap qh(q.data() + head * hd, nq, hd, Eigen::OuterStride<>(c));
  ConstStridedMap kh(k.data() + head * hd, nk, hd, Eigen::OuterStride<>(c));
  RowMat s = (qh * kh.transpose()) / std::sqrt(static_cast<double>(hd));
  for (Eigen::Index r = 0; r < nq; ++r) {
    const double m = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - m).exp();
    s.row(r) /= s.row(r).sum();
  }
  return s;
}

}  // namespace

Tensor attention_weights(const Tensor& q, const Tensor& k, int heads) {
  check_attention_shapes(q, k, heads);
  const int hd = q.channels() / heads;
  const int nq = static_cast<int>(q.pixels()), nk = static_cast<int>(k.pixels());
  Tensor out({heads, nq, nk});
  for (int h = 0; h < heads; ++h) {
    RowMat p = head_weights(q, k, h, hd);
    std::copy_n(p.data(), p.size(), out.data() + static_cast<std::size_t>(h) * nq * nk);
  }
  return out;
}

Var attention(const Var& q, const Var& k, const Var& v, int heads) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  check_attention_shapes(qv, kv, heads);
  if (!kv.same_shape(vv)) throw ShapeError("attention: key/value shape mismatch");
  const int c = qv.channels(), hd = c / heads;
  const auto nq = static_cast<Eigen::Index>(qv.pixels());
  const auto nk = static_cast<Eigen::Index>(kv.pixels());

  std::vector<RowMat> probs;
  probs.reserve(static_cast<std::size_t>(heads));
  Tensor y(qv.shape());
  for (int h = 0; h < heads; ++h) {
    probs.push_back(head_weights(qv, kv, h, hd));
    ConstStridedMap vh(vv.data() + h * hd, nk, hd, Eigen::OuterStride<>(c));
    StridedMap(y.data() + h * hd, nq, hd, Eigen::OuterStride<>(c)).noalias() = probs.back() * vh;
  }
  return make_node(std::move(y), {q, k, v}, [probs = std::move(probs), heads, hd, c, nq, nk](Node& self) {
    Node& qn = *self.inputs[0];
    Node& kn = *self.inputs[1];
    Node& vn = *self.inputs[2];
    const double inv = 1.0 / std::sqrt(static_cast<double>(hd));
    const Eigen::OuterStride<> st(c);
    for (int h = 0; h < heads; ++h) {
      const RowMat& p = probs[static_cast<std::size_t>(h)];
      ConstStridedMap dout(self.grad.data() + h * hd, nq, hd, st);
      if (vn.requires_grad) {
        StridedMap(vn.grad_buffer().data() + h * hd, nk, hd, st).noalias() += p.transpose() * dout;
      }
      if (!qn.requires_grad && !kn.requires_grad) continue;
      ConstStridedMap vh(vn.value.data() + h * hd, nk, hd, st);
      RowMat dp = dout * vh.transpose();
      Eigen::VectorXd rowdot = (dp.array() * p.array()).rowwise().sum();
      RowMat ds = p.array() * (dp.colwise() - rowdot).array();
      ds *= inv;
      if (qn.requires_grad) {
        ConstStridedMap kh(kn.value.data() + h * hd, nk, hd, st);
        StridedMap(qn.grad_buffer().data() + h * hd, nq, hd, st).noalias() += ds * kh;
      }
      if (kn.requires_grad) {
        ConstStridedMap qh(qn.value.data() + h * hd, nq, hd, st);
        StridedMap(kn.grad_buffer().data() + h * hd, nk, hd, st).noalias() += ds.transpose() * qh;
      }
    }
  });
}

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  require_map(x, "resize_bilinear");
  if (out_h < 1 || out_w < 1) throw ShapeError("resize_bilinear: empty output");
  const int c = x.channels();
  const auto ty = interp_table(x.height(), out_h);
  const auto tx = interp_table(x.width(), out_w);
  Tensor y = Tensor::map(out_h, out_w, c);
  for (int oy = 0; oy < out_h; ++oy) {
    const Interp& a = ty[static_cast<std::size_t>(oy)];
    for (int ox = 0; ox < out_w; ++ox) {
      const Interp& b = tx[static_cast<std::size_t>(ox)];
      const double w00 = (1 - a.w) * (1 - b.w), w01 = (1 - a.w) * b.w;
      const double w10 = a.w * (1 - b.w), w11 = a.w * b.w;
      const double* p00 = &x.at(a.i0, b.i0, 0);
      const double* p01 = &x.at(a.i0, b.i1, 0);
      const double* p10 = &x.at(a.i1, b.i0, 0);
      const double* p11 = &x.at(a.i1, b.i1, 0);
      double* dst = &y.at(oy, ox, 0);
      for (int ch = 0; ch < c; ++ch) dst[ch] = w00 * p00[ch] + w01 * p01[ch] + w10 * p10[ch] + w11 * p11[ch];
    }
  }
  return y;
}

Var resize_bilinear(const Var& x, int out_h, int out_w) {
  Tensor y = resize_bilinear(x.value(), out_h, out_w);
  const int in_h = x.value().height(), in_w = x.value().width();
  return make_node(std::move(y), {x}, [in_h, in_w, out_h, out_w](Node& self) {
    Tensor& dx = self.inputs[0]->grad_buffer();
    const int c = dx.channels();
    const auto ty = interp_table(in_h, out_h);
    const auto tx = interp_table(in_w, out_w);
    for (int oy = 0; oy < out_h; ++oy) {
      const Interp& a = ty[static_cast<std::size_t>(oy)];
      for (int ox = 0; ox < out_w; ++ox) {
        const Interp& b = tx[static_cast<std::size_t>(ox)];
        const double w00 = (1 - a.w) * (1 - b.w), w01 = (1 - a.w) * b.w;
        const double w10 = a.w * (1 - b.w), w11 = a.w * b.w;
        const double* g = &self.grad.at(oy, ox, 0);
        double* p00 = &dx.at(a.i0, b.i0, 0);
        double* p01 = &dx.at(a.i0, b.i1, 0);
        double* p10 = &dx.at(a.i1, b.i0, 0);
        double* p11 = &dx.at(a.i1, b.i1, 0);
        for (int ch = 0; ch < c; ++ch) {
          p00[ch] += w00 * g[ch];
          p01[ch] += w01 * g[ch];
          p10[ch] += w10 * g[ch];
          p11[ch] += w11 * g[ch];
        }
      }
    }
  });
}

}  // namespace dmssn::ops
