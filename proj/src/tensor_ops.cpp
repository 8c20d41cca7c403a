#include <algorithm>
#include <cmath>
#include <numbers>

#include "esvit/error.hpp"
#include "esvit/tensor.hpp"

namespace esvit::autograd {

namespace {

// Gradient buffer of parent `i`, or nullptr when that parent needs none.
std::vector<double>* grad_of(Node& n, std::size_t i) {
  Node& p = *n.parents[i];
  return p.requires_grad ? &p.grad : nullptr;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::kInvalidArgument,
         std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

std::vector<double> copy_of(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

// out[k] = x[index[k]], with a scatter-add VJP.
Tensor gather(const char* op, const Tensor& x, Shape out_shape, std::vector<std::size_t> index) {
  std::vector<double> out(index.size());
  const auto xd = x.data();
  for (std::size_t k = 0; k < index.size(); ++k) out[k] = xd[index[k]];
  return make_result(op, std::move(out_shape), std::move(out), {x},
                     [index = std::move(index)](Node& n) {
                       std::vector<double>& gx = *grad_of(n, 0);
                       for (std::size_t k = 0; k < index.size(); ++k) gx[index[k]] += n.grad[k];
                     });
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* op, const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xd[i]);
  return make_result(op, x.shape(), std::move(out), {x}, [deriv](Node& n) {
    const std::vector<double>& x_val = n.parents[0]->value;
    const std::vector<double>& y_val = n.value;
    std::vector<double>& gx = *grad_of(n, 0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[i] * deriv(x_val[i], y_val[i]);
  });
}

std::size_t last_dim(const Tensor& x, const char* op) {
  require(x.rank() >= 1, std::string(op) + " needs rank >= 1");
  return x.shape().back();
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    std::vector<double> out = copy_of(a);
    const auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
    return make_result("add", a.shape(), std::move(out), {a, b}, [](Node& n) {
      for (std::size_t k = 0; k < 2; ++k) {
        if (auto* g = grad_of(n, k)) {
          for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i];
        }
      }
    });
  }
  if (b.rank() == 1 && a.rank() >= 1 && a.shape().back() == b.dim(0)) {
    const std::size_t d = b.dim(0);
    std::vector<double> out = copy_of(a);
    const auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i % d];
    return make_result("add_bias", a.shape(), std::move(out), {a, b}, [d](Node& n) {
      if (auto* ga = grad_of(n, 0)) {
        for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += n.grad[i];
      }
      if (auto* gb = grad_of(n, 1)) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) (*gb)[i % d] += n.grad[i];
      }
    });
  }
  fail(ErrorKind::kInvalidArgument,
       "add: incompatible shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out = copy_of(a);
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  return make_result("sub", a.shape(), std::move(out), {a, b}, [](Node& n) {
    if (auto* ga = grad_of(n, 0)) {
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += n.grad[i];
    }
    if (auto* gb = grad_of(n, 1)) {
      for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] -= n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out = copy_of(a);
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  return make_result("mul", a.shape(), std::move(out), {a, b}, [](Node& n) {
    const std::vector<double>& a_val = n.parents[0]->value;
    const std::vector<double>& b_val = n.parents[1]->value;
    if (auto* ga = grad_of(n, 0)) {
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += n.grad[i] * b_val[i];
    }
    if (auto* gb = grad_of(n, 1)) {
      for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] += n.grad[i] * a_val[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out = copy_of(a);
  for (double& v : out) v *= c;
  return make_result("scale", a.shape(), std::move(out), {a}, [c](Node& n) {
    std::vector<double>& ga = *grad_of(n, 0);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * n.grad[i];
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result("sum", {}, {s}, {a}, [](Node& n) {
    std::vector<double>& ga = *grad_of(n, 0);
    for (double& g : ga) g += n.grad[0];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    fail(ErrorKind::kInvalidArgument,
         "matmul: incompatible shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      const double* brow = bd.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return make_result("matmul", {m, n}, std::move(out), {a, b},
                     [m, k, n](Node& node) {
                       const std::vector<double>& g = node.grad;
                       const std::vector<double>& a_val = node.parents[0]->value;
                       const std::vector<double>& b_val = node.parents[1]->value;
                       if (auto* ga = grad_of(node, 0)) {
                         for (std::size_t i = 0; i < m; ++i) {
                           const double* grow = g.data() + i * n;
                           for (std::size_t p = 0; p < k; ++p) {
                             const double* brow = b_val.data() + p * n;
                             double acc = 0.0;
                             for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                             (*ga)[i * k + p] += acc;
                           }
                         }
                       }
                       if (auto* gb = grad_of(node, 1)) {
                         for (std::size_t i = 0; i < m; ++i) {
                           const double* grow = g.data() + i * n;
                           for (std::size_t p = 0; p < k; ++p) {
                             const double av = a_val[i * k + p];
                             double* gbrow = gb->data() + p * n;
                             for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                           }
                         }
                       }
                     });
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes) {
  const Shape& in = a.shape();
  require(axes.size() == in.size(), "permute: axis count does not match rank");
  std::vector<bool> seen(in.size(), false);
  for (std::size_t ax : axes) {
    require(ax < in.size() && !seen[ax], "permute: axes must be a permutation");
    seen[ax] = true;
  }
  Shape out_shape(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out_shape[i] = in[axes[i]];
  const auto in_strides = strides_of(in);
  const std::size_t total = a.numel();
  std::vector<std::size_t> index(total);
  std::vector<std::size_t> coord(in.size(), 0);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < coord.size(); ++i) src += coord[i] * in_strides[axes[i]];
    index[k] = src;
    for (std::size_t i = coord.size(); i-- > 0;) {
      if (++coord[i] < out_shape[i]) break;
      coord[i] = 0;
    }
  }
  return gather("permute", a, std::move(out_shape), std::move(index));
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, "transpose expects a rank-2 tensor");
  return permute(a, {1, 0});
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    fail(ErrorKind::kInvalidArgument,
         "reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  }
  return make_result("reshape", std::move(shape), copy_of(a), {a}, [](Node& n) {
    std::vector<double>& ga = *grad_of(n, 0);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i];
  });
}

Tensor softmax_rows(const Tensor& x) {
  const std::size_t d = last_dim(x, "softmax_rows");
  const std::size_t rows = x.numel() / d;
  const auto xd = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xd.data() + r * d;
    double* y = out.data() + r * d;
    const double mx = *std::max_element(in, in + d);
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) total += (y[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < d; ++j) y[j] /= total;
  }
  return make_result("softmax_rows", x.shape(), std::move(out), {x}, [d, rows](Node& n) {
    const std::vector<double>& y_val = n.value;
    std::vector<double>& gx = *grad_of(n, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = y_val.data() + r * d;
      const double* g = n.grad.data() + r * d;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor log_softmax_rows(const Tensor& x) {
  const std::size_t d = last_dim(x, "log_softmax_rows");
  const std::size_t rows = x.numel() / d;
  const auto xd = x.data();
  std::vector<double> out(x.numel());
  std::vector<double> probs(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xd.data() + r * d;
    const double mx = *std::max_element(in, in + d);
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) total += std::exp(in[j] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < d; ++j) {
      out[r * d + j] = in[j] - lse;
      probs[r * d + j] = std::exp(in[j] - lse);
    }
  }
  return make_result("log_softmax_rows", x.shape(), std::move(out), {x},
                     [d, rows, probs = std::move(probs)](Node& n) {
                       std::vector<double>& gx = *grad_of(n, 0);
                       for (std::size_t r = 0; r < rows; ++r) {
                         double gsum = 0.0;
                         for (std::size_t j = 0; j < d; ++j) gsum += n.grad[r * d + j];
                         for (std::size_t j = 0; j < d; ++j) {
                           gx[r * d + j] += n.grad[r * d + j] - probs[r * d + j] * gsum;
                         }
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t d = last_dim(x, "layer_norm");
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    fail(ErrorKind::kInvalidArgument, "layer_norm: gain/bias must have shape [" + std::to_string(d) + "]");
  }
  require(eps > 0.0, "layer_norm: eps must be positive");
  const std::size_t rows = x.numel() / d;
  const auto xd = x.data();
  const auto gd = gain.data();
  const auto bd = bias.data();
  std::vector<double> normed(x.numel());
  std::vector<double> inv_std(rows);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xd.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += in[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (in[j] - mean) * inv_std[r];
      normed[r * d + j] = xh;
      out[r * d + j] = xh * gd[j] + bd[j];
    }
  }
  return make_result("layer_norm", x.shape(), std::move(out), {x, gain, bias},
                     [d, rows, normed = std::move(normed), inv_std = std::move(inv_std)](Node& n) {
                       const std::vector<double>& g_val = n.parents[1]->value;
                       auto* gx = grad_of(n, 0);
                       auto* gg = grad_of(n, 1);
                       auto* gb = grad_of(n, 2);
                       std::vector<double> gxh(d);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* g = n.grad.data() + r * d;
                         const double* xh = normed.data() + r * d;
                         double mean_g = 0.0, mean_gx = 0.0;
                         for (std::size_t j = 0; j < d; ++j) {
                           if (gg) (*gg)[j] += g[j] * xh[j];
                           if (gb) (*gb)[j] += g[j];
                           gxh[j] = g[j] * g_val[j];
                           mean_g += gxh[j];
                           mean_gx += gxh[j] * xh[j];
                         }
                         if (!gx) continue;
                         mean_g /= static_cast<double>(d);
                         mean_gx /= static_cast<double>(d);
                         for (std::size_t j = 0; j < d; ++j) {
                           (*gx)[r * d + j] += inv_std[r] * (gxh[j] - mean_g - xh[j] * mean_gx);
                         }
                       }
                     });
}

Tensor gelu(const Tensor& x) {
  return unary(
      "gelu", x, [](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& first = parts.front().shape();
  require(axis < first.size(), "concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) {
      fail(ErrorKind::kInvalidArgument,
           "concat: shape " + shape_string(s) + " incompatible with " + shape_string(first));
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

  std::vector<std::size_t> widths;
  for (const Tensor& p : parts) widths.push_back(p.dim(axis) * inner);
  const std::size_t out_width = out_shape[axis] * inner;
  std::vector<double> out(outer * out_width);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pd = parts[k].data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pd.data() + o * widths[k], widths[k], out.data() + o * out_width + offset);
    }
    offset += widths[k];
  }
  return make_result("concat", std::move(out_shape), std::move(out), parts,
                     [outer, out_width, widths](Node& n) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         if (auto* g = grad_of(n, k)) {
                           for (std::size_t o = 0; o < outer; ++o) {
                             const double* src = n.grad.data() + o * out_width + off;
                             double* dst = g->data() + o * widths[k];
                             for (std::size_t i = 0; i < widths[k]; ++i) dst[i] += src[i];
                           }
                         }
                         off += widths[k];
                       }
                     });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = x.shape();
  require(axis < s.size(), "slice: axis out of range");
  require(length >= 1 && start + length <= s[axis], "slice: range exceeds dimension");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  Shape out_shape = s;
  out_shape[axis] = length;
  std::vector<std::size_t> index;
  index.reserve(outer * length * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t a = start; a < start + length; ++a) {
      for (std::size_t i = 0; i < inner; ++i) index.push_back((o * s[axis] + a) * inner + i);
    }
  }
  return gather("slice", x, std::move(out_shape), std::move(index));
}

std::vector<Tensor> split(const Tensor& x, std::size_t axis, const std::vector<std::size_t>& sizes) {
  std::size_t total = 0;
  for (std::size_t s : sizes) total += s;
  require(total == x.dim(axis), "split: sizes do not sum to the axis length");
  std::vector<Tensor> parts;
  std::size_t start = 0;
  for (std::size_t s : sizes) {
    parts.push_back(slice(x, axis, start, s));
    start += s;
  }
  return parts;
}

Tensor mean_pool(const Tensor& x, const std::vector<std::size_t>& axes) {
  const Shape& s = x.shape();
  std::vector<bool> reduced(s.size(), false);
  for (std::size_t ax : axes) {
    require(ax < s.size() && !reduced[ax], "mean_pool: invalid axis list");
    reduced[ax] = true;
  }
  Shape out_shape;
  std::size_t count = 1;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (reduced[i]) {
      count *= s[i];
    } else {
      out_shape.push_back(s[i]);
    }
  }
  const auto out_strides = strides_of(out_shape);
  std::vector<std::size_t> target(x.numel());
  std::vector<std::size_t> coord(s.size(), 0);
  for (std::size_t k = 0; k < target.size(); ++k) {
    std::size_t t = 0, o = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!reduced[i]) t += coord[i] * out_strides[o++];
    }
    target[k] = t;
    for (std::size_t i = s.size(); i-- > 0;) {
      if (++coord[i] < s[i]) break;
      coord[i] = 0;
    }
  }
  std::vector<double> out(shape_numel(out_shape), 0.0);
  const auto xd = x.data();
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t k = 0; k < target.size(); ++k) out[target[k]] += xd[k];
  for (double& v : out) v *= inv;
  return make_result("mean_pool", std::move(out_shape), std::move(out), {x},
                     [target = std::move(target), inv](Node& n) {
                       std::vector<double>& gx = *grad_of(n, 0);
                       for (std::size_t k = 0; k < target.size(); ++k) gx[k] += n.grad[target[k]] * inv;
                     });
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias, std::size_t stride, std::size_t padding) {
  require(stride >= 1, "conv2d: stride must be positive");
  if (x.rank() != 3 || kernels.rank() != 4 || kernels.dim(1) != x.dim(0)) {
    fail(ErrorKind::kInvalidArgument, "conv2d: input " + shape_string(x.shape()) + " incompatible with kernels " +
                                          shape_string(kernels.shape()));
  }
  const std::size_t c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t c_out = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  require(h + 2 * padding >= kh && w + 2 * padding >= kw, "conv2d: kernel larger than padded input");
  if (bias.defined()) require(bias.shape() == Shape{c_out}, "conv2d: bias must have shape [out_channels]");
  const std::size_t ho = (h + 2 * padding - kh) / stride + 1;
  const std::size_t wo = (w + 2 * padding - kw) / stride + 1;
  const std::size_t taps = c_in * kh * kw;
  const std::size_t positions = ho * wo;

  // im2col: cols[q, t] with q = (c, i, j) and t = (oy, ox); out-of-bounds taps stay 0.
  const auto xd = x.data();
  std::vector<double> cols(taps * positions, 0.0);
  std::vector<std::ptrdiff_t> source(taps * positions, -1);
  for (std::size_t c = 0; c < c_in; ++c) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        const std::size_t q = (c * kh + i) * kw + j;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + i) - static_cast<std::ptrdiff_t>(padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + j) - static_cast<std::ptrdiff_t>(padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const std::size_t src = (c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix);
            cols[q * positions + oy * wo + ox] = xd[src];
            source[q * positions + oy * wo + ox] = static_cast<std::ptrdiff_t>(src);
          }
        }
      }
    }
  }

  const auto kd = kernels.data();
  std::vector<double> out(c_out * positions, 0.0);
  for (std::size_t o = 0; o < c_out; ++o) {
    double* orow = out.data() + o * positions;
    if (bias.defined()) std::fill_n(orow, positions, bias.data()[o]);
    for (std::size_t q = 0; q < taps; ++q) {
      const double kv = kd[o * taps + q];
      const double* crow = cols.data() + q * positions;
      for (std::size_t t = 0; t < positions; ++t) orow[t] += kv * crow[t];
    }
  }

  std::vector<Tensor> parents{x, kernels};
  if (bias.defined()) parents.push_back(bias);
  const bool has_bias = bias.defined();
  return make_result(
      "conv2d", {c_out, ho, wo}, std::move(out), parents,
      [c_out, taps, positions, has_bias, cols = std::move(cols), source = std::move(source)](Node& n) {
        const std::vector<double>& g = n.grad;
        const std::vector<double>& k_val = n.parents[1]->value;
        if (auto* gk = grad_of(n, 1)) {
          for (std::size_t o = 0; o < c_out; ++o) {
            const double* grow = g.data() + o * positions;
            for (std::size_t q = 0; q < taps; ++q) {
              const double* crow = cols.data() + q * positions;
              double acc = 0.0;
              for (std::size_t t = 0; t < positions; ++t) acc += grow[t] * crow[t];
              (*gk)[o * taps + q] += acc;
            }
          }
        }
        if (has_bias) {
          if (auto* gb = grad_of(n, 2)) {
            for (std::size_t o = 0; o < c_out; ++o) {
              double acc = 0.0;
              for (std::size_t t = 0; t < positions; ++t) acc += g[o * positions + t];
              (*gb)[o] += acc;
            }
          }
        }
        if (auto* gx = grad_of(n, 0)) {
          std::vector<double> dcol(positions);
          for (std::size_t q = 0; q < taps; ++q) {
            std::fill(dcol.begin(), dcol.end(), 0.0);
            for (std::size_t o = 0; o < c_out; ++o) {
              const double kv = k_val[o * taps + q];
              const double* grow = g.data() + o * positions;
              for (std::size_t t = 0; t < positions; ++t) dcol[t] += kv * grow[t];
            }
            const std::ptrdiff_t* srow = source.data() + q * positions;
            for (std::size_t t = 0; t < positions; ++t) {
              if (srow[t] >= 0) (*gx)[static_cast<std::size_t>(srow[t])] += dcol[t];
            }
          }
        }
      });
}

Tensor extract_patches(const Tensor& x, std::size_t patch) {
  require(patch >= 1, "extract_patches: patch size must be positive");
  if (x.rank() != 3 || x.dim(0) % patch != 0 || x.dim(1) % patch != 0) {
    fail(ErrorKind::kInvalidArgument,
         "extract_patches: image " + shape_string(x.shape()) + " not divisible by patch " + std::to_string(patch));
  }
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const std::size_t nh = h / patch, nw = w / patch;
  const std::size_t width = patch * patch * c;
  std::vector<std::size_t> index;
  index.reserve(x.numel());
  for (std::size_t pr = 0; pr < nh; ++pr) {
    for (std::size_t pc = 0; pc < nw; ++pc) {
      for (std::size_t i = 0; i < patch; ++i) {
        for (std::size_t j = 0; j < patch; ++j) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            index.push_back(((pr * patch + i) * w + (pc * patch + j)) * c + ch);
          }
        }
      }
    }
  }
  return gather("extract_patches", x, {nh * nw, width}, std::move(index));
}

}  // namespace esvit::autograd
