// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nitcg/ops.h"

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "nitcg/error.h"

namespace nitcg::ad {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

inline float stable_sigmoid(float x) {
  if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
  const float e = std::exp(x);
  return e / (1.0f + e);
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  const auto in = a.data();
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return Tensor::make_result(a.shape(), std::move(out), {a}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    float* g = p.grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      g[i] += self.grad[i] * deriv(p.data[i], self.data[i]);
    }
  });
}

// Splits `shape` around `axis` into (outer, extent, inner) strides.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

// Accepts [C,H,W] or [B,C,H,W]; returns the 4-d view.
Shape as_batched(const Tensor& x, const char* op) {
  if (x.rank() == 3) return {1, x.dim(0), x.dim(1), x.dim(2)};
  if (x.rank() == 4) return x.shape();
  throw ShapeError(std::string(op) + ": expected [C,H,W] or [B,C,H,W], got " +
                   shape_str(x.shape()));
}

Shape restore_rank(const Tensor& x, Shape batched) {
  if (x.rank() == 3) batched.erase(batched.begin());
  return batched;
}

struct ConvGeometry {
  std::size_t batch, c_in, h, w, c_out, kh, kw, h_out, w_out;
  Conv2dOptions opt;
  std::size_t patch() const { return c_in * kh * kw; }
  std::size_t positions() const { return h_out * w_out; }
};

void im2col(const float* image, const ConvGeometry& g, float* cols) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        float* row = cols + ((c * g.kh + ki) * g.kw + kj) * positions;
        for (std::size_t oh = 0; oh < g.h_out; ++oh) {
          const long ih = static_cast<long>(oh * g.opt.stride_h + ki) -
                          static_cast<long>(g.opt.pad_h);
          float* dst = row + oh * g.w_out;
          if (ih < 0 || ih >= static_cast<long>(g.h)) {
            std::fill(dst, dst + g.w_out, 0.0f);
            continue;
          }
          const float* src = image + (c * g.h + static_cast<std::size_t>(ih)) * g.w;
          for (std::size_t ow = 0; ow < g.w_out; ++ow) {
            const long iw = static_cast<long>(ow * g.opt.stride_w + kj) -
                            static_cast<long>(g.opt.pad_w);
            dst[ow] = (iw < 0 || iw >= static_cast<long>(g.w)) ? 0.0f : src[iw];
          }
        }
      }
    }
  }
}

void col2im_add(const float* cols, const ConvGeometry& g, float* image) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const float* row = cols + ((c * g.kh + ki) * g.kw + kj) * positions;
        for (std::size_t oh = 0; oh < g.h_out; ++oh) {
          const long ih = static_cast<long>(oh * g.opt.stride_h + ki) -
                          static_cast<long>(g.opt.pad_h);
          if (ih < 0 || ih >= static_cast<long>(g.h)) continue;
          float* dst = image + (c * g.h + static_cast<std::size_t>(ih)) * g.w;
          const float* src = row + oh * g.w_out;
          for (std::size_t ow = 0; ow < g.w_out; ++ow) {
            const long iw = static_cast<long>(ow * g.opt.stride_w + kj) -
                            static_cast<long>(g.opt.pad_w);
            if (iw >= 0 && iw < static_cast<long>(g.w)) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      float* g = p->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      const float sign = k == 0 ? 1.0f : -1.0f;
      float* g = p.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += sign * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      float* g = pa.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      float* g = pb.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor scale(const Tensor& a, float factor) {
  return unary(
      a, [factor](float x) { return factor * x; },
      [factor](float, float) { return factor; });
}

Tensor add_scalar(const Tensor& a, float value) {
  return unary(
      a, [value](float x) { return x + value; }, [](float, float) { return 1.0f; });
}

Tensor square(const Tensor& a) {
  return unary(
      a, [](float x) { return x * x; }, [](float x, float) { return 2.0f * x; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, [](float x) { return std::fabs(x); },
      [](float x, float) { return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f); });
}

Tensor log(const Tensor& a) {
  return unary(
      a, [](float x) { return std::log(x); }, [](float x, float) { return 1.0f / x; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, [](float x) { return stable_sigmoid(x); },
      [](float, float y) { return y * (1.0f - y); });
}

Tensor silu(const Tensor& a) {
  return unary(
      a, [](float x) { return x * stable_sigmoid(x); },
      [](float x, float) {
        const float s = stable_sigmoid(x);
        return s * (1.0f + x * (1.0f - s));
      });
}

Tensor clamp(const Tensor& a, float lo, float hi) {
  return unary(
      a, [lo, hi](float x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](float x, float) { return (x >= lo && x <= hi) ? 1.0f : 0.0f; });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (float v : a.data()) total += v;
  return Tensor::make_result({1}, {static_cast<float>(total)}, {a}, [](Node& self) {
    Node& p = *self.parents[0];
    float* g = p.grad_buffer();
    const float up = self.grad[0];
    for (std::size_t i = 0; i < p.data.size(); ++i) g[i] += up;
  });
}

Tensor mean(const Tensor& a) {
  return scale(sum(a), 1.0f / static_cast<float>(a.size()));
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  std::vector<float> out(a.data().begin(), a.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    float* g = p.grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisView v = axis_view(a.shape(), axis);
  if (length == 0 || start + length > v.extent) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") outside axis " +
                     std::to_string(axis) + " of " + shape_str(a.shape()));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  std::vector<float> out(v.outer * length * v.inner);
  const auto in = a.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    const float* src = in.data() + (o * v.extent + start) * v.inner;
    std::copy(src, src + length * v.inner, out.begin() + o * length * v.inner);
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), {a},
                             [v, start, length](Node& self) {
                               Node& p = *self.parents[0];
                               float* g = p.grad_buffer();
                               for (std::size_t o = 0; o < v.outer; ++o) {
                                 float* dst = g + (o * v.extent + start) * v.inner;
                                 const float* src = self.grad.data() + o * length * v.inner;
                                 for (std::size_t i = 0; i < length * v.inner; ++i) dst[i] += src[i];
                               }
                             });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape out_shape = parts[0].shape();
  axis_view(out_shape, axis);
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != out_shape.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != out_shape[i]) {
        throw ShapeError("concat: " + shape_str(s) + " incompatible with " +
                         shape_str(parts[0].shape()) + " along axis " + std::to_string(axis));
      }
    }
    total += s[axis];
  }
  out_shape[axis] = total;
  const AxisView v = axis_view(out_shape, axis);
  std::vector<float> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t ext = p.dim(axis);
    const auto in = p.data();
    for (std::size_t o = 0; o < v.outer; ++o) {
      std::copy(in.begin() + o * ext * v.inner, in.begin() + (o + 1) * ext * v.inner,
                out.begin() + (o * v.extent + offset) * v.inner);
    }
    offsets.push_back(offset);
    offset += ext;
  }
  return Tensor::make_result(
      std::move(out_shape), std::move(out), parts, [v, offsets](Node& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
          Node& p = *self.parents[k];
          if (!p.requires_grad) continue;
          const std::size_t ext = p.data.size() / (v.outer * v.inner);
          float* g = p.grad_buffer();
          for (std::size_t o = 0; o < v.outer; ++o) {
            const float* src = self.grad.data() + (o * v.extent + offsets[k]) * v.inner;
            float* dst = g + o * ext * v.inner;
            for (std::size_t i = 0; i < ext * v.inner; ++i) dst[i] += src[i];
          }
        }
      });
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              const Conv2dOptions& options) {
  const Shape in = as_batched(input, "conv2d");
  if (weight.rank() != 4) {
    throw ShapeError("conv2d: weight must be [C_out,C_in,kH,kW], got " + shape_str(weight.shape()));
  }
  if (weight.dim(1) != in[1]) {
    throw ShapeError("conv2d: input has " + std::to_string(in[1]) + " channels but weight " +
                     shape_str(weight.shape()) + " expects " + std::to_string(weight.dim(1)));
  }
  if (options.stride_h == 0 || options.stride_w == 0) throw ShapeError("conv2d: zero stride");
  ConvGeometry g{in[0], in[1], in[2], in[3], weight.dim(0), weight.dim(2), weight.dim(3), 0, 0,
                 options};
  const std::size_t padded_h = g.h + 2 * options.pad_h;
  const std::size_t padded_w = g.w + 2 * options.pad_w;
  if (padded_h < g.kh || padded_w < g.kw) {
    throw ShapeError("conv2d: kernel " + shape_str(weight.shape()) + " larger than padded input " +
                     shape_str(input.shape()));
  }
  g.h_out = (padded_h - g.kh) / options.stride_h + 1;
  g.w_out = (padded_w - g.kw) / options.stride_w + 1;
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.c_out)) {
    throw ShapeError("conv2d: bias must be [" + std::to_string(g.c_out) + "], got " +
                     shape_str(bias.shape()));
  }

  const std::size_t positions = g.positions();
  const std::size_t patch = g.patch();
  std::vector<float> out(g.batch * g.c_out * positions);
  std::vector<float> cols(patch * positions);
  ConstMatrixMap w_mat(weight.data().data(), g.c_out, patch);
  for (std::size_t b = 0; b < g.batch; ++b) {
    im2col(input.data().data() + b * g.c_in * g.h * g.w, g, cols.data());
    MatrixMap out_mat(out.data() + b * g.c_out * positions, g.c_out, positions);
    out_mat.noalias() = w_mat * ConstMatrixMap(cols.data(), patch, positions);
    if (bias.defined()) {
      for (std::size_t c = 0; c < g.c_out; ++c) out_mat.row(c).array() += bias.at(c);
    }
  }

  Shape out_shape = restore_rank(input, {g.batch, g.c_out, g.h_out, g.w_out});
  std::vector<Tensor> parents{input, weight};
  if (bias.defined()) parents.push_back(bias);
  return Tensor::make_result(std::move(out_shape), std::move(out), parents, [g](Node& self) {
    Node& x = *self.parents[0];
    Node& w = *self.parents[1];
    Node* b = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
    const std::size_t positions = g.positions();
    const std::size_t patch = g.patch();
    std::vector<float> cols(patch * positions);
    ConstMatrixMap w_mat(w.data.data(), g.c_out, patch);
    for (std::size_t n = 0; n < g.batch; ++n) {
      ConstMatrixMap dout(self.grad.data() + n * g.c_out * positions, g.c_out, positions);
      if (w.requires_grad) {
        im2col(x.data.data() + n * g.c_in * g.h * g.w, g, cols.data());
        MatrixMap dw(w.grad_buffer(), g.c_out, patch);
        dw.noalias() += dout * ConstMatrixMap(cols.data(), patch, positions).transpose();
      }
      if (b && b->requires_grad) {
        float* db = b->grad_buffer();
        for (std::size_t c = 0; c < g.c_out; ++c) db[c] += dout.row(c).sum();
      }
      if (x.requires_grad) {
        MatrixMap dcols(cols.data(), patch, positions);
        dcols.noalias() = w_mat.transpose() * dout;
        col2im_add(cols.data(), g, x.grad_buffer() + n * g.c_in * g.h * g.w);
      }
    }
  });
}

Tensor glu(const Tensor& x, std::size_t axis) {
  const AxisView v = axis_view(x.shape(), axis);
  if (v.extent % 2 != 0) {
    throw ShapeError("glu: axis " + std::to_string(axis) + " of " + shape_str(x.shape()) +
                     " has odd size " + std::to_string(v.extent));
  }
  const std::size_t half = v.extent / 2;
  Shape out_shape = x.shape();
  out_shape[axis] = half;
  std::vector<float> out(v.outer * half * v.inner);
  const auto in = x.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    const float* a = in.data() + o * v.extent * v.inner;
    const float* gate = a + half * v.inner;
    float* dst = out.data() + o * half * v.inner;
    for (std::size_t i = 0; i < half * v.inner; ++i) dst[i] = a[i] * stable_sigmoid(gate[i]);
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), {x}, [v, half](Node& self) {
    Node& p = *self.parents[0];
    float* g = p.grad_buffer();
    for (std::size_t o = 0; o < v.outer; ++o) {
      const float* a = p.data.data() + o * v.extent * v.inner;
      const float* gate = a + half * v.inner;
      float* ga = g + o * v.extent * v.inner;
      float* gb = ga + half * v.inner;
      const float* up = self.grad.data() + o * half * v.inner;
      for (std::size_t i = 0; i < half * v.inner; ++i) {
        const float s = stable_sigmoid(gate[i]);
        ga[i] += up[i] * s;
        gb[i] += up[i] * a[i] * s * (1.0f - s);
      }
    }
  });
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  if (x.rank() < 2) throw ShapeError("instance_norm: rank must be >= 2, got " + shape_str(x.shape()));
  // Rank 3 is [C,H,W]; rank 4 is [B,C,H,W].
  const bool batched = x.rank() == 4;
  const std::size_t batch = batched ? x.dim(0) : 1;
  const std::size_t channels = batched ? x.dim(1) : x.dim(0);
  const std::size_t spatial = x.size() / (batch * channels);
  if (gamma.size() != channels || beta.size() != channels) {
    throw ShapeError("instance_norm: gamma/beta must have " + std::to_string(channels) +
                     " entries, got " + shape_str(gamma.shape()) + " / " + shape_str(beta.shape()));
  }
  const std::size_t groups = batch * channels;
  std::vector<float> out(x.size());
  std::vector<float> normed(x.size());
  std::vector<float> inv_std(groups);
  const auto in = x.data();
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const float* src = in.data() + gi * spatial;
    double mu = 0.0;
    for (std::size_t i = 0; i < spatial; ++i) mu += src[i];
    mu /= static_cast<double>(spatial);
    double var = 0.0;
    for (std::size_t i = 0; i < spatial; ++i) {
      const double d = src[i] - mu;
      var += d * d;
    }
    var /= static_cast<double>(spatial);
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[gi] = static_cast<float>(istd);
    const std::size_t c = gi % channels;
    for (std::size_t i = 0; i < spatial; ++i) {
      const float xh = static_cast<float>((src[i] - mu) * istd);
      normed[gi * spatial + i] = xh;
      out[gi * spatial + i] = gamma.at(c) * xh + beta.at(c);
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [normed = std::move(normed), inv_std = std::move(inv_std), groups, channels,
       spatial](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        for (std::size_t gi = 0; gi < groups; ++gi) {
          const std::size_t c = gi % channels;
          const float* up = self.grad.data() + gi * spatial;
          const float* xh = normed.data() + gi * spatial;
          double sum_up = 0.0, sum_up_xh = 0.0;
          for (std::size_t i = 0; i < spatial; ++i) {
            sum_up += up[i];
            sum_up_xh += static_cast<double>(up[i]) * xh[i];
          }
          if (pg.requires_grad) pg.grad_buffer()[c] += static_cast<float>(sum_up_xh);
          if (pb.requires_grad) pb.grad_buffer()[c] += static_cast<float>(sum_up);
          if (px.requires_grad) {
            float* g = px.grad_buffer() + gi * spatial;
            const double n = static_cast<double>(spatial);
            const double k = pg.data[c] * inv_std[gi];
            const double m_up = sum_up / n;
            const double m_up_xh = sum_up_xh / n;
            for (std::size_t i = 0; i < spatial; ++i) {
              g[i] += static_cast<float>(k * (up[i] - m_up - xh[i] * m_up_xh));
            }
          }
        }
      });
}

namespace {

// Index map shared by pixel_shuffle / space_to_depth: for each element of the
// shuffled (depth-to-space) layout, the flat index in the deep layout.
std::vector<std::size_t> shuffle_index(std::size_t batch, std::size_t channels, std::size_t h,
                                       std::size_t w, std::size_t r) {
  std::vector<std::size_t> index(batch * channels * h * r * w * r);
  std::size_t k = 0;
  const std::size_t deep_c = channels * r * r;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t oh = 0; oh < h * r; ++oh)
        for (std::size_t ow = 0; ow < w * r; ++ow) {
          const std::size_t i = oh % r, j = ow % r;
          const std::size_t src_c = c * r * r + i * r + j;
          index[k++] = ((b * deep_c + src_c) * h + oh / r) * w + ow / r;
        }
  return index;
}

}  // namespace

Tensor pixel_shuffle(const Tensor& x, std::size_t r) {
  const Shape s = as_batched(x, "pixel_shuffle");
  if (r == 0 || s[1] % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: channel count " + std::to_string(s[1]) +
                     " not divisible by r^2 = " + std::to_string(r * r));
  }
  const std::size_t channels = s[1] / (r * r);
  auto index = shuffle_index(s[0], channels, s[2], s[3], r);
  std::vector<float> out(index.size());
  const auto in = x.data();
  for (std::size_t k = 0; k < index.size(); ++k) out[k] = in[index[k]];
  return Tensor::make_result(restore_rank(x, {s[0], channels, s[2] * r, s[3] * r}), std::move(out),
                             {x}, [index = std::move(index)](Node& self) {
                               float* g = self.parents[0]->grad_buffer();
                               for (std::size_t k = 0; k < index.size(); ++k) g[index[k]] += self.grad[k];
                             });
}

Tensor space_to_depth(const Tensor& x, std::size_t r) {
  const Shape s = as_batched(x, "space_to_depth");
  if (r == 0 || s[2] % r != 0 || s[3] % r != 0) {
    throw ShapeError("space_to_depth: spatial dims of " + shape_str(x.shape()) +
                     " not divisible by " + std::to_string(r));
  }
  auto index = shuffle_index(s[0], s[1], s[2] / r, s[3] / r, r);
  std::vector<float> out(index.size());
  const auto in = x.data();
  for (std::size_t k = 0; k < index.size(); ++k) out[index[k]] = in[k];
  return Tensor::make_result(restore_rank(x, {s[0], s[1] * r * r, s[2] / r, s[3] / r}),
                             std::move(out), {x}, [index = std::move(index)](Node& self) {
                               float* g = self.parents[0]->grad_buffer();
                               for (std::size_t k = 0; k < index.size(); ++k) g[k] += self.grad[index[k]];
                             });
}

}  // namespace nitcg::ad
