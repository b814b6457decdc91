// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Double-precision reference implementations used as test oracles. These are
// deliberately naive loops, independent of the engine under test.

#ifndef NITCG_TESTS_SUPPORT_REFERENCE_H_
#define NITCG_TESTS_SUPPORT_REFERENCE_H_

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "nitcg/tensor.h"

namespace ref {

using Shape = std::vector<std::size_t>;

struct T {
  Shape shape;
  std::vector<double> v;

  std::size_t size() const { return v.size(); }
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
};

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline T zeros(Shape s) { return {s, std::vector<double>(numel(s), 0.0)}; }

inline T from(const nitcg::ad::Tensor& t) {
  return {t.shape(), std::vector<double>(t.data().begin(), t.data().end())};
}

inline nitcg::ad::Tensor to_tensor(const T& t, bool requires_grad = false) {
  return nitcg::ad::Tensor::from(t.shape, std::vector<float>(t.v.begin(), t.v.end()), requires_grad);
}

// Values are rounded through float so oracle and engine see the same inputs.
inline T randn(Shape s, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  T t = zeros(std::move(s));
  for (auto& x : t.v) x = static_cast<float>(nd(rng));
  return t;
}

inline T uniform(Shape s, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> ud(lo, hi);
  T t = zeros(std::move(s));
  for (auto& x : t.v) x = static_cast<float>(ud(rng));
  return t;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline T map(const T& a, const std::function<double(double)>& f) {
  T out = a;
  for (auto& x : out.v) x = f(x);
  return out;
}

// [B,Ci,H,W] * [Co,Ci,kh,kw] (+ bias) -> [B,Co,Ho,Wo]; the 6-nested-loop definition.
inline T conv2d(const T& in, const T& w, const T* bias, std::size_t sh, std::size_t sw, std::size_t ph,
                std::size_t pw) {
  const std::size_t B = in.shape[0], Ci = in.shape[1], H = in.shape[2], W = in.shape[3];
  const std::size_t Co = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  const std::size_t Ho = (H + 2 * ph - kh) / sh + 1, Wo = (W + 2 * pw - kw) / sw + 1;
  T out = zeros({B, Co, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t co = 0; co < Co; ++co)
      for (std::size_t y = 0; y < Ho; ++y)
        for (std::size_t x = 0; x < Wo; ++x) {
          double acc = bias ? (*bias)[co] : 0.0;
          for (std::size_t ci = 0; ci < Ci; ++ci)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long iy = static_cast<long>(y * sh + i) - static_cast<long>(ph);
                const long ix = static_cast<long>(x * sw + j) - static_cast<long>(pw);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                acc += in[((b * Ci + ci) * H + iy) * W + ix] * w[((co * Ci + ci) * kh + i) * kw + j];
              }
          out[((b * Co + co) * Ho + y) * Wo + x] = acc;
        }
  return out;
}

// Splits axis 1 of [B,C,...] into halves a, b; returns a * sigmoid(b).
inline T glu(const T& x) {
  const std::size_t B = x.shape[0], C = x.shape[1], inner = x.size() / (B * C), half = C / 2;
  Shape s = x.shape;
  s[1] = half;
  T out = zeros(s);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < half; ++c)
      for (std::size_t k = 0; k < inner; ++k) {
        const double a = x[(b * C + c) * inner + k];
        const double g = x[(b * C + c + half) * inner + k];
        out[(b * half + c) * inner + k] = a * sigmoid(g);
      }
  return out;
}

// Two-pass per-(b, c) mean and biased variance over the remaining axes.
inline T instance_norm(const T& x, const T& gamma, const T& beta, double eps = 1e-5) {
  const std::size_t B = x.shape[0], C = x.shape[1], inner = x.size() / (B * C);
  T out = zeros(x.shape);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t base = (b * C + c) * inner;
      double mean = 0;
      for (std::size_t k = 0; k < inner; ++k) mean += x[base + k];
      mean /= static_cast<double>(inner);
      double var = 0;
      for (std::size_t k = 0; k < inner; ++k) var += (x[base + k] - mean) * (x[base + k] - mean);
      var /= static_cast<double>(inner);
      for (std::size_t k = 0; k < inner; ++k) {
        out[base + k] = gamma[c] * (x[base + k] - mean) / std::sqrt(var + eps) + beta[c];
      }
    }
  return out;
}

// [B, C*r*r, H, W] -> [B, C, rH, rW].
inline T pixel_shuffle(const T& x, std::size_t r) {
  const std::size_t B = x.shape[0], Cin = x.shape[1], H = x.shape[2], W = x.shape[3], C = Cin / (r * r);
  T out = zeros({B, C, H * r, W * r});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w)
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j) {
              out[((b * C + c) * H * r + r * h + i) * W * r + r * w + j] =
                  x[((b * Cin + c * r * r + i * r + j) * H + h) * W + w];
            }
  return out;
}

inline T add(const T& a, const T& b) {
  T out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline T crop(const T& x, std::size_t rows, std::size_t cols) {
  const std::size_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  T out = zeros({B, C, rows, cols});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[((b * C + c) * rows + i) * cols + j] = x[((b * C + c) * H + i) * W + j];
  return out;
}

inline double dot(const T& a, const T& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Central difference of the scalar f at x along every coordinate.
inline std::vector<double> numeric_grad(const std::function<double(const T&)>& f, T x, double h = 1e-3) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

// ||a - fd|| / (||fd|| + 1e-8).
inline double grad_error(std::span<const float> autodiff, const std::vector<double>& fd) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    num += (autodiff[i] - fd[i]) * (autodiff[i] - fd[i]);
    den += fd[i] * fd[i];
  }
  return std::sqrt(num) / (std::sqrt(den) + 1e-8);
}

}  // namespace ref

#endif  // NITCG_TESTS_SUPPORT_REFERENCE_H_
