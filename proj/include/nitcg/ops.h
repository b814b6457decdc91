// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_OPS_H_
#define NITCG_OPS_H_

#include <cstddef>
#include <vector>

#include "nitcg/tensor.h"

namespace nitcg::ad {

// Elementwise arithmetic; operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
Tensor add_scalar(const Tensor& a, float value);
Tensor square(const Tensor& a);

Tensor abs(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
// x * sigmoid(x)
Tensor silu(const Tensor& a);
// Gradient passes where lo <= x <= hi.
Tensor clamp(const Tensor& a, float lo, float hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
// Contiguous range [start, start + length) along `axis`.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start,
             std::size_t length);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

struct Conv2dOptions {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
};

// Cross-correlation of [C_in,H,W] or [B,C_in,H,W] with [C_out,C_in,kH,kW].
// `bias` may be undefined; otherwise it has shape [C_out]. Zero padding.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              const Conv2dOptions& options = {});

// Gated linear unit: splits `axis` into halves (a, b), returns a * sigmoid(b).
Tensor glu(const Tensor& x, std::size_t axis);

// Per-instance, per-channel normalisation of [C,...] or [B,C,...] inputs
// (rank 3 is read as unbatched), followed by the affine gamma/beta of shape [C].
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     float eps = 1e-5f);

// Depth-to-space: out(c, r*h+i, r*w+j) = in(c*r*r + i*r + j, h, w).
Tensor pixel_shuffle(const Tensor& x, std::size_t r);
// Exact inverse of pixel_shuffle with the same index convention.
Tensor space_to_depth(const Tensor& x, std::size_t r);

}  // namespace nitcg::ad

#endif  // NITCG_OPS_H_
