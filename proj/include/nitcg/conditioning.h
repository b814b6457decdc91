// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_CONDITIONING_H_
#define NITCG_CONDITIONING_H_

#include <cstddef>
#include <utility>
#include <vector>

#include "nitcg/matrix.h"
#include "nitcg/tensor.h"

// Target-domain labels and their frame-wise concatenation with features.
//
// Row layout of an extended feature: rows [0, N] hold the (N+1)-dim label,
// rows [N+1, N+1+F) the acoustic features. Label index 0 is "clean",
// indices 1..N are noise types.
namespace nitcg::cond {

inline constexpr std::size_t kCleanIndex = 0;

struct DomainLabel {
  std::vector<float> vec;  // length n_noise + 1
  std::size_t n_noise = 0;

  std::size_t dim() const { return vec.size(); }
  // Index of the hot entry; throws if the vector is not one-hot.
  std::size_t index() const;
  bool operator==(const DomainLabel&) const = default;
};

struct ExtendedFeature {
  Matrix matrix;               // (label_rows + F) x T
  std::size_t label_rows = 0;  // N + 1

  std::size_t feature_rows() const { return matrix.rows - label_rows; }
  std::size_t frames() const { return matrix.cols; }
};

DomainLabel make_label(std::size_t domain_index, std::size_t n_noise);
DomainLabel clean_label(std::size_t n_noise);

// Broadcasts `label` to every frame and stacks it above `features`.
ExtendedFeature append_label(const Matrix& features, const DomainLabel& label);

// Overwrites the label rows; feature rows are copied bit-for-bit.
ExtendedFeature replace_label(const ExtendedFeature& ext, const DomainLabel& label);

// (features, label_rows). Predicted label rows come back unmodified.
std::pair<Matrix, Matrix> split_label(const ExtendedFeature& ext);

// Reads the per-frame label rows back as one label when they are a constant
// one-hot; throws otherwise.
DomainLabel read_label(const ExtendedFeature& ext);

// --- Tensor forms used inside the training graph. Batches are [B, R, T]. ---

// [B, N+1, T] constant tensor holding one label per batch item.
ad::Tensor label_rows_tensor(const std::vector<DomainLabel>& labels, std::size_t frames);

// Stacks label rows [B, L, T] above features [B, F, T]. L may be 0.
ad::Tensor append_label_rows(const ad::Tensor& features, const ad::Tensor& labels);

// Replaces rows [0, L) of `ext` with `label_rows`; differentiable in the
// feature rows of `ext` only. With L = 0 returns `ext` unchanged.
ad::Tensor replace_label_rows(const ad::Tensor& ext, const ad::Tensor& labels);

ad::Tensor feature_rows(const ad::Tensor& ext, std::size_t count);
ad::Tensor label_rows(const ad::Tensor& ext, std::size_t count);

// Batch validator: every item's label rows are one constant one-hot vector.
// Throws ShapeError naming the first offending item.
void validate_label_batch(const ad::Tensor& ext, std::size_t label_rows);

}  // namespace nitcg::cond

#endif  // NITCG_CONDITIONING_H_
