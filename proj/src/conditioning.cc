// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nitcg/conditioning.h"

#include <string>

#include "nitcg/error.h"
#include "nitcg/ops.h"

namespace nitcg::cond {

std::size_t DomainLabel::index() const {
  std::size_t hot = vec.size();
  for (std::size_t i = 0; i < vec.size(); ++i) {
    if (vec[i] == 1.0f) {
      if (hot != vec.size()) throw ShapeError("label has more than one hot entry");
      hot = i;
    } else if (vec[i] != 0.0f) {
      throw ShapeError("label is not one-hot");
    }
  }
  if (hot == vec.size()) throw ShapeError("label has no hot entry");
  return hot;
}

DomainLabel make_label(std::size_t domain_index, std::size_t n_noise) {
  if (domain_index > n_noise) {
    throw InputError("domain index " + std::to_string(domain_index) + " out of range [0, " +
                     std::to_string(n_noise) + "]");
  }
  DomainLabel label;
  label.n_noise = n_noise;
  label.vec.assign(n_noise + 1, 0.0f);
  label.vec[domain_index] = 1.0f;
  return label;
}

DomainLabel clean_label(std::size_t n_noise) { return make_label(kCleanIndex, n_noise); }

ExtendedFeature append_label(const Matrix& features, const DomainLabel& label) {
  if (features.cols == 0) throw ShapeError("append_label: features have no frames");
  ExtendedFeature ext;
  ext.label_rows = label.dim();
  ext.matrix = Matrix(label.dim() + features.rows, features.cols);
  for (std::size_t r = 0; r < label.dim(); ++r) {
    for (std::size_t c = 0; c < features.cols; ++c) ext.matrix(r, c) = label.vec[r];
  }
  std::copy(features.values.begin(), features.values.end(),
            ext.matrix.values.begin() + static_cast<long>(label.dim() * features.cols));
  return ext;
}

ExtendedFeature replace_label(const ExtendedFeature& ext, const DomainLabel& label) {
  if (label.dim() != ext.label_rows) {
    throw ShapeError("replace_label: label has " + std::to_string(label.dim()) +
                     " entries, extended feature carries " + std::to_string(ext.label_rows));
  }
  if (ext.matrix.rows < ext.label_rows) throw ShapeError("replace_label: malformed extended feature");
  ExtendedFeature out = ext;
  for (std::size_t r = 0; r < label.dim(); ++r) {
    for (std::size_t c = 0; c < ext.matrix.cols; ++c) out.matrix(r, c) = label.vec[r];
  }
  return out;
}

std::pair<Matrix, Matrix> split_label(const ExtendedFeature& ext) {
  if (ext.matrix.rows <= ext.label_rows) {
    throw ShapeError("split_label: " + std::to_string(ext.matrix.rows) + " rows cannot hold " +
                     std::to_string(ext.label_rows) + " label rows plus features");
  }
  const std::size_t cols = ext.matrix.cols;
  Matrix labels(ext.label_rows, cols);
  Matrix features(ext.matrix.rows - ext.label_rows, cols);
  const auto split = ext.matrix.values.begin() + static_cast<long>(ext.label_rows * cols);
  std::copy(ext.matrix.values.begin(), split, labels.values.begin());
  std::copy(split, ext.matrix.values.end(), features.values.begin());
  return {std::move(features), std::move(labels)};
}

DomainLabel read_label(const ExtendedFeature& ext) {
  auto [features, labels] = split_label(ext);
  if (labels.rows == 0) throw ShapeError("read_label: no label rows");
  DomainLabel label;
  label.n_noise = labels.rows - 1;
  for (std::size_t r = 0; r < labels.rows; ++r) {
    const float v = labels(r, 0);
    for (std::size_t c = 1; c < labels.cols; ++c) {
      if (labels(r, c) != v) throw ShapeError("read_label: label rows vary across frames");
    }
    label.vec.push_back(v);
  }
  label.index();
  return label;
}

ad::Tensor label_rows_tensor(const std::vector<DomainLabel>& labels, std::size_t frames) {
  if (labels.empty()) throw ShapeError("label_rows_tensor: empty batch");
  const std::size_t dim = labels[0].dim();
  std::vector<float> values;
  values.reserve(labels.size() * dim * frames);
  for (const auto& l : labels) {
    if (l.dim() != dim) throw ShapeError("label_rows_tensor: mixed label dimensions in batch");
    for (std::size_t r = 0; r < dim; ++r) values.insert(values.end(), frames, l.vec[r]);
  }
  return ad::Tensor::from({labels.size(), dim, frames}, std::move(values));
}

ad::Tensor append_label_rows(const ad::Tensor& features, const ad::Tensor& labels) {
  if (!labels.defined()) return features;
  return ad::concat({labels, features}, 1);
}

ad::Tensor replace_label_rows(const ad::Tensor& ext, const ad::Tensor& labels) {
  if (!labels.defined()) return ext;
  const std::size_t l = labels.dim(1);
  if (ext.rank() != 3 || labels.rank() != 3 || ext.dim(0) != labels.dim(0) ||
      ext.dim(2) != labels.dim(2) || ext.dim(1) <= l) {
    throw ShapeError("replace_label_rows: cannot place " + ad::shape_str(labels.shape()) +
                     " into " + ad::shape_str(ext.shape()));
  }
  return ad::concat({labels.detach(), feature_rows(ext, l)}, 1);
}

ad::Tensor feature_rows(const ad::Tensor& ext, std::size_t count) {
  if (count == 0) return ext;
  return ad::slice(ext, 1, count, ext.dim(1) - count);
}

ad::Tensor label_rows(const ad::Tensor& ext, std::size_t count) {
  if (count == 0) return {};
  return ad::slice(ext, 1, 0, count);
}

void validate_label_batch(const ad::Tensor& ext, std::size_t label_rows) {
  if (label_rows == 0) return;
  if (ext.rank() != 3 || ext.dim(1) <= label_rows) {
    throw ShapeError("label batch " + ad::shape_str(ext.shape()) + " cannot carry " +
                     std::to_string(label_rows) + " label rows");
  }
  const std::size_t rows = ext.dim(1), frames = ext.dim(2);
  const auto v = ext.data();
  for (std::size_t b = 0; b < ext.dim(0); ++b) {
    std::size_t hot = 0;
    for (std::size_t r = 0; r < label_rows; ++r) {
      const float first = v[(b * rows + r) * frames];
      if (first != 0.0f && first != 1.0f) {
        throw ShapeError("batch item " + std::to_string(b) + ": label row " + std::to_string(r) +
                         " is not binary");
      }
      for (std::size_t t = 1; t < frames; ++t) {
        if (v[(b * rows + r) * frames + t] != first) {
          throw ShapeError("batch item " + std::to_string(b) + ": label row " + std::to_string(r) +
                           " varies across frames");
        }
      }
      hot += first == 1.0f ? 1 : 0;
    }
    if (hot != 1) throw ShapeError("batch item " + std::to_string(b) + ": label is not one-hot");
  }
}

}  // namespace nitcg::cond
