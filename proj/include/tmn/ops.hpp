// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tmn/tensor.hpp"

namespace tmn::ad {

// Shapes are checked strictly; there is no broadcasting beyond scalar
// scaling. Rank-2 tensors are matrices, rank-1 are vectors, {1} is a scalar.

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k]x[k,n] -> [m,n]
Tensor transpose(const Tensor& a);                // [m,n] -> [n,m]

Tensor add(const Tensor& a, const Tensor& b);  // same shape
Tensor sub(const Tensor& a, const Tensor& b);  // same shape
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise, same shape

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor abs(const Tensor& x);  // subgradient 0 at 0
Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor reciprocal(const Tensor& x);

Tensor scale(const Tensor& x, double c);

/// Concatenate along axis 0 (rank 1 or 2) or axis 1 (rank 2).
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

Tensor bias_add(const Tensor& m, const Tensor& bias);  // [n,d] + [d]
Tensor row_sum(const Tensor& m);                       // [n,d] -> [n]
Tensor scale_rows(const Tensor& m, const Tensor& s);   // [n,d] * [n] per row

Tensor gather_rows(const Tensor& m, const std::vector<std::size_t>& idx);
Tensor gather(const Tensor& v, const std::vector<std::size_t>& idx);  // rank 1

Tensor reshape(const Tensor& t, std::vector<std::size_t> shape);
Tensor sum(const Tensor& t);  // all elements -> {1}

/// Sum rows of values[n,d] into out[num_segments,d] by segment id.
/// Segments may be empty (they stay zero).
Tensor segment_sum(const Tensor& values, const std::vector<std::size_t>& ids,
                   std::size_t num_segments);

/// Softmax of scores[n] within each segment, numerically stabilised by
/// per-segment max subtraction. Every segment in [0, num_segments) must be
/// non-empty: softmax over an empty set has no value.
Tensor segment_softmax(const Tensor& scores, const std::vector<std::size_t>& ids,
                       std::size_t num_segments);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Central finite differences against the reverse pass for every element of
/// every listed parameter. f() must rebuild the loss from the parameters'
/// current values. Relative error is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double epsilon = 1e-5);

}  // namespace tmn::ad
