#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ecmnet/tensor.hpp"

// Differentiable primitives over NCHW feature maps and (B, ..., L) sequences.
// Every op records its cost with the active profiler and, in meta mode,
// propagates shapes only.

namespace ecmnet::ops {

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> silu(const Tensor<T>& x);
/// Exact (erf-based) GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);
template <typename T>
Tensor<T> softplus(const Tensor<T>& x);
template <typename T>
Tensor<T> exp(const Tensor<T>& x);
template <typename T>
Tensor<T> neg(const Tensor<T>& x);

/// Sum of all elements as a rank-0 tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
/// Mean over the listed axes, keeping them as size-1 extents.
template <typename T>
Tensor<T> mean(const Tensor<T>& x, const std::vector<int>& axes);
/// Max over the listed axes, keeping them as size-1 extents. The gradient
/// flows to the first maximal element.
template <typename T>
Tensor<T> amax(const Tensor<T>& x, const std::vector<int>& axes);

struct Conv2dOptions {
  int stride_h = 1, stride_w = 1;
  int pad_h = 0, pad_w = 0;
  int dilation_h = 1, dilation_w = 1;
  int groups = 1;
};

/// x (B,Cin,H,W), weight (Cout,Cin/groups,kh,kw), optional bias (Cout).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias,
                 const Conv2dOptions& options);

/// Per-channel batch normalization. In training mode batch statistics are
/// used and the running buffers are updated in place.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                     T momentum, T eps);

/// Layer normalization across channels at every (b, h, w) position.
template <typename T>
Tensor<T> channel_layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                             T eps);

/// Non-overlapping average pooling with a square window.
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, int window);

/// Bilinear resize with half-pixel centers (align_corners = false).
template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
template <typename T>
Tensor<T> narrow(const Tensor<T>& x, int axis, std::int64_t start, std::int64_t length);
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Output channel i takes input channel (i mod g)·(C/g) + i div g.
template <typename T>
Tensor<T> channel_shuffle(const Tensor<T>& x, int groups);

/// Cross-entropy over non-ignored pixels of logits (B,K,H,W). Labels are
/// (B·H·W) integers in [0,K) or ignore_index. Returns the mean loss; when
/// every pixel is ignored the loss is 0 and `all_ignored` is set.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<std::int32_t>& labels,
                        std::int32_t ignore_index, const std::vector<T>* class_weights,
                        bool* all_ignored = nullptr);

}  // namespace ecmnet::ops
