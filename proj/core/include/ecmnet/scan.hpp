#pragma once

#include <cstdint>

#include "ecmnet/tensor.hpp"

namespace ecmnet::scan {

constexpr int kDirections = 4;

/// Grid position (h·W + w) visited at step t of direction `dir`:
/// 0 row-major, 1 column-major, 2 and 3 their reversals.
std::int64_t scan_position(int dir, std::int64_t t, std::int64_t h, std::int64_t w);

/// (B,C,H,W) → (B,4,C,H·W).
template <typename T>
Tensor<T> cross_scan(const Tensor<T>& x);

/// (B,4,C,H·W) → (B,C,H,W): each direction un-permuted, then summed.
template <typename T>
Tensor<T> cross_merge(const Tensor<T>& y, std::int64_t h, std::int64_t w);

/// Selective state-space recurrence over G independent groups of channels.
///   u, delta : (B, G·D, L)       delta > 0
///   a        : (G·D, N)          continuous-time state matrix (negative)
///   b, c     : (B, G, N, L)      input-dependent projections per group
///   d        : (G·D)             skip coefficient
/// h_t = exp(delta_t·a) ⊙ h_{t-1} + delta_t·b_t·u_t,  y_t = c_t·h_t + d·u_t.
/// Throws NumericalError when inputs or outputs are not finite.
template <typename T>
Tensor<T> selective_scan(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& a, const Tensor<T>& b,
                         const Tensor<T>& c, const Tensor<T>& d);

/// Test hook: when set, cross_scan emits direction 1 in row-major order
/// (cross_merge is unaffected, so the pair no longer round-trips).
void set_cross_scan_fault(bool on);
bool cross_scan_fault();

}  // namespace ecmnet::scan
