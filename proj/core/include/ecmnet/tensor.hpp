#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecmnet {

/// Raised for invalid shapes, configurations and arguments.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a kernel meets non-finite values it must not propagate.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Shape-only execution: ops propagate shapes and report cost but allocate
// and compute nothing. Used by the budget analysis.
bool meta_mode();

class MetaModeGuard {
 public:
  MetaModeGuard();
  ~MetaModeGuard();
  MetaModeGuard(const MetaModeGuard&) = delete;
  MetaModeGuard& operator=(const MetaModeGuard&) = delete;

 private:
  bool previous_;
  NoGradGuard no_grad_;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward;

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

/// Shared handle to a dense row-major array with optional reverse-mode
/// gradient. Copies alias the same storage.
template <typename T>
class Tensor {
 public:
  using Impl = TensorImpl<T>;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor from(Shape shape, std::vector<T> values);
  static Tensor scalar(T value) { return from({}, {value}); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::int64_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t rank() const { return impl_->shape.size(); }
  std::int64_t numel() const { return ecmnet::numel(impl_->shape); }
  bool is_meta() const { return impl_->data.empty() && numel() > 0; }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  std::span<T> grad() { return impl_->grad_buffer(); }
  std::span<const T> grad() const { return impl_->grad; }
  bool has_grad() const { return !impl_->grad.empty(); }

  T item() const;
  T at(std::initializer_list<std::int64_t> index) const;
  T& at(std::initializer_list<std::int64_t> index);

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
  }

  void zero_grad() { impl_->grad.clear(); }

  /// Reverse sweep from a scalar root (seed 1).
  void backward();
  /// Reverse sweep with an explicit upstream gradient of the same size.
  void backward(std::span<const T> seed);

  /// New leaf holding a copy of the values.
  Tensor detach() const;

  Impl* impl() const { return impl_.get(); }
  const std::shared_ptr<Impl>& shared() const { return impl_; }

 private:
  std::shared_ptr<Impl> impl_;
};

std::int64_t flat_index(const Shape& shape, std::initializer_list<std::int64_t> index);

}  // namespace ecmnet
