#include "ecmnet/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "ecmnet/profiler.hpp"

namespace ecmnet {

namespace {
thread_local bool t_grad_enabled = true;
thread_local bool t_meta_mode = false;
}  // namespace

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::int64_t flat_index(const Shape& shape, std::initializer_list<std::int64_t> index) {
  if (index.size() != shape.size()) {
    throw ConfigError("index rank " + std::to_string(index.size()) + " does not match shape " +
                      to_string(shape));
  }
  std::int64_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i < 0 || i >= shape[axis]) throw ConfigError("index out of range for " + to_string(shape));
    flat = flat * shape[axis] + i;
    ++axis;
  }
  return flat;
}

bool grad_enabled() { return t_grad_enabled && !t_meta_mode; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool meta_mode() { return t_meta_mode; }

MetaModeGuard::MetaModeGuard() : previous_(t_meta_mode) { t_meta_mode = true; }
MetaModeGuard::~MetaModeGuard() { t_meta_mode = previous_; }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape) {
  return full(std::move(shape), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  auto impl = std::make_shared<Impl>();
  for (auto d : shape) {
    if (d < 0) throw ConfigError("negative extent in shape " + to_string(shape));
  }
  if (!meta_mode()) impl->data.assign(static_cast<std::size_t>(ecmnet::numel(shape)), value);
  impl->shape = std::move(shape);
  return Tensor(std::move(impl));
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values) {
  if (static_cast<std::int64_t>(values.size()) != ecmnet::numel(shape)) {
    throw ConfigError("value count " + std::to_string(values.size()) + " does not match shape " +
                      to_string(shape));
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ConfigError("item() on tensor of shape " + to_string(shape()));
  return impl_->data.at(0);
}

template <typename T>
T Tensor<T>::at(std::initializer_list<std::int64_t> index) const {
  return impl_->data.at(static_cast<std::size_t>(flat_index(shape(), index)));
}

template <typename T>
T& Tensor<T>::at(std::initializer_list<std::int64_t> index) {
  return impl_->data.at(static_cast<std::size_t>(flat_index(shape(), index)));
}

template <typename T>
void Tensor<T>::backward() {
  if (numel() != 1) throw ConfigError("backward() without seed needs a scalar, got " + to_string(shape()));
  const T one = T(1);
  backward(std::span<const T>(&one, 1));
}

template <typename T>
void Tensor<T>::backward(std::span<const T> seed) {
  if (static_cast<std::int64_t>(seed.size()) != numel()) {
    throw ConfigError("backward seed size does not match " + to_string(shape()));
  }
  // Iterative post-order DFS yields a topological order.
  // Owning handles: releasing a node's parents below must not free nodes
  // that are still waiting in the order.
  std::vector<std::shared_ptr<Impl>> order;
  std::unordered_set<Impl*> visited;
  std::vector<std::pair<std::shared_ptr<Impl>, std::size_t>> stack{{impl_, 0}};
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->parents.size()) {
      auto parent = top.first->parents[top.second++];
      if (parent->requires_grad && visited.insert(parent.get()).second) stack.emplace_back(std::move(parent), 0);
    } else {
      order.push_back(std::move(top.first));
      stack.pop_back();
    }
  }
  auto& root_grad = impl_->grad_buffer();
  for (std::size_t i = 0; i < seed.size(); ++i) root_grad[i] += seed[i];
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* node = it->get();
    if (node->backward) {
      if (!node->grad.empty()) node->backward(*node);
      // Release the graph behind interior nodes.
      node->backward = nullptr;
      node->parents.clear();
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  auto impl = std::make_shared<Impl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

template class Tensor<float>;
template class Tensor<double>;

namespace profile {

namespace {
thread_local Recorder* t_recorder = nullptr;
thread_local std::vector<std::string> t_scopes;
}  // namespace

Recorder::Recorder() : previous_(t_recorder) { t_recorder = this; }
Recorder::~Recorder() { t_recorder = previous_; }

Cost Recorder::total() const {
  Cost sum;
  for (const auto& [_, cost] : costs_) sum += cost;
  return sum;
}

Scope::Scope(const std::string& name) { t_scopes.push_back(name); }
Scope::~Scope() { t_scopes.pop_back(); }

bool active() { return t_recorder != nullptr; }

std::string current_path() {
  std::string path;
  for (const auto& s : t_scopes) {
    if (s.empty()) continue;
    if (!path.empty()) path += '.';
    path += s;
  }
  return path;
}

void record(std::int64_t macs, std::int64_t ops) {
  if (t_recorder) t_recorder->add(current_path(), Cost{macs, ops});
}

}  // namespace profile

}  // namespace ecmnet
