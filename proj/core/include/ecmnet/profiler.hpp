#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ecmnet::profile {

/// Operation cost split into multiply-accumulates and plain scalar ops, so
/// the MAC convention can be chosen when reporting.
struct Cost {
  std::int64_t macs = 0;
  std::int64_t ops = 0;

  Cost& operator+=(const Cost& other) {
    macs += other.macs;
    ops += other.ops;
    return *this;
  }
  std::int64_t flops(int ops_per_mac) const { return ops_per_mac * macs + ops; }
};

/// Collects per-scope costs while alive; ops report into the innermost
/// active recorder on this thread.
class Recorder {
 public:
  Recorder();
  ~Recorder();
  Recorder(const Recorder&) = delete;
  Recorder& operator=(const Recorder&) = delete;

  const std::map<std::string, Cost>& by_scope() const { return costs_; }
  Cost total() const;

  void add(const std::string& scope, Cost cost) { costs_[scope] += cost; }

 private:
  std::map<std::string, Cost> costs_;
  Recorder* previous_;
};

/// Pushes a path component for costs recorded during its lifetime.
class Scope {
 public:
  explicit Scope(const std::string& name);
  ~Scope();
  Scope(const Scope&) = delete;
  Scope& operator=(const Scope&) = delete;
};

bool active();
std::string current_path();
void record(std::int64_t macs, std::int64_t ops);

}  // namespace ecmnet::profile
