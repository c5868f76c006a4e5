#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ecmnet::selfcheck {

struct SuiteResult {
  std::string name;
  bool passed = false;
  double seconds = 0;
  std::string detail;
};

/// cross_scan, selective_scan, channel_shuffle, metrics, then one gradient
/// suite per differentiable block.
const std::vector<std::string>& suite_names();

/// Runs the named suites (all when empty) in order and reports each one to
/// `log` as it finishes. Unknown names throw ConfigError.
std::vector<SuiteResult> run(const std::vector<std::string>& suites = {}, std::ostream* log = nullptr);

}  // namespace ecmnet::selfcheck
