#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "fairsel/dataset.hpp"

namespace fairsel {

/// Tabular data with a planted group gap: P(y=1 | x, s) is shifted by +bias/2
/// for the privileged group and -bias/2 for the rest.
struct SyntheticConfig {
  std::string name = "synthetic";
  std::size_t rows = 4000;
  double bias = 0.0;
  double privileged_share = 0.5;
  std::uint64_t seed = 7;
};

/// Columns: income, tenure, score, region, group, outcome.
std::string synthetic_csv(const SyntheticConfig& config);
DatasetSpec synthetic_spec(const std::string& name);

}  // namespace fairsel
