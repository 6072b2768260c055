#pragma once

#include "dolce/core.hpp"

#include <optional>
#include <string>

namespace dolce {

// Dataset CSV layout (header row required):
//   x_0,...,x_{d-1}, lag{L}_0,...,lag{L}_{d-1} (per lag label L), action, reward[, propensity]
// Row numbers in ParseError are 1-based file lines (the header is line 1).

/// Reads a dataset. When num_actions is not given it is inferred as max(action) + 1.
LaggedDataset load_csv(const std::string& path, std::optional<int> num_actions = std::nullopt);
LaggedDataset parse_csv(std::istream& in, std::optional<int> num_actions = std::nullopt);

/// Writes with 17 significant digits, so a reload reproduces every double exactly.
void save_csv(const LaggedDataset& data, const std::string& path);
void write_csv(const LaggedDataset& data, std::ostream& out);

}  // namespace dolce
