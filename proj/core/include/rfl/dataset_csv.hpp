#pragma once

#include "rfl/sampling.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace rfl {

// Layout: header `feature_0,...,feature_{d-1},label,noisy`, then one row per
// example. Features use 17 significant digits so a write/read cycle is exact;
// noisy is 0 or 1.
void write_dataset_csv(std::ostream& out, std::span<const LabeledExample> examples);

// Throws std::runtime_error (with the offending line number) on malformed input.
std::vector<LabeledExample> read_dataset_csv(std::istream& in);

} // namespace rfl
