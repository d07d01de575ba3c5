#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ooload/core/sample_id.hpp"

namespace ooload {

// Seeded permutation of the dataset for one epoch, cut into fixed-size
// batches. Immutable once built.
struct EpochPlan {
  std::uint64_t epoch_index = 0;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  bool drop_last = false;
  std::vector<std::vector<SampleId>> batches;

  std::size_t num_batches() const noexcept { return batches.size(); }
  std::size_t num_items() const noexcept;

  // One batch per line, comma-separated canonical UUIDs, preceded by a
  // single '#' header line carrying the plan parameters.
  std::string to_text() const;
  static EpochPlan from_text(std::string_view text);

  friend bool operator==(const EpochPlan&, const EpochPlan&) = default;
};

// Fisher-Yates shuffle driven by Rng(seed, stream = epoch_index).
EpochPlan make_epoch_plan(const std::vector<SampleId>& ids, std::size_t batch_size,
                          std::uint64_t seed, std::uint64_t epoch_index, bool drop_last);

// True iff the plan is a valid partition of a permutation of ids.
bool plan_consistency_check(const EpochPlan& plan, const std::vector<SampleId>& ids);

}  // namespace ooload
