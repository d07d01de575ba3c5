#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ooload/core/records.hpp"

namespace ooload {

struct SplitSpec {
  std::vector<double> ratios;  // > 0, sum to 1
  // Metadata fields. entity_field is "entity_id" or "group_key";
  // class_field is "class_label".
  std::string entity_field = "entity_id";
  std::string class_field = "class_label";
  // class label -> fraction. When set, every split is rebalanced toward it.
  std::optional<std::map<std::int32_t, double>> target_class_proportions;
  double tolerance = 0.02;
  std::uint64_t seed = 0;

  // Throws InvalidSpec.
  void validate() const;

  // key=value lines: ratios=0.8,0.1,0.1  entity_field=...  class_field=...
  // targets=0:0.5,1:0.5  tolerance=0.02  seed=7. '#' starts a comment.
  static SplitSpec parse(const std::string& text);
  static SplitSpec load(const std::string& path);
};

struct SplitResult {
  std::vector<std::vector<SampleId>> splits;
  std::vector<std::map<std::int32_t, std::size_t>> class_histograms;
  std::vector<std::set<std::string>> entity_sets;
  std::vector<SampleId> dropped;
  // "SplitInfeasible: ..." / "OutOfTolerance: ..." lines. Empty means every
  // deviation is within tolerance.
  std::vector<std::string> warnings;

  bool ok() const noexcept { return warnings.empty(); }
  std::size_t kept() const noexcept;
  friend bool operator==(const SplitResult&, const SplitResult&) = default;
};

// Throws InvalidInput on empty metadata or duplicate ids, InvalidSpec on a
// bad spec.
SplitResult create_splits(const std::vector<MetadataRecord>& metadata, const SplitSpec& spec);

struct Rebalanced {
  std::vector<SampleId> kept;  // input order
  std::vector<SampleId> dropped;
};

// Drops items of over-represented classes (seeded, uniform) until every
// class fraction of the kept set is within `tolerance` of its target. Keeps
// as many items as possible. Throws InvalidSpec when a targeted class has
// no items, or the targets do not sum to 1.
Rebalanced class_rebalance(const std::vector<SampleId>& split, const std::vector<MetadataRecord>& metadata,
                           const std::map<std::int32_t, double>& target, std::uint64_t seed,
                           double tolerance = 0.02);

struct SplitAuditEntry {
  std::size_t records = 0;
  std::size_t entities = 0;
  std::map<std::int32_t, std::size_t> class_histogram;
  double fraction = 0.0;         // of all kept records
  double size_deviation = 0.0;   // |fraction - ratio| / ratio
  double class_deviation = 0.0;  // max |class fraction - reference|
};

struct SplitAudit {
  std::vector<SplitAuditEntry> splits;
  std::vector<std::string> violations;
  std::size_t dropped = 0;
  // Targets from the SplitSpec if set, else the class mix of the whole input.
  std::map<std::int32_t, double> reference_proportions;

  std::string to_text() const;  // key=value
};

// Recomputes every SplitResult invariant from scratch.
SplitAudit audit_split(const SplitResult& result, const std::vector<MetadataRecord>& metadata,
                       const SplitSpec& spec);

// One canonical id per line.
void write_uuid_list(const std::string& path, const std::vector<SampleId>& ids);
std::vector<SampleId> read_uuid_list(const std::string& path);

// Writes <dir>/split_<i>.txt for every split, dropped.txt and report.txt.
// Returns the split file paths.
std::vector<std::string> write_split_files(const SplitResult& result, const SplitAudit& audit,
                                           const std::string& dir);

}  // namespace ooload
