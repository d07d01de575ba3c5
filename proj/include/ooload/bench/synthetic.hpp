#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ooload/core/records.hpp"

namespace ooload {

struct SyntheticDatasetSpec {
  std::size_t num_samples = 20000;
  double mean_size = 115e3;  // bytes
  double sigma = 0.5;        // of the underlying normal
  std::size_t num_classes = 10;
  std::size_t num_entities = 500;
  // Class k is drawn with weight 1 / (k + 1)^class_skew.
  double class_skew = 1.0;
  std::uint64_t seed = 1;

  // Throws InvalidSpec.
  void validate() const;
};

// Deterministic synthetic dataset. Ids, sizes, classes and entities are fixed
// at construction; payload bytes are generated on demand per sample, so any
// sample can be produced independently of the others.
class SyntheticDataset {
 public:
  explicit SyntheticDataset(SyntheticDatasetSpec spec);

  const SyntheticDatasetSpec& spec() const noexcept { return spec_; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<SampleId>& ids() const noexcept { return ids_; }
  std::size_t data_size(std::size_t i) const { return sizes_[i]; }
  std::int32_t class_of(std::size_t i) const { return classes_[i]; }
  std::uint64_t total_bytes() const noexcept { return total_bytes_; }

  // Pseudo-random, incompressible payload.
  Blob data(std::size_t i) const;
  SampleRecord record(std::size_t i) const;
  MetadataRecord metadata(std::size_t i) const;

 private:
  SyntheticDatasetSpec spec_;
  std::vector<SampleId> ids_;
  std::vector<std::uint32_t> sizes_;
  std::vector<std::int32_t> classes_;
  std::vector<std::uint32_t> entities_;
  std::uint64_t total_bytes_ = 0;
};

}  // namespace ooload
