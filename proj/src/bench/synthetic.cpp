#include "ooload/bench/synthetic.hpp"

#include <cmath>
#include <string>

#include "ooload/core/error.hpp"
#include "ooload/core/rng.hpp"

namespace ooload {

namespace {

// Rng streams of one dataset seed.
constexpr std::uint64_t kIdStream = 0;
constexpr std::uint64_t kShapeStream = 1;
constexpr std::uint64_t kPayloadSalt = 0x5eedda7aULL;

}  // namespace

void SyntheticDatasetSpec::validate() const {
  if (mean_size <= 0.0) throw InvalidSpec("mean_size must be positive");
  if (sigma < 0.0) throw InvalidSpec("sigma must be non-negative");
  if (num_classes == 0) throw InvalidSpec("num_classes must be >= 1");
  if (num_entities == 0) throw InvalidSpec("num_entities must be >= 1");
  if (class_skew < 0.0) throw InvalidSpec("class_skew must be non-negative");
}

SyntheticDataset::SyntheticDataset(SyntheticDatasetSpec spec) : spec_(spec) {
  spec_.validate();
  const std::size_t n = spec_.num_samples;
  SampleIdGenerator gen(spec_.seed, kIdStream);
  Rng rng(spec_.seed, kShapeStream);
  std::vector<double> cdf(spec_.num_classes);
  double acc = 0.0;
  for (std::size_t k = 0; k < spec_.num_classes; ++k) {
    acc += 1.0 / std::pow(static_cast<double>(k + 1), spec_.class_skew);
    cdf[k] = acc;
  }
  const double mu = std::log(spec_.mean_size) - spec_.sigma * spec_.sigma / 2.0;
  ids_.reserve(n);
  sizes_.reserve(n);
  classes_.reserve(n);
  entities_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids_.push_back(gen.next());
    const double s = std::round(rng.lognormal(mu, spec_.sigma));
    sizes_.push_back(static_cast<std::uint32_t>(std::max(1.0, std::min(s, 64e6))));
    total_bytes_ += sizes_.back();
    const double u = rng.uniform01() * acc;
    std::size_t k = 0;
    while (k + 1 < cdf.size() && cdf[k] <= u) ++k;
    classes_.push_back(static_cast<std::int32_t>(k));
    entities_.push_back(static_cast<std::uint32_t>(rng.uniform_below(spec_.num_entities)));
  }
}

Blob SyntheticDataset::data(std::size_t i) const {
  Blob out(sizes_.at(i));
  Rng rng(spec_.seed ^ kPayloadSalt, i);
  rng.fill(out);
  return out;
}

SampleRecord SyntheticDataset::record(std::size_t i) const {
  return SampleRecord{ids_.at(i), Label::int_class(classes_[i]), data(i)};
}

MetadataRecord SyntheticDataset::metadata(std::size_t i) const {
  MetadataRecord m;
  m.id = ids_.at(i);
  m.entity_id = "entity-" + std::to_string(entities_[i]);
  m.group_key = "site-" + std::to_string(entities_[i] % 16);
  Rng rng(spec_.seed, 2 + i);
  m.coord_x = static_cast<std::int32_t>(rng.uniform_below(1024));
  m.coord_y = static_cast<std::int32_t>(rng.uniform_below(1024));
  m.class_label = classes_[i];
  return m;
}

}  // namespace ooload
