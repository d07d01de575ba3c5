#include "ooload/core/epoch_plan.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <unordered_map>

#include "ooload/core/error.hpp"
#include "ooload/core/rng.hpp"

namespace ooload {

std::size_t EpochPlan::num_items() const noexcept {
  std::size_t n = 0;
  for (const auto& b : batches) n += b.size();
  return n;
}

EpochPlan make_epoch_plan(const std::vector<SampleId>& ids, std::size_t batch_size,
                          std::uint64_t seed, std::uint64_t epoch_index, bool drop_last) {
  if (ids.empty()) throw InvalidInput("cannot plan an epoch over an empty id list");
  if (batch_size == 0) throw InvalidInput("batch_size must be >= 1");

  std::vector<SampleId> order = ids;
  Rng rng(seed, epoch_index);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_below(i + 1));
    std::swap(order[i], order[j]);
  }

  EpochPlan plan;
  plan.epoch_index = epoch_index;
  plan.batch_size = batch_size;
  plan.seed = seed;
  plan.drop_last = drop_last;

  const std::size_t full = order.size() / batch_size;
  const std::size_t rest = order.size() % batch_size;
  plan.batches.reserve(full + (rest != 0 && !drop_last ? 1 : 0));
  for (std::size_t b = 0; b < full; ++b) {
    plan.batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b * batch_size),
                              order.begin() + static_cast<std::ptrdiff_t>((b + 1) * batch_size));
  }
  if (rest != 0 && !drop_last) {
    plan.batches.emplace_back(order.end() - static_cast<std::ptrdiff_t>(rest), order.end());
  }
  return plan;
}

bool plan_consistency_check(const EpochPlan& plan, const std::vector<SampleId>& ids) {
  if (plan.batch_size == 0) return false;
  const std::size_t n = ids.size();
  const std::size_t expected_items = plan.drop_last ? n - n % plan.batch_size : n;
  if (plan.num_items() != expected_items) return false;

  for (std::size_t b = 0; b < plan.batches.size(); ++b) {
    const auto size = plan.batches[b].size();
    const bool last = b + 1 == plan.batches.size();
    if (size == 0 || size > plan.batch_size) return false;
    if (size != plan.batch_size && (!last || plan.drop_last)) return false;
  }

  std::unordered_map<SampleId, std::int64_t, SampleIdHash> counts;
  counts.reserve(n);
  for (const auto& id : ids) ++counts[id];
  for (const auto& batch : plan.batches) {
    for (const auto& id : batch) {
      auto it = counts.find(id);
      if (it == counts.end() || it->second == 0) return false;
      --it->second;
    }
  }
  // Leftover ids are only legal when dropped as a trailing partial batch.
  std::size_t leftover = 0;
  for (const auto& [id, c] : counts) leftover += static_cast<std::size_t>(c);
  return leftover == n - expected_items;
}

std::string EpochPlan::to_text() const {
  std::ostringstream out;
  out << "# epoch_index=" << epoch_index << " batch_size=" << batch_size << " seed=" << seed
      << " drop_last=" << (drop_last ? 1 : 0) << '\n';
  for (const auto& batch : batches) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (i) out << ',';
      out << batch[i].str();
    }
    out << '\n';
  }
  return out.str();
}

namespace {

std::uint64_t header_value(std::string_view header, std::string_view key) {
  const auto pos = header.find(key);
  if (pos == std::string_view::npos) throw DecodeError("plan header lacks " + std::string(key));
  const auto start = pos + key.size();
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(header.data() + start, header.data() + header.size(), v);
  if (ec != std::errc{}) throw DecodeError("bad plan header value for " + std::string(key));
  return v;
}

}  // namespace

EpochPlan EpochPlan::from_text(std::string_view text) {
  EpochPlan plan;
  bool saw_header = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      plan.epoch_index = header_value(line, "epoch_index=");
      plan.batch_size = header_value(line, "batch_size=");
      plan.seed = header_value(line, "seed=");
      plan.drop_last = header_value(line, "drop_last=") != 0;
      saw_header = true;
      continue;
    }
    std::vector<SampleId> batch;
    while (!line.empty()) {
      const auto comma = line.find(',');
      batch.push_back(SampleId::parse(line.substr(0, comma)));
      line = comma == std::string_view::npos ? std::string_view{} : line.substr(comma + 1);
    }
    plan.batches.push_back(std::move(batch));
  }
  if (!saw_header) throw DecodeError("plan text lacks its header line");
  return plan;
}

}  // namespace ooload
