#include "ooload/client/batch.hpp"

#include <algorithm>
#include <cstring>

namespace ooload {

BatchBuffer assemble_batch(std::span<const Arrival* const> items, ThreadPool& pool) {
  BatchBuffer out;
  out.items.reserve(items.size());
  std::size_t total = 0;
  for (const Arrival* a : items) {
    out.items.push_back({a->id, a->label, total, a->data.size()});
    total += a->data.size();
  }
  out.storage.resize(total);
  if (items.empty()) return out;
  const std::size_t chunks = std::min(items.size(), pool.size() + 1);
  pool.parallel_for(chunks, [&](std::size_t k) {
    const std::size_t lo = items.size() * k / chunks;
    const std::size_t hi = items.size() * (k + 1) / chunks;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& src = items[i]->data;
      if (!src.empty()) std::memcpy(out.storage.data() + out.items[i].offset, src.data(), src.size());
    }
  });
  return out;
}

std::uint64_t Batch::checksum() const noexcept {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    sum += item_checksum(buffer.items[i].id, buffer.items[i].label, buffer.data(i));
  }
  return sum;
}

}  // namespace ooload
