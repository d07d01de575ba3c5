#include "ooload/loader/config.hpp"

#include "ooload/core/error.hpp"

namespace ooload {

void PrefetchConfig::validate() const {
  if (prefetch_buffers < 1) throw InvalidSpec("prefetch_buffers must be >= 1");
  if (fill_stride < 1) throw InvalidSpec("fill_stride must be >= 1");
  if (batch_size < 1) throw InvalidSpec("batch_size must be >= 1");
}

}  // namespace ooload
