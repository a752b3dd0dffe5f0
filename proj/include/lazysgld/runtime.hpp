#pragma once

// Process-level allocator settings for long simulations.

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace lazysgld {

/// Every step allocates a few n × m work arrays. With glibc's default
/// thresholds those are returned to the kernel on free and faulted back in
/// on the next step, which costs more than the arithmetic. Keeping them on
/// the heap removes that. No-op off glibc.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace lazysgld
