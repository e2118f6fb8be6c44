#pragma once

#include <cstddef>
#include <limits>
#include <new>
#include <vector>

namespace seqbench {

// High-water accounting of transient working buffers. Every scratch
// allocation inside a mechanism forward goes through counting_allocator;
// parameters and input/output tensors use plain vectors and are excluded.
struct MemoryAccountant {
  std::size_t current = 0;
  std::size_t peak = 0;

  void on_alloc(std::size_t bytes) {
    current += bytes;
    if (current > peak) peak = current;
  }
  void on_free(std::size_t bytes) { current -= bytes; }
  void reset_peak() { peak = current; }
};

MemoryAccountant& accountant();

template <class T>
struct counting_allocator {
  using value_type = T;

  counting_allocator() = default;
  template <class U>
  counting_allocator(const counting_allocator<U>&) {}

  T* allocate(std::size_t n) {
    accountant().on_alloc(n * sizeof(T));
    return static_cast<T*>(::operator new(n * sizeof(T)));
  }
  void deallocate(T* p, std::size_t n) {
    accountant().on_free(n * sizeof(T));
    ::operator delete(p);
  }

  friend bool operator==(const counting_allocator&, const counting_allocator&) { return true; }
  friend bool operator!=(const counting_allocator&, const counting_allocator&) { return false; }
};

// Accounted scratch vector.
template <class T>
using scratch_vec = std::vector<T, counting_allocator<T>>;

using scratch = scratch_vec<double>;

}  // namespace seqbench
