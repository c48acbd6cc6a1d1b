// base/aligned_new.cc
//
// Global operator new returning 64-byte aligned blocks. Vectorized Eigen
// reductions and FFTW codelets pick their loop split from the buffer
// address; with a fixed alignment every run sums in the same order.
// Compiled into each executable that links adlmvdr (interface source).

#include <cstdlib>
#include <new>

namespace {

constexpr std::size_t kAlign = 64;

void *AlignedAlloc(std::size_t n) noexcept {
  void *p = nullptr;
  if (posix_memalign(&p, kAlign, n ? n : 1) != 0) return nullptr;
  return p;
}

void *AlignedAllocOrThrow(std::size_t n) {
  void *p = AlignedAlloc(n);
  if (!p) throw std::bad_alloc();
  return p;
}

}  // namespace

void *operator new(std::size_t n) { return AlignedAllocOrThrow(n); }
void *operator new[](std::size_t n) { return AlignedAllocOrThrow(n); }
void *operator new(std::size_t n, const std::nothrow_t &) noexcept { return AlignedAlloc(n); }
void *operator new[](std::size_t n, const std::nothrow_t &) noexcept { return AlignedAlloc(n); }
void operator delete(void *p) noexcept { std::free(p); }
void operator delete[](void *p) noexcept { std::free(p); }
void operator delete(void *p, std::size_t) noexcept { std::free(p); }
void operator delete[](void *p, std::size_t) noexcept { std::free(p); }
void operator delete(void *p, const std::nothrow_t &) noexcept { std::free(p); }
void operator delete[](void *p, const std::nothrow_t &) noexcept { std::free(p); }
