#include "candid/fp_env.hpp"

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

namespace candid {

#if defined(__SSE__)
// FTZ (bit 15) and DAZ (bit 6).
constexpr unsigned kFlushBits = 0x8040u;

FlushDenormals::FlushDenormals() : previous_(_mm_getcsr()) { _mm_setcsr(previous_ | kFlushBits); }
FlushDenormals::~FlushDenormals() { _mm_setcsr(previous_); }
#else
FlushDenormals::FlushDenormals() = default;
FlushDenormals::~FlushDenormals() = default;
#endif

}  // namespace candid
