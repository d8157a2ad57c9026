#pragma once

// Scoped flush-to-zero / denormals-are-zero on the calling thread. Training
// drives many activations and optimizer moments into the subnormal range,
// where x86 arithmetic is orders of magnitude slower.

namespace candid {

class FlushDenormals {
 public:
  FlushDenormals();
  ~FlushDenormals();
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned previous_ = 0;
};

}  // namespace candid
