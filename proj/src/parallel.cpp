#include "candid/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace candid {

std::size_t parse_worker_count(const char* value) {
  const std::size_t len = std::strlen(value);
  std::size_t n = 0;
  auto [ptr, ec] = std::from_chars(value, value + len, n);
  if (len == 0 || ec != std::errc{} || ptr != value + len || n == 0) {
    throw std::runtime_error("CANDID_THREADS must be a positive integer, got '" + std::string(value) + "'");
  }
  return n;
}

std::size_t worker_count() {
  if (const char* env = std::getenv("CANDID_THREADS")) return parse_worker_count(env);
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& body) {
  if (end <= begin) return;
  const std::size_t count = end - begin;
  const std::size_t workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (std::size_t i = begin; i < end; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    const std::size_t lo = begin + count * t / workers;
    const std::size_t hi = begin + count * (t + 1) / workers;
    threads.emplace_back([&, lo, hi, t] {
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace candid
