#include "fermik/util.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <thread>
#include <vector>

namespace fermik {

int worker_threads() {
  int hw = int(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("FERMI_KINETICS_THREADS")) {
    int cap = std::atoi(env);
    if (cap > 0 && cap < hw) hw = cap;
  }
  return hw;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, int)>& fn) {
  const int nt = worker_threads();
  if (nt <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::atomic<std::size_t> next{0};
  const std::size_t chunk = std::max<std::size_t>(1, n / std::size_t(nt * 512));
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(nt));
  for (int r = 0; r < nt; ++r) {
    pool.emplace_back([&, r]() {
      for (;;) {
        std::size_t lo = next.fetch_add(chunk);
        if (lo >= n) break;
        std::size_t hi = std::min(n, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) fn(i, r);
      }
    });
  }
  for (auto& th : pool) th.join();
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace fermik
