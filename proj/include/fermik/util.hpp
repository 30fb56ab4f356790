#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "json.hpp"

namespace fermik {

using json = nlohmann::ordered_json;

// Number of worker threads: min(hardware, FERMI_KINETICS_THREADS if set).
int worker_threads();

// Chunked parallel map over [0, n). Deterministic work assignment; the
// callback receives (index, thread_rank).
void parallel_for(std::size_t n, const std::function<void(std::size_t, int)>& fn);

// Default seed used by every randomized check unless overridden.
inline constexpr std::uint64_t kDefaultSeed = 20240517ull;

// SplitMix64; used to derive independent streams from a user seed.
std::uint64_t splitmix64(std::uint64_t& state);

std::string format_double(double v);  // 17 significant digits

}  // namespace fermik
