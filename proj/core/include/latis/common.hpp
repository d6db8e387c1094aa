// Shared infrastructure: error types, deterministic parallel_for, counter RNG.
#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace latis {

// Error taxonomy. The CLI maps these onto its exit-code contract.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Non-finite values detected during training.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Worker count for parallel regions. Defaults to the hardware concurrency,
// capped by the LATIS_THREADS environment variable when set.
int thread_count();
void set_thread_count(int n);

// When on, every op result is scanned for NaN/Inf as it is produced and
// the offending op is named in the DivergenceError. Off by default.
bool finite_checks_enabled();
void set_finite_checks(bool on);

// Runs fn(begin, end) over a static partition of [0, n). Each index is
// processed by exactly one worker with the same per-element order as the
// serial loop, so results are bitwise independent of the worker count.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

// splitmix64: the counter-based generator behind weight init and batch
// sampling. Pure function of its input, identical on every platform.
constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Mixes a (seed, stream, index) triple into one 64-bit word.
constexpr uint64_t rng_mix(uint64_t seed, uint64_t stream, uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

// Uniform double in [0, 1) from a 64-bit word (53 mantissa bits).
constexpr double rng_unit(uint64_t word) {
  return static_cast<double>(word >> 11) * 0x1.0p-53;
}

}  // namespace latis
