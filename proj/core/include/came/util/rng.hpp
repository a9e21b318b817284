#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace came {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);

/// Independent pseudo-random stream derived from a run seed and a stream name,
/// so that adding a consumer never perturbs the others.
std::mt19937_64 make_stream(std::uint64_t seed, std::string_view name);

/// Sample from N(0, stddev^2) truncated to [-2 stddev, 2 stddev].
double truncated_normal(std::mt19937_64& rng, double stddev);

/// Uniform integer in [0, n).
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

/// Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle(std::span<T> items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

std::string to_hex(std::uint64_t v);

}  // namespace came
