#pragma once

// Seed derivation and portable variate generation. Everything is built on
// mt19937_64 output bits so that draws do not depend on the standard
// library's distribution implementations.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace capassign::random {

/// One SplitMix64 step.
std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based seed for a tuple of indices under a root seed.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path);

/// Uniform on the open interval (0, 1) with 53 random bits.
double uniform01(std::mt19937_64& rng);

/// Standard normal by inversion.
double standard_normal(std::mt19937_64& rng);

/// Bernoulli(p).
bool bernoulli(std::mt19937_64& rng, double p);

}  // namespace capassign::random
