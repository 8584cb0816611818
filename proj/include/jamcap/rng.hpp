#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace jamcap {

/*------------------------------------------------------------------------------------------------*/

constexpr std::uint64_t
splitmix64(std::uint64_t x)
noexcept
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t
fnv1a(std::string_view s)
noexcept
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : s)
  {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of the child stream named `tag` under `master`. Streams with distinct tags are
/// unrelated, so adding a consumer never shifts the draws seen by another one.
constexpr std::uint64_t
derive_seed(std::uint64_t master, std::string_view tag)
noexcept
{
  return splitmix64(splitmix64(master) ^ fnv1a(tag));
}

/*------------------------------------------------------------------------------------------------*/

/// Deterministic random stream. Draws are defined here rather than through <random>
/// distributions so results do not depend on the standard library vendor.
class rng_stream
{
public:

  explicit rng_stream(std::uint64_t seed = 0)
    : m_engine{seed}
  {}

  rng_stream(std::uint64_t master, std::string_view tag)
    : m_engine{derive_seed(master, tag)}
  {}

  std::uint64_t
  next_u64()
  {
    return m_engine();
  }

  /// Uniform in [0, 1) with 53 random bits.
  double
  uniform01()
  {
    return static_cast<double>(m_engine() >> 11) * 0x1.0p-53;
  }

  /// Uniform in (0, 1].
  double
  uniform_open_closed()
  {
    return 1.0 - uniform01();
  }

  double
  uniform(double lo, double hi)
  {
    return lo + (hi - lo) * uniform01();
  }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t
  below(std::uint64_t n)
  {
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t x;
    do { x = m_engine(); } while (x >= limit);
    return x % n;
  }

  bool
  bernoulli(double p)
  {
    return uniform01() < p;
  }

  std::mt19937_64&
  engine() noexcept
  {
    return m_engine;
  }

private:

  std::mt19937_64 m_engine;
};

} // namespace jamcap
