#pragma once

// Test-only oracles and instance generators. Nothing here calls into the code paths the
// oracles check.

#include <jamcap/interference.hpp>
#include <jamcap/network.hpp>
#include <jamcap/rng.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace jamcap::testing {

inline std::vector<std::size_t>
members(std::uint64_t mask, std::size_t n)
{
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if ((mask >> i) & 1) out.push_back(i);
  return out;
}

/// Feasibility straight from the definition: every member's incoming weight is <= 1.
inline bool
feasible_by_definition(const std::vector<double>& weights, std::size_t n, std::uint64_t mask)
{
  for (std::size_t v = 0; v < n; ++v)
  {
    if (!((mask >> v) & 1)) continue;
    double in = 0.0;
    for (std::size_t u = 0; u < n; ++u)
      if (u != v && ((mask >> u) & 1)) in += weights[u * n + v];
    if (in > 1.0) return false;
  }
  return true;
}

/// Maximum feasible set by enumerating all 2^n subsets. Ties: lexicographically smallest
/// sorted index list.
inline std::vector<std::size_t>
brute_force_max_feasible(const std::vector<double>& weights, std::size_t n)
{
  std::vector<std::size_t> best;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask)
  {
    if (!feasible_by_definition(weights, n, mask)) continue;
    auto m = members(mask, n);
    if (m.size() > best.size() || (m.size() == best.size() && m < best)) best = std::move(m);
  }
  return best;
}

/// SINR inequality evaluated from coordinates, independent of the library's helpers.
inline bool
sinr_by_hand(const network_instance& net, std::uint64_t mask, std::size_t v)
{
  const auto& rx = net.links[v].receivers[0];
  const auto rp = [&](std::size_t u) {
    const double dx = net.links[u].sender.x - rx.x;
    const double dy = net.links[u].sender.y - rx.y;
    return net.links[u].power / std::pow(std::sqrt(dx * dx + dy * dy), net.sinr.alpha);
  };
  double interference = 0.0;
  for (std::size_t u = 0; u < net.size(); ++u)
    if (u != v && ((mask >> u) & 1)) interference += rp(u);
  return rp(v) >= net.sinr.beta * (interference + net.sinr.noise);
}

/// Random conflict graph with weights in [0, max_weight], each edge present with
/// probability `density`.
inline conflict_graph
random_graph(std::size_t n, double density, double max_weight, rng_stream& rng)
{
  std::vector<double> w(n * n, 0.0);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v)
      if (u != v && rng.bernoulli(density)) w[u * n + v] = rng.uniform(0.0, max_weight);
  return conflict_graph{n, std::move(w)};
}

/// Random single-receiver instance in which every pairwise affectance is below 1 before
/// clipping, so conflict-graph and SINR success must coincide. Retries until one is found.
inline network_instance
random_unclipped_instance(std::size_t n, rng_stream& rng)
{
  const sinr_params sinr{2.1, 1.1, 4e-7};
  for (;;)
  {
    auto net = generate_random_network(n, 1000.0, 60.0, sinr, 2.0, rng);
    bool ok = true;
    for (std::size_t u = 0; ok && u < n; ++u)
      for (std::size_t v = 0; ok && v < n; ++v)
        if (u != v) ok = raw_affectance(net, u, v, 0) < 1.0;
    if (ok) return net;
  }
}

} // namespace jamcap::testing
