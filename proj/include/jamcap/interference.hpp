#pragma once

#include <jamcap/error.hpp>
#include <jamcap/network.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace jamcap {

/// Indices of links transmitting in one step, sorted and unique.
using transmit_set = std::vector<std::size_t>;

inline transmit_set
normalized(transmit_set s)
{
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

inline bool
contains(std::span<const std::size_t> set, std::size_t v)
noexcept
{
  return std::find(set.begin(), set.end(), v) != set.end();
}

/*------------------------------------------------------------------------------------------------*/

/// Affectance of `u` on `v` before the min{1, .} clipping. Infinite when `v` cannot beat the
/// noise on its own.
inline double
raw_affectance(const network_instance& net, std::size_t u, std::size_t v, std::size_t receiver_of_v)
{
  if (u == v) throw usage_error{"affectance: u == v (self-affectance is 0 by definition)"};
  const auto& lv = net.links.at(v);
  const auto& lu = net.links.at(u);
  const auto& rx = lv.receivers.at(receiver_of_v);
  const double alpha = net.sinr.alpha;
  const double beta = net.sinr.beta;

  const double denom = lv.power / std::pow(distance(lv.sender, rx), alpha) - beta * net.sinr.noise;
  if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
  if (lu.power == 0.0) return 0.0;
  const double d = distance(lu.sender, rx);
  if (d == 0.0) return std::numeric_limits<double>::infinity();
  return beta * (lu.power / std::pow(d, alpha)) / denom;
}

/// a(u, v) in [0, 1]: interference `u` inflicts on receiver `receiver_of_v` of `v`,
/// normalized by the margin `v`'s own signal has over the noise floor.
inline double
affectance(const network_instance& net, std::size_t u, std::size_t v, std::size_t receiver_of_v = 0)
{
  return std::min(1.0, raw_affectance(net, u, v, receiver_of_v));
}

/*------------------------------------------------------------------------------------------------*/

/// Directed weighted conflict graph, b_u(v) stored row-major at [u * n + v].
///
/// Graphs built from a network have entries in [0, 1]; hand-built graphs may carry larger
/// weights (a weight above 1 is a hard conflict).
class conflict_graph
{
public:

  conflict_graph() = default;

  explicit conflict_graph(std::size_t n)
    : m_n{n}
    , m_weights(n * n, 0.0)
    , m_receiver_choice(n, 0)
  {}

  conflict_graph(std::size_t n, std::vector<double> weights)
    : m_n{n}
    , m_weights(std::move(weights))
    , m_receiver_choice(n, 0)
  {
    if (m_weights.size() != n * n) throw parameter_error{"conflict graph: weight matrix is not n x n"};
    for (std::size_t v = 0; v < n; ++v)
      if (m_weights[v * n + v] != 0.0) throw parameter_error{"conflict graph: nonzero diagonal"};
    for (const double w : m_weights)
      if (!(w >= 0.0)) throw parameter_error{"conflict graph: negative or NaN weight"};
  }

  std::size_t size() const noexcept { return m_n; }

  double
  weight(std::size_t u, std::size_t v) const noexcept
  {
    return m_weights[u * m_n + v];
  }

  void
  set_weight(std::size_t u, std::size_t v, double w)
  {
    if (u == v) throw usage_error{"conflict graph: diagonal is fixed at 0"};
    if (!(w >= 0.0)) throw parameter_error{"conflict graph: negative or NaN weight"};
    m_weights[u * m_n + v] = w;
  }

  const std::vector<std::size_t>& receiver_choice() const noexcept { return m_receiver_choice; }
  std::vector<std::size_t>& receiver_choice() noexcept { return m_receiver_choice; }

  const std::vector<double>& weights() const noexcept { return m_weights; }

  /// Sum of b_u(v) over u in `set`, u != v.
  double
  incoming(std::span<const std::size_t> set, std::size_t v) const noexcept
  {
    double sum = 0.0;
    for (const auto u : set)
      if (u != v) sum += weight(u, v);
    return sum;
  }

  /// In-weight plus out-weight of `v`.
  double
  incident(std::size_t v) const noexcept
  {
    double sum = 0.0;
    for (std::size_t u = 0; u < m_n; ++u)
      sum += weight(u, v) + weight(v, u);
    return sum;
  }

  /// Restriction to `subset`; node i of the result is subset[i].
  conflict_graph
  induced(std::span<const std::size_t> subset) const
  {
    conflict_graph g{subset.size()};
    for (std::size_t i = 0; i < subset.size(); ++i)
      for (std::size_t j = 0; j < subset.size(); ++j)
        g.m_weights[i * subset.size() + j] = weight(subset[i], subset[j]);
    return g;
  }

  friend bool operator==(const conflict_graph&, const conflict_graph&) = default;

private:

  std::size_t m_n = 0;
  std::vector<double> m_weights;
  std::vector<std::size_t> m_receiver_choice;
};

/// Pairwise affectances for one chosen receiver per link. An empty selection means
/// receiver 0 everywhere.
inline conflict_graph
build_conflict_graph(const network_instance& net, std::span<const std::size_t> receiver_selection = {})
{
  const auto n = net.size();
  if (!receiver_selection.empty() && receiver_selection.size() != n)
    throw parameter_error{"receiver selection size does not match link count"};

  conflict_graph g{n};
  for (std::size_t v = 0; v < n; ++v)
  {
    const auto r = receiver_selection.empty() ? 0 : receiver_selection[v];
    if (r >= net.links[v].receivers.size())
      throw parameter_error{"invalid receiver index " + std::to_string(r) + " for link " + std::to_string(v)};
    g.receiver_choice()[v] = r;
  }
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v)
      if (u != v) g.set_weight(u, v, affectance(net, u, v, g.receiver_choice()[v]));
  return g;
}

/*------------------------------------------------------------------------------------------------*/

/// Conflict-graph success: incoming weight from the other transmitters is at most 1.
inline bool
cg_success(const conflict_graph& graph, std::span<const std::size_t> transmitting, std::size_t v)
{
  if (!contains(transmitting, v)) throw usage_error{"cg_success: link is not transmitting"};
  return graph.incoming(transmitting, v) <= 1.0;
}

/// SINR success of `v` at `receiver`, evaluated directly on the geometry.
inline bool
sinr_success( const network_instance& net, std::span<const std::size_t> transmitting
            , std::size_t v, std::size_t receiver = 0)
{
  if (!contains(transmitting, v)) throw usage_error{"sinr_success: link is not transmitting"};
  const auto& rx = net.links.at(v).receivers.at(receiver);
  const double alpha = net.sinr.alpha;
  double interference = 0.0;
  for (const auto u : transmitting)
    if (u != v) interference += detail::received_power(net.links[u], rx, alpha);
  return detail::received_power(net.links[v], rx, alpha) >= net.sinr.beta * (interference + net.sinr.noise);
}

/// True iff every member of `set` succeeds under conflict-graph semantics.
inline bool
is_feasible(const conflict_graph& graph, std::span<const std::size_t> set)
{
  for (const auto v : set)
    if (graph.incoming(set, v) > 1.0) return false;
  return true;
}

/*------------------------------------------------------------------------------------------------*/

inline constexpr std::size_t default_exact_cap = 20;

namespace detail {

class feasible_set_search
{
public:

  explicit feasible_set_search(const conflict_graph& g)
    : m_g{g}
    , m_in(g.size(), 0.0)
  {}

  transmit_set
  run()
  {
    dfs(0);
    return m_best;
  }

private:

  bool
  can_add(std::size_t i) const
  {
    if (m_in[i] > 1.0) return false;
    for (const auto v : m_current)
      if (m_in[v] + m_g.weight(i, v) > 1.0) return false;
    return true;
  }

  // Candidates at or after `from` that fit next to the current set on their own.
  std::size_t
  compatible_from(std::size_t from) const
  {
    std::size_t count = 0;
    for (std::size_t j = from; j < m_g.size(); ++j)
      if (can_add(j)) ++count;
    return count;
  }

  void
  dfs(std::size_t i)
  {
    if (m_current.size() > m_best.size())
      m_best = m_current;
    if (i == m_g.size()) return;
    if (m_current.size() + compatible_from(i) <= m_best.size()) return;

    // Include-first over ascending indices: the first maximum set found is the
    // lexicographically smallest one.
    if (can_add(i))
    {
      for (std::size_t v = 0; v < m_g.size(); ++v) m_in[v] += m_g.weight(i, v);
      m_current.push_back(i);
      dfs(i + 1);
      m_current.pop_back();
      for (std::size_t v = 0; v < m_g.size(); ++v) m_in[v] -= m_g.weight(i, v);
    }
    dfs(i + 1);
  }

  const conflict_graph& m_g;
  std::vector<double> m_in;
  transmit_set m_current;
  transmit_set m_best;
};

} // namespace detail

/// Maximum-cardinality feasible set by branch and bound; ties go to the lexicographically
/// smallest set. Refuses graphs larger than `cap`.
inline transmit_set
max_feasible_set_exact(const conflict_graph& graph, std::size_t cap = default_exact_cap)
{
  if (graph.size() > cap)
    throw usage_error{ "exact oracle refuses n = " + std::to_string(graph.size()) + " > cap "
                     + std::to_string(cap) + "; use the greedy oracle" };
  return detail::feasible_set_search{graph}.run();
}

enum class greedy_order { incident, incoming };

/// Greedy insertion in ascending order of incident weight (in + out) or of incoming weight
/// alone, ties to the lower index. A link is skipped when adding it breaks feasibility.
inline transmit_set
max_feasible_set_greedy(const conflict_graph& graph, greedy_order by = greedy_order::incident)
{
  const auto n = graph.size();
  std::vector<double> key(n, 0.0);
  for (std::size_t v = 0; v < n; ++v)
    if (by == greedy_order::incident)
      key[v] = graph.incident(v);
    else
      for (std::size_t u = 0; u < n; ++u) key[v] += graph.weight(u, v);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return key[a] < key[b]; });

  transmit_set chosen;
  std::vector<double> in(n, 0.0);
  for (const auto i : order)
  {
    bool ok = in[i] <= 1.0;
    for (std::size_t k = 0; ok && k < chosen.size(); ++k)
      ok = in[chosen[k]] + graph.weight(i, chosen[k]) <= 1.0;
    if (!ok) continue;
    chosen.push_back(i);
    for (std::size_t v = 0; v < n; ++v) in[v] += graph.weight(i, v);
  }
  return normalized(std::move(chosen));
}

/// The larger of the two greedy sets (the incident-order one on ties).
inline transmit_set
max_feasible_set_greedy_best(const conflict_graph& graph)
{
  auto a = max_feasible_set_greedy(graph, greedy_order::incident);
  auto b = max_feasible_set_greedy(graph, greedy_order::incoming);
  return b.size() > a.size() ? b : a;
}

/*------------------------------------------------------------------------------------------------*/

struct independence_audit
{
  transmit_set input_set;
  double c = 0.0;
  transmit_set subset;
  double ratio = 0.0;
};

/// Picks L' from a feasible set L (ascending incident weight) such that the weight any link
/// u sends into L' stays within `c`, and reports |L'| / |L|.
inline independence_audit
c_independence_audit(const conflict_graph& graph, std::span<const std::size_t> feasible, double c)
{
  if (!(c > 0.0)) throw parameter_error{"C must be > 0"};
  const auto input = normalized(transmit_set(feasible.begin(), feasible.end()));
  for (const auto v : input)
    if (v >= graph.size()) throw usage_error{"audit: link index out of range"};
  if (!is_feasible(graph, input)) throw usage_error{"audit: input set is not feasible"};

  const auto n = graph.size();
  auto order = input;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return graph.incident(a) < graph.incident(b); });

  std::vector<double> out(n, 0.0);  // out[u] = sum over v in L' of b_u(v)
  transmit_set chosen;
  for (const auto v : order)
  {
    bool ok = true;
    for (std::size_t u = 0; ok && u < n; ++u) ok = out[u] + graph.weight(u, v) <= c;
    if (!ok) continue;
    chosen.push_back(v);
    for (std::size_t u = 0; u < n; ++u) out[u] += graph.weight(u, v);
  }

  independence_audit audit;
  audit.input_set = input;
  audit.c = c;
  audit.subset = normalized(std::move(chosen));
  audit.ratio = input.empty() ? 1.0 : static_cast<double>(audit.subset.size()) / static_cast<double>(input.size());
  return audit;
}

} // namespace jamcap
