#pragma once

#include <jamcap/error.hpp>
#include <jamcap/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace jamcap {

/*------------------------------------------------------------------------------------------------*/

enum class adversary_kind { bounded, exact, stochastic };
enum class jam_scope { global, individual };
enum class bounded_strategy { random_in_period, prefix_burst, random_capped };
enum class jam_correlation { independent, shared_coin };

inline constexpr double exact_rounding_tolerance = 1e-9;
inline constexpr double window_tolerance = 1e-9;

struct adversary_params
{
  adversary_kind kind = adversary_kind::stochastic;
  jam_scope scope = jam_scope::global;
  std::optional<std::uint64_t> t_prime;
  double delta = 1.0;  // fraction of time left unjammed
  bounded_strategy strategy = bounded_strategy::random_in_period;
  jam_correlation correlation = jam_correlation::independent;
  double margin = 0.0;  // random-in-period only: fraction of the per-period budget left unused

  friend bool operator==(const adversary_params&, const adversary_params&) = default;

  /// round((1 - delta) * T'), the number of jams per length-T' window of an exact adversary.
  std::uint64_t
  jams_per_period() const
  {
    return static_cast<std::uint64_t>(std::llround((1.0 - delta) * static_cast<double>(t_prime.value_or(0))));
  }

  void
  validate() const
  {
    if (!(delta > 0.0 && delta <= 1.0))
      throw parameter_error{"adversary.delta must be in (0, 1], got " + std::to_string(delta)};
    if (kind != adversary_kind::stochastic)
    {
      if (!t_prime) throw parameter_error{"adversary.t_prime is required for bounded/exact adversaries"};
      if (*t_prime < 1) throw parameter_error{"adversary.t_prime must be >= 1"};
    }
    if (kind == adversary_kind::exact)
    {
      const double target = (1.0 - delta) * static_cast<double>(*t_prime);
      if (std::abs(target - std::round(target)) > exact_rounding_tolerance)
        throw parameter_error{"exact adversary: (1 - delta) * T' = " + std::to_string(target) + " is not integral"};
    }
    if (!(margin >= 0.0 && margin <= 1.0)) throw parameter_error{"adversary.margin must be in [0, 1]"};
  }
};

/// Oblivious jam schedule: one row for a global adversary, one row per link otherwise.
/// A nonzero entry means the step is jammed.
struct jam_schedule
{
  std::uint64_t horizon = 0;
  std::vector<std::vector<std::uint8_t>> rows;
  adversary_params params;

  friend bool operator==(const jam_schedule&, const jam_schedule&) = default;

  const std::vector<std::uint8_t>&
  row_for(std::size_t link) const
  {
    if (params.scope == jam_scope::global) return rows.at(0);
    if (link >= rows.size()) throw bounds_error{"link " + std::to_string(link) + " has no schedule row"};
    return rows[link];
  }
};

inline bool
is_jammed(const jam_schedule& s, std::uint64_t t, std::size_t link = 0)
{
  if (t >= s.horizon)
    throw bounds_error{"time step " + std::to_string(t) + " outside horizon " + std::to_string(s.horizon)};
  return s.row_for(link)[t] != 0;
}

/*------------------------------------------------------------------------------------------------*/

struct window_violation
{
  std::size_t row = 0;
  std::uint64_t start = 0;
  std::uint64_t length = 0;
  std::uint64_t jammed = 0;
};

struct bounded_check
{
  bool ok = true;
  std::optional<window_violation> first_violation;

  explicit operator bool() const noexcept { return ok; }
};

namespace detail {

// g(i) = (#jams in [0, i)) - (1 - delta) * i. A window [s, e) is within budget iff
// g(e) - g(s) <= tol.
inline std::vector<double>
budget_slack(const std::vector<std::uint8_t>& row, double jam_fraction)
{
  std::vector<double> g(row.size() + 1, 0.0);
  std::uint64_t jams = 0;
  for (std::size_t i = 0; i < row.size(); ++i)
  {
    jams += row[i] != 0;
    g[i + 1] = static_cast<double>(jams) - jam_fraction * static_cast<double>(i + 1);
  }
  return g;
}

// First window [s, s + L) with L >= t_prime over budget (smallest s, then smallest L).
inline std::optional<window_violation>
first_violation(const std::vector<std::uint8_t>& row, std::uint64_t t_prime, double delta)
{
  const auto h = row.size();
  if (t_prime > h) return std::nullopt;
  const double jam_fraction = 1.0 - delta;
  const auto g = budget_slack(row, jam_fraction);

  std::vector<double> suffix_max(h + 2, -std::numeric_limits<double>::infinity());
  for (std::size_t i = h + 1; i-- > 0;)
    suffix_max[i] = std::max(suffix_max[i + 1], g[i]);

  for (std::size_t s = 0; s + t_prime <= h; ++s)
  {
    if (suffix_max[s + t_prime] - g[s] <= window_tolerance) continue;
    for (std::size_t e = s + t_prime; e <= h; ++e)
      if (g[e] - g[s] > window_tolerance)
      {
        std::uint64_t jams = 0;
        for (std::size_t i = s; i < e; ++i) jams += row[i] != 0;
        return window_violation{0, s, e - s, jams};
      }
  }
  return std::nullopt;
}

// Unjams the latest jammed step of the first violating window until none is left.
inline void
repair_row(std::vector<std::uint8_t>& row, std::uint64_t t_prime, double delta)
{
  while (auto v = first_violation(row, t_prime, delta))
  {
    for (auto i = v->start + v->length; i-- > v->start;)
      if (row[i])
      {
        row[i] = 0;
        break;
      }
  }
}

inline std::vector<std::uint8_t>
exact_row(std::uint64_t horizon, std::uint64_t t_prime, std::uint64_t jams, rng_stream& rng)
{
  std::vector<std::uint8_t> period(t_prime, 0);
  std::fill_n(period.begin(), jams, 1);
  for (std::uint64_t i = t_prime; i > 1; --i)  // Fisher-Yates
    std::swap(period[i - 1], period[rng.below(i)]);
  std::vector<std::uint8_t> row(horizon);
  for (std::uint64_t t = 0; t < horizon; ++t) row[t] = period[t % t_prime];
  return row;
}

// Jams as early as possible while every window [s, e) keeps at most
// (1 - delta) * max(e - s, T') jams. That invariant survives appending an unjammed step, so
// the greedy never gets stuck, and it implies the bounded constraint.
inline std::vector<std::uint8_t>
front_loaded_row(std::uint64_t horizon, std::uint64_t t_prime, double delta)
{
  const double c = 1.0 - delta;
  std::vector<std::uint8_t> row(horizon, 0);
  std::vector<std::uint64_t> prefix(horizon + 1, 0);
  std::vector<double> g(horizon + 1, 0.0);
  double running_min = std::numeric_limits<double>::infinity();  // min g(s), s <= e - T'

  for (std::uint64_t t = 0; t < horizon; ++t)
  {
    const auto e = t + 1;
    if (e >= t_prime) running_min = std::min(running_min, g[e - t_prime]);

    const auto jams_if = prefix[t] + 1;
    const double g_if = static_cast<double>(jams_if) - c * static_cast<double>(e);
    bool ok = e < t_prime || g_if - running_min <= window_tolerance;
    // Short windows: the longest one ending at e (length T' - 1) carries the most jams.
    if (ok && t_prime > 1)
    {
      const auto s = e >= t_prime - 1 ? e - (t_prime - 1) : 0;
      ok = static_cast<double>(jams_if - prefix[s]) <= c * static_cast<double>(t_prime) + window_tolerance;
    }
    row[t] = ok ? 1 : 0;
    prefix[e] = prefix[t] + row[t];
    g[e] = static_cast<double>(prefix[e]) - c * static_cast<double>(e);
  }
  return row;
}

inline std::vector<std::uint8_t>
random_in_period_row( std::uint64_t horizon, std::uint64_t t_prime, std::uint64_t budget
                    , double delta, rng_stream& rng)
{
  std::vector<std::uint8_t> row(horizon, 0);
  std::vector<std::uint8_t> period(t_prime);
  for (std::uint64_t start = 0; start < horizon; start += t_prime)
  {
    std::fill(period.begin(), period.end(), 0);
    std::fill_n(period.begin(), budget, 1);
    for (std::uint64_t i = t_prime; i > 1; --i)
      std::swap(period[i - 1], period[rng.below(i)]);
    for (std::uint64_t i = 0; i < t_prime && start + i < horizon; ++i) row[start + i] = period[i];
  }
  repair_row(row, t_prime, delta);
  return row;
}

} // namespace detail

/// Checks the (T', 1 - delta)-bounded constraint: every window of length >= T' carries at
/// most (1 - delta) * length jams. Checked per row; runs in O(horizon) per row.
inline bounded_check
validate_bounded(const jam_schedule& schedule, std::uint64_t t_prime, double delta)
{
  if (t_prime < 1) throw parameter_error{"T' must be >= 1"};
  if (t_prime > schedule.horizon) throw parameter_error{"T' exceeds the schedule horizon"};
  for (std::size_t r = 0; r < schedule.rows.size(); ++r)
    if (auto v = detail::first_violation(schedule.rows[r], t_prime, delta))
    {
      v->row = r;
      return {false, v};
    }
  return {};
}

/*------------------------------------------------------------------------------------------------*/

/// Draws a schedule for `params`. Exact: one random period repeated. Bounded: by strategy,
/// always within the bounded constraint. Stochastic: Bernoulli(1 - delta) per step.
inline jam_schedule
build_schedule(const adversary_params& params, std::uint64_t horizon, std::size_t n_links, rng_stream& rng)
{
  params.validate();
  if (horizon < 1) throw parameter_error{"horizon must be >= 1"};
  if (params.scope == jam_scope::individual && n_links < 1)
    throw parameter_error{"individual scope needs at least one link"};

  jam_schedule s;
  s.horizon = horizon;
  s.params = params;
  const std::size_t n_rows = params.scope == jam_scope::global ? 1 : n_links;
  const double p_jam = 1.0 - params.delta;

  if (params.kind == adversary_kind::stochastic && params.scope == jam_scope::individual
      && params.correlation == jam_correlation::shared_coin)
  {
    std::vector<std::uint8_t> row(horizon);
    for (auto& b : row) b = rng.bernoulli(p_jam);
    s.rows.assign(n_rows, row);
    return s;
  }

  s.rows.reserve(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r)
  {
    switch (params.kind)
    {
      case adversary_kind::stochastic:
      {
        std::vector<std::uint8_t> row(horizon);
        for (auto& b : row) b = rng.bernoulli(p_jam);
        s.rows.push_back(std::move(row));
        break;
      }

      case adversary_kind::exact:
        s.rows.push_back(detail::exact_row(horizon, *params.t_prime, params.jams_per_period(), rng));
        break;

      case adversary_kind::bounded:
      {
        const auto tp = *params.t_prime;
        switch (params.strategy)
        {
          case bounded_strategy::prefix_burst:
            s.rows.push_back(detail::front_loaded_row(horizon, tp, params.delta));
            break;

          case bounded_strategy::random_in_period:
          {
            const auto budget = static_cast<std::uint64_t>(
              std::floor(p_jam * static_cast<double>(tp) * (1.0 - params.margin) + exact_rounding_tolerance));
            s.rows.push_back(detail::random_in_period_row(horizon, tp, budget, params.delta, rng));
            break;
          }

          case bounded_strategy::random_capped:
          {
            std::vector<std::uint8_t> row(horizon);
            for (auto& b : row) b = rng.bernoulli(p_jam);
            detail::repair_row(row, tp, params.delta);
            s.rows.push_back(std::move(row));
            break;
          }
        }
        break;
      }
    }
  }
  return s;
}

/*------------------------------------------------------------------------------------------------*/

inline std::string_view
to_string(adversary_kind k)
{
  switch (k)
  {
    case adversary_kind::bounded: return "bounded";
    case adversary_kind::exact: return "exact";
    case adversary_kind::stochastic: return "stochastic";
  }
  return "?";
}

inline std::string_view
to_string(jam_scope s)
{
  return s == jam_scope::global ? "global" : "individual";
}

inline std::string_view
to_string(bounded_strategy s)
{
  switch (s)
  {
    case bounded_strategy::random_in_period: return "random-in-period";
    case bounded_strategy::prefix_burst: return "prefix-burst";
    case bounded_strategy::random_capped: return "random-capped";
  }
  return "?";
}

inline std::string_view
to_string(jam_correlation c)
{
  return c == jam_correlation::independent ? "independent" : "shared-coin";
}

} // namespace jamcap
