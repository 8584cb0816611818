#pragma once

#include <jamcap/error.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace jamcap {

enum class regime
{
  known_tprime_delta,
  known_delta_only,
  synchronized_unknown_delta,
  stochastic_tuned,
  simulation_variant,
};

inline std::string_view
to_string(regime r)
{
  switch (r)
  {
    case regime::known_tprime_delta: return "known-tprime-delta";
    case regime::known_delta_only: return "known-delta-only";
    case regime::synchronized_unknown_delta: return "synchronized-unknown-delta";
    case regime::stochastic_tuned: return "stochastic-tuned";
    case regime::simulation_variant: return "simulation-variant";
  }
  return "?";
}

/// Regimes whose phase utility is +1 / -1 / 0.
constexpr bool
has_unit_utility(regime r) noexcept
{
  return r != regime::known_delta_only;
}

namespace detail {

// Ceiling that ignores floating noise such as 6 / 0.6 = 10.000000000000002.
inline std::uint64_t
ceil_steps(double x)
{
  return static_cast<std::uint64_t>(std::ceil(x - 1e-9));
}

} // namespace detail

/*------------------------------------------------------------------------------------------------*/

/// Phase length k for a regime. The synchronized regime keeps a fixed grid of length T'.
inline std::uint64_t
phase_length(regime r, double delta_assumed, std::optional<std::uint64_t> t_prime = std::nullopt)
{
  if (!(delta_assumed > 0.0 && delta_assumed <= 1.0))
    throw parameter_error{"delta_assumed must be in (0, 1]"};
  switch (r)
  {
    case regime::known_tprime_delta:
    case regime::synchronized_unknown_delta:
      if (!t_prime || *t_prime < 1) throw parameter_error{std::string{to_string(r)} + " needs T' >= 1"};
      return *t_prime;
    case regime::known_delta_only:
      return 1;
    case regime::stochastic_tuned:
      return std::max<std::uint64_t>(1, detail::ceil_steps(2.0 / delta_assumed * std::log(8.0)));
    case regime::simulation_variant:
      return std::max<std::uint64_t>(1, detail::ceil_steps(6.0 / delta_assumed));
  }
  return 1;
}

/// Guess level j of global phase `phase_index` (1-based): min(j_max, 1 + 2-adic valuation).
inline std::uint64_t
guess_level(std::uint64_t phase_index, std::uint64_t j_max)
{
  if (phase_index == 0) throw parameter_error{"delta_guess: phase index must be >= 1"};
  return std::min<std::uint64_t>(j_max, 1 + static_cast<std::uint64_t>(std::countr_zero(phase_index)));
}

/// Guess used in global phase `phase_index` (1-based) by the synchronized regime: 2^-j with
/// j = min(j_max, 1 + 2-adic valuation of the index). Level j then covers a 2^-j share of
/// the phases and the cap level absorbs the remainder.
inline double
delta_guess(std::uint64_t phase_index, std::uint64_t j_max)
{
  if (phase_index == 0) throw parameter_error{"delta_guess: phase index must be >= 1"};
  if (j_max == 0) throw parameter_error{"delta_guess: j_max must be >= 1"};
  return std::ldexp(1.0, -static_cast<int>(guess_level(phase_index, j_max)));
}

/*------------------------------------------------------------------------------------------------*/

struct phase_policy
{
  regime kind = regime::simulation_variant;
  std::uint64_t k = 1;
  double mu = 0.5;
  double delta_assumed = 1.0;
  std::optional<std::uint64_t> t_prime;
  double idle_loss = 0.5;
  std::uint64_t j_max = 6;          // synchronized regime: number of guess levels
  std::optional<double> fixed_eta;  // empty: the doubling schedule

  friend bool operator==(const phase_policy&, const phase_policy&) = default;

  void
  validate() const
  {
    if (k < 1) throw parameter_error{"policy.k must be >= 1"};
    if (!(mu > 0.0 && mu <= 1.0)) throw parameter_error{"policy.mu must be in (0, 1]"};
    if (!(delta_assumed > 0.0 && delta_assumed <= 1.0)) throw parameter_error{"policy.delta_assumed must be in (0, 1]"};
    if (!(idle_loss >= 0.0 && idle_loss <= 1.0)) throw parameter_error{"policy.idle_loss must be in [0, 1]"};
    if (j_max < 1) throw parameter_error{"policy.j_max must be >= 1"};
    if (fixed_eta && !(*fixed_eta >= 0.0 && *fixed_eta < 1.0)) throw parameter_error{"policy.eta must be in [0, 1)"};
  }
};

/// Policy with k and mu filled in for `r`: mu = delta / 2 for phase regimes, 1 for k = 1.
inline phase_policy
make_policy(regime r, double delta_assumed, std::optional<std::uint64_t> t_prime = std::nullopt, double idle_loss = 0.5)
{
  phase_policy p;
  p.kind = r;
  p.delta_assumed = delta_assumed;
  p.t_prime = t_prime;
  p.idle_loss = idle_loss;
  p.k = phase_length(r, delta_assumed, t_prime);
  p.mu = r == regime::known_delta_only ? 1.0 : delta_assumed / 2.0;
  p.validate();
  return p;
}

/*------------------------------------------------------------------------------------------------*/

/// Outcome of one phase of one link. `successful_steps` is fractional only under to-many
/// semantics, where a step is credited with the share of receivers reached.
struct phase_outcome
{
  bool attempted = false;
  double successful_steps = 0.0;
  std::uint64_t total_steps = 0;

  void
  validate() const
  {
    if (!(successful_steps >= 0.0) || successful_steps > static_cast<double>(total_steps) + 1e-9)
      throw usage_error{"phase outcome: successful steps exceed total steps"};
  }
};

/// Attempted and at least a mu share of the steps succeeded.
inline bool
phase_success(const phase_outcome& o, double mu)
{
  o.validate();
  if (!o.attempted || o.total_steps == 0) return false;
  return o.successful_steps + 1e-9 >= mu * static_cast<double>(o.total_steps);
}

/// Per-phase utility: +1 / -1 / 0 for phase regimes, 1 / -delta/(2-delta) / 0 for k = 1.
inline double
phase_utility(regime r, const phase_outcome& o, double mu, double delta_assumed)
{
  if (!o.attempted) return 0.0;
  if (r == regime::known_delta_only)
  {
    if (o.total_steps != 1) throw usage_error{"known-delta-only outcomes span exactly one step"};
    return phase_success(o, 1.0) ? 1.0 : -delta_assumed / (2.0 - delta_assumed);
  }
  return phase_success(o, mu) ? 1.0 : -1.0;
}

/// Maps a utility to a loss in [0, 1] (best utility -> 0, worst -> 1).
inline double
loss_from_utility(regime r, double utility, double delta_assumed)
{
  const double worst = r == regime::known_delta_only ? -delta_assumed / (2.0 - delta_assumed) : -1.0;
  return (1.0 - utility) / (1.0 - worst);
}

struct action_losses
{
  double idle = 0.5;
  double send = 0.0;
};

/// Losses of the simulation variant: idle costs `idle_loss`, sending costs 0 when the phase
/// (actual or counterfactual) succeeds and 1 otherwise.
inline action_losses
sim_loss(const phase_outcome& send_outcome, double mu, double idle_loss)
{
  return {idle_loss, phase_success(send_outcome, mu) ? 0.0 : 1.0};
}

} // namespace jamcap
