#pragma once

#include <jamcap/error.hpp>
#include <jamcap/rng.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

namespace jamcap {

enum class action : std::uint8_t { idle = 0, send = 1 };

inline constexpr std::size_t action_count = 2;

constexpr std::size_t
index(action a) noexcept
{
  return static_cast<std::size_t>(a);
}

enum class feedback_mode { oracle_counterfactual, realized_only };

/*------------------------------------------------------------------------------------------------*/

/// Multiplicative-weights state over {idle, send}.
class learner_state
{
public:

  static constexpr double underflow_floor = 1e-300;

  learner_state() = default;

  learner_state(std::array<double, action_count> weights, double eta, feedback_mode mode = feedback_mode::oracle_counterfactual)
    : m_weights{weights}
    , m_mode{mode}
  {
    for (const double w : m_weights)
      if (!(w > 0.0) || !std::isfinite(w)) throw parameter_error{"learner weights must be positive and finite"};
    set_eta(eta);
  }

  const std::array<double, action_count>& weights() const noexcept { return m_weights; }
  double weight(action a) const noexcept { return m_weights[index(a)]; }
  double eta() const noexcept { return m_eta; }
  std::uint64_t update_count() const noexcept { return m_updates; }
  feedback_mode mode() const noexcept { return m_mode; }

  void
  set_eta(double eta)
  {
    const double upper = m_allow_large_eta ? 1.0 : 0.5;
    if (!(eta >= 0.0 && eta < upper))
      throw parameter_error{"eta out of range, got " + std::to_string(eta)};
    m_eta = eta;
  }

  /// The simulation schedule starts at sqrt(0.5) > 1/2; this lifts the bound to [0, 1).
  void allow_large_eta(bool on = true) noexcept { m_allow_large_eta = on; }

  double
  probability(action a) const noexcept
  {
    return m_weights[index(a)] / (m_weights[0] + m_weights[1]);
  }

private:

  friend void rwm_update_in_place(learner_state&, const std::array<std::optional<double>, action_count>&, double);

  std::array<double, action_count> m_weights{1.0, 1.0};
  double m_eta = 0.0;
  std::uint64_t m_updates = 0;
  feedback_mode m_mode = feedback_mode::oracle_counterfactual;
  bool m_allow_large_eta = false;
};

/// Samples an action with probability proportional to its weight. One draw per call.
inline action
rwm_choose(const learner_state& state, rng_stream& rng)
{
  const double u = rng.uniform01();
  return u < state.probability(action::send) ? action::send : action::idle;
}

/// w_a <- w_a * (1 - eta)^(loss_a * scale) for every action with a supplied loss.
inline void
rwm_update_in_place(learner_state& s, const std::array<std::optional<double>, action_count>& losses, double scale)
{
  if (!(scale >= 1.0)) throw parameter_error{"loss scale must be >= 1"};
  for (const auto& l : losses)
    if (l && !(*l >= 0.0 && *l <= 1.0)) throw parameter_error{"loss must be in [0, 1], got " + std::to_string(*l)};

  for (std::size_t a = 0; a < action_count; ++a)
    if (losses[a] && *losses[a] != 0.0)
      s.m_weights[a] *= std::pow(1.0 - s.m_eta, *losses[a] * scale);

  const double top = std::max(s.m_weights[0], s.m_weights[1]);
  if (top < learner_state::underflow_floor)
    for (auto& w : s.m_weights) w /= top;
  // A weight that rounds to 0 would make its action unreachable forever.
  for (auto& w : s.m_weights) w = std::max(w, std::numeric_limits<double>::min());
  ++s.m_updates;
}

inline learner_state
rwm_update(learner_state s, const std::array<std::optional<double>, action_count>& losses, double scale = 1.0)
{
  rwm_update_in_place(s, losses, scale);
  return s;
}

/// 0.5^((1 + floor(log2 round)) / 2): sqrt(0.5) in round 1, multiplied by sqrt(0.5) each
/// time the round counter passes a power of two.
inline double
eta_schedule(std::uint64_t round)
{
  if (round == 0) throw parameter_error{"eta_schedule: round must be >= 1"};
  const auto halvings = static_cast<double>(std::bit_width(round));  // 1 + floor(log2 round)
  return std::pow(0.5, halvings / 2.0);
}

/*------------------------------------------------------------------------------------------------*/

/// Cumulative utilities of each fixed action against the realized utility of the play.
struct regret_ledger
{
  std::array<double, action_count> fixed_utility{0.0, 0.0};
  double realized_utility = 0.0;
  std::uint64_t rounds = 0;

  void
  record(const std::array<double, action_count>& utility, action played)
  {
    fixed_utility[0] += utility[0];
    fixed_utility[1] += utility[1];
    realized_utility += utility[index(played)];
    ++rounds;
  }

  /// Expected-utility variant: credits the play with the mixture it was drawn from.
  void
  record_mixed(const std::array<double, action_count>& utility, double p_send)
  {
    fixed_utility[0] += utility[0];
    fixed_utility[1] += utility[1];
    realized_utility += (1.0 - p_send) * utility[0] + p_send * utility[1];
    ++rounds;
  }

  friend bool operator==(const regret_ledger&, const regret_ledger&) = default;
};

inline double
external_regret(const regret_ledger& ledger)
{
  return std::max(ledger.fixed_utility[0], ledger.fixed_utility[1]) - ledger.realized_utility;
}

inline double
average_regret(const regret_ledger& ledger)
{
  if (ledger.rounds == 0) throw usage_error{"average regret of an empty ledger"};
  return external_regret(ledger) / static_cast<double>(ledger.rounds);
}

/// Regret against one particular fixed action.
inline double
regret_against(const regret_ledger& ledger, action a)
{
  return ledger.fixed_utility[index(a)] - ledger.realized_utility;
}

inline action
best_fixed_action(const regret_ledger& ledger)
{
  return ledger.fixed_utility[1] > ledger.fixed_utility[0] ? action::send : action::idle;
}

} // namespace jamcap
