#pragma once

#include <jamcap/adversary.hpp>
#include <jamcap/error.hpp>
#include <jamcap/interference.hpp>
#include <jamcap/learning.hpp>
#include <jamcap/network.hpp>
#include <jamcap/protocol.hpp>
#include <jamcap/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace jamcap {

enum class receiver_semantics { single, to_one, to_all, to_many };
enum class success_model { conflict_graph, sinr };
enum class oracle_kind { none, exact, greedy };

inline std::string_view
to_string(receiver_semantics s)
{
  switch (s)
  {
    case receiver_semantics::single: return "single";
    case receiver_semantics::to_one: return "to-one";
    case receiver_semantics::to_all: return "to-all";
    case receiver_semantics::to_many: return "to-many";
  }
  return "?";
}

inline std::string_view
to_string(success_model m)
{
  return m == success_model::conflict_graph ? "conflict-graph" : "sinr";
}

inline std::string_view
to_string(oracle_kind o)
{
  switch (o)
  {
    case oracle_kind::none: return "none";
    case oracle_kind::exact: return "exact";
    case oracle_kind::greedy: return "greedy";
  }
  return "?";
}

inline std::string_view
to_string(feedback_mode m)
{
  return m == feedback_mode::oracle_counterfactual ? "oracle-counterfactual" : "realized-only";
}

inline constexpr std::uint64_t never = std::numeric_limits<std::uint64_t>::max();

/*------------------------------------------------------------------------------------------------*/

struct sim_config
{
  network_instance network;
  std::optional<conflict_graph> graph_override;  // replaces the affectance graph (single receiver)
  adversary_params adversary;
  std::optional<jam_schedule> schedule_override;
  phase_policy policy;
  std::uint64_t horizon = 0;
  std::uint64_t seed = 0;
  feedback_mode feedback = feedback_mode::oracle_counterfactual;
  receiver_semantics semantics = receiver_semantics::single;
  success_model model = success_model::conflict_graph;
  std::vector<std::optional<presence_interval>> presence;  // empty: everyone present throughout
  bool async_start = true;
  oracle_kind oracle = oracle_kind::none;
  std::size_t exact_cap = default_exact_cap;
  bool full_trace = false;
  bool record_actions = false;
  std::optional<std::size_t> learner_trace_link;

  std::uint64_t
  join_step(std::size_t v) const
  {
    if (presence.empty() || !presence[v]) return 0;
    return presence[v]->join_phase * policy.k;
  }

  std::uint64_t
  leave_step(std::size_t v) const
  {
    if (presence.empty() || !presence[v] || !presence[v]->leave_phase) return never;
    return *presence[v]->leave_phase * policy.k;
  }

  bool
  present(std::size_t v, std::uint64_t t) const
  {
    return t >= join_step(v) && t < leave_step(v);
  }

  void
  validate() const
  {
    network.validate();
    policy.validate();
    adversary.validate();
    const auto n = network.size();
    if (n == 0) throw config_error{"network has no links"};
    if (horizon < policy.k)
      throw config_error{"horizon " + std::to_string(horizon) + " is shorter than one phase (k = " + std::to_string(policy.k) + ")"};
    if (semantics == receiver_semantics::single && !network.single_receiver())
      throw config_error{"single-receiver semantics on a network with multi-receiver links"};
    if (graph_override)
    {
      if (graph_override->size() != n) throw config_error{"graph override size does not match the network"};
      if (model != success_model::conflict_graph) throw config_error{"graph override requires conflict-graph semantics"};
      if (!network.single_receiver()) throw config_error{"graph override requires single-receiver links"};
    }
    if (schedule_override)
    {
      if (schedule_override->horizon < horizon) throw config_error{"schedule override is shorter than the horizon"};
      const auto rows = schedule_override->params.scope == jam_scope::global ? 1 : n;
      if (schedule_override->rows.size() != rows) throw config_error{"schedule override has the wrong number of rows"};
    }
    if (!presence.empty())
    {
      if (presence.size() != n) throw config_error{"presence list size does not match the network"};
      for (const auto& p : presence)
        if (p) p->validate();
    }
    if (learner_trace_link && *learner_trace_link >= n) throw config_error{"learner trace link out of range"};
  }
};

/*------------------------------------------------------------------------------------------------*/

/// Per-receiver success of every link against a transmit set, for both the link's actual
/// transmission and the counterfactual one (the link joining the others).
///
/// One column per (link, receiver). Column c of link v succeeds iff the accumulated weight of
/// the other transmitters stays within the bound: sum <= 1 for conflict graphs,
/// signal >= beta * (sum + noise) for SINR.
class success_evaluator
{
public:

  success_evaluator(const network_instance& net, success_model model, const conflict_graph* graph_override = nullptr)
    : m_model{model}
    , m_n{net.size()}
  {
    m_offset.resize(m_n + 1, 0);
    for (std::size_t v = 0; v < m_n; ++v) m_offset[v + 1] = m_offset[v] + net.links[v].receivers.size();
    const auto cols = m_offset[m_n];
    m_weight.assign(m_n * cols, 0.0);
    m_signal.assign(cols, 0.0);
    m_beta = net.sinr.beta;
    m_noise = net.sinr.noise;

    for (std::size_t v = 0; v < m_n; ++v)
      for (std::size_t i = 0; i < net.links[v].receivers.size(); ++i)
      {
        const auto c = m_offset[v] + i;
        const auto& rx = net.links[v].receivers[i];
        if (model == success_model::sinr)
          m_signal[c] = detail::received_power(net.links[v], rx, net.sinr.alpha);
        for (std::size_t u = 0; u < m_n; ++u)
        {
          if (u == v) continue;
          double w;
          if (model == success_model::sinr)
            w = detail::received_power(net.links[u], rx, net.sinr.alpha);
          else if (graph_override)
            w = graph_override->weight(u, v);
          else
            w = affectance(net, u, v, i);
          m_weight[u * cols + c] = w;
        }
      }
  }

  std::size_t links() const noexcept { return m_n; }
  std::size_t columns() const noexcept { return m_offset[m_n]; }
  std::size_t first_column(std::size_t v) const noexcept { return m_offset[v]; }
  std::size_t receivers(std::size_t v) const noexcept { return m_offset[v + 1] - m_offset[v]; }

  /// bits[c] = 1 iff column c would be conflict-free with the links in `mask` transmitting
  /// (the column's own link is excluded from the interference sum).
  void
  evaluate(std::span<const std::uint8_t> mask, std::vector<std::uint8_t>& bits) const
  {
    const auto cols = columns();
    m_acc.assign(cols, 0.0);
    for (std::size_t u = 0; u < m_n; ++u)
    {
      if (!mask[u]) continue;
      const double* row = &m_weight[u * cols];
      for (std::size_t c = 0; c < cols; ++c) m_acc[c] += row[c];
    }
    bits.resize(cols);
    for (std::size_t c = 0; c < cols; ++c)
      bits[c] = m_model == success_model::sinr ? m_signal[c] >= m_beta * (m_acc[c] + m_noise)
                                               : m_acc[c] <= 1.0;
  }

  std::span<const std::uint8_t>
  link_bits(const std::vector<std::uint8_t>& bits, std::size_t v) const
  {
    return std::span<const std::uint8_t>{bits}.subspan(first_column(v), receivers(v));
  }

private:

  success_model m_model;
  std::size_t m_n;
  std::vector<std::size_t> m_offset;
  std::vector<double> m_weight;  // [u * columns + c]
  std::vector<double> m_signal;
  double m_beta = 1.0;
  double m_noise = 0.0;
  mutable std::vector<double> m_acc;
};

/*------------------------------------------------------------------------------------------------*/

struct semantic_result
{
  bool success = false;
  std::size_t count = 0;  // conflict-free receivers
};

/// Combines per-receiver bits: to-all = AND, to-one = OR, to-many = count.
inline semantic_result
evaluate_semantics(std::span<const std::uint8_t> receiver_bits, receiver_semantics semantics)
{
  if (receiver_bits.empty()) throw config_error{"link without receivers"};
  std::size_t count = 0;
  for (const auto b : receiver_bits) count += b != 0;
  switch (semantics)
  {
    case receiver_semantics::single:
      if (receiver_bits.size() != 1) throw config_error{"single semantics with " + std::to_string(receiver_bits.size()) + " receivers"};
      return {count == 1, count};
    case receiver_semantics::to_all:
      return {count == receiver_bits.size(), count};
    case receiver_semantics::to_one:
    case receiver_semantics::to_many:
      return {count > 0, count};
  }
  return {};
}

/// Would `v` succeed at step t if it joined `others`? Always false on a jammed (t, v).
inline bool
counterfactual_success( const success_evaluator& eval, const jam_schedule& schedule
                      , std::span<const std::size_t> others, std::size_t v, std::uint64_t t
                      , receiver_semantics semantics)
{
  if (contains(others, v)) throw usage_error{"counterfactual_success: link already transmits"};
  if (is_jammed(schedule, t, v)) return false;
  std::vector<std::uint8_t> mask(eval.links(), 0);
  for (const auto u : others) mask.at(u) = 1;
  std::vector<std::uint8_t> bits;
  eval.evaluate(mask, bits);
  return evaluate_semantics(eval.link_bits(bits, v), semantics).success;
}

/*------------------------------------------------------------------------------------------------*/

/// Largest per-step objective over the links flagged in `candidates`, memoized by set.
/// Single-receiver networks are solved on the conflict graph under either model: summed
/// affectance <= 1 is the SINR condition, except where one clipped affectance hides a value above 1.
class optimum_oracle
{
public:

  static constexpr std::size_t exhaustive_cap = 16;

  optimum_oracle(const sim_config& config, oracle_kind kind)
    : m_kind{kind}
    , m_semantics{config.semantics}
    , m_cap{config.exact_cap}
    , m_use_graph{config.network.single_receiver()}
    , m_eval{config.network, config.model, config.graph_override ? &*config.graph_override : nullptr}
  {
    if (kind == oracle_kind::none) throw usage_error{"optimum oracle kind 'none'"};
    if (m_use_graph)
      m_graph = config.graph_override ? *config.graph_override : build_conflict_graph(config.network);
    const auto n = config.network.size();
    if (kind == oracle_kind::exact && m_use_graph && n > m_cap)
      throw usage_error{ "exact oracle refuses n = " + std::to_string(n) + " > cap " + std::to_string(m_cap)
                       + "; use the greedy oracle" };
    if (kind == oracle_kind::exact && !m_use_graph && n > exhaustive_cap)
      throw usage_error{"exhaustive optimum refuses n = " + std::to_string(n) + "; use the greedy oracle"};
  }

  double
  operator()(const std::vector<std::uint8_t>& candidates)
  {
    const std::string key(candidates.begin(), candidates.end());
    if (const auto it = m_memo.find(key); it != m_memo.end()) return it->second;
    const double value = compute(candidates);
    m_memo.emplace(key, value);
    return value;
  }

private:

  double
  objective(const std::vector<std::uint8_t>& mask)
  {
    m_eval.evaluate(mask, m_bits);
    double total = 0.0;
    for (std::size_t v = 0; v < mask.size(); ++v)
    {
      if (!mask[v]) continue;
      const auto r = evaluate_semantics(m_eval.link_bits(m_bits, v), m_semantics);
      total += m_semantics == receiver_semantics::to_many ? static_cast<double>(r.count) : (r.success ? 1.0 : 0.0);
    }
    return total;
  }

  double
  compute(const std::vector<std::uint8_t>& candidates)
  {
    std::vector<std::size_t> ids;
    for (std::size_t v = 0; v < candidates.size(); ++v)
      if (candidates[v]) ids.push_back(v);
    if (ids.empty()) return 0.0;

    if (m_use_graph)
    {
      const auto sub = m_graph.induced(ids);
      return static_cast<double>(m_kind == oracle_kind::exact ? max_feasible_set_exact(sub, m_cap).size()
                                                              : max_feasible_set_greedy_best(sub).size());
    }

    std::vector<std::uint8_t> mask(candidates.size(), 0);
    if (m_kind == oracle_kind::greedy)
    {
      double best = 0.0;
      for (const auto v : ids)
      {
        mask[v] = 1;
        const double value = objective(mask);
        if (value > best) best = value;
        else mask[v] = 0;
      }
      return best;
    }

    // Dropping a link never hurts the others, so the best subset realizes the optimum.
    double best = 0.0;
    const auto m = ids.size();
    for (std::uint64_t s = 1; s < (std::uint64_t{1} << m); ++s)
    {
      for (std::size_t i = 0; i < m; ++i) mask[ids[i]] = (s >> i) & 1;
      best = std::max(best, objective(mask));
    }
    return best;
  }

  oracle_kind m_kind;
  receiver_semantics m_semantics;
  std::size_t m_cap;
  bool m_use_graph;
  success_evaluator m_eval;
  conflict_graph m_graph;
  std::vector<std::uint8_t> m_bits;
  std::map<std::string, double> m_memo;
};

struct optimum_report
{
  std::vector<double> series;      // OPT_t per step
  double average = 0.0;            // mean of the series
  double single_slot = 0.0;        // |OPT| with every link present and no jamming
  double expected = 0.0;           // delta * |OPT|
};

/// Per-step optimum: 0 on globally jammed steps, otherwise the oracle over the present
/// (and, for individual scope, unjammed) links.
inline optimum_report
optimum_series(const sim_config& config, const jam_schedule& schedule, oracle_kind kind)
{
  optimum_oracle oracle{config, kind};
  const auto n = config.network.size();
  optimum_report rep;
  rep.series.resize(config.horizon, 0.0);

  std::vector<std::uint8_t> all(n, 1);
  rep.single_slot = oracle(all);
  rep.expected = config.adversary.delta * rep.single_slot;

  std::vector<std::uint8_t> cand(n);
  double sum = 0.0;
  for (std::uint64_t t = 0; t < config.horizon; ++t)
  {
    for (std::size_t v = 0; v < n; ++v)
      cand[v] = config.present(v, t) && !is_jammed(schedule, t, v);
    rep.series[t] = oracle(cand);
    sum += rep.series[t];
  }
  rep.average = config.horizon ? sum / static_cast<double>(config.horizon) : 0.0;
  return rep;
}

/*------------------------------------------------------------------------------------------------*/

struct time_step_record
{
  std::uint64_t t = 0;
  std::vector<std::uint8_t> jammed;        // one entry (global) or one per link
  transmit_set transmitting;
  std::vector<std::uint8_t> successes;     // per link
  std::vector<std::uint32_t> to_many_count; // per link, to-many only
};

struct phase_action
{
  std::uint64_t start = 0;
  action chosen = action::idle;
  bool complete = true;

  friend bool operator==(const phase_action&, const phase_action&) = default;
};

struct learner_trace_row
{
  std::uint64_t round = 0;
  double eta = 0.0;
  double weight_idle = 0.0;
  double weight_send = 0.0;
  double p_send = 0.0;
  action chosen = action::idle;
  double loss_idle = std::numeric_limits<double>::quiet_NaN();
  double loss_send = std::numeric_limits<double>::quiet_NaN();
};

struct link_summary
{
  std::uint64_t id = 0;
  std::uint64_t phases = 0;       // complete phases
  std::uint64_t attempted = 0;    // complete phases with an attempt
  std::uint64_t successful = 0;   // attempted and successful
  std::uint64_t send_failed = 0;  // phases where sending fails (actual or counterfactual)
  regret_ledger ledger;
  double final_send_probability = 0.0;
  std::uint64_t present_steps = 0;
  std::uint64_t unjammed_steps = 0;
  std::uint64_t transmissions = 0;
  std::uint64_t successes = 0;
  std::vector<phase_action> actions;
};

struct run_result
{
  std::uint64_t horizon = 0;
  std::uint64_t seed = 0;
  phase_policy policy;
  feedback_mode feedback = feedback_mode::oracle_counterfactual;
  receiver_semantics semantics = receiver_semantics::single;
  jam_schedule schedule;
  conflict_graph graph;                 // receiver-0 conflict graph, for the blocking sums

  std::vector<std::uint32_t> jammed;       // global: 0/1; individual: number of jammed links
  std::vector<std::uint32_t> transmitting;
  std::vector<double> successful;          // per-step objective (to-many: receivers reached)
  std::optional<optimum_report> optimum;

  std::vector<link_summary> links;
  std::vector<time_step_record> trace;
  std::vector<learner_trace_row> learner_trace;

  bool globally_jammed(std::uint64_t t) const { return schedule.params.scope == jam_scope::global && jammed[t]; }
};

/*------------------------------------------------------------------------------------------------*/

namespace detail {

struct link_runtime
{
  std::uint64_t join = 0;
  std::uint64_t leave = never;
  std::uint64_t origin = 0;
  rng_stream rng;
  std::vector<learner_state> learners;  // one per guess level in the synchronized regime

  bool in_phase = false;
  std::uint64_t phase_start = 0;
  std::uint64_t phase_end = 0;
  bool complete = false;
  action chosen = action::idle;
  double p_send = 0.0;
  double credit = 0.0;
  std::size_t level = 0;
};

inline double
level_mu(const phase_policy& p, std::size_t level)
{
  if (p.kind == regime::synchronized_unknown_delta) return std::ldexp(1.0, -static_cast<int>(level)) / 2.0;
  return p.mu;
}

inline double
level_delta(const phase_policy& p, std::size_t level)
{
  if (p.kind == regime::synchronized_unknown_delta) return std::ldexp(1.0, -static_cast<int>(level));
  return p.delta_assumed;
}

} // namespace detail

/// Runs one simulation. Deterministic in the config: the adversary draws from the stream
/// "adv" and link v from "link:<id>", all derived from `config.seed`.
inline run_result
run_simulation(const sim_config& config)
{
  config.validate();
  const auto n = config.network.size();
  const auto& pol = config.policy;
  const auto k = pol.k;
  const bool synced = pol.kind == regime::synchronized_unknown_delta;
  const bool to_many = config.semantics == receiver_semantics::to_many;
  const bool oracle_mode = config.feedback == feedback_mode::oracle_counterfactual;

  run_result res;
  res.horizon = config.horizon;
  res.seed = config.seed;
  res.policy = pol;
  res.feedback = config.feedback;
  res.semantics = config.semantics;

  if (config.schedule_override)
    res.schedule = *config.schedule_override;
  else
  {
    rng_stream adv{config.seed, "adv"};
    res.schedule = build_schedule(config.adversary, config.horizon, n, adv);
  }
  const auto& schedule = res.schedule;
  const bool individual = schedule.params.scope == jam_scope::individual;

  res.graph = config.graph_override ? *config.graph_override : build_conflict_graph(config.network);
  const success_evaluator eval{config.network, config.model, config.graph_override ? &*config.graph_override : nullptr};

  std::vector<detail::link_runtime> rt(n);
  res.links.resize(n);
  for (std::size_t v = 0; v < n; ++v)
  {
    auto& r = rt[v];
    const auto id = config.network.links[v].id;
    r.rng = rng_stream{config.seed, "link:" + std::to_string(id)};
    r.join = config.join_step(v);
    r.leave = config.leave_step(v);
    const bool has_presence = !config.presence.empty() && config.presence[v].has_value();
    // The offset is drawn even when unused so the stream layout does not depend on presence.
    const auto offset = r.rng.below(k);
    r.origin = r.join + (config.async_start && !synced && !has_presence ? offset : 0);
    learner_state init{{1.0, 1.0}, 0.0, config.feedback};
    init.allow_large_eta();
    r.learners.assign(synced ? pol.j_max : 1, init);
    res.links[v].id = id;
  }

  res.jammed.assign(config.horizon, 0);
  res.transmitting.assign(config.horizon, 0);
  res.successful.assign(config.horizon, 0.0);
  if (config.full_trace) res.trace.reserve(config.horizon);

  std::vector<std::uint8_t> mask(n, 0);
  std::vector<std::uint8_t> bits;

  const auto start_phase = [&](std::size_t v, std::uint64_t t) {
    auto& r = rt[v];
    r.in_phase = true;
    r.phase_start = t;
    r.phase_end = std::min({t + k, r.leave, config.horizon});
    r.complete = r.phase_end == t + k;
    r.level = synced ? guess_level(t / k + 1, pol.j_max) : 1;
    auto& learner = r.learners[r.level - 1];
    r.p_send = learner.probability(action::send);
    r.chosen = rwm_choose(learner, r.rng);
    r.credit = 0.0;
  };

  const auto finish_phase = [&](std::size_t v) {
    auto& r = rt[v];
    auto& sum = res.links[v];
    r.in_phase = false;
    if (config.record_actions) sum.actions.push_back({r.phase_start, r.chosen, r.complete});
    if (!r.complete) return;  // truncated phases do not feed the learner

    const double mu = detail::level_mu(pol, r.level);
    const double delta = detail::level_delta(pol, r.level);
    const phase_outcome send_outcome{true, r.credit, k};
    const bool send_ok = phase_success(send_outcome, mu);
    const double u_send = phase_utility(pol.kind, send_outcome, mu, delta);

    ++sum.phases;
    if (r.chosen == action::send) ++sum.attempted;
    if (r.chosen == action::send && send_ok) ++sum.successful;
    if (!send_ok) ++sum.send_failed;
    sum.ledger.record({0.0, u_send}, r.chosen);

    std::array<std::optional<double>, action_count> losses;
    double scale = 1.0;
    if (pol.kind == regime::simulation_variant)
    {
      const auto l = sim_loss(send_outcome, mu, pol.idle_loss);
      losses = {l.idle, l.send};
      scale = static_cast<double>(k);
    }
    else
      losses = {loss_from_utility(pol.kind, 0.0, delta), loss_from_utility(pol.kind, u_send, delta)};
    if (!oracle_mode) losses[index(r.chosen == action::send ? action::idle : action::send)].reset();

    auto& learner = r.learners[r.level - 1];
    learner.set_eta(pol.fixed_eta ? *pol.fixed_eta : eta_schedule(learner.update_count() + 1));
    if (config.learner_trace_link && *config.learner_trace_link == v)
      res.learner_trace.push_back({ learner.update_count() + 1, learner.eta(), learner.weight(action::idle)
                                  , learner.weight(action::send), r.p_send, r.chosen
                                  , losses[0].value_or(std::numeric_limits<double>::quiet_NaN())
                                  , losses[1].value_or(std::numeric_limits<double>::quiet_NaN()) });
    rwm_update_in_place(learner, losses, scale);
  };

  for (std::uint64_t t = 0; t < config.horizon; ++t)
  {
    for (std::size_t v = 0; v < n; ++v)
    {
      auto& r = rt[v];
      if (!r.in_phase && t >= r.origin && t < r.leave && (t - r.origin) % k == 0) start_phase(v, t);
      mask[v] = r.in_phase && r.chosen == action::send;
    }

    eval.evaluate(mask, bits);

    time_step_record rec;
    if (config.full_trace)
    {
      rec.t = t;
      rec.successes.assign(n, 0);
      if (to_many) rec.to_many_count.assign(n, 0);
      rec.jammed = individual ? std::vector<std::uint8_t>(n) : std::vector<std::uint8_t>{schedule.rows[0][t]};
    }

    std::uint32_t jam_count = 0;
    std::uint32_t sending = 0;
    double objective = 0.0;
    for (std::size_t v = 0; v < n; ++v)
    {
      auto& r = rt[v];
      auto& sum = res.links[v];
      const bool jam = schedule.row_for(v)[t] != 0;
      if (individual && jam) ++jam_count;
      if (config.full_trace && individual) rec.jammed[v] = jam;

      const auto sr = evaluate_semantics(eval.link_bits(bits, v), config.semantics);
      const bool ok = !jam && sr.success;
      const double credit = jam ? 0.0
                          : to_many ? static_cast<double>(sr.count) / static_cast<double>(eval.receivers(v))
                          : (sr.success ? 1.0 : 0.0);

      if (config.present(v, t))
      {
        ++sum.present_steps;
        if (!jam) ++sum.unjammed_steps;
      }
      if (mask[v])
      {
        ++sending;
        ++sum.transmissions;
        if (config.full_trace) rec.transmitting.push_back(v);
        if (ok)
        {
          ++sum.successes;
          objective += to_many ? static_cast<double>(sr.count) : 1.0;
          if (config.full_trace)
          {
            rec.successes[v] = 1;
            if (to_many) rec.to_many_count[v] = static_cast<std::uint32_t>(sr.count);
          }
        }
      }
      if (r.in_phase)
      {
        r.credit += credit;
        if (t + 1 == r.phase_end) finish_phase(v);
      }
    }

    res.jammed[t] = individual ? jam_count : schedule.rows[0][t];
    res.transmitting[t] = sending;
    res.successful[t] = objective;
    if (config.full_trace) res.trace.push_back(std::move(rec));
  }

  for (std::size_t v = 0; v < n; ++v)
  {
    double p = 0.0;
    for (const auto& l : rt[v].learners) p += l.probability(action::send);
    res.links[v].final_send_probability = p / static_cast<double>(rt[v].learners.size());
  }

  if (config.oracle != oracle_kind::none) res.optimum = optimum_series(config, schedule, config.oracle);
  return res;
}

/*------------------------------------------------------------------------------------------------*/

struct link_properties
{
  std::uint64_t id = 0;
  std::uint64_t phases = 0;
  double q = 0.0;                  // share of phases with an attempt
  double w = 0.0;                  // share of successful phases
  std::optional<double> f;         // share of phases in which sending fails
  double unjammed_fraction = 0.0;  // delta'_v over the link's presence
  double regret_per_phase = 0.0;   // epsilon_v, external regret / phases
  double regret_vs_idle = 0.0;     // per phase
  double regret_vs_send = 0.0;     // per phase
  double incoming_attempts = 0.0;  // sum_u b_u(v) q_u

  // Ledger identities (unit-utility regimes):
  //   (i)  regret vs idle = q - 2w
  //   (ii) regret vs send = (1 - 2f) - (2w - q)
  // k = 1 regime:
  //   regret vs idle = (q - w) * delta / (2 - delta) - w, hence q * delta / (2 - delta) <= 2w + eps.
  std::optional<double> identity_idle_residual;
  std::optional<double> identity_send_residual;
  std::optional<double> q_bound_slack;  // (2w + eps) - q * delta / (2 - delta)

  bool successful_ok = true;
  std::optional<bool> blocking_ok;  // empty when not applicable or f is unavailable
};

struct property_report
{
  double gamma = 1.0;
  double eta_blocking = 1.0;
  std::vector<link_properties> links;
  bool successfulness_ok = true;
  bool blocking_ok = true;
  bool blocking_checked = true;     // false when f is unavailable (realized-only feedback)
  bool epsilon_hypothesis = true;   // every eps_v < gamma * eta / (4 n)
  double max_identity_residual = 0.0;
  double min_q_bound_slack = std::numeric_limits<double>::infinity();
};

/// Derives q_v, w_v, f_v and the per-phase regret of every link and evaluates the
/// (gamma, eps)-successful and eta-blocking conditions.
inline property_report
measure_properties(const run_result& result, double gamma, double eta_blocking)
{
  if (!(gamma > 0.0)) throw parameter_error{"gamma must be > 0"};
  if (!(eta_blocking > 0.0)) throw parameter_error{"eta must be > 0"};
  const auto n = result.links.size();
  const bool f_available = result.feedback == feedback_mode::oracle_counterfactual;
  const auto& pol = result.policy;

  property_report rep;
  rep.gamma = gamma;
  rep.eta_blocking = eta_blocking;
  rep.blocking_checked = f_available;
  rep.links.resize(n);

  for (std::size_t v = 0; v < n; ++v)
  {
    const auto& s = result.links[v];
    auto& p = rep.links[v];
    p.id = s.id;
    p.phases = s.phases;
    p.unjammed_fraction = s.present_steps ? static_cast<double>(s.unjammed_steps) / static_cast<double>(s.present_steps) : 0.0;
    if (s.phases == 0) continue;
    const double phases = static_cast<double>(s.phases);
    p.q = static_cast<double>(s.attempted) / phases;
    p.w = static_cast<double>(s.successful) / phases;
    if (f_available) p.f = static_cast<double>(s.send_failed) / phases;
    p.regret_per_phase = external_regret(s.ledger) / phases;
    p.regret_vs_idle = regret_against(s.ledger, action::idle) / phases;
    p.regret_vs_send = regret_against(s.ledger, action::send) / phases;
  }

  for (std::size_t v = 0; v < n; ++v)
  {
    auto& p = rep.links[v];
    for (std::size_t u = 0; u < n; ++u)
      if (u != v) p.incoming_attempts += result.graph.weight(u, v) * rep.links[u].q;
    if (p.phases == 0) continue;

    if (has_unit_utility(pol.kind))
    {
      p.identity_idle_residual = std::abs(p.regret_vs_idle - (p.q - 2.0 * p.w));
      // Without oracle feedback f is still well defined for the ledger (the simulator knows
      // every counterfactual), but it is not something the link could measure.
      const double f = static_cast<double>(result.links[v].send_failed) / static_cast<double>(p.phases);
      p.identity_send_residual = std::abs(p.regret_vs_send - ((1.0 - 2.0 * f) - (2.0 * p.w - p.q)));
      rep.max_identity_residual = std::max({rep.max_identity_residual, *p.identity_idle_residual, *p.identity_send_residual});
    }
    else
    {
      const double d = pol.delta_assumed;
      const double x = d / (2.0 - d);
      p.identity_idle_residual = std::abs(p.regret_vs_idle - ((p.q - p.w) * x - p.w));
      p.q_bound_slack = (2.0 * p.w + p.regret_per_phase) - p.q * x;
      rep.max_identity_residual = std::max(rep.max_identity_residual, *p.identity_idle_residual);
      rep.min_q_bound_slack = std::min(rep.min_q_bound_slack, *p.q_bound_slack);
    }

    p.successful_ok = (2.0 * p.w + p.regret_per_phase) / gamma >= p.q - 1e-12;
    rep.successfulness_ok = rep.successfulness_ok && p.successful_ok;
    if (p.regret_per_phase >= gamma * eta_blocking / (4.0 * static_cast<double>(n))) rep.epsilon_hypothesis = false;

    if (f_available && p.q <= eta_blocking / 4.0)
    {
      p.blocking_ok = *p.f >= eta_blocking / 4.0 && p.incoming_attempts >= eta_blocking / 8.0;
      rep.blocking_ok = rep.blocking_ok && *p.blocking_ok;
    }
  }
  return rep;
}

} // namespace jamcap
