#include <jamcap/engine.hpp>

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace jamcap;

namespace {

network_instance
random_net(std::size_t n, std::uint64_t seed, double plane = 300.0)
{
  rng_stream rng{seed, "net"};
  return generate_random_network(n, plane, 100.0, sinr_params{}, 2.0, rng);
}

// Links 100 units apart: no measurable interference between them.
network_instance
isolated_net(std::size_t n)
{
  network_instance net;
  net.plane_size = 100.0 * static_cast<double>(n) + 10.0;
  for (std::size_t i = 0; i < n; ++i)
  {
    const double x = 5.0 + 100.0 * static_cast<double>(i);
    net.links.push_back({i, {x, 5.0}, {{x + 1.0, 5.0}}, 2.0});
  }
  return net;
}

sim_config
base_config(network_instance net, phase_policy policy, std::uint64_t phases, std::uint64_t seed = 1)
{
  sim_config c;
  c.network = std::move(net);
  c.policy = policy;
  c.horizon = phases * policy.k;
  c.seed = seed;
  return c;
}

adversary_params
stochastic(double delta, jam_scope scope = jam_scope::global)
{
  adversary_params a;
  a.kind = adversary_kind::stochastic;
  a.scope = scope;
  a.delta = delta;
  return a;
}

} // namespace

TEST(RunSimulation, IsDeterministic)
{
  auto c = base_config(random_net(8, 3), make_policy(regime::simulation_variant, 0.8), 60, 77);
  c.adversary = stochastic(0.8, jam_scope::individual);
  c.record_actions = true;
  c.full_trace = true;
  const auto a = run_simulation(c);
  const auto b = run_simulation(c);
  EXPECT_EQ(a.jammed, b.jammed);
  EXPECT_EQ(a.transmitting, b.transmitting);
  EXPECT_EQ(a.successful, b.successful);
  ASSERT_EQ(a.links.size(), b.links.size());
  for (std::size_t v = 0; v < a.links.size(); ++v)
  {
    EXPECT_EQ(a.links[v].actions, b.links[v].actions);
    EXPECT_EQ(a.links[v].ledger, b.links[v].ledger);
    EXPECT_EQ(a.links[v].final_send_probability, b.links[v].final_send_probability);
  }

  c.seed = 78;
  const auto d = run_simulation(c);
  EXPECT_NE(a.transmitting, d.transmitting);
}

TEST(RunSimulation, SingleLinkLearnsToSend)
{
  auto c = base_config(isolated_net(1), make_policy(regime::known_tprime_delta, 1.0, 5), 200);
  const auto r = run_simulation(c);
  EXPECT_GT(r.links[0].final_send_probability, 0.99);

  // Closed form: sending always succeeds, so only the idle weight shrinks, by
  // (1 - eta_t)^(1/2) in round t.
  double idle = 1.0;
  for (std::uint64_t t = 1; t <= r.links[0].phases; ++t) idle *= std::pow(1.0 - eta_schedule(t), 0.5);
  EXPECT_NEAR(r.links[0].final_send_probability, 1.0 / (1.0 + idle), 1e-12);

  const auto props = measure_properties(r, 1.0, 1.0);
  EXPECT_GT(props.links[0].q, 0.9);
  EXPECT_DOUBLE_EQ(props.links[0].w, props.links[0].q);
}

TEST(RunSimulation, MutuallyBlockingPairNeverExceedsOneSuccess)
{
  auto c = base_config(isolated_net(2), make_policy(regime::simulation_variant, 1.0), 300);
  c.graph_override = conflict_graph{2, {0.0, 2.0, 2.0, 0.0}};
  c.full_trace = true;
  const auto r = run_simulation(c);
  for (std::uint64_t t = 0; t < c.horizon; ++t)
  {
    EXPECT_LE(r.successful[t], 1.0);
    if (r.transmitting[t] == 2) { EXPECT_EQ(r.successful[t], 0.0); }
    if (r.transmitting[t] == 1) { EXPECT_EQ(r.successful[t], 1.0); }
  }
}

TEST(RunSimulation, TraceConservationAndJamSupremacy)
{
  auto c = base_config(random_net(10, 5), make_policy(regime::simulation_variant, 0.6), 80, 9);
  c.adversary = stochastic(0.6, jam_scope::individual);
  c.full_trace = true;
  const auto r = run_simulation(c);
  ASSERT_EQ(r.trace.size(), c.horizon);
  for (const auto& rec : r.trace)
  {
    for (std::size_t v = 0; v < 10; ++v)
    {
      if (!rec.successes[v]) continue;
      EXPECT_TRUE(contains(rec.transmitting, v));
      EXPECT_FALSE(rec.jammed[v]);
      EXPECT_FALSE(is_jammed(r.schedule, rec.t, v));
    }
    EXPECT_EQ(r.transmitting[rec.t], rec.transmitting.size());
  }
}

TEST(RunSimulation, RejectsInconsistentConfigs)
{
  auto c = base_config(random_net(3, 1), make_policy(regime::simulation_variant, 0.5), 10);
  c.horizon = 5;
  EXPECT_THROW(run_simulation(c), config_error);

  auto m = base_config(build_to_many_instance(3, sinr_params{}), make_policy(regime::simulation_variant, 0.5), 10);
  EXPECT_THROW(run_simulation(m), config_error);
  m.semantics = receiver_semantics::to_all;
  EXPECT_NO_THROW(run_simulation(m));

  auto g = base_config(random_net(3, 1), make_policy(regime::simulation_variant, 0.5), 10);
  g.graph_override = conflict_graph{2};
  EXPECT_THROW(run_simulation(g), config_error);

  auto p = base_config(random_net(3, 1), make_policy(regime::simulation_variant, 0.5), 10);
  p.presence.resize(2);
  EXPECT_THROW(run_simulation(p), config_error);
}

TEST(Counterfactual, Examples)
{
  // The symmetric pair from the affectance example: alpha 2, beta 1, no noise, unit powers,
  // own distance 1, cross distance 2, affectance 0.25 each way.
  network_instance net;
  net.sinr = {2.0, 1.0, 0.0};
  net.plane_size = 10.0;
  net.links.push_back({0, {1.0, 5.0}, {{2.0, 5.0}}, 1.0});
  net.links.push_back({1, {4.0, 5.0}, {{3.0, 5.0}}, 1.0});
  ASSERT_DOUBLE_EQ(affectance(net, 1, 0), 0.25);

  const success_evaluator eval{net, success_model::conflict_graph};
  jam_schedule clear{4, {{0, 0, 0, 0}}, {}};
  jam_schedule jammed{4, {{0, 1, 0, 0}}, {}};
  const std::vector<std::size_t> none;
  const std::vector<std::size_t> other{1};

  EXPECT_TRUE(counterfactual_success(eval, clear, none, 0, 0, receiver_semantics::single));
  EXPECT_TRUE(counterfactual_success(eval, clear, other, 0, 0, receiver_semantics::single));
  EXPECT_FALSE(counterfactual_success(eval, jammed, none, 0, 1, receiver_semantics::single));
  EXPECT_THROW(counterfactual_success(eval, clear, other, 1, 0, receiver_semantics::single), usage_error);
}

TEST(EvaluateSemantics, Examples)
{
  const std::vector<std::uint8_t> bits{1, 1, 0};
  EXPECT_FALSE(evaluate_semantics(bits, receiver_semantics::to_all).success);
  EXPECT_TRUE(evaluate_semantics(bits, receiver_semantics::to_one).success);
  EXPECT_EQ(evaluate_semantics(bits, receiver_semantics::to_many).count, 2u);

  const std::vector<std::uint8_t> zeros{0, 0, 0};
  EXPECT_FALSE(evaluate_semantics(zeros, receiver_semantics::to_all).success);
  EXPECT_FALSE(evaluate_semantics(zeros, receiver_semantics::to_one).success);
  EXPECT_EQ(evaluate_semantics(zeros, receiver_semantics::to_many).count, 0u);

  EXPECT_THROW(evaluate_semantics(bits, receiver_semantics::single), config_error);
  const std::vector<std::uint8_t> one{1};
  EXPECT_TRUE(evaluate_semantics(one, receiver_semantics::single).success);
}

TEST(EvaluateSemantics, ToManyInstanceBothSending)
{
  const auto net = build_to_many_instance(10, sinr_params{});
  const success_evaluator eval{net, success_model::sinr};
  std::vector<std::uint8_t> bits;
  eval.evaluate(std::vector<std::uint8_t>{1, 1}, bits);
  EXPECT_EQ(evaluate_semantics(eval.link_bits(bits, 0), receiver_semantics::to_many).count, 0u);
  EXPECT_EQ(evaluate_semantics(eval.link_bits(bits, 1), receiver_semantics::to_many).count, 1u);

  eval.evaluate(std::vector<std::uint8_t>{1, 0}, bits);
  EXPECT_EQ(evaluate_semantics(eval.link_bits(bits, 0), receiver_semantics::to_many).count, 10u);
}

TEST(SuccessEvaluator, MatchesTheDirectRules)
{
  rng_stream rng{31};
  for (int rep = 0; rep < 20; ++rep)
  {
    const auto net = random_net(7, 100 + rep, 200.0);
    const auto graph = build_conflict_graph(net);
    const success_evaluator cg{net, success_model::conflict_graph};
    const success_evaluator phys{net, success_model::sinr};
    std::vector<std::uint8_t> bits_cg;
    std::vector<std::uint8_t> bits_sinr;
    for (std::uint64_t mask = 1; mask < 128; ++mask)
    {
      const auto set = jamcap::testing::members(mask, 7);
      std::vector<std::uint8_t> m(7);
      for (const auto v : set) m[v] = 1;
      cg.evaluate(m, bits_cg);
      phys.evaluate(m, bits_sinr);
      for (const auto v : set)
      {
        EXPECT_EQ(bits_cg[v] != 0, cg_success(graph, set, v));
        EXPECT_EQ(bits_sinr[v] != 0, jamcap::testing::sinr_by_hand(net, mask, v));
      }
    }
  }
}

TEST(MeasureProperties, HandBuiltLedgers)
{
  run_result r;
  r.policy = make_policy(regime::known_tprime_delta, 0.5, 4);
  r.graph = conflict_graph{2};
  r.links.resize(2);

  auto& idle = r.links[0];
  idle.phases = 10;
  idle.send_failed = 10;
  for (int i = 0; i < 10; ++i) idle.ledger.record({0.0, -1.0}, action::idle);

  auto& busy = r.links[1];
  busy.phases = 10;
  busy.attempted = 10;
  busy.successful = 10;
  for (int i = 0; i < 10; ++i) busy.ledger.record({0.0, 1.0}, action::send);

  const auto p = measure_properties(r, 1.0, 1.0);
  EXPECT_EQ(p.links[0].q, 0.0);
  EXPECT_EQ(p.links[0].w, 0.0);
  EXPECT_EQ(*p.links[0].f, 1.0);
  EXPECT_EQ(p.links[1].q, 1.0);
  EXPECT_EQ(p.links[1].w, 1.0);
  EXPECT_DOUBLE_EQ(p.links[1].regret_vs_idle, -1.0);
  EXPECT_LE(p.max_identity_residual, 1e-12);
  // Link 0 sends rarely and always fails, but nobody interferes with it.
  ASSERT_TRUE(p.links[0].blocking_ok.has_value());
  EXPECT_FALSE(*p.links[0].blocking_ok);

  EXPECT_THROW(measure_properties(r, 0.0, 1.0), parameter_error);
}

TEST(MeasureProperties, IdentitiesHoldOnKnownRegimeRuns)
{
  for (std::uint64_t seed = 1; seed <= 4; ++seed)
  {
    auto c = base_config(random_net(10, seed), make_policy(regime::known_tprime_delta, 0.6, 10), 150, seed);
    adversary_params a;
    a.kind = adversary_kind::bounded;
    a.t_prime = 10;
    a.delta = 0.6;
    a.strategy = bounded_strategy::random_capped;
    c.adversary = a;
    const auto p = measure_properties(run_simulation(c), 1.0, 0.5);
    EXPECT_LE(p.max_identity_residual, 1e-9) << "seed " << seed;
    for (const auto& l : p.links)
    {
      EXPECT_LE(l.w, l.q);
      ASSERT_TRUE(l.f.has_value());
      EXPECT_GE(*l.f, 0.0);
      EXPECT_LE(*l.f, 1.0);
    }
  }
}

TEST(MeasureProperties, KnownDeltaOnlyChain)
{
  for (std::uint64_t seed = 1; seed <= 4; ++seed)
  {
    auto c = base_config(random_net(10, seed), make_policy(regime::known_delta_only, 0.5), 600, seed);
    c.adversary = stochastic(0.5, jam_scope::individual);
    const auto p = measure_properties(run_simulation(c), 1.0, 0.5);
    EXPECT_LE(p.max_identity_residual, 1e-9);
    EXPECT_GE(p.min_q_bound_slack, -1e-9);
  }
}

TEST(MeasureProperties, RealizedOnlySkipsBlocking)
{
  auto c = base_config(random_net(5, 2), make_policy(regime::known_tprime_delta, 0.5, 4), 50);
  c.feedback = feedback_mode::realized_only;
  const auto p = measure_properties(run_simulation(c), 1.0, 1.0);
  EXPECT_FALSE(p.blocking_checked);
  for (const auto& l : p.links)
  {
    EXPECT_FALSE(l.f.has_value());
    EXPECT_FALSE(l.blocking_ok.has_value());
  }
}

TEST(OptimumSeries, NoJammingIsConstant)
{
  auto c = base_config(random_net(12, 4, 150.0), make_policy(regime::simulation_variant, 1.0), 5);
  const auto rep = optimum_series(c, run_simulation(c).schedule, oracle_kind::exact);
  const double opt = static_cast<double>(max_feasible_set_exact(build_conflict_graph(c.network)).size());
  EXPECT_EQ(rep.single_slot, opt);
  for (const double x : rep.series) EXPECT_EQ(x, opt);
  EXPECT_EQ(rep.average, opt);
}

TEST(OptimumSeries, ExactGlobalAdversaryHalvesTheOptimum)
{
  auto c = base_config(random_net(12, 6, 150.0), make_policy(regime::known_tprime_delta, 0.5, 4), 25);
  adversary_params a;
  a.kind = adversary_kind::exact;
  a.t_prime = 4;
  a.delta = 0.5;
  c.adversary = a;
  c.oracle = oracle_kind::exact;
  const auto r = run_simulation(c);
  ASSERT_TRUE(r.optimum.has_value());
  EXPECT_DOUBLE_EQ(r.optimum->average, r.optimum->single_slot / 2.0);
  EXPECT_DOUBLE_EQ(r.optimum->expected, r.optimum->single_slot / 2.0);
  for (std::uint64_t t = 0; t < c.horizon; ++t)
    if (r.jammed[t]) { EXPECT_EQ(r.optimum->series[t], 0.0); }
}

TEST(OptimumSeries, GreedyNeverBeatsExactAndCapIsEnforced)
{
  auto c = base_config(random_net(14, 8, 120.0), make_policy(regime::simulation_variant, 0.7), 10);
  c.adversary = stochastic(0.7, jam_scope::individual);
  const auto s = run_simulation(c).schedule;
  const auto exact = optimum_series(c, s, oracle_kind::exact);
  const auto greedy = optimum_series(c, s, oracle_kind::greedy);
  for (std::size_t t = 0; t < exact.series.size(); ++t) EXPECT_LE(greedy.series[t], exact.series[t]);

  c.exact_cap = 10;
  EXPECT_THROW(optimum_series(c, s, oracle_kind::exact), usage_error);
}

TEST(OptimumSeries, ToManyInstance)
{
  auto c = base_config(build_to_many_instance(10, sinr_params{}), make_policy(regime::simulation_variant, 1.0), 3);
  c.semantics = receiver_semantics::to_many;
  c.model = success_model::sinr;
  const auto rep = optimum_series(c, run_simulation(c).schedule, oracle_kind::exact);
  EXPECT_EQ(rep.single_slot, 10.0);
}

TEST(Presence, LinkStaysSilentOutsideItsInterval)
{
  auto c = base_config(random_net(6, 12), make_policy(regime::simulation_variant, 0.8), 300, 5);
  c.presence.assign(6, std::nullopt);
  c.presence[2] = presence_interval{100, 200};
  c.full_trace = true;
  c.record_actions = true;
  const auto r = run_simulation(c);
  const auto k = c.policy.k;
  for (const auto& rec : r.trace)
    if (rec.t < 100 * k || rec.t >= 200 * k) { EXPECT_FALSE(contains(rec.transmitting, 2)) << rec.t; }
  ASSERT_FALSE(r.links[2].actions.empty());
  EXPECT_EQ(r.links[2].actions.front().start, 100 * k);
  EXPECT_EQ(r.links[2].present_steps, 100 * k);
  EXPECT_EQ(r.links[2].phases, 100u);
}

TEST(Presence, RemovingAnIsolatedLinkLeavesOthersUntouched)
{
  auto net = isolated_net(5);
  auto with = base_config(net, make_policy(regime::simulation_variant, 0.8), 300, 21);
  with.adversary = stochastic(0.8, jam_scope::individual);
  with.adversary.correlation = jam_correlation::shared_coin;
  with.presence.assign(5, std::nullopt);
  with.presence[4] = presence_interval{100, 200};
  with.record_actions = true;

  net.links.pop_back();
  auto without = with;
  without.network = net;
  without.presence.pop_back();

  const auto a = run_simulation(with);
  const auto b = run_simulation(without);
  for (std::size_t v = 0; v < 4; ++v)
  {
    EXPECT_EQ(a.links[v].actions, b.links[v].actions) << v;
    EXPECT_EQ(a.links[v].ledger, b.links[v].ledger) << v;
  }
}

TEST(LearnerTrace, RecordsOneRowPerCompletePhase)
{
  auto c = base_config(random_net(3, 2), make_policy(regime::simulation_variant, 0.8), 50);
  c.learner_trace_link = 1;
  const auto r = run_simulation(c);
  EXPECT_EQ(r.learner_trace.size(), r.links[1].phases);
  for (std::size_t i = 0; i < r.learner_trace.size(); ++i)
  {
    EXPECT_EQ(r.learner_trace[i].round, i + 1);
    EXPECT_DOUBLE_EQ(r.learner_trace[i].eta, eta_schedule(i + 1));
  }
}

TEST(Synchronized, UsesGuessLevelsOnASharedGrid)
{
  auto c = base_config(random_net(4, 3), make_policy(regime::synchronized_unknown_delta, 0.5, 6), 64);
  c.record_actions = true;
  const auto r = run_simulation(c);
  for (const auto& l : r.links)
  {
    ASSERT_EQ(l.actions.size(), 64u);
    for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(l.actions[i].start, i * 6);
  }
}
