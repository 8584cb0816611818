#pragma once

#include <jamcap/adversary.hpp>
#include <jamcap/engine.hpp>
#include <jamcap/error.hpp>
#include <jamcap/io.hpp>
#include <jamcap/network.hpp>
#include <jamcap/protocol.hpp>

#include <algorithm>
#include <cmath>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace jamcap {

inline constexpr int schema_version = 1;

enum class experiment_kind { run, fig1, fig2 };
enum class aggregation_kind { unjammed_mean, windowed_mean };

inline std::string_view
to_string(experiment_kind k)
{
  switch (k)
  {
    case experiment_kind::run: return "run";
    case experiment_kind::fig1: return "fig1";
    case experiment_kind::fig2: return "fig2";
  }
  return "?";
}

inline std::string_view
to_string(aggregation_kind a)
{
  return a == aggregation_kind::unjammed_mean ? "unjammed-mean" : "windowed-mean";
}

template <>
struct enum_names<experiment_kind>
{
  static constexpr std::pair<experiment_kind, std::string_view> table[] = {
    {experiment_kind::run, "run"}, {experiment_kind::fig1, "fig1"}, {experiment_kind::fig2, "fig2"}};
};

template <>
struct enum_names<aggregation_kind>
{
  static constexpr std::pair<aggregation_kind, std::string_view> table[] = {
    {aggregation_kind::unjammed_mean, "unjammed-mean"}, {aggregation_kind::windowed_mean, "windowed-mean"}};
};

/*------------------------------------------------------------------------------------------------*/

/// Where the links come from: the random recipe, the to-many lower-bound instance, or a
/// fixed instance.
struct network_source
{
  std::size_t n = 200;
  double plane_size = 1000.0;
  double max_sender_dist = 100.0;
  double power = 2.0;
  sinr_params sinr;
  std::optional<std::size_t> to_many_w;
  std::optional<network_instance> instance;

  friend bool operator==(const network_source&, const network_source&) = default;
};

struct presence_entry
{
  std::size_t link = 0;
  presence_interval interval;

  friend bool operator==(const presence_entry&, const presence_entry&) = default;
};

struct sweep_spec
{
  std::uint64_t networks = 1;
  std::uint64_t seeds = 1;               // runs per network
  std::vector<double> delta_assumed;     // empty: the policy's own delta only
  std::vector<jam_scope> scopes;         // empty: the adversary's own scope only

  friend bool operator==(const sweep_spec&, const sweep_spec&) = default;
};

struct output_spec
{
  bool per_run = true;
  std::optional<std::size_t> learner_trace_link;
  aggregation_kind aggregation = aggregation_kind::unjammed_mean;
  std::uint64_t window = 50;

  friend bool operator==(const output_spec&, const output_spec&) = default;
};

struct experiment_spec
{
  std::string name = "run";
  experiment_kind kind = experiment_kind::run;
  std::uint64_t seed = 1;

  network_source network;
  adversary_params adversary;

  regime policy_regime = regime::simulation_variant;
  double delta_assumed = 0.8;
  std::optional<std::uint64_t> policy_t_prime;
  double idle_loss = 0.5;
  std::uint64_t j_max = 6;
  std::optional<double> eta;

  std::uint64_t phases = 500;
  std::optional<std::uint64_t> horizon;  // steps; overrides phases

  feedback_mode feedback = feedback_mode::oracle_counterfactual;
  receiver_semantics semantics = receiver_semantics::single;
  success_model model = success_model::sinr;
  bool async_start = true;
  std::optional<oracle_kind> oracle;  // empty: exact when small enough, else greedy
  std::size_t exact_cap = default_exact_cap;
  std::vector<presence_entry> presence;

  sweep_spec sweep;
  double gamma = 1.0;
  double eta_blocking = 1.0;
  output_spec outputs;

  friend bool operator==(const experiment_spec&, const experiment_spec&) = default;

  std::size_t
  link_count() const
  {
    if (network.instance) return network.instance->size();
    if (network.to_many_w) return 2;
    return network.n;
  }

  std::vector<double>
  deltas() const
  {
    return sweep.delta_assumed.empty() ? std::vector<double>{delta_assumed} : sweep.delta_assumed;
  }

  std::vector<jam_scope>
  scopes() const
  {
    return sweep.scopes.empty() ? std::vector<jam_scope>{adversary.scope} : sweep.scopes;
  }

  oracle_kind
  resolved_oracle() const
  {
    if (oracle) return *oracle;
    const bool single = network.instance ? network.instance->single_receiver() : !network.to_many_w || *network.to_many_w == 1;
    const std::size_t cap = single ? exact_cap : std::min(exact_cap, optimum_oracle::exhaustive_cap);
    return link_count() <= cap ? oracle_kind::exact : oracle_kind::greedy;
  }
};

/*------------------------------------------------------------------------------------------------*/
// Config parsing

namespace detail {

inline std::string
join_path(std::string_view path, std::string_view key)
{
  return path.empty() ? std::string{key} : std::string{path} + "." + std::string{key};
}

inline void
check_keys(const json& j, std::string_view path, std::initializer_list<std::string_view> allowed)
{
  if (!j.is_object()) throw config_error{(path.empty() ? std::string{"config"} : std::string{path}) + " must be an object"};
  std::string unknown;
  for (const auto& [key, value] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      unknown += (unknown.empty() ? "" : ", ") + join_path(path, key);
  if (!unknown.empty()) throw config_error{"unknown key(s): " + unknown};
}

inline double
get_real(const json& j, std::string_view path)
{
  if (!j.is_number()) throw config_error{std::string{path} + ": expected a number"};
  return j.get<double>();
}

inline std::uint64_t
get_count(const json& j, std::string_view path)
{
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    throw config_error{std::string{path} + ": expected a nonnegative integer"};
  return j.get<std::uint64_t>();
}

inline bool
get_bool(const json& j, std::string_view path)
{
  if (!j.is_boolean()) throw config_error{std::string{path} + ": expected true or false"};
  return j.get<bool>();
}

inline std::string
get_string(const json& j, std::string_view path)
{
  if (!j.is_string()) throw config_error{std::string{path} + ": expected a string"};
  return j.get<std::string>();
}

template <typename Enum>
Enum
get_enum(const json& j, std::string_view path)
{
  return parse_enum<Enum>(path, get_string(j, path));
}

inline void
check_unit_interval(double x, std::string_view path)
{
  if (!(x > 0.0 && x <= 1.0)) throw config_error{std::string{path} + " must be in (0, 1], got " + format_number(x)};
}

inline sinr_params
parse_sinr(const json& j, sinr_params p)
{
  check_keys(j, "network.sinr", {"alpha", "beta", "noise"});
  if (j.contains("alpha")) p.alpha = get_real(j["alpha"], "network.sinr.alpha");
  if (j.contains("beta")) p.beta = get_real(j["beta"], "network.sinr.beta");
  if (j.contains("noise")) p.noise = get_real(j["noise"], "network.sinr.noise");
  return p;
}

inline void
parse_network(const json& j, network_source& src, const std::filesystem::path& base_dir)
{
  check_keys(j, "network", {"n", "plane_size", "max_sender_dist", "power", "sinr", "to_many_w", "instance", "file"});
  if (j.contains("n")) src.n = get_count(j["n"], "network.n");
  if (j.contains("plane_size")) src.plane_size = get_real(j["plane_size"], "network.plane_size");
  if (j.contains("max_sender_dist")) src.max_sender_dist = get_real(j["max_sender_dist"], "network.max_sender_dist");
  if (j.contains("power")) src.power = get_real(j["power"], "network.power");
  if (j.contains("sinr")) src.sinr = parse_sinr(j["sinr"], src.sinr);
  if (j.contains("to_many_w")) src.to_many_w = get_count(j["to_many_w"], "network.to_many_w");
  if (j.contains("instance") && j.contains("file")) throw config_error{"network: give either instance or file, not both"};
  if (j.contains("instance")) src.instance = network_from_json(j["instance"]);
  if (j.contains("file"))
  {
    const std::filesystem::path p{get_string(j["file"], "network.file")};
    src.instance = network_from_json(read_json_file(p.is_absolute() ? p : base_dir / p));
  }
  if (src.instance && src.to_many_w) throw config_error{"network: to_many_w and a fixed instance are exclusive"};
}

inline adversary_params
parse_adversary(const json& j, adversary_params p)
{
  check_keys(j, "adversary", {"kind", "scope", "t_prime", "delta", "strategy", "correlation", "margin"});
  if (j.contains("kind")) p.kind = get_enum<adversary_kind>(j["kind"], "adversary.kind");
  if (j.contains("scope")) p.scope = get_enum<jam_scope>(j["scope"], "adversary.scope");
  if (j.contains("t_prime")) p.t_prime = get_count(j["t_prime"], "adversary.t_prime");
  if (j.contains("delta")) p.delta = get_real(j["delta"], "adversary.delta");
  if (j.contains("strategy")) p.strategy = get_enum<bounded_strategy>(j["strategy"], "adversary.strategy");
  if (j.contains("correlation")) p.correlation = get_enum<jam_correlation>(j["correlation"], "adversary.correlation");
  if (j.contains("margin")) p.margin = get_real(j["margin"], "adversary.margin");
  check_unit_interval(p.delta, "adversary.delta");
  return p;
}

} // namespace detail

/// Experiment defaults before the config is applied.
inline experiment_spec
preset(experiment_kind kind)
{
  experiment_spec s;
  s.kind = kind;
  s.name = std::string{to_string(kind)};
  s.adversary.kind = adversary_kind::stochastic;
  s.adversary.scope = jam_scope::global;
  s.adversary.delta = 0.8;
  switch (kind)
  {
    case experiment_kind::run:
      break;
    case experiment_kind::fig1:
      s.sweep.scopes = {jam_scope::global, jam_scope::individual};
      break;
    case experiment_kind::fig2:
      s.adversary.delta = 0.35;
      s.sweep.delta_assumed = {0.2, 0.35, 0.6, 0.7, 0.9};
      s.sweep.networks = 10;
      s.sweep.seeds = 1000;
      s.phases = 400;
      s.outputs.per_run = false;
      break;
  }
  s.delta_assumed = s.adversary.delta;
  return s;
}

/// Validated spec from a config document. `kind_override` comes from the CLI subcommand;
/// `base_dir` resolves relative network files. A missing seed is drawn from the system.
inline experiment_spec
parse_spec( const json& j, std::optional<experiment_kind> kind_override = std::nullopt
          , const std::filesystem::path& base_dir = {})
{
  using namespace detail;
  check_keys(j, "", { "schema_version", "name", "experiment", "seed", "network", "adversary", "policy", "phases"
                    , "horizon", "feedback", "semantics", "model", "async_start", "oracle", "exact_cap", "presence"
                    , "sweep", "properties", "outputs" });

  if (j.contains("schema_version") && get_count(j["schema_version"], "schema_version") != schema_version)
    throw config_error{"schema_version: unsupported version " + j["schema_version"].dump()};

  auto kind = j.contains("experiment") ? get_enum<experiment_kind>(j["experiment"], "experiment") : experiment_kind::run;
  if (kind_override) kind = *kind_override;
  auto s = preset(kind);

  if (j.contains("name")) s.name = get_string(j["name"], "name");
  if (j.contains("seed"))
    s.seed = get_count(j["seed"], "seed");
  else
    s.seed = (std::uint64_t{std::random_device{}()} << 32) ^ std::random_device{}();

  if (j.contains("network")) parse_network(j["network"], s.network, base_dir);
  if (j.contains("adversary")) s.adversary = parse_adversary(j["adversary"], s.adversary);

  bool delta_given = false;
  if (j.contains("policy"))
  {
    const auto& p = j["policy"];
    check_keys(p, "policy", {"regime", "delta", "t_prime", "idle_loss", "j_max", "eta"});
    if (p.contains("regime")) s.policy_regime = get_enum<regime>(p["regime"], "policy.regime");
    if (p.contains("delta"))
    {
      s.delta_assumed = get_real(p["delta"], "policy.delta");
      delta_given = true;
    }
    if (p.contains("t_prime")) s.policy_t_prime = get_count(p["t_prime"], "policy.t_prime");
    if (p.contains("idle_loss")) s.idle_loss = get_real(p["idle_loss"], "policy.idle_loss");
    if (p.contains("j_max")) s.j_max = get_count(p["j_max"], "policy.j_max");
    if (p.contains("eta")) s.eta = get_real(p["eta"], "policy.eta");
  }
  if (!delta_given) s.delta_assumed = s.adversary.delta;
  check_unit_interval(s.delta_assumed, "policy.delta");
  if (!s.policy_t_prime) s.policy_t_prime = s.adversary.t_prime;

  if (j.contains("phases")) s.phases = get_count(j["phases"], "phases");
  if (j.contains("horizon")) s.horizon = get_count(j["horizon"], "horizon");
  if (j.contains("feedback")) s.feedback = get_enum<feedback_mode>(j["feedback"], "feedback");
  if (j.contains("semantics")) s.semantics = get_enum<receiver_semantics>(j["semantics"], "semantics");
  if (j.contains("model")) s.model = get_enum<success_model>(j["model"], "model");
  if (j.contains("async_start")) s.async_start = get_bool(j["async_start"], "async_start");
  if (j.contains("oracle"))
  {
    const auto o = get_string(j["oracle"], "oracle");
    if (o == "auto") s.oracle.reset();
    else s.oracle = parse_enum<oracle_kind>("oracle", o);
  }
  if (j.contains("exact_cap")) s.exact_cap = get_count(j["exact_cap"], "exact_cap");

  if (j.contains("presence"))
  {
    if (!j["presence"].is_array()) throw config_error{"presence: expected a list"};
    for (const auto& e : j["presence"])
    {
      check_keys(e, "presence[]", {"link", "join_phase", "leave_phase"});
      presence_entry pe;
      pe.link = get_count(e.at("link"), "presence[].link");
      if (e.contains("join_phase")) pe.interval.join_phase = get_count(e["join_phase"], "presence[].join_phase");
      if (e.contains("leave_phase") && !e["leave_phase"].is_null())
        pe.interval.leave_phase = get_count(e["leave_phase"], "presence[].leave_phase");
      s.presence.push_back(pe);
    }
  }

  if (j.contains("sweep"))
  {
    const auto& w = j["sweep"];
    check_keys(w, "sweep", {"networks", "seeds", "delta_assumed", "scopes"});
    if (w.contains("networks")) s.sweep.networks = get_count(w["networks"], "sweep.networks");
    if (w.contains("seeds")) s.sweep.seeds = get_count(w["seeds"], "sweep.seeds");
    if (w.contains("delta_assumed"))
    {
      if (!w["delta_assumed"].is_array()) throw config_error{"sweep.delta_assumed: expected a list"};
      s.sweep.delta_assumed.clear();
      for (const auto& d : w["delta_assumed"])
      {
        s.sweep.delta_assumed.push_back(get_real(d, "sweep.delta_assumed[]"));
        check_unit_interval(s.sweep.delta_assumed.back(), "sweep.delta_assumed[]");
      }
      if (s.sweep.delta_assumed.empty()) throw config_error{"sweep.delta_assumed must not be empty"};
    }
    if (w.contains("scopes"))
    {
      if (!w["scopes"].is_array()) throw config_error{"sweep.scopes: expected a list"};
      s.sweep.scopes.clear();
      for (const auto& sc : w["scopes"]) s.sweep.scopes.push_back(get_enum<jam_scope>(sc, "sweep.scopes[]"));
      if (s.sweep.scopes.empty()) throw config_error{"sweep.scopes must not be empty"};
    }
  }

  if (j.contains("properties"))
  {
    const auto& p = j["properties"];
    check_keys(p, "properties", {"gamma", "eta"});
    if (p.contains("gamma")) s.gamma = get_real(p["gamma"], "properties.gamma");
    if (p.contains("eta")) s.eta_blocking = get_real(p["eta"], "properties.eta");
  }

  if (j.contains("outputs"))
  {
    const auto& o = j["outputs"];
    check_keys(o, "outputs", {"per_run", "learner_trace_link", "aggregation", "window"});
    if (o.contains("per_run")) s.outputs.per_run = get_bool(o["per_run"], "outputs.per_run");
    if (o.contains("learner_trace_link") && !o["learner_trace_link"].is_null())
      s.outputs.learner_trace_link = get_count(o["learner_trace_link"], "outputs.learner_trace_link");
    if (o.contains("aggregation")) s.outputs.aggregation = get_enum<aggregation_kind>(o["aggregation"], "outputs.aggregation");
    if (o.contains("window")) s.outputs.window = get_count(o["window"], "outputs.window");
  }

  // Cross-field checks.
  if (s.sweep.networks < 1) throw config_error{"sweep.networks must be >= 1"};
  if (s.sweep.seeds < 1) throw config_error{"sweep.seeds must be >= 1"};
  if (s.outputs.window < 1) throw config_error{"outputs.window must be >= 1"};
  if (!(s.gamma > 0.0)) throw config_error{"properties.gamma must be > 0"};
  if (!(s.eta_blocking > 0.0)) throw config_error{"properties.eta must be > 0"};
  if (s.network.to_many_w && *s.network.to_many_w < 1) throw config_error{"network.to_many_w must be >= 1"};
  if (s.network.instance && s.sweep.networks != 1) throw config_error{"sweep.networks must be 1 with a fixed instance"};
  const bool multi = (s.network.to_many_w && *s.network.to_many_w > 1) || (s.network.instance && !s.network.instance->single_receiver());
  if (multi && s.semantics == receiver_semantics::single)
    throw config_error{"semantics: 'single' does not fit a network with multi-receiver links (use to-one, to-all or to-many)"};
  for (const auto& pe : s.presence)
    if (pe.link >= s.link_count()) throw config_error{"presence: link " + std::to_string(pe.link) + " does not exist"};
  if (s.outputs.learner_trace_link && *s.outputs.learner_trace_link >= s.link_count())
    throw config_error{"outputs.learner_trace_link out of range"};

  try
  {
    s.adversary.validate();
    s.network.sinr.validate();
    for (const double d : s.deltas())
    {
      auto p = make_policy(s.policy_regime, d, s.policy_t_prime, s.idle_loss);
      const auto steps = s.horizon.value_or(s.phases * p.k);
      if (steps < p.k) throw config_error{"horizon shorter than one phase for delta " + format_number(d)};
    }
    if (s.eta && !(*s.eta >= 0.0 && *s.eta < 1.0)) throw config_error{"policy.eta must be in [0, 1)"};
  }
  catch (const config_error&)
  {
    throw;
  }
  catch (const error& e)
  {
    throw config_error{e.what()};
  }
  return s;
}

inline experiment_spec
parse_config(const std::filesystem::path& path, std::optional<experiment_kind> kind_override = std::nullopt)
{
  return parse_spec(read_json_file(path), kind_override, path.parent_path());
}

/// Resolved spec as a config document; parse_spec of the result reproduces the spec.
inline json
spec_to_json(const experiment_spec& s)
{
  json net;
  if (s.network.instance)
    net = {{"instance", to_json(*s.network.instance)}};
  else
  {
    net = { {"n", s.network.n}, {"plane_size", s.network.plane_size}, {"max_sender_dist", s.network.max_sender_dist}
          , {"power", s.network.power}
          , {"sinr", {{"alpha", s.network.sinr.alpha}, {"beta", s.network.sinr.beta}, {"noise", s.network.sinr.noise}}} };
    if (s.network.to_many_w) net["to_many_w"] = *s.network.to_many_w;
  }

  json adv = {{"kind", to_string(s.adversary.kind)}, {"scope", to_string(s.adversary.scope)}, {"delta", s.adversary.delta}
             , {"strategy", to_string(s.adversary.strategy)}, {"correlation", to_string(s.adversary.correlation)}
             , {"margin", s.adversary.margin}};
  if (s.adversary.t_prime) adv["t_prime"] = *s.adversary.t_prime;

  json pol = {{"regime", to_string(s.policy_regime)}, {"delta", s.delta_assumed}, {"idle_loss", s.idle_loss}, {"j_max", s.j_max}};
  if (s.policy_t_prime) pol["t_prime"] = *s.policy_t_prime;
  if (s.eta) pol["eta"] = *s.eta;

  json presence = json::array();
  for (const auto& pe : s.presence)
  {
    json e = {{"link", pe.link}, {"join_phase", pe.interval.join_phase}};
    if (pe.interval.leave_phase) e["leave_phase"] = *pe.interval.leave_phase;
    presence.push_back(e);
  }

  json sweep = {{"networks", s.sweep.networks}, {"seeds", s.sweep.seeds}};
  if (!s.sweep.delta_assumed.empty()) sweep["delta_assumed"] = s.sweep.delta_assumed;
  if (!s.sweep.scopes.empty())
  {
    json sc = json::array();
    for (const auto x : s.sweep.scopes) sc.push_back(to_string(x));
    sweep["scopes"] = sc;
  }

  json out = {{"per_run", s.outputs.per_run}, {"aggregation", to_string(s.outputs.aggregation)}, {"window", s.outputs.window}};
  if (s.outputs.learner_trace_link) out["learner_trace_link"] = *s.outputs.learner_trace_link;

  json j = { {"schema_version", schema_version}, {"name", s.name}, {"experiment", to_string(s.kind)}, {"seed", s.seed}
           , {"network", net}, {"adversary", adv}, {"policy", pol}, {"phases", s.phases} };
  if (s.horizon) j["horizon"] = *s.horizon;
  j["feedback"] = to_string(s.feedback);
  j["semantics"] = to_string(s.semantics);
  j["model"] = to_string(s.model);
  j["async_start"] = s.async_start;
  j["oracle"] = s.oracle ? std::string{to_string(*s.oracle)} : std::string{"auto"};
  j["exact_cap"] = s.exact_cap;
  j["presence"] = presence;
  j["sweep"] = sweep;
  j["properties"] = {{"gamma", s.gamma}, {"eta", s.eta_blocking}};
  j["outputs"] = out;
  return j;
}

/*------------------------------------------------------------------------------------------------*/
// Run planning

struct run_plan
{
  std::size_t index = 0;
  std::uint64_t network_index = 0;
  std::uint64_t seed_index = 0;
  double delta_assumed = 1.0;
  jam_scope scope = jam_scope::global;
  std::uint64_t run_seed = 0;
  std::string label;
};

/// Sweep order: network, then delta, then scope, then seed. Runs that differ only in delta
/// or scope share their seed.
inline std::vector<run_plan>
plan_runs(const experiment_spec& s)
{
  std::vector<run_plan> plans;
  const auto deltas = s.deltas();
  const auto scopes = s.scopes();
  for (std::uint64_t net = 0; net < s.sweep.networks; ++net)
    for (const double d : deltas)
      for (const auto sc : scopes)
        for (std::uint64_t seed = 0; seed < s.sweep.seeds; ++seed)
        {
          run_plan p;
          p.index = plans.size();
          p.network_index = net;
          p.seed_index = seed;
          p.delta_assumed = d;
          p.scope = sc;
          p.run_seed = derive_seed(s.seed, "run:" + std::to_string(net) + ":" + std::to_string(seed));
          p.label = "net" + std::to_string(net) + "_seed" + std::to_string(seed);
          if (deltas.size() > 1) p.label += "_delta" + format_number(d);
          if (scopes.size() > 1) p.label += "_" + std::string{to_string(sc)};
          plans.push_back(std::move(p));
        }
  return plans;
}

inline network_instance
build_network(const experiment_spec& s, std::uint64_t network_index)
{
  const auto& src = s.network;
  if (src.instance) return *src.instance;
  if (src.to_many_w) return build_to_many_instance(*src.to_many_w, src.sinr, src.power);
  rng_stream rng{s.seed, "net:" + std::to_string(network_index)};
  return generate_random_network(src.n, src.plane_size, src.max_sender_dist, src.sinr, src.power, rng);
}

inline sim_config
build_sim_config(const experiment_spec& s, const run_plan& plan, const network_instance& net)
{
  sim_config c;
  c.network = net;
  c.adversary = s.adversary;
  c.adversary.scope = plan.scope;
  c.policy = make_policy(s.policy_regime, plan.delta_assumed, s.policy_t_prime, s.idle_loss);
  c.policy.j_max = s.j_max;
  c.policy.fixed_eta = s.eta;
  c.horizon = s.horizon.value_or(s.phases * c.policy.k);
  c.seed = plan.run_seed;
  c.feedback = s.feedback;
  c.semantics = s.semantics;
  c.model = s.model;
  c.async_start = s.async_start;
  c.oracle = s.kind == experiment_kind::fig2 ? oracle_kind::none : s.resolved_oracle();
  c.exact_cap = s.exact_cap;
  if (!s.presence.empty())
  {
    c.presence.assign(net.size(), std::nullopt);
    for (const auto& pe : s.presence) c.presence.at(pe.link) = pe.interval;
  }
  c.learner_trace_link = s.outputs.learner_trace_link;
  c.validate();
  return c;
}

/*------------------------------------------------------------------------------------------------*/
// Execution

struct run_record
{
  run_plan plan;
  bool ok = false;
  std::string error;
  std::string error_category;

  std::uint64_t k = 0;
  std::uint64_t horizon = 0;
  std::uint64_t unjammed_steps = 0;       // global: unjammed steps; individual: all steps
  double throughput = 0.0;                // successes per step
  double unjammed_throughput = 0.0;       // successes per unjammed step
  double mean_final_send_probability = 0.0;
  std::optional<double> opt_single_slot;
  std::optional<double> opt_average;
  std::optional<double> opt_expected;
  bool successfulness_ok = false;
  bool blocking_ok = false;
  bool blocking_checked = false;
  bool epsilon_hypothesis = false;
  double max_identity_residual = 0.0;
  std::optional<double> min_q_bound_slack;

  // Rendered per-run files (empty unless per-run outputs are on).
  std::string timeseries_csv;
  std::string links_csv;
  std::string learner_trace_csv;
  std::string schedule_json;
};

/// Sums over the runs of one (delta, scope) group. Per-step summands are integers, so those
/// sums are exact whatever order runs finish in; the real-valued scalars are summed in plan order.
struct group_aggregate
{
  double delta_assumed = 1.0;
  jam_scope scope = jam_scope::global;
  std::uint64_t runs = 0;
  std::uint64_t failed = 0;
  std::vector<double> success_sum;            // all runs
  std::vector<double> unjammed_success_sum;   // runs unjammed at t
  std::vector<std::uint64_t> unjammed_runs;
  std::vector<double> opt_sum;
  double expected_opt_sum = 0.0;
  double send_probability_sum = 0.0;
  double unjammed_throughput_sum = 0.0;

  void
  grow(std::uint64_t horizon)
  {
    if (success_sum.size() >= horizon) return;
    success_sum.resize(horizon, 0.0);
    unjammed_success_sum.resize(horizon, 0.0);
    unjammed_runs.resize(horizon, 0);
    opt_sum.resize(horizon, 0.0);
  }
};

struct experiment_result
{
  experiment_spec spec;
  std::vector<network_instance> networks;
  std::vector<run_record> runs;
  std::vector<group_aggregate> groups;
};

namespace detail {

inline std::size_t
group_index(const experiment_spec& s, const run_plan& p)
{
  const auto deltas = s.deltas();
  const auto scopes = s.scopes();
  const auto d = static_cast<std::size_t>(std::find(deltas.begin(), deltas.end(), p.delta_assumed) - deltas.begin());
  const auto c = static_cast<std::size_t>(std::find(scopes.begin(), scopes.end(), p.scope) - scopes.begin());
  return d * scopes.size() + c;
}

inline run_record
execute(const experiment_spec& s, const run_plan& plan, const network_instance& net, group_aggregate& agg, std::mutex& agg_mutex)
{
  run_record rec;
  rec.plan = plan;
  try
  {
    const auto config = build_sim_config(s, plan, net);
    const auto result = run_simulation(config);
    const auto props = measure_properties(result, s.gamma, s.eta_blocking);
    const bool global = result.schedule.params.scope == jam_scope::global;

    rec.k = config.policy.k;
    rec.horizon = config.horizon;
    double total = 0.0;
    double unjammed_total = 0.0;
    for (std::uint64_t t = 0; t < result.horizon; ++t)
    {
      total += result.successful[t];
      if (!(global && result.jammed[t]))
      {
        unjammed_total += result.successful[t];
        ++rec.unjammed_steps;
      }
    }
    rec.throughput = total / static_cast<double>(result.horizon);
    rec.unjammed_throughput = rec.unjammed_steps ? unjammed_total / static_cast<double>(rec.unjammed_steps) : 0.0;
    double p = 0.0;
    for (const auto& l : result.links) p += l.final_send_probability;
    rec.mean_final_send_probability = p / static_cast<double>(result.links.size());
    if (result.optimum)
    {
      rec.opt_single_slot = result.optimum->single_slot;
      rec.opt_average = result.optimum->average;
      rec.opt_expected = global ? result.optimum->expected : result.optimum->average;
    }
    rec.successfulness_ok = props.successfulness_ok;
    rec.blocking_ok = props.blocking_ok;
    rec.blocking_checked = props.blocking_checked;
    rec.epsilon_hypothesis = props.epsilon_hypothesis;
    rec.max_identity_residual = props.max_identity_residual;
    if (std::isfinite(props.min_q_bound_slack)) rec.min_q_bound_slack = props.min_q_bound_slack;

    if (s.outputs.per_run)
    {
      std::ostringstream ts;
      write_timeseries_csv(ts, result);
      rec.timeseries_csv = ts.str();
      std::ostringstream ls;
      write_link_summary_csv(ls, result, props);
      rec.links_csv = ls.str();
      if (config.learner_trace_link)
      {
        std::ostringstream lt;
        write_learner_trace_csv(lt, result.learner_trace);
        rec.learner_trace_csv = lt.str();
      }
      if (s.kind == experiment_kind::run) rec.schedule_json = to_json(result.schedule).dump(1) + "\n";
    }
    rec.ok = true;

    const std::lock_guard lock{agg_mutex};
    agg.grow(result.horizon);
    ++agg.runs;
    for (std::uint64_t t = 0; t < result.horizon; ++t)
    {
      agg.success_sum[t] += result.successful[t];
      if (!(global && result.jammed[t]))
      {
        agg.unjammed_success_sum[t] += result.successful[t];
        ++agg.unjammed_runs[t];
      }
      if (result.optimum) agg.opt_sum[t] += result.optimum->series[t];
    }
  }
  catch (const error& e)
  {
    rec.ok = false;
    rec.error = e.what();
    rec.error_category = e.category();
    const std::lock_guard lock{agg_mutex};
    ++agg.failed;
  }
  return rec;
}

} // namespace detail

/// Runs every planned simulation on `parallelism` threads. Results are stored by plan index,
/// so outputs do not depend on the thread count. A failing run is recorded and the rest
/// continue.
inline experiment_result
run_experiment(const experiment_spec& spec, std::size_t parallelism = 1)
{
  experiment_result res;
  res.spec = spec;
  for (std::uint64_t i = 0; i < spec.sweep.networks; ++i) res.networks.push_back(build_network(spec, i));

  const auto plans = plan_runs(spec);
  res.runs.resize(plans.size());
  for (const double d : spec.deltas())
    for (const auto sc : spec.scopes())
    {
      group_aggregate g;
      g.delta_assumed = d;
      g.scope = sc;
      res.groups.push_back(std::move(g));
    }

  std::mutex agg_mutex;
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < plans.size(); i = next++)
    {
      const auto& p = plans[i];
      res.runs[i] = detail::execute(spec, p, res.networks[p.network_index], res.groups[detail::group_index(spec, p)], agg_mutex);
    }
  };

  const auto threads = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(plans.size(), 1));
  if (threads == 1)
    worker();
  else
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  // Real-valued per-run scalars are summed here, in plan order.
  for (const auto& rec : res.runs)
  {
    if (!rec.ok) continue;
    auto& g = res.groups[detail::group_index(spec, rec.plan)];
    if (rec.opt_expected) g.expected_opt_sum += *rec.opt_expected;
    g.send_probability_sum += rec.mean_final_send_probability;
    g.unjammed_throughput_sum += rec.unjammed_throughput;
  }
  return res;
}

inline std::size_t
failed_runs(const experiment_result& r)
{
  return static_cast<std::size_t>(std::count_if(r.runs.begin(), r.runs.end(), [](const auto& x) { return !x.ok; }));
}

/*------------------------------------------------------------------------------------------------*/
// Output

namespace detail {

inline std::string
mean_or_blank(double sum, std::uint64_t count)
{
  return count ? format_number(sum / static_cast<double>(count)) : std::string{};
}

inline std::string
aggregate_csv(const experiment_result& r)
{
  std::ostringstream os;
  const auto window = r.spec.outputs.window;
  if (r.spec.outputs.aggregation == aggregation_kind::unjammed_mean)
  {
    os << "delta_assumed,scope,t,mean_successes,unjammed_runs,mean_opt\n";
    for (const auto& g : r.groups)
      for (std::size_t t = 0; t < g.success_sum.size(); ++t)
        os << format_number(g.delta_assumed) << ',' << to_string(g.scope) << ',' << t << ','
           << mean_or_blank(g.unjammed_success_sum[t], g.unjammed_runs[t]) << ',' << g.unjammed_runs[t] << ','
           << mean_or_blank(g.opt_sum[t], g.runs) << '\n';
  }
  else
  {
    // Mean over a window of the per-step unjammed means; steps without unjammed runs are skipped.
    os << "delta_assumed,scope,window_start,mean_successes,steps\n";
    for (const auto& g : r.groups)
      for (std::size_t start = 0; start < g.success_sum.size(); start += window)
      {
        double sum = 0.0;
        std::uint64_t steps = 0;
        for (std::size_t t = start; t < std::min<std::size_t>(start + window, g.success_sum.size()); ++t)
          if (g.unjammed_runs[t])
          {
            sum += g.unjammed_success_sum[t] / static_cast<double>(g.unjammed_runs[t]);
            ++steps;
          }
        os << format_number(g.delta_assumed) << ',' << to_string(g.scope) << ',' << start << ','
           << mean_or_blank(sum, steps) << ',' << steps << '\n';
      }
  }
  return os.str();
}

/// fig1 plot data: successes and optimum per step, averaged
/// over the group's runs, and the expected (global) or average (individual) optimum.
inline std::string
fig1_csv(const group_aggregate& g)
{
  std::ostringstream os;
  os << "t,successes,opt_t,expected_opt\n";
  const auto expected = mean_or_blank(g.expected_opt_sum, g.runs);
  for (std::size_t t = 0; t < g.success_sum.size(); ++t)
    os << t << ',' << mean_or_blank(g.success_sum[t], g.runs) << ',' << mean_or_blank(g.opt_sum[t], g.runs) << ','
       << expected << '\n';
  return os.str();
}

inline json
optional_number(const std::optional<double>& x)
{
  return x ? json(*x) : json(nullptr);
}

} // namespace detail

inline json
summary_json(const experiment_result& r)
{
  json runs = json::array();
  for (const auto& x : r.runs)
  {
    json j = { {"label", x.plan.label}, {"network", x.plan.network_index}, {"seed_index", x.plan.seed_index}
             , {"run_seed", x.plan.run_seed}, {"delta_assumed", x.plan.delta_assumed}, {"scope", to_string(x.plan.scope)}
             , {"ok", x.ok} };
    if (!x.ok)
    {
      j["error"] = x.error;
      j["error_category"] = x.error_category;
    }
    else
    {
      j["k"] = x.k;
      j["horizon"] = x.horizon;
      j["throughput_per_step"] = x.throughput;
      j["throughput_per_unjammed_step"] = x.unjammed_throughput;
      j["mean_final_send_probability"] = x.mean_final_send_probability;
      j["opt_single_slot"] = detail::optional_number(x.opt_single_slot);
      j["opt_average"] = detail::optional_number(x.opt_average);
      j["opt_expected"] = detail::optional_number(x.opt_expected);
      j["properties"] = { {"successfulness_ok", x.successfulness_ok}, {"blocking_ok", x.blocking_ok}
                        , {"blocking_checked", x.blocking_checked}, {"epsilon_hypothesis", x.epsilon_hypothesis}
                        , {"max_identity_residual", x.max_identity_residual}
                        , {"min_q_bound_slack", detail::optional_number(x.min_q_bound_slack)} };
    }
    runs.push_back(j);
  }

  json groups = json::array();
  for (const auto& g : r.groups)
    groups.push_back({ {"delta_assumed", g.delta_assumed}, {"scope", to_string(g.scope)}, {"runs", g.runs}
                     , {"failed", g.failed}
                     , {"mean_final_send_probability", g.runs ? json(g.send_probability_sum / static_cast<double>(g.runs)) : json(nullptr)}
                     , {"mean_throughput_per_unjammed_step", g.runs ? json(g.unjammed_throughput_sum / static_cast<double>(g.runs)) : json(nullptr)} });

  return { {"schema_version", schema_version}, {"name", r.spec.name}, {"experiment", to_string(r.spec.kind)}
         , {"seed", r.spec.seed}, {"oracle", to_string(r.spec.kind == experiment_kind::fig2 ? oracle_kind::none : r.spec.resolved_oracle())}
         , {"runs_total", r.runs.size()}, {"runs_failed", failed_runs(r)}, {"groups", groups}, {"runs", runs} };
}

/// Writes config.json (resolved spec), summary.json, aggregate.csv, the network documents,
/// fig1 plot data and per-run files. Refuses an existing directory unless `force`.
inline void
write_outputs(const experiment_result& r, const std::filesystem::path& out_dir, bool force = false)
{
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::exists(out_dir, ec) && !force)
    throw usage_error{"output directory " + out_dir.string() + " already exists (use --force to overwrite)"};
  fs::create_directories(out_dir, ec);
  if (ec) throw io_error{"cannot create " + out_dir.string() + ": " + ec.message()};

  write_text_file(out_dir / "config.json", spec_to_json(r.spec).dump(2) + "\n");
  write_text_file(out_dir / "summary.json", summary_json(r).dump(2) + "\n");
  write_text_file(out_dir / "aggregate.csv", detail::aggregate_csv(r));

  fs::create_directories(out_dir / "networks", ec);
  if (ec) throw io_error{"cannot create " + (out_dir / "networks").string() + ": " + ec.message()};
  for (std::size_t i = 0; i < r.networks.size(); ++i)
  {
    const auto stem = "net" + std::to_string(i);
    write_text_file(out_dir / "networks" / (stem + ".json"), to_json(r.networks[i]).dump(1) + "\n");
    if (r.spec.outputs.per_run)
    {
      std::ostringstream cg;
      write_conflict_graph_csv(cg, build_conflict_graph(r.networks[i]));
      write_text_file(out_dir / "networks" / (stem + "_conflict_graph.csv"), cg.str());
    }
  }

  if (r.spec.kind == experiment_kind::fig1)
    for (const auto& g : r.groups)
    {
      auto name = "fig1_" + std::string{to_string(g.scope)};
      if (r.groups.size() > r.spec.scopes().size()) name += "_delta" + format_number(g.delta_assumed);
      write_text_file(out_dir / (name + ".csv"), detail::fig1_csv(g));
    }

  if (!r.spec.outputs.per_run) return;
  for (const auto& x : r.runs)
  {
    const auto dir = out_dir / "runs" / x.plan.label;
    fs::create_directories(dir, ec);
    if (ec) throw io_error{"cannot create " + dir.string() + ": " + ec.message()};
    if (!x.ok)
    {
      write_text_file(dir / "error.txt", x.error_category + ": " + x.error + "\n");
      continue;
    }
    write_text_file(dir / "timeseries.csv", x.timeseries_csv);
    write_text_file(dir / "links.csv", x.links_csv);
    if (!x.learner_trace_csv.empty()) write_text_file(dir / "learner_trace.csv", x.learner_trace_csv);
    if (!x.schedule_json.empty()) write_text_file(dir / "schedule.json", x.schedule_json);
  }
}

} // namespace jamcap
