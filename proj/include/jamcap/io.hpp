#pragma once

#include <jamcap/adversary.hpp>
#include <jamcap/engine.hpp>
#include <jamcap/error.hpp>
#include <jamcap/interference.hpp>
#include <jamcap/network.hpp>

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace jamcap {

using json = nlohmann::ordered_json;

/// Shortest decimal form that reads back to the same double.
inline std::string
format_number(double x)
{
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

/*------------------------------------------------------------------------------------------------*/
// Enum names

template <typename Enum>
struct enum_names;

template <typename Enum>
Enum
parse_enum(std::string_view key, std::string_view text)
{
  for (const auto& [value, name] : enum_names<Enum>::table)
    if (name == text) return value;
  std::string allowed;
  for (const auto& [value, name] : enum_names<Enum>::table) allowed += (allowed.empty() ? "" : ", ") + std::string{name};
  throw config_error{std::string{key} + ": unknown value '" + std::string{text} + "' (expected " + allowed + ")"};
}

template <>
struct enum_names<adversary_kind>
{
  static constexpr std::pair<adversary_kind, std::string_view> table[] = {
    {adversary_kind::bounded, "bounded"}, {adversary_kind::exact, "exact"}, {adversary_kind::stochastic, "stochastic"}};
};

template <>
struct enum_names<jam_scope>
{
  static constexpr std::pair<jam_scope, std::string_view> table[] = {
    {jam_scope::global, "global"}, {jam_scope::individual, "individual"}};
};

template <>
struct enum_names<bounded_strategy>
{
  static constexpr std::pair<bounded_strategy, std::string_view> table[] = {
    {bounded_strategy::random_in_period, "random-in-period"},
    {bounded_strategy::prefix_burst, "prefix-burst"},
    {bounded_strategy::random_capped, "random-capped"}};
};

template <>
struct enum_names<jam_correlation>
{
  static constexpr std::pair<jam_correlation, std::string_view> table[] = {
    {jam_correlation::independent, "independent"}, {jam_correlation::shared_coin, "shared-coin"}};
};

template <>
struct enum_names<regime>
{
  static constexpr std::pair<regime, std::string_view> table[] = {
    {regime::known_tprime_delta, "known-tprime-delta"},
    {regime::known_delta_only, "known-delta-only"},
    {regime::synchronized_unknown_delta, "synchronized-unknown-delta"},
    {regime::stochastic_tuned, "stochastic-tuned"},
    {regime::simulation_variant, "simulation-variant"}};
};

template <>
struct enum_names<feedback_mode>
{
  static constexpr std::pair<feedback_mode, std::string_view> table[] = {
    {feedback_mode::oracle_counterfactual, "oracle-counterfactual"}, {feedback_mode::realized_only, "realized-only"}};
};

template <>
struct enum_names<receiver_semantics>
{
  static constexpr std::pair<receiver_semantics, std::string_view> table[] = {
    {receiver_semantics::single, "single"}, {receiver_semantics::to_one, "to-one"},
    {receiver_semantics::to_all, "to-all"}, {receiver_semantics::to_many, "to-many"}};
};

template <>
struct enum_names<success_model>
{
  static constexpr std::pair<success_model, std::string_view> table[] = {
    {success_model::conflict_graph, "conflict-graph"}, {success_model::sinr, "sinr"}};
};

template <>
struct enum_names<oracle_kind>
{
  static constexpr std::pair<oracle_kind, std::string_view> table[] = {
    {oracle_kind::none, "none"}, {oracle_kind::exact, "exact"}, {oracle_kind::greedy, "greedy"}};
};

/*------------------------------------------------------------------------------------------------*/
// Network instance:
//   {"plane_size": P, "sinr": {"alpha", "beta", "noise"},
//    "links": [{"id", "sender": [x, y], "receivers": [[x, y], ...], "power"}]}
// Senders are not constrained to the plane.

inline json
to_json(const point2d& p)
{
  return json::array({p.x, p.y});
}

inline point2d
point_from_json(const json& j)
{
  if (!j.is_array() || j.size() != 2) throw config_error{"point must be [x, y]"};
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json
to_json(const network_instance& net)
{
  json links = json::array();
  for (const auto& l : net.links)
  {
    json rx = json::array();
    for (const auto& r : l.receivers) rx.push_back(to_json(r));
    links.push_back({{"id", l.id}, {"sender", to_json(l.sender)}, {"receivers", rx}, {"power", l.power}});
  }
  return { {"plane_size", net.plane_size}
         , {"sinr", {{"alpha", net.sinr.alpha}, {"beta", net.sinr.beta}, {"noise", net.sinr.noise}}}
         , {"links", links} };
}

inline network_instance
network_from_json(const json& j)
{
  try
  {
    network_instance net;
    net.plane_size = j.at("plane_size").get<double>();
    const auto& s = j.at("sinr");
    net.sinr = {s.at("alpha").get<double>(), s.at("beta").get<double>(), s.at("noise").get<double>()};
    std::uint64_t next_id = 0;
    for (const auto& l : j.at("links"))
    {
      link_spec spec;
      spec.id = l.contains("id") ? l["id"].get<std::uint64_t>() : next_id;
      next_id = spec.id + 1;
      spec.sender = point_from_json(l.at("sender"));
      for (const auto& r : l.at("receivers")) spec.receivers.push_back(point_from_json(r));
      spec.power = l.at("power").get<double>();
      net.links.push_back(std::move(spec));
    }
    net.validate();
    return net;
  }
  catch (const nlohmann::json::exception& e)
  {
    throw config_error{std::string{"network document: "} + e.what()};
  }
}

/*------------------------------------------------------------------------------------------------*/
// Jam schedule, run-length encoded. Each row is a list of run lengths alternating
// unjammed / jammed, starting with an unjammed run (possibly 0):
//   {"horizon": H, "params": {...}, "rows": [[3, 2, 7], ...]}

inline json
to_json(const adversary_params& p)
{
  json j = { {"kind", to_string(p.kind)}, {"scope", to_string(p.scope)}, {"delta", p.delta} };
  if (p.t_prime) j["t_prime"] = *p.t_prime;
  if (p.kind == adversary_kind::bounded)
  {
    j["strategy"] = to_string(p.strategy);
    j["margin"] = p.margin;
  }
  if (p.kind == adversary_kind::stochastic && p.scope == jam_scope::individual) j["correlation"] = to_string(p.correlation);
  return j;
}

inline adversary_params
adversary_from_json(const json& j)
{
  adversary_params p;
  try
  {
    if (j.contains("kind")) p.kind = parse_enum<adversary_kind>("adversary.kind", j["kind"].get<std::string>());
    if (j.contains("scope")) p.scope = parse_enum<jam_scope>("adversary.scope", j["scope"].get<std::string>());
    if (j.contains("delta")) p.delta = j["delta"].get<double>();
    if (j.contains("t_prime") && !j["t_prime"].is_null()) p.t_prime = j["t_prime"].get<std::uint64_t>();
    if (j.contains("strategy")) p.strategy = parse_enum<bounded_strategy>("adversary.strategy", j["strategy"].get<std::string>());
    if (j.contains("correlation")) p.correlation = parse_enum<jam_correlation>("adversary.correlation", j["correlation"].get<std::string>());
    if (j.contains("margin")) p.margin = j["margin"].get<double>();
  }
  catch (const nlohmann::json::exception& e)
  {
    throw config_error{std::string{"adversary: "} + e.what()};
  }
  return p;
}

inline json
rle_encode(const std::vector<std::uint8_t>& row)
{
  json runs = json::array();
  std::uint8_t current = 0;
  std::uint64_t length = 0;
  for (const auto b : row)
  {
    const std::uint8_t bit = b != 0;
    if (bit == current) ++length;
    else
    {
      runs.push_back(length);
      current = bit;
      length = 1;
    }
  }
  runs.push_back(length);
  return runs;
}

inline std::vector<std::uint8_t>
rle_decode(const json& runs, std::uint64_t horizon)
{
  std::vector<std::uint8_t> row;
  row.reserve(horizon);
  std::uint8_t bit = 0;
  for (const auto& r : runs)
  {
    const auto len = r.get<std::uint64_t>();
    if (row.size() + len > horizon) throw config_error{"schedule row is longer than the horizon"};
    row.insert(row.end(), len, bit);
    bit ^= 1;
  }
  if (row.size() != horizon) throw config_error{"schedule row is shorter than the horizon"};
  return row;
}

inline json
to_json(const jam_schedule& s)
{
  json rows = json::array();
  for (const auto& r : s.rows) rows.push_back(rle_encode(r));
  return {{"horizon", s.horizon}, {"params", to_json(s.params)}, {"rows", rows}};
}

inline jam_schedule
schedule_from_json(const json& j)
{
  try
  {
    jam_schedule s;
    s.horizon = j.at("horizon").get<std::uint64_t>();
    s.params = adversary_from_json(j.at("params"));
    for (const auto& r : j.at("rows")) s.rows.push_back(rle_decode(r, s.horizon));
    if (s.rows.empty()) throw config_error{"schedule has no rows"};
    if (s.params.scope == jam_scope::global && s.rows.size() != 1) throw config_error{"global schedule must have one row"};
    return s;
  }
  catch (const nlohmann::json::exception& e)
  {
    throw config_error{std::string{"schedule document: "} + e.what()};
  }
}

/*------------------------------------------------------------------------------------------------*/

inline json
read_json_file(const std::filesystem::path& path)
{
  std::ifstream in{path};
  if (!in) throw io_error{"cannot open " + path.string()};
  try
  {
    return json::parse(in);
  }
  catch (const nlohmann::json::parse_error& e)
  {
    throw config_error{path.string() + ": " + e.what()};
  }
}

inline void
write_text_file(const std::filesystem::path& path, const std::string& text)
{
  std::ofstream out{path, std::ios::binary};
  if (!out) throw io_error{"cannot write " + path.string()};
  out << text;
  if (!out) throw io_error{"write failed: " + path.string()};
}

/*------------------------------------------------------------------------------------------------*/
// CSV writers: comma separated, header row, LF line endings.

/// Long form: one row per ordered pair (u, v), u != v.
inline void
write_conflict_graph_csv(std::ostream& os, const conflict_graph& g)
{
  os << "u,v,b\n";
  for (std::size_t u = 0; u < g.size(); ++u)
    for (std::size_t v = 0; v < g.size(); ++v)
      if (u != v) os << u << ',' << v << ',' << format_number(g.weight(u, v)) << '\n';
}

inline void
write_timeseries_csv(std::ostream& os, const run_result& r)
{
  os << "t,jammed,num_transmitting,num_successful,opt_t\n";
  for (std::uint64_t t = 0; t < r.horizon; ++t)
  {
    os << t << ',' << r.jammed[t] << ',' << r.transmitting[t] << ',' << format_number(r.successful[t]) << ',';
    if (r.optimum) os << format_number(r.optimum->series[t]);
    os << '\n';
  }
}

inline void
write_link_summary_csv(std::ostream& os, const run_result& r, const property_report& p)
{
  os << "link,q,w,f,regret_per_phase,send_prob_final\n";
  for (std::size_t v = 0; v < r.links.size(); ++v)
  {
    const auto& l = p.links[v];
    os << r.links[v].id << ',' << format_number(l.q) << ',' << format_number(l.w) << ','
       << (l.f ? format_number(*l.f) : std::string{}) << ',' << format_number(l.regret_per_phase) << ','
       << format_number(r.links[v].final_send_probability) << '\n';
  }
}

inline void
write_learner_trace_csv(std::ostream& os, const std::vector<learner_trace_row>& rows)
{
  os << "round,eta,weight_idle,weight_send,p_send,action,loss_idle,loss_send\n";
  for (const auto& r : rows)
    os << r.round << ',' << format_number(r.eta) << ',' << format_number(r.weight_idle) << ','
       << format_number(r.weight_send) << ',' << format_number(r.p_send) << ','
       << (r.chosen == action::send ? "send" : "idle") << ','
       << (std::isnan(r.loss_idle) ? std::string{} : format_number(r.loss_idle)) << ','
       << (std::isnan(r.loss_send) ? std::string{} : format_number(r.loss_send)) << '\n';
}

} // namespace jamcap
