#pragma once

#include <jamcap/error.hpp>
#include <jamcap/rng.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace jamcap {

/*------------------------------------------------------------------------------------------------*/

struct point2d
{
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const point2d&, const point2d&) = default;
};

inline double
distance(const point2d& a, const point2d& b)
noexcept
{
  return std::hypot(a.x - b.x, a.y - b.y);
}

struct sinr_params
{
  double alpha = 2.1;  // path-loss exponent
  double beta  = 1.1;  // SINR threshold
  double noise = 4e-7;

  friend bool operator==(const sinr_params&, const sinr_params&) = default;

  void
  validate() const
  {
    if (!(alpha > 0.0)) throw parameter_error{"sinr.alpha must be > 0"};
    if (!(beta > 0.0)) throw parameter_error{"sinr.beta must be > 0"};
    if (!(noise >= 0.0)) throw parameter_error{"sinr.noise must be >= 0"};
  }
};

/// A sender with one or more receivers. `id` names the link's random stream and survives
/// removal of other links from the instance.
struct link_spec
{
  std::uint64_t id = 0;
  point2d sender;
  std::vector<point2d> receivers;
  double power = 2.0;

  friend bool operator==(const link_spec&, const link_spec&) = default;
};

/// Geometric network. Only receivers are constrained to the plane; senders may lie outside.
struct network_instance
{
  std::vector<link_spec> links;
  sinr_params sinr;
  double plane_size = 1000.0;

  friend bool operator==(const network_instance&, const network_instance&) = default;

  std::size_t size() const noexcept { return links.size(); }

  bool
  single_receiver() const noexcept
  {
    for (const auto& l : links)
      if (l.receivers.size() != 1) return false;
    return true;
  }

  std::size_t
  max_receivers() const noexcept
  {
    std::size_t m = 0;
    for (const auto& l : links) m = std::max(m, l.receivers.size());
    return m;
  }

  void
  validate() const
  {
    sinr.validate();
    if (!(plane_size > 0.0)) throw parameter_error{"plane_size must be > 0"};
    for (std::size_t v = 0; v < links.size(); ++v)
    {
      const auto& l = links[v];
      const auto where = "link " + std::to_string(v);
      if (l.receivers.empty()) throw parameter_error{where + ": no receivers"};
      if (!(l.power > 0.0)) throw parameter_error{where + ": power must be > 0"};
      if (!std::isfinite(l.sender.x) || !std::isfinite(l.sender.y))
        throw parameter_error{where + ": non-finite sender"};
      for (const auto& r : l.receivers)
      {
        if (!(r.x >= 0.0 && r.x <= plane_size && r.y >= 0.0 && r.y <= plane_size))
          throw parameter_error{where + ": receiver outside the plane"};
        // Receivers of other links may coincide with a sender (d_uv = 0 gives infinite
        // interference), but a link's own receiver may not.
        if (!(distance(l.sender, r) > 0.0))
          throw parameter_error{where + ": sender coincides with its receiver"};
      }
    }
  }
};

/// Phases [join_phase, leave_phase) in which a link is present. Open-ended when
/// `leave_phase` is empty.
struct presence_interval
{
  std::uint64_t join_phase = 0;
  std::optional<std::uint64_t> leave_phase;

  friend bool operator==(const presence_interval&, const presence_interval&) = default;

  void
  validate() const
  {
    if (leave_phase && *leave_phase < join_phase)
      throw parameter_error{"presence interval: leave_phase < join_phase"};
  }
};

/*------------------------------------------------------------------------------------------------*/

/// Random single-receiver network: receivers uniform on [0, plane_size]^2, each sender at a
/// uniform angle and a uniform distance in (0, max_sender_dist] from its receiver.
inline network_instance
generate_random_network( std::size_t n, double plane_size, double max_sender_dist
                       , const sinr_params& sinr, double power, rng_stream& rng)
{
  if (n == 0) throw parameter_error{"n must be >= 1"};
  if (!(plane_size > 0.0)) throw parameter_error{"plane_size must be > 0"};
  if (!(max_sender_dist > 0.0)) throw parameter_error{"max_sender_dist must be > 0"};
  if (!(power > 0.0)) throw parameter_error{"power must be > 0"};
  sinr.validate();

  network_instance net;
  net.sinr = sinr;
  net.plane_size = plane_size;
  net.links.reserve(n);
  for (std::size_t v = 0; v < n; ++v)
  {
    const point2d receiver{rng.uniform01() * plane_size, rng.uniform01() * plane_size};
    const double angle = rng.uniform01() * 2.0 * std::numbers::pi;
    const double dist = rng.uniform_open_closed() * max_sender_dist;
    const point2d sender{receiver.x + dist * std::cos(angle), receiver.y + dist * std::sin(angle)};
    net.links.push_back(link_spec{v, sender, {receiver}, power});
  }
  return net;
}

/*------------------------------------------------------------------------------------------------*/

namespace detail {

// Received power of `from`'s sender at point `at`.
inline double
received_power(const link_spec& from, const point2d& at, double alpha)
{
  return from.power / std::pow(distance(from.sender, at), alpha);
}

} // namespace detail

/// Two-sender instance on which to-many learning is stuck at objective 1 while the optimum
/// reaches `w` receivers. Link 0 is s1 with `w` clustered receivers, link 1 is s2 with one
/// receiver. Layout on a line: r_{2,1} -1- s2 -1- cluster -2- s1, cluster radius 0.01.
///
/// Checked by direct SINR evaluation over every transmit set:
///   (a) no r_{1,j} decodes s1 while s2 transmits,
///   (b) r_{2,1} always decodes s2,
///   (c) s1 alone reaches all of its receivers.
inline network_instance
build_to_many_instance(std::size_t w, const sinr_params& sinr, double power = 2.0)
{
  if (w == 0) throw parameter_error{"w must be >= 1"};
  sinr.validate();

  constexpr double plane = 10.0;
  constexpr double cluster_radius = 0.01;
  const point2d center{5.0, 5.0};

  link_spec s1;
  s1.id = 0;
  s1.power = power;
  s1.sender = {center.x + 2.0, center.y};
  for (std::size_t j = 0; j < w; ++j)
  {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(w);
    const double r = w == 1 ? 0.0 : cluster_radius;
    s1.receivers.push_back({center.x + r * std::cos(a), center.y + r * std::sin(a)});
  }

  link_spec s2;
  s2.id = 1;
  s2.power = power;
  s2.sender = {center.x - 1.0, center.y};
  s2.receivers = {{center.x - 2.0, center.y}};

  network_instance net{{s1, s2}, sinr, plane};
  net.validate();

  const auto decodes = [&](const link_spec& own, const point2d& rx, const link_spec* other) {
    const double signal = detail::received_power(own, rx, sinr.alpha);
    const double interference = other ? detail::received_power(*other, rx, sinr.alpha) : 0.0;
    return signal >= sinr.beta * (interference + sinr.noise);
  };

  for (const auto& rx : s1.receivers)
  {
    if (decodes(s1, rx, &s2))
      throw construction_error{"to-many instance: r_{1,j} decodes s1 while s2 transmits"};
    if (!decodes(s1, rx, nullptr))
      throw construction_error{"to-many instance: s1 alone does not reach r_{1,j}"};
  }
  if (!decodes(s2, s2.receivers[0], nullptr) || !decodes(s2, s2.receivers[0], &s1))
    throw construction_error{"to-many instance: r_{2,1} does not always decode s2"};

  return net;
}

} // namespace jamcap
