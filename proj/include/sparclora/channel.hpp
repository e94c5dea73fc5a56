#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sparclora/error.hpp"
#include "sparclora/frame.hpp"
#include "sparclora/random.hpp"
#include "sparclora/time.hpp"

namespace sparclora {

// ---------------------------------------------------------------------------
// Airtime
// ---------------------------------------------------------------------------

struct RadioParams {
  int spreading_factor = 12;
  int coding_rate_denominator = 8;  // 4/5 .. 4/8
  std::int64_t bandwidth_hz = 125'000;
  int preamble_symbols = 8;
  bool explicit_header = true;
  bool crc = true;
  /// Link-layer bytes the radio driver prepends to every frame (RadioHead: to, from, id, flags).
  int header_overhead_bytes = 4;

  bool low_data_rate_optimize() const { return spreading_factor >= 11 && bandwidth_hz <= 125'000; }

  void validate() const {
    if (spreading_factor < 6 || spreading_factor > 12)
      throw Error(Errc::invalid_scenario, "spreading factor must be in [6,12]");
    if (coding_rate_denominator < 5 || coding_rate_denominator > 8)
      throw Error(Errc::invalid_scenario, "coding rate must be 4/5..4/8");
    if (bandwidth_hz <= 0) throw Error(Errc::invalid_scenario, "bandwidth must be positive");
    if (preamble_symbols < 0 || header_overhead_bytes < 0)
      throw Error(Errc::invalid_scenario, "preamble and header overhead must be non-negative");
  }
};

/// Time on air of a frame of `frame_len` bytes (the upper-layer frame, excluding
/// the driver header which is added from `params`).
///
///   T_sym      = 2^SF / BW
///   T_preamble = (n_preamble + 4.25) * T_sym
///   n_payload  = 8 + max(ceil((8PL - 4SF + 28 + 16CRC - 20IH) / (4(SF - 2DE))) * (CR + 4), 0)
///
/// Computed in integer microseconds; exact whenever 2^SF / BW is a multiple of 4 us.
inline Duration airtime(const RadioParams& params, std::size_t frame_len) {
  if (frame_len > kMaxFrameSize)
    throw Error(Errc::payload_too_long, std::to_string(frame_len) + " > 252 bytes");
  params.validate();
  const std::int64_t sf = params.spreading_factor;
  const std::int64_t cr = params.coding_rate_denominator - 4;
  const std::int64_t de = params.low_data_rate_optimize() ? 1 : 0;
  const std::int64_t ih = params.explicit_header ? 0 : 1;
  const std::int64_t crc = params.crc ? 1 : 0;
  const std::int64_t pl = static_cast<std::int64_t>(frame_len) + params.header_overhead_bytes;

  const std::int64_t numerator = 8 * pl - 4 * sf + 28 + 16 * crc - 20 * ih;
  const std::int64_t denominator = 4 * (sf - 2 * de);
  std::int64_t blocks = 0;
  if (numerator > 0) blocks = (numerator + denominator - 1) / denominator;
  const std::int64_t payload_symbols = 8 + blocks * (cr + 4);

  // Symbol counts in quarter symbols keep the 4.25 preamble tail integral.
  const std::int64_t quarter_symbols = 4 * params.preamble_symbols + 17 + 4 * payload_symbols;
  const std::int64_t numer_us = quarter_symbols * (std::int64_t{1} << sf) * 1'000'000;
  const std::int64_t denom = 4 * params.bandwidth_hz;
  return Duration{(numer_us + denom / 2) / denom};
}

// ---------------------------------------------------------------------------
// Link profiles
// ---------------------------------------------------------------------------

enum class Environment { parking_lot, grassland, soybean };

constexpr std::string_view to_string(Environment e) {
  switch (e) {
    case Environment::parking_lot: return "parking_lot";
    case Environment::grassland: return "grassland";
    case Environment::soybean: return "soybean";
  }
  return "?";
}

constexpr std::optional<Environment> environment_from_string(std::string_view s) {
  if (s == "parking_lot") return Environment::parking_lot;
  if (s == "grassland") return Environment::grassland;
  if (s == "soybean") return Environment::soybean;
  return std::nullopt;
}

/// A direct link, or an end-to-end figure measured through the relay.
enum class PathKind { direct, via_relay };

/// Identifies one measured row: transmitter is the sensor side, receiver the gateway side.
struct ProfileKey {
  Environment environment = Environment::grassland;
  double distance_m = 0;
  double tx_height_m = 0;
  double rx_height_m = 0;
  bool los = true;
  PathKind path = PathKind::direct;

  bool matches(const ProfileKey& o) const {
    constexpr double eps = 1e-9;
    return environment == o.environment && std::abs(distance_m - o.distance_m) < eps &&
           std::abs(tx_height_m - o.tx_height_m) < eps &&
           std::abs(rx_height_m - o.rx_height_m) < eps && los == o.los && path == o.path;
  }
};

struct LinkProfile {
  std::optional<ProfileKey> key;  // empty for explicitly configured links
  /// Probability that a data exchange (frame plus its response) over this link fails.
  /// Empty means unreachable: nothing is ever delivered.
  std::optional<double> loss_probability;

  static LinkProfile with_loss(double p) {
    if (!(p >= 0.0 && p <= 1.0))
      throw Error(Errc::invalid_scenario, "loss probability must lie in [0,1]");
    return LinkProfile{std::nullopt, p};
  }
  static LinkProfile unreachable() { return LinkProfile{}; }

  bool reachable() const { return loss_probability.has_value(); }

  /// Profile for a single frame crossing the link once. An exchange crosses it twice
  /// (frame out, response back), so the per-leg loss q satisfies (1-q)^2 = 1-p.
  LinkProfile per_leg() const {
    if (!reachable()) return *this;
    return LinkProfile{key, 1.0 - std::sqrt(1.0 - *loss_probability)};
  }
};

/// Rows transcribed from the field measurements. Heights in meters, losses as fractions.
inline const std::vector<LinkProfile>& builtin_profiles() {
  using E = Environment;
  static const std::vector<LinkProfile> rows = [] {
    std::vector<LinkProfile> v;
    auto add = [&](E env, double d, double tx, double rx, bool los, PathKind path,
                   std::optional<double> p) {
      v.push_back(LinkProfile{ProfileKey{env, d, tx, rx, los, path}, p});
    };
    const auto direct = PathKind::direct;
    // Grassland, gateway on the ground.
    add(E::grassland, 200, 0.0, 0.0, true, direct, 0.005);
    add(E::grassland, 200, 1.5, 0.0, true, direct, 0.005);
    add(E::grassland, 300, 0.0, 0.0, true, direct, 0.0);
    add(E::grassland, 300, 1.5, 0.0, true, direct, 0.01);
    add(E::grassland, 500, 0.0, 0.0, true, direct, 0.005);
    add(E::grassland, 500, 1.5, 0.0, true, direct, 0.0);
    add(E::grassland, 800, 0.0, 0.0, true, direct, std::nullopt);
    add(E::grassland, 800, 1.5, 0.0, true, direct, std::nullopt);
    // Grassland, gateway at 1.5 m.
    add(E::grassland, 200, 0.0, 1.5, true, direct, 0.0);
    add(E::grassland, 200, 1.5, 1.5, true, direct, 0.0);
    add(E::grassland, 300, 0.0, 1.5, true, direct, 0.01);
    add(E::grassland, 300, 1.5, 1.5, true, direct, 0.0);
    add(E::grassland, 500, 0.0, 1.5, true, direct, 0.0);
    add(E::grassland, 500, 1.5, 1.5, true, direct, 0.0);
    add(E::grassland, 800, 0.0, 1.5, true, direct, 0.05);
    add(E::grassland, 800, 1.5, 1.5, true, direct, 0.03);
    // Soybean field, gateway at 2 m.
    add(E::soybean, 400, 0.0, 2.0, true, direct, 0.11);
    add(E::soybean, 400, 1.0, 2.0, true, direct, 0.015);
    // Grassland through the relay (relay at 1 m), end-to-end over 650 m without line of sight.
    add(E::grassland, 650, 0.0, 1.5, false, PathKind::via_relay, 0.025);
    add(E::grassland, 650, 1.0, 1.5, false, PathKind::via_relay, 0.0);
    // Parking lot, both ends at 1.5 m.
    add(E::parking_lot, 200, 1.5, 1.5, true, direct, 0.0);
    add(E::parking_lot, 200, 1.5, 1.5, false, direct, 0.005);
    return v;
  }();
  return rows;
}

inline std::optional<LinkProfile> find_builtin_profile(const ProfileKey& key) {
  for (const auto& row : builtin_profiles())
    if (row.key->matches(key)) return row;
  return std::nullopt;
}

enum class Delivery { delivered, lost };

/// One independent Bernoulli draw per call.
inline Delivery sample_delivery(const LinkProfile& profile, RandomStream& rng) {
  if (!profile.reachable()) return Delivery::lost;
  return rng.bernoulli(*profile.loss_probability) ? Delivery::lost : Delivery::delivered;
}

// ---------------------------------------------------------------------------
// Collisions and listen-before-talk
// ---------------------------------------------------------------------------

struct Transmission {
  std::uint64_t id = 0;
  SimTime start{};
  Duration airtime{};
  NodeAddress receiver;

  SimTime end() const { return start + airtime; }
};

/// Ids of transmissions that overlap another transmission at the same receiver.
/// Both parties of every overlap are lost; the result does not depend on input order.
inline std::set<std::uint64_t> resolve_collisions(std::span<const Transmission> transmissions) {
  // Empty intervals overlap nothing.
  std::vector<Transmission> sorted;
  for (const auto& t : transmissions)
    if (t.airtime > Duration::zero()) sorted.push_back(t);
  std::sort(sorted.begin(), sorted.end(), [](const Transmission& a, const Transmission& b) {
    if (a.receiver != b.receiver) return a.receiver < b.receiver;
    if (a.start != b.start) return a.start < b.start;
    return a.id < b.id;
  });

  std::set<std::uint64_t> lost;
  std::size_t group_begin = 0;
  while (group_begin < sorted.size()) {
    std::size_t group_end = group_begin;
    while (group_end < sorted.size() && sorted[group_end].receiver == sorted[group_begin].receiver)
      ++group_end;

    // x overlaps an earlier-sorted y iff max end so far > x.start, and a later-sorted y iff
    // the next start < x.end (starts are sorted, so the next one is the earliest).
    std::optional<SimTime> max_end_before;
    for (std::size_t i = group_begin; i < group_end; ++i) {
      const auto& x = sorted[i];
      const bool hit_before = max_end_before && *max_end_before > x.start;
      const bool hit_after = i + 1 < group_end && sorted[i + 1].start < x.end();
      if (hit_before || hit_after) lost.insert(x.id);
      if (!max_end_before || x.end() > *max_end_before) max_end_before = x.end();
    }
    group_begin = group_end;
  }
  return lost;
}

inline constexpr Duration kCsmaMaxDelay = 1s;

/// Deferral after sensing a busy channel: uniform in [0, 1 s). The caller re-senses afterwards.
inline Duration csma_delay(RandomStream& rng) { return rng.uniform_duration(kCsmaMaxDelay); }

}  // namespace sparclora
