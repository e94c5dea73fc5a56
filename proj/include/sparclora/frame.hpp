#pragma once

// Over-the-air frame of the connection-based upper layer:
//
//   [control][address][sequence hi][sequence lo][payload 0..248]
//
// The address byte always names the sensor node the exchange belongs to, for
// uplink frames and for the gateway's responses alike.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sparclora/error.hpp"

namespace sparclora {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::size_t kHeaderSize = 4;
inline constexpr std::size_t kMaxPayload = 248;
inline constexpr std::size_t kMaxFrameSize = kHeaderSize + kMaxPayload;

struct NodeAddress {
  std::uint8_t value = 0;

  constexpr bool is_gateway() const { return value == 0x00; }
  constexpr bool is_relay() const { return value == 0xFE; }
  constexpr bool is_sensor() const { return value >= 0x01 && value <= 0xFD; }
  constexpr bool is_reserved() const { return value == 0xFF; }

  friend constexpr auto operator<=>(NodeAddress, NodeAddress) = default;
};

inline constexpr NodeAddress kGatewayAddress{0x00};
inline constexpr NodeAddress kRelayAddress{0xFE};
inline constexpr NodeAddress kReservedAddress{0xFF};

/// Two lowercase hex digits, e.g. "05".
inline std::string to_hex(NodeAddress a) {
  static constexpr char digits[] = "0123456789abcdef";
  return {digits[a.value >> 4], digits[a.value & 0xF]};
}

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xF]);
  }
  return out;
}

enum class FrameKind : std::uint8_t {
  connect_req,
  connect_accept,
  connect_deny,
  data,
  data_ack,
  disconnect,
};

inline constexpr std::array<FrameKind, 6> kAllFrameKinds{
    FrameKind::connect_req, FrameKind::connect_accept, FrameKind::connect_deny,
    FrameKind::data,        FrameKind::data_ack,       FrameKind::disconnect};

constexpr std::string_view to_string(FrameKind k) {
  switch (k) {
    case FrameKind::connect_req: return "connect_req";
    case FrameKind::connect_accept: return "connect_accept";
    case FrameKind::connect_deny: return "connect_deny";
    case FrameKind::data: return "data";
    case FrameKind::data_ack: return "data_ack";
    case FrameKind::disconnect: return "disconnect";
  }
  return "?";
}

constexpr std::optional<FrameKind> frame_kind_from_string(std::string_view s) {
  for (auto k : kAllFrameKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

/// Uplink kinds travel sensor -> gateway; the rest are gateway responses.
constexpr bool is_uplink(FrameKind k) {
  return k == FrameKind::connect_req || k == FrameKind::data || k == FrameKind::disconnect;
}

namespace control_bit {
inline constexpr std::uint8_t connect_req = 1u << 0;
inline constexpr std::uint8_t connect_accept = 1u << 1;
inline constexpr std::uint8_t connect_deny = 1u << 2;
inline constexpr std::uint8_t data = 1u << 3;
inline constexpr std::uint8_t data_ack = 1u << 4;
inline constexpr std::uint8_t more_messages = 1u << 5;
inline constexpr std::uint8_t disconnect = 1u << 6;
inline constexpr std::uint8_t relayed = 1u << 7;

inline constexpr std::uint8_t kind_mask =
    connect_req | connect_accept | connect_deny | data | data_ack | disconnect;
}  // namespace control_bit

struct ControlFlags {
  bool connect_req = false;
  bool connect_accept = false;
  bool connect_deny = false;
  bool data = false;
  bool data_ack = false;
  bool more_messages = false;
  bool disconnect = false;
  bool relayed = false;

  static constexpr ControlFlags of(FrameKind k) {
    ControlFlags f;
    switch (k) {
      case FrameKind::connect_req: f.connect_req = true; break;
      case FrameKind::connect_accept: f.connect_accept = true; break;
      case FrameKind::connect_deny: f.connect_deny = true; break;
      case FrameKind::data: f.data = true; break;
      case FrameKind::data_ack: f.data_ack = true; break;
      case FrameKind::disconnect: f.disconnect = true; break;
    }
    return f;
  }

  constexpr std::uint8_t to_byte() const {
    std::uint8_t b = 0;
    if (connect_req) b |= control_bit::connect_req;
    if (connect_accept) b |= control_bit::connect_accept;
    if (connect_deny) b |= control_bit::connect_deny;
    if (data) b |= control_bit::data;
    if (data_ack) b |= control_bit::data_ack;
    if (more_messages) b |= control_bit::more_messages;
    if (disconnect) b |= control_bit::disconnect;
    if (relayed) b |= control_bit::relayed;
    return b;
  }

  static constexpr ControlFlags from_byte(std::uint8_t b) {
    ControlFlags f;
    f.connect_req = b & control_bit::connect_req;
    f.connect_accept = b & control_bit::connect_accept;
    f.connect_deny = b & control_bit::connect_deny;
    f.data = b & control_bit::data;
    f.data_ack = b & control_bit::data_ack;
    f.more_messages = b & control_bit::more_messages;
    f.disconnect = b & control_bit::disconnect;
    f.relayed = b & control_bit::relayed;
    return f;
  }

  /// The single kind bit, if exactly one is set.
  constexpr std::optional<FrameKind> kind() const {
    int count = 0;
    FrameKind k{};
    for (auto candidate : kAllFrameKinds) {
      if (to_byte() & ControlFlags::of(candidate).to_byte()) {
        ++count;
        k = candidate;
      }
    }
    if (count != 1) return std::nullopt;
    return k;
  }

  /// Exactly one kind bit; more_messages only alongside data.
  constexpr bool valid() const {
    auto k = kind();
    return k.has_value() && (!more_messages || *k == FrameKind::data);
  }

  friend constexpr bool operator==(const ControlFlags&, const ControlFlags&) = default;
};

struct Frame {
  ControlFlags control;
  NodeAddress address;
  std::uint16_t sequence = 0;
  Bytes payload;

  /// Requires control.valid().
  FrameKind kind() const { return *control.kind(); }

  friend bool operator==(const Frame&, const Frame&) = default;
};

namespace detail {

inline void check_payload_rules(FrameKind kind, std::uint16_t sequence,
                                std::span<const std::uint8_t> payload) {
  switch (kind) {
    case FrameKind::data:
      if (payload.empty()) throw Error(Errc::invalid_payload, "data frame without payload");
      break;
    case FrameKind::data_ack:
      if (payload.size() != 2 || payload[0] != (sequence >> 8) || payload[1] != (sequence & 0xFF))
        throw Error(Errc::invalid_payload, "data_ack must carry its 2-byte acknowledged sequence");
      break;
    default:
      if (!payload.empty())
        throw Error(Errc::invalid_payload,
                    std::string(to_string(kind)) + " frame must not carry a payload");
  }
}

}  // namespace detail

/// Throws Error for any violated frame invariant.
inline void validate(const Frame& f) {
  if (!f.control.valid())
    throw Error(Errc::invalid_flags, "control byte must set exactly one kind bit");
  if (f.address.is_reserved()) throw Error(Errc::reserved_address, "address 0xff is reserved");
  if (f.payload.size() > kMaxPayload)
    throw Error(Errc::payload_too_long, std::to_string(f.payload.size()) + " > 248 bytes");
  detail::check_payload_rules(f.kind(), f.sequence, f.payload);
}

inline Bytes encode(const Frame& f) {
  validate(f);
  Bytes out;
  out.reserve(kHeaderSize + f.payload.size());
  out.push_back(f.control.to_byte());
  out.push_back(f.address.value);
  out.push_back(static_cast<std::uint8_t>(f.sequence >> 8));
  out.push_back(static_cast<std::uint8_t>(f.sequence & 0xFF));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

inline Frame decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize)
    throw Error(Errc::too_short, std::to_string(bytes.size()) + " bytes, need at least 4");
  Frame f;
  f.control = ControlFlags::from_byte(bytes[0]);
  f.address = NodeAddress{bytes[1]};
  f.sequence = static_cast<std::uint16_t>((bytes[2] << 8) | bytes[3]);
  f.payload.assign(bytes.begin() + kHeaderSize, bytes.end());
  validate(f);
  return f;
}

inline Frame make_frame(FrameKind kind, NodeAddress address, std::uint16_t sequence,
                        Bytes payload = {}) {
  return Frame{ControlFlags::of(kind), address, sequence, std::move(payload)};
}

inline Frame make_data_ack(NodeAddress address, std::uint16_t acked) {
  return make_frame(FrameKind::data_ack, address, acked,
                    Bytes{static_cast<std::uint8_t>(acked >> 8),
                          static_cast<std::uint8_t>(acked & 0xFF)});
}

}  // namespace sparclora
