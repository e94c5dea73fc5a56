#pragma once

// Connection-based upper layer: sensor node, gateway and relay as passive
// machines. Each handler consumes one event and returns the actions the
// caller must execute, in order. Randomness enters only through the stream
// argument.
//
// Sensor node lifecycle for one report:
//
//   sleeping --interrupt--> connecting (idle, wake timer)
//            --wake--> connect_req sent (active)
//            --connect_accept--> awaiting_ack --data_ack--> ... --> disconnecting --hold--> sleeping
//
// A connect_deny, a missing connect response, or a missing data_ack (retries on)
// puts the node to sleep in backoff; the retry wakes it and it reconnects.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <list>
#include <optional>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "sparclora/channel.hpp"
#include "sparclora/frame.hpp"
#include "sparclora/ingest.hpp"
#include "sparclora/overloaded.hpp"
#include "sparclora/power.hpp"
#include "sparclora/random.hpp"
#include "sparclora/time.hpp"

namespace sparclora {

enum class TimerId : std::uint8_t { wake, response, retry, hold, idle_check };
inline constexpr std::size_t kTimerCount = 5;

namespace action {
struct Transmit {
  Frame frame;
};
struct SetTimer {
  TimerId id;
  Duration delay;
};
struct CancelTimer {
  TimerId id;
};
struct DeliverToSink {
  MeasurementRecord record;
};
struct WakePower {
  PowerMode mode;
};
struct None {};
}  // namespace action

using Action = std::variant<action::Transmit, action::SetTimer, action::CancelTimer,
                            action::DeliverToSink, action::WakePower, action::None>;
using Actions = std::vector<Action>;

namespace event {
struct GasInterrupt {
  Bytes payload;
};
struct FrameReceived {
  Frame frame;
};
struct TimerFired {
  TimerId id;
};
struct Tick {};
}  // namespace event

using SensorEvent =
    std::variant<event::GasInterrupt, event::FrameReceived, event::TimerFired, event::Tick>;
using GatewayEvent = std::variant<event::FrameReceived, event::Tick>;

// ---------------------------------------------------------------------------
// Retry schedule
// ---------------------------------------------------------------------------

inline constexpr Duration kDefaultBaseInterval = 8s;
inline constexpr Duration kRetryCap = 3600s;

struct RetrySchedule {
  Duration base_interval = kDefaultBaseInterval;
  unsigned attempt = 0;
  Duration cap = kRetryCap;

  /// min(base * 2^attempt, cap)
  Duration window() const {
    if (base_interval <= Duration::zero()) return Duration::zero();
    Duration w = base_interval;
    for (unsigned i = 0; i < attempt && w < cap; ++i) w *= 2;
    return std::min(w, cap);
  }
};

/// Delay uniform in [0, window); the returned schedule has attempt + 1.
inline std::pair<RetrySchedule, Duration> next_retry_delay(RetrySchedule rs, RandomStream& rng) {
  const Duration delay = rng.uniform_duration(rs.window());
  ++rs.attempt;
  return {rs, delay};
}

// ---------------------------------------------------------------------------
// Sensor node
// ---------------------------------------------------------------------------

enum class SensorState { sleeping, connecting, connected, awaiting_ack, backoff, disconnecting };

constexpr std::string_view to_string(SensorState s) {
  switch (s) {
    case SensorState::sleeping: return "sleeping";
    case SensorState::connecting: return "connecting";
    case SensorState::connected: return "connected";
    case SensorState::awaiting_ack: return "awaiting_ack";
    case SensorState::backoff: return "backoff";
    case SensorState::disconnecting: return "disconnecting";
  }
  return "?";
}

struct SensorNodeConfig {
  RadioParams radio;
  Duration wake_delay = kDefaultIdleWindow;
  /// Minimum time in active mode per wake-up, measured from the first transmission.
  Duration min_active = kDefaultActiveWindow;
  Duration base_interval = kDefaultBaseInterval;
  Duration retry_cap = kRetryCap;
  /// When false a data frame whose ACK never arrives is dropped instead of resent.
  bool retries_enabled = true;
  /// Consecutive failed attempts after which the head payload is given up.
  std::optional<unsigned> max_retries;
  /// Radio hops to the gateway (2 through a relay); scales the response timeout.
  unsigned path_hops = 1;
  Duration processing_margin = 1s;
};

struct PendingMessage {
  std::uint16_t sequence = 0;
  Bytes payload;
};

struct SensorNode {
  explicit SensorNode(NodeAddress addr, SensorNodeConfig cfg = {})
      : address(addr), config(std::move(cfg)) {
    retry.base_interval = config.base_interval;
    retry.cap = config.retry_cap;
  }

  NodeAddress address;
  SensorNodeConfig config;
  SensorState state = SensorState::sleeping;
  std::deque<PendingMessage> outbox;
  RetrySchedule retry;
  std::uint16_t current_seq = 0;  // assigned to the next queued payload
  bool connect_pending = false;   // a connect_req is awaiting its response
  std::optional<SimTime> active_since;
  std::size_t dropped = 0;

  /// Round trip to the gateway and back over every hop, plus processing slack.
  Duration response_timeout(const Frame& f) const {
    const Duration t = airtime(config.radio, kHeaderSize + f.payload.size());
    return 2 * static_cast<std::int64_t>(config.path_hops) * t + config.processing_margin;
  }
};

namespace detail {

inline void append(Actions& into, Actions&& more) {
  into.insert(into.end(), std::make_move_iterator(more.begin()),
              std::make_move_iterator(more.end()));
}

inline Actions sn_sleep(SensorNode& sn) {
  sn.state = SensorState::sleeping;
  sn.active_since.reset();
  sn.connect_pending = false;
  sn.retry.attempt = 0;
  return {action::WakePower{PowerMode::sleep}};
}

inline Actions sn_send_connect(SensorNode& sn, SimTime now) {
  Actions a;
  if (!sn.active_since) {
    sn.active_since = now;
    a.push_back(action::WakePower{PowerMode::active});
  }
  Frame f = make_frame(FrameKind::connect_req, sn.address, sn.outbox.front().sequence);
  const Duration timeout = sn.response_timeout(f);
  a.push_back(action::Transmit{std::move(f)});
  a.push_back(action::SetTimer{TimerId::response, timeout});
  sn.state = SensorState::connecting;
  sn.connect_pending = true;
  return a;
}

inline Actions sn_start_wake(SensorNode& sn, SimTime now) {
  sn.state = SensorState::connecting;
  sn.connect_pending = false;
  Actions a{action::WakePower{PowerMode::idle}};
  if (sn.config.wake_delay > Duration::zero()) {
    a.push_back(action::SetTimer{TimerId::wake, sn.config.wake_delay});
    return a;
  }
  append(a, sn_send_connect(sn, now));
  return a;
}

inline Actions sn_send_head(SensorNode& sn) {
  const auto& msg = sn.outbox.front();
  Frame f = make_frame(FrameKind::data, sn.address, msg.sequence, msg.payload);
  f.control.more_messages = sn.outbox.size() > 1;
  const Duration timeout = sn.response_timeout(f);
  sn.state = SensorState::awaiting_ack;
  return {action::Transmit{std::move(f)}, action::SetTimer{TimerId::response, timeout}};
}

inline Actions sn_disconnect(SensorNode& sn, SimTime now) {
  sn.state = SensorState::disconnecting;
  Frame f = make_frame(FrameKind::disconnect, sn.address, sn.current_seq);
  const Duration tx = airtime(sn.config.radio, kHeaderSize);
  // The hold timer starts once the disconnect is on air and done.
  const SimTime hold_end = sn.active_since.value_or(now) + sn.config.min_active;
  const Duration remaining = std::max(Duration::zero(), hold_end - (now + tx));
  return {action::Transmit{std::move(f)}, action::SetTimer{TimerId::hold, remaining}};
}

inline Actions sn_backoff(SensorNode& sn, RandomStream& rng) {
  sn.connect_pending = false;
  if (sn.config.max_retries && sn.retry.attempt >= *sn.config.max_retries) {
    sn.outbox.pop_front();
    ++sn.dropped;
    sn.retry.attempt = 0;
    if (sn.outbox.empty()) return sn_sleep(sn);
  }
  auto [next, delay] = next_retry_delay(sn.retry, rng);
  sn.retry = next;
  sn.state = SensorState::backoff;
  sn.active_since.reset();
  return {action::WakePower{PowerMode::sleep}, action::SetTimer{TimerId::retry, delay}};
}

/// Moves past the head payload after a lost ACK with retries disabled.
inline Actions sn_abandon_head(SensorNode& sn, SimTime now) {
  sn.outbox.pop_front();
  ++sn.dropped;
  return sn.outbox.empty() ? sn_disconnect(sn, now) : sn_send_head(sn);
}

}  // namespace detail

/// Total: frames for other nodes, uplink frames and events that do not apply to the
/// current state are ignored.
inline Actions sn_on_event(SensorNode& sn, const SensorEvent& ev, SimTime now, RandomStream& rng) {
  using namespace detail;
  return std::visit(
      overloaded{
          [&](const event::GasInterrupt& e) -> Actions {
            sn.outbox.push_back({sn.current_seq++, e.payload});
            if (sn.state == SensorState::sleeping) return sn_start_wake(sn, now);
            return {};
          },
          [&](const event::FrameReceived& e) -> Actions {
            const Frame& f = e.frame;
            if (f.address != sn.address || !f.control.valid() || is_uplink(f.kind())) return {};
            switch (f.kind()) {
              case FrameKind::connect_accept: {
                if (sn.state != SensorState::connecting || !sn.connect_pending) return {};
                sn.connect_pending = false;
                Actions a{action::CancelTimer{TimerId::response}};
                append(a, sn_send_head(sn));
                return a;
              }
              case FrameKind::connect_deny: {
                if (sn.state != SensorState::connecting || !sn.connect_pending) return {};
                Actions a{action::CancelTimer{TimerId::response}};
                append(a, sn_backoff(sn, rng));
                return a;
              }
              case FrameKind::data_ack: {
                if (sn.state != SensorState::awaiting_ack || sn.outbox.empty() ||
                    f.sequence != sn.outbox.front().sequence)
                  return {};
                sn.outbox.pop_front();
                sn.retry.attempt = 0;
                Actions a{action::CancelTimer{TimerId::response}};
                append(a, sn.outbox.empty() ? sn_disconnect(sn, now) : sn_send_head(sn));
                return a;
              }
              default:
                return {};
            }
          },
          [&](const event::TimerFired& e) -> Actions {
            switch (e.id) {
              case TimerId::wake:
                if (sn.state == SensorState::connecting && !sn.connect_pending)
                  return sn_send_connect(sn, now);
                return {};
              case TimerId::response:
                if (sn.state == SensorState::connecting && sn.connect_pending)
                  return sn_backoff(sn, rng);
                if (sn.state == SensorState::awaiting_ack) {
                  if (sn.config.retries_enabled) return sn_backoff(sn, rng);
                  return sn_abandon_head(sn, now);
                }
                return {};
              case TimerId::retry:
                if (sn.state == SensorState::backoff) return sn_start_wake(sn, now);
                return {};
              case TimerId::hold:
                if (sn.state != SensorState::disconnecting) return {};
                if (sn.outbox.empty()) return sn_sleep(sn);
                return sn_send_connect(sn, now);
              case TimerId::idle_check:
                return {};
            }
            return {};
          },
          [&](const event::Tick&) -> Actions { return {}; },
      },
      ev);
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

/// Bounded set of (address, sequence) pairs; least recently seen entries are evicted.
class DedupeCache {
 public:
  explicit DedupeCache(std::size_t capacity = 1024) : capacity_(capacity) {}

  /// True when the pair was not present. A hit refreshes its recency.
  bool insert(NodeAddress node, std::uint16_t sequence) {
    const std::uint32_t key = (std::uint32_t{node.value} << 16) | sequence;
    if (auto it = index_.find(key); it != index_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return false;
    }
    order_.push_front(key);
    index_[key] = order_.begin();
    if (order_.size() > capacity_) {
      index_.erase(order_.back());
      order_.pop_back();
    }
    return true;
  }

  bool contains(NodeAddress node, std::uint16_t sequence) const {
    return index_.contains((std::uint32_t{node.value} << 16) | sequence);
  }

  std::size_t size() const { return order_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::list<std::uint32_t> order_;
  std::unordered_map<std::uint32_t, std::list<std::uint32_t>::iterator> index_;
};

struct GatewayConfig {
  Duration idle_timeout = 60s;
  std::size_t dedupe_capacity = 1024;
};

enum class GatewayState { idle, connected };

struct Gateway {
  explicit Gateway(GatewayConfig cfg = {}) : config(cfg), seen(cfg.dedupe_capacity) {}

  GatewayConfig config;
  GatewayState state = GatewayState::idle;
  NodeAddress peer{};
  SimTime last_activity{};
  DedupeCache seen;

  std::optional<NodeAddress> connected_to() const {
    if (state == GatewayState::connected) return peer;
    return std::nullopt;
  }
};

inline Actions gw_on_event(Gateway& gw, const GatewayEvent& ev, SimTime now) {
  // Fires just past the timeout so the strict "> idle_timeout" test holds.
  const auto arm_idle = [&] {
    return action::SetTimer{TimerId::idle_check, gw.config.idle_timeout + Duration{1}};
  };
  return std::visit(
      overloaded{
          [&](const event::FrameReceived& e) -> Actions {
            const Frame& f = e.frame;
            if (!f.control.valid() || !is_uplink(f.kind())) return {};
            const NodeAddress src = f.address;
            switch (f.kind()) {
              case FrameKind::connect_req:
                if (gw.state == GatewayState::idle || gw.peer == src) {
                  gw.state = GatewayState::connected;
                  gw.peer = src;
                  gw.last_activity = now;
                  return {action::Transmit{make_frame(FrameKind::connect_accept, src, f.sequence)},
                          arm_idle()};
                }
                return {action::Transmit{make_frame(FrameKind::connect_deny, src, f.sequence)}};
              case FrameKind::data: {
                if (gw.state != GatewayState::connected || gw.peer != src) return {};
                gw.last_activity = now;
                Actions a;
                if (gw.seen.insert(src, f.sequence))
                  a.push_back(action::DeliverToSink{
                      MeasurementRecord{src, f.sequence, now, f.payload, default_topic(src)}});
                a.push_back(action::Transmit{make_data_ack(src, f.sequence)});
                a.push_back(arm_idle());
                return a;
              }
              case FrameKind::disconnect:
                if (gw.state != GatewayState::connected || gw.peer != src) return {};
                gw.state = GatewayState::idle;
                gw.last_activity = now;
                return {action::CancelTimer{TimerId::idle_check}};
              default:
                return {};
            }
          },
          [&](const event::Tick&) -> Actions {
            if (gw.state == GatewayState::connected && now - gw.last_activity > gw.config.idle_timeout)
              gw.state = GatewayState::idle;
            return {};
          },
      },
      ev);
}

// ---------------------------------------------------------------------------
// Relay
// ---------------------------------------------------------------------------

enum class LinkDirection { uplink, downlink };

inline LinkDirection direction_of(const Frame& f) {
  return is_uplink(f.kind()) ? LinkDirection::uplink : LinkDirection::downlink;
}

struct Relay {
  NodeAddress address = kRelayAddress;
  bool enabled = true;
  std::size_t forwarded_up = 0;
  std::size_t forwarded_down = 0;
};

/// Re-emits the frame verbatim with the relayed flag set. Frames that already carry the
/// flag are never forwarded again.
inline Actions relay_on_frame(Relay& rn, const Frame& frame, LinkDirection heard) {
  if (!rn.enabled || frame.control.relayed) return {};
  Frame copy = frame;
  copy.control.relayed = true;
  ++(heard == LinkDirection::uplink ? rn.forwarded_up : rn.forwarded_down);
  return {action::Transmit{std::move(copy)}};
}

}  // namespace sparclora
