#pragma once

// Discrete-event kernel binding the protocol machines to the channel, power and
// ingest models. Single-threaded; a run is a pure function of the scenario.
//
// Each node executes the actions its machine returns strictly in order. A
// Transmit first senses the carrier (deferring by a random delay while the
// channel is busy) and then occupies the node until the frame has left the
// antenna. Every receiver linked to the sender gets a FrameArrival at the end
// of the frame, where collisions (including the receiver's own transmissions)
// and the link's loss draw decide its fate.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <utility>
#include <variant>
#include <vector>

#include "sparclora/channel.hpp"
#include "sparclora/frame.hpp"
#include "sparclora/ingest.hpp"
#include "sparclora/overloaded.hpp"
#include "sparclora/power.hpp"
#include "sparclora/protocol.hpp"
#include "sparclora/random.hpp"
#include "sparclora/scenario.hpp"
#include "sparclora/time.hpp"
#include "sparclora/trace.hpp"

namespace sparclora {

namespace sim_event {
struct GasInterrupt {
  std::size_t node;
};
struct FrameArrival {
  std::size_t node;
  std::uint64_t tx;
};
struct TimerFired {
  std::size_t node;
  TimerId id;
  std::uint64_t generation;
};
struct TxDone {
  std::size_t node;
};
struct CarrierRetry {
  std::size_t node;
};
struct ScenarioEnd {};
}  // namespace sim_event

using SimEventKind = std::variant<sim_event::GasInterrupt, sim_event::FrameArrival,
                                  sim_event::TimerFired, sim_event::TxDone,
                                  sim_event::CarrierRetry, sim_event::ScenarioEnd>;

struct SimEvent {
  SimTime time{};
  std::uint64_t seq_no = 0;
  SimEventKind kind;
};

/// One call of the gateway machine, as seen from outside.
struct GatewayStep {
  SimTime time{};
  GatewayEvent event;
  std::optional<NodeAddress> connected_before;
  std::optional<NodeAddress> connected_after;
  Actions actions;
};

struct RunOptions {
  std::function<void(const GatewayStep&)> on_gateway_step;
};

struct SimResult {
  Trace trace;
  TimeSeriesStore store;
  std::vector<EnergyLedger> ledgers;  // one per node, closed at the end of the run
  std::size_t scheduled = 0;
  std::size_t events_processed = 0;
};

// Stream ids. Node streams are offset by the node address.
inline constexpr std::uint64_t kChannelStream = 0;
inline constexpr std::uint64_t kScheduleStream = 1;
inline constexpr std::uint64_t kNodeStreamBase = 0x100;

/// Payload of a node's k-th interrupt: k big-endian in `width` bytes.
inline Bytes interrupt_payload(std::uint32_t k, std::size_t width) {
  Bytes out(width, 0);
  for (std::size_t i = 0; i < width && i < 4; ++i)
    out[width - 1 - i] = static_cast<std::uint8_t>(k >> (8 * i));
  return out;
}

namespace detail {

class Kernel {
 public:
  Kernel(const Scenario& s, RunOptions opts)
      : s_(s), opts_(std::move(opts)), channel_rng_(s.seed, kChannelStream) {
    index_.fill(kNone);
    build_nodes();
    build_links();
    max_airtime_ = airtime(s_.radio, kMaxFrameSize);
  }

  SimResult run() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) emit(i, TraceDirection::power, {});
    schedule_interrupts();
    push(SimTime{s_.duration}, sim_event::ScenarioEnd{});

    while (!queue_.empty()) {
      SimEvent ev = queue_.top();
      queue_.pop();
      if (ev.time >= SimTime{s_.duration}) break;
      now_ = ev.time;
      ++result_.events_processed;
      std::visit([&](const auto& e) { handle(e); }, ev.kind);
    }

    for (auto& n : nodes_) {
      n.ledger.finish(SimTime{s_.duration});
      result_.ledgers.push_back(n.ledger);
    }
    return std::move(result_);
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  struct Node {
    Node(const NodeSpec* sp, std::variant<SensorNode, Gateway, Relay> m, RandomStream r,
         EnergyLedger l)
        : spec(sp), machine(std::move(m)), rng(r), ledger(std::move(l)) {}

    const NodeSpec* spec;
    std::variant<SensorNode, Gateway, Relay> machine;
    RandomStream rng;
    EnergyLedger ledger;
    bool radio_on = true;
    std::deque<Action> pending;
    bool blocked = false;
    std::array<std::uint64_t, kTimerCount> timer_generation{};
    std::uint32_t interrupts = 0;
    std::vector<std::pair<std::size_t, LinkProfile>> neighbours;  // per-leg profiles

    NodeAddress address() const { return spec->address; }
    PowerMode mode() const { return ledger.current_mode(); }
  };

  struct OnAir {
    std::uint64_t id;
    std::size_t sender;
    SimTime start;
    SimTime end;
    Frame frame;
  };

  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq_no > b.seq_no;
    }
  };

  // ---- setup ----

  void build_nodes() {
    const NodeSpec* gw = s_.gateway();
    nodes_.reserve(s_.nodes.size());
    for (const auto& spec : s_.nodes) {
      index_[spec.address.value] = nodes_.size();
      RandomStream rng(s_.seed, kNodeStreamBase + spec.address.value);
      switch (spec.role) {
        case Role::sensor: {
          SensorNodeConfig cfg;
          cfg.radio = s_.radio;
          cfg.wake_delay = s_.wake_delay;
          cfg.min_active = s_.min_active;
          cfg.base_interval = s_.base_interval;
          cfg.retry_cap = s_.retry_cap;
          cfg.retries_enabled = s_.retries;
          cfg.max_retries = s_.max_retries;
          cfg.path_hops = hops_to_gateway(spec, *gw);
          nodes_.emplace_back(&spec, SensorNode(spec.address, cfg), rng,
                              EnergyLedger(spec.address, PowerMode::sleep, {}, s_.powers));
          break;
        }
        case Role::gateway: {
          GatewayConfig cfg;
          cfg.idle_timeout = s_.idle_timeout;
          nodes_.emplace_back(&spec, Gateway(cfg), rng,
                              EnergyLedger(spec.address, PowerMode::idle, {}, s_.powers));
          break;
        }
        case Role::relay: {
          Relay relay;
          relay.address = spec.address;
          relay.enabled = spec.enabled;
          const auto mode = spec.enabled ? PowerMode::idle : PowerMode::sleep;
          nodes_.emplace_back(&spec, relay, rng, EnergyLedger(spec.address, mode, {}, s_.powers));
          nodes_.back().radio_on = spec.enabled;
          break;
        }
      }
    }
  }

  bool reachable_link(const NodeSpec& a, const NodeSpec& b) const {
    const auto* l = s_.link_between(a.name, b.name);
    return l && l->profile.reachable();
  }

  unsigned hops_to_gateway(const NodeSpec& sn, const NodeSpec& gw) const {
    if (reachable_link(sn, gw)) return 1;
    for (const auto& n : s_.nodes)
      if (n.role == Role::relay && n.enabled && reachable_link(sn, n) && reachable_link(n, gw))
        return 2;
    return 1;
  }

  void build_links() {
    for (const auto& l : s_.links) {
      if (!l.profile.reachable()) continue;
      const std::size_t a = index_[s_.find(l.a)->address.value];
      const std::size_t b = index_[s_.find(l.b)->address.value];
      if (!nodes_[a].radio_on || !nodes_[b].radio_on) continue;
      const LinkProfile leg = l.profile.per_leg();
      nodes_[a].neighbours.emplace_back(b, leg);
      nodes_[b].neighbours.emplace_back(a, leg);
    }
  }

  bool linked(std::size_t a, std::size_t b) const {
    const auto& nb = nodes_[a].neighbours;
    return std::any_of(nb.begin(), nb.end(), [&](const auto& p) { return p.first == b; });
  }

  void schedule_interrupts() {
    RandomStream jitter(s_.seed, kScheduleStream);
    for (const auto& rule : s_.schedule) {
      const std::size_t node = index_[s_.find(rule.node)->address.value];
      for (std::size_t k = 0; k < rule.count; ++k) {
        const SimTime t = rule.start + static_cast<std::int64_t>(k) * rule.every +
                          jitter.uniform_duration(rule.jitter);
        push(t, sim_event::GasInterrupt{node});
        ++result_.scheduled;
      }
    }
  }

  // ---- bookkeeping ----

  void push(SimTime t, SimEventKind kind) { queue_.push(SimEvent{t, next_seq_++, std::move(kind)}); }

  void emit(std::size_t node, TraceDirection dir,
            std::variant<std::monostate, FrameSummary, BackoffSummary> detail) {
    result_.trace.push_back(
        TraceRecord{now_, nodes_[node].address(), dir, nodes_[node].mode(), std::move(detail)});
  }

  void set_mode(std::size_t node, PowerMode mode) {
    auto& n = nodes_[node];
    if (n.mode() == mode) return;
    n.ledger.record_transition(mode, now_);
    emit(node, TraceDirection::power, {});
  }

  // ---- events ----

  void handle(const sim_event::ScenarioEnd&) {}

  void handle(const sim_event::GasInterrupt& e) {
    auto& n = nodes_[e.node];
    auto& sn = std::get<SensorNode>(n.machine);
    const Bytes payload = interrupt_payload(n.interrupts++, s_.payload_bytes);
    emit(e.node, TraceDirection::queue,
         FrameSummary{FrameKind::data, n.address(), false, false, sn.current_seq});
    sensor_step(e.node, event::GasInterrupt{payload});
  }

  void handle(const sim_event::TimerFired& e) {
    auto& n = nodes_[e.node];
    if (n.timer_generation[static_cast<std::size_t>(e.id)] != e.generation) return;
    if (std::holds_alternative<SensorNode>(n.machine))
      sensor_step(e.node, event::TimerFired{e.id});
    else if (std::holds_alternative<Gateway>(n.machine))
      gateway_step(e.node, event::Tick{});
  }

  void handle(const sim_event::TxDone& e) {
    auto& n = nodes_[e.node];
    n.blocked = false;
    if (!std::holds_alternative<SensorNode>(n.machine)) set_mode(e.node, PowerMode::idle);
    pump(e.node);
  }

  void handle(const sim_event::CarrierRetry& e) {
    nodes_[e.node].blocked = false;
    pump(e.node);
  }

  void handle(const sim_event::FrameArrival& e) {
    const auto it = std::find_if(air_.begin(), air_.end(),
                                 [&](const OnAir& x) { return x.id == e.tx; });
    const OnAir tx = *it;
    auto& rx = nodes_[e.node];
    if (!rx.radio_on || rx.mode() == PowerMode::sleep) return;

    std::vector<Transmission> overlapping{{tx.id, tx.start, tx.end - tx.start, rx.address()}};
    for (const auto& x : air_) {
      if (x.id == tx.id || x.end <= tx.start || x.start >= tx.end) continue;
      if (x.sender != e.node && !linked(x.sender, e.node)) continue;
      overlapping.push_back({x.id, x.start, x.end - x.start, rx.address()});
    }
    const auto summary = FrameSummary::of(tx.frame);
    if (resolve_collisions(overlapping).contains(tx.id)) {
      emit(e.node, TraceDirection::collide, summary);
      return;
    }
    const auto& nb = nodes_[tx.sender].neighbours;
    const auto link = std::find_if(nb.begin(), nb.end(),
                                   [&](const auto& p) { return p.first == e.node; });
    if (sample_delivery(link->second, channel_rng_) == Delivery::lost) {
      emit(e.node, TraceDirection::drop, summary);
      return;
    }
    emit(e.node, TraceDirection::rx, summary);

    std::visit(overloaded{
                   [&](SensorNode&) { sensor_step(e.node, event::FrameReceived{tx.frame}); },
                   [&](Gateway&) { gateway_step(e.node, event::FrameReceived{tx.frame}); },
                   [&](Relay& relay) {
                     enqueue(e.node, relay_on_frame(relay, tx.frame, direction_of(tx.frame)));
                   },
               },
               rx.machine);
  }

  // ---- machine steps ----

  void sensor_step(std::size_t node, const SensorEvent& ev) {
    auto& n = nodes_[node];
    auto& sn = std::get<SensorNode>(n.machine);
    Actions actions = sn_on_event(sn, ev, now_, n.rng);
    for (const auto& a : actions) {
      const auto* t = std::get_if<action::SetTimer>(&a);
      if (!t || t->id != TimerId::retry) continue;
      RetrySchedule drawn = sn.retry;
      drawn.attempt = sn.retry.attempt - 1;
      emit(node, TraceDirection::backoff, BackoffSummary{drawn.attempt, drawn.window(), t->delay});
    }
    enqueue(node, std::move(actions));
  }

  void gateway_step(std::size_t node, const GatewayEvent& ev) {
    auto& gw = std::get<Gateway>(nodes_[node].machine);
    const auto before = gw.connected_to();
    Actions actions = gw_on_event(gw, ev, now_);
    if (opts_.on_gateway_step)
      opts_.on_gateway_step(GatewayStep{now_, ev, before, gw.connected_to(), actions});
    enqueue(node, std::move(actions));
  }

  void enqueue(std::size_t node, Actions&& actions) {
    auto& n = nodes_[node];
    for (auto& a : actions) n.pending.push_back(std::move(a));
    pump(node);
  }

  // Executes pending actions until the queue drains or a transmission occupies the node.
  void pump(std::size_t node) {
    auto& n = nodes_[node];
    while (!n.blocked && !n.pending.empty()) {
      Action a = std::move(n.pending.front());
      n.pending.pop_front();
      std::visit(overloaded{
                     [&](action::Transmit& t) { transmit(node, std::move(t.frame)); },
                     [&](action::SetTimer& t) {
                       const auto gen = ++n.timer_generation[static_cast<std::size_t>(t.id)];
                       push(now_ + t.delay, sim_event::TimerFired{node, t.id, gen});
                     },
                     [&](action::CancelTimer& t) {
                       ++n.timer_generation[static_cast<std::size_t>(t.id)];
                     },
                     [&](action::DeliverToSink& d) {
                       d.record.time = now_;
                       if (result_.store.publish(d.record))
                         emit(node, TraceDirection::sink,
                              FrameSummary{FrameKind::data, d.record.node, false, false,
                                           d.record.sequence});
                     },
                     [&](action::WakePower& w) { set_mode(node, w.mode); },
                     [&](action::None&) {},
                 },
                 a);
    }
  }

  bool carrier_busy(std::size_t node) const {
    for (const auto& x : air_) {
      if (x.start > now_ || x.end <= now_ || x.sender == node) continue;
      if (s_.carrier_sense == CarrierSense::all || linked(x.sender, node)) return true;
    }
    return false;
  }

  void transmit(std::size_t node, Frame frame) {
    auto& n = nodes_[node];
    if (!n.radio_on) return;
    if (carrier_busy(node)) {
      n.pending.push_front(action::Transmit{std::move(frame)});
      n.blocked = true;
      push(now_ + csma_delay(n.rng), sim_event::CarrierRetry{node});
      return;
    }
    const Duration t_air = airtime(s_.radio, encode(frame).size());
    if (!std::holds_alternative<SensorNode>(n.machine)) set_mode(node, PowerMode::active);
    emit(node, TraceDirection::tx, FrameSummary::of(frame));

    prune_air();
    const std::uint64_t id = next_tx_++;
    air_.push_back(OnAir{id, node, now_, now_ + t_air, std::move(frame)});
    for (const auto& [peer, _] : n.neighbours)
      push(now_ + t_air, sim_event::FrameArrival{peer, id});
    n.blocked = true;
    push(now_ + t_air, sim_event::TxDone{node});
  }

  void prune_air() {
    const SimTime horizon = now_ - max_airtime_ - 1s;
    while (!air_.empty() && air_.front().end < horizon) air_.pop_front();
  }

  const Scenario& s_;
  RunOptions opts_;
  RandomStream channel_rng_;
  std::array<std::size_t, 256> index_{};
  std::vector<Node> nodes_;
  std::deque<OnAir> air_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_tx_ = 0;
  Duration max_airtime_{};
  SimTime now_{};
  SimResult result_;
};

}  // namespace detail

/// Runs `scenario` (assumed valid) to its duration.
inline SimResult run(const Scenario& scenario, RunOptions options = {}) {
  return detail::Kernel(scenario, std::move(options)).run();
}

}  // namespace sparclora
