#include <gtest/gtest.h>

#include <map>

#include "sparclora/simulator.hpp"

using namespace sparclora;

namespace {

// One sensor reporting every 60 s to a gateway over a link with the given exchange loss.
Scenario single_link(double loss, std::size_t count, std::string_view extra = "") {
  std::string text = "[scenario]\nname = single\nseed = 5\nretries = off\nduration = " +
                     std::to_string(60 * count + 100) + "\n" + std::string(extra) +
                     "\n[nodes]\ngw gateway 0x00\nsn sensor 0x05\n[links]\nsn gw loss " +
                     std::to_string(loss) + "\n[schedule]\nsn every 60 count " +
                     std::to_string(count) + " start 10\n";
  return parse_scenario(text);
}

Scenario crowded(std::uint64_t seed, bool retries) {
  std::string text = "[scenario]\nseed = " + std::to_string(seed) +
                     "\nduration = 4000\nretries = " + (retries ? "on" : "off") +
                     "\n[nodes]\ngw gateway 0x00\n";
  for (int i = 1; i <= 5; ++i) text += "s" + std::to_string(i) + " sensor 0x0" + std::to_string(i) + "\n";
  text += "[links]\n";
  for (int i = 1; i <= 5; ++i) text += "s" + std::to_string(i) + " gw loss 0.2\n";
  text += "[schedule]\n";
  for (int i = 1; i <= 5; ++i) text += "s" + std::to_string(i) + " every 300 count 10 start 5 jitter 30\n";
  return parse_scenario(text);
}

std::size_t count_dir(const Trace& t, TraceDirection d) {
  return static_cast<std::size_t>(
      std::count_if(t.begin(), t.end(), [&](const TraceRecord& r) { return r.direction == d; }));
}

std::size_t frame_length(const FrameSummary& f, std::size_t payload_bytes) {
  switch (f.kind) {
    case FrameKind::data: return kHeaderSize + payload_bytes;
    case FrameKind::data_ack: return kHeaderSize + 2;
    default: return kHeaderSize;
  }
}

}  // namespace

TEST(Simulator, LosslessLinkDeliversEverything) {
  const auto s = single_link(0.0, 600);
  const auto r = run(s);
  EXPECT_EQ(r.scheduled, 600u);
  EXPECT_EQ(count_dir(r.trace, TraceDirection::sink), 600u);
  EXPECT_EQ(r.store.size(), 600u);
  EXPECT_EQ(compute_flr(r.trace), 0.0);
  EXPECT_EQ(count_dir(r.trace, TraceDirection::drop), 0u);
  EXPECT_EQ(count_dir(r.trace, TraceDirection::collide), 0u);
}

TEST(Simulator, UnreachableGatewayLosesEverything) {
  auto s = single_link(0.0, 20);
  s.links[0].profile = LinkProfile::unreachable();
  const auto r = run(s);
  EXPECT_EQ(count_dir(r.trace, TraceDirection::sink), 0u);
  EXPECT_EQ(compute_flr(r.trace), 1.0);
}

TEST(Simulator, SameSeedSameRun) {
  const auto s = crowded(3, true);
  const auto a = run(s);
  const auto b = run(s);
  EXPECT_EQ(format_trace(a.trace), format_trace(b.trace));
  EXPECT_EQ(a.store.export_lines(), b.store.export_lines());

  auto other = s;
  other.seed = 4;
  EXPECT_NE(format_trace(run(other).trace), format_trace(a.trace));
}

TEST(Simulator, ArrivalsFollowTransmissionsByAirtime) {
  const auto s = crowded(7, true);
  const auto r = run(s);
  std::multimap<std::pair<std::int64_t, std::string>, NodeAddress> tx_end;
  for (const auto& rec : r.trace) {
    const auto* f = rec.frame();
    if (!f) continue;
    if (rec.direction == TraceDirection::tx) {
      const SimTime end = rec.time + airtime(s.radio, frame_length(*f, s.payload_bytes));
      tx_end.emplace(std::make_pair(end.count(), f->token() + std::to_string(f->sequence)), rec.node);
    } else if (rec.direction == TraceDirection::rx || rec.direction == TraceDirection::drop ||
               rec.direction == TraceDirection::collide) {
      const auto key = std::make_pair(rec.time.count(), f->token() + std::to_string(f->sequence));
      const auto [lo, hi] = tx_end.equal_range(key);
      bool from_other = false;
      for (auto it = lo; it != hi; ++it) from_other |= it->second != rec.node;
      ASSERT_TRUE(from_other) << format_record(rec);
    }
  }
}

TEST(Simulator, TraceIsTimeOrdered) {
  const auto r = run(crowded(9, true));
  for (std::size_t i = 1; i < r.trace.size(); ++i) ASSERT_LE(r.trace[i - 1].time, r.trace[i].time);
}

TEST(Simulator, SinkRecordsMatchQueuedPayloads) {
  const auto s = crowded(11, true);
  const auto r = run(s);
  std::set<std::pair<std::uint8_t, std::uint16_t>> queued, sunk;
  for (const auto& rec : r.trace) {
    const auto* f = rec.frame();
    if (!f) continue;
    const auto key = std::make_pair(f->address.value, f->sequence);
    if (rec.direction == TraceDirection::queue) {
      EXPECT_TRUE(queued.insert(key).second);
    }
    if (rec.direction == TraceDirection::sink) {
      EXPECT_TRUE(queued.contains(key));
      EXPECT_TRUE(sunk.insert(key).second) << "published twice";
    }
  }
  EXPECT_EQ(queued.size(), s.scheduled_interrupts());
  EXPECT_EQ(sunk.size(), r.store.size());
}

TEST(Simulator, OneEventCostsItsWindows) {
  auto s = single_link(0.0, 1);
  const auto r = run(s);
  const double sleep_s = to_seconds(s.duration) - 13.0;
  const auto& sn = r.ledgers.at(1);
  EXPECT_EQ(sn.node(), NodeAddress{5});
  EXPECT_NEAR(sn.total_mj(), 2999.7 + 0.594 * sleep_s, 1e-6);

  std::vector<PowerMode> modes;
  for (const auto& rec : r.trace)
    if (rec.node == NodeAddress{5} && rec.direction == TraceDirection::power) modes.push_back(rec.mode);
  EXPECT_EQ(modes, (std::vector<PowerMode>{PowerMode::sleep, PowerMode::idle, PowerMode::active,
                                           PowerMode::sleep}));
}

TEST(Simulator, LedgerMatchesTracePowerRecords) {
  const auto s = crowded(13, true);
  const auto r = run(s);
  const auto from_trace = energy_from_trace(r.trace, s.powers, SimTime{s.duration});
  ASSERT_EQ(from_trace.size(), r.ledgers.size());
  for (const auto& l : r.ledgers) EXPECT_NEAR(from_trace.at(l.node()), l.total_mj(), 1e-6);
}

TEST(Simulator, SleepingSensorsNeitherSendNorHear) {
  const auto r = run(crowded(17, true));
  for (const auto& rec : r.trace) {
    if (rec.node == kGatewayAddress) continue;
    if (rec.direction == TraceDirection::tx || rec.direction == TraceDirection::rx) {
      ASSERT_NE(rec.mode, PowerMode::sleep) << format_record(rec);
    }
  }
}

TEST(Simulator, BackoffRecordsWithinWindow) {
  const auto r = run(crowded(19, true));
  std::size_t seen = 0;
  for (const auto& rec : r.trace)
    if (const auto* b = rec.backoff()) {
      ++seen;
      EXPECT_EQ(b->window, (RetrySchedule{8s, b->attempt, 3600s}.window()));
      EXPECT_LT(b->delay, b->window);
    }
  EXPECT_GT(seen, 0u);
}

TEST(Simulator, RetriesRecoverLosses) {
  const auto off = run(crowded(23, false));
  const auto on = run(crowded(23, true));
  EXPECT_GE(on.store.size(), off.store.size());
  EXPECT_EQ(on.store.size(), 50u);
}

TEST(Simulator, RelayCarriesTrafficAndNeverRepeatsItself) {
  const auto s = parse_scenario(R"(
[scenario]
duration = 2000
carrier_sense = all
[nodes]
gw gateway 0x00
rn relay 0xfe
sn sensor 0x05
[links]
sn gw unreachable
sn rn loss 0
rn gw loss 0
[schedule]
sn every 60 count 20 start 5
)");
  const auto r = run(s);
  EXPECT_EQ(r.store.size(), 20u);
  EXPECT_EQ(compute_flr(r.trace), 0.0);
  for (const auto& rec : r.trace) {
    if (rec.node == kRelayAddress && rec.direction == TraceDirection::tx) {
      ASSERT_TRUE(rec.frame()->relayed);
    }
  }

  auto disabled = s;
  for (auto& n : disabled.nodes)
    if (n.role == Role::relay) n.enabled = false;
  const auto dr = run(disabled);
  EXPECT_EQ(dr.store.size(), 0u);
  EXPECT_EQ(compute_flr(dr.trace), 1.0);
}

TEST(Simulator, InterruptPayload) {
  EXPECT_EQ(interrupt_payload(0x0102, 2), (Bytes{0x01, 0x02}));
  EXPECT_EQ(interrupt_payload(7, 1), (Bytes{0x07}));
  EXPECT_EQ(interrupt_payload(1, 6), (Bytes{0, 0, 0, 0, 0, 1}));
}
