#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "sparclora/ingest.hpp"

using namespace sparclora;

namespace {

MeasurementRecord record(std::uint8_t node, std::uint16_t seq, std::int64_t t_us, Bytes payload,
                         std::string topic = {}) {
  NodeAddress a{node};
  return {a, seq, SimTime{t_us}, std::move(payload), topic.empty() ? default_topic(a) : topic};
}

// Independent reader for the export format: topic,node=hh value=hex time_us
TimeSeriesStore parse_export(const std::string& text) {
  TimeSeriesStore store;
  std::istringstream in(text);
  std::uint16_t seq = 0;
  for (std::string line; std::getline(in, line);) {
    const auto comma = line.find(",node=");
    const auto value = line.find(" value=");
    const auto time = line.rfind(' ');
    const std::string topic = line.substr(0, comma);
    const auto node = static_cast<std::uint8_t>(std::stoul(line.substr(comma + 6, 2), nullptr, 16));
    const std::string hex = line.substr(value + 7, time - value - 7);
    Bytes payload;
    for (std::size_t i = 0; i < hex.size(); i += 2)
      payload.push_back(static_cast<std::uint8_t>(std::stoul(hex.substr(i, 2), nullptr, 16)));
    // Sequence numbers are not exported; any distinct value keeps the store semantics.
    store.publish({NodeAddress{node}, seq++, SimTime{std::stoll(line.substr(time + 1))}, payload,
                   topic});
  }
  return store;
}

}  // namespace

TEST(Store, PublishThenQuery) {
  TimeSeriesStore store;
  EXPECT_TRUE(store.publish(record(5, 1, 1'000'000, {0xAB})));
  const auto pts = store.query("gas/05", NodeAddress{5}, SimTime{0}, SimTime{10s});
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0].payload, Bytes{0xAB});
}

TEST(Store, DuplicateIgnored) {
  TimeSeriesStore store;
  store.publish(record(5, 1, 1'000'000, {0xAB}));
  const auto before = store;
  EXPECT_FALSE(store.publish(record(5, 1, 2'000'000, {0xCD})));
  EXPECT_EQ(store, before);
  EXPECT_EQ(store.size(), 1u);
}

TEST(Store, CountsDistinctRecords) {
  TimeSeriesStore store;
  for (int i = 0; i < 600; ++i)
    store.publish(record(static_cast<std::uint8_t>(1 + i % 3), static_cast<std::uint16_t>(i),
                         1'000 * (i + 1), {static_cast<std::uint8_t>(i)}));
  EXPECT_EQ(store.size(), 600u);
}

TEST(Store, TimestampRegression) {
  TimeSeriesStore store;
  store.publish(record(5, 1, 2'000'000, {1}));
  try {
    store.publish(record(5, 2, 2'000'000, {2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::timestamp_regression);
  }
  // Other series are independent.
  EXPECT_TRUE(store.publish(record(6, 1, 1'000'000, {3})));
}

TEST(Store, InvalidTopics) {
  TimeSeriesStore store;
  EXPECT_THROW(store.publish(record(5, 1, 1, {1}, "a b")), Error);
  EXPECT_THROW(store.publish(record(5, 1, 1, {1}, "a,b")), Error);
}

TEST(Store, QueryEdges) {
  TimeSeriesStore store;
  for (int i = 0; i < 10; ++i) store.publish(record(5, static_cast<std::uint16_t>(i), i * 10, {1}));
  EXPECT_TRUE(store.query("gas/05", NodeAddress{5}, SimTime{30}, SimTime{30}).empty());
  EXPECT_TRUE(store.query("gas/07", NodeAddress{7}, SimTime{0}, SimTime{1000}).empty());
  EXPECT_EQ(store.query("gas/05", NodeAddress{5}, SimTime{0}, SimTime{1000}).size(), 10u);
  EXPECT_EQ(store.query("gas/05", NodeAddress{5}, SimTime{20}, SimTime{50}).size(), 3u);
}

TEST(Store, HalfRangePartition) {
  std::mt19937_64 gen(17);
  TimeSeriesStore store;
  std::int64_t t = 0;
  for (int i = 0; i < 500; ++i) {
    t += 1 + static_cast<std::int64_t>(gen() % 1000);
    store.publish(record(9, static_cast<std::uint16_t>(i), t, {2}));
  }
  for (int k = 0; k < 200; ++k) {
    std::int64_t a = static_cast<std::int64_t>(gen() % (t + 10));
    std::int64_t b = static_cast<std::int64_t>(gen() % (t + 10));
    if (a > b) std::swap(a, b);
    const std::int64_t m = a + (b - a) / 2;
    const NodeAddress n{9};
    const auto whole = store.query("gas/09", n, SimTime{a}, SimTime{b}).size();
    const auto lo = store.query("gas/09", n, SimTime{a}, SimTime{m}).size();
    const auto hi = store.query("gas/09", n, SimTime{m}, SimTime{b}).size();
    ASSERT_EQ(lo + hi, whole);
  }
}

TEST(Export, EmptyAndSingle) {
  TimeSeriesStore store;
  EXPECT_EQ(store.export_lines(), "");
  store.publish(record(5, 0, 1'500'000, {0xAB}, "gas"));
  EXPECT_EQ(store.export_lines(), "gas,node=05 value=ab 1500000\n");
  EXPECT_EQ(store.export_lines(), store.export_lines());
}

TEST(Export, SortedByTimeThenNode) {
  TimeSeriesStore store;
  store.publish(record(7, 0, 200, {1}));
  store.publish(record(5, 0, 200, {2}));
  store.publish(record(6, 0, 100, {3}));
  EXPECT_EQ(store.export_lines(),
            "gas/06,node=06 value=03 100\n"
            "gas/05,node=05 value=02 200\n"
            "gas/07,node=07 value=01 200\n");
}

TEST(Export, RoundTrip) {
  std::mt19937_64 gen(3);
  TimeSeriesStore store;
  std::int64_t t = 0;
  for (int i = 0; i < 300; ++i) {
    t += 1 + static_cast<std::int64_t>(gen() % 5000);
    Bytes p(1 + gen() % 4);
    for (auto& x : p) x = static_cast<std::uint8_t>(gen());
    store.publish(record(static_cast<std::uint8_t>(1 + gen() % 5), static_cast<std::uint16_t>(i), t, p));
  }
  const auto rebuilt = parse_export(store.export_lines());
  EXPECT_EQ(rebuilt, store);
  EXPECT_EQ(rebuilt.export_lines(), store.export_lines());
}

TEST(Export, EveryLineReachableByQuery) {
  TimeSeriesStore store;
  for (int i = 0; i < 50; ++i)
    store.publish(record(static_cast<std::uint8_t>(1 + i % 4), static_cast<std::uint16_t>(i), i * 1000, {1}));
  std::size_t via_query = 0;
  for (const auto& [topic, node] : store.series_keys())
    via_query += store.query(topic, node, SimTime{0}, SimTime{1'000'000}).size();
  std::size_t lines = 0;
  for (char c : store.export_lines()) lines += c == '\n';
  EXPECT_EQ(via_query, lines);
  EXPECT_EQ(lines, store.size());
}

TEST(Store, IdempotentUnderRepetition) {
  std::mt19937_64 gen(8);
  std::vector<MeasurementRecord> distinct;
  for (int i = 0; i < 100; ++i)
    distinct.push_back(record(static_cast<std::uint8_t>(1 + i % 3), static_cast<std::uint16_t>(i), (i + 1) * 100, {1}));
  TimeSeriesStore once, many;
  for (const auto& r : distinct) once.publish(r);
  for (const auto& r : distinct) {
    many.publish(r);
    for (std::uint64_t k = gen() % 3; k > 0; --k) many.publish(r);
  }
  EXPECT_EQ(once, many);
}
