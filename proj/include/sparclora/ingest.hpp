#pragma once

// In-process stand-in for the gateway's publish -> broker -> database path.
// Export lines follow the InfluxDB line protocol shape:
//
//   <topic>,node=<addr_hex> value=<payload_hex> <time_microseconds>

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sparclora/error.hpp"
#include "sparclora/frame.hpp"
#include "sparclora/time.hpp"

namespace sparclora {

struct MeasurementRecord {
  NodeAddress node;
  std::uint16_t sequence = 0;
  SimTime time{};
  Bytes payload;
  std::string topic;

  friend bool operator==(const MeasurementRecord&, const MeasurementRecord&) = default;
};

/// One series per sensor: "gas/<addr_hex>".
inline std::string default_topic(NodeAddress node) { return "gas/" + to_hex(node); }

struct SeriesPoint {
  SimTime time{};
  Bytes payload;

  friend bool operator==(const SeriesPoint&, const SeriesPoint&) = default;
};

class TimeSeriesStore {
 public:
  /// Appends the record to its series. Returns false, leaving the store unchanged, when
  /// (node, sequence) was already published.
  bool publish(const MeasurementRecord& record) {
    if (record.topic.empty()) throw Error(Errc::invalid_record, "empty topic");
    if (record.topic.find_first_of(", \n") != std::string::npos)
      throw Error(Errc::invalid_record, "topic must not contain ',', ' ' or newline");
    const auto id = std::make_pair(record.node.value, record.sequence);
    if (seen_.contains(id)) return false;

    auto& series = series_[SeriesKey{record.topic, record.node.value}];
    if (!series.empty() && record.time <= series.back().time)
      throw Error(Errc::timestamp_regression,
                  record.topic + " node " + to_hex(record.node) + " at " +
                      format_seconds(record.time) + " after " + format_seconds(series.back().time));
    series.push_back({record.time, record.payload});
    seen_.insert(id);
    ++size_;
    return true;
  }

  /// Points with t0 <= t < t1, time-ordered. Unknown series yield an empty list.
  std::vector<SeriesPoint> query(const std::string& topic, NodeAddress node, SimTime t0,
                                 SimTime t1) const {
    std::vector<SeriesPoint> out;
    auto it = series_.find(SeriesKey{topic, node.value});
    if (it == series_.end() || t1 <= t0) return out;
    const auto& pts = it->second;
    auto lo = std::lower_bound(pts.begin(), pts.end(), t0,
                               [](const SeriesPoint& p, SimTime t) { return p.time < t; });
    auto hi = std::lower_bound(lo, pts.end(), t1,
                               [](const SeriesPoint& p, SimTime t) { return p.time < t; });
    out.assign(lo, hi);
    return out;
  }

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  /// (topic, node) of every series, in key order.
  std::vector<std::pair<std::string, NodeAddress>> series_keys() const {
    std::vector<std::pair<std::string, NodeAddress>> keys;
    for (const auto& [k, _] : series_) keys.emplace_back(k.topic, NodeAddress{k.node});
    return keys;
  }

  /// One line per point, sorted by time then node; each line ends in '\n'.
  std::string export_lines() const {
    struct Line {
      SimTime time;
      std::uint8_t node;
      const std::string* topic;
      const Bytes* payload;
    };
    std::vector<Line> lines;
    lines.reserve(size_);
    for (const auto& [key, points] : series_)
      for (const auto& p : points) lines.push_back({p.time, key.node, &key.topic, &p.payload});
    std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
      return std::tie(a.time, a.node, *a.topic) < std::tie(b.time, b.node, *b.topic);
    });

    std::string out;
    for (const auto& l : lines) {
      out += *l.topic;
      out += ",node=";
      out += to_hex(NodeAddress{l.node});
      out += " value=";
      out += to_hex(*l.payload);
      out += ' ';
      out += std::to_string(l.time.count());
      out += '\n';
    }
    return out;
  }

  friend bool operator==(const TimeSeriesStore& a, const TimeSeriesStore& b) {
    return a.series_ == b.series_;
  }

 private:
  struct SeriesKey {
    std::string topic;
    std::uint8_t node;
    friend auto operator<=>(const SeriesKey&, const SeriesKey&) = default;
  };

  std::map<SeriesKey, std::vector<SeriesPoint>> series_;
  std::set<std::pair<std::uint8_t, std::uint16_t>> seen_;
  std::size_t size_ = 0;
};

}  // namespace sparclora
