#pragma once

// Scenario description and its text format. See docs/scenario-format.md for the grammar.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sparclora/channel.hpp"
#include "sparclora/error.hpp"
#include "sparclora/frame.hpp"
#include "sparclora/power.hpp"
#include "sparclora/protocol.hpp"
#include "sparclora/time.hpp"

namespace sparclora {

enum class Role { sensor, gateway, relay };

constexpr std::string_view to_string(Role r) {
  switch (r) {
    case Role::sensor: return "sensor";
    case Role::gateway: return "gateway";
    case Role::relay: return "relay";
  }
  return "?";
}

/// Which transmissions a node senses before talking: those on links declared to it, or all.
enum class CarrierSense { links, all };

struct NodeSpec {
  std::string name;
  NodeAddress address;
  Role role = Role::sensor;
  double height_m = 0.0;
  std::optional<Environment> environment;
  std::optional<double> distance_m;
  bool los = true;
  bool enabled = true;
  int line = 0;
};

struct LinkSpec {
  std::string a;
  std::string b;
  LinkProfile profile;
  int line = 0;
};

/// `count` interrupts at start, start + every, ...; each shifted by a uniform draw in [0, jitter).
struct ScheduleRule {
  std::string node;
  SimTime start{};
  std::size_t count = 1;
  Duration every{};
  Duration jitter{};
  int line = 0;

  SimTime last() const { return start + static_cast<std::int64_t>(count - 1) * every; }
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  Duration duration = 3600s;

  bool retries = true;
  Duration base_interval = kDefaultBaseInterval;
  Duration retry_cap = kRetryCap;
  std::optional<unsigned> max_retries;
  Duration idle_timeout = 60s;
  Duration wake_delay = kDefaultIdleWindow;
  Duration min_active = kDefaultActiveWindow;
  CarrierSense carrier_sense = CarrierSense::links;
  std::size_t payload_bytes = 2;

  RadioParams radio;
  ModePowers powers;

  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  std::vector<ScheduleRule> schedule;

  const NodeSpec* find(std::string_view node_name) const {
    for (const auto& n : nodes)
      if (n.name == node_name) return &n;
    return nullptr;
  }

  const NodeSpec* gateway() const {
    for (const auto& n : nodes)
      if (n.role == Role::gateway) return &n;
    return nullptr;
  }

  const LinkSpec* link_between(std::string_view a, std::string_view b) const {
    for (const auto& l : links)
      if ((l.a == a && l.b == b) || (l.a == b && l.b == a)) return &l;
    return nullptr;
  }

  std::size_t scheduled_interrupts() const {
    std::size_t n = 0;
    for (const auto& r : schedule) n += r.count;
    return n;
  }
};

/// Error with the 1-based position it refers to; line 0 means "no particular line".
class ScenarioError : public Error {
 public:
  ScenarioError(Errc code, int line, int column, const std::string& what)
      : Error(code, position(line, column) + what), line_(line), column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  static std::string position(int line, int column) {
    if (line <= 0) return {};
    std::string s = "line " + std::to_string(line);
    if (column > 0) s += ", column " + std::to_string(column);
    return s + ": ";
  }

  int line_;
  int column_;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline void validate(const Scenario& s) {
  const auto fail = [](int line, const std::string& what) {
    throw ScenarioError(Errc::invalid_scenario, line, 0, what);
  };
  if (s.duration <= Duration::zero()) fail(0, "duration must be positive");
  if (s.payload_bytes < 1 || s.payload_bytes > kMaxPayload)
    fail(0, "payload_bytes must be in [1, 248]");
  try {
    s.radio.validate();
  } catch (const Error& e) {
    fail(0, e.what());
  }

  std::size_t gateways = 0;
  std::size_t relays = 0;
  std::set<std::string> names;
  std::set<NodeAddress> addresses;
  for (const auto& n : s.nodes) {
    if (!names.insert(n.name).second) fail(n.line, "duplicate node name '" + n.name + "'");
    if (!addresses.insert(n.address).second)
      fail(n.line, "duplicate address 0x" + to_hex(n.address));
    switch (n.role) {
      case Role::gateway:
        ++gateways;
        if (!n.address.is_gateway()) fail(n.line, "gateway must use address 0x00");
        break;
      case Role::relay:
        ++relays;
        if (!n.address.is_relay()) fail(n.line, "relay must use address 0xfe");
        break;
      case Role::sensor:
        if (!n.address.is_sensor()) fail(n.line, "sensor address must be in 0x01..0xfd");
        break;
    }
  }
  if (gateways == 0) fail(0, "no gateway declared");
  if (gateways > 1) fail(0, "more than one gateway declared");
  if (relays > 1) fail(0, "more than one relay declared");

  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& l : s.links) {
    if (!s.find(l.a)) fail(l.line, "link references unknown node '" + l.a + "'");
    if (!s.find(l.b)) fail(l.line, "link references unknown node '" + l.b + "'");
    if (l.a == l.b) fail(l.line, "link from '" + l.a + "' to itself");
    if (!pairs.insert(std::minmax(l.a, l.b)).second)
      fail(l.line, "duplicate link " + l.a + " - " + l.b);
  }
  for (const auto& n : s.nodes) {
    if (n.role != Role::sensor) continue;
    const bool linked = std::any_of(s.links.begin(), s.links.end(), [&](const LinkSpec& l) {
      return l.a == n.name || l.b == n.name;
    });
    if (!linked) fail(n.line, "sensor '" + n.name + "' has no links");
  }

  for (const auto& r : s.schedule) {
    const auto* n = s.find(r.node);
    if (!n) {
      fail(r.line, "schedule references unknown node '" + r.node + "'");
      continue;
    }
    if (n->role != Role::sensor) fail(r.line, "schedule target '" + r.node + "' is not a sensor");
    if (r.count == 0) fail(r.line, "count must be at least 1");
    if (r.count > 1 && r.every <= Duration::zero()) fail(r.line, "every must be positive");
    if (r.last() + r.jitter > s.duration || r.last() >= s.duration)
      fail(r.line, "schedule extends past the scenario duration");
  }
}

/// Measurement row a sensor node's results are reported under: the profile of its gateway
/// link when that link names one, else the node's own environment/distance attributes.
inline std::optional<ProfileKey> cell_of(const Scenario& s, const NodeSpec& sensor) {
  const auto* gw = s.gateway();
  if (!gw) return std::nullopt;
  if (const auto* l = s.link_between(sensor.name, gw->name); l && l->profile.key)
    return l->profile.key;
  if (!sensor.environment || !sensor.distance_m) return std::nullopt;
  bool via_relay = false;
  for (const auto& n : s.nodes)
    if (n.role == Role::relay && s.link_between(sensor.name, n.name)) via_relay = true;
  return ProfileKey{*sensor.environment, *sensor.distance_m, sensor.height_m, gw->height_m,
                    sensor.los, via_relay ? PathKind::via_relay : PathKind::direct};
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace detail {

struct Token {
  std::string_view text;
  int column = 0;
};

class ScenarioParser {
 public:
  explicit ScenarioParser(std::string_view text) : text_(text) {}

  Scenario parse() {
    std::size_t pos = 0;
    while (pos <= text_.size()) {
      auto nl = text_.find('\n', pos);
      if (nl == std::string_view::npos) nl = text_.size();
      ++line_;
      parse_line(text_.substr(pos, nl - pos));
      pos = nl + 1;
    }
    return std::move(s_);
  }

 private:
  enum class Section { none, scenario, radio, power, nodes, links, schedule };

  [[noreturn]] void fail(int column, const std::string& what) const {
    throw ScenarioError(Errc::parse_error, line_, column, what);
  }
  [[noreturn]] void invalid(int column, const std::string& what) const {
    throw ScenarioError(Errc::invalid_scenario, line_, column, what);
  }

  std::vector<Token> tokenize(std::string_view line) const {
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
      const unsigned char c = static_cast<unsigned char>(line[i]);
      if (c == ' ' || c == '\t' || c == '\r') {
        ++i;
        continue;
      }
      if (c < 0x20 || c >= 0x7f) fail(static_cast<int>(i) + 1, "unexpected character");
      if (c == '=') {
        out.push_back({line.substr(i, 1), static_cast<int>(i) + 1});
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r' &&
             line[j] != '=')
        ++j;
      out.push_back({line.substr(i, j - i), static_cast<int>(i) + 1});
      i = j;
    }
    return out;
  }

  void parse_line(std::string_view line) {
    auto tokens = tokenize(line);
    if (tokens.empty()) return;
    if (tokens[0].text.front() == '[') {
      if (tokens.size() != 1 || tokens[0].text.back() != ']')
        fail(tokens[0].column, "malformed section header");
      section_header(tokens[0]);
      return;
    }
    switch (section_) {
      case Section::none: fail(tokens[0].column, "entry before any section header");
      case Section::scenario:
      case Section::radio:
      case Section::power: key_value(tokens); break;
      case Section::nodes: node_line(tokens); break;
      case Section::links: link_line(tokens); break;
      case Section::schedule: schedule_line(tokens); break;
    }
  }

  void section_header(const Token& t) {
    const auto name = t.text.substr(1, t.text.size() - 2);
    static const std::map<std::string_view, Section> sections{
        {"scenario", Section::scenario}, {"radio", Section::radio},
        {"power", Section::power},       {"nodes", Section::nodes},
        {"links", Section::links},       {"schedule", Section::schedule}};
    auto it = sections.find(name);
    if (it == sections.end()) fail(t.column, "unknown section '" + std::string(name) + "'");
    if (!seen_sections_.insert(it->second).second)
      fail(t.column, "section '" + std::string(name) + "' appears twice");
    section_ = it->second;
  }

  // ---- scalar parsing ----

  double number(const Token& t) const {
    double v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc{} || p != t.text.data() + t.text.size() || !std::isfinite(v))
      fail(t.column, "expected a number, got '" + std::string(t.text) + "'");
    return v;
  }

  double non_negative(const Token& t) const {
    const double v = number(t);
    if (v < 0) fail(t.column, "value must not be negative");
    return v;
  }

  std::uint64_t integer(const Token& t) const {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc{} || p != t.text.data() + t.text.size())
      fail(t.column, "expected an unsigned integer, got '" + std::string(t.text) + "'");
    return v;
  }

  Duration seconds(const Token& t) const { return from_seconds(non_negative(t)); }

  bool on_off(const Token& t) const {
    if (t.text == "on" || t.text == "yes") return true;
    if (t.text == "off" || t.text == "no") return false;
    fail(t.column, "expected on/off, got '" + std::string(t.text) + "'");
  }

  NodeAddress address(const Token& t) const {
    if (!t.text.starts_with("0x") || t.text.size() < 3 || t.text.size() > 4)
      fail(t.column, "address must be hex like 0x05");
    std::uint8_t v = 0;
    const auto digits = t.text.substr(2);
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v, 16);
    if (ec != std::errc{} || p != digits.data() + digits.size())
      fail(t.column, "address must be hex like 0x05");
    return NodeAddress{v};
  }

  Environment environment(const Token& t) const {
    auto e = environment_from_string(t.text);
    if (!e) fail(t.column, "unknown environment '" + std::string(t.text) + "'");
    return *e;
  }

  static bool is_name(std::string_view s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_'))
      return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
  }

  // ---- sections ----

  void key_value(const std::vector<Token>& t) {
    if (t.size() < 2 || t[1].text != "=") fail(t[0].column, "expected 'key = value'");
    if (t.size() != 3) fail(t.size() == 2 ? t[1].column + 1 : t[3].column, "expected one value");
    const auto& key = t[0];
    const auto& val = t[2];
    const std::string full = std::to_string(static_cast<int>(section_)) + std::string(key.text);
    if (!seen_keys_.insert(full).second)
      fail(key.column, "key '" + std::string(key.text) + "' set twice");

    const auto k = key.text;
    auto& s = s_;
    if (section_ == Section::scenario) {
      if (k == "name") {
        if (!is_name(val.text)) fail(val.column, "bad scenario name");
        s.name = std::string(val.text);
      } else if (k == "seed") {
        s.seed = integer(val);
      } else if (k == "duration") {
        s.duration = seconds(val);
      } else if (k == "retries") {
        s.retries = on_off(val);
      } else if (k == "base_interval") {
        s.base_interval = seconds(val);
      } else if (k == "retry_cap") {
        s.retry_cap = seconds(val);
      } else if (k == "max_retries") {
        if (val.text == "none")
          s.max_retries.reset();
        else
          s.max_retries = static_cast<unsigned>(integer(val));
      } else if (k == "idle_timeout") {
        s.idle_timeout = seconds(val);
      } else if (k == "wake_delay") {
        s.wake_delay = seconds(val);
      } else if (k == "min_active") {
        s.min_active = seconds(val);
      } else if (k == "carrier_sense") {
        if (val.text == "links")
          s.carrier_sense = CarrierSense::links;
        else if (val.text == "all")
          s.carrier_sense = CarrierSense::all;
        else
          fail(val.column, "carrier_sense must be 'links' or 'all'");
      } else if (k == "payload_bytes") {
        s.payload_bytes = integer(val);
      } else {
        fail(key.column, "unknown key '" + std::string(k) + "' in [scenario]");
      }
    } else if (section_ == Section::radio) {
      if (k == "spreading_factor") {
        s.radio.spreading_factor = static_cast<int>(integer(val));
      } else if (k == "coding_rate") {
        if (val.text.size() != 3 || !val.text.starts_with("4/") || val.text[2] < '5' ||
            val.text[2] > '8')
          fail(val.column, "coding_rate must be one of 4/5, 4/6, 4/7, 4/8");
        s.radio.coding_rate_denominator = val.text[2] - '0';
      } else if (k == "bandwidth_hz") {
        s.radio.bandwidth_hz = static_cast<std::int64_t>(integer(val));
      } else if (k == "preamble_symbols") {
        s.radio.preamble_symbols = static_cast<int>(integer(val));
      } else if (k == "explicit_header") {
        s.radio.explicit_header = on_off(val);
      } else if (k == "crc") {
        s.radio.crc = on_off(val);
      } else if (k == "header_overhead") {
        s.radio.header_overhead_bytes = static_cast<int>(integer(val));
      } else {
        fail(key.column, "unknown key '" + std::string(k) + "' in [radio]");
      }
    } else {
      if (k == "sleep_mw")
        s.powers.sleep_mw = non_negative(val);
      else if (k == "idle_mw")
        s.powers.idle_mw = non_negative(val);
      else if (k == "active_mw")
        s.powers.active_mw = non_negative(val);
      else
        fail(key.column, "unknown key '" + std::string(k) + "' in [power]");
    }
  }

  // <name> <role> <address> [height=<m>] [env=<e>] [distance=<m>] [los=yes|no] [enabled=yes|no]
  void node_line(const std::vector<Token>& t) {
    if (t.size() < 3) fail(t[0].column, "expected '<name> <role> <address> [attr=value ...]'");
    NodeSpec n;
    n.line = line_;
    if (!is_name(t[0].text)) fail(t[0].column, "bad node name '" + std::string(t[0].text) + "'");
    n.name = std::string(t[0].text);
    if (t[1].text == "sensor")
      n.role = Role::sensor;
    else if (t[1].text == "gateway")
      n.role = Role::gateway;
    else if (t[1].text == "relay")
      n.role = Role::relay;
    else
      fail(t[1].column, "role must be sensor, gateway or relay");
    n.address = address(t[2]);

    std::set<std::string_view> attrs;
    for (std::size_t i = 3; i < t.size(); i += 3) {
      if (i + 2 >= t.size() || t[i + 1].text != "=")
        fail(t[i].column, "expected 'attr=value'");
      const auto& key = t[i];
      const auto& val = t[i + 2];
      if (!attrs.insert(key.text).second)
        fail(key.column, "attribute '" + std::string(key.text) + "' set twice");
      if (key.text == "height")
        n.height_m = non_negative(val);
      else if (key.text == "env")
        n.environment = environment(val);
      else if (key.text == "distance")
        n.distance_m = non_negative(val);
      else if (key.text == "los")
        n.los = on_off(val);
      else if (key.text == "enabled")
        n.enabled = on_off(val);
      else
        fail(key.column, "unknown node attribute '" + std::string(key.text) + "'");
    }
    s_.nodes.push_back(std::move(n));
  }

  // <a> <b> loss <p>
  // <a> <b> unreachable
  // <a> <b> profile <env> <distance> <sn_height> <gw_height> [nlos] [via_relay]
  void link_line(const std::vector<Token>& t) {
    if (t.size() < 3) fail(t[0].column, "expected '<a> <b> loss|unreachable|profile ...'");
    LinkSpec l;
    l.line = line_;
    l.a = std::string(t[0].text);
    l.b = std::string(t[1].text);
    const auto& kind = t[2];
    if (kind.text == "loss") {
      if (t.size() != 4) fail(kind.column, "expected 'loss <probability>'");
      const double p = number(t[3]);
      if (!(p >= 0 && p <= 1)) invalid(t[3].column, "loss probability must lie in [0,1]");
      l.profile = LinkProfile::with_loss(p);
    } else if (kind.text == "unreachable") {
      if (t.size() != 3) fail(t[3].column, "unexpected token after 'unreachable'");
      l.profile = LinkProfile::unreachable();
    } else if (kind.text == "profile") {
      if (t.size() < 7 || t.size() > 9)
        fail(kind.column, "expected 'profile <env> <distance> <sn_height> <gw_height> [nlos] [via_relay]'");
      ProfileKey key{environment(t[3]), non_negative(t[4]), non_negative(t[5]),
                     non_negative(t[6]), true, PathKind::direct};
      for (std::size_t i = 7; i < t.size(); ++i) {
        if (t[i].text == "nlos" && key.los)
          key.los = false;
        else if (t[i].text == "via_relay" && key.path == PathKind::direct)
          key.path = PathKind::via_relay;
        else
          fail(t[i].column, "unexpected '" + std::string(t[i].text) + "'");
      }
      auto row = find_builtin_profile(key);
      if (!row) invalid(kind.column, "no measured profile matches this row");
      l.profile = *row;
    } else {
      fail(kind.column, "link kind must be loss, unreachable or profile");
    }
    s_.links.push_back(std::move(l));
  }

  // <node> at <t>
  // <node> every <interval> count <n> [start <t>] [jitter <j>]
  void schedule_line(const std::vector<Token>& t) {
    if (t.size() < 3) fail(t[0].column, "expected '<node> at <t>' or '<node> every ...'");
    ScheduleRule r;
    r.line = line_;
    r.node = std::string(t[0].text);
    if (t[1].text == "at") {
      if (t.size() != 3) fail(t[3].column, "unexpected token after time");
      r.start = seconds(t[2]);
    } else if (t[1].text == "every") {
      r.every = seconds(t[2]);
      bool have_count = false;
      std::set<std::string_view> keys;
      for (std::size_t i = 3; i < t.size(); i += 2) {
        if (i + 1 >= t.size()) fail(t[i].column, "missing value");
        if (!keys.insert(t[i].text).second)
          fail(t[i].column, "'" + std::string(t[i].text) + "' given twice");
        if (t[i].text == "count") {
          r.count = integer(t[i + 1]);
          have_count = true;
        } else if (t[i].text == "start") {
          r.start = seconds(t[i + 1]);
        } else if (t[i].text == "jitter") {
          r.jitter = seconds(t[i + 1]);
        } else {
          fail(t[i].column, "expected count, start or jitter");
        }
      }
      if (!have_count) fail(t[1].column, "'every' needs 'count <n>'");
    } else {
      fail(t[1].column, "expected 'at' or 'every'");
    }
    s_.schedule.push_back(std::move(r));
  }

  std::string_view text_;
  int line_ = 0;
  Section section_ = Section::none;
  std::set<Section> seen_sections_;
  std::set<std::string> seen_keys_;
  Scenario s_;
};

}  // namespace detail

/// Parses and validates. Syntax problems raise parse_error, semantic ones invalid_scenario;
/// both as ScenarioError carrying the offending line.
inline Scenario parse_scenario(std::string_view text) {
  Scenario s = detail::ScenarioParser(text).parse();
  validate(s);
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_artifact, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace sparclora
