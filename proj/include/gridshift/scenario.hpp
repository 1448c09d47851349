#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gridshift/channel.hpp"
#include "gridshift/comm_graph.hpp"
#include "gridshift/control.hpp"

namespace gridshift {

enum class EventKind { Blackout, SecondaryOn, LoadStep, Plug, Unplug };

inline const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::Blackout: return "blackout";
    case EventKind::SecondaryOn: return "secondary_on";
    case EventKind::LoadStep: return "load_step";
    case EventKind::Plug: return "plug";
    case EventKind::Unplug: return "unplug";
  }
  return "?";
}

struct ScenarioEvent {
  double time_s = 0.0;
  EventKind kind = EventKind::Blackout;
  int region = -1;      // LoadStep / Plug
  double dp_w = 0.0;    // LoadStep
  int mobile_id = -1;   // Plug / Unplug: external DG id of the mobile unit
  NodeId host_dg = -1;  // Plug: external DG id of the host
  DgUnit mobile{};      // Plug payload
  GeoLocation mobile_loc{};
  double init_xp = 0.0;
  double init_omega_dev = 0.0;
  double init_u_dev = 0.0;
  double k_omega = -1.0;  // negative = use scenario defaults
  double k_p = -1.0;
  double k_u = -1.0;
};

struct RegionConfig {
  int id = 0;
  std::vector<DgUnit> dgs;
  std::vector<GeoLocation> locations;
  std::vector<double> p_max_mw;  // per DG
  std::vector<double> p_cst_mw;
  double load_w = 0.0;
  double init_omega_dev = 0.0;
  double init_u_dev = 0.0;
  std::vector<double> init_xp;           // per DG; empty = zeros
  std::vector<double> init_omega_n_dev;  // droop set-point offsets; empty = zeros
  std::vector<double> k_omega;           // resolved to one entry per DG
  std::vector<double> k_p;
  std::vector<double> k_u;

  int index_of_dg(int dg_id) const {
    for (std::size_t i = 0; i < dgs.size(); ++i)
      if (dgs[i].id == dg_id) return static_cast<int>(i);
    return -1;
  }
};

struct Scenario {
  ChannelParams channel;
  std::vector<RegionConfig> regions;  // ordered by region id
  std::vector<ScenarioEvent> events;  // sorted by time, stable
  PlantMode plant = PlantMode::Integrator;
  double omega_ref = 2.0 * std::numbers::pi * 50.0;
  double u_ref = 311.0;
  double ts_grid_s = 0.01;
  double ts_safety = 1.0;
  double duration_s = 10.0;
  long record_stride = 1;
  double default_k_omega = 1.0;  // applied to regions without overrides and to
  double default_k_p = 0.4;      // plugged mobiles without explicit gains
  double default_k_u = 1.0;
  std::string name;
};

struct Diagnostic {
  std::string code;
  std::string message;
};

class ScenarioValidationError : public std::runtime_error {
 public:
  explicit ScenarioValidationError(std::vector<Diagnostic> diags)
      : std::runtime_error(join(diags)), diags_(std::move(diags)) {}
  const std::vector<Diagnostic>& diagnostics() const { return diags_; }

 private:
  static std::string join(const std::vector<Diagnostic>& diags) {
    std::string out = "scenario invalid:";
    for (const auto& d : diags) out += " [" + d.code + "] " + d.message + ";";
    return out;
  }
  std::vector<Diagnostic> diags_;
};

// ---------------------------------------------------------------------------
// Validation: machine-readable diagnostics, never exceptions. An empty list
// means the scenario is runnable. Gain-criteria violations are deliberately
// not diagnosed here; unstable runs are legitimate experiments.
inline std::vector<Diagnostic> validate(const Scenario& sc) {
  std::vector<Diagnostic> out;
  const auto add = [&](const char* code, std::string msg) {
    out.push_back({code, std::move(msg)});
  };

  try {
    sc.channel.validate();
  } catch (const std::exception& e) {
    add("E_CHAN", e.what());
  }

  for (std::size_t i = 0; i + 1 < sc.regions.size(); ++i)
    if (sc.regions[i].id == sc.regions[i + 1].id)  // regions are sorted by id
      add("E_REGION", "duplicate region id " + std::to_string(sc.regions[i].id));

  std::vector<int> all_dg_ids;
  for (const auto& region : sc.regions) {
    const std::string rname = "region " + std::to_string(region.id);
    const std::size_t n = region.dgs.size();
    if (n < 2) add("E_REGION", rname + ": needs at least 2 DGs");
    if (region.locations.size() != n || region.p_max_mw.size() != n ||
        region.p_cst_mw.size() != n) {
      add("E_REGION", rname + ": per-DG arrays inconsistent");
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& dg = region.dgs[i];
      if (!(dg.m_p > 0) || !(dg.p_max_w > 0))
        add("E_DG", rname + ": DG " + std::to_string(dg.id) + " needs positive droop and rating");
      if (!(region.p_cst_mw[i] < region.p_max_mw[i]))
        add("E_DG", rname + ": DG " + std::to_string(dg.id) + " budget cannot cover circuit power");
      if (!std::isfinite(region.locations[i].x_km) || !std::isfinite(region.locations[i].y_km))
        add("E_LOC", rname + ": DG " + std::to_string(dg.id) + " has non-finite location");
      all_dg_ids.push_back(dg.id);
      for (std::size_t j = i + 1; j < n; ++j) {
        if (region.locations[i].x_km == region.locations[j].x_km &&
            region.locations[i].y_km == region.locations[j].y_km)
          add("E_LOC", rname + ": duplicate DG locations");
      }
    }
    if (n >= 2) {
      const double ref_product = region.dgs[0].m_p * region.dgs[0].p_max_w;
      for (std::size_t i = 1; i < n; ++i) {
        const double product = region.dgs[i].m_p * region.dgs[i].p_max_w;
        if (std::abs(product - ref_product) > 1e-9 * std::abs(ref_product))
          add("E_RATING", rname + ": m_P * P_max differs across DGs");
      }
    }
    if (region.k_omega.size() != n || region.k_p.size() != n || region.k_u.size() != n)
      add("E_GAIN", rname + ": gain vectors not sized to DG count");
    for (double k : region.k_omega)
      if (k < 0) add("E_GAIN", rname + ": negative K_omega");
    for (double k : region.k_p)
      if (k < 0) add("E_GAIN", rname + ": negative K_P");
    for (double k : region.k_u)
      if (k < 0) add("E_GAIN", rname + ": negative K_U");
    if (!region.init_xp.empty() && region.init_xp.size() != n)
      add("E_INIT", rname + ": init_xp must list one value per DG");
    if (!region.init_omega_n_dev.empty() && region.init_omega_n_dev.size() != n)
      add("E_INIT", rname + ": init_omega_n_dev must list one value per DG");
  }
  std::sort(all_dg_ids.begin(), all_dg_ids.end());
  if (std::adjacent_find(all_dg_ids.begin(), all_dg_ids.end()) != all_dg_ids.end())
    add("E_DG", "duplicate DG ids across the scenario");

  const auto region_by_id = [&](int id) -> const RegionConfig* {
    for (const auto& r : sc.regions)
      if (r.id == id) return &r;
    return nullptr;
  };

  double blackout_t = -1.0;
  int blackout_count = 0;
  int secondary_count = 0;
  // region id -> currently plugged mobile id (-1 when none), plus the single
  // mobile identity a region ever hosts
  std::vector<std::pair<int, int>> plugged;    // region id, mobile id
  std::vector<std::pair<int, int>> region_mobile;

  for (const auto& ev : sc.events) {
    if (ev.time_s < 0) add("E_TIME", std::string(event_kind_name(ev.kind)) + ": negative time");
    switch (ev.kind) {
      case EventKind::Blackout:
        ++blackout_count;
        blackout_t = ev.time_s;
        break;
      case EventKind::SecondaryOn:
        ++secondary_count;
        if (blackout_count == 0)
          add("E_ORDER", "secondary_on requires a preceding blackout");
        else if (ev.time_s < blackout_t)
          add("E_ORDER", "secondary_on precedes the blackout");
        break;
      case EventKind::LoadStep:
        if (region_by_id(ev.region) == nullptr)
          add("E_REF", "load_step references unknown region " + std::to_string(ev.region));
        break;
      case EventKind::Plug: {
        if (blackout_count == 0 || ev.time_s < blackout_t)
          add("E_ORDER", "plug precedes the blackout");
        const RegionConfig* region = region_by_id(ev.region);
        if (region == nullptr) {
          add("E_REF", "plug references unknown region " + std::to_string(ev.region));
          break;
        }
        if (region->index_of_dg(ev.host_dg) < 0)
          add("E_REF", "plug host DG " + std::to_string(ev.host_dg) + " not in region " +
                           std::to_string(ev.region));
        if (std::binary_search(all_dg_ids.begin(), all_dg_ids.end(), ev.mobile_id))
          add("E_REF", "plug mobile id " + std::to_string(ev.mobile_id) + " clashes with a fixed DG");
        if (!(ev.mobile.m_p > 0) || !(ev.mobile.p_max_w > 0))
          add("E_DG", "plug mobile needs positive droop and rating");
        for (const auto& [rid, mid] : plugged)
          if (rid == ev.region)
            add("E_PLUG", "plug while mobile " + std::to_string(mid) + " is still attached");
        bool known_identity = false;
        for (const auto& [rid, mid] : region_mobile) {
          if (rid == ev.region) {
            known_identity = true;
            if (mid != ev.mobile_id)
              add("E_PLUG", "region " + std::to_string(ev.region) +
                                ": only one mobile identity per region is supported");
          } else if (mid == ev.mobile_id) {
            add("E_PLUG", "mobile id " + std::to_string(ev.mobile_id) +
                              " is already bound to region " + std::to_string(rid));
          }
        }
        if (!known_identity) region_mobile.emplace_back(ev.region, ev.mobile_id);
        plugged.emplace_back(ev.region, ev.mobile_id);
        break;
      }
      case EventKind::Unplug: {
        bool found = false;
        for (std::size_t i = 0; i < plugged.size(); ++i) {
          if (plugged[i].second == ev.mobile_id) {
            plugged.erase(plugged.begin() + static_cast<long>(i));
            found = true;
            break;
          }
        }
        if (!found)
          add("E_PLUG", "unplug of mobile " + std::to_string(ev.mobile_id) +
                            " without a preceding plug");
        break;
      }
    }
    if (ev.time_s > sc.duration_s)
      add("E_DUR", std::string(event_kind_name(ev.kind)) + " at " + std::to_string(ev.time_s) +
                       " s lies beyond the run duration");
  }
  if (blackout_count > 1) add("E_ORDER", "more than one blackout event");
  if (secondary_count > 1) add("E_ORDER", "more than one secondary_on event");

  if (!(sc.duration_s > 0)) add("E_DUR", "duration must be positive");
  if (!(sc.ts_grid_s > 0)) add("E_RUN", "ts_grid_s must be positive");
  if (!(sc.ts_safety >= 1.0)) add("E_RUN", "ts_safety must be >= 1");
  if (sc.record_stride < 1) add("E_RUN", "record_stride must be >= 1");
  if (sc.regions.empty()) add("E_REGION", "scenario has no regions");
  return out;
}

// ---------------------------------------------------------------------------
// Scenario file format: INI-style sections [channel], [region.N], [gains],
// [events], [run]; '#' or ';' start a comment. Repeated keys are only
// meaningful for `dg` and event lines. Malformed input throws; semantic
// problems are reported by validate().
namespace detail {

inline std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] inline void parse_fail(int line, const std::string& msg) {
  throw std::runtime_error("scenario parse error (line " + std::to_string(line) + "): " + msg);
}

inline double parse_double(const std::string& tok, int line) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) parse_fail(line, "bad number '" + tok + "'");
  return v;
}

inline long parse_long(const std::string& tok, int line) {
  long v = 0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) parse_fail(line, "bad integer '" + tok + "'");
  return v;
}

inline std::vector<double> parse_doubles(const std::string& value, int line) {
  std::vector<double> out;
  for (const auto& tok : split_ws(value)) out.push_back(parse_double(tok, line));
  return out;
}

// key=value argument list used by event lines
struct ArgMap {
  std::vector<std::pair<std::string, std::string>> kv;
  int line = 0;

  const std::string* find(const std::string& key) const {
    for (const auto& [k, v] : kv)
      if (k == key) return &v;
    return nullptr;
  }
  double number(const std::string& key) const {
    const std::string* v = find(key);
    if (v == nullptr) parse_fail(line, "missing argument '" + key + "'");
    return parse_double(*v, line);
  }
  double number_or(const std::string& key, double fallback) const {
    const std::string* v = find(key);
    return v == nullptr ? fallback : parse_double(*v, line);
  }
  long integer(const std::string& key) const {
    const std::string* v = find(key);
    if (v == nullptr) parse_fail(line, "missing argument '" + key + "'");
    return parse_long(*v, line);
  }
};

inline ArgMap parse_args(const std::vector<std::string>& toks, std::size_t from, int line) {
  ArgMap args;
  args.line = line;
  for (std::size_t i = from; i < toks.size(); ++i) {
    const auto eq = toks[i].find('=');
    if (eq == std::string::npos) parse_fail(line, "expected key=value, got '" + toks[i] + "'");
    args.kv.emplace_back(toks[i].substr(0, eq), toks[i].substr(eq + 1));
  }
  return args;
}

}  // namespace detail

inline Scenario parse_scenario(const std::string& text, const std::string& name) {
  using detail::parse_fail;
  Scenario sc;
  sc.name = name;

  struct RawRegion {
    RegionConfig cfg;
    std::vector<double> k_omega, k_p, k_u;  // as written: empty, 1, or per-DG
  };
  std::vector<RawRegion> raw_regions;

  enum class Section { None, Channel, Region, Gains, Events, Run };
  Section section = Section::None;
  RawRegion* current_region = nullptr;

  std::istringstream stream(text);
  std::string raw_line;
  int line_no = 0;
  while (std::getline(stream, raw_line)) {
    ++line_no;
    std::string line = raw_line;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = detail::trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') parse_fail(line_no, "unterminated section header");
      const std::string sec = detail::trim(line.substr(1, line.size() - 2));
      if (sec == "channel") {
        section = Section::Channel;
      } else if (sec == "gains") {
        section = Section::Gains;
      } else if (sec == "events") {
        section = Section::Events;
      } else if (sec == "run") {
        section = Section::Run;
      } else if (sec.rfind("region.", 0) == 0) {
        section = Section::Region;
        RawRegion rr;
        rr.cfg.id = static_cast<int>(detail::parse_long(sec.substr(7), line_no));
        raw_regions.push_back(std::move(rr));
        current_region = &raw_regions.back();
      } else {
        parse_fail(line_no, "unknown section [" + sec + "]");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) parse_fail(line_no, "expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) parse_fail(line_no, "empty key or value");

    switch (section) {
      case Section::None:
        parse_fail(line_no, "key outside of any section");
      case Section::Channel: {
        auto& ch = sc.channel;
        if (key == "subcarrier_bandwidth_hz") ch.subcarrier_bandwidth_hz = detail::parse_double(value, line_no);
        else if (key == "subcarriers") ch.subcarrier_count = static_cast<int>(detail::parse_long(value, line_no));
        else if (key == "noise_dbm") ch.noise_mw = dbm_to_mw(detail::parse_double(value, line_no));
        else if (key == "loss_factor") ch.loss_factor = detail::parse_double(value, line_no);
        else if (key == "pathloss_exponent") ch.pathloss_exponent = detail::parse_double(value, line_no);
        else if (key == "p_max_dbm") ch.p_max_mw = dbm_to_mw(detail::parse_double(value, line_no));
        else if (key == "p_cst_dbm") ch.p_cst_mw = dbm_to_mw(detail::parse_double(value, line_no));
        else if (key == "packet_bytes") ch.packet_bits = 8.0 * detail::parse_double(value, line_no);
        else if (key == "packet_bits") ch.packet_bits = detail::parse_double(value, line_no);
        else parse_fail(line_no, "unknown [channel] key '" + key + "'");
        break;
      }
      case Section::Region: {
        auto& rr = *current_region;
        if (key == "dg") {
          const auto toks = detail::split_ws(value);
          if (toks.size() != 6 && toks.size() != 8)
            parse_fail(line_no, "dg expects: id m_p n_q p_max_w x_km y_km [p_max_dbm p_cst_dbm]");
          DgUnit dg;
          dg.id = static_cast<int>(detail::parse_long(toks[0], line_no));
          dg.m_p = detail::parse_double(toks[1], line_no);
          dg.n_q = detail::parse_double(toks[2], line_no);
          dg.p_max_w = detail::parse_double(toks[3], line_no);
          rr.cfg.locations.push_back(
              {detail::parse_double(toks[4], line_no), detail::parse_double(toks[5], line_no)});
          if (toks.size() == 8) {
            rr.cfg.p_max_mw.push_back(dbm_to_mw(detail::parse_double(toks[6], line_no)));
            rr.cfg.p_cst_mw.push_back(dbm_to_mw(detail::parse_double(toks[7], line_no)));
          } else {
            rr.cfg.p_max_mw.push_back(sc.channel.p_max_mw);
            rr.cfg.p_cst_mw.push_back(sc.channel.p_cst_mw);
          }
          rr.cfg.dgs.push_back(dg);
        } else if (key == "load_w") {
          rr.cfg.load_w = detail::parse_double(value, line_no);
        } else if (key == "init_omega_dev") {
          rr.cfg.init_omega_dev = detail::parse_double(value, line_no);
        } else if (key == "init_u_dev") {
          rr.cfg.init_u_dev = detail::parse_double(value, line_no);
        } else if (key == "init_xp") {
          rr.cfg.init_xp = detail::parse_doubles(value, line_no);
        } else if (key == "init_omega_n_dev") {
          rr.cfg.init_omega_n_dev = detail::parse_doubles(value, line_no);
        } else if (key == "k_omega") {
          rr.k_omega = detail::parse_doubles(value, line_no);
        } else if (key == "k_p") {
          rr.k_p = detail::parse_doubles(value, line_no);
        } else if (key == "k_u") {
          rr.k_u = detail::parse_doubles(value, line_no);
        } else {
          parse_fail(line_no, "unknown [region] key '" + key + "'");
        }
        break;
      }
      case Section::Gains: {
        if (key == "k_omega") sc.default_k_omega = detail::parse_double(value, line_no);
        else if (key == "k_p") sc.default_k_p = detail::parse_double(value, line_no);
        else if (key == "k_u") sc.default_k_u = detail::parse_double(value, line_no);
        else parse_fail(line_no, "unknown [gains] key '" + key + "'");
        break;
      }
      case Section::Events: {
        const auto toks = detail::split_ws(value);
        if (toks.empty()) parse_fail(line_no, "event without a time");
        ScenarioEvent ev;
        ev.time_s = detail::parse_double(toks[0], line_no);
        const auto args = detail::parse_args(toks, 1, line_no);
        if (key == "blackout") {
          ev.kind = EventKind::Blackout;
        } else if (key == "secondary_on") {
          ev.kind = EventKind::SecondaryOn;
        } else if (key == "load_step") {
          ev.kind = EventKind::LoadStep;
          ev.region = static_cast<int>(args.integer("region"));
          ev.dp_w = args.number("dp_w");
        } else if (key == "plug") {
          ev.kind = EventKind::Plug;
          ev.region = static_cast<int>(args.integer("region"));
          ev.host_dg = static_cast<int>(args.integer("host"));
          ev.mobile_id = static_cast<int>(args.integer("id"));
          ev.mobile.id = ev.mobile_id;
          ev.mobile.mobile = true;
          ev.mobile.m_p = args.number("m_p");
          ev.mobile.n_q = args.number_or("n_q", 0.0);
          ev.mobile.p_max_w = args.number("p_max_w");
          ev.mobile_loc = {args.number_or("x_km", 0.0), args.number_or("y_km", 0.0)};
          ev.init_xp = args.number_or("init_xp", 0.0);
          ev.init_omega_dev = args.number_or("init_omega_dev", 0.0);
          ev.init_u_dev = args.number_or("init_u_dev", 0.0);
          ev.k_omega = args.number_or("k_omega", -1.0);
          ev.k_p = args.number_or("k_p", -1.0);
          ev.k_u = args.number_or("k_u", -1.0);
        } else if (key == "unplug") {
          ev.kind = EventKind::Unplug;
          ev.mobile_id = static_cast<int>(args.integer("id"));
        } else {
          parse_fail(line_no, "unknown event '" + key + "'");
        }
        sc.events.push_back(std::move(ev));
        break;
      }
      case Section::Run: {
        if (key == "duration_s") sc.duration_s = detail::parse_double(value, line_no);
        else if (key == "plant") {
          if (value == "integrator") sc.plant = PlantMode::Integrator;
          else if (value == "droop") sc.plant = PlantMode::DroopEquilibrium;
          else parse_fail(line_no, "plant must be 'integrator' or 'droop'");
        } else if (key == "omega_ref_rad_s") sc.omega_ref = detail::parse_double(value, line_no);
        else if (key == "u_ref_v") sc.u_ref = detail::parse_double(value, line_no);
        else if (key == "ts_grid_s") sc.ts_grid_s = detail::parse_double(value, line_no);
        else if (key == "ts_safety") sc.ts_safety = detail::parse_double(value, line_no);
        else if (key == "record_stride") sc.record_stride = detail::parse_long(value, line_no);
        else parse_fail(line_no, "unknown [run] key '" + key + "'");
        break;
      }
    }
  }

  // resolve per-region gain vectors: absent -> scenario defaults, a single
  // value -> uniform, otherwise one entry per DG
  for (auto& rr : raw_regions) {
    const std::size_t n = rr.cfg.dgs.size();
    const auto resolve = [&](std::vector<double>& raw, double fallback) {
      if (raw.empty()) return std::vector<double>(n, fallback);
      if (raw.size() == 1) return std::vector<double>(n, raw[0]);
      if (raw.size() == n) return raw;
      throw std::runtime_error("scenario parse error: region " + std::to_string(rr.cfg.id) +
                               " gain list must have 1 or " + std::to_string(n) + " entries");
    };
    rr.cfg.k_omega = resolve(rr.k_omega, sc.default_k_omega);
    rr.cfg.k_p = resolve(rr.k_p, sc.default_k_p);
    rr.cfg.k_u = resolve(rr.k_u, sc.default_k_u);
    sc.regions.push_back(std::move(rr.cfg));
  }
  std::sort(sc.regions.begin(), sc.regions.end(),
            [](const RegionConfig& a, const RegionConfig& b) { return a.id < b.id; });
  std::stable_sort(sc.events.begin(), sc.events.end(),
                   [](const ScenarioEvent& a, const ScenarioEvent& b) { return a.time_s < b.time_s; });
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str(), path);
}

}  // namespace gridshift
