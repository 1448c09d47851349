#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gridshift/allocation.hpp"
#include "gridshift/channel.hpp"
#include "gridshift/comm_graph.hpp"
#include "gridshift/control.hpp"
#include "gridshift/log.hpp"
#include "gridshift/scenario.hpp"

namespace gridshift {

struct RegionRunInfo {
  int region_id = 0;
  double tau_max_s = 0.0;
  double ts_s = 0.0;
  double min_rate_bps = 0.0;
  GainCheck gain_check;
  SpectralReport oracle;
  std::optional<SpectralReport> oracle_with_mobile;
};

struct TimeSeries {
  std::vector<std::string> comments;
  std::vector<std::string> columns;  // first column is time_s
  std::vector<std::vector<double>> rows;
  std::vector<RegionRunInfo> region_info;
  nlohmann::ordered_json summary;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline const char* consensus_name(ConsensusClass c) {
  switch (c) {
    case ConsensusClass::ConsensusStable: return "consensus-stable";
    case ConsensusClass::Marginal: return "marginal";
    case ConsensusClass::Divergent: return "divergent";
  }
  return "?";
}

// Mutable per-region simulation context.
struct RegionRuntime {
  const RegionConfig* cfg = nullptr;
  CommGraph graph{1, {}};
  std::vector<DgUnit> units;       // fixed units, plus the mobile while plugged
  std::vector<double> omega_n;     // primary set-points (droop mode)
  MgState st;
  ControllerGains gains;
  long ts_ticks = 1;
  bool islanded = false;
  bool secondary = false;
  double load_w = 0.0;
  bool mobile_active = false;
  MobileLink mobile;
  // values shown in the mobile's columns while it is detached
  double hold_omega = 0.0, hold_xp = 0.0, hold_u = 0.0;
  bool has_mobile_columns = false;
};

struct ScheduledEvent {
  long tick = 0;
  std::size_t order = 0;  // original event index, keeps application stable
  std::size_t region_idx = 0;
  const ScenarioEvent* ev = nullptr;
};

inline long snap_to_control_tick(double time_s, double grid_s, long ts_ticks) {
  const double steps = time_s / (grid_s * static_cast<double>(ts_ticks));
  auto k = static_cast<long>(std::ceil(steps - 1e-9));
  if (k < 0) k = 0;
  return k * ts_ticks;
}

inline std::vector<double> region_init_xp(const RegionConfig& cfg) {
  if (!cfg.init_xp.empty()) return cfg.init_xp;
  return std::vector<double>(cfg.dgs.size(), 0.0);
}

inline void apply_blackout(RegionRuntime& r, const Scenario& sc) {
  r.islanded = true;
  const std::size_t n = r.cfg->dgs.size();
  r.omega_n.assign(n, sc.omega_ref);
  if (!r.cfg->init_omega_n_dev.empty())
    for (std::size_t i = 0; i < n; ++i) r.omega_n[i] += r.cfg->init_omega_n_dev[i];

  if (sc.plant == PlantMode::Integrator) {
    std::vector<double> omega(n, sc.omega_ref + r.cfg->init_omega_dev);
    std::vector<double> u(n, sc.u_ref + r.cfg->init_u_dev);
    r.st = MgState::initial(std::move(omega), region_init_xp(*r.cfg), std::move(u),
                            sc.omega_ref, sc.u_ref);
  } else {
    // islanding drops the region onto its primary droop equilibrium
    std::vector<double> zeros(n, 0.0);
    MgState seed = MgState::initial(zeros, zeros, std::vector<double>(n, sc.u_ref),
                                    sc.omega_ref, sc.u_ref);
    MgState solved = plant_step_droop(seed, r.omega_n, r.units, r.load_w);
    solved.k = 0;
    solved.x_p_prev = solved.x_p;
    solved.x_p_prev2 = solved.x_p;
    r.st = std::move(solved);
  }
}

inline void apply_load_step(RegionRuntime& r, const ScenarioEvent& ev, PlantMode plant) {
  r.load_w += ev.dp_w;
  if (!r.islanded) return;  // the main grid absorbs pre-islanding load changes
  if (plant == PlantMode::Integrator) {
    // instantaneous droop pickup: every unit shifts its scaled power by the
    // same amount and the frequency sags by the same amount
    double inv_sum = 0.0;
    for (const auto& unit : r.units) inv_sum += 1.0 / unit.m_p;
    const double delta = ev.dp_w / inv_sum;
    for (std::size_t i = 0; i < r.st.size(); ++i) {
      r.st.x_p[i] += delta;
      r.st.x_omega[i] -= delta;
    }
  } else {
    // quasi-static: the new balance appears immediately, between control
    // steps, so the delay buffers and step index stay put
    MgState solved = plant_step_droop(r.st, r.omega_n, r.units, r.load_w);
    solved.k = r.st.k;
    solved.x_p_prev = r.st.x_p_prev;
    solved.x_p_prev2 = r.st.x_p_prev2;
    r.st = std::move(solved);
  }
}

inline void apply_plug(RegionRuntime& r, const ScenarioEvent& ev, const Scenario& sc) {
  const int host_index = r.cfg->index_of_dg(ev.host_dg);
  r.mobile = MobileLink{static_cast<int>(r.cfg->dgs.size()), host_index};
  r.mobile_active = true;

  DgUnit unit = ev.mobile;
  r.units.push_back(unit);
  r.gains.k_omega.push_back(ev.k_omega >= 0 ? ev.k_omega : sc.default_k_omega);
  r.gains.k_p.push_back(ev.k_p >= 0 ? ev.k_p : sc.default_k_p);
  r.gains.k_u.push_back(ev.k_u >= 0 ? ev.k_u : sc.default_k_u);

  if (sc.plant == PlantMode::Integrator) {
    r.st.x_omega.push_back(sc.omega_ref + ev.init_omega_dev);
    r.st.x_p.push_back(ev.init_xp);
    r.st.x_u.push_back(sc.u_ref + ev.init_u_dev);
    r.st.x_p_prev.push_back(ev.init_xp);
    r.st.x_p_prev2.push_back(ev.init_xp);
  } else {
    r.omega_n.push_back(sc.omega_ref + ev.init_omega_dev);
    r.st.x_omega.push_back(0.0);
    r.st.x_p.push_back(0.0);
    r.st.x_u.push_back(sc.u_ref + ev.init_u_dev);
    r.st.x_p_prev.push_back(0.0);
    r.st.x_p_prev2.push_back(0.0);
    MgState solved = plant_step_droop(r.st, r.omega_n, r.units, r.load_w);
    solved.k = r.st.k;
    const std::size_t m = r.st.size();
    solved.x_p_prev = r.st.x_p_prev;
    solved.x_p_prev2 = r.st.x_p_prev2;
    solved.x_p_prev[m - 1] = solved.x_p[m - 1];
    solved.x_p_prev2[m - 1] = solved.x_p[m - 1];
    r.st = std::move(solved);
  }
}

inline void apply_unplug(RegionRuntime& r) {
  const std::size_t m = r.st.size() - 1;
  r.hold_omega = r.st.x_omega[m];
  r.hold_xp = r.st.x_p[m];
  r.hold_u = r.st.x_u[m];
  r.st.x_omega.pop_back();
  r.st.x_p.pop_back();
  r.st.x_u.pop_back();
  r.st.x_p_prev.pop_back();
  r.st.x_p_prev2.pop_back();
  r.units.pop_back();
  r.gains.k_omega.pop_back();
  r.gains.k_p.pop_back();
  r.gains.k_u.pop_back();
  if (!r.omega_n.empty() && r.omega_n.size() > r.st.size()) r.omega_n.pop_back();
  r.mobile_active = false;
}

inline void control_step(RegionRuntime& r, const Scenario& sc) {
  if (!r.islanded) return;
  if (!r.secondary) {
    if (sc.plant == PlantMode::DroopEquilibrium)
      r.st = plant_step_droop(r.st, r.omega_n, r.units, r.load_w);
    return;  // integrator plant holds its deviations under primary-only operation
  }
  const auto mobile = r.mobile_active ? std::optional<MobileLink>(r.mobile) : std::nullopt;
  const ControlInput u = dapi_step(r.st, r.gains, r.graph, mobile);
  if (sc.plant == PlantMode::Integrator) {
    r.st = plant_step_integrator(r.st, u);
  } else {
    for (std::size_t i = 0; i < r.omega_n.size(); ++i)
      r.omega_n[i] += u.u_omega[i] + u.u_p[i];
    r.st = plant_step_droop(r.st, r.omega_n, r.units, r.load_w);
  }
}

}  // namespace detail

// Full pipeline: graph formation, pre-event allocation, per-region sampling
// intervals, then the time-triggered control loop with events snapped to
// control-step boundaries. Deterministic: identical scenarios produce
// identical TimeSeries.
inline TimeSeries run(const Scenario& sc) {
  {
    auto diags = validate(sc);
    if (!diags.empty()) throw ScenarioValidationError(std::move(diags));
  }

  const std::size_t region_count = sc.regions.size();
  std::vector<detail::RegionRuntime> rt(region_count);
  std::vector<RegionSpec> specs;
  specs.reserve(region_count);
  for (std::size_t i = 0; i < region_count; ++i) {
    const RegionConfig& cfg = sc.regions[i];
    rt[i].cfg = &cfg;
    rt[i].graph = build_chain_from_locations(cfg.locations);
    rt[i].units = cfg.dgs;
    rt[i].load_w = cfg.load_w;
    rt[i].gains = ControllerGains{cfg.k_omega, cfg.k_p, cfg.k_u};
    const std::size_t n = cfg.dgs.size();
    rt[i].st = MgState::initial(std::vector<double>(n, sc.omega_ref),
                                std::vector<double>(n, 0.0),
                                std::vector<double>(n, sc.u_ref), sc.omega_ref, sc.u_ref);
    rt[i].omega_n.assign(n, sc.omega_ref);

    RegionSpec spec = make_region_spec(rt[i].graph, cfg.locations, sc.channel);
    spec.p_max_mw = cfg.p_max_mw;
    spec.p_cst_mw = cfg.p_cst_mw;
    specs.push_back(std::move(spec));
  }

  const AllocationPlan plan = allocate(specs, sc.channel);

  TimeSeries ts;
  ts.region_info.resize(region_count);
  for (std::size_t i = 0; i < region_count; ++i) {
    RegionRunInfo& info = ts.region_info[i];
    info.region_id = sc.regions[i].id;
    info.tau_max_s = plan.regions[i].tau_max_s;
    info.min_rate_bps = plan.regions[i].min_rate_bps;
    info.ts_s = sampling_interval(info.tau_max_s, sc.ts_grid_s, sc.ts_safety);
    rt[i].ts_ticks = std::lround(info.ts_s / sc.ts_grid_s);
    info.gain_check = check_gains(rt[i].gains, rt[i].graph);
    if (info.gain_check.verdict == GainVerdict::Unstable) {
      const GainCondition* v = info.gain_check.first_violation();
      log::error("region %d: gains violate the stability criteria (node %d: %s = %g); running anyway",
                 info.region_id, sc.regions[i].dgs[static_cast<std::size_t>(v->node)].id,
                 v->expr.c_str(), v->value);
    }
    info.oracle = spectral_radius_oracle(rt[i].graph, rt[i].gains.k_p);
  }

  // mobile columns + augmented-system oracle for regions that ever plug one
  for (const auto& ev : sc.events) {
    if (ev.kind != EventKind::Plug) continue;
    for (std::size_t i = 0; i < region_count; ++i) {
      if (sc.regions[i].id != ev.region) continue;
      rt[i].has_mobile_columns = true;
      rt[i].hold_omega = sc.omega_ref + ev.init_omega_dev;
      rt[i].hold_xp = ev.init_xp;
      rt[i].hold_u = sc.u_ref + ev.init_u_dev;
      if (!ts.region_info[i].oracle_with_mobile.has_value()) {
        const int host = sc.regions[i].index_of_dg(ev.host_dg);
        const double kpm = ev.k_p >= 0 ? ev.k_p : sc.default_k_p;
        ts.region_info[i].oracle_with_mobile =
            spectral_radius_oracle_with_mobile(rt[i].graph, rt[i].gains.k_p, host, kpm);
      }
    }
  }

  // event schedule, snapped to each affected region's control ticks
  std::vector<detail::ScheduledEvent> schedule;
  const auto total_ticks = static_cast<long>(std::llround(sc.duration_s / sc.ts_grid_s));
  for (std::size_t e = 0; e < sc.events.size(); ++e) {
    const ScenarioEvent& ev = sc.events[e];
    const auto schedule_for = [&](std::size_t region_idx) {
      const long tick =
          detail::snap_to_control_tick(ev.time_s, sc.ts_grid_s, rt[region_idx].ts_ticks);
      if (tick > total_ticks) {
        log::error("event %s at %g s snaps beyond the run duration; dropped",
                   event_kind_name(ev.kind), ev.time_s);
        return;
      }
      schedule.push_back({tick, e, region_idx, &ev});
    };
    if (ev.kind == EventKind::Blackout || ev.kind == EventKind::SecondaryOn) {
      for (std::size_t i = 0; i < region_count; ++i) schedule_for(i);
    } else if (ev.kind == EventKind::Unplug) {
      // the unplug inherits the region of the matching plug identity
      for (std::size_t i = 0; i < region_count; ++i)
        if (rt[i].has_mobile_columns &&
            std::any_of(sc.events.begin(), sc.events.end(), [&](const ScenarioEvent& p) {
              return p.kind == EventKind::Plug && p.mobile_id == ev.mobile_id &&
                     p.region == sc.regions[i].id;
            }))
          schedule_for(i);
    } else {
      for (std::size_t i = 0; i < region_count; ++i)
        if (sc.regions[i].id == ev.region) schedule_for(i);
    }
  }
  std::sort(schedule.begin(), schedule.end(),
            [](const detail::ScheduledEvent& a, const detail::ScheduledEvent& b) {
              if (a.tick != b.tick) return a.tick < b.tick;
              if (a.order != b.order) return a.order < b.order;
              return a.region_idx < b.region_idx;
            });

  // column layout
  ts.columns.push_back("time_s");
  for (std::size_t i = 0; i < region_count; ++i) {
    const RegionConfig& cfg = sc.regions[i];
    const std::string rp = "r" + std::to_string(cfg.id) + ".";
    const auto dg_columns = [&](int dg_id) {
      const std::string p = rp + "dg" + std::to_string(dg_id) + ".";
      ts.columns.push_back(p + "omega_rad_s");
      ts.columns.push_back(p + "freq_hz");
      ts.columns.push_back(p + "xp_rad_s");
      ts.columns.push_back(p + "u_v");
    };
    for (const auto& dg : cfg.dgs) dg_columns(dg.id);
    if (rt[i].has_mobile_columns) {
      for (const auto& ev : sc.events)
        if (ev.kind == EventKind::Plug && ev.region == cfg.id) {
          dg_columns(ev.mobile_id);
          break;
        }
    }
    ts.columns.push_back(rp + "spread_rad_s");
    ts.columns.push_back(rp + "islanded");
    ts.columns.push_back(rp + "secondary");
  }

  const double two_pi = 2.0 * std::numbers::pi;
  const auto record_row = [&](long tick) {
    std::vector<double> row;
    row.reserve(ts.columns.size());
    row.push_back(static_cast<double>(tick) * sc.ts_grid_s);
    for (std::size_t i = 0; i < region_count; ++i) {
      const auto& r = rt[i];
      const std::size_t fixed = r.cfg->dgs.size();
      for (std::size_t d = 0; d < fixed; ++d) {
        row.push_back(r.st.x_omega[d]);
        row.push_back(r.st.x_omega[d] / two_pi);
        row.push_back(r.st.x_p[d]);
        row.push_back(r.st.x_u[d]);
      }
      if (r.has_mobile_columns) {
        if (r.mobile_active) {
          const std::size_t m = r.st.size() - 1;
          row.push_back(r.st.x_omega[m]);
          row.push_back(r.st.x_omega[m] / two_pi);
          row.push_back(r.st.x_p[m]);
          row.push_back(r.st.x_u[m]);
        } else {
          row.push_back(r.hold_omega);
          row.push_back(r.hold_omega / two_pi);
          row.push_back(r.hold_xp);
          row.push_back(r.hold_u);
        }
      }
      row.push_back(power_sharing_spread(r.st));
      row.push_back(r.islanded ? 1.0 : 0.0);
      row.push_back(r.secondary ? 1.0 : 0.0);
    }
    ts.rows.push_back(std::move(row));
  };

  // main loop: events apply at the start of their control tick, the row for
  // a tick shows the state the plants have held since the previous step, and
  // controllers due at the tick then advance the state.
  nlohmann::ordered_json applied_events = nlohmann::ordered_json::array();
  std::size_t next_event = 0;
  for (long tick = 0; tick <= total_ticks; ++tick) {
    while (next_event < schedule.size() && schedule[next_event].tick == tick) {
      const auto& item = schedule[next_event];
      auto& r = rt[item.region_idx];
      switch (item.ev->kind) {
        case EventKind::Blackout: detail::apply_blackout(r, sc); break;
        case EventKind::SecondaryOn: r.secondary = true; break;
        case EventKind::LoadStep: detail::apply_load_step(r, *item.ev, sc.plant); break;
        case EventKind::Plug: detail::apply_plug(r, *item.ev, sc); break;
        case EventKind::Unplug: detail::apply_unplug(r); break;
      }
      log::debug("event %s applied at %g s (region %d)", event_kind_name(item.ev->kind),
                 static_cast<double>(tick) * sc.ts_grid_s, sc.regions[item.region_idx].id);
      nlohmann::ordered_json je;
      je["kind"] = event_kind_name(item.ev->kind);
      je["t_s"] = item.ev->time_s;
      je["applied_t_s"] = static_cast<double>(tick) * sc.ts_grid_s;
      je["region"] = sc.regions[item.region_idx].id;
      applied_events.push_back(std::move(je));
      ++next_event;
    }
    if (tick % sc.record_stride == 0) record_row(tick);
    if (tick == total_ticks) break;  // the horizon holds the last recorded state
    for (auto& r : rt)
      if (tick % r.ts_ticks == 0) detail::control_step(r, sc);
  }

  // header comments + summary document
  ts.comments.push_back("gridshift simulation output");
  ts.comments.push_back("scenario: " + sc.name);
  ts.comments.push_back(
      "columns: time_s, then per region rN: per DG dgM: omega_rad_s freq_hz xp_rad_s u_v, "
      "then rN.spread_rad_s rN.islanded rN.secondary");
  ts.comments.push_back(
      "mobile DG columns hold their initial/last values while the unit is detached");
  for (const auto& info : ts.region_info) {
    ts.comments.push_back("region " + std::to_string(info.region_id) +
                          ": tau_max_s=" + detail::format_double(info.tau_max_s) +
                          " ts_s=" + detail::format_double(info.ts_s) +
                          " min_rate_bps=" + detail::format_double(info.min_rate_bps));
  }
  ts.comments.push_back("plan: " + plan_to_json(plan).dump());

  nlohmann::ordered_json summary;
  summary["scenario"] = sc.name;
  summary["plant"] = sc.plant == PlantMode::Integrator ? "integrator" : "droop";
  summary["duration_s"] = sc.duration_s;
  summary["ts_grid_s"] = sc.ts_grid_s;
  summary["ts_safety"] = sc.ts_safety;
  summary["regions"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < region_count; ++i) {
    const auto& info = ts.region_info[i];
    const auto& r = rt[i];
    nlohmann::ordered_json jr;
    jr["id"] = info.region_id;
    jr["dgs"] = [&] {
      std::vector<int> ids;
      for (const auto& dg : sc.regions[i].dgs) ids.push_back(dg.id);
      return ids;
    }();
    jr["tau_max_s"] = info.tau_max_s;
    jr["ts_s"] = info.ts_s;
    jr["min_rate_bps"] = info.min_rate_bps;
    nlohmann::ordered_json jg;
    jg["verdict"] = info.gain_check.verdict == GainVerdict::Stable ? "stable" : "unstable";
    jg["violations"] = nlohmann::ordered_json::array();
    for (const auto& c : info.gain_check.conditions) {
      if (c.ok) continue;
      jg["violations"].push_back(
          "node " + std::to_string(sc.regions[i].dgs[static_cast<std::size_t>(c.node)].id) +
          ": " + c.expr + " = " + detail::format_double(c.value));
    }
    jr["gain_check"] = std::move(jg);
    nlohmann::ordered_json jo;
    jo["classification"] = detail::consensus_name(info.oracle.classification);
    jo["spectral_radius"] = info.oracle.spectral_radius;
    jo["subdominant_modulus"] = info.oracle.subdominant_modulus;
    jr["oracle"] = std::move(jo);
    if (info.oracle_with_mobile) {
      nlohmann::ordered_json jm;
      jm["classification"] = detail::consensus_name(info.oracle_with_mobile->classification);
      jm["spectral_radius"] = info.oracle_with_mobile->spectral_radius;
      jm["subdominant_modulus"] = info.oracle_with_mobile->subdominant_modulus;
      jr["oracle_with_mobile"] = std::move(jm);
    }
    nlohmann::ordered_json jf;
    jf["spread_rad_s"] = power_sharing_spread(r.st);
    double max_freq_err = 0.0, max_volt_err = 0.0;
    for (double w : r.st.x_omega) max_freq_err = std::max(max_freq_err, std::abs(w - sc.omega_ref));
    for (double u : r.st.x_u) max_volt_err = std::max(max_volt_err, std::abs(u - sc.u_ref));
    jf["max_freq_error_rad_s"] = max_freq_err;
    jf["max_volt_error_v"] = max_volt_err;
    jf["xp_rad_s"] = r.st.x_p;
    jr["final"] = std::move(jf);
    summary["regions"].push_back(std::move(jr));
  }
  summary["events"] = std::move(applied_events);
  ts.summary = std::move(summary);
  return ts;
}

inline std::string to_csv(const TimeSeries& ts) {
  std::string out;
  for (const auto& c : ts.comments) {
    out += "# ";
    out += c;
    out += '\n';
  }
  for (std::size_t i = 0; i < ts.columns.size(); ++i) {
    if (i) out += ',';
    out += ts.columns[i];
  }
  out += '\n';
  for (const auto& row : ts.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += detail::format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

inline std::string summary_json(const TimeSeries& ts) { return ts.summary.dump(2) + "\n"; }

// Column lookup helper for tests and downstream tooling.
inline int column_index(const TimeSeries& ts, const std::string& name) {
  for (std::size_t i = 0; i < ts.columns.size(); ++i)
    if (ts.columns[i] == name) return static_cast<int>(i);
  return -1;
}

}  // namespace gridshift
