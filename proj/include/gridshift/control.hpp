#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridshift/comm_graph.hpp"

namespace gridshift {

// One distributed generator. omega_n / u_n are the primary set-point
// states adjusted by the secondary controller.
struct DgUnit {
  NodeId id = 0;          // external DG number, as used in scenario files
  double m_p = 0.0;       // frequency droop, rad/s per W
  double n_q = 0.0;       // voltage droop, V per var
  double p_max_w = 0.0;   // active power rating
  double omega_n = 0.0;   // rad/s
  double u_n = 0.0;       // V
  bool mobile = false;
};

struct ControllerGains {
  std::vector<double> k_omega;
  std::vector<double> k_p;
  std::vector<double> k_u;
};

enum class PlantMode { Integrator, DroopEquilibrium };

// Discrete controller/plant state of one region. x_p holds the scaled
// active powers m_Pi * P_i; the prev buffers hold the values of exactly one
// and two steps ago (bootstrapped with the initial state).
struct MgState {
  std::vector<double> x_omega;
  std::vector<double> x_p;
  std::vector<double> x_u;
  std::vector<double> x_p_prev;
  std::vector<double> x_p_prev2;
  long k = 0;
  double omega_ref = 0.0;
  double u_ref = 0.0;

  static MgState initial(std::vector<double> omega, std::vector<double> p,
                         std::vector<double> u, double omega_ref, double u_ref) {
    MgState st;
    st.x_omega = std::move(omega);
    st.x_p = std::move(p);
    st.x_u = std::move(u);
    if (st.x_omega.size() != st.x_p.size() || st.x_p.size() != st.x_u.size())
      throw std::invalid_argument("MgState: channel sizes differ");
    st.x_p_prev = st.x_p;
    st.x_p_prev2 = st.x_p;
    st.omega_ref = omega_ref;
    st.u_ref = u_ref;
    return st;
  }

  std::size_t size() const { return x_p.size(); }
};

struct ControlInput {
  std::vector<double> u_omega;
  std::vector<double> u_p;
  std::vector<double> u_u;
};

enum class GainVerdict { Stable, Unstable };

struct GainCondition {
  NodeId node = 0;  // graph index
  std::string expr;
  double value = 0.0;
  bool ok = false;
};

struct GainCheck {
  GainVerdict verdict = GainVerdict::Unstable;
  std::vector<GainCondition> conditions;

  const GainCondition* first_violation() const {
    for (const auto& c : conditions)
      if (!c.ok) return &c;
    return nullptr;
  }
};

// Closed-form stability criteria, per node: 0 < K_omega < 2, 0 < K_U < 2
// and 0 < d_i * K_P < 1. Boundary values are classified unstable. The
// uniform-gain global form max{d_i} * K_P < 1 is the special case of equal
// per-node gains.
inline GainCheck check_gains(const ControllerGains& gains, const CommGraph& g) {
  const int n = g.node_count();
  if (static_cast<int>(gains.k_omega.size()) != n ||
      static_cast<int>(gains.k_p.size()) != n ||
      static_cast<int>(gains.k_u.size()) != n)
    throw std::invalid_argument("check_gains: gain vectors do not match graph size");

  GainCheck report;
  bool all_ok = true;
  for (NodeId i = 0; i < n; ++i) {
    const double kw = gains.k_omega[static_cast<std::size_t>(i)];
    const double ku = gains.k_u[static_cast<std::size_t>(i)];
    const double dkp = g.degree(i) * gains.k_p[static_cast<std::size_t>(i)];

    GainCondition cw{i, "K_omega", kw, kw > 0.0 && kw < 2.0};
    GainCondition cu{i, "K_U", ku, ku > 0.0 && ku < 2.0};
    GainCondition cp{i, "d*K_P", dkp, dkp > 0.0 && dkp < 1.0};
    all_ok = all_ok && cw.ok && cu.ok && cp.ok;
    report.conditions.push_back(std::move(cw));
    report.conditions.push_back(std::move(cu));
    report.conditions.push_back(std::move(cp));
  }
  report.verdict = all_ok ? GainVerdict::Stable : GainVerdict::Unstable;
  return report;
}

enum class ConsensusClass { ConsensusStable, Marginal, Divergent };

struct SpectralReport {
  ConsensusClass classification = ConsensusClass::Marginal;
  double spectral_radius = 0.0;
  double subdominant_modulus = 0.0;  // largest modulus besides the consensus mode
  std::vector<std::complex<double>> eigenvalues;  // sorted by modulus, descending
};

namespace detail {

inline SpectralReport classify_spectrum(const Eigen::MatrixXd& m) {
  const Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("spectral oracle: eigensolver failed to converge");

  SpectralReport report;
  report.eigenvalues.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    report.eigenvalues.push_back(es.eigenvalues()(i));
  std::sort(report.eigenvalues.begin(), report.eigenvalues.end(),
            [](const std::complex<double>& a, const std::complex<double>& b) {
              const double ma = std::abs(a);
              const double mb = std::abs(b);
              if (ma != mb) return ma > mb;
              if (a.real() != b.real()) return a.real() > b.real();
              return a.imag() > b.imag();
            });

  constexpr double tol = 1e-9;
  int at_one = 0;
  double rho = 0.0;
  bool rest_inside = true;
  std::size_t nearest_one = 0;
  double nearest_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < report.eigenvalues.size(); ++i) {
    const auto& ev = report.eigenvalues[i];
    const double mod = std::abs(ev);
    rho = std::max(rho, mod);
    const double dist = std::abs(ev - std::complex<double>(1.0, 0.0));
    if (dist < nearest_dist) {
      nearest_dist = dist;
      nearest_one = i;
    }
    if (dist <= tol)
      ++at_one;
    else if (!(mod < 1.0 - tol))
      rest_inside = false;
  }
  report.spectral_radius = rho;
  for (std::size_t i = 0; i < report.eigenvalues.size(); ++i)
    if (i != nearest_one)
      report.subdominant_modulus =
          std::max(report.subdominant_modulus, std::abs(report.eigenvalues[i]));
  if (rho > 1.0 + tol)
    report.classification = ConsensusClass::Divergent;
  else if (at_one == 1 && rest_inside)
    report.classification = ConsensusClass::ConsensusStable;
  else
    report.classification = ConsensusClass::Marginal;
  return report;
}

}  // namespace detail

// Numerical stability oracle for the delayed power-sharing loop: eigenvalues
// of the augmented 2N x 2N one-step-delay matrix
//   [ I - K_P*D   K_P*A ]
//   [     I         0   ]
// Consensus-stable iff exactly one eigenvalue sits at 1 and the rest are
// strictly inside the unit circle.
inline SpectralReport spectral_radius_oracle(const CommGraph& g,
                                             const std::vector<double>& k_p) {
  const int n = g.node_count();
  if (static_cast<int>(k_p.size()) != n)
    throw std::invalid_argument("spectral_radius_oracle: gain vector does not match graph");
  if (connected_components(g).size() != 1)
    throw std::invalid_argument("spectral_radius_oracle: graph is not connected");

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (NodeId i = 0; i < n; ++i) {
    m(i, i) = 1.0 - k_p[static_cast<std::size_t>(i)] * g.degree(i);
    for (NodeId j : g.neighbours(i)) m(i, n + j) = k_p[static_cast<std::size_t>(i)];
    m(n + i, i) = 1.0;
  }
  return detail::classify_spectrum(m);
}

// Same oracle for a region with one plugged mobile unit, whose only feed is
// its host's state delayed two steps. State is [x(k); x(k-1); x(k-2)] over
// the n fixed nodes plus the mobile, i.e. 3(n+1) x 3(n+1).
inline SpectralReport spectral_radius_oracle_with_mobile(const CommGraph& g,
                                                         const std::vector<double>& k_p,
                                                         NodeId host, double k_p_mobile) {
  const int n = g.node_count();
  if (static_cast<int>(k_p.size()) != n)
    throw std::invalid_argument("spectral oracle: gain vector does not match graph");
  if (host < 0 || host >= n)
    throw std::invalid_argument("spectral oracle: host index out of range");
  if (connected_components(g).size() != 1)
    throw std::invalid_argument("spectral oracle: graph is not connected");

  const int nn = n + 1;  // mobile is index n
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3 * nn, 3 * nn);
  for (NodeId i = 0; i < n; ++i) {
    m(i, i) = 1.0 - k_p[static_cast<std::size_t>(i)] * g.degree(i);
    for (NodeId j : g.neighbours(i)) m(i, nn + j) = k_p[static_cast<std::size_t>(i)];
  }
  m(n, n) = 1.0 - k_p_mobile;
  m(n, 2 * nn + host) = k_p_mobile;
  for (int i = 0; i < nn; ++i) {
    m(nn + i, i) = 1.0;
    m(2 * nn + i, nn + i) = 1.0;
  }
  return detail::classify_spectrum(m);
}

// Index and host of a plugged mobile unit inside an extended state vector.
struct MobileLink {
  int index = -1;
  NodeId host = -1;
};

// DAPI control inputs. Frequency and voltage corrections use only local
// measurement; power sharing uses neighbour states delayed one step. A
// plugged mobile unit tracks its host's state delayed two steps.
inline ControlInput dapi_step(const MgState& st, const ControllerGains& gains,
                              const CommGraph& g,
                              const std::optional<MobileLink>& mobile = std::nullopt) {
  const int n = g.node_count();
  const bool has_mobile = mobile.has_value();
  const NodeId mobile_host = has_mobile ? mobile->host : 0;
  const int mobile_index = has_mobile ? mobile->index : -1;
  const int total = n + (has_mobile ? 1 : 0);
  if (static_cast<int>(st.size()) != total)
    throw std::invalid_argument("dapi_step: state size does not match graph");
  if (static_cast<int>(gains.k_omega.size()) != total ||
      static_cast<int>(gains.k_p.size()) != total ||
      static_cast<int>(gains.k_u.size()) != total)
    throw std::invalid_argument("dapi_step: gain vectors do not match state");
  if (st.x_p_prev.size() != st.size() || st.x_p_prev2.size() != st.size())
    throw std::invalid_argument("dapi_step: delay buffers not initialised");
  if (has_mobile && (mobile_index != n || mobile_host < 0 || mobile_host >= n))
    throw std::invalid_argument("dapi_step: bad mobile attachment");

  ControlInput u;
  u.u_omega.resize(static_cast<std::size_t>(total));
  u.u_p.resize(static_cast<std::size_t>(total));
  u.u_u.resize(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    u.u_omega[idx] = gains.k_omega[idx] * (st.omega_ref - st.x_omega[idx]);
    u.u_u[idx] = gains.k_u[idx] * (st.u_ref - st.x_u[idx]);
    if (i < n) {
      double acc = 0.0;
      for (NodeId j : g.neighbours(i))
        acc += st.x_p_prev[static_cast<std::size_t>(j)] - st.x_p[idx];
      u.u_p[idx] = gains.k_p[idx] * acc;
    } else {
      u.u_p[idx] = gains.k_p[idx] *
                   (st.x_p_prev2[static_cast<std::size_t>(mobile_host)] - st.x_p[idx]);
    }
  }
  return u;
}

// Pure integration of every channel; delay buffers shift by one step.
inline MgState plant_step_integrator(const MgState& st, const ControlInput& u) {
  if (u.u_omega.size() != st.size() || u.u_p.size() != st.size() || u.u_u.size() != st.size())
    throw std::invalid_argument("plant_step_integrator: input size does not match state");
  MgState next = st;
  next.x_p_prev2 = st.x_p_prev;
  next.x_p_prev = st.x_p;
  for (std::size_t i = 0; i < st.size(); ++i) {
    next.x_omega[i] += u.u_omega[i];
    next.x_p[i] += u.u_p[i];
    next.x_u[i] += u.u_u[i];
  }
  ++next.k;
  return next;
}

// Quasi-static primary equilibrium: one common frequency omega_ss with
// omega_ss = omega_n_i - m_Pi * P_i and the P_i summing to the load. The
// voltage channel is left untouched in this mode.
inline MgState plant_step_droop(const MgState& st, const std::vector<double>& omega_n,
                                const std::vector<DgUnit>& units, double total_load_w) {
  if (units.empty()) throw std::invalid_argument("plant_step_droop: empty region");
  if (units.size() != st.size() || omega_n.size() != st.size())
    throw std::invalid_argument("plant_step_droop: size mismatch");

  double inv_sum = 0.0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (!(units[i].m_p > 0)) throw std::invalid_argument("plant_step_droop: droop must be positive");
    inv_sum += 1.0 / units[i].m_p;
    weighted += omega_n[i] / units[i].m_p;
  }
  const double omega_ss = (weighted - total_load_w) / inv_sum;

  MgState next = st;
  next.x_p_prev2 = st.x_p_prev;
  next.x_p_prev = st.x_p;
  for (std::size_t i = 0; i < units.size(); ++i) {
    next.x_omega[i] = omega_ss;
    next.x_p[i] = omega_n[i] - omega_ss;
  }
  ++next.k;
  return next;
}

// Power-sharing objective: spread of the scaled powers; zero means accurate
// sharing.
inline double power_sharing_spread(const MgState& st) {
  if (st.x_p.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(st.x_p.begin(), st.x_p.end());
  return *hi - *lo;
}

}  // namespace gridshift
