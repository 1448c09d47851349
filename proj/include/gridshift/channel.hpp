#pragma once

#include <cmath>
#include <stdexcept>

namespace gridshift {

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

// Cyber-layer physics constants. All powers are linear milliwatts; dBm
// fields from configuration are converted once at load time.
struct ChannelParams {
  double subcarrier_bandwidth_hz = 25e3;  // w
  int subcarrier_count = 40;              // S
  double noise_mw = dbm_to_mw(-62.0);     // sigma^2
  double loss_factor = 0.09;              // h
  double pathloss_exponent = 3.0;         // alpha
  double p_max_mw = dbm_to_mw(24.0);      // default per-node budget
  double p_cst_mw = dbm_to_mw(0.1);       // wireless module circuit power
  double packet_bits = 256.0;             // L_packet

  void validate() const {
    if (!(subcarrier_bandwidth_hz > 0)) throw std::invalid_argument("ChannelParams: bandwidth must be positive");
    if (subcarrier_count < 1) throw std::invalid_argument("ChannelParams: need at least one sub-carrier");
    if (!(noise_mw > 0)) throw std::invalid_argument("ChannelParams: noise power must be positive");
    if (!(loss_factor > 0)) throw std::invalid_argument("ChannelParams: loss factor must be positive");
    if (pathloss_exponent < 0) throw std::invalid_argument("ChannelParams: pathloss exponent must be >= 0");
    if (!(p_max_mw > 0) || !(p_cst_mw > 0)) throw std::invalid_argument("ChannelParams: powers must be positive");
    if (!(p_cst_mw < p_max_mw)) throw std::invalid_argument("ChannelParams: circuit power must be below the budget");
    if (!(packet_bits > 0)) throw std::invalid_argument("ChannelParams: packet size must be positive");
  }
};

// Distance-driven gain h * d^(-alpha).
inline double channel_gain(double distance_km, const ChannelParams& params) {
  if (!(distance_km > 0)) throw std::invalid_argument("channel_gain: distance must be positive");
  return params.loss_factor * std::pow(distance_km, -params.pathloss_exponent);
}

inline double snr(double p_mw, double gain, double noise_mw) {
  if (p_mw < 0) throw std::invalid_argument("snr: negative transmit power");
  if (!(noise_mw > 0)) throw std::invalid_argument("snr: noise power must be positive");
  return p_mw * gain / noise_mw;
}

// Shannon rate over the assigned sub-carriers, per direction.
inline double link_rate(int carrier_count, double p_per_carrier_mw, double gain,
                        const ChannelParams& params) {
  if (carrier_count < 0) throw std::invalid_argument("link_rate: negative carrier count");
  if (carrier_count == 0) return 0.0;
  const double gamma = snr(p_per_carrier_mw, gain, params.noise_mw);
  return params.subcarrier_bandwidth_hz * carrier_count * std::log2(1.0 + gamma);
}

inline double link_delay(double rate_bps, const ChannelParams& params) {
  if (!(rate_bps > 0)) throw std::runtime_error("link_delay: zero rate, link is unschedulable");
  return params.packet_bits / rate_bps;
}

// Smallest multiple of the controller grid that is >= safety * tau_max,
// and never below tau_max itself.
inline double sampling_interval(double tau_max_s, double grid_s, double safety) {
  if (!(tau_max_s > 0)) throw std::invalid_argument("sampling_interval: tau_max must be positive");
  if (!(grid_s > 0)) throw std::invalid_argument("sampling_interval: grid must be positive");
  if (!(safety >= 1.0)) throw std::invalid_argument("sampling_interval: safety must be >= 1");
  const double target = safety * tau_max_s;
  auto k = static_cast<long long>(std::ceil(target / grid_s - 1e-9));
  if (k < 1) k = 1;
  while (static_cast<double>(k) * grid_s < tau_max_s) ++k;
  return static_cast<double>(k) * grid_s;
}

}  // namespace gridshift
