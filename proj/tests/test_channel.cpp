#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "gridshift/channel.hpp"

using namespace gridshift;

TEST_CASE("channel gain follows h * d^-alpha") {
  ChannelParams params;  // h = 0.09, alpha = 3
  REQUIRE(channel_gain(1.0, params) == Catch::Approx(0.09).epsilon(1e-12));
  REQUIRE(channel_gain(2.0, params) == Catch::Approx(0.01125).epsilon(1e-12));

  // log-domain evaluation as an independent route
  const double log_domain = std::pow(10.0, std::log10(0.09) - 3.0 * std::log10(0.64));
  REQUIRE(channel_gain(0.64, params) == Catch::Approx(log_domain).epsilon(1e-12));

  REQUIRE_THROWS_AS(channel_gain(0.0, params), std::invalid_argument);
  REQUIRE_THROWS_AS(channel_gain(-1.0, params), std::invalid_argument);
}

TEST_CASE("snr") {
  REQUIRE(snr(1.0, 1.0, 1.0) == 1.0);
  REQUIRE(snr(0.0, 0.5, 1.0) == 0.0);

  // 24 dBm through gain 0.09 over -62 dBm noise, checked in the dB domain
  const double p = dbm_to_mw(24.0);
  const double sigma2 = dbm_to_mw(-62.0);
  const double snr_db = 24.0 + 10.0 * std::log10(0.09) - (-62.0);
  REQUIRE(snr(p, 0.09, sigma2) == Catch::Approx(std::pow(10.0, snr_db / 10.0)).epsilon(1e-12));

  REQUIRE_THROWS_AS(snr(-1.0, 1.0, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(snr(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("link rate via the Shannon formula") {
  ChannelParams params;
  params.subcarrier_bandwidth_hz = 25000.0;
  params.noise_mw = 1.0;

  REQUIRE(link_rate(1, 1.0, 1.0, params) == 25000.0);  // log2(2) = 1
  REQUIRE(link_rate(0, 123.0, 1.0, params) == 0.0);
  REQUIRE(link_rate(2, 3.0, 1.0, params) == 100000.0);  // log2(4) = 2
  REQUIRE_THROWS_AS(link_rate(-1, 1.0, 1.0, params), std::invalid_argument);
}

TEST_CASE("packet delay") {
  ChannelParams params;  // 32-byte packet
  REQUIRE(params.packet_bits == 256.0);
  REQUIRE(link_delay(5087.8, params) == Catch::Approx(0.0503).margin(5e-5));
  REQUIRE(link_delay(256.0, params) == Catch::Approx(1.0).epsilon(1e-15));
  REQUIRE(link_delay(2560.0, params) == Catch::Approx(0.1).epsilon(1e-15));
  REQUIRE_THROWS_AS(link_delay(0.0, params), std::runtime_error);
}

TEST_CASE("delay * rate recovers the packet size") {
  ChannelParams params;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> log_rate(0.0, 9.0);
  for (int i = 0; i < 2000; ++i) {
    const double rate = std::pow(10.0, log_rate(rng));
    const double tau = link_delay(rate, params);
    REQUIRE(tau * rate == Catch::Approx(params.packet_bits).epsilon(1e-12));
  }
}

TEST_CASE("rate is monotone in carriers, delay strictly decreasing in rate") {
  ChannelParams params;
  const double gain = 1e-9;
  const double p = 20.0;
  double prev = 0.0;
  for (int c = 1; c <= 40; ++c) {
    const double rate = link_rate(c, p, gain, params);
    REQUIRE(rate > prev);
    prev = rate;
  }
  REQUIRE(link_delay(2000.0, params) > link_delay(2001.0, params));
}

TEST_CASE("sampling interval snaps to the control grid") {
  REQUIRE(sampling_interval(0.0503, 0.010, 1.9) == Catch::Approx(0.100).epsilon(1e-12));
  REQUIRE(sampling_interval(0.0446, 0.010, 1.0) == Catch::Approx(0.050).epsilon(1e-12));
  REQUIRE(sampling_interval(0.0554, 0.010, 1.0) == Catch::Approx(0.060).epsilon(1e-12));
  REQUIRE(sampling_interval(0.010, 0.010, 1.0) == Catch::Approx(0.010).epsilon(1e-12));
  REQUIRE_THROWS_AS(sampling_interval(0.0, 0.01, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(sampling_interval(0.05, 0.01, 0.5), std::invalid_argument);

  // never below tau_max, even when safety * tau_max rounds onto a lower multiple
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> tau(1e-4, 0.3);
  std::uniform_real_distribution<double> safety(1.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double t = tau(rng);
    const double s = safety(rng);
    const double ts = sampling_interval(t, 0.01, s);
    REQUIRE(ts >= t);
    REQUIRE(ts >= s * t - 1e-9);
    REQUIRE(std::abs(ts / 0.01 - std::round(ts / 0.01)) < 1e-9);
  }
}

TEST_CASE("dBm conversion round trip") {
  REQUIRE(dbm_to_mw(0.0) == 1.0);
  REQUIRE(dbm_to_mw(24.0) == Catch::Approx(251.18864315).epsilon(1e-9));
  REQUIRE(mw_to_dbm(dbm_to_mw(-62.0)) == Catch::Approx(-62.0).margin(1e-12));
}

TEST_CASE("channel parameter invariants") {
  ChannelParams params;
  REQUIRE_NOTHROW(params.validate());
  params.p_cst_mw = params.p_max_mw;
  REQUIRE_THROWS_AS(params.validate(), std::invalid_argument);
  params = ChannelParams{};
  params.subcarrier_count = 0;
  REQUIRE_THROWS_AS(params.validate(), std::invalid_argument);
}
