#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "addt/env.hpp"
#include "addt/errors.hpp"

using namespace addt;

namespace {

EnvConfig quiet_config() {
    EnvConfig cfg;
    cfg.outdoor_daily_amp = 0.0;
    cfg.outdoor_seasonal_amp = 0.0;
    cfg.outdoor_noise_std = 0.0;
    return cfg;
}

EnvState make_state(double hour, double zone, double outdoor, double comfort, long t) {
    EnvState s;
    s.hour = hour;
    s.zone_temp = zone;
    s.outdoor_temp = outdoor;
    s.comfort_lower = comfort;
    s.time_index = t;
    return s;
}

}  // namespace

TEST_CASE("single Euler step matches hand calculation") {
    EnvConfig cfg = quiet_config();
    // T_z' = 20 + 900/1e7 * (250*(0 - 20) + 3*3000*1) = 20.36
    EnvState s = make_state(0.0, 20.0, 0.0, 15.0, 0);
    auto [next, rc] = env_step(s, 4, cfg);
    CHECK(next.zone_temp == doctest::Approx(20.36).epsilon(1e-12));
    CHECK(next.time_index == 1);
    CHECK(next.hour == doctest::Approx(0.25).epsilon(1e-12));

    // Night bound is 15 and the zone sits above it, so only cost is penalized.
    CHECK(rc.discomfort == 0.0);
    CHECK(rc.energy_cost == doctest::Approx(0.03 * 3000.0 * 1.0 * 900.0 / 3.6e6).epsilon(1e-12));
    CHECK(rc.reward == doctest::Approx(-2.25).epsilon(1e-12));
}

TEST_CASE("discomfort integrates Kelvin-hours below the bound") {
    EnvConfig cfg = quiet_config();
    cfg.outdoor_mean = 5.0;
    // Start just before 07:00 so the successor state uses the day bound of 21.
    EnvState s = make_state(6.75, 18.0, 5.0, 15.0, 27);
    auto [next, rc] = env_step(s, 0, cfg);
    CHECK(next.comfort_lower == 21.0);
    const double expected_zone = 18.0 + 900.0 / 1e7 * (250.0 * (5.0 - 18.0));
    CHECK(next.zone_temp == doctest::Approx(expected_zone).epsilon(1e-12));
    CHECK(rc.discomfort == doctest::Approx((21.0 - expected_zone) * 0.25).epsilon(1e-12));
    CHECK(rc.energy_cost == 0.0);
    CHECK(rc.reward == doctest::Approx(-rc.discomfort).epsilon(1e-12));
}

TEST_CASE("free relaxation decays monotonically toward outdoor temperature") {
    EnvConfig cfg = quiet_config();
    ThermalEnv env(cfg);
    env.reset(0.0);
    double prev = env.state().zone_temp;
    for (int i = 0; i < 5 * cfg.steps_per_day(); ++i) {
        env.step(0);
        const double z = env.state().zone_temp;
        CHECK(z < prev);
        CHECK(z > 5.0);
        prev = z;
    }
    CHECK(std::abs(env.state().zone_temp - 5.0) < 0.01);
}

TEST_CASE("max heating rises toward the steady-state ceiling") {
    EnvConfig cfg = quiet_config();
    ThermalEnv env(cfg);
    env.reset(0.0);
    // Equilibrium: T_o + cop*rated/U = 5 + 9000/250 = 41.
    double prev = env.state().zone_temp;
    for (int i = 0; i < 5 * cfg.steps_per_day(); ++i) {
        env.step(4);
        const double z = env.state().zone_temp;
        CHECK(z > prev);
        CHECK(z < 41.0);
        prev = z;
    }
    CHECK(std::abs(env.state().zone_temp - 41.0) < 0.05);
}

TEST_CASE("tariff and comfort schedules share the 07:00-22:00 window") {
    EnvConfig cfg;
    CHECK(price_at(cfg, 6.999) == 0.03);
    CHECK(price_at(cfg, 7.0) == 0.06);
    CHECK(price_at(cfg, 21.999) == 0.06);
    CHECK(price_at(cfg, 22.0) == 0.03);
    CHECK(price_at(cfg, 0.0) == 0.03);

    CHECK(comfort_at(cfg, 6.999) == 15.0);
    CHECK(comfort_at(cfg, 7.0) == 21.0);
    CHECK(comfort_at(cfg, 21.999) == 21.0);
    CHECK(comfort_at(cfg, 22.0) == 15.0);
}

TEST_CASE("reward is exactly minus discomfort plus weighted cost") {
    EnvConfig cfg;
    cfg.seed = 7;
    ThermalEnv env(cfg);
    env.reset(0.25);
    for (int i = 0; i < 200; ++i) {
        const auto rc = env.step(i % kActionCount);
        CHECK(rc.discomfort >= 0.0);
        CHECK(rc.energy_cost >= 0.0);
        CHECK(rc.omega == 100.0);
        CHECK(rc.reward == doctest::Approx(-(rc.discomfort + 100.0 * rc.energy_cost))
                               .epsilon(1e-15));
    }
}

TEST_CASE("episode log is self-consistent and recomputes the energy bill") {
    EnvConfig cfg;
    cfg.seed = 3;
    ThermalEnv env(cfg);
    env.set_logging(true);
    env.reset(0.0);
    double reward_sum = 0.0;
    for (int i = 0; i < 2 * cfg.steps_per_day(); ++i) {
        const int a = (env.state().hour < 12.0) ? 3 : (i % 2);
        reward_sum += env.step(a).reward;
    }
    const auto& log = env.log();
    REQUIRE(static_cast<long>(log.size()) == 2 * cfg.steps_per_day());

    double billed = 0.0;
    double recomputed = 0.0;
    double logged_reward = 0.0;
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& r = log[i];
        billed += r.energy_cost;
        recomputed +=
            price_at(cfg, r.hour) * cfg.rated_electric_power * r.u * cfg.timestep_s / 3.6e6;
        logged_reward += r.reward;
        if (i + 1 < log.size()) {
            const auto& nx = log[i + 1];
            CHECK(r.discomfort ==
                  doctest::Approx(std::max(0.0, nx.comfort_lower - nx.zone_temp) *
                                  cfg.timestep_s / 3600.0)
                      .epsilon(1e-12));
            CHECK(nx.t == r.t + 1);
        }
    }
    CHECK(std::abs(billed - recomputed) < 1e-9);
    CHECK(std::abs(logged_reward - reward_sum) < 1e-9);

    const std::string csv = episode_log_csv(log);
    std::istringstream is(csv);
    std::string header;
    std::getline(is, header);
    CHECK(header == "t,h,T_z,T_o,T_s,u,T_c,E_c,R_t");
    int rows = 0;
    for (std::string line; std::getline(is, line);) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == static_cast<int>(log.size()));
}

TEST_CASE("trajectories are deterministic in the seed") {
    EnvConfig cfg;
    cfg.seed = 42;
    ThermalEnv a(cfg), b(cfg);
    a.reset(1.0);
    b.reset(1.0);
    for (int i = 0; i < 300; ++i) {
        const int act = (i * 7) % kActionCount;
        const auto ra = a.step(act);
        const auto rb = b.step(act);
        CHECK(ra.reward == rb.reward);
        CHECK(a.state().zone_temp == b.state().zone_temp);
        CHECK(a.state().outdoor_temp == b.state().outdoor_temp);
    }

    // Weather is a pure function of (seed, t): query order is irrelevant.
    CHECK(outdoor_at(cfg, 500) == outdoor_at(cfg, 500));
    const double late = outdoor_at(cfg, 900);
    const double early = outdoor_at(cfg, 100);
    CHECK(outdoor_at(cfg, 100) == early);
    CHECK(outdoor_at(cfg, 900) == late);

    EnvConfig other = cfg;
    other.seed = 43;
    bool any_diff = false;
    for (long t = 0; t < 50; ++t) {
        if (outdoor_at(other, t) != outdoor_at(cfg, t)) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("weather noise has roughly the configured scale") {
    EnvConfig noisy;
    noisy.outdoor_noise_std = 1.0;
    EnvConfig clean = noisy;
    clean.outdoor_noise_std = 0.0;

    const int n = 5000;
    double sum = 0.0, sq = 0.0;
    for (long t = 0; t < n; ++t) {
        const double z = outdoor_at(noisy, t) - outdoor_at(clean, t);
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.05);
    CHECK(var > 0.9);
    CHECK(var < 1.1);

    // Daily shape without noise or seasonal drift: warmest six hours after the
    // configured anchor.
    EnvConfig flat = clean;
    flat.outdoor_seasonal_amp = 0.0;
    double lo = 1e9, hi = -1e9;
    int hi_t = -1;
    for (long t = 0; t < flat.steps_per_day(); ++t) {
        const double v = outdoor_at(flat, t);
        lo = std::min(lo, v);
        if (v > hi) {
            hi = v;
            hi_t = static_cast<int>(t);
        }
    }
    CHECK(hi == doctest::Approx(5.0 + 5.0).epsilon(1e-3));
    CHECK(lo == doctest::Approx(5.0 - 5.0).epsilon(1e-3));
    CHECK(hi_t * flat.timestep_s / 3600.0 == doctest::Approx(21.0).epsilon(1e-9));
}

TEST_CASE("reset places the state at the requested fraction of the day") {
    EnvConfig cfg;
    const EnvState noon = env_reset(cfg, 0.5);
    CHECK(noon.hour == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(noon.zone_temp == 20.0);
    CHECK(noon.comfort_lower == 21.0);
    CHECK(noon.time_index == 48);

    const EnvState midnight = env_reset(cfg, 3.0);
    CHECK(midnight.hour == 0.0);
    CHECK(midnight.comfort_lower == 15.0);
    CHECK(midnight.time_index == 3 * cfg.steps_per_day());
}

TEST_CASE("feature encoding is hour fraction plus temperatures") {
    EnvState s = make_state(6.0, 19.5, 2.0, 15.0, 24);
    const auto raw = state_to_features(s, FeatureScaling{});
    REQUIRE(raw.size() == 4);
    CHECK(raw[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(raw[1] == 19.5);
    CHECK(raw[2] == 2.0);
    CHECK(raw[3] == 15.0);

    FeatureScaling sc;
    sc.means = {0.5, 20.0, 5.0, 18.0};
    sc.stds = {0.29, 1.5, 4.0, 3.0};
    const auto z = state_to_features(s, sc);
    const auto back = sc.unstandardize(z);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        CHECK(back[i] == doctest::Approx(raw[i]).epsilon(1e-12));
    }
}

TEST_CASE("config validation rejects broken physics") {
    EnvConfig cfg;
    cfg.timestep_s = 700.0;  // does not divide 3600
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = EnvConfig{};
    cfg.thermal_capacitance = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = EnvConfig{};
    cfg.omega = -5.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = EnvConfig{};
    cfg.thermal_capacitance = 1e5;  // dt*U/C = 2.25: unstable Euler step
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = EnvConfig{};
    cfg.peak_start_hour = 23.0;
    cfg.peak_end_hour = 7.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    CHECK_NOTHROW(EnvConfig{}.validate());
}

TEST_CASE("step rejects bad actions and non-finite state") {
    EnvConfig cfg = quiet_config();
    EnvState ok = make_state(0.0, 20.0, 5.0, 15.0, 0);
    CHECK_THROWS_AS(env_step(ok, 5, cfg), ValidationError);
    CHECK_THROWS_AS(env_step(ok, -1, cfg), ValidationError);

    EnvState bad = ok;
    bad.zone_temp = std::nan("");
    CHECK_THROWS_AS(env_step(bad, 0, cfg), NumericError);

    CHECK_THROWS_AS(env_reset(cfg, -1.0), ConfigError);
}

TEST_CASE("config fingerprint tracks every field") {
    EnvConfig a;
    EnvConfig b;
    CHECK(env_config_fingerprint(a) == env_config_fingerprint(b));
    CHECK(env_config_fingerprint(a).size() == 16);

    b.peak_price = 0.11;
    CHECK(env_config_fingerprint(a) != env_config_fingerprint(b));

    b = a;
    b.seed = 1;
    CHECK(env_config_fingerprint(a) != env_config_fingerprint(b));
}
