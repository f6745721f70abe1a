#include "addt/env.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "addt/errors.hpp"
#include "addt/numeric.hpp"

namespace addt {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// 53-bit mantissa, offset by half an ulp so the result is strictly inside (0,1).
double u01(std::uint64_t x) {
    return (static_cast<double>(x >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

// Standard normal as a pure function of (seed, t): the weather at a given step
// never depends on how many times the model was sampled before.
double weather_noise(std::uint64_t seed, long t) {
    const std::uint64_t base = splitmix64(seed ^ 0xD6E8FEB86659FD93ULL);
    const std::uint64_t a = splitmix64(base + 2 * static_cast<std::uint64_t>(t));
    const std::uint64_t b = splitmix64(base + 2 * static_cast<std::uint64_t>(t) + 1);
    const double u1 = u01(a);
    const double u2 = u01(b);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double hour_of(const EnvConfig& cfg, long t) {
    return std::fmod(static_cast<double>(t) * cfg.timestep_s, 86400.0) / 3600.0;
}

bool in_window(const EnvConfig& cfg, double hour) {
    return hour >= cfg.peak_start_hour && hour < cfg.peak_end_hour;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid environment config: " + what);
}

}  // namespace

void EnvConfig::validate() const {
    require(timestep_s > 0.0, "timestep_s must be positive");
    const long ts = std::lround(timestep_s);
    require(ts > 0 && std::abs(timestep_s - static_cast<double>(ts)) < 1e-9 && 3600 % ts == 0,
            "timestep_s must be a whole number of seconds dividing 3600");
    require(thermal_capacitance > 0.0, "thermal_capacitance must be positive");
    require(loss_coefficient > 0.0, "loss_coefficient must be positive");
    require(rated_electric_power > 0.0, "rated_electric_power must be positive");
    require(cop > 0.0, "cop must be positive");
    require(peak_start_hour >= 0.0 && peak_end_hour <= 24.0 && peak_start_hour < peak_end_hour,
            "peak window must satisfy 0 <= start < end <= 24");
    require(peak_price >= 0.0 && offpeak_price >= 0.0, "prices must be non-negative");
    require(comfort_day >= comfort_night, "comfort_day must be >= comfort_night");
    require(outdoor_daily_amp >= 0.0 && outdoor_seasonal_amp >= 0.0,
            "outdoor amplitudes must be non-negative");
    require(outdoor_noise_std >= 0.0, "outdoor_noise_std must be non-negative");
    require(omega >= 0.0, "omega must be non-negative");
    // Euler stability: the per-step decay factor must stay well inside (0, 1).
    require(timestep_s * loss_coefficient / thermal_capacitance < 1.0,
            "timestep_s * loss_coefficient / thermal_capacitance must be < 1");
}

std::string env_config_fingerprint(const EnvConfig& cfg) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "timestep_s=" << cfg.timestep_s << ";thermal_capacitance=" << cfg.thermal_capacitance
       << ";loss_coefficient=" << cfg.loss_coefficient
       << ";rated_electric_power=" << cfg.rated_electric_power << ";cop=" << cfg.cop
       << ";peak_start_hour=" << cfg.peak_start_hour << ";peak_end_hour=" << cfg.peak_end_hour
       << ";peak_price=" << cfg.peak_price << ";offpeak_price=" << cfg.offpeak_price
       << ";comfort_day=" << cfg.comfort_day << ";comfort_night=" << cfg.comfort_night
       << ";outdoor_mean=" << cfg.outdoor_mean << ";outdoor_daily_amp=" << cfg.outdoor_daily_amp
       << ";outdoor_peak_hour=" << cfg.outdoor_peak_hour
       << ";outdoor_seasonal_amp=" << cfg.outdoor_seasonal_amp
       << ";outdoor_noise_std=" << cfg.outdoor_noise_std << ";omega=" << cfg.omega
       << ";seed=" << cfg.seed;
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a(os.str());
    return hex.str();
}

void EnvState::validate() const {
    if (!std::isfinite(hour) || !std::isfinite(zone_temp) || !std::isfinite(outdoor_temp) ||
        !std::isfinite(comfort_lower)) {
        throw NumericError("environment state is not finite at t=" + std::to_string(time_index));
    }
    if (hour < 0.0 || hour >= 24.0) {
        throw ValidationError("state hour out of [0,24): " + std::to_string(hour));
    }
}

double price_at(const EnvConfig& cfg, double hour) {
    return in_window(cfg, hour) ? cfg.peak_price : cfg.offpeak_price;
}

double comfort_at(const EnvConfig& cfg, double hour) {
    return in_window(cfg, hour) ? cfg.comfort_day : cfg.comfort_night;
}

double outdoor_at(const EnvConfig& cfg, long t) {
    const double hour = hour_of(cfg, t);
    const double day = static_cast<double>(t) * cfg.timestep_s / 86400.0;
    const double daily =
        cfg.outdoor_daily_amp *
        std::sin(2.0 * std::numbers::pi * (hour - cfg.outdoor_peak_hour) / 24.0);
    const double seasonal =
        cfg.outdoor_seasonal_amp * std::sin(2.0 * std::numbers::pi * day / 365.0);
    return cfg.outdoor_mean + daily + seasonal + cfg.outdoor_noise_std * weather_noise(cfg.seed, t);
}

EnvState env_reset(const EnvConfig& cfg, double start_day) {
    cfg.validate();
    if (!(start_day >= 0.0) || !std::isfinite(start_day)) {
        throw ConfigError("start_day must be finite and non-negative");
    }
    EnvState s;
    s.time_index = std::llround(start_day * static_cast<double>(cfg.steps_per_day()));
    s.hour = hour_of(cfg, s.time_index);
    s.zone_temp = 20.0;
    s.outdoor_temp = outdoor_at(cfg, s.time_index);
    s.comfort_lower = comfort_at(cfg, s.hour);
    return s;
}

std::pair<EnvState, RewardComponents> env_step(const EnvState& state, int action_level,
                                               const EnvConfig& cfg) {
    state.validate();
    if (action_level < 0 || action_level >= kActionCount) {
        throw ValidationError("action level out of range [0,4]: " + std::to_string(action_level));
    }
    const double dt = cfg.timestep_s;
    const double u = modulation(action_level);
    const double heat = cfg.cop * cfg.rated_electric_power * u;
    const double losses = cfg.loss_coefficient * (state.outdoor_temp - state.zone_temp);
    const double zone_next = state.zone_temp + dt / cfg.thermal_capacitance * (losses + heat);
    if (!std::isfinite(zone_next)) {
        throw NumericError("zone temperature diverged at t=" + std::to_string(state.time_index));
    }

    EnvState next;
    next.time_index = state.time_index + 1;
    next.hour = hour_of(cfg, next.time_index);
    next.zone_temp = zone_next;
    next.outdoor_temp = outdoor_at(cfg, next.time_index);
    next.comfort_lower = comfort_at(cfg, next.hour);

    RewardComponents rc;
    rc.discomfort = std::max(0.0, next.comfort_lower - zone_next) * dt / 3600.0;
    rc.energy_cost = price_at(cfg, state.hour) * cfg.rated_electric_power * u * dt / 3.6e6;
    rc.omega = cfg.omega;
    rc.reward = -(rc.discomfort + cfg.omega * rc.energy_cost);
    return {next, rc};
}

std::vector<double> state_to_features(const EnvState& state, const FeatureScaling& scaling) {
    std::vector<double> raw = {state.hour / 24.0, state.zone_temp, state.outdoor_temp,
                               state.comfort_lower};
    if (scaling.empty()) return raw;
    return scaling.standardize(raw);
}

std::string episode_log_csv(const std::vector<StepRecord>& log) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "t,h,T_z,T_o,T_s,u,T_c,E_c,R_t\n";
    for (const auto& r : log) {
        os << r.t << ',' << r.hour << ',' << r.zone_temp << ',' << r.outdoor_temp << ','
           << r.comfort_lower << ',' << r.u << ',' << r.discomfort << ',' << r.energy_cost << ','
           << r.reward << '\n';
    }
    return os.str();
}

ThermalEnv::ThermalEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    state_ = env_reset(cfg_, 0.0);
}

EnvState ThermalEnv::reset(double start_day) {
    state_ = env_reset(cfg_, start_day);
    return state_;
}

void ThermalEnv::set_state(const EnvState& s) {
    s.validate();
    state_ = s;
}

RewardComponents ThermalEnv::step(int action_level) {
    auto [next, rc] = env_step(state_, action_level, cfg_);
    if (logging_) {
        log_.push_back({state_.time_index, state_.hour, state_.zone_temp, state_.outdoor_temp,
                        state_.comfort_lower, modulation(action_level), rc.discomfort,
                        rc.energy_cost, rc.reward});
    }
    state_ = next;
    return rc;
}

}  // namespace addt
