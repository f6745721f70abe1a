#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "addt/tree.hpp"

namespace addt {

// First-order lumped RC zone model with a modulating heat pump. One capacitance
// C couples the zone to outdoors through conductance U; the pump injects
// cop * rated_electric_power * u watts of heat at modulation u.
struct EnvConfig {
    double timestep_s = 900.0;
    double thermal_capacitance = 1.0e7;    // J/K
    double loss_coefficient = 250.0;       // W/K
    double rated_electric_power = 3000.0;  // W
    double cop = 3.0;

    // Tariff and comfort share the 07:00-22:00 window.
    double peak_start_hour = 7.0;
    double peak_end_hour = 22.0;
    double peak_price = 0.06;      // currency per kWh
    double offpeak_price = 0.03;
    double comfort_day = 21.0;     // deg C lower bound inside the window
    double comfort_night = 15.0;

    // Outdoor model: mean + daily_amp*sin(2*pi*(h - h_peak)/24)
    //                + seasonal_amp*sin(2*pi*day/365) + N(0, noise_std) noise.
    double outdoor_mean = 5.0;
    double outdoor_daily_amp = 5.0;
    double outdoor_peak_hour = 15.0;
    double outdoor_seasonal_amp = 3.0;
    double outdoor_noise_std = 0.5;

    double omega = 100.0;  // comfort-vs-cost weight in the reward
    std::uint64_t seed = 0;

    void validate() const;
    long steps_per_day() const { return static_cast<long>(86400.0 / timestep_s); }
};

// Stable fingerprint of every physical and schedule field (used in dataset
// headers to tie data to the environment that produced it).
std::string env_config_fingerprint(const EnvConfig& cfg);

struct EnvState {
    double hour = 0.0;          // [0, 24)
    double zone_temp = 20.0;    // deg C
    double outdoor_temp = 0.0;  // deg C
    double comfort_lower = 0.0; // deg C
    long time_index = 0;

    void validate() const;
};

struct RewardComponents {
    double discomfort = 0.0;   // Kelvin-hours below the bound this step
    double energy_cost = 0.0;  // currency this step
    double omega = 0.0;
    double reward = 0.0;       // -(discomfort + omega * energy_cost)
};

// Action level 0..4 maps to modulation u = level / 4.
inline double modulation(int level) { return static_cast<double>(level) / 4.0; }
constexpr int kActionCount = 5;

// Schedule helpers (pure functions of the config).
double price_at(const EnvConfig& cfg, double hour);
double comfort_at(const EnvConfig& cfg, double hour);
// Outdoor temperature at a step index: deterministic in (cfg.seed, t).
double outdoor_at(const EnvConfig& cfg, long t);

// Fresh state at the start of `start_day` (fractions give intra-day starts);
// zone temperature starts at 20 deg C.
EnvState env_reset(const EnvConfig& cfg, double start_day = 0.0);

// One explicit-Euler step. Pure: returns the successor state and the reward
// decomposition for the transition.
std::pair<EnvState, RewardComponents> env_step(const EnvState& state, int action_level,
                                               const EnvConfig& cfg);

// Raw feature encoding (hour/24, T_z, T_o, T_s), standardized when a scaling
// is supplied.
std::vector<double> state_to_features(const EnvState& state, const FeatureScaling& scaling);

struct StepRecord {
    long t = 0;
    double hour = 0.0;
    double zone_temp = 0.0;
    double outdoor_temp = 0.0;
    double comfort_lower = 0.0;
    double u = 0.0;
    double discomfort = 0.0;
    double energy_cost = 0.0;
    double reward = 0.0;
};

// CSV with header t,h,T_z,T_o,T_s,u,T_c,E_c,R_t.
std::string episode_log_csv(const std::vector<StepRecord>& log);

// Stateful convenience wrapper over the pure step function.
class ThermalEnv {
public:
    explicit ThermalEnv(EnvConfig cfg);

    const EnvConfig& config() const { return cfg_; }
    const EnvState& state() const { return state_; }

    EnvState reset(double start_day = 0.0);
    // Overrides the current state (validated); lets callers perturb e.g. the
    // zone temperature between logical episodes.
    void set_state(const EnvState& s);
    // Applies the action, advances the state, returns the reward parts and
    // appends to the in-memory log when logging is on.
    RewardComponents step(int action_level);

    void set_logging(bool on) { logging_ = on; }
    const std::vector<StepRecord>& log() const { return log_; }
    void clear_log() { log_.clear(); }

private:
    EnvConfig cfg_;
    EnvState state_;
    bool logging_ = false;
    std::vector<StepRecord> log_;
};

}  // namespace addt
