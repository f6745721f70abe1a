#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "addt/dataset.hpp"
#include "addt/env.hpp"

namespace addt {

// Uniform-bin discretization of the environment state. Out-of-range values
// clamp to the edge bins.
struct Discretization {
    int hour_bins = 24;
    double tz_lo = 12.0, tz_hi = 26.0, tz_step = 0.5;
    double to_lo = -10.0, to_hi = 20.0, to_step = 2.0;
    double ts_low = 15.0, ts_high = 21.0;

    int tz_bins() const;
    int to_bins() const;
    long state_count() const;
    long key_of(const EnvState& s) const;
    void validate() const;

    bool operator==(const Discretization&) const = default;
};

struct TeacherModel {
    enum class Kind { tabular, external_table };

    Kind kind = Kind::tabular;
    Discretization disc;
    std::unordered_map<long, std::array<double, kActionCount>> q_values;
    // Counts distribution/greedy queries that fell outside the table.
    mutable long missing_lookups = 0;

    void validate() const;
};

struct TeacherTrainConfig {
    long episodes = 2000;  // one simulated day each
    double learning_rate = 0.1;
    double discount = 0.98;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpisodeStat {
    long episode = 0;
    double epsilon = 0.0;
    double episode_return = 0.0;
};

struct TeacherTrainResult {
    TeacherModel model;
    std::vector<EpisodeStat> curve;
};

// Tabular Q-learning with epsilon-greedy exploration; episode k starts at day
// k mod 365. Unvisited entries read as 0, which is optimistic here (all
// rewards are non-positive) and drives exploration.
TeacherTrainResult teacher_train(const EnvConfig& env_cfg, const TeacherTrainConfig& cfg,
                                 const Discretization& disc = {});

std::string training_curve_csv(const std::vector<EpisodeStat>& curve);

// softmax(Q(state)/tau). Missing table entries yield the uniform distribution
// and bump model.missing_lookups.
std::vector<double> teacher_distribution(const TeacherModel& model, const EnvState& state,
                                         double tau);

// Argmax of Q(state), lowest index on ties; missing entries give action 0.
int teacher_greedy_action(const TeacherModel& model, const EnvState& state);

// Greedy on-policy rollout over `days` simulated days starting at `start_day`,
// one sample per step. Standardization statistics come from this data unless
// `reuse_scaling` is supplied (test splits reuse the train-split scaling).
// With `spread_starts` each day restarts from a seeded random zone
// temperature so the set also covers recovery behaviour outside the teacher's
// steady-state band.
DistillDataset generate_dataset(const TeacherModel& model, const EnvConfig& env_cfg, int days,
                                double tau, double start_day = 0.0,
                                const FeatureScaling* reuse_scaling = nullptr,
                                bool spread_starts = false);

// Line-delimited export: a header record, then one {"key", "q"} record per
// table entry in ascending key order. load_external_teacher accepts this
// format back (round-trip safe) as well as header-less files whose records
// carry either a "key" or a raw "state" object.
void save_teacher(const TeacherModel& model, const std::string& path);
TeacherModel load_external_teacher(const std::string& path);

}  // namespace addt
