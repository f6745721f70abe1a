#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "addt/dataset.hpp"
#include "addt/distill.hpp"
#include "addt/env.hpp"
#include "addt/teacher.hpp"
#include "addt/tree.hpp"

namespace addt {

// Five-number summary plus mean; quartiles use linear interpolation between
// order statistics.
struct SummaryStats {
    double mean = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double min = 0.0;
    double max = 0.0;

    static SummaryStats of(std::vector<double> values);
};

struct EvaluationReport {
    std::string policy;  // "teacher", "full", "asymmetric", "always-off", ...
    std::string mode;    // "soft" | "hardened" | "greedy" | "constant"
    std::vector<double> daily_rewards;
    SummaryStats summary;
    double test_kl = std::numeric_limits<double>::quiet_NaN();
    double fidelity = std::numeric_limits<double>::quiet_NaN();
    int node_count = 0;  // decision nodes
    int max_depth = 0;
};

using Policy = std::function<int(const EnvState&)>;

// Policies capture their model by value; the returned callable owns a copy.
Policy tree_policy(const TreeModel& tree);
Policy teacher_greedy_policy(const TeacherModel& model);
Policy constant_policy(int action_level);

struct RolloutResult {
    std::vector<double> daily_rewards;
    long steps = 0;
    // max |R_t + (T_c + omega * E_c)| over all steps: the reward decomposition
    // identity residual.
    double identity_max_abs_err = 0.0;
    std::vector<StepRecord> log;  // filled only when keep_log
};

RolloutResult rollout_policy(const Policy& policy, const EnvConfig& env_cfg, double start_day,
                             int days, bool keep_log = false);

// Fraction of test samples where argmax(predict(tree, x)) equals
// argmax(target); ties resolve to the lowest action index on both sides.
double fidelity(const TreeModel& tree, const DistillDataset& test);

// Mean KL(target || predict(tree, x)), honoring the tree's mode.
double test_kl(const TreeModel& tree, const DistillDataset& test);

// rollout_out, when given, receives the underlying rollout (daily rewards,
// step count, identity residual).
EvaluationReport evaluate_tree(const TreeModel& tree, const std::string& policy_name,
                               const DistillDataset& test, const EnvConfig& env_cfg,
                               double start_day, int days, RolloutResult* rollout_out = nullptr);

struct ComparisonCell {
    int budget = 0;
    std::string method;  // "full" | "asymmetric"
    std::string mode;    // "soft" | "hardened"
    std::uint64_t seed = 0;
    EvaluationReport report;
};

struct ComparisonMatrix {
    int schema_version = 1;
    std::vector<int> budgets;
    std::vector<std::uint64_t> seeds;
    int test_days = 0;
    EvaluationReport teacher;
    EvaluationReport always_off;
    std::vector<ComparisonCell> cells;
    // Reward-identity residual pooled over every rollout in the run.
    double identity_max_abs_err = 0.0;
    long identity_steps = 0;

    // Mean daily reward pooled over seeds and days for the matching cells.
    double pooled_mean(int budget, const std::string& method, const std::string& mode) const;
};

// Called after each (budget, seed, method) training so the caller can persist
// the tree and its trace.
using TreeSink = std::function<void(int budget, std::uint64_t seed, const std::string& method,
                                    const TreeModel& tree, const TrainTrace& trace)>;
using ProgressFn = std::function<void(const std::string&)>;

// Trains full + asymmetric trees per (budget, seed), evaluates soft and
// hardened modes of each on the test period, and assembles the matrix. For
// the full baseline each budget must be 2^depth - 1.
ComparisonMatrix compare_budgets(const DistillDataset& train, const DistillDataset& test,
                                 const TeacherModel& teacher, const EnvConfig& env_cfg,
                                 const std::vector<int>& budgets,
                                 const std::vector<std::uint64_t>& seeds,
                                 const DistillConfig& base_cfg, double eval_start_day,
                                 int eval_days, const ProgressFn& progress = {},
                                 const TreeSink& sink = {});

// Depth of the complete tree with `budget` decision nodes; throws ConfigError
// unless budget = 2^d - 1.
int full_depth_for_budget(int budget);

std::string matrix_to_json(const ComparisonMatrix& m);
// Rows: budget,method,mode,seed,day,reward. Teacher and always-off rows use
// budget 0 and seed 0.
std::string matrix_csv(const ComparisonMatrix& m);
std::string report_to_json(const EvaluationReport& r);

}  // namespace addt
