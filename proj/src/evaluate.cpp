#include "addt/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "addt/errors.hpp"
#include "addt/numeric.hpp"
#include "json.hpp"

namespace addt {

namespace {

double quantile_sorted(const std::vector<double>& v, double p) {
    const double h = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

nlohmann::json report_json(const EvaluationReport& r) {
    nlohmann::json j;
    j["policy"] = r.policy;
    j["mode"] = r.mode;
    j["daily_rewards"] = r.daily_rewards;
    j["summary"] = {{"mean", r.summary.mean}, {"median", r.summary.median},
                    {"q1", r.summary.q1},     {"q3", r.summary.q3},
                    {"min", r.summary.min},   {"max", r.summary.max}};
    j["test_kl"] = r.test_kl;
    j["fidelity"] = r.fidelity;
    j["node_count"] = r.node_count;
    j["max_depth"] = r.max_depth;
    return j;
}

}  // namespace

SummaryStats SummaryStats::of(std::vector<double> values) {
    if (values.empty()) throw ConfigError("summary statistics need at least one value");
    if (!all_finite(values)) throw NumericError("summary statistics input is not finite");
    std::sort(values.begin(), values.end());
    SummaryStats s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    s.median = quantile_sorted(values, 0.5);
    s.q1 = quantile_sorted(values, 0.25);
    s.q3 = quantile_sorted(values, 0.75);
    s.min = values.front();
    s.max = values.back();
    return s;
}

Policy tree_policy(const TreeModel& tree) {
    tree.validate();
    return [t = tree](const EnvState& s) {
        return argmax_lowest(t.predict(state_to_features(s, t.scaling())));
    };
}

Policy teacher_greedy_policy(const TeacherModel& model) {
    model.validate();
    return [m = model](const EnvState& s) { return teacher_greedy_action(m, s); };
}

Policy constant_policy(int action_level) {
    if (action_level < 0 || action_level >= kActionCount) {
        throw ConfigError("constant policy action out of range: " + std::to_string(action_level));
    }
    return [action_level](const EnvState&) { return action_level; };
}

RolloutResult rollout_policy(const Policy& policy, const EnvConfig& env_cfg, double start_day,
                             int days, bool keep_log) {
    if (!policy) throw ConfigError("rollout needs a policy");
    if (days <= 0) throw ConfigError("rollout needs days > 0");
    ThermalEnv env(env_cfg);
    env.set_logging(keep_log);
    env.reset(start_day);

    RolloutResult out;
    out.daily_rewards.assign(days, 0.0);
    const long steps_per_day = env_cfg.steps_per_day();
    for (int d = 0; d < days; ++d) {
        for (long i = 0; i < steps_per_day; ++i) {
            const auto rc = env.step(policy(env.state()));
            out.daily_rewards[d] += rc.reward;
            const double residual =
                std::abs(rc.reward + (rc.discomfort + rc.omega * rc.energy_cost));
            out.identity_max_abs_err = std::max(out.identity_max_abs_err, residual);
            ++out.steps;
        }
    }
    if (keep_log) out.log = env.log();
    return out;
}

double fidelity(const TreeModel& tree, const DistillDataset& test) {
    if (test.empty()) throw ConfigError("fidelity needs a non-empty test set");
    long hits = 0;
    for (const auto& s : test.samples) {
        if (argmax_lowest(tree.predict(s.x)) == argmax_lowest(s.target)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

double test_kl(const TreeModel& tree, const DistillDataset& test) {
    if (test.empty()) throw ConfigError("test KL needs a non-empty test set");
    double total = 0.0;
    for (const auto& s : test.samples) {
        total += kl_divergence(s.target, tree.predict(s.x));
    }
    return total / static_cast<double>(test.size());
}

EvaluationReport evaluate_tree(const TreeModel& tree, const std::string& policy_name,
                               const DistillDataset& test, const EnvConfig& env_cfg,
                               double start_day, int days, RolloutResult* rollout_out) {
    EvaluationReport r;
    r.policy = policy_name;
    r.mode = tree.mode() == TreeMode::soft ? "soft" : "hardened";
    const auto roll = rollout_policy(tree_policy(tree), env_cfg, start_day, days);
    if (rollout_out) *rollout_out = roll;
    r.daily_rewards = roll.daily_rewards;
    r.summary = SummaryStats::of(r.daily_rewards);
    r.test_kl = test_kl(tree, test);
    r.fidelity = fidelity(tree, test);
    r.node_count = tree.decision_node_count();
    r.max_depth = tree.max_depth();
    return r;
}

int full_depth_for_budget(int budget) {
    if (budget < 1) {
        throw ConfigError("node budget must be at least 1, got " + std::to_string(budget));
    }
    int depth = 0;
    long nodes = 0;
    while (nodes < budget) {
        nodes = 2 * nodes + 1;
        ++depth;
    }
    if (nodes != budget) {
        throw ConfigError("full-tree budget must be 2^depth - 1 decision nodes, got " +
                          std::to_string(budget));
    }
    return depth;
}

double ComparisonMatrix::pooled_mean(int budget, const std::string& method,
                                     const std::string& mode) const {
    double sum = 0.0;
    long n = 0;
    for (const auto& c : cells) {
        if (c.budget != budget || c.method != method || c.mode != mode) continue;
        for (double r : c.report.daily_rewards) {
            sum += r;
            ++n;
        }
    }
    if (n == 0) {
        throw ConfigError("no cells match budget " + std::to_string(budget) + ", method " +
                          method + ", mode " + mode);
    }
    return sum / static_cast<double>(n);
}

ComparisonMatrix compare_budgets(const DistillDataset& train, const DistillDataset& test,
                                 const TeacherModel& teacher, const EnvConfig& env_cfg,
                                 const std::vector<int>& budgets,
                                 const std::vector<std::uint64_t>& seeds,
                                 const DistillConfig& base_cfg, double eval_start_day,
                                 int eval_days, const ProgressFn& progress, const TreeSink& sink) {
    train.validate();
    test.validate();
    base_cfg.validate();
    if (budgets.empty() || seeds.empty()) throw ConfigError("budgets and seeds must be non-empty");
    for (int b : budgets) full_depth_for_budget(b);

    ComparisonMatrix m;
    m.budgets = budgets;
    m.seeds = seeds;
    m.test_days = eval_days;

    auto note = [&](const std::string& msg) {
        if (progress) progress(msg);
    };
    auto absorb = [&](const RolloutResult& r) {
        m.identity_max_abs_err = std::max(m.identity_max_abs_err, r.identity_max_abs_err);
        m.identity_steps += r.steps;
    };

    note("evaluating teacher and always-off baselines");
    {
        const auto roll = rollout_policy(teacher_greedy_policy(teacher), env_cfg, eval_start_day,
                                         eval_days);
        absorb(roll);
        m.teacher.policy = "teacher";
        m.teacher.mode = "greedy";
        m.teacher.daily_rewards = roll.daily_rewards;
        m.teacher.summary = SummaryStats::of(roll.daily_rewards);
        // The teacher defines the targets, so its own distillation metrics are
        // exact by construction.
        m.teacher.test_kl = 0.0;
        m.teacher.fidelity = 1.0;
    }
    {
        const auto roll = rollout_policy(constant_policy(0), env_cfg, eval_start_day, eval_days);
        absorb(roll);
        m.always_off.policy = "always-off";
        m.always_off.mode = "constant";
        m.always_off.daily_rewards = roll.daily_rewards;
        m.always_off.summary = SummaryStats::of(roll.daily_rewards);
    }

    for (int budget : budgets) {
        const int depth = full_depth_for_budget(budget);
        for (std::uint64_t seed : seeds) {
            DistillConfig cfg = base_cfg;
            cfg.seed = seed;
            cfg.max_decision_nodes = budget;

            note("budget " + std::to_string(budget) + " seed " + std::to_string(seed) +
                 ": training full depth-" + std::to_string(depth));
            auto [full_tree, full_trace] = distill_full(train, depth, cfg);
            if (sink) sink(budget, seed, "full", full_tree, full_trace);

            note("budget " + std::to_string(budget) + " seed " + std::to_string(seed) +
                 ": training asymmetric");
            auto [asym_tree, asym_trace] = distill_asymmetric(train, cfg);
            if (sink) sink(budget, seed, "asymmetric", asym_tree, asym_trace);

            const std::pair<std::string, const TreeModel*> methods[] = {{"full", &full_tree},
                                                                        {"asymmetric", &asym_tree}};
            for (const auto& [method, tree] : methods) {
                RolloutResult roll;
                m.cells.push_back({budget, method, "soft", seed,
                                   evaluate_tree(*tree, method, test, env_cfg, eval_start_day,
                                                 eval_days, &roll)});
                absorb(roll);
                const TreeModel hard = tree->harden();
                m.cells.push_back({budget, method, "hardened", seed,
                                   evaluate_tree(hard, method, test, env_cfg, eval_start_day,
                                                 eval_days, &roll)});
                absorb(roll);
            }
        }
    }
    return m;
}

std::string matrix_to_json(const ComparisonMatrix& m) {
    nlohmann::json j;
    j["schema_version"] = m.schema_version;
    j["budgets"] = m.budgets;
    j["seeds"] = m.seeds;
    j["test_days"] = m.test_days;
    j["teacher"] = report_json(m.teacher);
    j["always_off"] = report_json(m.always_off);
    j["identity_max_abs_err"] = m.identity_max_abs_err;
    j["identity_steps"] = m.identity_steps;
    j["cells"] = nlohmann::json::array();
    for (const auto& c : m.cells) {
        nlohmann::json cj;
        cj["budget"] = c.budget;
        cj["method"] = c.method;
        cj["mode"] = c.mode;
        cj["seed"] = c.seed;
        cj["report"] = report_json(c.report);
        j["cells"].push_back(cj);
    }
    return j.dump(2);
}

std::string matrix_csv(const ComparisonMatrix& m) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "budget,method,mode,seed,day,reward\n";
    auto emit = [&](int budget, const std::string& method, const std::string& mode,
                    std::uint64_t seed, const std::vector<double>& daily) {
        for (std::size_t d = 0; d < daily.size(); ++d) {
            os << budget << ',' << method << ',' << mode << ',' << seed << ',' << d << ','
               << daily[d] << '\n';
        }
    };
    emit(0, "teacher", "greedy", 0, m.teacher.daily_rewards);
    emit(0, "always-off", "constant", 0, m.always_off.daily_rewards);
    for (const auto& c : m.cells) emit(c.budget, c.method, c.mode, c.seed, c.report.daily_rewards);
    return os.str();
}

std::string report_to_json(const EvaluationReport& r) { return report_json(r).dump(2); }

}  // namespace addt
