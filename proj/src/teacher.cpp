#include "addt/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "addt/errors.hpp"
#include "addt/numeric.hpp"
#include "json.hpp"

namespace addt {

namespace {

int bin_of(double v, double lo, double step, int nbins) {
    const int b = static_cast<int>(std::floor((v - lo) / step));
    return std::clamp(b, 0, nbins - 1);
}

constexpr std::array<double, kActionCount> kZeroQ{};

}  // namespace

int Discretization::tz_bins() const {
    return static_cast<int>(std::lround((tz_hi - tz_lo) / tz_step));
}

int Discretization::to_bins() const {
    return static_cast<int>(std::lround((to_hi - to_lo) / to_step));
}

long Discretization::state_count() const {
    return static_cast<long>(hour_bins) * tz_bins() * to_bins() * 2;
}

void Discretization::validate() const {
    if (hour_bins < 1) throw ConfigError("hour_bins must be >= 1");
    if (!(tz_step > 0.0) || !(tz_hi > tz_lo)) throw ConfigError("bad zone-temperature grid");
    if (!(to_step > 0.0) || !(to_hi > to_lo)) throw ConfigError("bad outdoor-temperature grid");
    if (!(ts_high > ts_low)) throw ConfigError("comfort setpoints must satisfy ts_high > ts_low");
}

long Discretization::key_of(const EnvState& s) const {
    const int hb = std::clamp(static_cast<int>(std::floor(s.hour)), 0, hour_bins - 1);
    const int zb = bin_of(s.zone_temp, tz_lo, tz_step, tz_bins());
    const int ob = bin_of(s.outdoor_temp, to_lo, to_step, to_bins());
    const int sb = s.comfort_lower >= 0.5 * (ts_low + ts_high) ? 1 : 0;
    return ((static_cast<long>(hb) * tz_bins() + zb) * to_bins() + ob) * 2 + sb;
}

void TeacherModel::validate() const {
    for (const auto& [key, q] : q_values) {
        if (!all_finite(q)) {
            throw ValidationError("teacher Q-vector not finite at state key " +
                                  std::to_string(key));
        }
        if (key < 0 || key >= disc.state_count()) {
            throw ValidationError("teacher state key out of range: " + std::to_string(key));
        }
    }
}

void TeacherTrainConfig::validate() const {
    if (episodes < 0) throw ConfigError("episodes must be non-negative");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
        throw ConfigError("learning_rate must be in (0,1]");
    }
    if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("discount must be in (0,1)");
    if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0 || epsilon_end > 1.0) {
        throw ConfigError("epsilon schedule endpoints must be in [0,1]");
    }
}

TeacherTrainResult teacher_train(const EnvConfig& env_cfg, const TeacherTrainConfig& cfg,
                                 const Discretization& disc_in) {
    env_cfg.validate();
    cfg.validate();
    disc_in.validate();

    TeacherTrainResult out;
    out.model.kind = TeacherModel::Kind::tabular;
    out.model.disc = disc_in;
    auto& q_values = out.model.q_values;
    const Discretization& disc = out.model.disc;

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_int_distribution<int> uact(0, kActionCount - 1);
    const long steps = env_cfg.steps_per_day();

    auto q_read = [&](long key) -> const std::array<double, kActionCount>& {
        const auto it = q_values.find(key);
        return it == q_values.end() ? kZeroQ : it->second;
    };

    // Per-pair Robbins-Monro style step decay keeps late updates from washing
    // out converged entries.
    std::unordered_map<long, std::array<int, kActionCount>> visits;

    for (long e = 0; e < cfg.episodes; ++e) {
        const double frac =
            cfg.episodes > 1 ? static_cast<double>(e) / static_cast<double>(cfg.episodes - 1) : 0.0;
        const double eps = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
        EnvState s = env_reset(env_cfg, static_cast<double>(e % 365));
        // Spread episode starts over the zone-temperature grid; a fixed warm
        // start never visits cold mornings, so recovery actions go unlearned.
        s.zone_temp = disc.tz_lo + (disc.tz_hi - disc.tz_lo) * u01(rng);
        double ret = 0.0;
        for (long i = 0; i < steps; ++i) {
            const long key = disc.key_of(s);
            int a;
            if (u01(rng) < eps) {
                a = uact(rng);
            } else {
                a = argmax_lowest(q_read(key));
            }
            auto [s2, rc] = env_step(s, a, env_cfg);
            const auto& next_q = q_read(disc.key_of(s2));
            const double best_next = *std::max_element(next_q.begin(), next_q.end());
            const int n = visits[key][a]++;
            const double lr = cfg.learning_rate * 50.0 / (50.0 + n);
            auto& qv = q_values[key];
            qv[a] += lr * (rc.reward + cfg.discount * best_next - qv[a]);
            ret += rc.reward;
            s = s2;
        }
        out.curve.push_back({e, eps, ret});
    }
    out.model.validate();
    return out;
}

std::string training_curve_csv(const std::vector<EpisodeStat>& curve) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "episode,epsilon,return\n";
    for (const auto& st : curve) {
        os << st.episode << ',' << st.epsilon << ',' << st.episode_return << '\n';
    }
    return os.str();
}

std::vector<double> teacher_distribution(const TeacherModel& model, const EnvState& state,
                                         double tau) {
    if (!(tau > 0.0)) throw ConfigError("softmax temperature must be positive");
    const auto it = model.q_values.find(model.disc.key_of(state));
    if (it == model.q_values.end()) {
        ++model.missing_lookups;
        return std::vector<double>(kActionCount, 1.0 / kActionCount);
    }
    std::vector<double> scaled(kActionCount);
    for (int a = 0; a < kActionCount; ++a) scaled[a] = it->second[a] / tau;
    return softmax(scaled);
}

int teacher_greedy_action(const TeacherModel& model, const EnvState& state) {
    const auto it = model.q_values.find(model.disc.key_of(state));
    if (it == model.q_values.end()) {
        ++model.missing_lookups;
        return 0;
    }
    return argmax_lowest(it->second);
}

DistillDataset generate_dataset(const TeacherModel& model, const EnvConfig& env_cfg, int days,
                                double tau, double start_day,
                                const FeatureScaling* reuse_scaling, bool spread_starts) {
    env_cfg.validate();
    model.validate();
    if (days <= 0) throw ConfigError("dataset generation needs days > 0");
    if (!(tau > 0.0)) throw ConfigError("softmax temperature must be positive");

    ThermalEnv env(env_cfg);
    env.reset(start_day);
    const long steps = env_cfg.steps_per_day();
    const long total = static_cast<long>(days) * steps;
    // Same spreading trick as teacher training: without it the set only shows
    // the teacher's preferred temperature band and a student that drifts out
    // of it has never seen the way back.
    std::mt19937_64 start_rng(env_cfg.seed ^ 0x9E3779B97F4A7C15ULL);
    std::uniform_real_distribution<double> start_u(model.disc.tz_lo, model.disc.tz_hi);
    std::vector<std::vector<double>> raw;
    std::vector<std::vector<double>> targets;
    raw.reserve(total);
    targets.reserve(total);
    for (long i = 0; i < total; ++i) {
        if (spread_starts && i % steps == 0) {
            env.reset(start_day + static_cast<double>(i / steps));
            EnvState warm = env.state();
            warm.zone_temp = start_u(start_rng);
            env.set_state(warm);
        }
        const EnvState& s = env.state();
        raw.push_back(state_to_features(s, FeatureScaling{}));
        targets.push_back(teacher_distribution(model, s, tau));
        env.step(teacher_greedy_action(model, s));
    }

    DistillDataset d;
    d.scaling = reuse_scaling ? *reuse_scaling : compute_scaling(raw);
    d.samples.reserve(total);
    for (long i = 0; i < total; ++i) {
        d.samples.push_back({d.scaling.standardize(raw[i]), std::move(targets[i])});
    }
    d.feature_names = {"hour_frac", "T_z", "T_o", "T_s"};
    d.action_names = {"off", "low", "medium", "high", "max"};
    d.meta.tau = tau;
    d.meta.seed = env_cfg.seed;
    d.meta.env_config_hash = env_config_fingerprint(env_cfg);
    d.meta.start_day = std::lround(start_day);
    d.meta.days = days;
    d.validate();
    return d;
}

void save_teacher(const TeacherModel& model, const std::string& path) {
    model.validate();
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open teacher file for writing: " + path);

    nlohmann::json header;
    header["kind"] = "teacher";
    header["model_kind"] =
        model.kind == TeacherModel::Kind::tabular ? "tabular" : "external-table";
    header["discretization"] = {
        {"hour_bins", model.disc.hour_bins}, {"tz_lo", model.disc.tz_lo},
        {"tz_hi", model.disc.tz_hi},         {"tz_step", model.disc.tz_step},
        {"to_lo", model.disc.to_lo},         {"to_hi", model.disc.to_hi},
        {"to_step", model.disc.to_step},     {"ts_low", model.disc.ts_low},
        {"ts_high", model.disc.ts_high}};
    os << header.dump() << '\n';

    std::vector<long> keys;
    keys.reserve(model.q_values.size());
    for (const auto& [key, q] : model.q_values) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    for (long key : keys) {
        const auto& q = model.q_values.at(key);
        nlohmann::json rec;
        rec["key"] = key;
        rec["q"] = std::vector<double>(q.begin(), q.end());
        os << rec.dump() << '\n';
    }
    if (!os) throw ConfigError("failed writing teacher file: " + path);
}

TeacherModel load_external_teacher(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open teacher file: " + path);

    TeacherModel model;
    model.kind = TeacherModel::Kind::external_table;

    std::string line;
    long line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("teacher file line " + std::to_string(line_no) + ": " +
                                  e.what());
        }
        if (!rec.is_object()) {
            throw ValidationError("teacher file line " + std::to_string(line_no) +
                                  ": expected an object");
        }
        if (rec.value("kind", "") == "teacher") {
            if (rec.contains("discretization")) {
                const auto& dj = rec["discretization"];
                Discretization d;
                d.hour_bins = dj.value("hour_bins", d.hour_bins);
                d.tz_lo = dj.value("tz_lo", d.tz_lo);
                d.tz_hi = dj.value("tz_hi", d.tz_hi);
                d.tz_step = dj.value("tz_step", d.tz_step);
                d.to_lo = dj.value("to_lo", d.to_lo);
                d.to_hi = dj.value("to_hi", d.to_hi);
                d.to_step = dj.value("to_step", d.to_step);
                d.ts_low = dj.value("ts_low", d.ts_low);
                d.ts_high = dj.value("ts_high", d.ts_high);
                model.disc = d;
            }
            continue;
        }

        if (!rec.contains("q") || !rec["q"].is_array()) {
            throw ValidationError("teacher file line " + std::to_string(line_no) +
                                  ": missing q array");
        }
        if (rec["q"].size() != static_cast<std::size_t>(kActionCount)) {
            throw ValidationError("teacher file line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(kActionCount) + " Q-values, got " +
                                  std::to_string(rec["q"].size()));
        }
        std::array<double, kActionCount> q{};
        for (int a = 0; a < kActionCount; ++a) {
            if (!rec["q"][a].is_number()) {
                throw ValidationError("teacher file line " + std::to_string(line_no) +
                                      ": q entries must be numbers");
            }
            q[a] = rec["q"][a].get<double>();
        }

        long key;
        if (rec.contains("key")) {
            if (!rec["key"].is_number_integer()) {
                throw ValidationError("teacher file line " + std::to_string(line_no) +
                                      ": key must be an integer");
            }
            key = rec["key"].get<long>();
        } else if (rec.contains("state")) {
            const auto& sj = rec["state"];
            for (const char* field : {"hour", "T_z", "T_o", "T_s"}) {
                if (!sj.contains(field) || !sj[field].is_number()) {
                    throw ValidationError("teacher file line " + std::to_string(line_no) +
                                          ": state needs numeric " + std::string(field));
                }
            }
            EnvState s;
            s.hour = sj["hour"].get<double>();
            s.zone_temp = sj["T_z"].get<double>();
            s.outdoor_temp = sj["T_o"].get<double>();
            s.comfort_lower = sj["T_s"].get<double>();
            key = model.disc.key_of(s);
        } else {
            throw ValidationError("teacher file line " + std::to_string(line_no) +
                                  ": record needs a key or a state");
        }
        model.q_values[key] = q;
    }
    model.validate();
    return model;
}

}  // namespace addt
