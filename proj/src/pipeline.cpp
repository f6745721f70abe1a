#include "addt/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "addt/errors.hpp"
#include "json.hpp"

namespace addt {

namespace {

namespace fs = std::filesystem;

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a number");
    }
}

long long parse_integer(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as an integer");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + value +
                          "' as an unsigned integer");
    }
}

std::vector<std::string> split_list(const std::string& key, const std::string& value) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream is(value);
    while (std::getline(is, cur, ',')) {
        const auto a = cur.find_first_not_of(" \t");
        const auto b = cur.find_last_not_of(" \t");
        if (a == std::string::npos) {
            throw ConfigError("config key '" + key + "': empty list item in '" + value + "'");
        }
        parts.push_back(cur.substr(a, b - a + 1));
    }
    return parts;
}

// Shortest exact decimal representation (round-trip safe).
std::string fmt(double v) { return nlohmann::json(v).dump(); }

}  // namespace

void RunSettings::validate() const {
    env.validate();
    teacher.validate();
    distill.validate();
    if (train_days <= 0 || test_days <= 0) {
        throw ConfigError("train_days and test_days must be positive");
    }
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (budgets.empty()) throw ConfigError("budgets must be non-empty");
    for (int b : budgets) {
        if (b < 1) throw ConfigError("budgets must all be >= 1");
    }
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
}

void RunSettings::apply(const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        if (key == "env.timestep_s") env.timestep_s = parse_double(key, value);
        else if (key == "env.thermal_capacitance") env.thermal_capacitance = parse_double(key, value);
        else if (key == "env.loss_coefficient") env.loss_coefficient = parse_double(key, value);
        else if (key == "env.rated_electric_power") env.rated_electric_power = parse_double(key, value);
        else if (key == "env.cop") env.cop = parse_double(key, value);
        else if (key == "env.peak_start_hour") env.peak_start_hour = parse_double(key, value);
        else if (key == "env.peak_end_hour") env.peak_end_hour = parse_double(key, value);
        else if (key == "env.peak_price") env.peak_price = parse_double(key, value);
        else if (key == "env.offpeak_price") env.offpeak_price = parse_double(key, value);
        else if (key == "env.comfort_day") env.comfort_day = parse_double(key, value);
        else if (key == "env.comfort_night") env.comfort_night = parse_double(key, value);
        else if (key == "env.outdoor_mean") env.outdoor_mean = parse_double(key, value);
        else if (key == "env.outdoor_daily_amp") env.outdoor_daily_amp = parse_double(key, value);
        else if (key == "env.outdoor_peak_hour") env.outdoor_peak_hour = parse_double(key, value);
        else if (key == "env.outdoor_seasonal_amp") env.outdoor_seasonal_amp = parse_double(key, value);
        else if (key == "env.outdoor_noise_std") env.outdoor_noise_std = parse_double(key, value);
        else if (key == "env.omega") env.omega = parse_double(key, value);
        else if (key == "env.seed") env.seed = parse_u64(key, value);
        else if (key == "teacher.episodes") teacher.episodes = parse_integer(key, value);
        else if (key == "teacher.learning_rate") teacher.learning_rate = parse_double(key, value);
        else if (key == "teacher.discount") teacher.discount = parse_double(key, value);
        else if (key == "teacher.epsilon_start") teacher.epsilon_start = parse_double(key, value);
        else if (key == "teacher.epsilon_end") teacher.epsilon_end = parse_double(key, value);
        else if (key == "teacher.seed") teacher.seed = parse_u64(key, value);
        else if (key == "data.train_days") train_days = static_cast<int>(parse_integer(key, value));
        else if (key == "data.test_days") test_days = static_cast<int>(parse_integer(key, value));
        else if (key == "data.tau") tau = parse_double(key, value);
        else if (key == "data.spread_starts") {
            if (value == "true") spread_train_starts = true;
            else if (value == "false") spread_train_starts = false;
            else throw ConfigError("config key 'data.spread_starts': expected true or false, got '" + value + "'");
        }
        else if (key == "distill.max_decision_nodes") distill.max_decision_nodes = static_cast<int>(parse_integer(key, value));
        else if (key == "distill.learning_rate") distill.learning_rate = parse_double(key, value);
        else if (key == "distill.epochs") distill.epochs = static_cast<int>(parse_integer(key, value));
        else if (key == "distill.full_epochs") distill.full_epochs = static_cast<int>(parse_integer(key, value));
        else if (key == "distill.temperature_init") distill.temperature_init = parse_double(key, value);
        else if (key == "distill.seed") distill.seed = parse_u64(key, value);
        else if (key == "distill.min_leaf_samples") distill.min_leaf_samples = static_cast<int>(parse_integer(key, value));
        else if (key == "distill.optimizer") {
            if (value == "adam") distill.optimizer = Optimizer::adaptive_moment;
            else if (value == "gd") distill.optimizer = Optimizer::plain_gradient;
            else throw ConfigError("config key 'distill.optimizer': expected adam or gd, got '" + value + "'");
        } else if (key == "distill.leaf_score") {
            if (value == "sum") distill.leaf_score_kind = LeafScoreKind::sum_kl;
            else if (value == "mean") distill.leaf_score_kind = LeafScoreKind::mean_kl;
            else throw ConfigError("config key 'distill.leaf_score': expected sum or mean, got '" + value + "'");
        } else if (key == "compare.budgets") {
            std::vector<int> b;
            for (const auto& part : split_list(key, value)) {
                b.push_back(static_cast<int>(parse_integer(key, part)));
            }
            if (b.empty()) throw ConfigError("config key 'compare.budgets': empty list");
            budgets = std::move(b);
        } else if (key == "compare.seeds") {
            std::vector<std::uint64_t> s;
            for (const auto& part : split_list(key, value)) s.push_back(parse_u64(key, part));
            if (s.empty()) throw ConfigError("config key 'compare.seeds': empty list");
            seeds = std::move(s);
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
}

std::map<std::string, std::string> RunSettings::to_kv() const {
    std::map<std::string, std::string> kv;
    kv["env.timestep_s"] = fmt(env.timestep_s);
    kv["env.thermal_capacitance"] = fmt(env.thermal_capacitance);
    kv["env.loss_coefficient"] = fmt(env.loss_coefficient);
    kv["env.rated_electric_power"] = fmt(env.rated_electric_power);
    kv["env.cop"] = fmt(env.cop);
    kv["env.peak_start_hour"] = fmt(env.peak_start_hour);
    kv["env.peak_end_hour"] = fmt(env.peak_end_hour);
    kv["env.peak_price"] = fmt(env.peak_price);
    kv["env.offpeak_price"] = fmt(env.offpeak_price);
    kv["env.comfort_day"] = fmt(env.comfort_day);
    kv["env.comfort_night"] = fmt(env.comfort_night);
    kv["env.outdoor_mean"] = fmt(env.outdoor_mean);
    kv["env.outdoor_daily_amp"] = fmt(env.outdoor_daily_amp);
    kv["env.outdoor_peak_hour"] = fmt(env.outdoor_peak_hour);
    kv["env.outdoor_seasonal_amp"] = fmt(env.outdoor_seasonal_amp);
    kv["env.outdoor_noise_std"] = fmt(env.outdoor_noise_std);
    kv["env.omega"] = fmt(env.omega);
    kv["env.seed"] = std::to_string(env.seed);
    kv["teacher.episodes"] = std::to_string(teacher.episodes);
    kv["teacher.learning_rate"] = fmt(teacher.learning_rate);
    kv["teacher.discount"] = fmt(teacher.discount);
    kv["teacher.epsilon_start"] = fmt(teacher.epsilon_start);
    kv["teacher.epsilon_end"] = fmt(teacher.epsilon_end);
    kv["teacher.seed"] = std::to_string(teacher.seed);
    kv["data.train_days"] = std::to_string(train_days);
    kv["data.test_days"] = std::to_string(test_days);
    kv["data.tau"] = fmt(tau);
    kv["data.spread_starts"] = spread_train_starts ? "true" : "false";
    kv["distill.max_decision_nodes"] = std::to_string(distill.max_decision_nodes);
    kv["distill.learning_rate"] = fmt(distill.learning_rate);
    kv["distill.epochs"] = std::to_string(distill.epochs);
    kv["distill.full_epochs"] = std::to_string(distill.full_epochs);
    kv["distill.temperature_init"] = fmt(distill.temperature_init);
    kv["distill.optimizer"] =
        distill.optimizer == Optimizer::adaptive_moment ? "adam" : "gd";
    kv["distill.seed"] = std::to_string(distill.seed);
    kv["distill.leaf_score"] =
        distill.leaf_score_kind == LeafScoreKind::sum_kl ? "sum" : "mean";
    kv["distill.min_leaf_samples"] = std::to_string(distill.min_leaf_samples);
    {
        std::string b;
        for (std::size_t i = 0; i < budgets.size(); ++i) {
            if (i) b += ',';
            b += std::to_string(budgets[i]);
        }
        kv["compare.budgets"] = b;
        std::string s;
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            if (i) s += ',';
            s += std::to_string(seeds[i]);
        }
        kv["compare.seeds"] = s;
    }
    return kv;
}

std::map<std::string, std::string> load_kv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    long line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        const auto b = line.find_last_not_of(" \t\r");
        line = line.substr(a, b - a + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config file " + path + " line " + std::to_string(line_no) +
                              ": expected key=value");
        }
        auto trim = [](std::string s) {
            const auto x = s.find_first_not_of(" \t");
            if (x == std::string::npos) return std::string{};
            const auto y = s.find_last_not_of(" \t");
            return s.substr(x, y - x + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config file " + path + " line " + std::to_string(line_no) +
                              ": empty key");
        }
        kv[key] = value;
    }
    return kv;
}

std::string settings_snapshot(const RunSettings& s) {
    std::ostringstream os;
    os << "# resolved configuration (complete; loadable with --config)\n";
    for (const auto& [key, value] : s.to_kv()) os << key << '=' << value << '\n';
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open file for writing: " + path);
    os << content;
    if (!os) throw ConfigError("failed writing file: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open file: " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

ReproduceResult reproduce(const RunSettings& settings, const std::string& out_dir,
                          const ProgressFn& progress) {
    settings.validate();
    const fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out / "trees", ec);
    if (ec) throw ConfigError("cannot create output directory: " + (out / "trees").string());

    auto note = [&](const std::string& msg) {
        if (progress) progress(msg);
    };

    ReproduceResult res;
    res.out_dir = out.string();
    res.snapshot_path = (out / "config.resolved").string();
    write_text_file(res.snapshot_path, settings_snapshot(settings));

    note("training teacher (" + std::to_string(settings.teacher.episodes) + " episodes)");
    const auto trained = teacher_train(settings.env, settings.teacher);
    res.teacher_path = (out / "teacher.jsonl").string();
    save_teacher(trained.model, res.teacher_path);
    res.curve_path = (out / "teacher_curve.csv").string();
    write_text_file(res.curve_path, training_curve_csv(trained.curve));

    note("generating datasets (" + std::to_string(settings.train_days) + "+" +
         std::to_string(settings.test_days) + " days)");
    const auto train = generate_dataset(trained.model, settings.env, settings.train_days,
                                        settings.tau, 0.0, nullptr, settings.spread_train_starts);
    const auto test = generate_dataset(trained.model, settings.env, settings.test_days,
                                       settings.tau, settings.train_days, &train.scaling);
    res.train_path = (out / "train.jsonl").string();
    res.test_path = (out / "test.jsonl").string();
    save_dataset(train, res.train_path);
    save_dataset(test, res.test_path);

    const auto sink = [&](int budget, std::uint64_t seed, const std::string& method,
                          const TreeModel& tree, const TrainTrace& trace) {
        const std::string stem =
            method + "_b" + std::to_string(budget) + "_s" + std::to_string(seed);
        save_tree(tree, (out / "trees" / (stem + ".json")).string());
        save_tree(tree.harden(), (out / "trees" / (stem + ".hard.json")).string());
        write_text_file((out / "trees" / (stem + "_trace.csv")).string(), trace_to_csv(trace));
    };

    res.matrix = compare_budgets(train, test, trained.model, settings.env, settings.budgets,
                                 settings.seeds, settings.distill,
                                 static_cast<double>(settings.train_days), settings.test_days,
                                 progress, sink);

    res.matrix_json_path = (out / "matrix.json").string();
    write_text_file(res.matrix_json_path, matrix_to_json(res.matrix));
    res.rewards_csv_path = (out / "rewards.csv").string();
    write_text_file(res.rewards_csv_path, matrix_csv(res.matrix));
    note("wrote " + res.matrix_json_path);
    return res;
}

}  // namespace addt
