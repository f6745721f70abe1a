// Command-line front end chaining teacher training, dataset generation,
// distillation, evaluation, and export into one reproducible pipeline.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "addt/errors.hpp"
#include "addt/pipeline.hpp"

namespace fs = std::filesystem;
using namespace addt;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "key=value settings file");
    cmd->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--set", opts.overrides, "extra key=value override (repeatable)");
    cmd->add_option("--seed", opts.seed, "set env.seed, teacher.seed and distill.seed at once")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
}

RunSettings resolve(const CommonOpts& opts) {
    RunSettings s;
    if (!opts.config_path.empty()) s.apply(load_kv_file(opts.config_path));
    std::map<std::string, std::string> kv;
    for (const auto& item : opts.overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("--set expects key=value, got '" + item + "'");
        }
        kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
    s.apply(kv);
    if (opts.seed_set) {
        s.env.seed = opts.seed;
        s.teacher.seed = opts.seed;
        s.distill.seed = opts.seed;
    }
    s.validate();
    return s;
}

fs::path prepare_out(const CommonOpts& opts, const RunSettings& s) {
    fs::create_directories(fs::path(opts.out_dir));
    const fs::path out(opts.out_dir);
    write_text_file((out / "config.resolved").string(), settings_snapshot(s));
    return out;
}

void require_file(const fs::path& p, const std::string& hint) {
    if (!fs::exists(p)) {
        throw ValidationError("missing required artifact " + p.string() + " (" + hint + ")");
    }
}

TeacherModel load_teacher_file(const fs::path& p) {
    require_file(p, "run train-teacher first");
    return load_external_teacher(p.string());
}

int cmd_train_teacher(const CommonOpts& opts) {
    const RunSettings s = resolve(opts);
    const fs::path out = prepare_out(opts, s);
    if (s.teacher.episodes == 0) {
        std::cerr << "warning: teacher.episodes=0 leaves the Q-table empty;"
                  << " the greedy policy degenerates to the first action\n";
    }
    const auto trained = teacher_train(s.env, s.teacher);
    save_teacher(trained.model, (out / "teacher.jsonl").string());
    write_text_file((out / "teacher_curve.csv").string(), training_curve_csv(trained.curve));
    std::cout << "wrote " << (out / "teacher.jsonl").string() << " ("
              << trained.model.q_values.size() << " visited states)\n";
    return 0;
}

int cmd_gen_dataset(const CommonOpts& opts, const std::string& teacher_override) {
    const RunSettings s = resolve(opts);
    const fs::path out = prepare_out(opts, s);
    const fs::path teacher_path =
        teacher_override.empty() ? out / "teacher.jsonl" : fs::path(teacher_override);
    const TeacherModel teacher = load_teacher_file(teacher_path);

    const auto train = generate_dataset(teacher, s.env, s.train_days, s.tau, 0.0, nullptr,
                                        s.spread_train_starts);
    const auto test = generate_dataset(teacher, s.env, s.test_days, s.tau,
                                       static_cast<double>(s.train_days), &train.scaling);
    save_dataset(train, (out / "train.jsonl").string());
    save_dataset(test, (out / "test.jsonl").string());
    std::cout << "wrote " << (out / "train.jsonl").string() << " (" << train.size()
              << " samples) and " << (out / "test.jsonl").string() << " (" << test.size()
              << " samples)\n";
    return 0;
}

int cmd_distill(const CommonOpts& opts, const std::string& mode, int nodes,
                const std::string& data_override) {
    const RunSettings s = resolve(opts);
    const fs::path out = prepare_out(opts, s);
    const fs::path data_path =
        data_override.empty() ? out / "train.jsonl" : fs::path(data_override);
    require_file(data_path, "run gen-dataset first");
    const DistillDataset train = load_dataset(data_path.string());

    DistillConfig cfg = s.distill;
    cfg.max_decision_nodes = nodes;

    TreeModel tree = TreeModel::leaf_stub(1, 1);
    TrainTrace trace;
    if (mode == "full") {
        std::tie(tree, trace) = distill_full(train, full_depth_for_budget(nodes), cfg);
    } else if (mode == "asymmetric") {
        std::tie(tree, trace) = distill_asymmetric(train, cfg);
    } else {
        throw ConfigError("--mode must be full or asymmetric, got '" + mode + "'");
    }

    fs::create_directories(out / "trees");
    const std::string stem =
        mode + "_b" + std::to_string(nodes) + "_s" + std::to_string(cfg.seed);
    const std::string soft_path = (out / "trees" / (stem + ".json")).string();
    save_tree(tree, soft_path);
    save_tree(tree.harden(), (out / "trees" / (stem + ".hard.json")).string());
    write_text_file((out / "trees" / (stem + "_trace.csv")).string(), trace_to_csv(trace));
    std::cout << "wrote " << soft_path << " (" << tree.decision_node_count()
              << " decision nodes, depth " << tree.max_depth() << ")\n";
    return 0;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& tree_path,
                 const std::string& data_override) {
    const RunSettings s = resolve(opts);
    const fs::path out = prepare_out(opts, s);
    require_file(tree_path, "pass --tree");
    const fs::path data_path =
        data_override.empty() ? out / "test.jsonl" : fs::path(data_override);
    require_file(data_path, "run gen-dataset first");

    const TreeModel tree = load_tree(tree_path);
    const DistillDataset test = load_dataset(data_path.string());
    const std::string stem = fs::path(tree_path).stem().string();

    std::string csv = "mode,day,reward\n";
    std::string reports = "[";
    bool first = true;
    for (const bool hard : {false, true}) {
        const TreeModel m = hard ? tree.harden() : tree;
        const auto report = evaluate_tree(m, stem, test, s.env,
                                          static_cast<double>(s.train_days), s.test_days);
        for (std::size_t d = 0; d < report.daily_rewards.size(); ++d) {
            csv += report.mode + "," + std::to_string(d) + "," +
                   std::to_string(report.daily_rewards[d]) + "\n";
        }
        reports += (first ? "" : ",") + report_to_json(report);
        first = false;
    }
    reports += "]";
    write_text_file((out / (stem + ".report.json")).string(), reports);
    write_text_file((out / (stem + ".daily.csv")).string(), csv);
    std::cout << "wrote " << (out / (stem + ".report.json")).string() << "\n";
    return 0;
}

int cmd_compare(const CommonOpts& opts) {
    const RunSettings s = resolve(opts);
    const fs::path out = prepare_out(opts, s);
    const TeacherModel teacher = load_teacher_file(out / "teacher.jsonl");
    require_file(out / "train.jsonl", "run gen-dataset first");
    require_file(out / "test.jsonl", "run gen-dataset first");
    const DistillDataset train = load_dataset((out / "train.jsonl").string());
    const DistillDataset test = load_dataset((out / "test.jsonl").string());

    fs::create_directories(out / "trees");
    const auto sink = [&](int budget, std::uint64_t seed, const std::string& method,
                          const TreeModel& tree, const TrainTrace& trace) {
        const std::string stem =
            method + "_b" + std::to_string(budget) + "_s" + std::to_string(seed);
        save_tree(tree, (out / "trees" / (stem + ".json")).string());
        save_tree(tree.harden(), (out / "trees" / (stem + ".hard.json")).string());
        write_text_file((out / "trees" / (stem + "_trace.csv")).string(), trace_to_csv(trace));
    };
    const auto progress = [](const std::string& msg) { std::cout << "  " << msg << "\n"; };

    const ComparisonMatrix matrix = compare_budgets(
        train, test, teacher, s.env, s.budgets, s.seeds, s.distill,
        static_cast<double>(s.train_days), s.test_days, progress, sink);
    write_text_file((out / "matrix.json").string(), matrix_to_json(matrix));
    write_text_file((out / "rewards.csv").string(), matrix_csv(matrix));
    std::cout << "wrote " << (out / "matrix.json").string() << "\n";
    return 0;
}

int cmd_export(const CommonOpts& opts, const std::string& tree_path, const std::string& format,
               std::string output, const std::string& data_override) {
    const RunSettings s = resolve(opts);
    const fs::path out = prepare_out(opts, s);
    require_file(tree_path, "pass --tree");
    const TreeModel tree = load_tree(tree_path);
    const std::string stem = fs::path(tree_path).stem().string();

    if (format == "json") {
        if (output.empty()) output = (out / (stem + ".export.json")).string();
        save_tree(tree, output);
    } else if (format == "dot") {
        std::vector<std::string> features{"hour_frac", "T_z", "T_o", "T_s"};
        std::vector<std::string> actions{"off", "low", "medium", "high", "max"};
        if (!data_override.empty()) {
            const DistillDataset data = load_dataset(data_override);
            features = data.feature_names;
            actions = data.action_names;
        }
        if (static_cast<int>(features.size()) != tree.input_dim()) {
            features.clear();
            for (int i = 0; i < tree.input_dim(); ++i) features.push_back("x" + std::to_string(i));
        }
        if (static_cast<int>(actions.size()) != tree.action_count()) {
            actions.clear();
            for (int a = 0; a < tree.action_count(); ++a) actions.push_back("a" + std::to_string(a));
        }
        if (output.empty()) output = (out / (stem + ".dot")).string();
        write_text_file(output, export_dot(tree, features, actions));
    } else {
        throw ConfigError("--format must be json or dot, got '" + format + "'");
    }
    std::cout << "wrote " << output << "\n";
    return 0;
}

int cmd_reproduce(const CommonOpts& opts) {
    const RunSettings s = resolve(opts);
    const auto progress = [](const std::string& msg) { std::cout << "  " << msg << "\n"; };
    const ReproduceResult res = reproduce(s, opts.out_dir, progress);

    const auto& m = res.matrix;
    std::printf("teacher mean daily reward %.2f, always-off %.2f\n",
                m.teacher.summary.mean, m.always_off.summary.mean);
    for (const int b : m.budgets) {
        std::printf("  budget %2d  hardened: full %8.2f  asymmetric %8.2f\n", b,
                    m.pooled_mean(b, "full", "hardened"),
                    m.pooled_mean(b, "asymmetric", "hardened"));
    }
    std::cout << "wrote " << res.matrix_json_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"asymmetric decision-tree distillation pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string mode = "asymmetric";
    int nodes = 7;
    std::string tree_path;
    std::string data_path;
    std::string teacher_path;
    std::string format = "json";
    std::string output;

    auto* train_teacher = app.add_subcommand("train-teacher", "train the tabular Q teacher");
    add_common(train_teacher, opts);

    auto* gen = app.add_subcommand("gen-dataset", "roll out the teacher into train/test sets");
    add_common(gen, opts);
    gen->add_option("--teacher", teacher_path, "teacher file (default <out>/teacher.jsonl)");

    auto* distill = app.add_subcommand("distill", "train one distilled tree");
    add_common(distill, opts);
    distill->add_option("--mode", mode, "full or asymmetric")->capture_default_str();
    distill->add_option("--nodes", nodes, "decision-node budget")->capture_default_str();
    distill->add_option("--data", data_path, "training set (default <out>/train.jsonl)");

    auto* evaluate = app.add_subcommand("evaluate", "evaluate one tree file");
    add_common(evaluate, opts);
    evaluate->add_option("--tree", tree_path, "tree file")->required();
    evaluate->add_option("--data", data_path, "test set (default <out>/test.jsonl)");

    auto* compare = app.add_subcommand("compare", "budget sweep from cached artifacts");
    add_common(compare, opts);

    auto* exp = app.add_subcommand("export", "re-serialize a tree as json or dot");
    add_common(exp, opts);
    exp->add_option("--tree", tree_path, "tree file")->required();
    exp->add_option("--format", format, "json or dot")->capture_default_str();
    exp->add_option("--output", output, "output path (default derived from the tree name)");
    exp->add_option("--data", data_path, "dataset supplying feature/action names");

    auto* repro = app.add_subcommand("reproduce", "full pipeline with one command");
    add_common(repro, opts);

    try {
        app.parse(argc, argv);
        if (train_teacher->parsed()) return cmd_train_teacher(opts);
        if (gen->parsed()) return cmd_gen_dataset(opts, teacher_path);
        if (distill->parsed()) return cmd_distill(opts, mode, nodes, data_path);
        if (evaluate->parsed()) return cmd_evaluate(opts, tree_path, data_path);
        if (compare->parsed()) return cmd_compare(opts);
        if (exp->parsed()) return cmd_export(opts, tree_path, format, output, data_path);
        if (repro->parsed()) return cmd_reproduce(opts);
        throw ConfigError("no subcommand selected");
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
