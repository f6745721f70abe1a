#pragma once

#include <map>
#include <string>
#include <vector>

#include "addt/distill.hpp"
#include "addt/env.hpp"
#include "addt/evaluate.hpp"
#include "addt/teacher.hpp"

namespace addt {

// Every knob of the end-to-end pipeline, loadable from a key=value file and
// dumpable back as a resolved snapshot.
struct RunSettings {
    EnvConfig env;
    TeacherTrainConfig teacher;
    int train_days = 60;
    int test_days = 14;
    double tau = 1.0;
    // Train-split days restart from random zone temperatures so the dataset
    // covers recovery behaviour; the test split stays a consecutive rollout.
    bool spread_train_starts = true;
    DistillConfig distill;
    std::vector<int> budgets{3, 7, 15, 31};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

    void validate() const;

    // Applies `kv` on top of the current values; unknown keys or unparseable
    // values raise ConfigError naming the key.
    void apply(const std::map<std::string, std::string>& kv);
    // Complete resolved key set (inverse of apply).
    std::map<std::string, std::string> to_kv() const;
};

// key=value lines; '#' starts a comment, blank lines ignored. Errors carry
// line numbers.
std::map<std::string, std::string> load_kv_file(const std::string& path);
// Sorted, loadable-back snapshot text.
std::string settings_snapshot(const RunSettings& s);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

struct ReproduceResult {
    ComparisonMatrix matrix;
    std::string out_dir;
    std::string teacher_path;
    std::string curve_path;
    std::string train_path;
    std::string test_path;
    std::string matrix_json_path;
    std::string rewards_csv_path;
    std::string snapshot_path;
};

// Full chain: train teacher -> generate train/test datasets -> distill full +
// asymmetric per (budget, seed) -> evaluate -> comparison matrix. All
// artifacts land under out_dir (created if needed); every tree, trace, and
// report is written as a file.
ReproduceResult reproduce(const RunSettings& settings, const std::string& out_dir,
                          const ProgressFn& progress = {});

}  // namespace addt
