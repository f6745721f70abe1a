#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "addt/tree.hpp"

namespace addt {

// One distillation sample: standardized feature vector plus the teacher's
// target action distribution at that state.
struct DistillSample {
    std::vector<double> x;
    std::vector<double> target;
};

struct DatasetMeta {
    double tau = 1.0;
    std::uint64_t seed = 0;
    std::string env_config_hash;
    long start_day = 0;
    long days = 0;
};

struct DistillDataset {
    std::vector<DistillSample> samples;
    FeatureScaling scaling;
    std::vector<std::string> feature_names;
    std::vector<std::string> action_names;
    DatasetMeta meta;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    int input_dim() const { return samples.empty() ? static_cast<int>(scaling.means.size())
                                                   : static_cast<int>(samples[0].x.size()); }
    int action_count() const {
        return samples.empty() ? 0 : static_cast<int>(samples[0].target.size());
    }

    // Per-sample invariants (dimensions, finiteness, target simplex).
    void validate() const;
};

// Mean/std per feature over raw (unstandardized) rows. Near-constant features
// get std 1 so standardization stays invertible.
FeatureScaling compute_scaling(const std::vector<std::vector<double>>& raw_rows);

// Line-delimited JSON: one header record, then one {x, target} record per
// sample with x in raw units. Loading re-applies the header's scaling.
void save_dataset(const DistillDataset& data, const std::string& path);
DistillDataset load_dataset(const std::string& path);

}  // namespace addt
