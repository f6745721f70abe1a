#pragma once

// Test-side oracles and generators, implemented independently of the library
// internals: finite-difference gradients, exhaustive single-split search, and
// random tree/dataset builders.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "addt/dataset.hpp"
#include "addt/distill.hpp"
#include "addt/tree.hpp"

namespace testsupport {

inline addt::TreeModel random_tree(int decision_nodes, int d, int A, std::mt19937& rng) {
    std::uniform_real_distribution<double> wdist(-1.5, 1.5);
    std::uniform_real_distribution<double> bdist(-1.0, 1.0);
    std::uniform_real_distribution<double> ldist(-3.0, 3.0);
    addt::TreeModel t = addt::TreeModel::leaf_stub(d, A);
    for (int k = 0; k < decision_nodes; ++k) {
        auto leaves = t.leaf_ids();
        const int leaf = leaves[rng() % leaves.size()];
        addt::DecisionNodeParams p;
        p.weights.resize(d);
        for (int j = 0; j < d; ++j) p.weights[j] = wdist(rng);
        p.bias = bdist(rng);
        p.temperature = 1.0 + 0.5 * static_cast<double>(rng() % 3);
        t.expand(leaf, p);
    }
    for (int id : t.leaf_ids()) {
        for (auto& l : t.node(id).logits) l = ldist(rng);
    }
    return t;
}

inline addt::DistillDataset random_dataset(int n, int d, int A, std::mt19937& rng) {
    std::uniform_real_distribution<double> xdist(-2.0, 2.0);
    std::exponential_distribution<double> edist(1.0);
    addt::DistillDataset data;
    data.scaling.means.assign(d, 0.0);
    data.scaling.stds.assign(d, 1.0);
    for (int i = 0; i < n; ++i) {
        addt::DistillSample s;
        s.x.resize(d);
        for (int j = 0; j < d; ++j) s.x[j] = xdist(rng);
        s.target.resize(A);
        double sum = 0.0;
        for (int a = 0; a < A; ++a) {
            s.target[a] = edist(rng) + 1e-9;
            sum += s.target[a];
        }
        for (int a = 0; a < A; ++a) s.target[a] /= sum;
        data.samples.push_back(std::move(s));
    }
    return data;
}

struct FdCheckResult {
    int checked = 0;
    int failures = 0;
    double worst_rel = 0.0;
    double worst_abs = 0.0;
};

// Central finite differences of dataset_loss against every coordinate of the
// analytic gradient record.
inline FdCheckResult fd_check(addt::TreeModel& tree, const addt::DistillDataset& data,
                              double step = 1e-6, double rel_tol = 1e-4,
                              double abs_tol = 1e-7) {
    const addt::GradientRecord rec = addt::loss_gradient(tree, data);
    FdCheckResult res;

    auto probe = [&](double* param, double analytic) {
        const double saved = *param;
        *param = saved + step;
        const double up = addt::dataset_loss(tree, data);
        *param = saved - step;
        const double down = addt::dataset_loss(tree, data);
        *param = saved;
        const double fd = (up - down) / (2.0 * step);
        const double abs_err = std::abs(analytic - fd);
        const double scale = std::max(std::abs(analytic), std::abs(fd));
        ++res.checked;
        res.worst_abs = std::max(res.worst_abs, abs_err);
        if (scale > 0.0) res.worst_rel = std::max(res.worst_rel, abs_err / scale);
        if (abs_err >= abs_tol && abs_err >= rel_tol * scale) ++res.failures;
    };

    for (int id = 0; id < tree.node_count(); ++id) {
        addt::TreeNode& nd = tree.node(id);
        if (nd.is_leaf) {
            for (std::size_t a = 0; a < nd.logits.size(); ++a) {
                probe(&nd.logits[a], rec.logit_grad[id][a]);
            }
        } else {
            for (std::size_t j = 0; j < nd.split.weights.size(); ++j) {
                probe(&nd.split.weights[j], rec.weight_grad[id][j]);
            }
            probe(&nd.split.bias, rec.bias_grad[id]);
            probe(&nd.split.temperature, rec.temperature_grad[id]);
        }
    }
    return res;
}

// Exhaustive single-split oracle: every midpoint threshold on every feature,
// optimal (mean-target) leaf distributions on each side; returns the best
// achievable mean KL for a 1-decision-node hard tree.
inline double brute_force_single_split(const addt::DistillDataset& data) {
    const int d = data.input_dim();
    const int A = data.action_count();
    const double n = static_cast<double>(data.size());

    auto side_loss = [&](const std::vector<const addt::DistillSample*>& group) {
        if (group.empty()) return 0.0;
        std::vector<double> q(A, 0.0);
        for (const auto* s : group) {
            for (int a = 0; a < A; ++a) q[a] += s->target[a];
        }
        for (int a = 0; a < A; ++a) q[a] /= static_cast<double>(group.size());
        double sum = 0.0;
        for (const auto* s : group) {
            for (int a = 0; a < A; ++a) {
                if (s->target[a] > 0.0) {
                    sum += s->target[a] * std::log(s->target[a] / std::max(q[a], 1e-12));
                }
            }
        }
        return sum;
    };

    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < d; ++j) {
        std::set<double> values;
        for (const auto& s : data.samples) values.insert(s.x[j]);
        std::vector<double> sorted(values.begin(), values.end());
        for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
            const double theta = 0.5 * (sorted[k] + sorted[k + 1]);
            std::vector<const addt::DistillSample*> lo;
            std::vector<const addt::DistillSample*> hi;
            for (const auto& s : data.samples) {
                (s.x[j] >= theta ? hi : lo).push_back(&s);
            }
            best = std::min(best, (side_loss(lo) + side_loss(hi)) / n);
        }
    }
    return best;
}

// The 4-sample 1-D dataset used by the single-split contract.
inline addt::DistillDataset four_sample_dataset() {
    addt::DistillDataset data;
    data.scaling.means = {0.0};
    data.scaling.stds = {1.0};
    const std::vector<double> xs{-1.0, -0.5, 0.5, 1.0};
    for (int i = 0; i < 4; ++i) {
        addt::DistillSample s;
        s.x = {xs[i]};
        s.target = (i < 2) ? std::vector<double>{1, 0, 0, 0, 0}
                           : std::vector<double>{0, 1, 0, 0, 0};
        data.samples.push_back(std::move(s));
    }
    return data;
}

// Staircase-in-one-feature targets: pure action per region of x[feature],
// thresholds at -0.5, 0, 0.5. Needs exactly 3 splits, all on that feature.
inline addt::DistillDataset single_feature_dataset(int n, int d, int feature,
                                                   std::mt19937& rng) {
    std::uniform_real_distribution<double> xdist(-1.0, 1.0);
    addt::DistillDataset data;
    data.scaling.means.assign(d, 0.0);
    data.scaling.stds.assign(d, 1.0);
    for (int i = 0; i < n; ++i) {
        addt::DistillSample s;
        s.x.resize(d);
        for (int j = 0; j < d; ++j) s.x[j] = xdist(rng);
        const double v = s.x[feature];
        const int region = v < -0.5 ? 0 : v < 0.0 ? 1 : v < 0.5 ? 2 : 3;
        s.target.assign(5, 0.0);
        s.target[region] = 1.0;
        data.samples.push_back(std::move(s));
    }
    return data;
}

// XOR-style quadrant targets over 2 features: four balanced corner clusters
// with a distinct pure action each; the optimal structure is a complete
// depth-2 tree and no "sliver" split near a data edge pays off.
inline addt::DistillDataset xor_dataset(int n, std::mt19937& rng) {
    std::uniform_real_distribution<double> jitter(-0.35, 0.35);
    addt::DistillDataset data;
    data.scaling.means.assign(2, 0.0);
    data.scaling.stds.assign(2, 1.0);
    for (int i = 0; i < n; ++i) {
        const int quadrant = i % 4;
        addt::DistillSample s;
        s.x = {(quadrant & 2 ? 1.0 : -1.0) + jitter(rng),
               (quadrant & 1 ? 1.0 : -1.0) + jitter(rng)};
        s.target.assign(5, 0.0);
        s.target[quadrant] = 1.0;
        data.samples.push_back(std::move(s));
    }
    return data;
}

}  // namespace testsupport
