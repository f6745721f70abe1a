#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "addt/dataset.hpp"
#include "addt/tree.hpp"

namespace addt {

enum class Optimizer { plain_gradient, adaptive_moment };
enum class LeafScoreKind { sum_kl, mean_kl };

struct DistillConfig {
    int max_decision_nodes = 7;  // N_max
    double learning_rate = 0.05;
    int epochs = 2000;       // per node-fragment training run
    int full_epochs = 5000;  // full-symmetric baseline training run
    double temperature_init = 1.0;
    Optimizer optimizer = Optimizer::adaptive_moment;
    std::uint64_t seed = 0;
    LeafScoreKind leaf_score_kind = LeafScoreKind::sum_kl;
    int min_leaf_samples = 8;

    void validate() const;
};

// KL(p || q) with 0*log(0) = 0 and q clamped below at 1e-12 inside the log.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Mean per-sample KL(target || predict_soft(x)) over the dataset.
double dataset_loss(const TreeModel& tree, const DistillDataset& data);

// Analytic gradients of dataset_loss, indexed by node id. Internal nodes fill
// weight/bias/temperature rows; leaves fill logit rows; the other rows stay
// empty. Temperature gradients are reported but the trainers keep alpha fixed.
struct GradientRecord {
    double loss = 0.0;
    std::vector<std::vector<double>> weight_grad;
    std::vector<double> bias_grad;
    std::vector<double> temperature_grad;
    std::vector<std::vector<double>> logit_grad;
};

GradientRecord loss_gradient(const TreeModel& tree, const DistillDataset& data);

struct FragmentTrace {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> epoch_loss;  // mean KL at the start of each epoch
};

// Full-batch gradient descent on the connected fragment `trainable` (node
// ids). Only those parameters move; the fragment's loss is measured at its
// apex against `data` (the samples routed to the apex). Best-seen parameters
// are restored at the end, so final_loss <= initial_loss always holds.
FragmentTrace train_subtree(TreeModel& tree, const std::vector<int>& trainable,
                            const DistillDataset& data, const DistillConfig& cfg);

// Selection bookkeeping for Algorithm-style leaf expansion.
struct LeafScoreEntry {
    int leaf_id = -1;
    double score = 0.0;
    long routed_count = 0;
    bool eligible = false;
};

struct ExpansionRecord {
    int expansion_index = -1;
    int leaf_id = -1;          // leaf that was expanded (now the new decision node)
    double score_before = 0.0; // selected leaf's score at selection time
    double subtree_loss_after = 0.0;  // fragment mean KL on its routed samples
    double train_loss_before = 0.0;   // whole-tree mean KL just before expansion
    double train_loss_at_init = 0.0;  // whole-tree mean KL after the structural
                                      // expansion, before any training
    double train_loss_after = 0.0;    // whole-tree mean KL after training
    int node_count = 0;               // decision nodes after this expansion
    int depth_of_new_node = 0;
    std::vector<LeafScoreEntry> all_scores;  // every leaf at selection time
    FragmentTrace fragment;
};

struct TrainTrace {
    std::vector<double> epoch_loss;  // whole-model curve (full baseline runs)
    std::vector<ExpansionRecord> expansions;
    std::string early_stop_reason;  // empty unless stopped before N_max
};

// CSV with columns:
// expansion_index,leaf_id,score_before,loss_after,node_count,depth_of_new_node
// where loss_after is the whole-tree training loss after that expansion.
std::string trace_to_csv(const TrainTrace& trace);

// Sum (default) or mean KL between the leaf's current distribution and the
// targets routed to it.
double leaf_score(const TreeModel& tree, int leaf_id, const DistillDataset& routed,
                  const DistillConfig& cfg);

// Samples routed to each current leaf, keyed by leaf id.
using RoutedData = std::map<int, DistillDataset>;

struct LeafSelection {
    int leaf = -1;  // -1 means no eligible leaf (expansion exhausted)
    std::vector<LeafScoreEntry> scores;
};

// Max-score eligible leaf, ties to the lowest leaf id. A leaf is eligible when
// it has at least 2*min_leaf_samples routed samples.
LeafSelection select_leaf(const TreeModel& tree, const RoutedData& routed,
                          const DistillConfig& cfg);

// Replaces the leaf with a decision node initialized from an exhaustive
// axis-threshold scan of `routed` (falling back to weights ~ U(-0.01, 0.01)
// from rng when the region is degenerate; temperature is always
// cfg.temperature_init), warm-starts both children with the leaf's logits,
// and trains the 3-node fragment on `routed`. When full_data is given, the
// whole-tree losses before / at init / after are recorded too.
ExpansionRecord expand_leaf(TreeModel& tree, int leaf_id, const DistillDataset& routed,
                            const DistillConfig& cfg, std::mt19937_64& rng,
                            const DistillDataset* full_data = nullptr);

// Hard partition by the node's soft routing: left iff route_prob >= 0.5.
std::pair<DistillDataset, DistillDataset> split_dataset(const TreeModel& tree, int node_id,
                                                        const DistillDataset& data);

// Complete tree of the given depth (2^depth - 1 decision nodes): splits are
// scan-initialized region by region, leaves start at their region's mean
// target, then all parameters train simultaneously for cfg.full_epochs
// epochs.
std::pair<TreeModel, TrainTrace> distill_full(const DistillDataset& data, int depth,
                                              const DistillConfig& cfg);

// Observation handed to the expansion observer just before each expansion.
struct ExpansionObservation {
    const TreeModel& tree_before;
    const RoutedData& routed;
    int chosen_leaf;
    const std::vector<LeafScoreEntry>& scores;
};
using ExpansionObserver = std::function<void(const ExpansionObservation&)>;

// Asymmetric construction: train the root on all data, split, then repeatedly
// expand the worst-scoring eligible leaf until cfg.max_decision_nodes decision
// nodes exist (or no leaf is eligible, reported via early_stop_reason).
std::pair<TreeModel, TrainTrace> distill_asymmetric(const DistillDataset& data,
                                                    const DistillConfig& cfg,
                                                    const ExpansionObserver& observer = {});

}  // namespace addt
