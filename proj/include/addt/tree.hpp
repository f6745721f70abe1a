#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace addt {

// Per-feature affine scaling (means/stds computed from a training split).
// Trees operate on standardized features; raw thresholds are recovered for
// display by inverting the transform.
struct FeatureScaling {
    std::vector<double> means;
    std::vector<double> stds;

    bool empty() const { return means.empty(); }
    std::size_t dim() const { return means.size(); }
    std::vector<double> standardize(std::span<const double> raw) const;
    std::vector<double> unstandardize(std::span<const double> std_x) const;
};

// Soft split of one decision node: p_left = sigmoid(temperature * (x.w + bias)).
struct DecisionNodeParams {
    std::vector<double> weights;
    double bias = 0.0;
    double temperature = 1.0;
};

// Axis-aligned test attached to a decision node by hardening.
// Routes left iff (left_if_geq ? x[feature] >= threshold : x[feature] <= threshold).
struct HardRule {
    int feature = -1;
    double threshold = 0.0;
    bool left_if_geq = true;
};

struct TreeNode {
    bool is_leaf = true;
    // internal nodes
    DecisionNodeParams split;
    int left = -1;
    int right = -1;
    HardRule hard;  // meaningful only in hardened mode
    // leaves
    std::vector<double> logits;
};

enum class TreeMode { soft, hardened };

// Probability of taking the left branch (Eq.-style soft routing). Result is
// clamped to the open unit interval at double precision; the right-branch
// probability is the exact complement 1 - p_left.
double route_prob(const DecisionNodeParams& node, std::span<const double> x);

// Asymmetric binary tree over an arena of nodes. Node ids are arena indices
// and stay stable across leaf expansions (an expanded leaf becomes the new
// internal node in place; its children are appended).
class TreeModel {
public:
    TreeModel() = default;

    // Single-leaf tree with the given logits (all zero if empty).
    static TreeModel leaf_stub(int input_dim, int action_count,
                               std::vector<double> logits = {});

    int input_dim() const { return input_dim_; }
    int action_count() const { return action_count_; }
    TreeMode mode() const { return mode_; }
    void set_mode(TreeMode m) { mode_ = m; }
    int root() const { return root_; }

    const FeatureScaling& scaling() const { return scaling_; }
    void set_scaling(FeatureScaling s) { scaling_ = std::move(s); }

    int node_count() const { return static_cast<int>(nodes_.size()); }
    int decision_node_count() const;
    int leaf_count() const;
    int max_depth() const;
    int depth_of(int id) const;

    const TreeNode& node(int id) const { return nodes_.at(id); }
    TreeNode& node(int id) { return nodes_.at(id); }

    std::vector<int> leaf_ids() const;
    // Ids of all nodes in the subtree rooted at `id`, preorder (parents first).
    std::vector<int> subtree_preorder(int id) const;

    // Replaces leaf `leaf_id` with a decision node carrying `params`; both new
    // children start with the replaced leaf's logits (warm start). Returns
    // {left_child_id, right_child_id}.
    std::pair<int, int> expand(int leaf_id, DecisionNodeParams params);

    // Full mixture over leaves weighted by path probability; soft mode only.
    std::vector<double> predict_soft(std::span<const double> x) const;

    // Deterministic routing by each node's hard rule; hardened mode only.
    // Returns the reached leaf id and its action distribution.
    std::pair<int, std::vector<double>> predict_hard(std::span<const double> x) const;

    // Distribution under the tree's own mode; helper for policy evaluation.
    std::vector<double> predict(std::span<const double> x) const;

    // Hardened copy: every decision node gets an axis-aligned rule on its
    // largest-magnitude weight (ties -> lowest feature index). The original
    // tree is untouched. Throws ValidationError for an all-zero weight node.
    TreeModel harden() const;

    // Structural and dimensional invariants; throws ValidationError on breach.
    void validate() const;

private:
    int input_dim_ = 0;
    int action_count_ = 0;
    TreeMode mode_ = TreeMode::soft;
    int root_ = 0;
    std::vector<TreeNode> nodes_;
    FeatureScaling scaling_;

    friend TreeModel tree_from_json_impl(const void* doc);
};

// JSON document round trip. The document layout is stable:
//   {input_dim, action_count, mode, feature_scaling:{means,stds},
//    nodes:[{id, kind:"internal"|"leaf", ...}]}
std::string serialize_tree(const TreeModel& tree);
TreeModel deserialize_tree(const std::string& json_text);
void save_tree(const TreeModel& tree, const std::string& path);
TreeModel load_tree(const std::string& path);

// Graphviz rendering. Hardened trees render their exact rules; soft trees are
// rendered through the dominant-feature rule and annotated as approximate.
// Thresholds are shown in unstandardized units when the tree carries scaling.
std::string export_dot(const TreeModel& tree,
                       const std::vector<std::string>& feature_names,
                       const std::vector<std::string>& action_names);

}  // namespace addt
