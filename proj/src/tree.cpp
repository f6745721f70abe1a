#include "addt/tree.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "addt/errors.hpp"
#include "addt/numeric.hpp"
#include "json.hpp"

namespace addt {

namespace {

constexpr double kProbFloor = 1e-15;  // keeps route_prob inside the open interval

std::string mode_name(TreeMode m) { return m == TreeMode::soft ? "soft" : "hardened"; }

}  // namespace

std::vector<double> FeatureScaling::standardize(std::span<const double> raw) const {
    std::vector<double> out(raw.size());
    for (std::size_t j = 0; j < raw.size(); ++j) out[j] = (raw[j] - means[j]) / stds[j];
    return out;
}

std::vector<double> FeatureScaling::unstandardize(std::span<const double> std_x) const {
    std::vector<double> out(std_x.size());
    for (std::size_t j = 0; j < std_x.size(); ++j) out[j] = std_x[j] * stds[j] + means[j];
    return out;
}

double route_prob(const DecisionNodeParams& node, std::span<const double> x) {
    if (x.size() != node.weights.size()) {
        throw ValidationError("route_prob: feature vector length " + std::to_string(x.size()) +
                              " does not match weight length " +
                              std::to_string(node.weights.size()));
    }
    if (!all_finite(x)) throw ValidationError("route_prob: non-finite feature value");
    if (!(node.temperature > 0.0)) {
        throw ValidationError("route_prob: temperature must be positive");
    }
    double z = node.bias;
    for (std::size_t j = 0; j < x.size(); ++j) z += node.weights[j] * x[j];
    const double p = sigmoid(node.temperature * z);
    return std::min(1.0 - kProbFloor, std::max(kProbFloor, p));
}

TreeModel TreeModel::leaf_stub(int input_dim, int action_count, std::vector<double> logits) {
    if (input_dim < 1 || action_count < 2) {
        throw ValidationError("leaf_stub: need input_dim >= 1 and action_count >= 2");
    }
    if (logits.empty()) logits.assign(action_count, 0.0);
    if (static_cast<int>(logits.size()) != action_count) {
        throw ValidationError("leaf_stub: logits length does not match action count");
    }
    TreeModel t;
    t.input_dim_ = input_dim;
    t.action_count_ = action_count;
    TreeNode leaf;
    leaf.is_leaf = true;
    leaf.logits = std::move(logits);
    t.nodes_.push_back(std::move(leaf));
    return t;
}

int TreeModel::decision_node_count() const {
    int n = 0;
    for (const auto& nd : nodes_) n += nd.is_leaf ? 0 : 1;
    return n;
}

int TreeModel::leaf_count() const { return node_count() - decision_node_count(); }

int TreeModel::depth_of(int id) const {
    // Small trees; linear parent scan is fine.
    int depth = 0;
    int cur = id;
    while (cur != root_) {
        int parent = -1;
        for (int i = 0; i < node_count(); ++i) {
            if (!nodes_[i].is_leaf && (nodes_[i].left == cur || nodes_[i].right == cur)) {
                parent = i;
                break;
            }
        }
        if (parent < 0) throw ValidationError("depth_of: node " + std::to_string(id) + " unreachable");
        cur = parent;
        ++depth;
    }
    return depth;
}

int TreeModel::max_depth() const {
    int d = 0;
    for (int id : leaf_ids()) d = std::max(d, depth_of(id));
    return d;
}

std::vector<int> TreeModel::leaf_ids() const {
    std::vector<int> ids;
    for (int i = 0; i < node_count(); ++i) {
        if (nodes_[i].is_leaf) ids.push_back(i);
    }
    return ids;
}

std::vector<int> TreeModel::subtree_preorder(int id) const {
    std::vector<int> order;
    std::vector<int> stack{id};
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        order.push_back(cur);
        const TreeNode& nd = nodes_.at(cur);
        if (!nd.is_leaf) {
            stack.push_back(nd.right);
            stack.push_back(nd.left);
        }
    }
    return order;
}

std::pair<int, int> TreeModel::expand(int leaf_id, DecisionNodeParams params) {
    TreeNode& nd = nodes_.at(leaf_id);
    if (!nd.is_leaf) throw ValidationError("expand: node " + std::to_string(leaf_id) + " is not a leaf");
    if (static_cast<int>(params.weights.size()) != input_dim_) {
        throw ValidationError("expand: weight length does not match input_dim");
    }
    if (!(params.temperature > 0.0)) throw ValidationError("expand: temperature must be positive");

    TreeNode left, right;
    left.is_leaf = right.is_leaf = true;
    left.logits = nd.logits;
    right.logits = nd.logits;

    const int left_id = node_count();
    const int right_id = left_id + 1;
    nd.is_leaf = false;
    nd.split = std::move(params);
    nd.left = left_id;
    nd.right = right_id;
    nd.logits.clear();
    nodes_.push_back(std::move(left));
    nodes_.push_back(std::move(right));
    validate();
    return {left_id, right_id};
}

std::vector<double> TreeModel::predict_soft(std::span<const double> x) const {
    if (mode_ != TreeMode::soft) {
        throw ValidationError("predict_soft: tree is hardened; use predict_hard");
    }
    if (static_cast<int>(x.size()) != input_dim_) {
        throw ValidationError("predict_soft: feature vector length mismatch");
    }
    if (!all_finite(x)) throw ValidationError("predict_soft: non-finite feature value");

    std::vector<double> dist(action_count_, 0.0);
    std::vector<double> leaf_dist(action_count_);
    std::vector<std::pair<int, double>> stack{{root_, 1.0}};
    while (!stack.empty()) {
        auto [id, path_prob] = stack.back();
        stack.pop_back();
        const TreeNode& nd = nodes_[id];
        if (nd.is_leaf) {
            softmax_into(nd.logits, leaf_dist);
            for (int i = 0; i < action_count_; ++i) dist[i] += path_prob * leaf_dist[i];
        } else {
            const double p = route_prob(nd.split, x);
            stack.emplace_back(nd.left, path_prob * p);
            stack.emplace_back(nd.right, path_prob * (1.0 - p));
        }
    }
    return dist;
}

std::pair<int, std::vector<double>> TreeModel::predict_hard(std::span<const double> x) const {
    if (mode_ != TreeMode::hardened) {
        throw ValidationError("predict_hard: tree is soft; harden it first");
    }
    if (static_cast<int>(x.size()) != input_dim_) {
        throw ValidationError("predict_hard: feature vector length mismatch");
    }
    if (!all_finite(x)) throw ValidationError("predict_hard: non-finite feature value");

    int cur = root_;
    while (!nodes_[cur].is_leaf) {
        const HardRule& h = nodes_[cur].hard;
        const double v = x[h.feature];
        const bool go_left = h.left_if_geq ? (v >= h.threshold) : (v <= h.threshold);
        cur = go_left ? nodes_[cur].left : nodes_[cur].right;
    }
    return {cur, softmax(nodes_[cur].logits)};
}

std::vector<double> TreeModel::predict(std::span<const double> x) const {
    if (mode_ == TreeMode::soft) return predict_soft(x);
    return predict_hard(x).second;
}

TreeModel TreeModel::harden() const {
    if (mode_ != TreeMode::soft) throw ValidationError("harden: tree is already hardened");
    TreeModel out = *this;
    for (int i = 0; i < out.node_count(); ++i) {
        TreeNode& nd = out.nodes_[i];
        if (nd.is_leaf) continue;
        const auto& w = nd.split.weights;
        int best = 0;
        for (int j = 1; j < static_cast<int>(w.size()); ++j) {
            if (std::abs(w[j]) > std::abs(w[best])) best = j;
        }
        if (w[best] == 0.0) {
            throw ValidationError("harden: node " + std::to_string(i) +
                                  " has all-zero weights; cannot pick a feature");
        }
        nd.hard.feature = best;
        nd.hard.threshold = -nd.split.bias / w[best];
        nd.hard.left_if_geq = w[best] > 0.0;
    }
    out.mode_ = TreeMode::hardened;
    out.validate();
    return out;
}

void TreeModel::validate() const {
    if (nodes_.empty()) throw ValidationError("tree: empty node arena");
    if (root_ < 0 || root_ >= node_count()) throw ValidationError("tree: root id out of range");

    std::vector<int> visits(node_count(), 0);
    std::vector<int> stack{root_};
    int internals = 0;
    int leaves = 0;
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        if (id < 0 || id >= node_count()) {
            throw ValidationError("tree: child reference " + std::to_string(id) + " out of range");
        }
        if (++visits[id] > 1) {
            throw ValidationError("tree: node " + std::to_string(id) +
                                  " reachable more than once (cycle or shared child)");
        }
        const TreeNode& nd = nodes_[id];
        if (nd.is_leaf) {
            ++leaves;
            if (static_cast<int>(nd.logits.size()) != action_count_) {
                throw ValidationError("tree: leaf " + std::to_string(id) + " logits length " +
                                      std::to_string(nd.logits.size()) + " != action count " +
                                      std::to_string(action_count_));
            }
            if (!all_finite(nd.logits)) {
                throw ValidationError("tree: leaf " + std::to_string(id) + " has non-finite logits");
            }
        } else {
            ++internals;
            if (nd.left < 0 || nd.right < 0) {
                throw ValidationError("tree: internal node " + std::to_string(id) +
                                      " is missing a child");
            }
            if (static_cast<int>(nd.split.weights.size()) != input_dim_) {
                throw ValidationError("tree: node " + std::to_string(id) + " weight length " +
                                      std::to_string(nd.split.weights.size()) + " != input dim " +
                                      std::to_string(input_dim_));
            }
            if (!all_finite(nd.split.weights) || !std::isfinite(nd.split.bias)) {
                throw ValidationError("tree: node " + std::to_string(id) + " has non-finite parameters");
            }
            if (!(nd.split.temperature > 0.0)) {
                throw ValidationError("tree: node " + std::to_string(id) + " temperature not positive");
            }
            if (mode_ == TreeMode::hardened && nd.hard.feature < 0) {
                throw ValidationError("tree: hardened node " + std::to_string(id) +
                                      " is missing its hard rule");
            }
            stack.push_back(nd.left);
            stack.push_back(nd.right);
        }
    }
    for (int i = 0; i < node_count(); ++i) {
        if (visits[i] != 1) {
            throw ValidationError("tree: node " + std::to_string(i) + " not reachable from root");
        }
    }
    if (leaves != internals + 1) {
        throw ValidationError("tree: " + std::to_string(internals) + " internal nodes with " +
                              std::to_string(leaves) + " leaves violates n+1 rule");
    }
    if (!scaling_.empty() &&
        (static_cast<int>(scaling_.means.size()) != input_dim_ ||
         static_cast<int>(scaling_.stds.size()) != input_dim_)) {
        throw ValidationError("tree: feature scaling length does not match input dim");
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string serialize_tree(const TreeModel& tree) {
    tree.validate();
    nlohmann::json doc;
    doc["input_dim"] = tree.input_dim();
    doc["action_count"] = tree.action_count();
    doc["mode"] = mode_name(tree.mode());
    doc["feature_scaling"] = {{"means", tree.scaling().means}, {"stds", tree.scaling().stds}};
    nlohmann::json nodes = nlohmann::json::array();
    for (int id = 0; id < tree.node_count(); ++id) {
        const TreeNode& nd = tree.node(id);
        nlohmann::json rec;
        rec["id"] = id;
        if (nd.is_leaf) {
            rec["kind"] = "leaf";
            rec["logits"] = nd.logits;
        } else {
            rec["kind"] = "internal";
            rec["weights"] = nd.split.weights;
            rec["bias"] = nd.split.bias;
            rec["temperature"] = nd.split.temperature;
            rec["left"] = nd.left;
            rec["right"] = nd.right;
            if (tree.mode() == TreeMode::hardened) {
                rec["hard"] = {{"feature", nd.hard.feature},
                               {"threshold", nd.hard.threshold},
                               {"left_if_geq", nd.hard.left_if_geq}};
            }
        }
        nodes.push_back(std::move(rec));
    }
    doc["nodes"] = std::move(nodes);
    return doc.dump(2);
}

TreeModel tree_from_json_impl(const void* doc_ptr) {
    const nlohmann::json& doc = *static_cast<const nlohmann::json*>(doc_ptr);
    TreeModel t;
    try {
        t.input_dim_ = doc.at("input_dim").get<int>();
        t.action_count_ = doc.at("action_count").get<int>();
        const std::string mode = doc.at("mode").get<std::string>();
        if (mode == "soft") {
            t.mode_ = TreeMode::soft;
        } else if (mode == "hardened") {
            t.mode_ = TreeMode::hardened;
        } else {
            throw ValidationError("tree document: unknown mode '" + mode + "'");
        }
        if (doc.contains("feature_scaling")) {
            t.scaling_.means = doc["feature_scaling"].at("means").get<std::vector<double>>();
            t.scaling_.stds = doc["feature_scaling"].at("stds").get<std::vector<double>>();
        }

        const auto& nodes = doc.at("nodes");
        if (!nodes.is_array() || nodes.empty()) {
            throw ValidationError("tree document: nodes must be a non-empty array");
        }
        // First pass: id -> arena index in array order.
        std::vector<std::pair<long long, const nlohmann::json*>> recs;
        for (const auto& rec : nodes) recs.emplace_back(rec.at("id").get<long long>(), &rec);
        auto index_of = [&recs](long long id) {
            for (std::size_t i = 0; i < recs.size(); ++i) {
                if (recs[i].first == id) return static_cast<int>(i);
            }
            throw ValidationError("tree document: child id " + std::to_string(id) + " not defined");
        };
        std::vector<bool> is_child(recs.size(), false);
        t.nodes_.resize(recs.size());
        for (std::size_t i = 0; i < recs.size(); ++i) {
            const nlohmann::json& rec = *recs[i].second;
            TreeNode& nd = t.nodes_[i];
            const std::string kind = rec.at("kind").get<std::string>();
            if (kind == "leaf") {
                nd.is_leaf = true;
                nd.logits = rec.at("logits").get<std::vector<double>>();
                if (rec.contains("left") || rec.contains("right")) {
                    throw ValidationError("tree document: leaf node " +
                                          std::to_string(recs[i].first) + " lists a child");
                }
            } else if (kind == "internal") {
                nd.is_leaf = false;
                nd.split.weights = rec.at("weights").get<std::vector<double>>();
                nd.split.bias = rec.at("bias").get<double>();
                nd.split.temperature = rec.at("temperature").get<double>();
                if (!rec.contains("left") || !rec.contains("right")) {
                    throw ValidationError("tree document: internal node " +
                                          std::to_string(recs[i].first) +
                                          " must list both children");
                }
                nd.left = index_of(rec.at("left").get<long long>());
                nd.right = index_of(rec.at("right").get<long long>());
                is_child[nd.left] = true;
                is_child[nd.right] = true;
                if (rec.contains("hard")) {
                    nd.hard.feature = rec["hard"].at("feature").get<int>();
                    nd.hard.threshold = rec["hard"].at("threshold").get<double>();
                    nd.hard.left_if_geq = rec["hard"].at("left_if_geq").get<bool>();
                }
            } else {
                throw ValidationError("tree document: unknown node kind '" + kind + "'");
            }
        }
        int root = -1;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            if (!is_child[i]) {
                if (root >= 0) throw ValidationError("tree document: multiple root nodes");
                root = static_cast<int>(i);
            }
        }
        if (root < 0) throw ValidationError("tree document: no root node (cycle)");
        t.root_ = root;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("tree document: ") + e.what());
    }
    t.validate();
    return t;
}

TreeModel deserialize_tree(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("tree document parse error: ") + e.what());
    }
    return tree_from_json_impl(&doc);
}

void save_tree(const TreeModel& tree, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open " + path + " for writing");
    out << serialize_tree(tree) << "\n";
}

TreeModel load_tree(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open tree file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return deserialize_tree(buf.str());
}

// ---------------------------------------------------------------------------
// DOT export
// ---------------------------------------------------------------------------

std::string export_dot(const TreeModel& tree,
                       const std::vector<std::string>& feature_names,
                       const std::vector<std::string>& action_names) {
    tree.validate();
    if (static_cast<int>(feature_names.size()) != tree.input_dim()) {
        throw ValidationError("export_dot: feature name list length " +
                              std::to_string(feature_names.size()) + " != input dim " +
                              std::to_string(tree.input_dim()));
    }
    if (static_cast<int>(action_names.size()) != tree.action_count()) {
        throw ValidationError("export_dot: action name list length " +
                              std::to_string(action_names.size()) + " != action count " +
                              std::to_string(tree.action_count()));
    }
    const bool soft = tree.mode() == TreeMode::soft;

    std::ostringstream out;
    out.precision(4);
    out << "digraph decision_tree {\n";
    if (soft) {
        out << "  label=\"approximate (dominant-feature)\";\n  labelloc=\"t\";\n";
    }
    out << "  node [shape=box, fontname=\"Helvetica\"];\n";
    for (int id = 0; id < tree.node_count(); ++id) {
        const TreeNode& nd = tree.node(id);
        if (nd.is_leaf) {
            const auto dist = softmax(nd.logits);
            const int a = argmax_lowest(dist);
            out << "  n" << id << " [label=\"" << action_names[a] << "\\np=" << dist[a]
                << "\", style=rounded];\n";
            continue;
        }
        HardRule rule = nd.hard;
        if (soft) {
            const auto& w = nd.split.weights;
            int best = 0;
            for (int j = 1; j < static_cast<int>(w.size()); ++j) {
                if (std::abs(w[j]) > std::abs(w[best])) best = j;
            }
            if (w[best] == 0.0) {
                throw ValidationError("export_dot: node " + std::to_string(id) +
                                      " has all-zero weights; cannot pick a feature");
            }
            rule.feature = best;
            rule.threshold = -nd.split.bias / w[best];
            rule.left_if_geq = w[best] > 0.0;
        }
        double shown = rule.threshold;
        if (!tree.scaling().empty()) {
            shown = rule.threshold * tree.scaling().stds[rule.feature] +
                    tree.scaling().means[rule.feature];
        }
        out << "  n" << id << " [label=\"" << feature_names[rule.feature]
            << (rule.left_if_geq ? " >= " : " <= ") << shown << "\"];\n";
    }
    for (int id = 0; id < tree.node_count(); ++id) {
        const TreeNode& nd = tree.node(id);
        if (nd.is_leaf) continue;
        out << "  n" << id << " -> n" << nd.left << " [label=\"true\"];\n";
        out << "  n" << id << " -> n" << nd.right << " [label=\"false\"];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace addt
