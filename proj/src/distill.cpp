#include "addt/distill.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "addt/errors.hpp"
#include "addt/numeric.hpp"

namespace addt {

namespace {

constexpr double kQClamp = 1e-12;    // floor inside log terms
constexpr double kProbFloor = 1e-15; // route_prob clamp, mirrored here
constexpr double kLogitClip = 30.0;

double clamp_prob(double p) {
    return std::min(1.0 - kProbFloor, std::max(kProbFloor, p));
}

// ---------------------------------------------------------------------------
// Gradient engine: forward pass builds per-subtree mixture distributions
// bottom-up, backward pass pushes adjoints top-down. One instance is bound to
// a subtree once and reused across epochs with no allocation in the loop.
// ---------------------------------------------------------------------------
struct GradEngine {
    std::vector<int> order;               // slot -> node id, preorder, apex at 0
    std::vector<const TreeNode*> nptr;    // slot -> node
    std::vector<int> left, right;         // slot -> child slot, -1 for leaves
    int A = 0;
    int d = 0;

    std::vector<double> leaf_q;  // nslots x A (rows used by leaf slots)
    std::vector<double> s;       // nslots x A subtree distributions
    std::vector<double> r;       // nslots x A adjoints
    std::vector<double> p;       // route prob per slot
    std::vector<double> z;       // pre-temperature activation per slot
    std::vector<double> gw;      // nslots x d
    std::vector<double> gb;
    std::vector<double> ga;
    std::vector<double> gl;      // nslots x A

    void bind(const TreeModel& tree, int apex) {
        order = tree.subtree_preorder(apex);
        A = tree.action_count();
        d = tree.input_dim();
        const int n = static_cast<int>(order.size());
        std::vector<int> slot_of(tree.node_count(), -1);
        for (int i = 0; i < n; ++i) slot_of[order[i]] = i;
        nptr.resize(n);
        left.assign(n, -1);
        right.assign(n, -1);
        for (int i = 0; i < n; ++i) {
            nptr[i] = &tree.node(order[i]);
            if (!nptr[i]->is_leaf) {
                left[i] = slot_of[nptr[i]->left];
                right[i] = slot_of[nptr[i]->right];
            }
        }
        leaf_q.assign(static_cast<std::size_t>(n) * A, 0.0);
        s.assign(static_cast<std::size_t>(n) * A, 0.0);
        r.assign(static_cast<std::size_t>(n) * A, 0.0);
        p.assign(n, 0.0);
        z.assign(n, 0.0);
        gw.assign(static_cast<std::size_t>(n) * d, 0.0);
        gb.assign(n, 0.0);
        ga.assign(n, 0.0);
        gl.assign(static_cast<std::size_t>(n) * A, 0.0);
    }

    // Mean KL over data; gradient sums land in gw/gb/ga/gl (already averaged).
    double eval(const DistillDataset& data) {
        const int n = static_cast<int>(order.size());
        std::fill(gw.begin(), gw.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
        std::fill(ga.begin(), ga.end(), 0.0);
        std::fill(gl.begin(), gl.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            if (nptr[i]->is_leaf) {
                softmax_into(nptr[i]->logits, std::span<double>(&leaf_q[i * A], A));
            }
        }

        double loss = 0.0;
        for (const DistillSample& sample : data.samples) {
            const double* x = sample.x.data();
            // forward: preorder lists parents first, so walk it backwards
            for (int i = n - 1; i >= 0; --i) {
                double* si = &s[i * A];
                const TreeNode& nd = *nptr[i];
                if (nd.is_leaf) {
                    const double* q = &leaf_q[i * A];
                    for (int a = 0; a < A; ++a) si[a] = q[a];
                    continue;
                }
                double zz = nd.split.bias;
                const double* w = nd.split.weights.data();
                for (int j = 0; j < d; ++j) zz += w[j] * x[j];
                z[i] = zz;
                const double pp = clamp_prob(sigmoid(nd.split.temperature * zz));
                p[i] = pp;
                const double* sl = &s[left[i] * A];
                const double* sr = &s[right[i] * A];
                for (int a = 0; a < A; ++a) si[a] = pp * sl[a] + (1.0 - pp) * sr[a];
            }

            const double* Q = &s[0];
            double* r0 = &r[0];
            for (int a = 0; a < A; ++a) {
                const double P = sample.target[a];
                if (P > 0.0) {
                    const double qa = Q[a];
                    if (qa > kQClamp) {
                        loss += P * std::log(P / qa);
                        r0[a] = -P / qa;
                    } else {
                        loss += P * std::log(P / kQClamp);
                        r0[a] = 0.0;  // log is clamped flat here
                    }
                } else {
                    r0[a] = 0.0;
                }
            }

            // backward: parents before children
            for (int i = 0; i < n; ++i) {
                const double* ri = &r[i * A];
                const TreeNode& nd = *nptr[i];
                if (nd.is_leaf) {
                    const double* q = &leaf_q[i * A];
                    double rq = 0.0;
                    for (int a = 0; a < A; ++a) rq += ri[a] * q[a];
                    double* g = &gl[i * A];
                    for (int a = 0; a < A; ++a) g[a] += q[a] * (ri[a] - rq);
                    continue;
                }
                const int li = left[i];
                const int rgt = right[i];
                const double* sl = &s[li * A];
                const double* sr = &s[rgt * A];
                double dp = 0.0;
                for (int a = 0; a < A; ++a) dp += ri[a] * (sl[a] - sr[a]);
                double* rl = &r[li * A];
                double* rr = &r[rgt * A];
                const double pp = p[i];
                for (int a = 0; a < A; ++a) {
                    rl[a] = pp * ri[a];
                    rr[a] = (1.0 - pp) * ri[a];
                }
                const double sig = pp * (1.0 - pp);
                const double dz = dp * nd.split.temperature * sig;
                double* g = &gw[i * d];
                for (int j = 0; j < d; ++j) g[j] += dz * x[j];
                gb[i] += dz;
                ga[i] += dp * z[i] * sig;
            }
        }

        const double inv_n = 1.0 / static_cast<double>(data.samples.size());
        loss *= inv_n;
        for (double& g : gw) g *= inv_n;
        for (double& g : gb) g *= inv_n;
        for (double& g : ga) g *= inv_n;
        for (double& g : gl) g *= inv_n;
        return loss;
    }
};

void check_data_matches(const TreeModel& tree, const DistillDataset& data,
                        const char* who) {
    if (data.samples.empty()) throw ValidationError(std::string(who) + ": empty dataset");
    if (data.input_dim() != tree.input_dim() || data.action_count() != tree.action_count()) {
        throw ValidationError(std::string(who) + ": dataset dimensions (" +
                              std::to_string(data.input_dim()) + "," +
                              std::to_string(data.action_count()) +
                              ") do not match the tree (" + std::to_string(tree.input_dim()) +
                              "," + std::to_string(tree.action_count()) + ")");
    }
}

DecisionNodeParams fresh_split(int d, const DistillConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> wd(-0.01, 0.01);
    DecisionNodeParams p;
    p.weights.resize(d);
    for (int j = 0; j < d; ++j) p.weights[j] = wd(rng);
    p.bias = 0.0;
    p.temperature = cfg.temperature_init;
    return p;
}

constexpr double kScanInitGain = 2.0;

// Exhaustive axis-aligned threshold scan minimizing the weighted soft-target
// entropy of the two sides, which is exactly the dataset KL under per-side
// mean-target leaves. Used only to initialize a split; gradient training
// refines it (and may leave the axis). Ties break toward the lowest feature
// index, then the lowest threshold. Degenerate regions fall back to the
// random initializer so training still has something to work with.
DecisionNodeParams scan_split(const DistillDataset& data, const DistillConfig& cfg,
                              std::mt19937_64& rng) {
    const int d = data.input_dim();
    const int A = data.action_count();
    const std::size_t n = data.size();
    if (n < 2) return fresh_split(d, cfg, rng);

    // -sum_a S_a * log(S_a / m) for a side with target-sum vector S, mass m.
    const auto side_impurity = [&](const std::vector<double>& s, double m) {
        double h = 0.0;
        for (int a = 0; a < A; ++a) {
            if (s[a] > 0.0) h -= s[a] * std::log(s[a] / m);
        }
        return h;
    };

    double best_impurity = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::size_t> order(n);
    std::vector<double> below(A);
    std::vector<double> above(A);
    for (int j = 0; j < d; ++j) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return data.samples[a].x[j] < data.samples[b].x[j];
        });
        std::fill(below.begin(), below.end(), 0.0);
        std::fill(above.begin(), above.end(), 0.0);
        for (const auto& s : data.samples) {
            for (int a = 0; a < A; ++a) above[a] += s.target[a];
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto& moved = data.samples[order[i]].target;
            for (int a = 0; a < A; ++a) {
                below[a] += moved[a];
                above[a] -= moved[a];
            }
            const double lo = data.samples[order[i]].x[j];
            const double hi = data.samples[order[i + 1]].x[j];
            if (!(hi > lo)) continue;
            const double m_below = static_cast<double>(i + 1);
            const double m_above = static_cast<double>(n - i - 1);
            const double imp = side_impurity(below, m_below) + side_impurity(above, m_above);
            if (imp < best_impurity - 1e-12) {
                best_impurity = imp;
                best_feature = j;
                best_threshold = 0.5 * (lo + hi);
            }
        }
    }
    if (best_feature < 0) return fresh_split(d, cfg, rng);

    // Seeded jitter on top of the scan keeps distinct seeds producing
    // distinct trees without disturbing the chosen axis.
    std::uniform_real_distribution<double> wd(-0.01, 0.01);
    DecisionNodeParams p;
    p.weights.resize(d);
    for (int j = 0; j < d; ++j) p.weights[j] = wd(rng);
    p.weights[best_feature] += kScanInitGain;
    p.bias = -kScanInitGain * best_threshold + wd(rng);
    p.temperature = cfg.temperature_init;
    return p;
}

}  // namespace

void DistillConfig::validate() const {
    if (max_decision_nodes < 1) throw ConfigError("distill: max_decision_nodes must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("distill: learning_rate must be positive");
    if (epochs < 1) throw ConfigError("distill: epochs must be >= 1");
    if (full_epochs < 1) throw ConfigError("distill: full_epochs must be >= 1");
    if (!(temperature_init > 0.0)) throw ConfigError("distill: temperature_init must be positive");
    if (min_leaf_samples < 0) throw ConfigError("distill: min_leaf_samples must be >= 0");
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) {
        throw ValidationError("kl_divergence: distribution lengths differ");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) sum += p[i] * std::log(p[i] / std::max(q[i], kQClamp));
    }
    return sum;
}

double dataset_loss(const TreeModel& tree, const DistillDataset& data) {
    check_data_matches(tree, data, "dataset_loss");
    double sum = 0.0;
    for (const DistillSample& s : data.samples) {
        sum += kl_divergence(s.target, tree.predict_soft(s.x));
    }
    return sum / static_cast<double>(data.samples.size());
}

GradientRecord loss_gradient(const TreeModel& tree, const DistillDataset& data) {
    check_data_matches(tree, data, "loss_gradient");
    GradEngine eng;
    eng.bind(tree, tree.root());
    GradientRecord rec;
    rec.loss = eng.eval(data);
    const int n_nodes = tree.node_count();
    rec.weight_grad.resize(n_nodes);
    rec.bias_grad.assign(n_nodes, 0.0);
    rec.temperature_grad.assign(n_nodes, 0.0);
    rec.logit_grad.resize(n_nodes);
    for (std::size_t slot = 0; slot < eng.order.size(); ++slot) {
        const int id = eng.order[slot];
        if (eng.nptr[slot]->is_leaf) {
            rec.logit_grad[id].assign(&eng.gl[slot * eng.A], &eng.gl[slot * eng.A] + eng.A);
        } else {
            rec.weight_grad[id].assign(&eng.gw[slot * eng.d], &eng.gw[slot * eng.d] + eng.d);
            rec.bias_grad[id] = eng.gb[slot];
            rec.temperature_grad[id] = eng.ga[slot];
        }
    }
    return rec;
}

FragmentTrace train_subtree(TreeModel& tree, const std::vector<int>& trainable,
                            const DistillDataset& data, const DistillConfig& cfg) {
    cfg.validate();
    check_data_matches(tree, data, "train_subtree");
    if (trainable.empty()) throw ValidationError("train_subtree: empty trainable set");

    std::vector<bool> in_set(tree.node_count(), false);
    for (int id : trainable) {
        if (id < 0 || id >= tree.node_count()) {
            throw ValidationError("train_subtree: trainable node " + std::to_string(id) +
                                  " out of range");
        }
        in_set[id] = true;
    }
    std::vector<int> parent(tree.node_count(), -1);
    for (int i = 0; i < tree.node_count(); ++i) {
        const TreeNode& nd = tree.node(i);
        if (!nd.is_leaf) {
            parent[nd.left] = i;
            parent[nd.right] = i;
        }
    }
    int apex = -1;
    for (int id : trainable) {
        if (parent[id] < 0 || !in_set[parent[id]]) {
            if (apex >= 0) {
                throw ValidationError("train_subtree: trainable nodes are not a connected fragment");
            }
            apex = id;
        }
    }
    if (apex < 0) throw ValidationError("train_subtree: no fragment apex (cycle?)");

    GradEngine eng;
    eng.bind(tree, apex);

    struct ParamRef {
        double* param;
        const double* grad;
        bool clip;
    };
    std::vector<ParamRef> prefs;
    for (std::size_t slot = 0; slot < eng.order.size(); ++slot) {
        const int id = eng.order[slot];
        if (!in_set[id]) continue;
        TreeNode& nd = tree.node(id);
        if (nd.is_leaf) {
            for (int a = 0; a < eng.A; ++a) {
                prefs.push_back({&nd.logits[a], &eng.gl[slot * eng.A + a], true});
            }
        } else {
            for (int j = 0; j < eng.d; ++j) {
                prefs.push_back({&nd.split.weights[j], &eng.gw[slot * eng.d + j], false});
            }
            prefs.push_back({&nd.split.bias, &eng.gb[slot], false});
            // temperature stays fixed at its configured value
        }
    }

    FragmentTrace out;
    out.epoch_loss.reserve(cfg.epochs);
    std::vector<double> best(prefs.size(), 0.0);
    std::vector<double> m(prefs.size(), 0.0);
    std::vector<double> v(prefs.size(), 0.0);
    double best_loss = std::numeric_limits<double>::infinity();
    auto snapshot = [&] {
        for (std::size_t i = 0; i < prefs.size(); ++i) best[i] = *prefs[i].param;
    };

    constexpr double b1 = 0.9;
    constexpr double b2 = 0.999;
    constexpr double adam_eps = 1e-8;
    double pow_b1 = 1.0;
    double pow_b2 = 1.0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double loss = eng.eval(data);
        if (!std::isfinite(loss)) {
            throw NumericError("train_subtree: non-finite loss at epoch " +
                               std::to_string(epoch) + " (initial loss " +
                               std::to_string(out.initial_loss) + ", " +
                               std::to_string(out.epoch_loss.size()) + " epochs recorded)");
        }
        if (epoch == 0) out.initial_loss = loss;
        out.epoch_loss.push_back(loss);
        if (loss < best_loss) {
            best_loss = loss;
            snapshot();
        }

        if (cfg.optimizer == Optimizer::adaptive_moment) {
            pow_b1 *= b1;
            pow_b2 *= b2;
            const double bc1 = 1.0 - pow_b1;
            const double bc2 = 1.0 - pow_b2;
            for (std::size_t i = 0; i < prefs.size(); ++i) {
                const double g = *prefs[i].grad;
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                *prefs[i].param -=
                    cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + adam_eps);
            }
        } else {
            for (std::size_t i = 0; i < prefs.size(); ++i) {
                *prefs[i].param -= cfg.learning_rate * *prefs[i].grad;
            }
        }
        for (const ParamRef& pr : prefs) {
            if (pr.clip) *pr.param = std::clamp(*pr.param, -kLogitClip, kLogitClip);
        }
    }

    const double final_eval = eng.eval(data);
    if (!std::isfinite(final_eval)) {
        throw NumericError("train_subtree: non-finite loss after the last step");
    }
    if (final_eval < best_loss) {
        best_loss = final_eval;
        snapshot();
    }
    for (std::size_t i = 0; i < prefs.size(); ++i) *prefs[i].param = best[i];
    out.final_loss = best_loss;
    return out;
}

double leaf_score(const TreeModel& tree, int leaf_id, const DistillDataset& routed,
                  const DistillConfig& cfg) {
    const TreeNode& nd = tree.node(leaf_id);
    if (!nd.is_leaf) {
        throw ValidationError("leaf_score: node " + std::to_string(leaf_id) + " is not a leaf");
    }
    const std::vector<double> q = softmax(nd.logits);
    double sum = 0.0;
    for (const DistillSample& s : routed.samples) sum += kl_divergence(s.target, q);
    if (cfg.leaf_score_kind == LeafScoreKind::mean_kl) {
        return routed.samples.empty() ? 0.0 : sum / static_cast<double>(routed.samples.size());
    }
    return sum;
}

LeafSelection select_leaf(const TreeModel& tree, const RoutedData& routed,
                          const DistillConfig& cfg) {
    LeafSelection sel;
    const long need = std::max<long>(1, 2L * cfg.min_leaf_samples);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [leaf, ds] : routed) {
        LeafScoreEntry e;
        e.leaf_id = leaf;
        e.routed_count = static_cast<long>(ds.samples.size());
        e.score = leaf_score(tree, leaf, ds, cfg);
        e.eligible = e.routed_count >= need;
        if (e.eligible && e.score > best) {  // strict >: ties keep the lowest id
            best = e.score;
            sel.leaf = leaf;
        }
        sel.scores.push_back(e);
    }
    return sel;
}

ExpansionRecord expand_leaf(TreeModel& tree, int leaf_id, const DistillDataset& routed,
                            const DistillConfig& cfg, std::mt19937_64& rng,
                            const DistillDataset* full_data) {
    cfg.validate();
    check_data_matches(tree, routed, "expand_leaf");
    ExpansionRecord rec;
    rec.leaf_id = leaf_id;
    rec.score_before = leaf_score(tree, leaf_id, routed, cfg);
    if (full_data) rec.train_loss_before = dataset_loss(tree, *full_data);

    const auto [left, right] = tree.expand(leaf_id, scan_split(routed, cfg, rng));
    if (full_data) rec.train_loss_at_init = dataset_loss(tree, *full_data);

    rec.fragment = train_subtree(tree, {leaf_id, left, right}, routed, cfg);
    rec.subtree_loss_after = rec.fragment.final_loss;
    if (full_data) rec.train_loss_after = dataset_loss(tree, *full_data);
    rec.node_count = tree.decision_node_count();
    rec.depth_of_new_node = tree.depth_of(leaf_id);
    return rec;
}

std::pair<DistillDataset, DistillDataset> split_dataset(const TreeModel& tree, int node_id,
                                                        const DistillDataset& data) {
    const TreeNode& nd = tree.node(node_id);
    if (nd.is_leaf) {
        throw ValidationError("split_dataset: node " + std::to_string(node_id) + " is a leaf");
    }
    DistillDataset left;
    DistillDataset right;
    left.scaling = right.scaling = data.scaling;
    left.feature_names = right.feature_names = data.feature_names;
    left.action_names = right.action_names = data.action_names;
    left.meta = right.meta = data.meta;
    for (const DistillSample& s : data.samples) {
        if (route_prob(nd.split, s.x) >= 0.5) {
            left.samples.push_back(s);
        } else {
            right.samples.push_back(s);
        }
    }
    return {std::move(left), std::move(right)};
}

std::pair<TreeModel, TrainTrace> distill_full(const DistillDataset& data, int depth,
                                              const DistillConfig& cfg) {
    cfg.validate();
    data.validate();
    if (depth < 1) throw ConfigError("distill_full: depth must be >= 1");

    std::mt19937_64 rng(cfg.seed);
    TreeModel tree = TreeModel::leaf_stub(data.input_dim(), data.action_count());
    tree.set_scaling(data.scaling);

    // Build the balanced skeleton one region at a time so every split can be
    // scan-initialized on the samples it will actually see, and seed each leaf
    // with the log of its region's mean target. Joint training starts from a
    // sensible tree instead of a uniform one.
    const std::function<void(int, const DistillDataset&, int)> grow =
        [&](int leaf, const DistillDataset& region, int level) {
            if (level == depth) {
                if (!region.samples.empty()) {
                    TreeNode& nd = tree.node(leaf);
                    const double m = static_cast<double>(region.samples.size());
                    for (int a = 0; a < data.action_count(); ++a) {
                        double s = 0.0;
                        for (const auto& smp : region.samples) s += smp.target[a];
                        nd.logits[a] = std::max(std::log(std::max(s / m, kQClamp)), -kLogitClip);
                    }
                }
                return;
            }
            tree.expand(leaf, scan_split(region, cfg, rng));
            // Copy the ids: recursion appends nodes and may reallocate the arena.
            const int lc = tree.node(leaf).left;
            const int rc = tree.node(leaf).right;
            auto [dl, dr] = region.samples.empty()
                                ? std::pair<DistillDataset, DistillDataset>{region, region}
                                : split_dataset(tree, leaf, region);
            grow(lc, dl, level + 1);
            grow(rc, dr, level + 1);
        };
    grow(0, data, 0);

    std::vector<int> all(tree.node_count());
    std::iota(all.begin(), all.end(), 0);
    DistillConfig full_cfg = cfg;
    full_cfg.epochs = cfg.full_epochs;
    FragmentTrace frag = train_subtree(tree, all, data, full_cfg);

    TrainTrace trace;
    trace.epoch_loss = std::move(frag.epoch_loss);
    return {std::move(tree), std::move(trace)};
}

std::pair<TreeModel, TrainTrace> distill_asymmetric(const DistillDataset& data,
                                                    const DistillConfig& cfg,
                                                    const ExpansionObserver& observer) {
    cfg.validate();
    data.validate();

    std::mt19937_64 rng(cfg.seed);
    TreeModel tree = TreeModel::leaf_stub(data.input_dim(), data.action_count());
    tree.set_scaling(data.scaling);

    TrainTrace trace;
    RoutedData routed;
    routed.emplace(0, data);
    int index = 0;

    auto expand_and_split = [&](int leaf, std::vector<LeafScoreEntry> scores) {
        if (observer) observer({tree, routed, leaf, scores});
        ExpansionRecord rec = expand_leaf(tree, leaf, routed.at(leaf), cfg, rng, &data);
        rec.expansion_index = index++;
        rec.all_scores = std::move(scores);
        auto [dl, dr] = split_dataset(tree, leaf, routed.at(leaf));
        const TreeNode& nd = tree.node(leaf);
        routed.erase(leaf);
        routed.emplace(nd.left, std::move(dl));
        routed.emplace(nd.right, std::move(dr));
        trace.expansions.push_back(std::move(rec));
    };

    // Algorithm step 1: the root is always trained on all of D_train.
    {
        LeafScoreEntry root_entry;
        root_entry.leaf_id = 0;
        root_entry.score = leaf_score(tree, 0, data, cfg);
        root_entry.routed_count = static_cast<long>(data.size());
        root_entry.eligible = true;
        expand_and_split(0, {root_entry});
    }

    while (tree.decision_node_count() < cfg.max_decision_nodes) {
        LeafSelection sel = select_leaf(tree, routed, cfg);
        if (sel.leaf < 0) {
            trace.early_stop_reason =
                "no eligible leaf: every remaining leaf has fewer than " +
                std::to_string(std::max<long>(1, 2L * cfg.min_leaf_samples)) +
                " routed samples";
            break;
        }
        expand_and_split(sel.leaf, std::move(sel.scores));
    }

    tree.validate();
    return {std::move(tree), std::move(trace)};
}

std::string trace_to_csv(const TrainTrace& trace) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "expansion_index,leaf_id,score_before,loss_after,node_count,depth_of_new_node\n";
    for (const ExpansionRecord& rec : trace.expansions) {
        out << rec.expansion_index << ',' << rec.leaf_id << ',' << rec.score_before << ','
            << rec.train_loss_after << ',' << rec.node_count << ',' << rec.depth_of_new_node
            << '\n';
    }
    return out.str();
}

}  // namespace addt
