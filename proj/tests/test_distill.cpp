#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "addt/distill.hpp"
#include "addt/errors.hpp"
#include "addt/numeric.hpp"
#include "support.hpp"

using addt::DistillConfig;
using addt::DistillDataset;
using addt::DistillSample;
using addt::TreeModel;
using addt::ValidationError;

namespace {

DistillDataset one_sample(std::vector<double> x, std::vector<double> target) {
    DistillDataset d;
    d.scaling.means.assign(x.size(), 0.0);
    d.scaling.stds.assign(x.size(), 1.0);
    DistillSample s;
    s.x = std::move(x);
    s.target = std::move(target);
    d.samples.push_back(std::move(s));
    return d;
}

}  // namespace

TEST_CASE("kl_divergence basics") {
    std::vector<double> u{0.2, 0.2, 0.2, 0.2, 0.2};
    CHECK(addt::kl_divergence(u, u) == doctest::Approx(0.0).epsilon(1e-15));

    std::vector<double> p{1, 0, 0, 0, 0};
    std::vector<double> q{0.5, 0.5, 0, 0, 0};
    // frozen ln 2
    CHECK(std::abs(addt::kl_divergence(p, q) - 0.69314718055994531) < 1e-15);

    std::mt19937 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        auto a = testsupport::random_dataset(1, 1, 5, rng).samples[0].target;
        auto b = testsupport::random_dataset(1, 1, 5, rng).samples[0].target;
        CHECK(addt::kl_divergence(a, b) >= 0.0);
    }

    std::vector<double> shorter{0.5, 0.5};
    CHECK_THROWS_AS(addt::kl_divergence(p, shorter), ValidationError);
}

TEST_CASE("dataset_loss composes kl over predict_soft") {
    // leaf distribution ~ (0.5, 0.5, 0, 0, 0)
    TreeModel t = TreeModel::leaf_stub(4, 5, {30, 30, -30, -30, -30});
    DistillDataset d = one_sample({0, 0, 0, 0}, {1, 0, 0, 0, 0});
    CHECK(addt::dataset_loss(t, d) == doctest::Approx(0.6931472).epsilon(1e-6));

    // exact-match leaf -> zero loss
    TreeModel z = TreeModel::leaf_stub(4, 5);
    DistillDataset du = one_sample({0, 0, 0, 0}, {0.2, 0.2, 0.2, 0.2, 0.2});
    CHECK(addt::dataset_loss(z, du) == doctest::Approx(0.0).epsilon(1e-12));

    // permutation invariance
    std::mt19937 rng(11);
    TreeModel rt = testsupport::random_tree(3, 4, 5, rng);
    DistillDataset data = testsupport::random_dataset(40, 4, 5, rng);
    const double base = addt::dataset_loss(rt, data);
    std::shuffle(data.samples.begin(), data.samples.end(), rng);
    CHECK(addt::dataset_loss(rt, data) == doctest::Approx(base).epsilon(1e-12));

    DistillDataset empty;
    CHECK_THROWS_AS(addt::dataset_loss(rt, empty), ValidationError);
}

TEST_CASE("loss_gradient matches central finite differences") {
    std::mt19937 rng(2024);
    TreeModel t = testsupport::random_tree(3, 4, 5, rng);
    DistillDataset data = testsupport::random_dataset(20, 4, 5, rng);
    auto res = testsupport::fd_check(t, data);
    CHECK(res.failures == 0);
    CHECK(res.checked > 0);
}

TEST_CASE("gradient structural identities") {
    std::mt19937 rng(5);
    TreeModel t = testsupport::random_tree(3, 4, 5, rng);
    DistillDataset data = testsupport::random_dataset(25, 4, 5, rng);
    auto rec = addt::loss_gradient(t, data);

    // softmax Jacobian rows sum to zero -> each leaf's logit grads sum to zero
    for (int id : t.leaf_ids()) {
        double sum = 0.0;
        for (double g : rec.logit_grad[id]) sum += g;
        CHECK(std::abs(sum) < 1e-12);
    }

    // duplicating every sample leaves the mean gradient unchanged
    DistillDataset doubled = data;
    for (const auto& s : data.samples) doubled.samples.push_back(s);
    auto rec2 = addt::loss_gradient(t, doubled);
    CHECK(rec2.loss == doctest::Approx(rec.loss).epsilon(1e-12));
    for (int id = 0; id < t.node_count(); ++id) {
        if (t.node(id).is_leaf) {
            for (std::size_t a = 0; a < rec.logit_grad[id].size(); ++a) {
                CHECK(rec2.logit_grad[id][a] == doctest::Approx(rec.logit_grad[id][a]).epsilon(1e-10));
            }
        } else {
            for (std::size_t j = 0; j < rec.weight_grad[id].size(); ++j) {
                CHECK(rec2.weight_grad[id][j] == doctest::Approx(rec.weight_grad[id][j]).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("train_subtree drives a single leaf to the mean target") {
    TreeModel t = TreeModel::leaf_stub(4, 5);
    DistillDataset data;
    data.scaling.means.assign(4, 0.0);
    data.scaling.stds.assign(4, 1.0);
    const std::vector<double> pstar{0.5, 0.2, 0.1, 0.1, 0.1};
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> xd(-1, 1);
    for (int i = 0; i < 10; ++i) {
        DistillSample s;
        s.x = {xd(rng), xd(rng), xd(rng), xd(rng)};
        s.target = pstar;
        data.samples.push_back(std::move(s));
    }
    DistillConfig cfg;
    auto trace = addt::train_subtree(t, {0}, data, cfg);
    CHECK(trace.final_loss <= trace.initial_loss + 1e-6);
    CHECK(static_cast<int>(trace.epoch_loss.size()) == cfg.epochs);

    auto q = addt::softmax(t.node(0).logits);
    double tv = 0.0;
    for (int a = 0; a < 5; ++a) tv += std::abs(q[a] - pstar[a]);
    CHECK(tv / 2.0 < 1e-3);
}

TEST_CASE("train_subtree on the 4-sample dataset reaches the brute-force split") {
    const DistillDataset data = testsupport::four_sample_dataset();
    const double best = testsupport::brute_force_single_split(data);
    CHECK(best == doctest::Approx(0.0).epsilon(1e-12));  // perfect split exists

    for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
        DistillConfig cfg;
        cfg.seed = seed;
        cfg.min_leaf_samples = 1;
        TreeModel t = TreeModel::leaf_stub(1, 5);
        std::mt19937_64 rng(seed);
        auto rec = addt::expand_leaf(t, 0, data, cfg, rng);
        CHECK(rec.fragment.final_loss <= best * 1.05 + 1e-3);
        TreeModel h = t.harden();
        CHECK(h.node(0).hard.feature == 0);
        CHECK(h.node(0).hard.threshold > -0.5);
        CHECK(h.node(0).hard.threshold < 0.5);
        // post-expansion loss strictly better than the single-leaf score
        CHECK(rec.fragment.final_loss < rec.fragment.initial_loss);
    }
}

TEST_CASE("train_subtree validates its preconditions") {
    std::mt19937 rng(8);
    TreeModel t = testsupport::random_tree(3, 4, 5, rng);
    DistillDataset data = testsupport::random_dataset(10, 4, 5, rng);
    DistillConfig cfg;
    cfg.epochs = 5;

    DistillDataset empty;
    CHECK_THROWS_AS(addt::train_subtree(t, {0}, empty, cfg), ValidationError);
    CHECK_THROWS_AS(addt::train_subtree(t, {}, data, cfg), ValidationError);
    CHECK_THROWS_AS(addt::train_subtree(t, {99}, data, cfg), ValidationError);

    // two disconnected leaves are not a fragment
    auto leaves = t.leaf_ids();
    REQUIRE(leaves.size() >= 2);
    CHECK_THROWS_AS(addt::train_subtree(t, {leaves[0], leaves[1]}, data, cfg),
                    ValidationError);
}

TEST_CASE("warm-start training never ends above its start") {
    std::mt19937 rng(21);
    for (int trial = 0; trial < 3; ++trial) {
        TreeModel t = testsupport::random_tree(2, 4, 5, rng);
        DistillDataset data = testsupport::random_dataset(30, 4, 5, rng);
        DistillConfig cfg;
        cfg.epochs = 200;
        cfg.min_leaf_samples = 1;
        std::mt19937_64 erng(trial);
        const int leaf = t.leaf_ids().front();
        auto rec = addt::expand_leaf(t, leaf, data, cfg, erng);
        CHECK(rec.fragment.final_loss <= rec.fragment.initial_loss + 1e-6);
    }
}

TEST_CASE("leaf_score sums per-sample kl") {
    TreeModel t = TreeModel::leaf_stub(4, 5, {30, 30, -30, -30, -30});  // ~ (.5,.5,0,0,0)
    DistillDataset d;
    d.scaling.means.assign(4, 0.0);
    d.scaling.stds.assign(4, 1.0);
    for (int i = 0; i < 2; ++i) {
        DistillSample s;
        s.x = {0, 0, 0, 0};
        s.target = {1, 0, 0, 0, 0};
        d.samples.push_back(std::move(s));
    }
    DistillConfig cfg;
    // frozen 2 ln 2
    CHECK(addt::leaf_score(t, 0, d, cfg) == doctest::Approx(1.3862943611198906).epsilon(1e-9));
    cfg.leaf_score_kind = addt::LeafScoreKind::mean_kl;
    const double mean = addt::leaf_score(t, 0, d, cfg);
    CHECK(mean == doctest::Approx(0.69314718055994531).epsilon(1e-9));
    cfg.leaf_score_kind = addt::LeafScoreKind::sum_kl;
    CHECK(addt::leaf_score(t, 0, d, cfg) ==
          doctest::Approx(mean * static_cast<double>(d.size())).epsilon(1e-12));

    // perfect leaf scores zero
    TreeModel z = TreeModel::leaf_stub(4, 5);
    DistillDataset du = one_sample({0, 0, 0, 0}, {0.2, 0.2, 0.2, 0.2, 0.2});
    CHECK(addt::leaf_score(z, 0, du, cfg) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("select_leaf takes the max-score eligible leaf, ties to lowest id") {
    TreeModel t = TreeModel::leaf_stub(4, 5);
    t.expand(0, [] {
        addt::DecisionNodeParams p;
        p.weights = {1, 0, 0, 0};
        p.bias = 0;
        p.temperature = 1;
        return p;
    }());
    // leaves are ids 1 and 2; give leaf 2 a worse (higher-KL) fit
    t.node(1).logits = {30, -30, -30, -30, -30};
    t.node(2).logits = {30, -30, -30, -30, -30};

    DistillConfig cfg;
    cfg.min_leaf_samples = 1;
    addt::RoutedData routed;
    DistillDataset d1;
    d1.scaling.means.assign(4, 0.0);
    d1.scaling.stds.assign(4, 1.0);
    DistillDataset d2 = d1;
    for (int i = 0; i < 2; ++i) {
        DistillSample a;
        a.x = {1, 0, 0, 0};
        a.target = {1, 0, 0, 0, 0};  // matches leaf 1 -> score ~ 0
        d1.samples.push_back(std::move(a));
        DistillSample b;
        b.x = {-1, 0, 0, 0};
        b.target = {0, 1, 0, 0, 0};  // clashes with leaf 2 -> large score
        d2.samples.push_back(std::move(b));
    }
    routed.emplace(1, d1);
    routed.emplace(2, d2);

    auto sel = addt::select_leaf(t, routed, cfg);
    CHECK(sel.leaf == 2);
    CHECK(sel.scores.size() == 2);
    CHECK(sel.scores[0].leaf_id == 1);
    CHECK(sel.scores[0].score < sel.scores[1].score);

    // tie -> lowest id
    routed.at(2) = routed.at(1);
    sel = addt::select_leaf(t, routed, cfg);
    CHECK(sel.leaf == 1);

    // nothing eligible -> -1, scores still reported
    cfg.min_leaf_samples = 100;
    sel = addt::select_leaf(t, routed, cfg);
    CHECK(sel.leaf == -1);
    CHECK(sel.scores.size() == 2);
    CHECK_FALSE(sel.scores[0].eligible);
}

TEST_CASE("split_dataset partitions with the boundary on the left") {
    TreeModel t = TreeModel::leaf_stub(4, 5);
    addt::DecisionNodeParams p;
    p.weights = {0, 0, 0, 0};  // route_prob == 0.5 everywhere
    p.bias = 0;
    p.temperature = 1;
    t.expand(0, p);

    std::mt19937 rng(4);
    DistillDataset data = testsupport::random_dataset(10, 4, 5, rng);
    auto [left, right] = addt::split_dataset(t, 0, data);
    CHECK(left.size() == 10);
    CHECK(right.size() == 0);

    // real split: concatenation is a permutation of the input
    TreeModel t2 = TreeModel::leaf_stub(4, 5);
    addt::DecisionNodeParams p2;
    p2.weights = {2, 0, 0, 0};
    p2.bias = 0;
    p2.temperature = 1;
    t2.expand(0, p2);
    auto [l2, r2] = addt::split_dataset(t2, 0, data);
    CHECK(l2.size() + r2.size() == data.size());
    std::vector<double> orig, got;
    for (const auto& s : data.samples) orig.push_back(s.x[0]);
    for (const auto& s : l2.samples) {
        CHECK(s.x[0] >= 0.0);
        got.push_back(s.x[0]);
    }
    for (const auto& s : r2.samples) {
        CHECK(s.x[0] < 0.0);
        got.push_back(s.x[0]);
    }
    std::sort(orig.begin(), orig.end());
    std::sort(got.begin(), got.end());
    CHECK(orig == got);

    CHECK_THROWS_AS(addt::split_dataset(t2, 1, data), ValidationError);
}

TEST_CASE("distill_full builds complete trees deterministically") {
    std::mt19937 rng(6);
    DistillDataset data = testsupport::random_dataset(30, 4, 5, rng);
    DistillConfig cfg;
    cfg.full_epochs = 3;

    auto [t2, tr2] = addt::distill_full(data, 2, cfg);
    CHECK(t2.decision_node_count() == 3);
    CHECK(t2.leaf_count() == 4);
    CHECK(t2.max_depth() == 2);
    CHECK(static_cast<int>(tr2.epoch_loss.size()) == cfg.full_epochs);

    auto [t5, tr5] = addt::distill_full(data, 5, cfg);
    CHECK(t5.decision_node_count() == 31);
    CHECK(t5.leaf_count() == 32);
    CHECK(t5.max_depth() == 5);

    auto [t5b, tr5b] = addt::distill_full(data, 5, cfg);
    CHECK(addt::serialize_tree(t5b) == addt::serialize_tree(t5));

    CHECK_THROWS_AS(addt::distill_full(data, 0, cfg), addt::ConfigError);
}

TEST_CASE("distill_asymmetric structure, monotonicity, determinism") {
    std::mt19937 rng(9);
    DistillDataset data = testsupport::random_dataset(120, 4, 5, rng);
    DistillConfig cfg;
    cfg.epochs = 60;
    cfg.min_leaf_samples = 2;

    cfg.max_decision_nodes = 1;
    auto [t1, tr1] = addt::distill_asymmetric(data, cfg);
    CHECK(t1.decision_node_count() == 1);
    CHECK(t1.leaf_count() == 2);
    CHECK(tr1.expansions.size() == 1);
    CHECK(tr1.expansions[0].leaf_id == 0);

    cfg.max_decision_nodes = 7;
    auto [t7, tr7] = addt::distill_asymmetric(data, cfg);
    CHECK(t7.decision_node_count() == 7);
    CHECK(t7.leaf_count() == 8);
    CHECK(tr7.expansions.size() == 7);
    CHECK(tr7.early_stop_reason.empty());

    for (const auto& rec : tr7.expansions) {
        // structural warm start: the tree's function is unchanged at the instant
        // of expansion, so the training loss cannot jump
        CHECK(rec.train_loss_at_init <= rec.train_loss_before + 1e-6);
        // fragment training never ends above its own start
        CHECK(rec.fragment.final_loss <= rec.fragment.initial_loss + 1e-6);
        CHECK(rec.node_count == rec.expansion_index + 1);
    }

    // expansion indexes every decision node exactly once
    auto [t7b, tr7b] = addt::distill_asymmetric(data, cfg);
    CHECK(addt::serialize_tree(t7b) == addt::serialize_tree(t7));

    // trace CSV shape
    const std::string csv = addt::trace_to_csv(tr7);
    CHECK(csv.find("expansion_index,leaf_id,score_before,loss_after,node_count,"
                   "depth_of_new_node") == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);  // header + 7 rows
}

TEST_CASE("distill_asymmetric stops early when no leaf is eligible") {
    std::mt19937 rng(10);
    DistillDataset data = testsupport::random_dataset(20, 4, 5, rng);
    DistillConfig cfg;
    cfg.epochs = 30;
    cfg.max_decision_nodes = 5;
    cfg.min_leaf_samples = 100;  // nothing after the root can qualify
    auto [tree, trace] = addt::distill_asymmetric(data, cfg);
    CHECK(tree.decision_node_count() == 1);
    CHECK_FALSE(trace.early_stop_reason.empty());
}

TEST_CASE("observer sees honest selection data") {
    std::mt19937 rng(12);
    DistillDataset data = testsupport::random_dataset(80, 4, 5, rng);
    DistillConfig cfg;
    cfg.epochs = 40;
    cfg.max_decision_nodes = 3;
    cfg.min_leaf_samples = 2;

    int calls = 0;
    auto observer = [&](const addt::ExpansionObservation& obs) {
        ++calls;
        // chosen leaf must be the max-score eligible leaf, ties to lowest id
        double best = -1.0;
        int expect = -1;
        for (const auto& e : obs.scores) {
            const double recomputed =
                addt::leaf_score(obs.tree_before, e.leaf_id, obs.routed.at(e.leaf_id), cfg);
            CHECK(recomputed == doctest::Approx(e.score).epsilon(1e-12));
            if (e.eligible && e.score > best) {
                best = e.score;
                expect = e.leaf_id;
            }
        }
        CHECK(obs.chosen_leaf == expect);
    };
    auto [tree, trace] = addt::distill_asymmetric(data, cfg, observer);
    CHECK(calls == 3);
    CHECK(tree.decision_node_count() == 3);
}

TEST_CASE("asymmetric recovery: single-feature staircase stays on one feature") {
    for (unsigned seed : {1u, 2u}) {
        std::mt19937 rng(seed);
        DistillDataset data = testsupport::single_feature_dataset(240, 4, 1, rng);
        DistillConfig cfg;
        cfg.max_decision_nodes = 3;
        cfg.seed = seed;
        auto [tree, trace] = addt::distill_asymmetric(data, cfg);
        REQUIRE(tree.decision_node_count() == 3);
        TreeModel h = tree.harden();
        for (int id = 0; id < h.node_count(); ++id) {
            if (!h.node(id).is_leaf) CHECK(h.node(id).hard.feature == 1);
        }
    }
}

TEST_CASE("asymmetric recovery: XOR quadrants become a complete depth-2 tree") {
    for (unsigned seed : {1u, 2u}) {
        std::mt19937 rng(seed);
        DistillDataset data = testsupport::xor_dataset(400, rng);
        DistillConfig cfg;
        cfg.max_decision_nodes = 3;
        cfg.seed = seed;
        auto [tree, trace] = addt::distill_asymmetric(data, cfg);
        REQUIRE(tree.decision_node_count() == 3);
        CHECK(tree.max_depth() == 2);
        for (int leaf : tree.leaf_ids()) CHECK(tree.depth_of(leaf) == 2);
    }
}
