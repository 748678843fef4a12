#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "medpruner/merge.hpp"

using namespace medpruner;

namespace {

TokenFeatures make_features(const std::vector<std::vector<float>>& rows) {
    TokenFeatures f;
    f.tokens = static_cast<std::uint32_t>(rows.size());
    f.dim = static_cast<std::uint32_t>(rows.front().size());
    for (const auto& r : rows) f.data.insert(f.data.end(), r.begin(), r.end());
    return f;
}

// Independent nearest-center assignment: plain cosine, strictly-greater
// comparison scanning centers in ascending order.
std::vector<std::uint32_t> assign_oracle(const std::vector<std::uint32_t>& members,
                                         const std::vector<std::uint32_t>& centers,
                                         const TokenFeatures& f) {
    std::vector<std::uint32_t> assignment;
    for (std::uint32_t tok : members) {
        double best = -1e300;
        std::uint32_t best_center = centers.front();
        for (std::uint32_t c : centers) {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::uint32_t d = 0; d < f.dim; ++d) {
                dot += static_cast<double>(f.token(tok)[d]) * f.token(c)[d];
                na += static_cast<double>(f.token(tok)[d]) * f.token(tok)[d];
                nb += static_cast<double>(f.token(c)[d]) * f.token(c)[d];
            }
            const double sim = (na == 0.0 || nb == 0.0) ? 0.0 : dot / (std::sqrt(na) * std::sqrt(nb));
            if (sim > best) {
                best = sim;
                best_center = c;
            }
        }
        assignment.push_back(best_center);
    }
    return assignment;
}

struct RandomInstance {
    ImportanceVector v;
    TokenFeatures feats;
    std::vector<std::uint32_t> redundant;
};

RandomInstance random_instance(test_support::Rng& rng, std::size_t max_redundant = 128,
                               std::uint32_t max_dim = 32) {
    std::uniform_int_distribution<std::size_t> red_dist(1, max_redundant);
    std::uniform_int_distribution<std::uint32_t> dim_dist(1, max_dim);
    std::uniform_real_distribution<float> feat_dist(-1.0f, 1.0f);

    RandomInstance inst;
    const std::size_t redundant_count = red_dist(rng);
    const std::size_t total = redundant_count + 4;  // a few non-redundant tokens
    inst.v = test_support::random_importance(rng, total);

    std::vector<std::uint32_t> all(total);
    std::iota(all.begin(), all.end(), 0u);
    std::shuffle(all.begin(), all.end(), rng);
    inst.redundant.assign(all.begin(), all.begin() + redundant_count);
    std::sort(inst.redundant.begin(), inst.redundant.end());

    inst.feats.tokens = static_cast<std::uint32_t>(total);
    inst.feats.dim = dim_dist(rng);
    inst.feats.data.resize(total * inst.feats.dim);
    for (float& x : inst.feats.data) x = feat_dist(rng);
    return inst;
}

}  // namespace

TEST_CASE("empty redundant set produces an empty outcome", "[merge]") {
    ImportanceVector v = test_support::uniform_importance(4);
    TokenFeatures f = make_features({{1, 0}, {0, 1}, {1, 1}, {0, 0}});
    MergeOutcome out = bipartite_merge(std::vector<std::uint32_t>{}, v, f, 0.5);
    CHECK(out.clusters.empty());
    CHECK(out.contextual_tokens.empty());
}

TEST_CASE("ratio zero drops every redundant token", "[merge]") {
    ImportanceVector v = test_support::uniform_importance(4);
    TokenFeatures f = make_features({{1, 0}, {0, 1}, {1, 1}, {0, 0}});
    std::vector<std::uint32_t> redundant{1, 2, 3};
    MergeOutcome out = bipartite_merge(redundant, v, f, 0.0);
    CHECK(out.clusters.empty());
    CHECK(out.contextual_tokens.empty());
}

TEST_CASE("ratio one keeps every redundant token as its own cluster", "[merge]") {
    ImportanceVector v = test_support::uniform_importance(5);
    TokenFeatures f = make_features({{1, 0}, {0, 2}, {3, 1}, {0.5f, 0.5f}, {-1, 2}});
    std::vector<std::uint32_t> redundant{1, 2, 4};
    MergeOutcome out = bipartite_merge(redundant, v, f, 1.0);
    REQUIRE(out.clusters.size() == 3);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(out.clusters[c].center == redundant[c]);
        CHECK(out.clusters[c].members.empty());
        for (std::uint32_t d = 0; d < f.dim; ++d)
            CHECK(out.contextual_tokens[c][d] == f.token(redundant[c])[d]);
    }
}

TEST_CASE("two feature groups split into two clusters with per-group means", "[merge]") {
    // six redundant tokens in 2D: three near (1,0), three near (0,1); the top
    // weight in each group becomes a center
    ImportanceVector v;
    v.weights = {0.30, 0.05, 0.05, 0.30, 0.05, 0.25};
    TokenFeatures f = make_features({
        {1.0f, 0.0f},    // group A, top weight
        {0.96f, 0.08f},  // group A
        {0.92f, 0.12f},  // group A
        {0.0f, 1.0f},    // group B, top weight
        {0.10f, 0.95f},  // group B
        {0.05f, 0.90f},  // group B
    });
    std::vector<std::uint32_t> redundant{0, 1, 2, 3, 4, 5};
    MergeOutcome out = bipartite_merge(redundant, v, f, 0.3);  // ceil(0.3 * 6) = 2 centers

    REQUIRE(out.clusters.size() == 2);
    CHECK(out.clusters[0].center == 0);
    CHECK(out.clusters[0].members == std::vector<std::uint32_t>{1, 2});
    CHECK(out.clusters[1].center == 3);
    CHECK(out.clusters[1].members == std::vector<std::uint32_t>{4, 5});

    const float mean_a_x = (1.0f + 0.96f + 0.92f) / 3.0f;
    CHECK(out.contextual_tokens[0][0] == Catch::Approx(mean_a_x).margin(1e-6));
    const float mean_b_y = (1.0f + 0.95f + 0.90f) / 3.0f;
    CHECK(out.contextual_tokens[1][1] == Catch::Approx(mean_b_y).margin(1e-6));

    // cross-check the assignment against the independent oracle
    std::vector<std::uint32_t> expected = assign_oracle({1, 2, 4, 5}, {0, 3}, f);
    CHECK(expected == std::vector<std::uint32_t>{0, 0, 3, 3});
}

TEST_CASE("assignments match the exhaustive oracle on random instances", "[merge]") {
    test_support::Rng rng(7001);
    std::uniform_real_distribution<double> ratio_dist(0.05, 1.0);
    for (int iter = 0; iter < 100; ++iter) {
        RandomInstance inst = random_instance(rng, 40, 8);
        const double ratio = ratio_dist(rng);
        MergeOutcome out = bipartite_merge(inst.redundant, inst.v, inst.feats, ratio);
        if (out.clusters.empty()) continue;

        std::vector<std::uint32_t> centers;
        for (const TokenCluster& c : out.clusters) centers.push_back(c.center);

        std::vector<std::uint32_t> members;
        std::vector<std::uint32_t> got_assignment;
        for (const TokenCluster& c : out.clusters) {
            for (std::uint32_t m : c.members) {
                members.push_back(m);
                got_assignment.push_back(c.center);
            }
        }
        // oracle visits members in the same order
        std::vector<std::size_t> order(members.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return members[a] < members[b]; });
        std::vector<std::uint32_t> sorted_members, sorted_assignment;
        for (std::size_t i : order) {
            sorted_members.push_back(members[i]);
            sorted_assignment.push_back(got_assignment[i]);
        }
        CHECK(sorted_assignment == assign_oracle(sorted_members, centers, inst.feats));
    }
}

TEST_CASE("clusters partition the redundant set", "[merge]") {
    test_support::Rng rng(7002);
    std::uniform_real_distribution<double> ratio_dist(0.01, 1.0);
    for (int iter = 0; iter < 100; ++iter) {
        RandomInstance inst = random_instance(rng);
        const double ratio = ratio_dist(rng);
        MergeOutcome out = bipartite_merge(inst.redundant, inst.v, inst.feats, ratio);

        std::multiset<std::uint32_t> seen;
        for (const TokenCluster& c : out.clusters) {
            seen.insert(c.center);
            for (std::uint32_t m : c.members) seen.insert(m);
        }
        std::multiset<std::uint32_t> expected(inst.redundant.begin(), inst.redundant.end());
        REQUIRE(seen == expected);

        const std::size_t want = contextual_cluster_count(inst.redundant.size(), ratio);
        REQUIRE(out.clusters.size() == want);
        REQUIRE(out.contextual_tokens.size() == want);
    }
}

TEST_CASE("cluster count law", "[merge]") {
    CHECK(contextual_cluster_count(0, 0.5) == 0);
    CHECK(contextual_cluster_count(10, 0.0) == 0);
    CHECK(contextual_cluster_count(10, 1.0) == 10);
    CHECK(contextual_cluster_count(10, 0.1) == 1);
    CHECK(contextual_cluster_count(10, 0.25) == 3);   // ceil(2.5)
    CHECK(contextual_cluster_count(3, 0.01) == 1);    // minimum one center
    CHECK(contextual_cluster_count(1, 0.99) == 1);
}

TEST_CASE("assignment is invariant to positive feature scaling", "[merge]") {
    test_support::Rng rng(7003);
    for (int iter = 0; iter < 30; ++iter) {
        RandomInstance inst = random_instance(rng, 64, 16);
        MergeOutcome base = bipartite_merge(inst.redundant, inst.v, inst.feats, 0.2);
        for (float scale : {0.01f, 100.0f}) {
            TokenFeatures scaled = inst.feats;
            for (float& x : scaled.data) x *= scale;
            MergeOutcome out = bipartite_merge(inst.redundant, inst.v, scaled, 0.2);
            REQUIRE(out.clusters.size() == base.clusters.size());
            for (std::size_t c = 0; c < base.clusters.size(); ++c) {
                CHECK(out.clusters[c].center == base.clusters[c].center);
                CHECK(out.clusters[c].members == base.clusters[c].members);
            }
        }
    }
}

TEST_CASE("relabeling tokens relabels clusters consistently", "[merge]") {
    test_support::Rng rng(7004);
    RandomInstance inst = random_instance(rng, 24, 6);
    MergeOutcome base = bipartite_merge(inst.redundant, inst.v, inst.feats, 0.3);

    // permute token identities
    const std::size_t total = inst.v.weights.size();
    std::vector<std::uint32_t> perm(total);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);

    ImportanceVector pv;
    pv.weights.resize(total);
    TokenFeatures pf;
    pf.tokens = inst.feats.tokens;
    pf.dim = inst.feats.dim;
    pf.data.resize(inst.feats.data.size());
    for (std::size_t i = 0; i < total; ++i) {
        pv.weights[perm[i]] = inst.v.weights[i];
        for (std::uint32_t d = 0; d < pf.dim; ++d)
            pf.data[perm[i] * pf.dim + d] = inst.feats.data[i * pf.dim + d];
    }
    std::vector<std::uint32_t> pred;
    for (std::uint32_t r : inst.redundant) pred.push_back(perm[r]);
    std::sort(pred.begin(), pred.end());

    MergeOutcome moved = bipartite_merge(pred, pv, pf, 0.3);

    // map the base outcome through the permutation and canonicalize
    std::vector<TokenCluster> mapped;
    for (const TokenCluster& c : base.clusters) {
        TokenCluster mc;
        mc.center = perm[c.center];
        for (std::uint32_t m : c.members) mc.members.push_back(perm[m]);
        std::sort(mc.members.begin(), mc.members.end());
        mapped.push_back(mc);
    }
    std::sort(mapped.begin(), mapped.end(),
              [](const TokenCluster& a, const TokenCluster& b) { return a.center < b.center; });

    REQUIRE(moved.clusters.size() == mapped.size());
    for (std::size_t c = 0; c < mapped.size(); ++c) {
        CHECK(moved.clusters[c].center == mapped[c].center);
        CHECK(moved.clusters[c].members == mapped[c].members);
    }
}

TEST_CASE("zero-norm features fall back to the lowest center index", "[merge]") {
    ImportanceVector v;
    v.weights = {0.4, 0.3, 0.2, 0.1};
    TokenFeatures f = make_features({{1, 0}, {0, 1}, {0, 0}, {0, 0}});
    // redundant {1, 2, 3}: centers by weight = {1, 2}; token 3 has a zero
    // feature vector, similar to nothing, so it joins the lowest center index
    std::vector<std::uint32_t> redundant{1, 2, 3};
    MergeOutcome out = bipartite_merge(redundant, v, f, 0.6);  // ceil(1.8) = 2 centers
    REQUIRE(out.clusters.size() == 2);
    CHECK(out.clusters[0].center == 1);
    CHECK(out.clusters[0].members == std::vector<std::uint32_t>{3});
    CHECK(out.clusters[1].center == 2);
    CHECK(out.clusters[1].members.empty());
}

TEST_CASE("sequence length law: primary plus clusters never exceeds M", "[merge]") {
    test_support::Rng rng(7005);
    for (int iter = 0; iter < 50; ++iter) {
        RandomInstance inst = random_instance(rng, 32, 4);
        const std::size_t total = inst.v.weights.size();
        const std::size_t primary = total - inst.redundant.size();
        for (double ratio : {0.0, 0.3, 1.0}) {
            MergeOutcome out = bipartite_merge(inst.redundant, inst.v, inst.feats, ratio);
            REQUIRE(primary + out.clusters.size() <= total);
            if (ratio == 1.0) REQUIRE(primary + out.clusters.size() == total);
        }
    }
}

TEST_CASE("out-of-range redundant indices are rejected", "[merge]") {
    ImportanceVector v = test_support::uniform_importance(3);
    TokenFeatures f = make_features({{1, 0}, {0, 1}, {1, 1}});
    std::vector<std::uint32_t> redundant{5};
    REQUIRE_THROWS_AS(bipartite_merge(redundant, v, f, 0.5), ValidationError);
}
