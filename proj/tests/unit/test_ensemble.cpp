#include "rfl/ensemble.hpp"
#include "rfl/random.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace rfl;

namespace {

Detection det(Box b, double score, std::string source, int cls = 0, std::string image = "img")
{
    return {b, cls, score, std::move(source), std::move(image)};
}

std::vector<Detection> random_detections(SplitMix64& rng, std::size_t n)
{
    // Jittered copies around a few anchors so clusters actually form.
    std::vector<Box> anchors;
    for (int a = 0; a < 6; ++a) {
        const double x = rng.uniform01() * 400, y = rng.uniform01() * 400;
        anchors.push_back({x, y, x + 20 + rng.uniform01() * 60, y + 20 + rng.uniform01() * 60});
    }
    const char* sources[] = {"a", "b", "c"};
    std::vector<Detection> out;
    for (std::size_t i = 0; i < n; ++i) {
        const Box& a = anchors[rng.below(anchors.size())];
        const double j = 6.0;
        Box b{a.x1 + (rng.uniform01() - 0.5) * j, a.y1 + (rng.uniform01() - 0.5) * j,
              a.x2 + (rng.uniform01() - 0.5) * j, a.y2 + (rng.uniform01() - 0.5) * j};
        out.push_back(det(b, 0.05 + 0.9 * rng.uniform01(), sources[rng.below(3)],
                          static_cast<int>(rng.below(2)), rng.below(2) ? "p" : "q"));
    }
    return out;
}

bool inside_hull(const Box& b, const std::vector<Detection>& dets, const std::vector<std::size_t>& members)
{
    Box lo = dets[members[0]].box, hi = lo;
    for (std::size_t m : members) {
        const Box& x = dets[m].box;
        lo = {std::min(lo.x1, x.x1), std::min(lo.y1, x.y1), std::min(lo.x2, x.x2), std::min(lo.y2, x.y2)};
        hi = {std::max(hi.x1, x.x1), std::max(hi.y1, x.y1), std::max(hi.x2, x.x2), std::max(hi.y2, x.y2)};
    }
    return b.x1 >= lo.x1 && b.x1 <= hi.x1 && b.y1 >= lo.y1 && b.y1 <= hi.y1 && b.x2 >= lo.x2 &&
           b.x2 <= hi.x2 && b.y2 >= lo.y2 && b.y2 <= hi.y2;
}

} // namespace

TEST(Fuse, DisjointBoxesPassThrough)
{
    const std::vector<Detection> dets{det({0, 0, 10, 10}, 0.9, "a"), det({50, 50, 60, 60}, 0.4, "b"),
                                      det({100, 0, 120, 30}, 0.7, "a")};
    const auto fused = fuse(dets, {});
    ASSERT_EQ(fused.size(), 3u);
    EXPECT_EQ(detections_of(fused), dets);
    for (const auto& f : fused)
        EXPECT_EQ(f.votes, 1u);
}

TEST(Fuse, IdenticalBoxesAverageScores)
{
    const std::vector<Detection> dets{det({0, 0, 10, 10}, 0.6, "a"), det({0, 0, 10, 10}, 0.8, "b")};
    const auto fused = fuse(dets, {});
    ASSERT_EQ(fused.size(), 1u);
    EXPECT_EQ(fused[0].det.box, (Box{0, 0, 10, 10}));
    EXPECT_NEAR(fused[0].det.score, 0.7, 1e-15);
    EXPECT_EQ(fused[0].votes, 2u);
    EXPECT_EQ(fused[0].det.source, "a+b");
    EXPECT_EQ(fused[0].members, (std::vector<std::size_t>{1, 0}));
}

TEST(Fuse, BoxIsScoreWeighted)
{
    // IoU 81/119 clusters them; weights 0.6 and 0.2 put the corners a quarter in.
    const std::vector<Detection> dets{det({0, 0, 10, 10}, 0.6, "a"), det({1, 1, 11, 11}, 0.2, "b")};
    const auto fused = fuse(dets, {});
    ASSERT_EQ(fused.size(), 1u);
    EXPECT_EQ(fused[0].det.box, (Box{0.25, 0.25, 10.25, 10.25}));
    EXPECT_NEAR(fused[0].det.score, 0.4, 1e-15);
}

TEST(Fuse, SourceWeights)
{
    const std::vector<Detection> dets{det({0, 0, 10, 10}, 0.5, "a"), det({1, 1, 11, 11}, 0.5, "b")};
    FusionConfig cfg;
    cfg.source_weights = {{"a", 3.0}};
    cfg.score_mode = ScoreMode::WeightedMean;
    auto fused = fuse(dets, cfg);
    ASSERT_EQ(fused.size(), 1u);
    EXPECT_EQ(fused[0].det.box, (Box{0.25, 0.25, 10.25, 10.25}));
    EXPECT_NEAR(fused[0].det.score, 0.5, 1e-15);

    cfg.score_mode = ScoreMode::Max;
    const std::vector<Detection> d2{det({0, 0, 10, 10}, 0.3, "a"), det({0, 0, 10, 10}, 0.9, "b")};
    EXPECT_EQ(fuse(d2, cfg)[0].det.score, 0.9);
}

TEST(Fuse, MinVotesCountsDistinctSources)
{
    const std::vector<Detection> dets{det({0, 0, 10, 10}, 0.6, "a"), det({0, 0, 10, 10}, 0.8, "a"),
                                      det({50, 50, 60, 60}, 0.5, "a"), det({50, 50, 60, 60}, 0.5, "b")};
    FusionConfig cfg;
    cfg.min_votes = 2;
    const auto fused = fuse(dets, cfg);
    ASSERT_EQ(fused.size(), 1u);
    EXPECT_EQ(fused[0].det.box, (Box{50, 50, 60, 60}));
}

TEST(Fuse, ClassesAndImagesNeverMix)
{
    const std::vector<Detection> dets{det({0, 0, 10, 10}, 0.6, "a", 0), det({0, 0, 10, 10}, 0.8, "b", 1),
                                      det({0, 0, 10, 10}, 0.8, "b", 0, "other")};
    EXPECT_EQ(fuse(dets, {}).size(), 3u);
}

TEST(Fuse, RejectsBadConfig)
{
    FusionConfig cfg;
    cfg.iou_thresh = 0.0;
    EXPECT_THROW(fuse(std::vector<Detection>{}, cfg), std::invalid_argument);
    cfg = {};
    cfg.source_weights = {{"a", 0.0}};
    EXPECT_THROW(fuse(std::vector<Detection>{}, cfg), std::invalid_argument);
    EXPECT_THROW(parse_score_mode("median"), std::invalid_argument);
    EXPECT_EQ(parse_score_mode(to_string(ScoreMode::WeightedMean)), ScoreMode::WeightedMean);
}

TEST(FuseProperties, OnRandomInputs)
{
    SplitMix64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const auto dets = random_detections(rng, 1 + rng.below(40));
        FusionConfig cfg;
        cfg.iou_thresh = 0.3 + 0.5 * rng.uniform01();
        cfg.score_mode = static_cast<ScoreMode>(rng.below(3));
        cfg.source_weights = {{"b", 2.0}};
        const auto fused = fuse(dets, cfg);

        ASSERT_LE(fused.size(), dets.size());
        std::vector<std::size_t> seen;
        for (const auto& f : fused) {
            ASSERT_TRUE(inside_hull(f.det.box, dets, f.members)) << trial;
            for (std::size_t m : f.members) {
                ASSERT_EQ(dets[m].class_id, f.det.class_id);
                ASSERT_EQ(dets[m].image_id, f.det.image_id);
                seen.push_back(m);
            }
        }
        // With min_votes 1 every input lands in exactly one cluster.
        std::sort(seen.begin(), seen.end());
        ASSERT_EQ(seen.size(), dets.size());
        ASSERT_TRUE(std::adjacent_find(seen.begin(), seen.end()) == seen.end());

        // Fusing the output again changes nothing.
        cfg.source_weights.clear();
        const auto once = detections_of(fused);
        ASSERT_EQ(detections_of(fuse(once, cfg)), once) << trial;
    }
}

TEST(FuseProperties, UniformScoreScalingOnlyScalesScores)
{
    SplitMix64 rng(32);
    for (int trial = 0; trial < 100; ++trial) {
        auto dets = random_detections(rng, 30);
        const auto base = fuse(dets, {});
        for (auto& d : dets)
            d.score *= 0.5;
        const auto halved = fuse(dets, {});
        ASSERT_EQ(base.size(), halved.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
            ASSERT_EQ(base[i].det.box, halved[i].det.box);
            ASSERT_EQ(base[i].members, halved[i].members);
            ASSERT_EQ(base[i].det.score * 0.5, halved[i].det.score);
        }
    }
}

TEST(Pipeline, IdentityPassesEqualPlainFuse)
{
    SplitMix64 rng(33);
    auto dets = random_detections(rng, 25);
    for (auto& d : dets)
        d.image_id = "img";
    const SceneDims scene{500, 500};
    const std::vector<TtaPass> passes{{dets, TtaTransform::identity(), ""}};
    EXPECT_EQ(detections_of(ensemble_pipeline(passes, scene, {})), detections_of(fuse(dets, {})));
}

TEST(Pipeline, RotatedPassAgreesWithOriginal)
{
    const SceneDims scene{100, 100};
    const Detection d = det({10, 20, 30, 40}, 0.8, "m");
    Detection r = d;
    r.box = apply_tta(d.box, scene, TtaTransform::rot90());
    EXPECT_EQ(r.box, (Box{60, 10, 80, 30}));

    FusionConfig cfg;
    cfg.min_votes = 2;
    const std::vector<TtaPass> passes{{{d}, TtaTransform::identity(), "orig"},
                                      {{r}, TtaTransform::rot90(), "rot90"}};
    const auto fused = ensemble_pipeline(passes, scene, cfg);
    ASSERT_EQ(fused.size(), 1u);
    EXPECT_EQ(fused[0].det.box, d.box);
    EXPECT_EQ(fused[0].votes, 2u);
    EXPECT_EQ(fused[0].det.source, "orig+rot90");

    cfg.min_votes = 3;
    EXPECT_TRUE(ensemble_pipeline(passes, scene, cfg).empty());
}

TEST(Pipeline, ScaledPassIsMappedBack)
{
    const SceneDims scene{200, 100};
    const Detection d = det({10, 20, 30, 40}, 0.8, "m");
    const auto t = TtaTransform::parse("scale:0.5,rot90");
    Detection s = d;
    s.box = apply_tta(d.box, scene, t);
    const std::vector<TtaPass> passes{{{d}, TtaTransform::identity(), "a"}, {{s}, t, "b"}};
    const auto fused = ensemble_pipeline(passes, scene, {});
    ASSERT_EQ(fused.size(), 1u);
    EXPECT_EQ(fused[0].det.box, d.box);
}

TEST(Pipeline, RejectsDetectionsOutsideTheFrame)
{
    const SceneDims scene{200, 100};
    // Fits the original frame but not the rotated 100x200 one.
    const std::vector<TtaPass> passes{{{det({150, 10, 190, 20}, 0.5, "m")}, TtaTransform::rot90(), ""}};
    EXPECT_THROW(ensemble_pipeline(passes, scene, {}), std::invalid_argument);
}
