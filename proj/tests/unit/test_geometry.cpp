#include "rfl/geometry.hpp"
#include "rfl/random.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace rfl;

namespace {

// Box with corners on a 1/64 grid inside the scene, so every map in the TTA
// family is exact in binary floating point.
Box dyadic_box(SplitMix64& rng, const SceneDims& s)
{
    auto coord = [&](double extent) {
        return static_cast<double>(rng.below(static_cast<std::uint64_t>(extent * 64) + 1)) / 64.0;
    };
    double x1 = coord(s.width), x2 = coord(s.width), y1 = coord(s.height), y2 = coord(s.height);
    if (x1 > x2)
        std::swap(x1, x2);
    if (y1 > y2)
        std::swap(y1, y2);
    return {x1, y1, x2, y2};
}

std::vector<TtaTransform> exact_family()
{
    return {TtaTransform::identity(), TtaTransform::flip_h(), TtaTransform::rot90(),
            TtaTransform::rot180(),   TtaTransform::rot270(), TtaTransform::parse("rot90,fliph"),
            TtaTransform::parse("fliph+rot270+rot180"), TtaTransform::parse("scale:2,rot90")};
}

// Checks one axis: first start 0, no gaps, last tile ends on the far edge,
// neighbours overlap by at least `overlap`.
void check_axis(const std::vector<double>& starts, double extent, double size, double tile,
                double overlap)
{
    ASSERT_FALSE(starts.empty());
    ASSERT_EQ(starts.front(), 0.0);
    ASSERT_EQ(size, std::min(tile, extent));
    const double tol = 1e-9 * extent;
    ASSERT_NEAR(starts.back() + size, extent, tol);
    for (std::size_t i = 1; i < starts.size(); ++i) {
        ASSERT_GT(starts[i], starts[i - 1]);
        ASSERT_LE(starts[i], starts[i - 1] + size); // no gap
        ASSERT_GE(starts[i - 1] + size - starts[i], overlap - tol);
    }
}

} // namespace

TEST(TileGrid, SingleTileScene)
{
    const auto tiles = tile_grid({700, 700}, 700, 80);
    ASSERT_EQ(tiles.size(), 1u);
    EXPECT_EQ(tiles[0], (TileSpec{0, 0, 700, 700, 0, 0}));
}

TEST(TileGrid, ExactFitAlongX)
{
    const auto tiles = tile_grid({1320, 700}, 700, 80);
    ASSERT_EQ(tiles.size(), 2u);
    EXPECT_EQ(tiles[0].origin_x, 0.0);
    EXPECT_EQ(tiles[1].origin_x, 620.0);
    EXPECT_EQ(tiles[1].ix, 1u);
}

TEST(TileGrid, ClampedLastTile)
{
    const auto tiles = tile_grid({1000, 1000}, 700, 80);
    ASSERT_EQ(tiles.size(), 4u);
    const std::vector<std::pair<double, double>> expected{{0, 0}, {300, 0}, {0, 300}, {300, 300}};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(tiles[i].origin_x, expected[i].first);
        EXPECT_EQ(tiles[i].origin_y, expected[i].second);
    }
    // Neighbours overlap by 400 >= 80.
    EXPECT_EQ(tiles[0].origin_x + tiles[0].width - tiles[1].origin_x, 400.0);
}

TEST(TileGrid, SmallSceneGivesOneShrunkTile)
{
    const auto tiles = tile_grid({300, 900}, 700, 80);
    ASSERT_EQ(tiles.size(), 2u);
    EXPECT_EQ(tiles[0].width, 300.0);
    EXPECT_EQ(tiles[0].height, 700.0);
    EXPECT_EQ(tiles[1].origin_y, 200.0);
}

TEST(TileGrid, RejectsBadArguments)
{
    EXPECT_THROW(tile_grid({1000, 1000}, 700, 700), std::invalid_argument);
    EXPECT_THROW(tile_grid({1000, 1000}, 700, -1), std::invalid_argument);
    EXPECT_THROW(tile_grid({1000, 1000}, 0, 0), std::invalid_argument);
    EXPECT_THROW(tile_grid({0, 1000}, 700, 80), std::invalid_argument);
}

TEST(TileGrid, CoverageAndOverlapOnRandomTriples)
{
    SplitMix64 rng(2018);
    for (int trial = 0; trial < 1000; ++trial) {
        const SceneDims scene{1.0 + rng.uniform01() * 5000.0, 1.0 + rng.uniform01() * 5000.0};
        const double tile = 50.0 + rng.uniform01() * 1500.0;
        const double overlap = rng.uniform01() * 0.9 * tile;
        const auto tiles = tile_grid(scene, tile, overlap);
        const auto xs = tile_positions(scene.width, tile, overlap);
        const auto ys = tile_positions(scene.height, tile, overlap);
        ASSERT_EQ(tiles.size(), xs.size() * ys.size());
        check_axis(xs, scene.width, tiles[0].width, tile, overlap);
        check_axis(ys, scene.height, tiles[0].height, tile, overlap);
        for (const auto& t : tiles) {
            ASSERT_EQ(t.origin_x, xs[t.ix]);
            ASSERT_EQ(t.origin_y, ys[t.iy]);
            ASSERT_GE(t.origin_x, 0.0);
            ASSERT_LE(t.origin_x + t.width, scene.width * (1 + 1e-12));
        }
        // Rasterized spot check: random points are inside some tile.
        for (int k = 0; k < 20; ++k) {
            const double px = rng.uniform01() * scene.width, py = rng.uniform01() * scene.height;
            const bool covered = std::any_of(tiles.begin(), tiles.end(), [&](const TileSpec& t) {
                return px >= t.origin_x && px <= t.origin_x + t.width && py >= t.origin_y &&
                       py <= t.origin_y + t.height;
            });
            ASSERT_TRUE(covered) << trial;
        }
    }
}

TEST(ClipBoxes, InsideOutsideAndPartial)
{
    const TileSpec tile{100, 100, 200, 200, 0, 0};
    EXPECT_EQ(clip_box_to_tile({110, 120, 130, 150}, tile, 0.5), (Box{10, 20, 30, 50}));
    EXPECT_FALSE(clip_box_to_tile({0, 0, 50, 50}, tile, 0.1));
    // Half of the box lies in the tile.
    const Box half{80, 150, 120, 170};
    EXPECT_FALSE(clip_box_to_tile(half, tile, 0.6));
    EXPECT_EQ(clip_box_to_tile(half, tile, 0.4), (Box{0, 50, 20, 70}));
    EXPECT_EQ(clip_box_to_tile(half, tile, 0.5), (Box{0, 50, 20, 70}));
}

TEST(ClipBoxes, RecordsKeepTheirFields)
{
    const TileSpec tile{620, 0, 700, 700, 1, 0};
    std::vector<Detection> dets{{{600, 10, 700, 20}, 3, 0.7, "m", "img"}, {{0, 0, 10, 10}, 1, 0.2, "m", "img"}};
    const auto clipped = clip_boxes_to_tile(dets, tile, 0.5);
    ASSERT_EQ(clipped.size(), 1u);
    EXPECT_EQ(clipped[0].box, (Box{0, 10, 80, 20}));
    EXPECT_EQ(clipped[0].class_id, 3);
    EXPECT_EQ(clipped[0].score, 0.7);
}

TEST(TileToScene, Translation)
{
    const std::vector<Box> local{{0, 0, 10, 10}};
    EXPECT_EQ(tile_to_scene(local, TileSpec{0, 0, 700, 700, 0, 0}), local);
    EXPECT_EQ(tile_to_scene(local, TileSpec{620, 0, 700, 700, 1, 0})[0], (Box{620, 0, 630, 10}));
}

TEST(TileToScene, InteriorRoundTripIsExact)
{
    SplitMix64 rng(6);
    const SceneDims scene{1000, 1000};
    const auto tiles = tile_grid(scene, 700, 80);
    int interior = 0;
    for (int i = 0; i < 2000; ++i) {
        const Box b = dyadic_box(rng, scene);
        for (const auto& t : tiles) {
            const Box tb = t.bounds();
            if (b.degenerate() || b.x1 < tb.x1 || b.y1 < tb.y1 || b.x2 > tb.x2 || b.y2 > tb.y2)
                continue;
            const auto clipped = clip_boxes_to_tile(std::vector<Box>{b}, t, 1.0);
            ASSERT_EQ(clipped.size(), 1u);
            ASSERT_EQ(tile_to_scene(clipped, t)[0], b);
            ++interior;
        }
    }
    EXPECT_GT(interior, 100);
}

TEST(Tta, Examples)
{
    const SceneDims s{100, 100};
    const Box b{10, 20, 30, 40};
    EXPECT_EQ(apply_tta(b, s, TtaTransform::identity()), b);
    EXPECT_EQ(apply_tta(b, s, TtaTransform::rot90()), (Box{60, 10, 80, 30}));
    EXPECT_EQ(apply_tta(Box{1, 1, 2, 2}, s, TtaTransform::scale(2)), (Box{2, 2, 4, 4}));
    EXPECT_EQ(apply_tta(b, s, TtaTransform::rot180()), (Box{70, 60, 90, 80}));
    EXPECT_EQ(apply_tta(b, s, TtaTransform::rot270()), (Box{20, 70, 40, 90}));
    EXPECT_EQ(apply_tta(b, s, TtaTransform::flip_h()), (Box{70, 20, 90, 40}));
    EXPECT_EQ(invert_tta(b, s, TtaTransform::identity()), b);
}

TEST(Tta, NonSquareDimsFollowRotation)
{
    const SceneDims s{200, 100};
    EXPECT_EQ(TtaTransform::rot90().output_dims(s), (SceneDims{100, 200}));
    EXPECT_EQ(TtaTransform::parse("scale:0.5,rot90").output_dims(s), (SceneDims{50, 100}));
    // The whole scene maps onto the whole transformed frame.
    for (const auto& t : exact_family()) {
        const auto out = t.output_dims(s);
        EXPECT_EQ(apply_tta(Box{0, 0, 200, 100}, s, t), (Box{0, 0, out.width, out.height})) << t.to_string();
    }
}

TEST(Tta, ExactRoundTripsOnDyadicBoxes)
{
    SplitMix64 rng(90);
    for (const SceneDims s : {SceneDims{100, 100}, SceneDims{640, 480}, SceneDims{33.5, 700.25}})
        for (const auto& t : exact_family())
            for (int i = 0; i < 300; ++i) {
                const Box b = dyadic_box(rng, s);
                ASSERT_EQ(invert_tta(apply_tta(b, s, t), s, t), b) << t.to_string();
            }
}

TEST(Tta, FourQuarterTurnsAreIdentity)
{
    SplitMix64 rng(91);
    const SceneDims s{640, 480};
    const auto four = TtaTransform::parse("rot90,rot90,rot90,rot90");
    EXPECT_EQ(four.output_dims(s), s);
    for (int i = 0; i < 500; ++i) {
        const Box b = dyadic_box(rng, s);
        ASSERT_EQ(apply_tta(b, s, four), b);
    }
}

TEST(Tta, RigidMapsPreserveAreaAndScaleMultipliesIt)
{
    SplitMix64 rng(92);
    const SceneDims s{640, 480};
    for (int i = 0; i < 500; ++i) {
        const Box b = dyadic_box(rng, s);
        for (const auto& t : {TtaTransform::flip_h(), TtaTransform::rot90(), TtaTransform::rot180(),
                              TtaTransform::rot270()})
            ASSERT_EQ(apply_tta(b, s, t).area(), b.area());
        const double f = 0.8;
        ASSERT_NEAR(apply_tta(b, s, TtaTransform::scale(f)).area(), f * f * b.area(), 1e-9 * (1 + b.area()));
    }
}

TEST(Tta, ScaleRoundTripWithinTolerance)
{
    SplitMix64 rng(93);
    const SceneDims s{1000, 700};
    for (double f : {0.6, 0.7, 0.8, 1.2, 1.0 / 3.0})
        for (int i = 0; i < 1000; ++i) {
            const double x = rng.uniform01() * 900, y = rng.uniform01() * 600;
            const Box b{x, y, x + rng.uniform01() * 100, y + rng.uniform01() * 100};
            for (const auto& t : {TtaTransform::scale(f), TtaTransform::parse("scale:" + std::to_string(f) + ",rot90")}) {
                const Box r = invert_tta(apply_tta(b, s, t), s, t);
                ASSERT_LT(std::abs(r.x1 - b.x1), 1e-9);
                ASSERT_LT(std::abs(r.y1 - b.y1), 1e-9);
                ASSERT_LT(std::abs(r.x2 - b.x2), 1e-9);
                ASSERT_LT(std::abs(r.y2 - b.y2), 1e-9);
            }
        }
}

TEST(Tta, ArbitraryRealsRoundTripWithinAnUlp)
{
    SplitMix64 rng(94);
    const SceneDims s{1000, 700};
    for (const auto& t : exact_family())
        for (int i = 0; i < 1000; ++i) {
            const double x = rng.uniform01() * 900, y = rng.uniform01() * 600;
            const Box b{x, y, x + rng.uniform01() * 100, y + rng.uniform01() * 100};
            const Box r = invert_tta(apply_tta(b, s, t), s, t);
            const double tol = 2.0 * std::numeric_limits<double>::epsilon() * 2048.0;
            ASSERT_NEAR(r.x1, b.x1, tol);
            ASSERT_NEAR(r.y2, b.y2, tol);
        }
}

TEST(Tta, RecordOverloadsTransformBoxesOnly)
{
    const SceneDims s{100, 100};
    const std::vector<Detection> dets{{{10, 20, 30, 40}, 2, 0.5, "m", "i"}};
    const auto out = apply_tta(dets, s, TtaTransform::rot90());
    EXPECT_EQ(out[0].box, (Box{60, 10, 80, 30}));
    EXPECT_EQ(out[0].class_id, 2);
    EXPECT_EQ(invert_tta(out, s, TtaTransform::rot90()), dets);
}

TEST(Tta, ParseAndPrint)
{
    const auto t = TtaTransform::parse("scale:1.2,rot90");
    ASSERT_EQ(t.steps().size(), 2u);
    EXPECT_EQ(t.steps()[0].kind, TtaKind::Scale);
    EXPECT_EQ(t.steps()[0].factor, 1.2);
    EXPECT_EQ(TtaTransform::parse(t.to_string()), t);
    EXPECT_TRUE(TtaTransform::parse("identity").is_identity());
    EXPECT_THROW(TtaTransform::parse("rot45"), std::invalid_argument);
    EXPECT_THROW(TtaTransform::parse("scale:0"), std::invalid_argument);
    EXPECT_THROW(TtaTransform::parse("scale:-1"), std::invalid_argument);
    EXPECT_THROW(TtaTransform::scale(0.0), std::invalid_argument);
}

TEST(SceneDims, Parse)
{
    EXPECT_EQ(parse_scene_dims("1000x700"), (SceneDims{1000, 700}));
    EXPECT_EQ(parse_scene_dims("12.5X3"), (SceneDims{12.5, 3}));
    EXPECT_THROW(parse_scene_dims("1000"), std::invalid_argument);
    EXPECT_THROW(parse_scene_dims("0x5"), std::invalid_argument);
    EXPECT_THROW(parse_scene_dims("ax5"), std::invalid_argument);
}
