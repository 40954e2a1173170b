#pragma once

#include "rfl/metrics.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rfl {

// Box accessors for the record templates below.
inline Box& box_of(Box& b) { return b; }
inline const Box& box_of(const Box& b) { return b; }
inline Box& box_of(Detection& d) { return d.box; }
inline const Box& box_of(const Detection& d) { return d.box; }
inline Box& box_of(GroundTruth& g) { return g.box; }
inline const Box& box_of(const GroundTruth& g) { return g.box; }

struct SceneDims {
    double width = 0.0;
    double height = 0.0;

    void validate() const; // both positive and finite
    bool operator==(const SceneDims&) const = default;
};

// Parses "WxH", e.g. "1000x700". Throws std::invalid_argument.
SceneDims parse_scene_dims(std::string_view text);

struct TileSpec {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double width = 0.0;
    double height = 0.0;
    std::size_t ix = 0; // column index in the grid
    std::size_t iy = 0; // row index in the grid

    Box bounds() const { return {origin_x, origin_y, origin_x + width, origin_y + height}; }
    bool operator==(const TileSpec&) const = default;
};

// Window starts along one axis: 0, stride, 2*stride, ... with stride =
// tile - overlap, the last start pulled back to extent - tile so it ends on
// the far edge. An extent no larger than the tile gives the single start 0.
std::vector<double> tile_positions(double extent, double tile, double overlap);

// Row-major grid (iy outer, ix inner). Tiles are min(tile, dim) wide per axis.
// Throws std::invalid_argument if overlap >= tile, tile <= 0 or overlap < 0.
std::vector<TileSpec> tile_grid(const SceneDims& scene, double tile, double overlap);

// Intersection of `box` with the tile in tile-local coordinates, or nothing
// when less than min_visibility of the original area survives. Zero-area boxes
// are always dropped.
std::optional<Box> clip_box_to_tile(const Box& box, const TileSpec& tile, double min_visibility);

Box translate(const Box& box, double dx, double dy);

// Works for any record with a `box` member (Detection, GroundTruth, BoxRecord).
template <typename Record>
std::vector<Record> clip_boxes_to_tile(std::span<const Record> records, const TileSpec& tile,
                                       double min_visibility)
{
    std::vector<Record> out;
    for (const auto& r : records) {
        if (auto clipped = clip_box_to_tile(box_of(r), tile, min_visibility)) {
            out.push_back(r);
            box_of(out.back()) = *clipped;
        }
    }
    return out;
}

template <typename Record>
std::vector<Record> tile_to_scene(std::span<const Record> records, const TileSpec& tile)
{
    std::vector<Record> out(records.begin(), records.end());
    for (auto& r : out)
        box_of(r) = translate(box_of(r), tile.origin_x, tile.origin_y);
    return out;
}

template <typename Record>
std::vector<Record> clip_boxes_to_tile(const std::vector<Record>& records, const TileSpec& tile,
                                       double min_visibility)
{
    return clip_boxes_to_tile(std::span<const Record>(records), tile, min_visibility);
}

template <typename Record>
std::vector<Record> tile_to_scene(const std::vector<Record>& records, const TileSpec& tile)
{
    return tile_to_scene(std::span<const Record>(records), tile);
}

// --- test-time augmentation --------------------------------------------------

enum class TtaKind { Identity, FlipH, Rot90, Rot180, Rot270, Scale };

struct TtaStep {
    TtaKind kind = TtaKind::Identity;
    double factor = 1.0; // Scale only

    bool operator==(const TtaStep&) const = default;
};

// An ordered composition of steps, applied left to right. Rotations are
// clockwise in image coordinates (y down): Rot90 maps (x, y) to (H - y, x).
class TtaTransform {
public:
    TtaTransform() = default;
    explicit TtaTransform(std::vector<TtaStep> steps);

    static TtaTransform identity() { return {}; }
    static TtaTransform flip_h() { return TtaTransform({{TtaKind::FlipH}}); }
    static TtaTransform rot90() { return TtaTransform({{TtaKind::Rot90}}); }
    static TtaTransform rot180() { return TtaTransform({{TtaKind::Rot180}}); }
    static TtaTransform rot270() { return TtaTransform({{TtaKind::Rot270}}); }
    static TtaTransform scale(double factor) { return TtaTransform({{TtaKind::Scale, factor}}); }

    // Steps separated by ',' or '+': identity, fliph, rot90, rot180, rot270,
    // scale:<factor>. Example: "scale:1.2,rot90".
    static TtaTransform parse(std::string_view text);
    std::string to_string() const;

    TtaTransform then(const TtaTransform& next) const;

    const std::vector<TtaStep>& steps() const { return steps_; }
    bool is_identity() const;
    SceneDims output_dims(const SceneDims& input) const;

    bool operator==(const TtaTransform&) const = default;

private:
    std::vector<TtaStep> steps_;
};

// The axis-aligned box of the transformed corners, in the transformed frame.
Box apply_tta(const Box& box, const SceneDims& scene, const TtaTransform& t);
// Exact inverse of apply_tta for the same `scene` (the original frame's dims).
Box invert_tta(const Box& box, const SceneDims& scene, const TtaTransform& t);

template <typename Record>
std::vector<Record> apply_tta(std::span<const Record> records, const SceneDims& scene,
                              const TtaTransform& t)
{
    std::vector<Record> out(records.begin(), records.end());
    for (auto& r : out)
        box_of(r) = apply_tta(box_of(r), scene, t);
    return out;
}

template <typename Record>
std::vector<Record> invert_tta(std::span<const Record> records, const SceneDims& scene,
                               const TtaTransform& t)
{
    std::vector<Record> out(records.begin(), records.end());
    for (auto& r : out)
        box_of(r) = invert_tta(box_of(r), scene, t);
    return out;
}


template <typename Record>
std::vector<Record> apply_tta(const std::vector<Record>& records, const SceneDims& scene,
                              const TtaTransform& t)
{
    return apply_tta(std::span<const Record>(records), scene, t);
}

template <typename Record>
std::vector<Record> invert_tta(const std::vector<Record>& records, const SceneDims& scene,
                               const TtaTransform& t)
{
    return invert_tta(std::span<const Record>(records), scene, t);
}

} // namespace rfl
