#include "rfl/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace rfl {

void SceneDims::validate() const
{
    if (!(width > 0.0 && height > 0.0 && std::isfinite(width) && std::isfinite(height)))
        throw std::invalid_argument("scene dimensions must be positive");
}

SceneDims parse_scene_dims(std::string_view text)
{
    const auto x = text.find_first_of("xX");
    if (x == std::string_view::npos)
        throw std::invalid_argument("scene must be given as WxH, got '" + std::string(text) + "'");
    auto number = [&](std::string_view part) {
        const std::string copy(part);
        char* end = nullptr;
        const double v = std::strtod(copy.c_str(), &end);
        if (copy.empty() || end != copy.c_str() + copy.size())
            throw std::invalid_argument("bad scene dimension '" + copy + "'");
        return v;
    };
    SceneDims dims{number(text.substr(0, x)), number(text.substr(x + 1))};
    dims.validate();
    return dims;
}

std::vector<double> tile_positions(double extent, double tile, double overlap)
{
    if (!(tile > 0.0))
        throw std::invalid_argument("tile size must be positive");
    if (!(overlap >= 0.0))
        throw std::invalid_argument("overlap must be non-negative");
    if (!(overlap < tile))
        throw std::invalid_argument("overlap must be smaller than the tile size");
    if (extent <= tile)
        return {0.0};

    const double stride = tile - overlap;
    std::vector<double> starts;
    for (double p = 0.0; p + tile < extent; p += stride)
        starts.push_back(p);
    const double last = extent - tile;
    if (starts.empty() || starts.back() != last)
        starts.push_back(last);
    return starts;
}

std::vector<TileSpec> tile_grid(const SceneDims& scene, double tile, double overlap)
{
    scene.validate();
    const auto xs = tile_positions(scene.width, tile, overlap);
    const auto ys = tile_positions(scene.height, tile, overlap);
    const double w = std::min(tile, scene.width);
    const double h = std::min(tile, scene.height);

    std::vector<TileSpec> tiles;
    tiles.reserve(xs.size() * ys.size());
    for (std::size_t iy = 0; iy < ys.size(); ++iy)
        for (std::size_t ix = 0; ix < xs.size(); ++ix)
            tiles.push_back({xs[ix], ys[iy], w, h, ix, iy});
    return tiles;
}

Box translate(const Box& box, double dx, double dy)
{
    return {box.x1 + dx, box.y1 + dy, box.x2 + dx, box.y2 + dy};
}

std::optional<Box> clip_box_to_tile(const Box& box, const TileSpec& tile, double min_visibility)
{
    if (box.degenerate())
        return std::nullopt;
    const Box t = tile.bounds();
    const Box clipped{std::max(box.x1, t.x1), std::max(box.y1, t.y1), std::min(box.x2, t.x2),
                      std::min(box.y2, t.y2)};
    if (!clipped.valid() || clipped.degenerate())
        return std::nullopt;
    if (clipped.area() < min_visibility * box.area())
        return std::nullopt;
    return translate(clipped, -tile.origin_x, -tile.origin_y);
}

// --- TTA ---------------------------------------------------------------------

namespace {

Box forward_step(const Box& b, const SceneDims& d, const TtaStep& step)
{
    const double W = d.width;
    const double H = d.height;
    switch (step.kind) {
    case TtaKind::Identity:
        return b;
    case TtaKind::FlipH:
        return {W - b.x2, b.y1, W - b.x1, b.y2};
    case TtaKind::Rot90: // (x, y) -> (H - y, x)
        return {H - b.y2, b.x1, H - b.y1, b.x2};
    case TtaKind::Rot180: // (x, y) -> (W - x, H - y)
        return {W - b.x2, H - b.y2, W - b.x1, H - b.y1};
    case TtaKind::Rot270: // (x, y) -> (y, W - x)
        return {b.y1, W - b.x2, b.y2, W - b.x1};
    case TtaKind::Scale:
        return {b.x1 * step.factor, b.y1 * step.factor, b.x2 * step.factor, b.y2 * step.factor};
    }
    return b;
}

// `d` is the frame the step was applied to, not the frame it produced.
Box inverse_step(const Box& b, const SceneDims& d, const TtaStep& step)
{
    const double W = d.width;
    const double H = d.height;
    switch (step.kind) {
    case TtaKind::Identity:
        return b;
    case TtaKind::FlipH:
        return {W - b.x2, b.y1, W - b.x1, b.y2};
    case TtaKind::Rot90: // (x', y') -> (y', H - x')
        return {b.y1, H - b.x2, b.y2, H - b.x1};
    case TtaKind::Rot180:
        return {W - b.x2, H - b.y2, W - b.x1, H - b.y1};
    case TtaKind::Rot270: // (x', y') -> (W - y', x')
        return {W - b.y2, b.x1, W - b.y1, b.x2};
    case TtaKind::Scale:
        return {b.x1 / step.factor, b.y1 / step.factor, b.x2 / step.factor, b.y2 / step.factor};
    }
    return b;
}

SceneDims step_dims(const SceneDims& d, const TtaStep& step)
{
    switch (step.kind) {
    case TtaKind::Rot90:
    case TtaKind::Rot270:
        return {d.height, d.width};
    case TtaKind::Scale:
        return {d.width * step.factor, d.height * step.factor};
    default:
        return d;
    }
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

TtaStep parse_step(std::string_view token)
{
    const std::string t = lower(token);
    if (t == "identity" || t == "id" || t == "none")
        return {TtaKind::Identity};
    if (t == "fliph" || t == "flip")
        return {TtaKind::FlipH};
    if (t == "rot90")
        return {TtaKind::Rot90};
    if (t == "rot180")
        return {TtaKind::Rot180};
    if (t == "rot270")
        return {TtaKind::Rot270};
    if (t.rfind("scale:", 0) == 0 || t.rfind("scale=", 0) == 0) {
        const std::string num = t.substr(6);
        char* end = nullptr;
        const double f = std::strtod(num.c_str(), &end);
        if (num.empty() || end != num.c_str() + num.size())
            throw std::invalid_argument("bad scale factor in '" + std::string(token) + "'");
        return {TtaKind::Scale, f};
    }
    throw std::invalid_argument("unknown transform step '" + std::string(token) + "'");
}

} // namespace

TtaTransform::TtaTransform(std::vector<TtaStep> steps) : steps_(std::move(steps))
{
    for (const auto& s : steps_)
        if (s.kind == TtaKind::Scale && !(s.factor > 0.0 && std::isfinite(s.factor)))
            throw std::invalid_argument("scale factor must be positive");
}

TtaTransform TtaTransform::parse(std::string_view text)
{
    std::vector<TtaStep> steps;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto sep = text.find_first_of(",+", start);
        const auto token = text.substr(start, sep == std::string_view::npos ? sep : sep - start);
        if (token.empty())
            throw std::invalid_argument("empty transform step in '" + std::string(text) + "'");
        const TtaStep step = parse_step(token);
        if (step.kind != TtaKind::Identity)
            steps.push_back(step);
        if (sep == std::string_view::npos)
            break;
        start = sep + 1;
    }
    return TtaTransform(std::move(steps));
}

std::string TtaTransform::to_string() const
{
    if (steps_.empty())
        return "identity";
    std::string out;
    for (const auto& s : steps_) {
        if (!out.empty())
            out += ',';
        switch (s.kind) {
        case TtaKind::Identity:
            out += "identity";
            break;
        case TtaKind::FlipH:
            out += "fliph";
            break;
        case TtaKind::Rot90:
            out += "rot90";
            break;
        case TtaKind::Rot180:
            out += "rot180";
            break;
        case TtaKind::Rot270:
            out += "rot270";
            break;
        case TtaKind::Scale: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "scale:%.17g", s.factor);
            out += buf;
            break;
        }
        }
    }
    return out;
}

TtaTransform TtaTransform::then(const TtaTransform& next) const
{
    std::vector<TtaStep> steps = steps_;
    steps.insert(steps.end(), next.steps_.begin(), next.steps_.end());
    return TtaTransform(std::move(steps));
}

bool TtaTransform::is_identity() const
{
    return std::all_of(steps_.begin(), steps_.end(),
                       [](const TtaStep& s) { return s.kind == TtaKind::Identity; });
}

SceneDims TtaTransform::output_dims(const SceneDims& input) const
{
    SceneDims d = input;
    for (const auto& s : steps_)
        d = step_dims(d, s);
    return d;
}

Box apply_tta(const Box& box, const SceneDims& scene, const TtaTransform& t)
{
    Box b = box;
    SceneDims d = scene;
    for (const auto& s : t.steps()) {
        b = forward_step(b, d, s);
        d = step_dims(d, s);
    }
    return b;
}

Box invert_tta(const Box& box, const SceneDims& scene, const TtaTransform& t)
{
    const auto& steps = t.steps();
    std::vector<SceneDims> frames;
    frames.reserve(steps.size());
    SceneDims d = scene;
    for (const auto& s : steps) {
        frames.push_back(d);
        d = step_dims(d, s);
    }
    Box b = box;
    for (std::size_t i = steps.size(); i-- > 0;)
        b = inverse_step(b, frames[i], steps[i]);
    return b;
}

} // namespace rfl
