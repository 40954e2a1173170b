#include "rfl/ensemble.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

namespace rfl {

namespace {

struct Cluster {
    std::vector<std::size_t> members;
    Box box;
};

Box fused_box(std::span<const Detection> dets, const std::vector<std::size_t>& members,
              const FusionConfig& cfg)
{
    long double wsum = 0.0L;
    for (std::size_t m : members)
        wsum += static_cast<long double>(dets[m].score) * cfg.weight_of(dets[m].source);
    const bool uniform = !(wsum > 0.0L);

    long double acc[4] = {0.0L, 0.0L, 0.0L, 0.0L};
    Box lo = dets[members.front()].box;
    Box hi = lo;
    for (std::size_t m : members) {
        const Box& b = dets[m].box;
        const long double w =
            uniform ? 1.0L : static_cast<long double>(dets[m].score) * cfg.weight_of(dets[m].source);
        acc[0] += w * b.x1;
        acc[1] += w * b.y1;
        acc[2] += w * b.x2;
        acc[3] += w * b.y2;
        lo = {std::min(lo.x1, b.x1), std::min(lo.y1, b.y1), std::min(lo.x2, b.x2), std::min(lo.y2, b.y2)};
        hi = {std::max(hi.x1, b.x1), std::max(hi.y1, b.y1), std::max(hi.x2, b.x2), std::max(hi.y2, b.y2)};
    }
    const long double total = uniform ? static_cast<long double>(members.size()) : wsum;
    // The clamp only absorbs rounding; the exact average is inside the range.
    auto avg = [&](int k, double a, double b) {
        return std::clamp(static_cast<double>(acc[k] / total), a, b);
    };
    return {avg(0, lo.x1, hi.x1), avg(1, lo.y1, hi.y1), avg(2, lo.x2, hi.x2), avg(3, lo.y2, hi.y2)};
}

double fused_score(std::span<const Detection> dets, const std::vector<std::size_t>& members,
                   const FusionConfig& cfg)
{
    switch (cfg.score_mode) {
    case ScoreMode::Max: {
        double best = 0.0;
        for (std::size_t m : members)
            best = std::max(best, dets[m].score);
        return best;
    }
    case ScoreMode::WeightedMean: {
        long double num = 0.0L;
        long double den = 0.0L;
        for (std::size_t m : members) {
            const long double w = cfg.weight_of(dets[m].source);
            num += w * dets[m].score;
            den += w;
        }
        return static_cast<double>(num / den);
    }
    case ScoreMode::Mean:
        break;
    }
    long double sum = 0.0L;
    for (std::size_t m : members)
        sum += dets[m].score;
    return static_cast<double>(sum / static_cast<long double>(members.size()));
}

void cluster_group(std::span<const Detection> dets, std::vector<std::size_t> group,
                   const FusionConfig& cfg, std::vector<Cluster>& out)
{
    std::stable_sort(group.begin(), group.end(), [&](std::size_t a, std::size_t b) {
        if (dets[a].score != dets[b].score)
            return dets[a].score > dets[b].score;
        if (dets[a].source != dets[b].source)
            return dets[a].source < dets[b].source;
        return a < b;
    });

    std::vector<Cluster> clusters;
    for (std::size_t idx : group) {
        auto home = std::find_if(clusters.begin(), clusters.end(), [&](const Cluster& c) {
            return iou(c.box, dets[idx].box) >= cfg.iou_thresh;
        });
        if (home == clusters.end()) {
            clusters.push_back({{idx}, dets[idx].box});
            continue;
        }
        home->members.push_back(idx);
        home->box = fused_box(dets, home->members, cfg);
    }

    // Fused boxes drift as members join, so two clusters can end up
    // overlapping; merge those so the output is a fixpoint of fuse().
    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t i = 0; i < clusters.size() && !merged; ++i) {
            for (std::size_t j = i + 1; j < clusters.size() && !merged; ++j) {
                if (iou(clusters[i].box, clusters[j].box) < cfg.iou_thresh)
                    continue;
                auto& into = clusters[i].members;
                into.insert(into.end(), clusters[j].members.begin(), clusters[j].members.end());
                clusters[i].box = fused_box(dets, into, cfg);
                clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(j));
                merged = true;
            }
        }
    }
    for (auto& c : clusters)
        out.push_back(std::move(c));
}

} // namespace

std::string_view to_string(ScoreMode mode)
{
    switch (mode) {
    case ScoreMode::Mean:
        return "mean";
    case ScoreMode::Max:
        return "max";
    case ScoreMode::WeightedMean:
        return "weighted_mean";
    }
    return "mean";
}

ScoreMode parse_score_mode(std::string_view name)
{
    if (name == "mean")
        return ScoreMode::Mean;
    if (name == "max")
        return ScoreMode::Max;
    if (name == "weighted_mean" || name == "weighted-mean")
        return ScoreMode::WeightedMean;
    throw std::invalid_argument("unknown score mode '" + std::string(name) +
                                "' (expected mean, max or weighted_mean)");
}

double FusionConfig::weight_of(const std::string& source) const
{
    const auto it = source_weights.find(source);
    return it == source_weights.end() ? 1.0 : it->second;
}

void FusionConfig::validate() const
{
    if (!(iou_thresh > 0.0 && iou_thresh < 1.0))
        throw std::invalid_argument("fusion IoU threshold must lie in (0, 1)");
    if (min_votes < 1)
        throw std::invalid_argument("min_votes must be >= 1");
    for (const auto& [source, w] : source_weights)
        if (!(w > 0.0))
            throw std::invalid_argument("weight for source '" + source + "' must be positive");
}

std::vector<FusedDetection> fuse(std::span<const Detection> dets, const FusionConfig& cfg)
{
    cfg.validate();
    std::map<std::tuple<std::string, int>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < dets.size(); ++i)
        groups[{dets[i].image_id, dets[i].class_id}].push_back(i);

    std::vector<Cluster> clusters;
    for (auto& [key, group] : groups)
        cluster_group(dets, std::move(group), cfg, clusters);

    std::vector<FusedDetection> out;
    for (const auto& c : clusters) {
        std::set<std::string> sources;
        for (std::size_t m : c.members)
            sources.insert(dets[m].source);
        if (sources.size() < cfg.min_votes)
            continue;

        FusedDetection f;
        const Detection& seed = dets[c.members.front()];
        f.det.box = c.box;
        f.det.class_id = seed.class_id;
        f.det.image_id = seed.image_id;
        f.det.score = fused_score(dets, c.members, cfg);
        for (const auto& s : sources)
            f.det.source += (f.det.source.empty() ? "" : "+") + s;
        f.members = c.members;
        f.votes = sources.size();
        out.push_back(std::move(f));
    }
    std::stable_sort(out.begin(), out.end(), [](const FusedDetection& a, const FusedDetection& b) {
        return a.members.front() < b.members.front();
    });
    return out;
}

std::vector<FusedDetection> ensemble_pipeline(std::span<const TtaPass> passes,
                                              const SceneDims& scene, const FusionConfig& cfg)
{
    scene.validate();
    std::vector<Detection> pooled;
    for (const auto& pass : passes) {
        const SceneDims frame = pass.transform.output_dims(scene);
        const double tol_x = 1e-9 * frame.width;
        const double tol_y = 1e-9 * frame.height;
        for (const auto& d : pass.detections) {
            const Box& b = d.box;
            if (b.x1 < -tol_x || b.y1 < -tol_y || b.x2 > frame.width + tol_x ||
                b.y2 > frame.height + tol_y)
                throw std::invalid_argument("detection lies outside the " +
                                            pass.transform.to_string() + " frame of the scene");
            Detection back = d;
            back.box = invert_tta(d.box, scene, pass.transform);
            if (!pass.source.empty())
                back.source = pass.source;
            pooled.push_back(std::move(back));
        }
    }
    return fuse(pooled, cfg);
}

std::vector<Detection> detections_of(std::span<const FusedDetection> fused)
{
    std::vector<Detection> out;
    out.reserve(fused.size());
    for (const auto& f : fused)
        out.push_back(f.det);
    return out;
}

} // namespace rfl
