#include "rfl/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace rfl {

double iou(const Box& a, const Box& b)
{
    if (a.degenerate() || b.degenerate())
        return 0.0;
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0)
        return 0.0;
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

namespace {

struct BestGt {
    double overlap = 0.0;
    std::size_t index = 0;
    bool found = false;
};

BestGt best_unmatched(const Detection& det, std::span<const GroundTruth> gts,
                      const std::vector<bool>& matched)
{
    BestGt best;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        if (matched[g] || gts[g].image_id != det.image_id)
            continue;
        const double o = iou(det.box, gts[g].box);
        if (!best.found || o > best.overlap) {
            best = {o, g, true};
        }
    }
    return best;
}

} // namespace

MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                             double iou_thresh)
{
    if (!(iou_thresh > 0.0 && iou_thresh < 1.0))
        throw std::invalid_argument("IoU threshold must lie in (0, 1)");

    MatchResult result;
    result.num_gt = gts.size();
    result.gt_matched.assign(gts.size(), false);

    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

    std::size_t start = 0;
    while (start < order.size()) {
        std::size_t stop = start + 1;
        while (stop < order.size() && dets[order[stop]].score == dets[order[start]].score)
            ++stop;
        // Within a tie group the choice depends on what is still unmatched, so
        // pick one detection at a time.
        std::vector<std::size_t> group(order.begin() + static_cast<std::ptrdiff_t>(start),
                                       order.begin() + static_cast<std::ptrdiff_t>(stop));
        while (!group.empty()) {
            std::size_t pick = 0;
            BestGt pick_gt = best_unmatched(dets[group[0]], gts, result.gt_matched);
            for (std::size_t k = 1; k < group.size(); ++k) {
                const BestGt cand = best_unmatched(dets[group[k]], gts, result.gt_matched);
                if (cand.overlap > pick_gt.overlap) {
                    pick = k;
                    pick_gt = cand;
                }
            }
            const std::size_t det = group[pick];
            group.erase(group.begin() + static_cast<std::ptrdiff_t>(pick));

            const bool hit = pick_gt.found && pick_gt.overlap >= iou_thresh;
            if (hit) {
                result.gt_matched[pick_gt.index] = true;
                ++result.matched;
            }
            result.ranked.push_back(det);
            result.true_positive.push_back(hit);
        }
        start = stop;
    }
    return result;
}

double average_precision(const MatchResult& match)
{
    if (match.num_gt == 0)
        return 0.0;
    const std::size_t n = match.ranked.size();
    std::vector<double> precision(n);
    std::size_t tp = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (match.true_positive[k])
            ++tp;
        precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    }
    for (std::size_t k = n; k-- > 1;)
        precision[k - 1] = std::max(precision[k - 1], precision[k]);

    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (match.true_positive[k])
            sum += precision[k];
    return sum / static_cast<double>(match.num_gt);
}

double average_precision(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                         double iou_thresh)
{
    return average_precision(match_detections(dets, gts, iou_thresh));
}

DetectionMetrics map_and_mrecall(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                                 double iou_thresh)
{
    if (gts.empty())
        throw std::invalid_argument("ground-truth set is empty");

    std::map<int, std::vector<Detection>> dets_by_class;
    std::map<int, std::vector<GroundTruth>> gts_by_class;
    for (const auto& d : dets)
        dets_by_class[d.class_id].push_back(d);
    for (const auto& g : gts)
        gts_by_class[g.class_id].push_back(g);

    DetectionMetrics out;
    for (const auto& [cls, list] : dets_by_class)
        out.per_class[cls].num_det = list.size();
    for (const auto& [cls, list] : gts_by_class)
        out.per_class[cls].num_gt = list.size();

    std::size_t matched = 0;
    double ap_sum = 0.0;
    double recall_sum = 0.0;
    std::size_t classes_with_gt = 0;
    static const std::vector<Detection> kNoDets;
    static const std::vector<GroundTruth> kNoGts;
    for (auto& [cls, m] : out.per_class) {
        const auto dit = dets_by_class.find(cls);
        const auto git = gts_by_class.find(cls);
        const auto& cd = dit == dets_by_class.end() ? kNoDets : dit->second;
        const auto& cg = git == gts_by_class.end() ? kNoGts : git->second;
        const MatchResult match = match_detections(cd, cg, iou_thresh);
        m.matched = match.matched;
        m.ap = average_precision(match);
        m.in_map = m.num_gt > 0;
        if (!m.in_map)
            continue;
        m.recall = static_cast<double>(m.matched) / static_cast<double>(m.num_gt);
        matched += m.matched;
        ap_sum += m.ap;
        recall_sum += m.recall;
        ++classes_with_gt;
    }
    out.map = ap_sum / static_cast<double>(classes_with_gt);
    out.mrecall = recall_sum / static_cast<double>(classes_with_gt);
    out.recall = static_cast<double>(matched) / static_cast<double>(gts.size());
    return out;
}

} // namespace rfl
