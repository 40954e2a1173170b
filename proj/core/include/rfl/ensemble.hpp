#pragma once

#include "rfl/geometry.hpp"
#include "rfl/metrics.hpp"

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rfl {

enum class ScoreMode { Mean, Max, WeightedMean };

std::string_view to_string(ScoreMode mode);
ScoreMode parse_score_mode(std::string_view name); // mean | max | weighted_mean

struct FusionConfig {
    double iou_thresh = 0.55;
    std::size_t min_votes = 1;  // distinct sources a cluster needs to survive
    ScoreMode score_mode = ScoreMode::Mean;
    std::map<std::string, double> source_weights; // missing sources weigh 1

    double weight_of(const std::string& source) const;
    void validate() const;
};

struct FusedDetection {
    Detection det;                    // source: distinct member sources joined by '+'
    std::vector<std::size_t> members; // input indices, in clustering order
    std::size_t votes = 0;            // distinct member sources
};

// IoU-voting fusion, independently per (image_id, class_id):
//  1. rank detections by score (desc), then source tag, then input index;
//  2. each joins the first cluster, in creation order, whose current fused box
//     has IoU >= iou_thresh with it, otherwise it opens a new cluster;
//  3. clusters whose fused boxes still overlap by >= iou_thresh are merged
//     (earliest pair first) until none do;
//  4. clusters with fewer than min_votes distinct sources are dropped.
// The fused box is the average of member corners weighted by
// score * source weight, clamped to the members' corner range. Output is
// ordered by the input index of each cluster's first member.
std::vector<FusedDetection> fuse(std::span<const Detection> dets, const FusionConfig& cfg);

// One inference pass: detections in the pass's transformed frame.
struct TtaPass {
    std::vector<Detection> detections;
    TtaTransform transform;
    std::string source; // overrides each detection's source when non-empty
};

// Maps every pass back to the original frame with invert_tta, pools the passes
// in order and fuses them. Throws std::invalid_argument when a detection lies
// outside its pass's transformed frame.
std::vector<FusedDetection> ensemble_pipeline(std::span<const TtaPass> passes,
                                              const SceneDims& scene, const FusionConfig& cfg);

std::vector<Detection> detections_of(std::span<const FusedDetection> fused);

} // namespace rfl
