#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace rfl {

// Axis-aligned box in continuous scene coordinates, x1 <= x2 and y1 <= y2.
struct Box {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    bool valid() const { return x1 <= x2 && y1 <= y2; }
    bool degenerate() const { return !(area() > 0.0); }

    bool operator==(const Box&) const = default;
};

struct Detection {
    Box box;
    int class_id = 0;
    double score = 0.0; // [0, 1]
    std::string source;
    std::string image_id;

    bool operator==(const Detection&) const = default;
};

struct GroundTruth {
    Box box;
    int class_id = 0;
    std::string image_id;

    bool operator==(const GroundTruth&) const = default;
};

// Intersection over union. Zero-area boxes give 0, even against themselves.
double iou(const Box& a, const Box& b);

// Greedy single-class matching. Detections are visited by descending score;
// equal scores are resolved by higher IoU with their best still-unmatched
// ground truth, then by input order. A detection takes the unmatched ground
// truth of the same image with the highest IoU (lowest index on ties) when
// that IoU >= iou_thresh.
struct MatchResult {
    std::vector<std::size_t> ranked;     // detection indices in visiting order
    std::vector<bool> true_positive;     // parallel to ranked
    std::vector<bool> gt_matched;        // parallel to the ground-truth input
    std::size_t num_gt = 0;
    std::size_t matched = 0;
};

MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                             double iou_thresh);

// All-points interpolated AP: the mean, over the num_gt recall steps, of the
// precision envelope at each true positive (unreached steps count as 0).
// Returns 0 when there is no ground truth.
double average_precision(const MatchResult& match);
double average_precision(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                         double iou_thresh);

struct ClassMetrics {
    std::size_t num_gt = 0;
    std::size_t num_det = 0;
    std::size_t matched = 0;
    double ap = 0.0;
    double recall = 0.0;
    bool in_map = false; // false for classes that only appear in detections
};

struct DetectionMetrics {
    double map = 0.0;      // mean AP over classes with ground truth
    double recall = 0.0;   // matched ground truths / all ground truths
    double mrecall = 0.0;  // mean per-class recall over classes with ground truth
    std::map<int, ClassMetrics> per_class;
};

// Throws std::invalid_argument when gts is empty.
DetectionMetrics map_and_mrecall(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                                 double iou_thresh = 0.5);

} // namespace rfl
