#pragma once

#include "rfl/metrics.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace rfl {

// JSON lines, one object per line:
//   {"box":[x1,y1,x2,y2],"class_id":3,"score":0.9,"image_id":"a","source":"m1"}
// score is required for detections and absent for ground truth; image_id and
// source are optional (image_id may also be an integer). Blank lines are
// skipped. Readers throw std::runtime_error naming the offending line.
std::vector<Detection> read_detections_jsonl(std::istream& in);
std::vector<GroundTruth> read_ground_truth_jsonl(std::istream& in);

// Reads either kind. A record without "score" becomes a detection with
// score 0 and `has_score` false.
struct BoxRecord {
    Detection det;
    bool has_score = false;
};
inline Box& box_of(BoxRecord& r) { return r.det.box; }
inline const Box& box_of(const BoxRecord& r) { return r.det.box; }
std::vector<BoxRecord> read_box_records_jsonl(std::istream& in);

// Numbers use the shortest representation that reads back exactly. When
// `votes` is non-empty it must be parallel to `dets` and adds a "votes" field.
void write_detections_jsonl(std::ostream& out, std::span<const Detection> dets,
                            std::span<const std::size_t> votes = {});
void write_ground_truth_jsonl(std::ostream& out, std::span<const GroundTruth> gts);
void write_box_records_jsonl(std::ostream& out, std::span<const BoxRecord> records);

} // namespace rfl
