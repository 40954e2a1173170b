#pragma once

#include "rfl/sampling.hpp"
#include "rfl/trainer.hpp"

#include <cstddef>
#include <map>
#include <span>
#include <vector>

namespace rfl {

// Linear objectness scorer, the toy counterpart of a proposal network.
struct BinaryScorer {
    std::vector<double> weights;
    double bias = 0.0;

    double score(std::span<const double> x) const;
    bool operator==(const BinaryScorer&) const = default;
};

struct TwoStageConfig {
    TrainConfig stage1;              // binary objectness (loss applied via the binary form)
    std::size_t proposal_budget = 10; // top-K candidates per scene passed to stage 2
    TrainConfig stage2;              // multiclass classifier on annotated objects
    double fg_bg_ratio = 0.5;        // foreground share of every stage-1 minibatch

    void validate() const;
};

struct TwoStageReport {
    double proposal_recall = 0.0;                 // true objects in top-K / true objects
    std::map<int, ClassRecall> proposal_per_class; // same, split by true class
    double proposal_mrecall = 0.0;
    ClassificationReport stage2;                  // on true objects that survived top-K
};

struct TwoStageResult {
    BinaryScorer stage1;
    LinearModel stage2;
    TwoStageReport report; // on the training scenes
    std::vector<double> stage1_loss_curve;
    std::vector<double> stage2_loss_curve;
};

// Stage 1 trains on annotated objectness with stratified minibatches: each
// batch holds round(batch_size * fg_bg_ratio) foreground and the rest
// background. Each stratum walks its own reshuffled permutation, so a stratum
// smaller than its share repeats (sampling with replacement).
BinaryScorer train_objectness(std::span<const Scene> scenes, const TrainConfig& config,
                              double fg_bg_ratio, std::vector<double>* loss_curve = nullptr);

// Indices of the top-k candidates by score (ties by index); k is clamped to
// the candidate count.
std::vector<std::size_t> top_k_proposals(const BinaryScorer& scorer, const Scene& scene,
                                         std::size_t k);

TwoStageReport evaluate_two_stage(const BinaryScorer& stage1, const LinearModel& stage2,
                                  std::span<const Scene> scenes, std::size_t proposal_budget);

TwoStageResult train_two_stage(std::span<const Scene> scenes, const TwoStageConfig& config);

} // namespace rfl
