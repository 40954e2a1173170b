#pragma once

#include "rfl/loss.hpp"
#include "rfl/sampling.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace rfl {

// A rate applies while iteration < until. Past the last step the last rate
// stays in force.
struct LrStep {
    std::uint64_t until = 0;
    double rate = 0.0;

    bool operator==(const LrStep&) const = default;
};

using LrSchedule = std::vector<LrStep>;

// Throws std::invalid_argument unless non-empty, thresholds strictly
// increasing and rates positive.
void validate_schedule(const LrSchedule& schedule);

double lr_at(const LrSchedule& schedule, std::uint64_t iteration);

// 0.005 until 120k, 0.0005 until 140k, then 0.00005 (180k total).
LrSchedule reference_step_schedule();

struct TrainConfig {
    LossParams loss;
    std::size_t iterations = 1000;
    std::size_t batch_size = 32;
    LrSchedule lr_schedule{{1000, 0.1}};
    std::uint64_t weight_init_seed = 0;
    std::optional<UndersamplePolicy> undersample;
    // 0 means one past the largest label present in the data.
    std::size_t num_classes = 0;

    void validate() const;
};

// Softmax-linear classifier: logits = W x + b, W stored row-major.
class LinearModel {
public:
    LinearModel() = default;
    LinearModel(std::size_t num_classes, std::size_t feature_dim);

    // Zero biases, weights uniform in [-0.01, 0.01] from `seed`.
    static LinearModel initialized(std::size_t num_classes, std::size_t feature_dim,
                                   std::uint64_t seed);

    std::size_t num_classes() const { return num_classes_; }
    std::size_t feature_dim() const { return feature_dim_; }

    double& weight(std::size_t cls, std::size_t dim) { return weights_[cls * feature_dim_ + dim]; }
    double weight(std::size_t cls, std::size_t dim) const { return weights_[cls * feature_dim_ + dim]; }
    std::span<double> weights() { return weights_; }
    std::span<const double> weights() const { return weights_; }
    std::span<double> biases() { return biases_; }
    std::span<const double> biases() const { return biases_; }

    void logits(std::span<const double> x, std::span<double> out) const;
    // Argmax of the logits; ties go to the lower class index.
    int predict(std::span<const double> x) const;

    bool operator==(const LinearModel&) const = default;

private:
    std::size_t num_classes_ = 0;
    std::size_t feature_dim_ = 0;
    std::vector<double> weights_;
    std::vector<double> biases_;
};

struct BatchGradient {
    double loss = 0.0;  // mean over the batch
    LinearModel grad;   // same shape as the model
};

// Mean loss and gradient over data[batch[i]].
BatchGradient batch_loss_and_gradient(const LinearModel& model,
                                      std::span<const LabeledExample> data,
                                      std::span<const std::size_t> batch, const LossParams& loss);

struct TrainResult {
    LinearModel model;
    std::vector<double> loss_curve; // mean batch loss per iteration
};

// Plain minibatch SGD. Each epoch walks a fresh permutation of the (optionally
// undersampled) data; the undersampling sub-seed is derive_seed(policy.seed,
// epoch) and the shuffle stream is derived from weight_init_seed.
TrainResult train_classifier(std::span<const LabeledExample> data, const TrainConfig& config);

struct ClassRecall {
    std::size_t count = 0;
    std::size_t correct = 0;
    double recall = 0.0;

    bool operator==(const ClassRecall&) const = default;
};

struct ClassificationReport {
    std::map<int, ClassRecall> per_class; // classes present in the truth labels
    double mrecall = 0.0;                 // unweighted mean of per_class recalls
    double accuracy = 0.0;
};

ClassificationReport report_from_predictions(std::span<const int> truth,
                                             std::span<const int> predicted);

ClassificationReport evaluate_classifier(const LinearModel& model,
                                         std::span<const LabeledExample> data);

} // namespace rfl
