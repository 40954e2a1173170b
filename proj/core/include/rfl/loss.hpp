#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace rfl {

enum class LossKind { CE, FL, RFL };

std::string_view to_string(LossKind kind);
// Accepts "CE", "FL", "RFL" (case-insensitive); throws std::invalid_argument.
LossKind parse_loss_kind(std::string_view name);

// Focusing exponent, cut-off threshold and the loss selector. Construction
// validates gamma >= 0 and 0 < threshold <= 1.
class LossParams {
public:
    LossParams() = default;
    LossParams(LossKind kind, double gamma, double threshold);

    static LossParams cross_entropy() { return {}; }
    static LossParams focal(double gamma) { return {LossKind::FL, gamma, 1.0}; }
    static LossParams reduced_focal(double gamma, double threshold)
    {
        return {LossKind::RFL, gamma, threshold};
    }

    LossKind kind() const { return kind_; }
    double gamma() const { return gamma_; }
    double threshold() const { return threshold_; }

    bool operator==(const LossParams&) const = default;

private:
    LossKind kind_ = LossKind::CE;
    double gamma_ = 0.0;
    double threshold_ = 1.0;
};

// Probability assigned to the ground-truth class. Strictly inside (0, 1);
// the constructor throws std::domain_error otherwise.
class ProbPoint {
public:
    explicit ProbPoint(double pt);
    double value() const { return pt_; }

private:
    double pt_;
};

// Composite ops clamp pt into [kProbFloor, 1 - kProbFloor] before taking logs.
inline constexpr double kProbFloor = 1e-12;

double ce_loss(ProbPoint p);
double focal_loss(ProbPoint p, const LossParams& params);

// 1 below the threshold, (1 - pt)^gamma / th^gamma at or above it. Note the
// factor is discontinuous at pt = th unless (1 - th) == th or gamma == 0.
double cutoff_factor(ProbPoint p, const LossParams& params);
double reduced_focal_loss(ProbPoint p, const LossParams& params);

// Dispatches on params.kind().
double loss_value(ProbPoint p, const LossParams& params);

// d(loss)/d(pt) for params.kind(). At pt == th the reduced focal loss is not
// differentiable; the one-sided derivative of the scaled branch is returned.
double loss_grad_pt(ProbPoint p, const LossParams& params);

struct SoftmaxLossResult {
    double loss = 0.0;
    double pt = 0.0;
    std::vector<double> grad; // d(loss)/d(logit_j)
};

// Loss of softmax(logits)[gt] and its gradient with respect to every logit.
// Uses max-subtraction and a log-domain pt, so logits of magnitude 1e3 are fine.
// Throws std::invalid_argument if logits.size() < 2 or gt is out of range.
SoftmaxLossResult softmax_loss_and_grad(std::span<const double> logits, std::size_t gt,
                                        const LossParams& params);

// Allocation-free variant for training loops; grad.size() must equal
// logits.size(). Returns the loss.
double softmax_loss_and_grad(std::span<const double> logits, std::size_t gt,
                             const LossParams& params, std::span<double> grad);

struct BinaryLossResult {
    double loss = 0.0;
    double pt = 0.0;
    double grad = 0.0; // d(loss)/d(logit)
};

// pt = sigmoid(logit) for label 1 and 1 - sigmoid(logit) for label 0.
// Throws std::invalid_argument for labels other than 0 and 1.
BinaryLossResult binary_loss_and_grad(double logit, int label, const LossParams& params);

} // namespace rfl
