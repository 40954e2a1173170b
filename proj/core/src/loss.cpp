#include "rfl/loss.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rfl {

namespace {

// pt together with log(pt) and 1 - pt, each computed in whichever way is most
// accurate for the caller (log-softmax, log-sigmoid, or directly).
struct ProbTerms {
    double pt;
    double log_pt;
    double one_minus_pt;
};

ProbTerms terms_of(double pt)
{
    return {pt, std::log(pt), 1.0 - pt};
}

ProbTerms clamped(double log_pt, double one_minus_pt)
{
    static const double lo = std::log(kProbFloor);
    static const double hi = std::log1p(-kProbFloor);
    log_pt = std::clamp(log_pt, lo, hi);
    one_minus_pt = std::clamp(one_minus_pt, kProbFloor, 1.0 - kProbFloor);
    return {std::exp(log_pt), log_pt, one_minus_pt};
}

double focal_weight(const ProbTerms& t, double gamma)
{
    return std::pow(t.one_minus_pt, gamma);
}

double loss_of(const ProbTerms& t, const LossParams& params)
{
    const double nll = -t.log_pt;
    switch (params.kind()) {
    case LossKind::CE:
        return nll;
    case LossKind::FL:
        return focal_weight(t, params.gamma()) * nll;
    case LossKind::RFL:
        if (t.pt < params.threshold())
            return nll;
        // FL / th^gamma keeps FL == th^gamma * RFL within one rounding.
        return focal_weight(t, params.gamma()) * nll / std::pow(params.threshold(), params.gamma());
    }
    return nll;
}

double focal_grad_pt(const ProbTerms& t, double gamma)
{
    const double tail = focal_weight(t, gamma) / t.pt;
    if (gamma == 0.0)
        return -tail;
    return gamma * std::pow(t.one_minus_pt, gamma - 1.0) * t.log_pt - tail;
}

double grad_pt_of(const ProbTerms& t, const LossParams& params)
{
    switch (params.kind()) {
    case LossKind::CE:
        return -1.0 / t.pt;
    case LossKind::FL:
        return focal_grad_pt(t, params.gamma());
    case LossKind::RFL:
        if (t.pt < params.threshold())
            return -1.0 / t.pt;
        return focal_grad_pt(t, params.gamma()) / std::pow(params.threshold(), params.gamma());
    }
    return -1.0 / t.pt;
}

// d(loss)/d(log pt) = pt * d(loss)/d(pt), written without the 1/pt so that it
// stays finite for saturated probabilities. CE gives exactly -1.
double focal_grad_log_pt(const ProbTerms& t, double gamma)
{
    const double weight = focal_weight(t, gamma);
    if (gamma == 0.0)
        return -weight;
    return gamma * t.pt * std::pow(t.one_minus_pt, gamma - 1.0) * t.log_pt - weight;
}

double grad_log_pt_of(const ProbTerms& t, const LossParams& params)
{
    switch (params.kind()) {
    case LossKind::CE:
        return -1.0;
    case LossKind::FL:
        return focal_grad_log_pt(t, params.gamma());
    case LossKind::RFL:
        if (t.pt < params.threshold())
            return -1.0;
        return focal_grad_log_pt(t, params.gamma()) /
               std::pow(params.threshold(), params.gamma());
    }
    return -1.0;
}

} // namespace

std::string_view to_string(LossKind kind)
{
    switch (kind) {
    case LossKind::CE:
        return "CE";
    case LossKind::FL:
        return "FL";
    case LossKind::RFL:
        return "RFL";
    }
    return "CE";
}

LossKind parse_loss_kind(std::string_view name)
{
    std::string upper(name);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (upper == "CE")
        return LossKind::CE;
    if (upper == "FL")
        return LossKind::FL;
    if (upper == "RFL")
        return LossKind::RFL;
    throw std::invalid_argument("unknown loss kind '" + std::string(name) + "' (expected CE, FL or RFL)");
}

LossParams::LossParams(LossKind kind, double gamma, double threshold)
    : kind_(kind), gamma_(gamma), threshold_(threshold)
{
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
        throw std::invalid_argument("gamma must be a finite value >= 0");
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw std::invalid_argument("threshold must lie in (0, 1]");
}

ProbPoint::ProbPoint(double pt) : pt_(pt)
{
    if (!(pt > 0.0 && pt < 1.0))
        throw std::domain_error("pt must lie strictly inside (0, 1), got " + std::to_string(pt));
}

double ce_loss(ProbPoint p)
{
    return -std::log(p.value());
}

double focal_loss(ProbPoint p, const LossParams& params)
{
    return loss_of(terms_of(p.value()), LossParams::focal(params.gamma()));
}

double cutoff_factor(ProbPoint p, const LossParams& params)
{
    if (p.value() < params.threshold())
        return 1.0;
    return std::pow(1.0 - p.value(), params.gamma()) / std::pow(params.threshold(), params.gamma());
}

double reduced_focal_loss(ProbPoint p, const LossParams& params)
{
    return loss_of(terms_of(p.value()),
                   LossParams::reduced_focal(params.gamma(), params.threshold()));
}

double loss_value(ProbPoint p, const LossParams& params)
{
    return loss_of(terms_of(p.value()), params);
}

double loss_grad_pt(ProbPoint p, const LossParams& params)
{
    return grad_pt_of(terms_of(p.value()), params);
}

namespace {

ProbTerms softmax_terms_and_grad(std::span<const double> logits, std::size_t gt,
                                 const LossParams& params, std::span<double> grad)
{
    if (logits.size() < 2)
        throw std::invalid_argument("softmax loss needs at least two logits");
    if (gt >= logits.size())
        throw std::invalid_argument("ground-truth index out of range");
    if (grad.size() != logits.size())
        throw std::invalid_argument("gradient buffer size mismatch");

    const double top = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    double others = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        const double e = std::exp(logits[j] - top);
        grad[j] = e;
        denom += e;
        if (j != gt)
            others += e;
    }
    const double log_pt = logits[gt] - top - std::log(denom);
    const ProbTerms t = clamped(log_pt, others / denom);
    const double dlogpt = grad_log_pt_of(t, params);

    // d(log pt)/d(z_j) = delta_{j,gt} - softmax_j
    for (std::size_t j = 0; j < logits.size(); ++j) {
        const double s = grad[j] / denom;
        grad[j] = j == gt ? dlogpt * t.one_minus_pt : -dlogpt * s;
    }
    return t;
}

} // namespace

double softmax_loss_and_grad(std::span<const double> logits, std::size_t gt,
                             const LossParams& params, std::span<double> grad)
{
    return loss_of(softmax_terms_and_grad(logits, gt, params, grad), params);
}

SoftmaxLossResult softmax_loss_and_grad(std::span<const double> logits, std::size_t gt,
                                        const LossParams& params)
{
    SoftmaxLossResult out;
    out.grad.resize(logits.size());
    const ProbTerms t = softmax_terms_and_grad(logits, gt, params, std::span<double>(out.grad));
    out.loss = loss_of(t, params);
    out.pt = t.pt;
    return out;
}

BinaryLossResult binary_loss_and_grad(double logit, int label, const LossParams& params)
{
    if (label != 0 && label != 1)
        throw std::invalid_argument("binary label must be 0 or 1");
    // pt = sigmoid(z) with z = +logit for positives, -logit for negatives.
    const double z = label == 1 ? logit : -logit;
    const double log_pt = z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
    const double one_minus_pt = z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z))
                                         : 1.0 / (1.0 + std::exp(z));
    const ProbTerms t = clamped(log_pt, one_minus_pt);
    const double dz = grad_log_pt_of(t, params) * t.one_minus_pt;

    BinaryLossResult out;
    out.loss = loss_of(t, params);
    out.pt = t.pt;
    out.grad = label == 1 ? dz : -dz;
    return out;
}

} // namespace rfl
