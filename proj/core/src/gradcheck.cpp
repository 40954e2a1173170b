#include "rfl/gradcheck.hpp"

#include <cmath>

namespace rfl {

namespace {

constexpr std::size_t kSoftmaxClasses = 5;
constexpr std::size_t kSoftmaxGt = 2;

double rel_err(double a, double b)
{
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

double norm(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

struct Outcome {
    double analytic;
    double numeric;
    double err;
};

Outcome check_scalar(double pt, const LossParams& params, const GradCheckOptions& opt)
{
    const double h = opt.step;
    const double analytic = loss_grad_pt(ProbPoint(pt), params) * (opt.inject_wrong_sign ? -1.0 : 1.0);
    const double numeric =
        (loss_value(ProbPoint(pt + h), params) - loss_value(ProbPoint(pt - h), params)) / (2.0 * h);
    return {analytic, numeric, rel_err(analytic, numeric)};
}

Outcome check_binary(double pt, const LossParams& params, const GradCheckOptions& opt)
{
    const double h = opt.step;
    double worst = 0.0;
    Outcome out{};
    for (int label : {0, 1}) {
        const double logit = std::log(pt / (1.0 - pt)) * (label == 1 ? 1.0 : -1.0);
        const double analytic =
            binary_loss_and_grad(logit, label, params).grad * (opt.inject_wrong_sign ? -1.0 : 1.0);
        const double numeric = (binary_loss_and_grad(logit + h, label, params).loss -
                                binary_loss_and_grad(logit - h, label, params).loss) /
                               (2.0 * h);
        const double err = rel_err(analytic, numeric);
        if (err >= worst) {
            worst = err;
            out = {analytic, numeric, err};
        }
    }
    return out;
}

Outcome check_softmax(double pt, const LossParams& params, const GradCheckOptions& opt)
{
    const double h = opt.step;
    std::vector<double> logits = logits_for_pt(pt, kSoftmaxClasses, kSoftmaxGt);
    std::vector<double> analytic = softmax_loss_and_grad(logits, kSoftmaxGt, params).grad;
    if (opt.inject_wrong_sign)
        for (double& g : analytic)
            g = -g;

    std::vector<double> numeric(logits.size());
    std::vector<double> diff(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) {
        const double saved = logits[j];
        logits[j] = saved + h;
        const double up = softmax_loss_and_grad(logits, kSoftmaxGt, params).loss;
        logits[j] = saved - h;
        const double down = softmax_loss_and_grad(logits, kSoftmaxGt, params).loss;
        logits[j] = saved;
        numeric[j] = (up - down) / (2.0 * h);
        diff[j] = numeric[j] - analytic[j];
    }
    const double na = norm(analytic);
    const double nn = norm(numeric);
    const double scale = std::max(na, nn);
    return {na, nn, scale == 0.0 ? 0.0 : norm(diff) / scale};
}

} // namespace

std::string_view to_string(GradForm form)
{
    switch (form) {
    case GradForm::Scalar:
        return "scalar";
    case GradForm::Binary:
        return "binary";
    case GradForm::Softmax:
        return "softmax";
    }
    return "scalar";
}

std::vector<double> gradcheck_pt_grid()
{
    std::vector<double> grid;
    for (int k = 1; k <= 99; ++k)
        grid.push_back(k / 100.0);
    return grid;
}

std::vector<double> gradcheck_gamma_grid()
{
    return {0.0, 0.5, 1.0, 2.0, 5.0};
}

std::vector<double> gradcheck_threshold_grid()
{
    return {0.25, 0.5, 0.9};
}

std::vector<double> logits_for_pt(double pt, std::size_t classes, std::size_t gt)
{
    // Non-target logits follow a fixed uneven pattern so the gradient has
    // distinct components; the target logit is solved for pt.
    static constexpr double pattern[] = {0.3, -0.7, 1.1, -0.2, 0.5, -1.3, 0.9, 0.0};
    std::vector<double> logits(classes);
    double others = 0.0;
    for (std::size_t j = 0, k = 0; j < classes; ++j) {
        if (j == gt)
            continue;
        logits[j] = pattern[k++ % std::size(pattern)];
        others += std::exp(logits[j]);
    }
    logits[gt] = std::log(pt * others / (1.0 - pt));
    return logits;
}

GradCheckReport run_gradcheck(const GradCheckOptions& options)
{
    GradCheckReport report;
    for (LossKind kind : {LossKind::CE, LossKind::FL, LossKind::RFL}) {
        for (double gamma : gradcheck_gamma_grid()) {
            for (double th : gradcheck_threshold_grid()) {
                const LossParams params(kind, gamma, th);
                for (double pt : gradcheck_pt_grid()) {
                    const bool has_kink = kind == LossKind::RFL;
                    if (has_kink && std::abs(pt - th) < options.kink_band) {
                        report.skipped += 3;
                        continue;
                    }
                    for (GradForm form : {GradForm::Scalar, GradForm::Binary, GradForm::Softmax}) {
                        Outcome o{};
                        double tol = options.composite_tol;
                        switch (form) {
                        case GradForm::Scalar:
                            o = check_scalar(pt, params, options);
                            tol = options.scalar_tol;
                            break;
                        case GradForm::Binary:
                            o = check_binary(pt, params, options);
                            break;
                        case GradForm::Softmax:
                            o = check_softmax(pt, params, options);
                            break;
                        }
                        ++report.checked;
                        GradCheckPoint point{form, kind, pt, gamma, th, o.analytic, o.numeric, o.err,
                                             has_kink && std::abs(pt - th) < 1e-3};
                        if (o.err >= report.worst.rel_err)
                            report.worst = point;
                        if (!(o.err < tol))
                            report.failures.push_back(point);
                    }
                }
            }
        }
    }
    return report;
}

} // namespace rfl
