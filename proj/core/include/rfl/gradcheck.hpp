#pragma once

#include "rfl/loss.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace rfl {

// Analytic-vs-central-difference sweep over the loss grid
// pt in {0.01, 0.02, ..., 0.99} x gamma in {0, 0.5, 1, 2, 5} x th in {0.25, 0.5, 0.9}
// for CE, FL and RFL in scalar, binary-logit and 5-class softmax form.
struct GradCheckOptions {
    double step = 1e-6;
    double scalar_tol = 1e-6;
    double composite_tol = 1e-5;
    // RFL points with |pt - th| < kink_band are skipped.
    double kink_band = 1e-4;
    // Negative control: flips the sign of every analytic gradient.
    bool inject_wrong_sign = false;
};

enum class GradForm { Scalar, Binary, Softmax };

std::string_view to_string(GradForm form);

struct GradCheckPoint {
    GradForm form = GradForm::Scalar;
    LossKind kind = LossKind::CE;
    double pt = 0.0;
    double gamma = 0.0;
    double threshold = 1.0;
    double analytic = 0.0; // scalar derivative, or gradient norm for composites
    double numeric = 0.0;
    double rel_err = 0.0;
    bool at_kink = false; // RFL point within 1e-3 of the threshold
};

struct GradCheckReport {
    std::size_t checked = 0;
    std::size_t skipped = 0;
    std::vector<GradCheckPoint> failures;
    GradCheckPoint worst;

    bool passed() const { return failures.empty(); }
};

GradCheckReport run_gradcheck(const GradCheckOptions& options = {});

// Grid axes, exposed for reuse by callers that sweep the same points.
std::vector<double> gradcheck_pt_grid();
std::vector<double> gradcheck_gamma_grid();
std::vector<double> gradcheck_threshold_grid();

// Logits of length `classes` whose softmax assigns exactly-ish `pt` to `gt`.
std::vector<double> logits_for_pt(double pt, std::size_t classes, std::size_t gt);

} // namespace rfl
