// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include "lab/experiment.hpp"
#include "lab/lab.hpp"
#include "oracles.hpp"
#include "rfl/ensemble.hpp"
#include "rfl/geometry.hpp"
#include "rfl/gradcheck.hpp"
#include "rfl/loss.hpp"
#include "rfl/metrics.hpp"
#include "rfl/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace rfl;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string config_path(const std::string& name) { return std::string(RFL_CONFIG_DIR) + "/" + name; }

lab::ExperimentConfig load_config(const std::string& name)
{
    std::ifstream in(config_path(name));
    return lab::parse_experiment_config(nlohmann::json::parse(in));
}

double seed_mean(const lab::ArmResult& arm, const std::function<double(const lab::ArmSeedResult&)>& f)
{
    double s = 0.0;
    for (const auto& r : arm.per_seed)
        s += f(r);
    return s / static_cast<double>(arm.per_seed.size());
}

const lab::ArmResult& arm_named(const lab::ExperimentResult& r, const std::string& name)
{
    for (const auto& a : r.arms)
        if (a.arm.name == name)
            return a;
    throw std::runtime_error("no arm named " + name);
}

// --- criteria ---------------------------------------------------------------

Outcome gradient_suite()
{
    const auto report = run_gradcheck();
    return {report.passed(), std::to_string(report.checked) + " points, " + std::to_string(report.failures.size()) +
                                 " failures, worst rel err " + fmt("%.3g", report.worst.rel_err)};
}

Outcome piecewise_identities()
{
    std::vector<double> pts;
    for (int i = 1; i < 1000; ++i)
        pts.push_back(i / 1000.0);
    long long worst = 0;
    std::size_t checked = 0;
    for (double g : gradcheck_gamma_grid())
        for (double th : gradcheck_threshold_grid()) {
            const auto params = LossParams::reduced_focal(g, th);
            const auto focal = LossParams::focal(g);
            for (double pt : pts) {
                const ProbPoint p(pt);
                const double r = reduced_focal_loss(p, params);
                const double other = pt < th ? ce_loss(p) : std::pow(th, g) * r;
                const double want = pt < th ? r : focal_loss(p, focal);
                worst = std::max(worst, oracle::ulp_distance(other, want));
                if (g == 0.0) {
                    worst = std::max(worst, oracle::ulp_distance(r, ce_loss(p)));
                    worst = std::max(worst, oracle::ulp_distance(focal_loss(p, focal), ce_loss(p)));
                }
                ++checked;
            }
        }
    return {worst <= 2, std::to_string(checked) + " points, worst " + std::to_string(worst) + " ulp (limit 2)"};
}

struct LongTailRuns {
    lab::ExperimentResult result;
    double seconds = 0.0;
};

const LongTailRuns& long_tail()
{
    static const LongTailRuns runs = [] {
        const auto t0 = std::chrono::steady_clock::now();
        LongTailRuns r{lab::run_experiment(load_config("long_tail.json")), 0.0};
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }();
    return runs;
}

Outcome experiment_a()
{
    const auto& runs = long_tail();
    auto mr = [&](const char* arm) {
        return seed_mean(arm_named(runs.result, arm), [](const auto& s) { return s.mrecall; });
    };
    const double ce = mr("CE"), fl = mr("FL"), rfl = mr("RFL");
    return {rfl > fl && rfl > ce && runs.seconds < 300.0,
            "mean mRecall CE " + fmt("%.4f", ce) + ", FL " + fmt("%.4f", fl) + ", RFL " + fmt("%.4f", rfl) +
                "; margin over FL " + fmt("%+.4f", rfl - fl) + ", over CE " + fmt("%+.4f", rfl - ce) +
                "; all four arms took " + fmt("%.1f", runs.seconds) + " s (limit 300)"};
}

Outcome experiment_c()
{
    const auto& runs = long_tail();
    const auto& plain = arm_named(runs.result, "RFL");
    const auto& under = arm_named(runs.result, "RFL+undersample");
    auto rare5 = [](const lab::ArmSeedResult& s) {
        double sum = 0.0;
        for (int c = 5; c < 10; ++c)
            sum += s.per_class_recall.at(c);
        return sum / 5.0;
    };
    auto head = [](const lab::ArmSeedResult& s) { return s.per_class_recall.at(0); };
    const double r0 = seed_mean(plain, rare5), r1 = seed_mean(under, rare5);
    return {r1 > r0, "rarest-5 recall " + fmt("%.4f", r0) + " -> " + fmt("%.4f", r1) + " (" + fmt("%+.4f", r1 - r0) +
                         "); class-0 recall " + fmt("%.4f", seed_mean(plain, head)) + " -> " +
                         fmt("%.4f", seed_mean(under, head))};
}

Outcome experiment_b()
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = lab::run_experiment(load_config("two_stage.json"));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto pr = [&](const char* arm) {
        return seed_mean(arm_named(result, arm), [](const auto& s) { return s.proposal_recall; });
    };
    const double ce = pr("CE"), fl = pr("FL"), rfl = pr("RFL");
    return {ce > fl && secs < 300.0, "mean proposal recall CE " + fmt("%.4f", ce) + ", FL " + fmt("%.4f", fl) +
                                         ", RFL " + fmt("%.4f", rfl) + "; CE - FL margin " + fmt("%+.4f", ce - fl) +
                                         "; " + fmt("%.1f", secs) + " s (limit 300)"};
}

Box dyadic_box(SplitMix64& rng, const SceneDims& s)
{
    auto coord = [&](double extent) {
        return static_cast<double>(rng.below(static_cast<std::uint64_t>(extent * 64) + 1)) / 64.0;
    };
    double x1 = coord(s.width), x2 = coord(s.width), y1 = coord(s.height), y2 = coord(s.height);
    return {std::min(x1, x2), std::min(y1, y2), std::max(x1, x2), std::max(y1, y2)};
}

bool axis_ok(const std::vector<double>& starts, double extent, double tile, double overlap)
{
    const double size = std::min(tile, extent);
    const double tol = 1e-9 * extent;
    if (starts.empty() || starts.front() != 0.0 || std::abs(starts.back() + size - extent) > tol)
        return false;
    for (std::size_t i = 1; i < starts.size(); ++i)
        if (!(starts[i] > starts[i - 1]) || starts[i - 1] + size - starts[i] < overlap - tol)
            return false;
    return true;
}

Outcome geometry_suite()
{
    SplitMix64 rng(2018);
    std::size_t bad_triples = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const SceneDims scene{1.0 + rng.uniform01() * 5000.0, 1.0 + rng.uniform01() * 5000.0};
        const double tile = 50.0 + rng.uniform01() * 1500.0;
        const double overlap = rng.uniform01() * 0.9 * tile;
        const auto grid = tile_grid(scene, tile, overlap);
        const auto xs = tile_positions(scene.width, tile, overlap);
        const auto ys = tile_positions(scene.height, tile, overlap);
        if (grid.size() != xs.size() * ys.size() || !axis_ok(xs, scene.width, tile, overlap) ||
            !axis_ok(ys, scene.height, tile, overlap))
            ++bad_triples;
    }

    const std::vector<TtaTransform> family{TtaTransform::flip_h(), TtaTransform::rot90(), TtaTransform::rot180(),
                                           TtaTransform::rot270(), TtaTransform::parse("rot90,fliph")};
    std::size_t inexact = 0;
    double worst_scale = 0.0;
    const SceneDims s{640, 480};
    for (int i = 0; i < 2000; ++i) {
        const Box b = dyadic_box(rng, s);
        for (const auto& t : family)
            if (invert_tta(apply_tta(b, s, t), s, t) != b)
                ++inexact;
        const Box r{rng.uniform01() * 300, rng.uniform01() * 200, 300 + rng.uniform01() * 300,
                    200 + rng.uniform01() * 250};
        for (double f : {0.6, 0.7, 0.8, 1.2}) {
            const auto t = TtaTransform::scale(f);
            const Box back = invert_tta(apply_tta(r, s, t), s, t);
            worst_scale = std::max({worst_scale, std::abs(back.x1 - r.x1), std::abs(back.y1 - r.y1),
                                    std::abs(back.x2 - r.x2), std::abs(back.y2 - r.y2)});
        }
    }
    const auto fixture = tile_grid({1000, 1000}, 700, 80).size();
    return {bad_triples == 0 && inexact == 0 && worst_scale < 1e-9 && fixture == 4,
            std::to_string(bad_triples) + "/1000 bad tilings, " + std::to_string(inexact) +
                " inexact 90-family round trips, worst scale error " + fmt("%.2g", worst_scale) +
                ", 1000x1000/700/80 gives " + std::to_string(fixture) + " tiles"};
}

Outcome metrics_oracle()
{
    std::size_t fixtures = 0, mismatches = 0;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        SplitMix64 rng(seed);
        auto box = [&] {
            const double x = static_cast<double>(rng.below(8)), y = static_cast<double>(rng.below(8));
            return Box{x, y, x + 1 + static_cast<double>(rng.below(4)), y + 1 + static_cast<double>(rng.below(4))};
        };
        std::vector<GroundTruth> gts;
        std::vector<Detection> dets;
        const auto n_gt = 1 + rng.below(5), n_det = rng.below(6);
        for (std::uint64_t i = 0; i < n_gt; ++i)
            gts.push_back({box(), static_cast<int>(rng.below(3)), rng.below(2) ? "a" : "b"});
        for (std::uint64_t i = 0; i < n_det; ++i) {
            Box b = rng.uniform01() < 0.6 ? gts[rng.below(gts.size())].box : box();
            dets.push_back({b, static_cast<int>(rng.below(3)), 0.1 * static_cast<double>(1 + rng.below(4)), "", rng.below(2) ? "a" : "b"});
        }
        for (double thresh : {0.3, 0.5, 0.7}) {
            const auto got = map_and_mrecall(dets, gts, thresh);
            const auto want = oracle::brute_force_map(dets, gts, thresh);
            if (got.map != want.map || got.recall != want.recall || got.mrecall != want.mrecall)
                ++mismatches;
        }
        ++fixtures;
    }
    const std::vector<Detection> dets{{{50, 50, 60, 60}, 0, 0.9, "", "a"}, {{0, 0, 10, 10}, 0, 0.8, "", "a"}};
    const std::vector<GroundTruth> gts{{{0, 0, 10, 10}, 0, "a"}};
    const double ap = average_precision(dets, gts, 0.5);
    return {fixtures >= 100 && mismatches == 0 && ap == 0.5,
            std::to_string(fixtures) + " fixtures x 3 thresholds, " + std::to_string(mismatches) +
                " mismatches; FP-then-TP AP " + fmt("%.9g", ap)};
}

Outcome fusion_suite()
{
    std::vector<std::string> broken;
    const std::vector<Detection> weighted{{{0, 0, 10, 10}, 0, 0.6, "a", "i"}, {{1, 1, 11, 11}, 0, 0.2, "b", "i"}};
    const auto w = fuse(weighted, {});
    if (w.size() != 1 || w[0].det.box != Box{0.25, 0.25, 10.25, 10.25})
        broken.push_back("weighted fixture");

    const std::vector<Detection> disjoint{{{0, 0, 10, 10}, 0, 0.9, "m", "i"}, {{40, 40, 60, 60}, 0, 0.5, "m", "i"},
                                          {{100, 0, 130, 20}, 1, 0.7, "m", "i"}};
    if (detections_of(fuse(disjoint, {})) != disjoint)
        broken.push_back("disjoint fixpoint");

    SplitMix64 rng(31);
    std::size_t idem = 0, hull = 0;
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<Detection> dets;
        std::vector<Box> anchors;
        for (int a = 0; a < 5; ++a) {
            const double x = rng.uniform01() * 300, y = rng.uniform01() * 300;
            anchors.push_back({x, y, x + 20 + rng.uniform01() * 50, y + 20 + rng.uniform01() * 50});
        }
        const auto n = 1 + rng.below(30);
        for (std::uint64_t i = 0; i < n; ++i) {
            const Box& a = anchors[rng.below(anchors.size())];
            auto j = [&] { return (rng.uniform01() - 0.5) * 8.0; };
            dets.push_back({{a.x1 + j(), a.y1 + j(), a.x2 + j(), a.y2 + j()}, static_cast<int>(rng.below(2)),
                            0.05 + 0.9 * rng.uniform01(), std::string(1, static_cast<char>('a' + rng.below(3))), "i"});
        }
        FusionConfig cfg;
        cfg.iou_thresh = 0.3 + 0.5 * rng.uniform01();
        const auto fused = fuse(dets, cfg);
        for (const auto& f : fused) {
            Box lo = dets[f.members[0]].box, hi = lo;
            for (auto m : f.members) {
                const Box& b = dets[m].box;
                lo = {std::min(lo.x1, b.x1), std::min(lo.y1, b.y1), std::min(lo.x2, b.x2), std::min(lo.y2, b.y2)};
                hi = {std::max(hi.x1, b.x1), std::max(hi.y1, b.y1), std::max(hi.x2, b.x2), std::max(hi.y2, b.y2)};
            }
            const Box& b = f.det.box;
            if (b.x1 < lo.x1 || b.x1 > hi.x1 || b.y1 < lo.y1 || b.y1 > hi.y1 || b.x2 < lo.x2 || b.x2 > hi.x2 ||
                b.y2 < lo.y2 || b.y2 > hi.y2)
                ++hull;
        }
        const auto once = detections_of(fused);
        if (detections_of(fuse(once, cfg)) != once)
            ++idem;
    }
    if (idem)
        broken.push_back(std::to_string(idem) + " idempotence violations");
    if (hull)
        broken.push_back(std::to_string(hull) + " hull violations");
    std::string detail = "300 random inputs";
    for (const auto& b : broken)
        detail += "; " + b;
    return {broken.empty(), detail};
}

Outcome determinism()
{
    std::string reports[2];
    for (auto& r : reports) {
        for (const char* cfg : {"degenerate.json", "long_tail.json", "two_stage.json"}) {
            std::ostringstream out, err;
            const int code = lab::run({"experiment", config_path(cfg)}, out, err);
            if (code != lab::kExitOk)
                return {false, std::string(cfg) + " exited " + std::to_string(code) + ": " + err.str()};
            r += out.str();
        }
    }
    return {reports[0] == reports[1], "3 configs, " + std::to_string(reports[0].size()) + " bytes per run, " +
                                          (reports[0] == reports[1] ? "identical" : "DIFFERENT")};
}

// Time limits are enforced inside the criteria that have them; the
// gradient and identity suites carry theirs here.
struct Criterion {
    const char* name;
    Outcome (*run)();
    double time_limit;
};

} // namespace

int main()
{
    const Criterion criteria[] = {
        {"gradient-suite", gradient_suite, 10.0},
        {"piecewise-identities", piecewise_identities, 1.0},
        {"experiment-A-long-tail-mrecall", experiment_a, 0.0},
        {"experiment-B-two-stage-proposal-recall", experiment_b, 0.0},
        {"experiment-C-undersampling-rare-recall", experiment_c, 0.0},
        {"geometry-suite", geometry_suite, 0.0},
        {"metrics-oracle", metrics_oracle, 0.0},
        {"fusion-suite", fusion_suite, 0.0},
        {"determinism", determinism, 0.0},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.time_limit > 0.0 && secs >= c.time_limit) {
            o.pass = false;
            o.detail += "; over the " + fmt("%g", c.time_limit) + " s limit";
        }
        std::printf("%s %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
    return failed == 0 ? 0 : 1;
}
