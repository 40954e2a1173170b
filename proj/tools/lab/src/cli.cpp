#include "lab/lab.hpp"
#include "lab/experiment.hpp"

#include "rfl/dataset_csv.hpp"
#include "rfl/detection_io.hpp"
#include "rfl/ensemble.hpp"
#include "rfl/geometry.hpp"
#include "rfl/gradcheck.hpp"
#include "rfl/loss.hpp"
#include "rfl/metrics.hpp"
#include "rfl/sampling.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace lab {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// Input problems: unreadable or malformed files, bad values. Exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string sig9(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw UsageError("cannot open '" + path + "'");
    return in;
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text) || !(out.flush()))
        throw UsageError("cannot write '" + path.string() + "'");
}

// Writes to `path`, or to `out` when the path is empty or "-".
void emit(const std::string& path, const std::string& text, std::ostream& out)
{
    if (path.empty() || path == "-")
        out << text;
    else
        write_file(path, text);
}

json load_json(const std::string& path)
{
    auto in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw UsageError(path + ": " + e.what());
    }
}

// Flag -> RFL_LAB_SEED -> 0.
std::uint64_t seed_fallback(const std::optional<std::uint64_t>& flag)
{
    if (flag)
        return *flag;
    if (const char* env = std::getenv("RFL_LAB_SEED"); env && *env) {
        const std::string text(env);
        if (text.find_first_not_of("0123456789") != std::string::npos)
            throw UsageError("RFL_LAB_SEED must be a non-negative integer, got '" + text + "'");
        try {
            return std::stoull(text);
        } catch (const std::out_of_range&) {
            throw UsageError("RFL_LAB_SEED out of range: " + text);
        }
    }
    return 0;
}

// --- loss-table ---------------------------------------------------------

struct LossTableArgs {
    double gamma = 2.0;
    double th = 0.5;
    double pt_min = 0.01;
    double pt_max = 0.99;
    std::size_t steps = 99;
};

int cmd_loss_table(const LossTableArgs& a, std::ostream& out)
{
    if (!(a.pt_min > 0.0 && a.pt_max < 1.0 && a.pt_min <= a.pt_max))
        throw UsageError("need 0 < pt-min <= pt-max < 1");
    if (a.steps == 0)
        throw UsageError("--steps must be positive");
    if (a.steps == 1 && a.pt_min != a.pt_max)
        throw UsageError("--steps 1 needs pt-min == pt-max");
    rfl::LossParams fl;
    rfl::LossParams rfl_params;
    try {
        fl = rfl::LossParams::focal(a.gamma);
        rfl_params = rfl::LossParams::reduced_focal(a.gamma, a.th);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    std::ostringstream table;
    table << "pt,ce,fl,rfl,cutoff_factor\n";
    for (std::size_t i = 0; i < a.steps; ++i) {
        const double pt = a.steps == 1
                              ? a.pt_min
                              : a.pt_min + (a.pt_max - a.pt_min) * static_cast<double>(i) /
                                               static_cast<double>(a.steps - 1);
        const rfl::ProbPoint p(pt);
        table << sig9(pt) << ',' << sig9(rfl::ce_loss(p)) << ',' << sig9(rfl::focal_loss(p, fl)) << ','
              << sig9(rfl::reduced_focal_loss(p, rfl_params)) << ','
              << sig9(rfl::cutoff_factor(p, rfl_params)) << '\n';
    }
    out << table.str();
    return kExitOk;
}

// --- gradcheck ----------------------------------------------------------

std::string describe(const rfl::GradCheckPoint& p)
{
    std::ostringstream s;
    s << rfl::to_string(p.form) << ' ' << rfl::to_string(p.kind) << " pt=" << sig9(p.pt)
      << " gamma=" << sig9(p.gamma) << " th=" << sig9(p.threshold) << " analytic=" << sig9(p.analytic)
      << " numeric=" << sig9(p.numeric) << " rel_err=" << sig9(p.rel_err);
    return s.str();
}

int cmd_gradcheck(const rfl::GradCheckOptions& options, std::ostream& out)
{
    if (!(options.step > 0.0) || !(options.scalar_tol > 0.0) || !(options.composite_tol > 0.0) ||
        options.kink_band < 0.0)
        throw UsageError("step and tolerances must be positive, kink band non-negative");
    const auto report = rfl::run_gradcheck(options);
    out << "checked " << report.checked << " points, skipped " << report.skipped
        << " inside the kink band (" << sig9(options.kink_band) << ")\n";
    out << "worst: " << describe(report.worst) << '\n';
    if (report.passed()) {
        out << "PASS\n";
        return kExitOk;
    }
    const auto at_kink = std::count_if(report.failures.begin(), report.failures.end(),
                                       [](const auto& p) { return p.at_kink; });
    const auto worst = std::max_element(report.failures.begin(), report.failures.end(),
                                        [](const auto& a, const auto& b) { return a.rel_err < b.rel_err; });
    out << "FAIL: " << report.failures.size() << " points exceed tolerance\n";
    out << "worst offender: " << describe(*worst) << '\n';
    if (at_kink > 0)
        out << "note: " << at_kink
            << " failures sit at the RFL cut-off pt = th, where the loss has a kink and "
               "central differences straddle both branches; --skip-kink-band excludes them\n";
    return kExitCheckFailed;
}

// --- experiment ---------------------------------------------------------

struct ExperimentArgs {
    std::string config;
    std::string seeds;
    std::string out;
    std::string plots;
    std::optional<std::size_t> iterations;
    bool wall_clock = false;
};

int cmd_experiment(const ExperimentArgs& a, std::ostream& out, std::ostream& err)
{
    const json doc = load_json(a.config);
    ExperimentConfig config;
    try {
        config = parse_experiment_config(doc);
        if (!a.seeds.empty())
            config.seeds = parse_seed_list(a.seeds);
    } catch (const ConfigError& e) {
        throw UsageError(a.config + ": " + e.what());
    }
    if (config.seeds.empty())
        config.seeds = {seed_fallback(std::nullopt)};
    if (a.iterations) {
        if (*a.iterations == 0)
            throw UsageError("--iterations must be positive");
        config.train.iterations = *a.iterations;
    }

    const auto result = run_experiment(config);
    ReportOptions options;
    options.include_wall_clock = a.wall_clock;
    auto report = make_report(result, options);
    round_floats(report);

    bool finite = true;
    for (const auto& arm : report["results"])
        for (const auto& v : arm["loss_curve"]["values"])
            finite = finite && v.is_number();
    emit(a.out, dump_report(report), out);

    if (!a.plots.empty()) {
        std::error_code ec;
        fs::create_directories(a.plots, ec);
        if (ec)
            throw UsageError("cannot create '" + a.plots + "': " + ec.message());
        write_file(fs::path(a.plots) / "recall_bars.svg", recall_bars_svg(report));
        write_file(fs::path(a.plots) / "loss_curves.svg", loss_curves_svg(report));
    }
    if (!finite) {
        err << "error: training diverged (non-finite loss)\n";
        return kExitCheckFailed;
    }
    return kExitOk;
}

// --- generate -----------------------------------------------------------

struct GenerateArgs {
    std::vector<std::size_t> class_counts;
    std::size_t dim = 10;
    double separation = 4.0;
    double noise = 0.0;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out)
{
    rfl::SynthDatasetSpec spec;
    spec.class_counts = a.class_counts;
    spec.feature_dim = a.dim;
    spec.cluster_separation = a.separation;
    spec.label_noise_rate = a.noise;
    spec.seed = seed_fallback(a.seed);
    std::vector<rfl::LabeledExample> data;
    try {
        data = rfl::generate_synthetic(spec);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    std::ostringstream csv;
    rfl::write_dataset_csv(csv, data);
    emit(a.out, csv.str(), out);
    return kExitOk;
}

// --- tile ---------------------------------------------------------------

struct TileArgs {
    std::string scene;
    double tile = 700.0;
    double overlap = 80.0;
    std::string boxes;
    double min_visibility = 0.5;
    std::string out_dir;
};

int cmd_tile(const TileArgs& a, std::ostream& out)
{
    if (!(a.min_visibility > 0.0 && a.min_visibility <= 1.0))
        throw UsageError("--min-visibility must lie in (0, 1]");
    rfl::SceneDims scene;
    std::vector<rfl::TileSpec> tiles;
    try {
        scene = rfl::parse_scene_dims(a.scene);
        tiles = rfl::tile_grid(scene, a.tile, a.overlap);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    std::vector<rfl::BoxRecord> records;
    if (!a.boxes.empty()) {
        auto in = open_in(a.boxes);
        try {
            records = rfl::read_box_records_jsonl(in);
        } catch (const std::runtime_error& e) {
            throw UsageError(a.boxes + ": " + e.what());
        }
    }

    ordered_json manifest;
    manifest["scene"] = {{"width", scene.width}, {"height", scene.height}};
    manifest["tile"] = a.tile;
    manifest["overlap"] = a.overlap;
    if (!a.boxes.empty())
        manifest["min_visibility"] = a.min_visibility;
    ordered_json list = ordered_json::array();
    if (!a.out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(a.out_dir, ec);
        if (ec)
            throw UsageError("cannot create '" + a.out_dir + "': " + ec.message());
    }
    for (const auto& t : tiles) {
        ordered_json entry = {{"ix", t.ix},           {"iy", t.iy},         {"origin_x", t.origin_x},
                              {"origin_y", t.origin_y}, {"width", t.width}, {"height", t.height}};
        if (!a.boxes.empty()) {
            const auto clipped = rfl::clip_boxes_to_tile(records, t, a.min_visibility);
            const std::string name = "tile_" + std::to_string(t.ix) + "_" + std::to_string(t.iy) + ".jsonl";
            entry["file"] = name;
            entry["boxes"] = clipped.size();
            if (!a.out_dir.empty()) {
                std::ostringstream body;
                rfl::write_box_records_jsonl(body, clipped);
                write_file(fs::path(a.out_dir) / name, body.str());
            }
        }
        list.push_back(std::move(entry));
    }
    manifest["tiles"] = std::move(list);
    const std::string text = manifest.dump(2) + "\n";
    if (a.out_dir.empty())
        out << text;
    else
        write_file(fs::path(a.out_dir) / "manifest.json", text);
    return kExitOk;
}

// --- fuse ---------------------------------------------------------------

struct FuseArgs {
    std::vector<std::string> inputs;
    std::vector<std::string> sources;
    std::vector<std::string> transforms;
    std::string scene;
    std::optional<double> iou;
    std::optional<std::size_t> min_votes;
    std::string score_mode;
    std::vector<std::string> weights;
    std::string config;
    std::string out;
};

void apply_fusion_file(const std::string& path, rfl::FusionConfig& cfg)
{
    const json doc = load_json(path);
    if (!doc.is_object())
        throw UsageError(path + ": expected a JSON object");
    for (const auto& item : doc.items()) {
        const auto& k = item.key();
        const auto& v = item.value();
        const std::string where = path + ": /" + k;
        if (k == "iou_thresh" && v.is_number())
            cfg.iou_thresh = v.get<double>();
        else if (k == "min_votes" && v.is_number_unsigned())
            cfg.min_votes = v.get<std::size_t>();
        else if (k == "score_mode" && v.is_string())
            cfg.score_mode = rfl::parse_score_mode(v.get<std::string>());
        else if (k == "source_weights" && v.is_object()) {
            for (const auto& w : v.items()) {
                if (!w.value().is_number())
                    throw UsageError(where + "/" + w.key() + ": expected a number");
                cfg.source_weights[w.key()] = w.value().get<double>();
            }
        } else if (k == "iou_thresh" || k == "min_votes" || k == "score_mode" || k == "source_weights")
            throw UsageError(where + ": wrong type");
        else
            throw UsageError(where + ": unknown field");
    }
}

int cmd_fuse(const FuseArgs& a, std::ostream& out)
{
    if (a.inputs.empty())
        throw UsageError("at least one --input is required");
    if (!a.sources.empty() && a.sources.size() != a.inputs.size())
        throw UsageError("give either no --source or one per --input");
    if (!a.transforms.empty() && a.transforms.size() != a.inputs.size())
        throw UsageError("give either no --transform or one per --input");

    rfl::FusionConfig cfg;
    try {
        if (!a.config.empty())
            apply_fusion_file(a.config, cfg);
        if (a.iou)
            cfg.iou_thresh = *a.iou;
        if (a.min_votes)
            cfg.min_votes = *a.min_votes;
        if (!a.score_mode.empty())
            cfg.score_mode = rfl::parse_score_mode(a.score_mode);
        for (const auto& w : a.weights) {
            const auto eq = w.rfind('=');
            if (eq == std::string::npos || eq == 0)
                throw UsageError("--weight expects SOURCE=WEIGHT, got '" + w + "'");
            std::size_t used = 0;
            const std::string num = w.substr(eq + 1);
            double value = 0.0;
            try {
                value = std::stod(num, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != num.size())
                throw UsageError("--weight expects SOURCE=WEIGHT, got '" + w + "'");
            cfg.source_weights[w.substr(0, eq)] = value;
        }
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    std::vector<rfl::TtaPass> passes;
    bool any_transform = false;
    for (std::size_t i = 0; i < a.inputs.size(); ++i) {
        rfl::TtaPass pass;
        auto in = open_in(a.inputs[i]);
        try {
            pass.detections = rfl::read_detections_jsonl(in);
            if (!a.transforms.empty())
                pass.transform = rfl::TtaTransform::parse(a.transforms[i]);
        } catch (const std::exception& e) {
            throw UsageError(a.inputs[i] + ": " + e.what());
        }
        any_transform = any_transform || !pass.transform.is_identity();
        if (!a.sources.empty())
            pass.source = a.sources[i];
        passes.push_back(std::move(pass));
    }

    std::vector<rfl::FusedDetection> fused;
    try {
        if (!a.scene.empty()) {
            fused = rfl::ensemble_pipeline(passes, rfl::parse_scene_dims(a.scene), cfg);
        } else {
            if (any_transform)
                throw UsageError("--scene is required when a --transform is not identity");
            std::vector<rfl::Detection> pooled;
            for (const auto& pass : passes)
                for (auto d : pass.detections) {
                    if (!pass.source.empty())
                        d.source = pass.source;
                    pooled.push_back(std::move(d));
                }
            fused = rfl::fuse(pooled, cfg);
        }
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    std::vector<rfl::Detection> dets;
    std::vector<std::size_t> votes;
    for (const auto& f : fused) {
        dets.push_back(f.det);
        votes.push_back(f.votes);
    }
    std::ostringstream body;
    rfl::write_detections_jsonl(body, dets, votes);
    emit(a.out, body.str(), out);
    return kExitOk;
}

// --- eval ---------------------------------------------------------------

struct EvalArgs {
    std::string dets;
    std::string gts;
    double iou = 0.5;
    std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out)
{
    std::vector<rfl::Detection> dets;
    std::vector<rfl::GroundTruth> gts;
    {
        auto in = open_in(a.dets);
        try {
            dets = rfl::read_detections_jsonl(in);
        } catch (const std::runtime_error& e) {
            throw UsageError(a.dets + ": " + e.what());
        }
    }
    {
        auto in = open_in(a.gts);
        try {
            gts = rfl::read_ground_truth_jsonl(in);
        } catch (const std::runtime_error& e) {
            throw UsageError(a.gts + ": " + e.what());
        }
    }
    rfl::DetectionMetrics m;
    try {
        m = rfl::map_and_mrecall(dets, gts, a.iou);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    ordered_json report;
    report["iou_thresh"] = a.iou;
    report["map"] = m.map;
    report["recall"] = m.recall;
    report["mrecall"] = m.mrecall;
    ordered_json per_class = ordered_json::object();
    for (const auto& [cls, c] : m.per_class)
        per_class[std::to_string(cls)] = {{"num_gt", c.num_gt}, {"num_det", c.num_det},
                                          {"matched", c.matched}, {"ap", c.ap},
                                          {"recall", c.recall},   {"in_map", c.in_map}};
    report["per_class"] = std::move(per_class);
    round_floats(report);
    emit(a.out, report.dump(2) + "\n", out);
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Reduced focal loss lab: losses, toy training experiments and detection tooling",
                 "rfl_lab"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kArtifactVersion));

    LossTableArgs lt;
    auto* loss_table = app.add_subcommand("loss-table", "CE/FL/RFL and the cut-off factor over a pt grid (CSV)");
    loss_table->add_option("--gamma", lt.gamma, "focusing exponent")->capture_default_str();
    loss_table->add_option("--th", lt.th, "RFL threshold")->capture_default_str();
    loss_table->add_option("--pt-min", lt.pt_min)->capture_default_str();
    loss_table->add_option("--pt-max", lt.pt_max)->capture_default_str();
    loss_table->add_option("--steps", lt.steps, "grid points, evenly spaced")->capture_default_str();

    rfl::GradCheckOptions gc;
    auto* gradcheck = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients over the loss grid");
    gradcheck->add_option("--skip-kink-band", gc.kink_band, "skip RFL points with |pt - th| below this")
        ->capture_default_str();
    gradcheck->add_option("--step", gc.step, "central-difference step")->capture_default_str();
    gradcheck->add_option("--tol", gc.scalar_tol, "relative tolerance, scalar form")->capture_default_str();
    gradcheck->add_option("--composite-tol", gc.composite_tol, "relative tolerance, binary/softmax forms")
        ->capture_default_str();
    gradcheck->add_flag("--inject-wrong-sign", gc.inject_wrong_sign)->group("");

    ExperimentArgs ex;
    auto* experiment = app.add_subcommand("experiment", "run a JSON-configured training experiment");
    experiment->add_option("config", ex.config, "experiment config (JSON)")->required();
    experiment->add_option("--seeds", ex.seeds, "comma-separated seeds, overrides the config");
    experiment->add_option("--out", ex.out, "report path (default stdout)");
    experiment->add_option("--plots", ex.plots, "directory for SVG plots");
    experiment->add_option("--iterations", ex.iterations, "override the training budget");
    experiment->add_flag("--wall-clock", ex.wall_clock, "record elapsed seconds in the report");

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "write a synthetic long-tailed dataset as CSV");
    generate->add_option("--class-counts", gen.class_counts, "examples per class")->required()->delimiter(',');
    generate->add_option("--dim", gen.dim)->capture_default_str();
    generate->add_option("--separation", gen.separation)->capture_default_str();
    generate->add_option("--noise", gen.noise, "label noise rate")->capture_default_str();
    generate->add_option("--seed", gen.seed, "defaults to RFL_LAB_SEED, then 0");
    generate->add_option("--out", gen.out, "CSV path (default stdout)");

    TileArgs tl;
    auto* tile = app.add_subcommand("tile", "split a scene into overlapping tiles");
    tile->add_option("--scene", tl.scene, "WxH")->required();
    tile->add_option("--tile", tl.tile)->capture_default_str();
    tile->add_option("--overlap", tl.overlap)->capture_default_str();
    tile->add_option("--boxes", tl.boxes, "JSONL boxes to clip into tiles");
    tile->add_option("--min-visibility", tl.min_visibility)->capture_default_str();
    tile->add_option("--out-dir", tl.out_dir, "write manifest.json and tile_{ix}_{iy}.jsonl here");

    FuseArgs fa;
    auto* fuse = app.add_subcommand("fuse", "fuse detections from several models or TTA passes");
    fuse->add_option("--input", fa.inputs, "detections JSONL (repeat)")->required();
    fuse->add_option("--source", fa.sources, "source tag per input");
    fuse->add_option("--transform", fa.transforms, "TTA applied to each input, e.g. scale:0.8,rot90");
    fuse->add_option("--scene", fa.scene, "original scene WxH, required with transforms");
    fuse->add_option("--iou", fa.iou, "cluster IoU threshold (default 0.55)");
    fuse->add_option("--min-votes", fa.min_votes, "distinct sources per cluster (default 1)");
    fuse->add_option("--score-mode", fa.score_mode, "mean | max | weighted_mean");
    fuse->add_option("--weight", fa.weights, "SOURCE=WEIGHT (repeat)");
    fuse->add_option("--config", fa.config, "JSON with iou_thresh, min_votes, score_mode, source_weights");
    fuse->add_option("--out", fa.out, "output JSONL (default stdout)");

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "mAP, recall and mRecall of detections against ground truth");
    eval->add_option("--dets", ev.dets)->required();
    eval->add_option("--gts", ev.gts)->required();
    eval->add_option("--iou", ev.iou)->capture_default_str();
    eval->add_option("--out", ev.out, "report path (default stdout)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*loss_table)
            return cmd_loss_table(lt, out);
        if (*gradcheck)
            return cmd_gradcheck(gc, out);
        if (*experiment)
            return cmd_experiment(ex, out, err);
        if (*generate)
            return cmd_generate(gen, out);
        if (*tile)
            return cmd_tile(tl, out);
        if (*fuse)
            return cmd_fuse(fa, out);
        if (*eval)
            return cmd_eval(ev, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitCheckFailed;
    }
    return kExitUsage;
}

} // namespace lab
