#include "lab/experiment.hpp"
#include "lab/lab.hpp"

#include "rfl/random.hpp"
#include "rfl/two_stage.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

namespace lab {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Object view that remembers which keys were read, so leftovers can be
// reported as unknown.
class Fields {
public:
    Fields(const json& value, std::string where) : value_(value), where_(std::move(where))
    {
        if (!value_.is_object())
            throw ConfigError(where_, "expected an object");
    }

    const json* find(const std::string& key)
    {
        used_.insert(key);
        auto it = value_.find(key);
        return it == value_.end() ? nullptr : &*it;
    }

    const json& require(const std::string& key)
    {
        const json* v = find(key);
        if (!v)
            throw ConfigError(path(key), "missing required field");
        return *v;
    }

    std::string path(const std::string& key) const { return where_ + "/" + key; }

    void reject_unknown() const
    {
        for (const auto& item : value_.items())
            if (!used_.count(item.key()))
                throw ConfigError(path(item.key()), "unknown field");
    }

private:
    const json& value_;
    std::string where_;
    std::set<std::string> used_;
};

double as_number(const json& v, const std::string& where)
{
    if (!v.is_number())
        throw ConfigError(where, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x))
        throw ConfigError(where, "expected a finite number");
    return x;
}

std::uint64_t as_unsigned(const json& v, const std::string& where)
{
    if (v.is_number_unsigned())
        return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError(where, "expected a non-negative integer");
}

std::size_t as_positive(const json& v, const std::string& where)
{
    const auto n = as_unsigned(v, where);
    if (n == 0)
        throw ConfigError(where, "must be positive");
    return static_cast<std::size_t>(n);
}

std::string as_string(const json& v, const std::string& where)
{
    if (!v.is_string())
        throw ConfigError(where, "expected a string");
    return v.get<std::string>();
}

const json& as_array(const json& v, const std::string& where)
{
    if (!v.is_array())
        throw ConfigError(where, "expected an array");
    return v;
}

template <class F>
void optional_field(Fields& f, const std::string& key, F&& assign)
{
    if (const json* v = f.find(key))
        assign(*v, f.path(key));
}

rfl::LossParams parse_loss(Fields& f)
{
    const auto kind_path = f.path("loss");
    rfl::LossKind kind;
    try {
        kind = rfl::parse_loss_kind(as_string(f.require("loss"), kind_path));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(kind_path, e.what());
    }
    const json* gamma = f.find("gamma");
    const json* threshold = f.find("threshold");
    if (kind == rfl::LossKind::CE && (gamma || threshold))
        throw ConfigError(f.path(gamma ? "gamma" : "threshold"), "CE takes no gamma or threshold");
    if (kind == rfl::LossKind::FL && threshold)
        throw ConfigError(f.path("threshold"), "FL takes no threshold");
    const double g = gamma ? as_number(*gamma, f.path("gamma")) : 2.0;
    const double th = threshold ? as_number(*threshold, f.path("threshold")) : 0.5;
    try {
        switch (kind) {
        case rfl::LossKind::CE: return rfl::LossParams::cross_entropy();
        case rfl::LossKind::FL: return rfl::LossParams::focal(g);
        case rfl::LossKind::RFL: return rfl::LossParams::reduced_focal(g, th);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(f.path(gamma ? "gamma" : "threshold"), e.what());
    }
    return {};
}

rfl::LrSchedule parse_schedule(const json& v, const std::string& where)
{
    rfl::LrSchedule schedule;
    const auto& arr = as_array(v, where);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        Fields f(arr[i], where + "/" + std::to_string(i));
        rfl::LrStep step;
        step.until = as_unsigned(f.require("until"), f.path("until"));
        step.rate = as_number(f.require("rate"), f.path("rate"));
        f.reject_unknown();
        schedule.push_back(step);
    }
    try {
        rfl::validate_schedule(schedule);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where, e.what());
    }
    return schedule;
}

void parse_train_fields(Fields& f, TrainSpec& spec)
{
    optional_field(f, "iterations", [&](const json& v, const std::string& w) { spec.iterations = as_positive(v, w); });
    optional_field(f, "batch_size", [&](const json& v, const std::string& w) { spec.batch_size = as_positive(v, w); });
    optional_field(f, "lr_schedule", [&](const json& v, const std::string& w) { spec.lr_schedule = parse_schedule(v, w); });
}

std::map<int, double> parse_undersample(const json& v, const std::string& where)
{
    Fields f(v, where);
    std::map<int, double> skip;
    for (const auto& item : v.items()) {
        const auto path = f.path(item.key());
        f.find(item.key());
        int cls = 0;
        try {
            std::size_t used = 0;
            cls = std::stoi(item.key(), &used);
            if (used != item.key().size())
                throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw ConfigError(path, "keys must be integer class ids");
        }
        const double p = as_number(item.value(), path);
        if (p < 0.0 || p > 1.0)
            throw ConfigError(path, "skip probability must lie in [0, 1]");
        skip[cls] = p;
    }
    return skip;
}

ordered_json loss_to_json(const rfl::LossParams& loss)
{
    ordered_json j;
    j["loss"] = std::string(rfl::to_string(loss.kind()));
    if (loss.kind() != rfl::LossKind::CE)
        j["gamma"] = loss.gamma();
    if (loss.kind() == rfl::LossKind::RFL)
        j["threshold"] = loss.threshold();
    return j;
}

ordered_json schedule_to_json(const rfl::LrSchedule& schedule)
{
    ordered_json arr = ordered_json::array();
    for (const auto& s : schedule)
        arr.push_back({{"until", s.until}, {"rate", s.rate}});
    return arr;
}

ordered_json train_to_json(const TrainSpec& spec)
{
    return {{"iterations", spec.iterations},
            {"batch_size", spec.batch_size},
            {"lr_schedule", schedule_to_json(spec.lr_schedule)}};
}

ordered_json recall_map(const std::map<int, double>& m)
{
    ordered_json j = ordered_json::object();
    for (const auto& [cls, r] : m)
        j[std::to_string(cls)] = r;
    return j;
}

rfl::TrainConfig make_train_config(const TrainSpec& spec, const rfl::LossParams& loss,
                                   std::uint64_t seed)
{
    rfl::TrainConfig cfg;
    cfg.loss = loss;
    cfg.iterations = spec.iterations;
    cfg.batch_size = spec.batch_size;
    cfg.lr_schedule = spec.lr_schedule;
    cfg.weight_init_seed = seed;
    return cfg;
}

std::map<int, double> recalls_of(const std::map<int, rfl::ClassRecall>& table)
{
    std::map<int, double> out;
    for (const auto& [cls, r] : table)
        out[cls] = r.recall;
    return out;
}

void run_classifier_seed(const ExperimentConfig& config, std::uint64_t seed,
                         std::vector<ArmResult>& arms)
{
    const auto& ds = config.dataset;
    rfl::SynthDatasetSpec train_spec;
    train_spec.class_counts = ds.class_counts;
    train_spec.feature_dim = ds.feature_dim;
    train_spec.cluster_separation = ds.cluster_separation;
    train_spec.label_noise_rate = ds.label_noise_rate;
    train_spec.seed = rfl::derive_seed(seed, kTrainDataStream);

    rfl::SynthDatasetSpec test_spec = train_spec;
    test_spec.class_counts.assign(ds.class_counts.size(), ds.test_per_class);
    test_spec.label_noise_rate = 0.0;
    test_spec.seed = rfl::derive_seed(seed, kTestDataStream);

    const auto train = rfl::generate_synthetic(train_spec);
    const auto test = rfl::generate_synthetic(test_spec);

    for (auto& arm : arms) {
        auto cfg = make_train_config(config.train, arm.arm.loss, seed);
        cfg.num_classes = ds.class_counts.size();
        if (!arm.arm.undersample.empty())
            cfg.undersample = rfl::UndersamplePolicy{arm.arm.undersample,
                                                     rfl::derive_seed(seed, kUndersampleStream)};
        auto trained = rfl::train_classifier(train, cfg);
        const auto report = rfl::evaluate_classifier(trained.model, test);

        ArmSeedResult r;
        r.seed = seed;
        r.accuracy = report.accuracy;
        r.mrecall = report.mrecall;
        r.per_class_recall = recalls_of(report.per_class);
        r.loss_curve = std::move(trained.loss_curve);
        arm.per_seed.push_back(std::move(r));
    }
}

rfl::SceneSetSpec scene_spec(const SceneData& sd, std::size_t count, std::uint64_t seed)
{
    rfl::SceneSetSpec spec;
    spec.num_scenes = count;
    spec.objects_per_scene = sd.objects_per_scene;
    spec.background_per_object = sd.background_per_object;
    spec.class_weights = sd.class_weights;
    spec.feature_dim = sd.feature_dim;
    spec.objectness_shift = sd.objectness_shift;
    spec.missed_rate = sd.missed_rate;
    spec.spurious_rate = sd.spurious_rate;
    spec.seed = seed;
    return spec;
}

void run_two_stage_seed(const ExperimentConfig& config, std::uint64_t seed,
                        std::vector<ArmResult>& arms)
{
    const auto& sd = config.scenes;
    const auto train = rfl::generate_scenes(
        scene_spec(sd, sd.train_scenes, rfl::derive_seed(seed, kTrainDataStream)));
    const auto test = rfl::generate_scenes(
        scene_spec(sd, sd.test_scenes, rfl::derive_seed(seed, kTestDataStream)));

    for (auto& arm : arms) {
        rfl::TwoStageConfig cfg;
        cfg.stage1 = make_train_config(config.train, arm.arm.loss, seed);
        cfg.stage2 = make_train_config(config.two_stage.stage2, config.two_stage.stage2_loss,
                                       rfl::derive_seed(seed, kStage2InitStream));
        cfg.stage2.num_classes = sd.class_weights.size();
        cfg.proposal_budget = config.two_stage.proposal_budget;
        cfg.fg_bg_ratio = config.two_stage.fg_bg_ratio;

        auto trained = rfl::train_two_stage(train, cfg);
        const auto report = rfl::evaluate_two_stage(trained.stage1, trained.stage2, test,
                                                     cfg.proposal_budget);
        ArmSeedResult r;
        r.seed = seed;
        r.accuracy = report.stage2.accuracy;
        r.mrecall = report.stage2.mrecall;
        r.per_class_recall = recalls_of(report.stage2.per_class);
        r.proposal_recall = report.proposal_recall;
        r.proposal_mrecall = report.proposal_mrecall;
        r.proposal_per_class = recalls_of(report.proposal_per_class);
        r.loss_curve = std::move(trained.stage1_loss_curve);
        arm.per_seed.push_back(std::move(r));
    }
}

// Mean of each class over the seeds in which it occurs.
std::map<int, double> mean_by_class(const std::vector<ArmSeedResult>& runs,
                                    std::map<int, double> ArmSeedResult::*field)
{
    std::map<int, std::pair<double, std::size_t>> acc;
    for (const auto& r : runs)
        for (const auto& [cls, v] : r.*field) {
            acc[cls].first += v;
            ++acc[cls].second;
        }
    std::map<int, double> out;
    for (const auto& [cls, sum] : acc)
        out[cls] = sum.first / static_cast<double>(sum.second);
    return out;
}

double mean_of(const std::vector<ArmSeedResult>& runs, double ArmSeedResult::*field)
{
    double sum = 0.0;
    for (const auto& r : runs)
        sum += r.*field;
    return runs.empty() ? 0.0 : sum / static_cast<double>(runs.size());
}

std::string format_sig9(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace

void check_seeds(const std::vector<std::uint64_t>& seeds, const std::string& where)
{
    if (seeds.empty())
        throw ConfigError(where, "at least one seed is required");
    std::set<std::uint64_t> seen;
    for (auto s : seeds)
        if (!seen.insert(s).second)
            throw ConfigError(where, "duplicate seed " + std::to_string(s));
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text)
{
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError("--seeds", "expected comma-separated non-negative integers, got '" + text + "'");
        try {
            seeds.push_back(std::stoull(item));
        } catch (const std::out_of_range&) {
            throw ConfigError("--seeds", "seed out of range: " + item);
        }
    }
    if (!text.empty() && text.back() == ',')
        throw ConfigError("--seeds", "trailing comma in '" + text + "'");
    check_seeds(seeds, "--seeds");
    return seeds;
}

ExperimentConfig parse_experiment_config(const json& doc)
{
    ExperimentConfig cfg;
    Fields top(doc, "");

    optional_field(top, "name", [&](const json& v, const std::string& w) { cfg.name = as_string(v, w); });
    optional_field(top, "mode", [&](const json& v, const std::string& w) {
        const auto m = as_string(v, w);
        if (m == "classifier")
            cfg.mode = ExperimentMode::Classifier;
        else if (m == "two_stage")
            cfg.mode = ExperimentMode::TwoStage;
        else
            throw ConfigError(w, "expected \"classifier\" or \"two_stage\"");
    });
    optional_field(top, "seeds", [&](const json& v, const std::string& w) {
        const auto& arr = as_array(v, w);
        for (std::size_t i = 0; i < arr.size(); ++i)
            cfg.seeds.push_back(as_unsigned(arr[i], w + "/" + std::to_string(i)));
        check_seeds(cfg.seeds, w);
    });

    {
        const auto where = top.path("arms");
        const auto& arr = as_array(top.require("arms"), where);
        if (arr.empty())
            throw ConfigError(where, "at least one arm is required");
        std::set<std::string> names;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Fields f(arr[i], where + "/" + std::to_string(i));
            ArmSpec arm;
            arm.loss = parse_loss(f);
            arm.name = std::string(rfl::to_string(arm.loss.kind()));
            optional_field(f, "name", [&](const json& v, const std::string& w) { arm.name = as_string(v, w); });
            optional_field(f, "undersample", [&](const json& v, const std::string& w) {
                if (cfg.mode != ExperimentMode::Classifier)
                    throw ConfigError(w, "undersampling is only supported in classifier mode");
                arm.undersample = parse_undersample(v, w);
            });
            f.reject_unknown();
            if (!names.insert(arm.name).second)
                throw ConfigError(f.path("name"), "duplicate arm name '" + arm.name + "'");
            cfg.arms.push_back(std::move(arm));
        }
    }

    optional_field(top, "train", [&](const json& v, const std::string& w) {
        Fields f(v, w);
        parse_train_fields(f, cfg.train);
        f.reject_unknown();
    });

    if (cfg.mode == ExperimentMode::Classifier) {
        Fields f(top.require("dataset"), top.path("dataset"));
        auto& ds = cfg.dataset;
        {
            const auto w = f.path("class_counts");
            const auto& arr = as_array(f.require("class_counts"), w);
            for (std::size_t i = 0; i < arr.size(); ++i)
                ds.class_counts.push_back(as_positive(arr[i], w + "/" + std::to_string(i)));
            if (ds.class_counts.size() < 2)
                throw ConfigError(w, "at least two classes are required");
        }
        optional_field(f, "feature_dim", [&](const json& v, const std::string& w) { ds.feature_dim = as_positive(v, w); });
        optional_field(f, "cluster_separation", [&](const json& v, const std::string& w) {
            ds.cluster_separation = as_number(v, w);
            if (ds.cluster_separation <= 0.0)
                throw ConfigError(w, "must be positive");
        });
        optional_field(f, "label_noise_rate", [&](const json& v, const std::string& w) {
            ds.label_noise_rate = as_number(v, w);
            if (ds.label_noise_rate < 0.0 || ds.label_noise_rate >= 1.0)
                throw ConfigError(w, "must lie in [0, 1)");
        });
        optional_field(f, "test_per_class", [&](const json& v, const std::string& w) { ds.test_per_class = as_positive(v, w); });
        f.reject_unknown();
        for (const auto& arm : cfg.arms)
            for (const auto& [cls, p] : arm.undersample)
                if (cls < 0 || static_cast<std::size_t>(cls) >= ds.class_counts.size())
                    throw ConfigError("/arms", "undersample names class " + std::to_string(cls) +
                                                   " which the dataset does not have");
        if (top.find("scenes") || top.find("two_stage"))
            throw ConfigError(top.path(top.find("scenes") ? "scenes" : "two_stage"),
                              "only valid with \"mode\": \"two_stage\"");
    } else {
        Fields f(top.require("scenes"), top.path("scenes"));
        auto& sd = cfg.scenes;
        optional_field(f, "train_scenes", [&](const json& v, const std::string& w) { sd.train_scenes = as_positive(v, w); });
        optional_field(f, "test_scenes", [&](const json& v, const std::string& w) { sd.test_scenes = as_positive(v, w); });
        optional_field(f, "objects_per_scene", [&](const json& v, const std::string& w) { sd.objects_per_scene = as_positive(v, w); });
        optional_field(f, "background_per_object", [&](const json& v, const std::string& w) { sd.background_per_object = as_positive(v, w); });
        optional_field(f, "class_weights", [&](const json& v, const std::string& w) {
            sd.class_weights.clear();
            const auto& arr = as_array(v, w);
            for (std::size_t i = 0; i < arr.size(); ++i)
                sd.class_weights.push_back(as_number(arr[i], w + "/" + std::to_string(i)));
        });
        optional_field(f, "feature_dim", [&](const json& v, const std::string& w) { sd.feature_dim = as_positive(v, w); });
        optional_field(f, "objectness_shift", [&](const json& v, const std::string& w) { sd.objectness_shift = as_number(v, w); });
        optional_field(f, "missed_rate", [&](const json& v, const std::string& w) { sd.missed_rate = as_number(v, w); });
        optional_field(f, "spurious_rate", [&](const json& v, const std::string& w) { sd.spurious_rate = as_number(v, w); });
        f.reject_unknown();
        try {
            scene_spec(sd, sd.train_scenes, 0).validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(top.path("scenes"), e.what());
        }

        if (const json* ts = top.find("two_stage")) {
            Fields g(*ts, top.path("two_stage"));
            auto& spec = cfg.two_stage;
            optional_field(g, "proposal_budget", [&](const json& v, const std::string& w) { spec.proposal_budget = as_positive(v, w); });
            optional_field(g, "fg_bg_ratio", [&](const json& v, const std::string& w) {
                spec.fg_bg_ratio = as_number(v, w);
                if (!(spec.fg_bg_ratio > 0.0 && spec.fg_bg_ratio <= 1.0))
                    throw ConfigError(w, "must lie in (0, 1]");
            });
            optional_field(g, "stage2", [&](const json& v, const std::string& w) {
                Fields s(v, w);
                if (s.find("loss"))
                    spec.stage2_loss = parse_loss(s);
                else if (s.find("gamma") || s.find("threshold"))
                    throw ConfigError(w, "gamma/threshold need a loss");
                parse_train_fields(s, spec.stage2);
                s.reject_unknown();
            });
            g.reject_unknown();
        }
        if (top.find("dataset"))
            throw ConfigError(top.path("dataset"), "only valid with \"mode\": \"classifier\"");
    }
    top.reject_unknown();
    return cfg;
}

ordered_json config_to_json(const ExperimentConfig& config)
{
    ordered_json j;
    j["name"] = config.name;
    j["mode"] = config.mode == ExperimentMode::Classifier ? "classifier" : "two_stage";
    j["seeds"] = config.seeds;
    ordered_json arms = ordered_json::array();
    for (const auto& arm : config.arms) {
        ordered_json a;
        a["name"] = arm.name;
        a.update(loss_to_json(arm.loss));
        if (!arm.undersample.empty())
            a["undersample"] = recall_map(arm.undersample);
        arms.push_back(std::move(a));
    }
    j["arms"] = std::move(arms);
    j["train"] = train_to_json(config.train);
    if (config.mode == ExperimentMode::Classifier) {
        const auto& ds = config.dataset;
        j["dataset"] = {{"class_counts", ds.class_counts},
                        {"feature_dim", ds.feature_dim},
                        {"cluster_separation", ds.cluster_separation},
                        {"label_noise_rate", ds.label_noise_rate},
                        {"test_per_class", ds.test_per_class}};
    } else {
        const auto& sd = config.scenes;
        j["scenes"] = {{"train_scenes", sd.train_scenes},
                       {"test_scenes", sd.test_scenes},
                       {"objects_per_scene", sd.objects_per_scene},
                       {"background_per_object", sd.background_per_object},
                       {"class_weights", sd.class_weights},
                       {"feature_dim", sd.feature_dim},
                       {"objectness_shift", sd.objectness_shift},
                       {"missed_rate", sd.missed_rate},
                       {"spurious_rate", sd.spurious_rate}};
        ordered_json stage2 = loss_to_json(config.two_stage.stage2_loss);
        stage2.update(train_to_json(config.two_stage.stage2));
        j["two_stage"] = {{"proposal_budget", config.two_stage.proposal_budget},
                          {"fg_bg_ratio", config.two_stage.fg_bg_ratio},
                          {"stage2", std::move(stage2)}};
    }
    return j;
}

ExperimentResult run_experiment(const ExperimentConfig& config)
{
    check_seeds(config.seeds, "/seeds");
    const auto start = std::chrono::steady_clock::now();
    ExperimentResult result;
    result.config = config;
    for (const auto& arm : config.arms)
        result.arms.push_back({arm, {}});
    for (auto seed : config.seeds) {
        if (config.mode == ExperimentMode::Classifier)
            run_classifier_seed(config, seed, result.arms);
        else
            run_two_stage_seed(config, seed, result.arms);
    }
    result.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

ordered_json make_report(const ExperimentResult& result, const ReportOptions& options)
{
    const bool two_stage = result.config.mode == ExperimentMode::TwoStage;
    ordered_json report;
    report["artifact_version"] = kArtifactVersion;
    report["experiment"] = result.config.name;
    report["mode"] = two_stage ? "two_stage" : "classifier";
    report["seeds"] = result.config.seeds;
    report["config"] = config_to_json(result.config);

    ordered_json arms = ordered_json::array();
    for (const auto& arm : result.arms) {
        ordered_json a;
        a["arm"] = arm.arm.name;
        a["loss"] = loss_to_json(arm.arm.loss);
        if (!arm.arm.undersample.empty())
            a["undersample"] = recall_map(arm.arm.undersample);

        ordered_json mean;
        if (two_stage) {
            mean["proposal_recall"] = mean_of(arm.per_seed, &ArmSeedResult::proposal_recall);
            mean["proposal_mrecall"] = mean_of(arm.per_seed, &ArmSeedResult::proposal_mrecall);
            mean["proposal_per_class"] = recall_map(mean_by_class(arm.per_seed, &ArmSeedResult::proposal_per_class));
        }
        mean["accuracy"] = mean_of(arm.per_seed, &ArmSeedResult::accuracy);
        mean["mrecall"] = mean_of(arm.per_seed, &ArmSeedResult::mrecall);
        mean["per_class_recall"] = recall_map(mean_by_class(arm.per_seed, &ArmSeedResult::per_class_recall));
        a["mean"] = std::move(mean);

        ordered_json runs = ordered_json::array();
        for (const auto& r : arm.per_seed) {
            ordered_json s;
            s["seed"] = r.seed;
            if (two_stage) {
                s["proposal_recall"] = r.proposal_recall;
                s["proposal_mrecall"] = r.proposal_mrecall;
                s["proposal_per_class"] = recall_map(r.proposal_per_class);
            }
            s["accuracy"] = r.accuracy;
            s["mrecall"] = r.mrecall;
            s["per_class_recall"] = recall_map(r.per_class_recall);
            s["final_loss"] = r.loss_curve.empty() ? 0.0 : r.loss_curve.back();
            runs.push_back(std::move(s));
        }
        a["per_seed"] = std::move(runs);

        // Seed-averaged training loss, thinned to at most max_curve_points.
        std::size_t n = 0;
        for (const auto& r : arm.per_seed)
            n = std::max(n, r.loss_curve.size());
        const std::size_t cap = std::max<std::size_t>(options.max_curve_points, 1);
        const std::size_t stride = n <= cap ? 1 : (n + cap - 1) / cap;
        ordered_json values = ordered_json::array();
        for (std::size_t i = 0; i < n; i += stride) {
            double sum = 0.0;
            std::size_t cnt = 0;
            for (const auto& r : arm.per_seed)
                if (i < r.loss_curve.size()) {
                    sum += r.loss_curve[i];
                    ++cnt;
                }
            values.push_back(sum / static_cast<double>(cnt));
        }
        a["loss_curve"] = {{"iterations", n}, {"stride", stride}, {"values", std::move(values)}};
        arms.push_back(std::move(a));
    }
    report["results"] = std::move(arms);
    if (options.include_wall_clock)
        report["wall_clock_seconds"] = result.wall_clock_seconds;
    return report;
}

void round_floats(ordered_json& value)
{
    if (value.is_number_float()) {
        const double v = value.get<double>();
        if (std::isfinite(v))
            value = std::strtod(format_sig9(v).c_str(), nullptr);
        else
            value = nullptr;
    } else if (value.is_structured()) {
        for (auto& child : value)
            round_floats(child);
    }
}

std::string dump_report(const ordered_json& report)
{
    ordered_json copy = report;
    round_floats(copy);
    return copy.dump(2) + "\n";
}

// --- plots --------------------------------------------------------------

namespace {

constexpr const char* kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                    "#66a61e", "#e6ab02", "#a6761d", "#666666"};

std::string fmt2(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape_xml(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

void legend(std::ostringstream& svg, const ordered_json& results, double x, double y)
{
    for (std::size_t a = 0; a < results.size(); ++a) {
        const double yy = y + 16.0 * static_cast<double>(a);
        svg << "<rect x=\"" << fmt2(x) << "\" y=\"" << fmt2(yy - 9) << "\" width=\"10\" height=\"10\" fill=\""
            << kPalette[a % 8] << "\"/>\n"
            << "<text x=\"" << fmt2(x + 14) << "\" y=\"" << fmt2(yy) << "\" font-size=\"11\">"
            << escape_xml(results[a]["arm"].get<std::string>()) << "</text>\n";
    }
}

} // namespace

std::string recall_bars_svg(const ordered_json& report)
{
    const bool two_stage = report["mode"] == "two_stage";
    const char* key = two_stage ? "proposal_per_class" : "per_class_recall";
    const auto& results = report["results"];
    std::vector<std::string> classes;
    for (const auto& item : results[0]["mean"][key].items())
        classes.push_back(item.key());

    const double left = 50, top = 30, plot_h = 220, group_w = 14.0 * static_cast<double>(results.size()) + 10;
    const double width = left + group_w * static_cast<double>(classes.size()) + 140;
    const double height = top + plot_h + 40;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt2(width) << "\" height=\""
        << fmt2(height) << "\" font-family=\"sans-serif\">\n"
        << "<text x=\"" << fmt2(left) << "\" y=\"18\" font-size=\"13\">"
        << (two_stage ? "proposal recall by class" : "recall by class") << "</text>\n";
    for (int t = 0; t <= 4; ++t) {
        const double y = top + plot_h - plot_h * t / 4.0;
        svg << "<line x1=\"" << fmt2(left) << "\" y1=\"" << fmt2(y) << "\" x2=\""
            << fmt2(left + group_w * static_cast<double>(classes.size())) << "\" y2=\"" << fmt2(y)
            << "\" stroke=\"#ddd\"/>\n"
            << "<text x=\"" << fmt2(left - 6) << "\" y=\"" << fmt2(y + 4)
            << "\" font-size=\"10\" text-anchor=\"end\">" << fmt2(t / 4.0) << "</text>\n";
    }
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const double gx = left + group_w * static_cast<double>(c) + 5;
        for (std::size_t a = 0; a < results.size(); ++a) {
            const auto& per_class = results[a]["mean"][key];
            const double r = per_class.contains(classes[c]) ? per_class[classes[c]].get<double>() : 0.0;
            const double h = plot_h * r;
            svg << "<rect x=\"" << fmt2(gx + 14.0 * static_cast<double>(a)) << "\" y=\""
                << fmt2(top + plot_h - h) << "\" width=\"12\" height=\"" << fmt2(h) << "\" fill=\""
                << kPalette[a % 8] << "\"/>\n";
        }
        svg << "<text x=\"" << fmt2(gx + group_w / 2 - 5) << "\" y=\"" << fmt2(top + plot_h + 14)
            << "\" font-size=\"10\" text-anchor=\"middle\">" << escape_xml(classes[c]) << "</text>\n";
    }
    legend(svg, results, left + group_w * static_cast<double>(classes.size()) + 20, top + 10);
    svg << "</svg>\n";
    return svg.str();
}

std::string loss_curves_svg(const ordered_json& report)
{
    const auto& results = report["results"];
    double lo = 0.0, hi = 0.0;
    std::size_t n = 0;
    bool first = true;
    for (const auto& arm : results)
        for (const auto& v : arm["loss_curve"]["values"]) {
            const double x = v.get<double>();
            lo = first ? x : std::min(lo, x);
            hi = first ? x : std::max(hi, x);
            first = false;
            n = std::max(n, arm["loss_curve"]["values"].size());
        }
    if (hi <= lo)
        hi = lo + 1.0;
    const double left = 50, top = 30, plot_w = 420, plot_h = 220;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt2(left + plot_w + 150)
        << "\" height=\"" << fmt2(top + plot_h + 40) << "\" font-family=\"sans-serif\">\n"
        << "<text x=\"" << fmt2(left) << "\" y=\"18\" font-size=\"13\">mean training loss</text>\n"
        << "<rect x=\"" << fmt2(left) << "\" y=\"" << fmt2(top) << "\" width=\"" << fmt2(plot_w)
        << "\" height=\"" << fmt2(plot_h) << "\" fill=\"none\" stroke=\"#999\"/>\n"
        << "<text x=\"" << fmt2(left - 6) << "\" y=\"" << fmt2(top + 4)
        << "\" font-size=\"10\" text-anchor=\"end\">" << fmt2(hi) << "</text>\n"
        << "<text x=\"" << fmt2(left - 6) << "\" y=\"" << fmt2(top + plot_h + 4)
        << "\" font-size=\"10\" text-anchor=\"end\">" << fmt2(lo) << "</text>\n";
    for (std::size_t a = 0; a < results.size(); ++a) {
        const auto& values = results[a]["loss_curve"]["values"];
        svg << "<polyline fill=\"none\" stroke=\"" << kPalette[a % 8] << "\" points=\"";
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double x = left + (n > 1 ? plot_w * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0);
            const double y = top + plot_h - plot_h * (values[i].get<double>() - lo) / (hi - lo);
            svg << (i ? " " : "") << fmt2(x) << "," << fmt2(y);
        }
        svg << "\"/>\n";
    }
    legend(svg, results, left + plot_w + 20, top + 10);
    svg << "</svg>\n";
    return svg.str();
}

} // namespace lab
