#pragma once

#include "rfl/loss.hpp"
#include "rfl/sampling.hpp"
#include "rfl/trainer.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lab {

// Schema violation. `where` is a JSON-pointer-like path, e.g. "/arms/2/gamma".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string where, const std::string& what)
        : std::runtime_error(where + ": " + what), where_(std::move(where))
    {
    }
    const std::string& where() const { return where_; }

private:
    std::string where_;
};

enum class ExperimentMode { Classifier, TwoStage };

struct ArmSpec {
    std::string name;
    rfl::LossParams loss;
    std::map<int, double> undersample; // empty: no undersampling
};

struct TrainSpec {
    std::size_t iterations = 1000;
    std::size_t batch_size = 32;
    rfl::LrSchedule lr_schedule{{1000, 0.1}};
};

struct ClassifierData {
    std::vector<std::size_t> class_counts;
    std::size_t feature_dim = 10;
    double cluster_separation = 4.0;
    double label_noise_rate = 0.0;
    std::size_t test_per_class = 300; // clean, balanced evaluation set
};

struct SceneData {
    std::size_t train_scenes = 40;
    std::size_t test_scenes = 40;
    std::size_t objects_per_scene = 10;
    std::size_t background_per_object = 50;
    std::vector<double> class_weights{1.0};
    std::size_t feature_dim = 6;
    double objectness_shift = 3.0;
    double missed_rate = 0.0;
    double spurious_rate = 0.0;
};

struct TwoStageSpec {
    std::size_t proposal_budget = 10;
    double fg_bg_ratio = 0.5;
    rfl::LossParams stage2_loss;
    TrainSpec stage2;
};

struct ExperimentConfig {
    std::string name = "experiment";
    ExperimentMode mode = ExperimentMode::Classifier;
    std::vector<std::uint64_t> seeds;
    std::vector<ArmSpec> arms;
    TrainSpec train;
    ClassifierData dataset;  // classifier mode
    SceneData scenes;        // two_stage mode
    TwoStageSpec two_stage;  // two_stage mode
};

// Parses and validates a config document. Missing optional fields take the
// defaults above; unknown keys are rejected. Throws ConfigError.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);

// Canonical form of a config, echoed into reports.
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);

// Throws ConfigError if empty or if any seed repeats.
void check_seeds(const std::vector<std::uint64_t>& seeds, const std::string& where);

// "1,2,3" -> {1, 2, 3}. Throws ConfigError("--seeds", ...).
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// Per-seed derived streams, fixed so that reports can be reproduced by hand.
inline constexpr std::uint64_t kTrainDataStream = 1;
inline constexpr std::uint64_t kTestDataStream = 2;
inline constexpr std::uint64_t kUndersampleStream = 3;
inline constexpr std::uint64_t kStage2InitStream = 4;

struct ArmSeedResult {
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double mrecall = 0.0;
    std::map<int, double> per_class_recall;
    // two-stage only
    double proposal_recall = 0.0;
    double proposal_mrecall = 0.0;
    std::map<int, double> proposal_per_class;
    std::vector<double> loss_curve; // stage 1 in two-stage mode
};

struct ArmResult {
    ArmSpec arm;
    std::vector<ArmSeedResult> per_seed;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<ArmResult> arms; // config order
    double wall_clock_seconds = 0.0;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

struct ReportOptions {
    bool include_wall_clock = false;
    std::size_t max_curve_points = 200;
};

nlohmann::ordered_json make_report(const ExperimentResult& result, const ReportOptions& options = {});

// Serialized report: every float rounded to 9 significant digits, 2-space
// indent, trailing newline.
std::string dump_report(const nlohmann::ordered_json& report);

// Rounds every floating-point number in place to 9 significant digits.
void round_floats(nlohmann::ordered_json& value);

// Static SVG charts of a report: per-class recall bars and mean loss curves.
std::string recall_bars_svg(const nlohmann::ordered_json& report);
std::string loss_curves_svg(const nlohmann::ordered_json& report);

} // namespace lab
