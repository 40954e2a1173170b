#include "rfl/two_stage.hpp"

#include "rfl/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rfl {

namespace {

constexpr std::uint64_t kForegroundStream = 0x666700ULL;
constexpr std::uint64_t kBackgroundStream = 0x626700ULL;

struct CandidateRef {
    std::size_t scene;
    std::size_t index;
};

// Cycles through a pool, reshuffling at every wrap.
class Stratum {
public:
    Stratum(std::vector<CandidateRef> pool, std::uint64_t seed) : pool_(std::move(pool)), seed_(seed)
    {
    }

    bool empty() const { return pool_.empty(); }

    const CandidateRef& next()
    {
        if (cursor_ == order_.size()) {
            SplitMix64 rng(derive_seed(seed_, round_++));
            order_ = permutation(pool_.size(), rng);
            cursor_ = 0;
        }
        return pool_[order_[cursor_++]];
    }

private:
    std::vector<CandidateRef> pool_;
    std::uint64_t seed_;
    std::uint64_t round_ = 0;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

} // namespace

double BinaryScorer::score(std::span<const double> x) const
{
    if (x.size() != weights.size())
        throw std::invalid_argument("scorer dimension mismatch");
    double z = bias;
    for (std::size_t d = 0; d < x.size(); ++d)
        z += weights[d] * x[d];
    return z;
}

void TwoStageConfig::validate() const
{
    stage1.validate();
    stage2.validate();
    if (proposal_budget < 1)
        throw std::invalid_argument("proposal budget must be >= 1");
    if (!(fg_bg_ratio > 0.0 && fg_bg_ratio <= 1.0))
        throw std::invalid_argument("fg_bg_ratio must lie in (0, 1]");
}

BinaryScorer train_objectness(std::span<const Scene> scenes, const TrainConfig& config,
                              double fg_bg_ratio, std::vector<double>* loss_curve)
{
    config.validate();
    std::vector<CandidateRef> fg;
    std::vector<CandidateRef> bg;
    std::size_t dim = 0;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        const auto& cands = scenes[s].candidates;
        for (std::size_t i = 0; i < cands.size(); ++i) {
            if (dim == 0)
                dim = cands[i].features.size();
            else if (cands[i].features.size() != dim)
                throw std::invalid_argument("candidates have inconsistent feature dimensions");
            (cands[i].annotated_object() ? fg : bg).push_back({s, i});
        }
    }

    const auto fg_per_batch = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(static_cast<double>(config.batch_size) * fg_bg_ratio)),
        1, config.batch_size);
    const std::size_t bg_per_batch = config.batch_size - fg_per_batch;
    if (fg.empty() || (bg_per_batch > 0 && bg.empty()))
        throw std::invalid_argument("stage-1 training needs both foreground and background candidates");

    BinaryScorer scorer;
    scorer.weights.resize(dim);
    SplitMix64 init(config.weight_init_seed);
    for (double& w : scorer.weights)
        w = 0.02 * init.uniform01() - 0.01;

    Stratum fg_stratum(std::move(fg), derive_seed(config.weight_init_seed, kForegroundStream));
    Stratum bg_stratum(std::move(bg), derive_seed(config.weight_init_seed, kBackgroundStream));

    std::vector<double> gw(dim);
    for (std::size_t it = 0; it < config.iterations; ++it) {
        std::fill(gw.begin(), gw.end(), 0.0);
        double gb = 0.0;
        double loss = 0.0;
        auto accumulate = [&](const CandidateRef& ref) {
            const Candidate& c = scenes[ref.scene].candidates[ref.index];
            const auto r = binary_loss_and_grad(scorer.score(c.features), c.annotated_object() ? 1 : 0,
                                                config.loss);
            loss += r.loss;
            gb += r.grad;
            for (std::size_t d = 0; d < dim; ++d)
                gw[d] += r.grad * c.features[d];
        };
        for (std::size_t k = 0; k < fg_per_batch; ++k)
            accumulate(fg_stratum.next());
        for (std::size_t k = 0; k < bg_per_batch; ++k)
            accumulate(bg_stratum.next());

        const double scale = lr_at(config.lr_schedule, it) / static_cast<double>(config.batch_size);
        for (std::size_t d = 0; d < dim; ++d)
            scorer.weights[d] -= scale * gw[d];
        scorer.bias -= scale * gb;
        if (loss_curve)
            loss_curve->push_back(loss / static_cast<double>(config.batch_size));
    }
    return scorer;
}

std::vector<std::size_t> top_k_proposals(const BinaryScorer& scorer, const Scene& scene,
                                         std::size_t k)
{
    const auto& cands = scene.candidates;
    std::vector<double> scores(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i)
        scores[i] = scorer.score(cands[i].features);
    std::vector<std::size_t> order(cands.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    k = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
                      });
    order.resize(k);
    return order;
}

TwoStageReport evaluate_two_stage(const BinaryScorer& stage1, const LinearModel& stage2,
                                  std::span<const Scene> scenes, std::size_t proposal_budget)
{
    TwoStageReport report;
    std::size_t objects = 0;
    std::size_t kept = 0;
    std::vector<int> truth;
    std::vector<int> predicted;
    for (const auto& scene : scenes) {
        std::vector<bool> selected(scene.candidates.size(), false);
        for (std::size_t i : top_k_proposals(stage1, scene, proposal_budget))
            selected[i] = true;
        for (std::size_t i = 0; i < scene.candidates.size(); ++i) {
            const auto& c = scene.candidates[i];
            if (!c.object)
                continue;
            ++objects;
            auto& cls = report.proposal_per_class[c.class_id];
            ++cls.count;
            if (!selected[i])
                continue;
            ++kept;
            ++cls.correct;
            truth.push_back(c.class_id);
            predicted.push_back(stage2.num_classes() ? stage2.predict(c.features) : -1);
        }
    }
    if (objects > 0)
        report.proposal_recall = static_cast<double>(kept) / static_cast<double>(objects);
    double sum = 0.0;
    for (auto& [id, cls] : report.proposal_per_class) {
        cls.recall = static_cast<double>(cls.correct) / static_cast<double>(cls.count);
        sum += cls.recall;
    }
    if (!report.proposal_per_class.empty())
        report.proposal_mrecall = sum / static_cast<double>(report.proposal_per_class.size());
    report.stage2 = report_from_predictions(truth, predicted);
    return report;
}

TwoStageResult train_two_stage(std::span<const Scene> scenes, const TwoStageConfig& config)
{
    config.validate();
    TwoStageResult result;
    result.stage1 = train_objectness(scenes, config.stage1, config.fg_bg_ratio, &result.stage1_loss_curve);

    std::vector<LabeledExample> objects;
    for (const auto& scene : scenes)
        for (const auto& c : scene.candidates)
            if (c.annotated_object() && c.class_id >= 0)
                objects.push_back({c.features, c.class_id, false});
    if (objects.empty())
        throw std::invalid_argument("no annotated objects to train stage 2 on");

    TrainConfig stage2 = config.stage2;
    if (stage2.num_classes == 0) {
        int top = 0;
        for (const auto& scene : scenes)
            for (const auto& c : scene.candidates)
                top = std::max(top, c.class_id);
        stage2.num_classes = static_cast<std::size_t>(top) + 1;
    }
    TrainResult trained = train_classifier(objects, stage2);
    result.stage2 = std::move(trained.model);
    result.stage2_loss_curve = std::move(trained.loss_curve);
    result.report = evaluate_two_stage(result.stage1, result.stage2, scenes, config.proposal_budget);
    return result;
}

} // namespace rfl
