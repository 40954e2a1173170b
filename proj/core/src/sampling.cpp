#include "rfl/sampling.hpp"

#include "rfl/random.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rfl {

namespace {

// Stream tags for derive_seed(); distinct per purpose.
constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;
constexpr std::uint64_t kSceneStream = 0x7363656e65ULL;

// Guards the separation invariant against rounding in the scaled centres.
constexpr double kSeparationSlack = 1.0 + 1e-12;

} // namespace

void UndersamplePolicy::validate() const
{
    for (const auto& [cls, p] : skip_prob)
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("skip probability for class " + std::to_string(cls) +
                                        " must lie in [0, 1]");
}

void SynthDatasetSpec::validate() const
{
    if (class_counts.empty())
        throw std::invalid_argument("class_counts must not be empty");
    for (std::size_t c : class_counts)
        if (c == 0)
            throw std::invalid_argument("class_counts entries must be positive");
    if (feature_dim < 1)
        throw std::invalid_argument("feature_dim must be >= 1");
    if (!(cluster_separation > 0.0))
        throw std::invalid_argument("cluster_separation must be positive");
    if (!(label_noise_rate >= 0.0 && label_noise_rate < 1.0))
        throw std::invalid_argument("label_noise_rate must lie in [0, 1)");
    if (label_noise_rate > 0.0 && class_counts.size() < 2)
        throw std::invalid_argument("label noise needs at least two classes");
}

std::vector<std::size_t> undersample_indices(std::span<const LabeledExample> examples,
                                             const UndersamplePolicy& policy)
{
    policy.validate();
    std::vector<std::size_t> kept;
    kept.reserve(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto it = policy.skip_prob.find(examples[i].label);
        if (it != policy.skip_prob.end()) {
            SplitMix64 rng(derive_seed(policy.seed, i));
            if (rng.uniform01() < it->second)
                continue;
        }
        kept.push_back(i);
    }
    return kept;
}

std::vector<LabeledExample> undersample(std::span<const LabeledExample> examples,
                                        const UndersamplePolicy& policy)
{
    std::vector<LabeledExample> out;
    for (std::size_t i : undersample_indices(examples, policy))
        out.push_back(examples[i]);
    return out;
}

ClassFrequencyTable class_frequencies(std::span<const LabeledExample> examples)
{
    ClassFrequencyTable table;
    for (const auto& ex : examples)
        ++table[ex.label];
    return table;
}

std::vector<std::vector<double>> class_means(std::size_t num_classes, std::size_t feature_dim,
                                             double separation)
{
    std::vector<std::vector<double>> means(num_classes, std::vector<double>(feature_dim, 0.0));
    if (feature_dim >= num_classes) {
        const double scale = separation * std::sqrt(0.5) * kSeparationSlack;
        for (std::size_t c = 0; c < num_classes; ++c)
            means[c][c] = scale;
        return means;
    }

    // Smallest side with side^dim >= num_classes.
    std::size_t side = 1;
    auto capacity = [&](std::size_t s) {
        double cap = 1.0;
        for (std::size_t d = 0; d < feature_dim; ++d)
            cap *= static_cast<double>(s);
        return cap;
    };
    while (capacity(side) < static_cast<double>(num_classes))
        ++side;

    const double pitch = separation * kSeparationSlack;
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::size_t rest = c;
        for (std::size_t d = 0; d < feature_dim; ++d) {
            means[c][d] = static_cast<double>(rest % side) * pitch;
            rest /= side;
        }
    }
    return means;
}

std::vector<LabeledExample> generate_synthetic(const SynthDatasetSpec& spec)
{
    spec.validate();
    const auto means = class_means(spec.num_classes(), spec.feature_dim, spec.cluster_separation);
    const std::size_t total =
        std::accumulate(spec.class_counts.begin(), spec.class_counts.end(), std::size_t{0});

    std::vector<LabeledExample> data;
    data.reserve(total);
    for (std::size_t c = 0; c < spec.num_classes(); ++c) {
        for (std::size_t k = 0; k < spec.class_counts[c]; ++k) {
            SplitMix64 rng(derive_seed(spec.seed, data.size()));
            LabeledExample ex;
            ex.label = static_cast<int>(c);
            ex.features.resize(spec.feature_dim);
            for (std::size_t d = 0; d < spec.feature_dim; ++d)
                ex.features[d] = means[c][d] + rng.normal();
            data.push_back(std::move(ex));
        }
    }

    const auto num_noisy = static_cast<std::size_t>(
        std::floor(static_cast<double>(total) * spec.label_noise_rate + 1e-9));
    if (num_noisy == 0)
        return data;

    SplitMix64 rng(derive_seed(spec.seed, kNoiseStream));
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto others = static_cast<std::uint64_t>(spec.num_classes() - 1);
    for (std::size_t i = 0; i < num_noisy; ++i) {
        // Partial Fisher-Yates: order[i] becomes a uniform pick from the rest.
        const auto j = i + static_cast<std::size_t>(rng.below(total - i));
        std::swap(order[i], order[j]);
        auto& ex = data[order[i]];
        const auto r = static_cast<int>(rng.below(others));
        ex.label = r < ex.label ? r : r + 1;
        ex.noisy = true;
    }
    return data;
}

void SceneSetSpec::validate() const
{
    if (num_scenes == 0 || objects_per_scene == 0)
        throw std::invalid_argument("scene set needs at least one scene and one object per scene");
    if (class_weights.empty())
        throw std::invalid_argument("class_weights must not be empty");
    for (double w : class_weights)
        if (!(w > 0.0))
            throw std::invalid_argument("class_weights entries must be positive");
    if (feature_dim < class_weights.size())
        throw std::invalid_argument("scene feature_dim must be >= the number of object classes");
    if (!(missed_rate >= 0.0 && missed_rate < 1.0) || !(spurious_rate >= 0.0 && spurious_rate < 1.0))
        throw std::invalid_argument("annotation noise rates must lie in [0, 1)");
}

std::vector<Scene> generate_scenes(const SceneSetSpec& spec)
{
    spec.validate();
    const std::size_t classes = spec.class_weights.size();
    std::vector<double> cumulative(classes);
    std::partial_sum(spec.class_weights.begin(), spec.class_weights.end(), cumulative.begin());

    std::vector<Scene> scenes(spec.num_scenes);
    for (std::size_t s = 0; s < spec.num_scenes; ++s) {
        SplitMix64 rng(derive_seed(derive_seed(spec.seed, kSceneStream), s));
        auto& cands = scenes[s].candidates;
        const std::size_t background = spec.objects_per_scene * spec.background_per_object;
        cands.reserve(spec.objects_per_scene + background);

        for (std::size_t o = 0; o < spec.objects_per_scene; ++o) {
            const double pick = rng.uniform01() * cumulative.back();
            std::size_t c = 0;
            while (c + 1 < classes && pick >= cumulative[c])
                ++c;
            Candidate cand;
            cand.object = true;
            cand.class_id = static_cast<int>(c);
            cand.features.resize(spec.feature_dim);
            const double visibility = 0.5 + rng.uniform01();
            for (double& f : cand.features)
                f = rng.normal();
            cand.features[c] += spec.objectness_shift * visibility;
            cand.noisy = rng.uniform01() < spec.missed_rate;
            cands.push_back(std::move(cand));
        }
        for (std::size_t b = 0; b < background; ++b) {
            Candidate cand;
            cand.features.resize(spec.feature_dim);
            for (double& f : cand.features)
                f = rng.normal();
            cand.noisy = rng.uniform01() < spec.spurious_rate;
            cands.push_back(std::move(cand));
        }
    }
    return scenes;
}

} // namespace rfl
