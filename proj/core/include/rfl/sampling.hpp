#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace rfl {

struct LabeledExample {
    std::vector<double> features;
    int label = 0;
    bool noisy = false; // label was reassigned by noise injection

    bool operator==(const LabeledExample&) const = default;
};

using ClassFrequencyTable = std::map<int, std::size_t>;

// Per-class removal probabilities. Classes missing from skip_prob are kept.
struct UndersamplePolicy {
    std::map<int, double> skip_prob;
    std::uint64_t seed = 0;

    // Throws std::invalid_argument unless every probability is in [0, 1].
    void validate() const;
};

struct SynthDatasetSpec {
    std::vector<std::size_t> class_counts; // one entry per class, long-tailed
    std::size_t feature_dim = 2;
    double cluster_separation = 4.0;
    double label_noise_rate = 0.0; // [0, 1)
    std::uint64_t seed = 0;

    std::size_t num_classes() const { return class_counts.size(); }
    void validate() const;
};

// Keeps each example of class c independently with probability
// 1 - skip_prob[c]. Example i is decided by the first uniform of
// SplitMix64(derive_seed(policy.seed, i)), so the outcome for one example does
// not depend on any other. Input order is preserved.
std::vector<LabeledExample> undersample(std::span<const LabeledExample> examples,
                                        const UndersamplePolicy& policy);

// Indices retained by undersample(), for callers that keep their own storage.
std::vector<std::size_t> undersample_indices(std::span<const LabeledExample> examples,
                                             const UndersamplePolicy& policy);

ClassFrequencyTable class_frequencies(std::span<const LabeledExample> examples);

// Class centres. With feature_dim >= num_classes they are scaled unit vectors
// (a regular simplex with edge `separation`); otherwise they sit on an integer
// lattice of pitch `separation`. Either way every pair is at least
// `separation` apart. The centres do not depend on the seed, so datasets drawn
// with different seeds share one geometry (train/test splits).
std::vector<std::vector<double>> class_means(std::size_t num_classes, std::size_t feature_dim,
                                             double separation);

// Class c contributes class_counts[c] draws from N(mean_c, I), emitted in class
// order. Then floor(N * label_noise_rate) examples, chosen uniformly without
// replacement, get a label drawn uniformly from the other classes and
// noisy = true.
std::vector<LabeledExample> generate_synthetic(const SynthDatasetSpec& spec);

// --- two-stage scenes --------------------------------------------------------

// One candidate region: features, objectness label and, for objects, the class.
struct Candidate {
    std::vector<double> features;
    bool object = false;
    int class_id = -1;   // true class for objects, -1 for background
    bool noisy = false;  // objectness annotation flipped
    bool annotated_object() const { return object != noisy; }
};

struct Scene {
    std::vector<Candidate> candidates;
};

// Synthetic proposal scenes. Background candidates are N(0, I). An object of
// class c is N(0, I) plus objectness_shift * visibility along axis c, with
// visibility ~ U(0.5, 1.5); no single direction separates every class from
// background, so a linear scorer has to share its weight between classes.
// missed_rate of the objects are annotated as background and spurious_rate of
// the background candidates are annotated as objects.
struct SceneSetSpec {
    std::size_t num_scenes = 20;
    std::size_t objects_per_scene = 10;
    std::size_t background_per_object = 50;
    std::vector<double> class_weights{1.0}; // relative object class frequencies
    std::size_t feature_dim = 6;            // >= number of classes
    double objectness_shift = 3.0;
    double missed_rate = 0.0;
    double spurious_rate = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

std::vector<Scene> generate_scenes(const SceneSetSpec& spec);

} // namespace rfl
