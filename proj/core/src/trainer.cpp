#include "rfl/trainer.hpp"

#include "rfl/random.hpp"

#include <algorithm>
#include <stdexcept>

namespace rfl {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566ULL;

std::size_t infer_num_classes(std::span<const LabeledExample> data)
{
    int top = 0;
    for (const auto& ex : data)
        top = std::max(top, ex.label);
    return static_cast<std::size_t>(top) + 1;
}

std::vector<std::size_t> epoch_order(std::span<const LabeledExample> data, const TrainConfig& config,
                                     std::uint64_t epoch)
{
    std::vector<std::size_t> order;
    if (config.undersample) {
        UndersamplePolicy policy = *config.undersample;
        policy.seed = derive_seed(config.undersample->seed, epoch);
        order = undersample_indices(data, policy);
    } else {
        order.resize(data.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = i;
    }
    if (order.empty())
        throw std::runtime_error("undersampling removed every training example");
    SplitMix64 rng(derive_seed(derive_seed(config.weight_init_seed, kShuffleStream), epoch));
    shuffle(std::span<std::size_t>(order), rng);
    return order;
}

} // namespace

void validate_schedule(const LrSchedule& schedule)
{
    if (schedule.empty())
        throw std::invalid_argument("learning-rate schedule must not be empty");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (!(schedule[i].rate > 0.0))
            throw std::invalid_argument("learning rates must be positive");
        if (i > 0 && schedule[i].until <= schedule[i - 1].until)
            throw std::invalid_argument("learning-rate thresholds must be strictly increasing");
    }
}

double lr_at(const LrSchedule& schedule, std::uint64_t iteration)
{
    for (const auto& step : schedule)
        if (iteration < step.until)
            return step.rate;
    return schedule.back().rate;
}

LrSchedule reference_step_schedule()
{
    return {{120000, 0.005}, {140000, 0.0005}, {180000, 0.00005}};
}

void TrainConfig::validate() const
{
    if (batch_size == 0)
        throw std::invalid_argument("batch_size must be positive");
    validate_schedule(lr_schedule);
    if (undersample)
        undersample->validate();
}

LinearModel::LinearModel(std::size_t num_classes, std::size_t feature_dim)
    : num_classes_(num_classes),
      feature_dim_(feature_dim),
      weights_(num_classes * feature_dim, 0.0),
      biases_(num_classes, 0.0)
{
}

LinearModel LinearModel::initialized(std::size_t num_classes, std::size_t feature_dim,
                                     std::uint64_t seed)
{
    LinearModel model(num_classes, feature_dim);
    SplitMix64 rng(seed);
    for (double& w : model.weights_)
        w = 0.02 * rng.uniform01() - 0.01;
    return model;
}

void LinearModel::logits(std::span<const double> x, std::span<double> out) const
{
    if (x.size() != feature_dim_ || out.size() != num_classes_)
        throw std::invalid_argument("linear model dimension mismatch");
    for (std::size_t c = 0; c < num_classes_; ++c) {
        double z = biases_[c];
        const double* row = weights_.data() + c * feature_dim_;
        for (std::size_t d = 0; d < feature_dim_; ++d)
            z += row[d] * x[d];
        out[c] = z;
    }
}

int LinearModel::predict(std::span<const double> x) const
{
    std::vector<double> z(num_classes_);
    logits(x, z);
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

BatchGradient batch_loss_and_gradient(const LinearModel& model,
                                      std::span<const LabeledExample> data,
                                      std::span<const std::size_t> batch, const LossParams& loss)
{
    const std::size_t classes = model.num_classes();
    const std::size_t dim = model.feature_dim();
    BatchGradient out{0.0, LinearModel(classes, dim)};
    if (batch.empty())
        return out;

    std::vector<double> z(classes);
    std::vector<double> dz(classes);
    auto gw = out.grad.weights();
    auto gb = out.grad.biases();
    for (std::size_t idx : batch) {
        const auto& ex = data[idx];
        if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= classes)
            throw std::invalid_argument("label outside the model's class range");
        model.logits(ex.features, z);
        out.loss += softmax_loss_and_grad(z, static_cast<std::size_t>(ex.label), loss, dz);
        for (std::size_t c = 0; c < classes; ++c) {
            gb[c] += dz[c];
            double* row = gw.data() + c * dim;
            for (std::size_t d = 0; d < dim; ++d)
                row[d] += dz[c] * ex.features[d];
        }
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.loss *= inv;
    for (double& g : gw)
        g *= inv;
    for (double& g : gb)
        g *= inv;
    return out;
}

TrainResult train_classifier(std::span<const LabeledExample> data, const TrainConfig& config)
{
    config.validate();
    if (data.empty())
        throw std::invalid_argument("training data must not be empty");
    const std::size_t dim = data.front().features.size();
    for (const auto& ex : data)
        if (ex.features.size() != dim)
            throw std::invalid_argument("training examples have inconsistent feature dimensions");

    const std::size_t classes = config.num_classes ? config.num_classes : infer_num_classes(data);
    TrainResult result{LinearModel::initialized(classes, dim, config.weight_init_seed), {}};
    result.loss_curve.reserve(config.iterations);

    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    std::uint64_t epoch = 0;
    for (std::size_t it = 0; it < config.iterations; ++it) {
        if (cursor >= order.size()) {
            order = epoch_order(data, config, epoch++);
            cursor = 0;
        }
        const std::size_t take = std::min(config.batch_size, order.size() - cursor);
        const std::span<const std::size_t> batch(order.data() + cursor, take);
        cursor += take;

        const BatchGradient g = batch_loss_and_gradient(result.model, data, batch, config.loss);
        const double lr = lr_at(config.lr_schedule, it);
        auto w = result.model.weights();
        auto gw = g.grad.weights();
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] -= lr * gw[i];
        auto b = result.model.biases();
        auto gb = g.grad.biases();
        for (std::size_t i = 0; i < b.size(); ++i)
            b[i] -= lr * gb[i];
        result.loss_curve.push_back(g.loss);
    }
    return result;
}

ClassificationReport report_from_predictions(std::span<const int> truth,
                                             std::span<const int> predicted)
{
    if (truth.size() != predicted.size())
        throw std::invalid_argument("truth and prediction lengths differ");
    ClassificationReport report;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        auto& cls = report.per_class[truth[i]];
        ++cls.count;
        if (truth[i] == predicted[i]) {
            ++cls.correct;
            ++correct;
        }
    }
    double sum = 0.0;
    for (auto& [id, cls] : report.per_class) {
        cls.recall = static_cast<double>(cls.correct) / static_cast<double>(cls.count);
        sum += cls.recall;
    }
    if (!report.per_class.empty()) {
        report.mrecall = sum / static_cast<double>(report.per_class.size());
        report.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    }
    return report;
}

ClassificationReport evaluate_classifier(const LinearModel& model,
                                         std::span<const LabeledExample> data)
{
    std::vector<int> truth(data.size());
    std::vector<int> predicted(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        truth[i] = data[i].label;
        predicted[i] = model.predict(data[i].features);
    }
    return report_from_predictions(truth, predicted);
}

} // namespace rfl
