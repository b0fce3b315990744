#include "vaereg/pipeline.hpp"

#include <algorithm>
#include <numeric>

#include "vaereg/errors.hpp"

namespace vaereg::pipeline {

void SplitSpec::validate() const {
    if (proper == 0 || proper >= total)
        throw ValidationError("split: need 0 < proper < total");
}

OfflineArtifacts offline(const Dataset& dataset, const SplitSpec& split,
                         const model::ModelConfig& model_config,
                         const model::TrainingSchedule& schedule, std::uint64_t seed,
                         std::vector<model::EpochStats>* history) {
    split.validate();
    if (dataset.size() != split.total)
        throw ValidationError("offline: dataset size does not match split total");

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_seed(split.shuffle_seed, "offline-split"));
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(shuffle_rng.uniform_int(0, i - 1));
        std::swap(order[i - 1], order[j]);
    }

    Dataset proper_set;
    proper_set.image_side = dataset.image_side;
    proper_set.examples.reserve(split.proper);
    for (std::size_t i = 0; i < split.proper; ++i)
        proper_set.examples.push_back(dataset.examples[order[i]]);

    model::VaeRegressionModel trained =
        model::make_model(model_config, mix_seed(seed, "model-seed"));
    std::vector<model::EpochStats> stats = model::train(trained, proper_set, schedule);
    if (history) *history = std::move(stats);

    // One reconstruction draw per calibration example.
    Rng calib_rng(mix_seed(seed, "calibration"));
    std::vector<double> scores;
    scores.reserve(split.calibration());
    for (std::size_t i = split.proper; i < split.total; ++i) {
        const LabeledExample& ex = dataset.examples[order[i]];
        const std::vector<Tensor> recon =
            model::sample_reconstructions(trained, ex.image, 1, calib_rng);
        scores.push_back(icp::nonconformity(ex.image, recon.front()));
    }
    return OfflineArtifacts{std::move(trained), icp::CalibrationSet(std::move(scores))};
}

icp::DetectorState make_detector_state(icp::DetectorConfig config,
                                       const icp::CalibrationSet& calibration) {
    if (config.p_floor == 0.0) config.p_floor = calibration.default_p_floor();
    config.validate();
    return icp::DetectorState{0.0, config};
}

OnlineStepResult online_step(const Tensor& x, const OfflineArtifacts& artifacts,
                             icp::DetectorState& state, Rng& rng) {
    const icp::DetectorConfig& cfg = state.config;
    OnlineStepResult result;
    result.p_values.reserve(cfg.sample_count);

    const std::vector<Tensor> recons =
        model::sample_reconstructions(artifacts.trained_model, x, cfg.sample_count, rng);
    for (const Tensor& x_hat : recons) {
        const double a = icp::nonconformity(x, x_hat);
        result.p_values.push_back(icp::p_value(a, artifacts.calibration, cfg.p_floor));
    }

    const icp::MartingaleLog log_m = icp::log_martingale(result.p_values, cfg.quadrature_nodes);
    result.log_m = log_m.log_m;

    state = icp::cusum_update(state, log_m);
    result.s = state.s;
    result.anomaly = icp::alarm(state);
    if (result.anomaly) state.s = 0.0;

    result.predicted_distance = model::predict_distance(artifacts.trained_model, x);
    return result;
}

}  // namespace vaereg::pipeline
