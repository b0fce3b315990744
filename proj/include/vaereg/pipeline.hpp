#pragma once

#include <cstdint>
#include <vector>

#include "vaereg/dataset.hpp"
#include "vaereg/icp.hpp"
#include "vaereg/model.hpp"
#include "vaereg/rng.hpp"

namespace vaereg::pipeline {

struct SplitSpec {
    std::size_t total = 0;
    std::size_t proper = 0;  // calibration size is total - proper
    std::uint64_t shuffle_seed = 0;

    std::size_t calibration() const { return total - proper; }
    void validate() const;
};

// Output of the offline phase: trained model plus calibration scores, each
// calibration score from one posterior reconstruction of its example.
struct OfflineArtifacts {
    model::VaeRegressionModel trained_model;
    icp::CalibrationSet calibration;

    OfflineArtifacts(model::VaeRegressionModel m, icp::CalibrationSet c)
        : trained_model(std::move(m)), calibration(std::move(c)) {}
};

OfflineArtifacts offline(const Dataset& dataset, const SplitSpec& split,
                         const model::ModelConfig& model_config,
                         const model::TrainingSchedule& schedule, std::uint64_t seed,
                         std::vector<model::EpochStats>* history = nullptr);

// Detector state with the p-floor resolved against the calibration set
// (config.p_floor == 0 selects 1/count).
icp::DetectorState make_detector_state(icp::DetectorConfig config,
                                       const icp::CalibrationSet& calibration);

struct OnlineStepResult {
    bool anomaly = false;
    double predicted_distance = 0.0;  // meters
    std::vector<double> p_values;
    double log_m = 0.0;
    double s = 0.0;  // CUSUM statistic after the update, before any alarm reset
};

// One online detection step: N posterior reconstructions, scores, p-values,
// martingale, CUSUM, alarm (state resets to 0 on alarm), regression output.
OnlineStepResult online_step(const Tensor& x, const OfflineArtifacts& artifacts,
                             icp::DetectorState& state, Rng& rng);

}  // namespace vaereg::pipeline
