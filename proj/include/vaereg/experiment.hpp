#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vaereg/icp.hpp"
#include "vaereg/pipeline.hpp"
#include "vaereg/sim.hpp"

namespace vaereg::experiment {

struct BatchSettings {
    std::size_t episodes_per_side = 100;  // K nominal + K attacked
    sim::EpisodeConfig base;
    sim::NuisanceRanges nuisance;
    attack::AttackConfig attack;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string records_dir;  // empty disables per-episode record files
};

struct ResultRow {
    std::size_t n = 0;
    double delta = 0.0;
    double tau = 0.0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    double avg_delay_frames = 0.0;  // over detected attacked episodes
    std::size_t episodes = 0;       // per side
    double mean_detection_ms = 0.0;
};

// K nominal + K attacked episodes in stop-on-first-alarm mode for one
// detector configuration. Episode initial conditions depend only on
// (seed, index), so rows with different detector parameters see the same
// scenarios.
ResultRow run_batch(const pipeline::OfflineArtifacts& artifacts,
                    const icp::DetectorConfig& detector, const BatchSettings& settings);

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);
void write_timings_csv(const std::string& path, const std::vector<ResultRow>& rows);

// Detector threshold fitted on a small set of held-out validation episodes:
// tau is placed between the largest nominal CUSUM excursion and the smallest
// attacked excursion reached within 10 frames of attack onset. delta and N
// are taken from the seed configuration.
icp::DetectorConfig tune_detector(const pipeline::OfflineArtifacts& artifacts,
                                  const icp::DetectorConfig& seed_config,
                                  const BatchSettings& settings,
                                  std::size_t validation_episodes);

}  // namespace vaereg::experiment
