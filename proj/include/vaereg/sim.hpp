#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vaereg/attack.hpp"
#include "vaereg/dataset.hpp"
#include "vaereg/pipeline.hpp"
#include "vaereg/rng.hpp"
#include "vaereg/tensor.hpp"

namespace vaereg::sim {

struct SceneParams {
    std::size_t image_side = 16;
    double noise_level = 0.0;   // [0,1], additive noise amplitude is 0.1x this
    double brightness = 1.0;    // [0.5, 1.0]
    std::uint64_t seed = 0;

    void validate() const;
};

struct VehicleState {
    double distance = 0.0;  // meters to obstacle, ground truth
    double velocity = 0.0;  // m/s
    std::size_t time_step = 0;
};

struct ControlParams {
    double l_min = 1.0;   // meters
    double l_max = 3.0;
    double a_max = 8.0;   // m/s^2

    double l_target() const { return 0.5 * (l_min + l_max); }
};

// Centered square obstacle; apparent side is image_side *
// clamp(k/d, 0.05, 0.95) pixels with k = 8 m. Intensity is the scene
// brightness, attenuated once the ratio clamp saturates so that frames keep
// changing with distance down to contact. Additive smooth zero-mean noise of
// per-pixel amplitude noise_level x 0.1. Pure in (d, params).
Tensor render_scene(double distance, const SceneParams& params);

constexpr double kPinholeScale = 8.0;  // meters

// Euler step: v' = max(0, v - a dt), d' = max(0, d - v dt).
VehicleState step_vehicle(const VehicleState& s, double brake_decel, double dt);

// Scripted braking law: required = v^2 / (2 max(d_est - l_target, 0.1)),
// clamped to [0, a_max].
double controller(double d_est, double velocity, const ControlParams& params);

struct NuisanceRanges {
    double noise_min = 0.2;
    double noise_max = 1.0;
    double brightness_min = 0.85;
    double brightness_max = 1.0;
};

Dataset generate_dataset(std::size_t count, double label_min, double label_max,
                         std::size_t image_side, const NuisanceRanges& nuisance,
                         std::uint64_t seed);

enum class Outcome { kStoppedInZone, kStoppedShort, kCollision };
const char* outcome_name(Outcome o);

struct EpisodeConfig {
    double d0 = 100.0;  // meters
    double v0 = 26.4;   // m/s, sampled per episode from [25.0, 27.8]
    double dt = 0.05;   // seconds
    ControlParams control;
    std::size_t max_steps = 400;
    std::optional<attack::AttackConfig> attack;
    SceneParams nuisance;  // base scene: image size and noise stream seed
    // Per-frame noise/brightness draws come from these ranges so closed-loop
    // frames stay exchangeable with the per-example draws of the dataset.
    NuisanceRanges frame_nuisance;
    bool stop_on_first_alarm = false;
    std::uint64_t detector_seed = 0;  // stream for posterior draws

    void validate() const;
};

struct StepRecord {
    std::size_t t = 0;
    double d_true = 0.0;
    double d_pred = 0.0;
    double v = 0.0;
    double brake = 0.0;
    std::vector<double> p_values;
    double log_m = 0.0;
    double s = 0.0;
    bool alarm = false;
};

struct EpisodeRecord {
    std::vector<StepRecord> steps;
    Outcome outcome = Outcome::kStoppedShort;
    std::int64_t first_alarm_step = -1;
    std::int64_t attack_start_step = -1;
    double final_distance = 0.0;
    double final_velocity = 0.0;
    double detection_seconds_total = 0.0;  // wall time spent in detection steps
};

// Closed-loop episode: render (attacked from start_step when configured),
// detect, brake, integrate; ends at v = 0, d = 0, first alarm (when
// configured) or max_steps.
EpisodeRecord run_episode(const EpisodeConfig& cfg, const pipeline::OfflineArtifacts& artifacts,
                          const icp::DetectorConfig& detector);

// Per-episode sampling of v0, nuisance and the attack start step
// (uniform on {20..60}), all from the episode seed.
EpisodeConfig sample_episode_config(const EpisodeConfig& base, const NuisanceRanges& nuisance,
                                    std::uint64_t episode_seed, bool attacked);

void write_episode_csv(const std::string& path, const EpisodeRecord& record,
                       std::size_t sample_count);
EpisodeRecord read_episode_csv(const std::string& path);
void write_episode_summary(const std::string& path, const EpisodeRecord& record,
                           const EpisodeConfig& cfg);

}  // namespace vaereg::sim
