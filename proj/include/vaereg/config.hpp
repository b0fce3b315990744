#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vaereg/attack.hpp"
#include "vaereg/icp.hpp"
#include "vaereg/model.hpp"
#include "vaereg/sim.hpp"

namespace vaereg::config {

struct DatasetSection {
    std::size_t count = 2000;
    double label_min = 2.0;
    double label_max = 110.0;
    std::size_t image_side = 32;
    sim::NuisanceRanges nuisance;
};

struct EpisodesSection {
    std::size_t count = 100;           // per side (nominal and attacked)
    std::size_t validation_episodes = 20;
    bool tune = true;
    bool stop_on_first_alarm = true;
    std::size_t threads = 1;
    sim::EpisodeConfig base;           // d0/dt/l_min/l_max/a_max/max_steps
};

// Whole-run configuration: one JSON file, every module's parameters, all
// randomness derived from master_seed. Unknown keys are rejected.
struct RunConfig {
    std::uint64_t master_seed = 7;
    std::string out_dir = "out";
    DatasetSection dataset;
    std::size_t split_proper = 1600;
    model::ModelConfig model;  // input_dim derived from dataset.image_side
    model::TrainingSchedule schedule;
    icp::DetectorConfig detector;
    std::vector<icp::DetectorConfig> detector_rows;  // optional extra table rows
    attack::AttackConfig attack{0.02, 110.0, 20, 15};
    EpisodesSection episodes;

    void validate() const;

    std::string dataset_path() const { return out_dir + "/dataset.bin"; }
    std::string model_path() const { return out_dir + "/model.bin"; }
    std::string calibration_path() const { return out_dir + "/calibration.txt"; }
    std::string loss_history_path() const { return out_dir + "/loss_history.csv"; }
    std::string latent_path() const { return out_dir + "/latent.csv"; }
    std::string results_path() const { return out_dir + "/results.csv"; }
    std::string timings_path() const { return out_dir + "/timings.csv"; }
    std::string records_dir() const { return out_dir + "/episodes"; }
};

RunConfig default_config();
RunConfig load_config(const std::string& path);
void write_config_echo(const std::string& path, const RunConfig& cfg);

}  // namespace vaereg::config
