#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vaereg/attack.hpp"
#include "vaereg/config.hpp"
#include "vaereg/dataset.hpp"
#include "vaereg/errors.hpp"
#include "vaereg/experiment.hpp"
#include "vaereg/icp.hpp"
#include "vaereg/model.hpp"
#include "vaereg/pipeline.hpp"
#include "vaereg/sim.hpp"

namespace fs = std::filesystem;
using namespace vaereg;

namespace {

struct CommonFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON run configuration");
    cmd->add_option("--seed", flags.seed, "override master seed")
        ->each([&flags](const std::string&) { flags.seed_set = true; });
    cmd->add_option("--out", flags.out_dir, "override output directory");
}

config::RunConfig resolve_config(const CommonFlags& flags) {
    config::RunConfig cfg =
        flags.config_path.empty() ? config::default_config() : config::load_config(flags.config_path);
    if (flags.seed_set) cfg.master_seed = flags.seed;
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    cfg.validate();
    return cfg;
}

void ensure_out_dir(const config::RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + cfg.out_dir);
}

model::ModelConfig model_config_of(const config::RunConfig& cfg) {
    model::ModelConfig m = cfg.model;
    m.input_dim = cfg.dataset.image_side * cfg.dataset.image_side;
    m.label_min = cfg.dataset.label_min;
    m.label_max = cfg.dataset.label_max;
    return m;
}

int cmd_generate(const config::RunConfig& cfg) {
    ensure_out_dir(cfg);
    const Dataset dataset = sim::generate_dataset(
        cfg.dataset.count, cfg.dataset.label_min, cfg.dataset.label_max,
        cfg.dataset.image_side, cfg.dataset.nuisance, mix_seed(cfg.master_seed, "data"));
    save_dataset(cfg.dataset_path(), dataset);
    std::cout << "wrote " << dataset.size() << " examples to " << cfg.dataset_path() << "\n";
    return 0;
}

int cmd_train(const config::RunConfig& cfg) {
    ensure_out_dir(cfg);
    if (!fs::exists(cfg.dataset_path()))
        throw IoError("dataset not found (run 'generate' first): " + cfg.dataset_path());
    const Dataset dataset = load_dataset(cfg.dataset_path());

    pipeline::SplitSpec split{dataset.size(), cfg.split_proper,
                              mix_seed(cfg.master_seed, "split")};
    model::TrainingSchedule schedule = cfg.schedule;
    schedule.seed = mix_seed(cfg.master_seed, "train");

    std::vector<model::EpochStats> history;
    const pipeline::OfflineArtifacts artifacts =
        pipeline::offline(dataset, split, model_config_of(cfg), schedule,
                          mix_seed(cfg.master_seed, "offline"), &history);

    model::save_model(cfg.model_path(), artifacts.trained_model);
    icp::save_calibration(cfg.calibration_path(), artifacts.calibration);

    std::ofstream loss_csv(cfg.loss_history_path(), std::ios::trunc);
    if (!loss_csv) throw IoError("cannot open for write: " + cfg.loss_history_path());
    loss_csv << "epoch,phase,total,label_kl,reconstruction,latent_kl\n";
    char buf[160];
    for (const model::EpochStats& s : history) {
        std::snprintf(buf, sizeof buf, "%zu,%d,%.17g,%.17g,%.17g,%.17g\n", s.epoch, s.phase,
                      s.mean_total, s.mean_label_kl, s.mean_reconstruction, s.mean_latent_kl);
        loss_csv << buf;
    }

    const auto rows = model::export_latent(artifacts.trained_model, dataset);
    model::write_latent_csv(cfg.latent_path(), rows, artifacts.trained_model.config.latent_dim);

    std::cout << "trained model -> " << cfg.model_path() << "\n"
              << "calibration (" << artifacts.calibration.count() << " scores) -> "
              << cfg.calibration_path() << "\n";
    return 0;
}

pipeline::OfflineArtifacts load_artifacts(const config::RunConfig& cfg) {
    if (!fs::exists(cfg.model_path()) || !fs::exists(cfg.calibration_path()))
        throw IoError("artifacts missing (run 'train' first) in " + cfg.out_dir);
    return pipeline::OfflineArtifacts{model::load_model(cfg.model_path()),
                                      icp::load_calibration(cfg.calibration_path())};
}

experiment::BatchSettings batch_settings_of(const config::RunConfig& cfg) {
    experiment::BatchSettings settings;
    settings.episodes_per_side = cfg.episodes.count;
    settings.base = cfg.episodes.base;
    settings.base.nuisance.image_side = cfg.dataset.image_side;
    settings.base.stop_on_first_alarm = cfg.episodes.stop_on_first_alarm;
    settings.nuisance = cfg.dataset.nuisance;
    settings.attack = cfg.attack;
    settings.seed = mix_seed(cfg.master_seed, "episodes");
    settings.threads = cfg.episodes.threads;
    return settings;
}

int cmd_experiment(const config::RunConfig& cfg) {
    ensure_out_dir(cfg);
    const pipeline::OfflineArtifacts artifacts = load_artifacts(cfg);
    experiment::BatchSettings settings = batch_settings_of(cfg);

    icp::DetectorConfig main_detector = cfg.detector;
    if (cfg.episodes.tune && cfg.episodes.validation_episodes > 0)
        main_detector = experiment::tune_detector(artifacts, cfg.detector, settings,
                                                  cfg.episodes.validation_episodes);

    std::vector<icp::DetectorConfig> detectors{main_detector};
    detectors.insert(detectors.end(), cfg.detector_rows.begin(), cfg.detector_rows.end());

    std::vector<experiment::ResultRow> rows;
    for (std::size_t i = 0; i < detectors.size(); ++i) {
        experiment::BatchSettings row_settings = settings;
        if (cfg.episodes.count > 0 && i == 0) {
            row_settings.records_dir = cfg.records_dir();
            std::error_code ec;
            fs::create_directories(row_settings.records_dir, ec);
            if (ec) throw IoError("cannot create records dir: " + row_settings.records_dir);
        }
        if (cfg.episodes.count == 0) break;
        rows.push_back(experiment::run_batch(artifacts, detectors[i], row_settings));
    }
    experiment::write_results_csv(cfg.results_path(), rows);
    experiment::write_timings_csv(cfg.timings_path(), rows);
    config::write_config_echo(cfg.out_dir + "/config_echo.json", cfg);

    for (const experiment::ResultRow& r : rows)
        std::cout << "N=" << r.n << " delta=" << r.delta << " tau=" << r.tau
                  << "  fp=" << r.false_positives << "/" << r.episodes
                  << "  fn=" << r.false_negatives << "/" << r.episodes
                  << "  avg_delay=" << r.avg_delay_frames << " frames\n";
    if (rows.empty()) std::cout << "no episodes configured; wrote header-only tables\n";
    return 0;
}

int cmd_report(const config::RunConfig& cfg, const std::string& records_dir) {
    const std::string dir = records_dir.empty() ? cfg.records_dir() : records_dir;
    if (!fs::is_directory(dir)) throw IoError("records directory not found: " + dir);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no episode records in: " + dir);

    const std::string report_dir = cfg.out_dir + "/report";
    std::error_code ec;
    fs::create_directories(report_dir, ec);
    if (ec) throw IoError("cannot create report dir: " + report_dir);

    std::ofstream summary(report_dir + "/summary.txt", std::ios::trunc);
    if (!summary) throw IoError("cannot open for write: " + report_dir + "/summary.txt");

    char buf[256];
    for (const fs::path& file : files) {
        const sim::EpisodeRecord record = sim::read_episode_csv(file.string());
        const std::string stem = report_dir + "/" + file.stem().string();

        std::ofstream dist(stem + "_distance.csv", std::ios::trunc);
        std::ofstream vel(stem + "_velocity.csv", std::ios::trunc);
        std::ofstream pvals(stem + "_pvalues.csv", std::ios::trunc);
        std::ofstream logm(stem + "_logm.csv", std::ios::trunc);
        std::ofstream scsv(stem + "_s.csv", std::ios::trunc);
        if (!dist || !vel || !pvals || !logm || !scsv)
            throw IoError("cannot write report files for: " + stem);

        dist << "t,d_true,d_pred\n";
        vel << "t,v\n";
        pvals << "t,sample,p\n";
        logm << "t,log_m\n";
        scsv << "t,s\n";
        for (const sim::StepRecord& row : record.steps) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", row.t, row.d_true, row.d_pred);
            dist << buf;
            std::snprintf(buf, sizeof buf, "%zu,%.17g\n", row.t, row.v);
            vel << buf;
            for (std::size_t k = 0; k < row.p_values.size(); ++k) {
                std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g\n", row.t, k + 1,
                              row.p_values[k]);
                pvals << buf;
            }
            std::snprintf(buf, sizeof buf, "%zu,%.17g\n", row.t, row.log_m);
            logm << buf;
            std::snprintf(buf, sizeof buf, "%zu,%.17g\n", row.t, row.s);
            scsv << buf;
        }
        summary << file.stem().string() << ": steps=" << record.steps.size()
                << " first_alarm=" << record.first_alarm_step << "\n";
    }
    std::cout << "report for " << files.size() << " episodes -> " << report_dir << "\n";
    return 0;
}

int cmd_attack_eval(const config::RunConfig& cfg) {
    ensure_out_dir(cfg);
    const pipeline::OfflineArtifacts artifacts = load_artifacts(cfg);
    const model::VaeRegressionModel& m = artifacts.trained_model;

    const std::size_t count = 100;
    const Dataset heldout = sim::generate_dataset(
        count, cfg.dataset.label_min, cfg.dataset.label_max, cfg.dataset.image_side,
        cfg.dataset.nuisance, mix_seed(cfg.master_seed, "attack-eval"));

    std::ofstream out(cfg.out_dir + "/attack_eval.csv", std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + cfg.out_dir + "/attack_eval.csv");
    out << "index,y_true,clean_pred,attacked_pred,clean_err,attacked_err\n";

    double clean_abs_sum = 0.0;
    std::vector<double> attacked_errors;
    char buf[192];
    for (std::size_t i = 0; i < heldout.size(); ++i) {
        const LabeledExample& ex = heldout.examples[i];
        const double clean = model::predict_distance(m, ex.image);
        const attack::FgsmResult adv = attack::fgsm(m, ex.image, cfg.attack);
        const double attacked = model::predict_distance(m, adv.x_adv);
        const double clean_err = std::abs(clean - ex.distance);
        const double attacked_err = std::abs(attacked - ex.distance);
        clean_abs_sum += clean_err;
        attacked_errors.push_back(attacked_err);
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, ex.distance,
                      clean, attacked, clean_err, attacked_err);
        out << buf;
    }
    const double clean_mae = clean_abs_sum / static_cast<double>(heldout.size());
    std::nth_element(attacked_errors.begin(), attacked_errors.begin() + attacked_errors.size() / 2,
                     attacked_errors.end());
    const double attacked_median = attacked_errors[attacked_errors.size() / 2];

    std::cout << "clean MAE: " << clean_mae << " m\n"
              << "attacked median abs error: " << attacked_median << " m\n"
              << "ratio: " << (clean_mae > 0 ? attacked_median / clean_mae : 0.0) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"VAE-regression conformal adversarial detection testbed"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string records_dir;

    CLI::App* generate = app.add_subcommand("generate", "render a labeled synthetic dataset");
    CLI::App* train = app.add_subcommand("train", "train the model and calibrate the detector");
    CLI::App* exper = app.add_subcommand("experiment", "run nominal + attacked episode batches");
    CLI::App* report = app.add_subcommand("report", "emit plot-ready CSVs from episode records");
    CLI::App* attack_eval =
        app.add_subcommand("attack-eval", "clean vs attacked prediction-error table");
    for (CLI::App* cmd : {generate, train, exper, report, attack_eval}) add_common(cmd, flags);
    report->add_option("--records", records_dir, "episode records directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        const config::RunConfig cfg = resolve_config(flags);
        if (generate->parsed()) return cmd_generate(cfg);
        if (train->parsed()) return cmd_train(cfg);
        if (exper->parsed()) return cmd_experiment(cfg);
        if (report->parsed()) return cmd_report(cfg, records_dir);
        if (attack_eval->parsed()) return cmd_attack_eval(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
