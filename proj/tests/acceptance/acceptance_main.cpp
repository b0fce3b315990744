// Acceptance suite: one pass/fail line per criterion, exit 0 only if all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "vaereg/attack.hpp"
#include "vaereg/config.hpp"
#include "vaereg/experiment.hpp"
#include "vaereg/icp.hpp"
#include "vaereg/model.hpp"
#include "vaereg/pipeline.hpp"
#include "vaereg/rng.hpp"
#include "vaereg/sim.hpp"

namespace fs = std::filesystem;
using namespace vaereg;
using Clock = std::chrono::steady_clock;

namespace {

struct Criterion {
    int id;
    bool pass;
    std::string detail;
};
std::vector<Criterion> g_results;

void report(int id, bool pass, const std::string& detail) {
    g_results.push_back({id, pass, detail});
    std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

double ks_distance_to_uniform(std::vector<double> samples) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ks = std::max(ks, std::abs((i + 1) / n - samples[i]));
        ks = std::max(ks, std::abs(i / n - samples[i]));
    }
    return ks;
}

double single_factor_martingale(double p) {
    if (p == 1.0) return 0.5;
    const double lp = std::log(p);
    return (p * (lp - 1.0) + 1.0) / (p * lp * lp);
}

// ---- criterion 3: martingale quadrature vs oracles ------------------------

void check_martingale_oracle() {
    double worst = 0.0;
    for (const double p : {0.01, 0.1, 0.5, 0.9, 1.0}) {
        const double lm = icp::log_martingale({p}, 1001).log_m;
        const double oracle = std::log(single_factor_martingale(p));
        worst = std::max(worst, std::abs(lm - oracle));
    }
    Rng rng(314);
    double worst_refine = 0.0;
    for (const std::size_t n : {5u, 10u, 20u}) {
        for (int trial = 0; trial < 25; ++trial) {
            std::vector<double> p(n);
            for (double& v : p) v = std::max(0.0025, rng.uniform());
            const double coarse = icp::log_martingale(p, 1001).log_m;
            const double fine = icp::log_martingale(p, 10001).log_m;
            worst_refine = std::max(worst_refine, std::abs(coarse - fine));
        }
    }
    const bool pass = worst < 1e-6 && worst_refine < 1e-6;
    report(3, pass,
           fmt("martingale oracle: closed-form gap %.3g, 1001-vs-10001 gap %.3g (tol 1e-6)",
               worst, worst_refine));
}

// ---- criterion 4: conformal validity ---------------------------------------

void check_conformal_validity() {
    Rng rng(2718);
    const std::size_t trials = 100000;
    const std::size_t calib_size = 400;
    std::vector<double> pvals;
    pvals.reserve(trials);
    std::vector<double> scores(calib_size);
    for (std::size_t t = 0; t < trials; ++t) {
        for (double& s : scores) s = -std::log(1.0 - rng.uniform());
        const double test_score = -std::log(1.0 - rng.uniform());
        const icp::CalibrationSet calib(scores);
        pvals.push_back(icp::p_value(test_score, calib));
    }
    const double ks = ks_distance_to_uniform(std::move(pvals));
    report(4, ks < 0.02, fmt("conformal validity: KS distance %.4f over 1e5 trials (tol 0.02)", ks));
}

// ---- criterion 5: gradient checks ------------------------------------------

void check_gradients() {
    model::ModelConfig cfg;
    cfg.input_dim = 6;
    cfg.latent_dim = 2;
    cfg.trunk_units = 6;
    cfg.regressor_units = 5;
    cfg.generator_units = 5;
    cfg.decoder_units = 6;
    cfg.label_min = 0.0;
    cfg.label_max = 1.0;
    auto m = model::make_model(cfg, 4096);

    Rng rng(55);
    Tensor x = Tensor::zeros({6});
    for (double& v : x.data) v = rng.uniform();
    const double y = 0.45;
    Tensor noise_z{{2}, {rng.normal(), rng.normal()}};
    Tensor noise_c{{1}, {rng.normal()}};

    model::ModelGradients grads;
    model::loss_gradients(m, x, y, noise_z, noise_c, grads);

    struct Slot {
        nn::Network* net;
        nn::Gradients* grad;
    };
    Slot slots[] = {{&m.trunk, &grads.trunk},
                    {&m.encoder_head, &grads.encoder_head},
                    {&m.regressor_head, &grads.regressor_head},
                    {&m.latent_generator, &grads.latent_generator},
                    {&m.decoder, &grads.decoder}};

    const double h = 1e-5;
    double worst = 0.0;
    std::size_t checked = 0;
    Rng pick(66);
    while (checked < 100) {
        Slot& slot = slots[pick.uniform_int(0, 4)];
        const auto li = static_cast<std::size_t>(pick.uniform_int(0, slot.net->size() - 1));
        const bool is_weight = pick.uniform() < 0.8;
        Tensor& param = is_weight ? (*slot.net)[li].weights : (*slot.net)[li].bias;
        const Tensor& grad = is_weight ? slot.grad->weight_grads[li] : slot.grad->bias_grads[li];
        const auto k = static_cast<std::size_t>(pick.uniform_int(0, param.numel() - 1));
        const double analytic = grad.data[k];
        if (std::abs(analytic) <= 1e-6) continue;
        const double saved = param.data[k];
        param.data[k] = saved + h;
        const double up = -model::loss(m, x, y, noise_z, noise_c).total;
        param.data[k] = saved - h;
        const double down = -model::loss(m, x, y, noise_z, noise_c).total;
        param.data[k] = saved;
        worst = std::max(worst, std::abs((up - down) / (2 * h) - analytic) / std::abs(analytic));
        ++checked;
    }

    // FGSM input gradient: dJ/dx for J = (f(x) - y_target)^2.
    const double y_target = 0.9;
    const model::DistanceGradient dg = model::predict_distance_with_gradient(m, x);
    double worst_attack = 0.0;
    for (std::size_t k = 0; k < x.numel(); ++k) {
        const double analytic = 2.0 * (dg.prediction - y_target) * dg.input_grad.data[k];
        if (std::abs(analytic) <= 1e-6) continue;
        const double saved = x.data[k];
        x.data[k] = saved + h;
        double f = model::predict_distance(m, x);
        const double up = (f - y_target) * (f - y_target);
        x.data[k] = saved - h;
        f = model::predict_distance(m, x);
        const double down = (f - y_target) * (f - y_target);
        x.data[k] = saved;
        worst_attack =
            std::max(worst_attack, std::abs((up - down) / (2 * h) - analytic) / std::abs(analytic));
    }

    const bool pass = worst < 1e-4 && worst_attack < 1e-4;
    report(5, pass,
           fmt("gradients: worst loss-gradient error %.3g, worst attack-gradient error %.3g "
               "(tol 1e-4, 100 coords)",
               worst, worst_attack));
}

// ---- shared desk-scale artifacts -------------------------------------------

struct DeskSetup {
    config::RunConfig cfg = config::default_config();
    Dataset dataset;
    Dataset heldout;
    std::unique_ptr<pipeline::OfflineArtifacts> artifacts;
    double train_seconds = 0.0;
};

DeskSetup build_desk() {
    DeskSetup desk;
    const auto& cfg = desk.cfg;
    desk.dataset = sim::generate_dataset(cfg.dataset.count, cfg.dataset.label_min,
                                         cfg.dataset.label_max, cfg.dataset.image_side,
                                         cfg.dataset.nuisance, mix_seed(cfg.master_seed, "data"));
    desk.heldout = sim::generate_dataset(400, cfg.dataset.label_min, cfg.dataset.label_max,
                                         cfg.dataset.image_side, cfg.dataset.nuisance,
                                         mix_seed(cfg.master_seed, "heldout"));
    model::ModelConfig mc = cfg.model;
    mc.input_dim = cfg.dataset.image_side * cfg.dataset.image_side;
    mc.label_min = cfg.dataset.label_min;
    mc.label_max = cfg.dataset.label_max;
    model::TrainingSchedule schedule = cfg.schedule;
    schedule.seed = mix_seed(cfg.master_seed, "train");

    const auto t0 = Clock::now();
    desk.artifacts = std::make_unique<pipeline::OfflineArtifacts>(pipeline::offline(
        desk.dataset, pipeline::SplitSpec{desk.dataset.size(), cfg.split_proper,
                                          mix_seed(cfg.master_seed, "split")},
        mc, schedule, mix_seed(cfg.master_seed, "offline")));
    desk.train_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("# desk training: %.1f s, calibration size %zu\n", desk.train_seconds,
                desk.artifacts->calibration.count());
    return desk;
}

// ---- criterion 7: perception accuracy --------------------------------------

double mae_on(const model::VaeRegressionModel& m, const Dataset& ds, std::size_t limit) {
    const std::size_t n = std::min(limit, ds.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += std::abs(model::predict_distance(m, ds.examples[i].image) -
                        ds.examples[i].distance);
    return acc / static_cast<double>(n);
}

double check_perception(const DeskSetup& desk) {
    const double range = desk.cfg.dataset.label_max - desk.cfg.dataset.label_min;
    const double test_mae = mae_on(desk.artifacts->trained_model, desk.heldout, 400);
    const double train_mae = mae_on(desk.artifacts->trained_model, desk.dataset, 400);
    const bool pass = test_mae <= 0.05 * range && test_mae >= train_mae;
    report(7, pass,
           fmt("perception: held-out MAE %.2f m (tol %.2f m), train MAE %.2f m, ordering %s",
               test_mae, 0.05 * range, train_mae, test_mae >= train_mae ? "ok" : "violated"));
    return test_mae;
}

// ---- criterion 6: attack efficacy and closed-loop outcomes -----------------

void check_attack_and_outcomes(const DeskSetup& desk) {
    const auto& m = desk.artifacts->trained_model;
    const auto& cfg = desk.cfg;

    double clean_abs = 0.0;
    std::vector<double> attacked_errors;
    for (std::size_t i = 0; i < 100; ++i) {
        const auto& ex = desk.heldout.examples[i];
        clean_abs += std::abs(model::predict_distance(m, ex.image) - ex.distance);
        const auto adv = attack::fgsm(m, ex.image, cfg.attack);
        attacked_errors.push_back(
            std::abs(model::predict_distance(m, adv.x_adv) - ex.distance));
    }
    const double clean_mae = clean_abs / 100.0;
    std::nth_element(attacked_errors.begin(), attacked_errors.begin() + 50,
                     attacked_errors.end());
    const double attacked_median = attacked_errors[50];

    sim::EpisodeConfig base = cfg.episodes.base;
    base.nuisance.image_side = cfg.dataset.image_side;
    base.attack = cfg.attack;
    base.stop_on_first_alarm = false;  // alarms ignored

    const auto nominal_cfg = sim::sample_episode_config(
        base, cfg.dataset.nuisance, mix_seed(cfg.master_seed, "acc6-nominal"), false);
    const auto nominal = sim::run_episode(nominal_cfg, *desk.artifacts, cfg.detector);

    const auto attacked_cfg = sim::sample_episode_config(
        base, cfg.dataset.nuisance, mix_seed(cfg.master_seed, "acc6-attacked"), true);
    const auto attacked = sim::run_episode(attacked_cfg, *desk.artifacts, cfg.detector);

    const bool pass = attacked_median >= 5.0 * clean_mae &&
                      attacked.outcome == sim::Outcome::kCollision &&
                      nominal.outcome == sim::Outcome::kStoppedInZone &&
                      nominal.final_distance >= 1.0 && nominal.final_distance <= 3.0;
    report(6, pass,
           fmt("attack: median attacked error %.1f m vs clean MAE %.2f m (need 5x); attacked "
               "episode %s; nominal episode %s at %.2f m",
               attacked_median, clean_mae, sim::outcome_name(attacked.outcome),
               sim::outcome_name(nominal.outcome), nominal.final_distance));
}

// ---- criterion 1: Table-I shape --------------------------------------------

void check_table_one(const DeskSetup& desk) {
    const auto& cfg = desk.cfg;
    experiment::BatchSettings settings;
    settings.episodes_per_side = 100;
    settings.base = cfg.episodes.base;
    settings.base.nuisance.image_side = cfg.dataset.image_side;
    settings.nuisance = cfg.dataset.nuisance;
    settings.attack = cfg.attack;
    settings.seed = mix_seed(cfg.master_seed, "episodes");
    settings.threads = 1;

    const icp::DetectorConfig tuned =
        experiment::tune_detector(*desk.artifacts, cfg.detector, settings, 20);
    std::printf("# tuned detector: N=%zu delta=%.1f tau=%.1f\n", tuned.sample_count,
                tuned.delta, tuned.tau);

    const auto t0 = Clock::now();
    const experiment::ResultRow row = experiment::run_batch(*desk.artifacts, tuned, settings);
    const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();

    const bool pass =
        row.false_positives <= 2 && row.false_negatives <= 2 && row.avg_delay_frames <= 10.0;
    report(1, pass,
           fmt("table-I shape: fp %zu/100, fn %zu/100, avg delay %.1f frames "
               "(tol 2/2/10), 200 episodes in %.0f s",
               row.false_positives, row.false_negatives, row.avg_delay_frames, seconds));
}

// ---- criterion 2: runtime linearity in N ------------------------------------

void check_runtime_linearity(const DeskSetup& desk) {
    const auto& cfg = desk.cfg;
    std::vector<Tensor> frames;
    for (int i = 0; i < 16; ++i)
        frames.push_back(desk.heldout.examples[i].image);

    const auto mean_step_seconds = [&](std::size_t n) {
        icp::DetectorConfig det = cfg.detector;
        det.sample_count = n;
        auto state = pipeline::make_detector_state(det, desk.artifacts->calibration);
        Rng rng(4711);
        for (int warm = 0; warm < 20; ++warm)
            pipeline::online_step(frames[warm % frames.size()], *desk.artifacts, state, rng);
        const int reps = 400;
        const auto t0 = Clock::now();
        for (int i = 0; i < reps; ++i) {
            pipeline::online_step(frames[i % frames.size()], *desk.artifacts, state, rng);
            state.s = 0.0;
        }
        return std::chrono::duration<double>(Clock::now() - t0).count() / reps;
    };

    const double t5 = mean_step_seconds(5);
    const double t10 = mean_step_seconds(10);
    const double t20 = mean_step_seconds(20);
    const double r20 = t20 / t5;
    const double r10 = t10 / t5;
    const bool pass = r20 >= 3.0 && r20 <= 5.0 && r10 >= 1.6 && r10 <= 2.4;
    report(2, pass,
           fmt("runtime linearity: T(20)/T(5)=%.2f (tol [3,5]), T(10)/T(5)=%.2f (tol "
               "[1.6,2.4]); T(5)=%.2f ms",
               r20, r10, 1000.0 * t5));
}

// ---- criterion 8: command determinism ---------------------------------------

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(VAEREG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return status == -1 ? -1 : WEXITSTATUS(status);
}

void check_determinism() {
    const fs::path tmp =
        fs::temp_directory_path() / ("vaereg_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(tmp);
    const fs::path cfg_path = tmp / "config.json";
    const fs::path out_a = tmp / "a";
    const fs::path out_b = tmp / "b";

    const auto write_cfg = [&](const fs::path& out_dir) {
        std::ofstream cfg(cfg_path, std::ios::trunc);
        cfg << R"({
  "master_seed": 11,
  "out_dir": ")" << out_dir.string() << R"(",
  "dataset": {"count": 260, "image_side": 16},
  "split": {"proper": 200},
  "model": {"latent_dim": 3, "trunk_units": 24, "regressor_units": 12,
            "generator_units": 12, "decoder_units": 24},
  "train": {"phase1_lr": 2e-3, "phase1_epochs": 6, "phase2_lr": 2e-4,
            "phase2_epochs": 2, "batch_size": 32},
  "detector": {"n": 5, "delta": 12.0, "tau": 60.0, "quadrature_nodes": 501},
  "episodes": {"count": 3, "validation_episodes": 2, "tune": false, "threads": 1}
})";
    };

    bool pass = true;
    std::string detail;
    for (const fs::path& out : {out_a, out_b}) {
        write_cfg(out);
        if (run_cli("generate --config " + cfg_path.string()) != 0 ||
            run_cli("train --config " + cfg_path.string()) != 0 ||
            run_cli("experiment --config " + cfg_path.string()) != 0) {
            pass = false;
            detail = "CLI command failed";
            break;
        }
    }
    if (pass) {
        const bool weights_ok = slurp(out_a / "model.bin") == slurp(out_b / "model.bin");
        const bool results_ok = slurp(out_a / "results.csv") == slurp(out_b / "results.csv");
        const bool dataset_ok = slurp(out_a / "dataset.bin") == slurp(out_b / "dataset.bin");
        pass = weights_ok && results_ok && dataset_ok;
        detail = fmt("determinism: weights %s, results %s, dataset %s",
                     weights_ok ? "identical" : "DIFFER", results_ok ? "identical" : "DIFFER",
                     dataset_ok ? "identical" : "DIFFER");
    }
    std::error_code ec;
    fs::remove_all(tmp, ec);
    report(8, pass, detail);
}

}  // namespace

int main() {
    const auto t0 = Clock::now();

    check_martingale_oracle();
    check_conformal_validity();
    check_gradients();

    DeskSetup desk = build_desk();
    check_perception(desk);
    check_attack_and_outcomes(desk);
    check_table_one(desk);
    check_runtime_linearity(desk);
    check_determinism();

    const double total = std::chrono::duration<double>(Clock::now() - t0).count();
    std::size_t failed = 0;
    for (const Criterion& c : g_results)
        if (!c.pass) ++failed;
    std::printf("# acceptance total: %zu/%zu criteria passed in %.0f s\n",
                g_results.size() - failed, g_results.size(), total);
    return failed == 0 ? 0 : 1;
}
