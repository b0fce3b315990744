#include "vaereg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

#include "vaereg/errors.hpp"

namespace vaereg::experiment {

namespace {

struct EpisodeOutcome {
    sim::EpisodeRecord record;
    sim::EpisodeConfig config;
    bool attacked = false;
};

EpisodeOutcome run_one(const pipeline::OfflineArtifacts& artifacts,
                       const icp::DetectorConfig& detector, const BatchSettings& settings,
                       std::size_t index, bool attacked, bool stop_on_first_alarm) {
    sim::EpisodeConfig base = settings.base;
    base.attack = settings.attack;  // start step resampled per episode
    base.stop_on_first_alarm = stop_on_first_alarm;
    const std::uint64_t episode_seed =
        mix_seed(settings.seed, attacked ? "episode-attacked" : "episode-nominal") + index;
    EpisodeOutcome out;
    out.config = sim::sample_episode_config(base, settings.nuisance, episode_seed, attacked);
    out.attacked = attacked;
    out.record = sim::run_episode(out.config, artifacts, detector);
    return out;
}

}  // namespace

ResultRow run_batch(const pipeline::OfflineArtifacts& artifacts,
                    const icp::DetectorConfig& detector, const BatchSettings& settings) {
    const std::size_t k = settings.episodes_per_side;
    std::vector<EpisodeOutcome> outcomes(2 * k);

    // Worker pool over episode indices; results land in index order so the
    // aggregate is schedule-independent.
    std::atomic<std::size_t> cursor{0};
    const std::size_t workers = std::max<std::size_t>(1, settings.threads);
    auto work = [&]() {
        while (true) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= 2 * k) return;
            const bool attacked = i >= k;
            const std::size_t index = attacked ? i - k : i;
            outcomes[i] = run_one(artifacts, detector, settings, index, attacked, true);
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }

    ResultRow row;
    row.n = detector.sample_count;
    row.delta = detector.delta;
    row.tau = detector.tau;
    row.episodes = k;

    double delay_sum = 0.0;
    std::size_t delay_count = 0;
    double detect_seconds = 0.0;
    std::size_t detect_steps = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const EpisodeOutcome& out = outcomes[i];
        detect_seconds += out.record.detection_seconds_total;
        detect_steps += out.record.steps.size();
        if (!out.attacked) {
            if (out.record.first_alarm_step >= 0) ++row.false_positives;
        } else {
            const std::int64_t start = out.record.attack_start_step;
            if (out.record.first_alarm_step >= start && out.record.first_alarm_step >= 0) {
                delay_sum += static_cast<double>(out.record.first_alarm_step - start);
                ++delay_count;
            } else {
                // No alarm after onset; a pre-onset alarm stops the episode
                // before the attack is ever exercised and counts here too.
                ++row.false_negatives;
            }
        }
        if (!settings.records_dir.empty()) {
            char name[64];
            std::snprintf(name, sizeof name, "/ep_%04zu_%s", i % k,
                          out.attacked ? "attacked" : "nominal");
            const std::string stem = settings.records_dir + name;
            sim::write_episode_csv(stem + ".csv", out.record, detector.sample_count);
            sim::write_episode_summary(stem + ".summary.json", out.record, out.config);
        }
    }
    row.avg_delay_frames = delay_count > 0 ? delay_sum / static_cast<double>(delay_count) : 0.0;
    row.mean_detection_ms =
        detect_steps > 0 ? 1000.0 * detect_seconds / static_cast<double>(detect_steps) : 0.0;
    return row;
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path);
    out << "N,delta,tau,fp,fn,avg_delay_frames,episodes\n";
    char buf[160];
    for (const ResultRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%zu,%zu,%.17g,%zu\n", r.n, r.delta,
                      r.tau, r.false_positives, r.false_negatives, r.avg_delay_frames,
                      r.episodes);
        out << buf;
    }
    if (!out) throw IoError("write failed: " + path);
}

void write_timings_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path);
    out << "N,mean_detection_ms\n";
    char buf[64];
    for (const ResultRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.6g\n", r.n, r.mean_detection_ms);
        out << buf;
    }
    if (!out) throw IoError("write failed: " + path);
}

icp::DetectorConfig tune_detector(const pipeline::OfflineArtifacts& artifacts,
                                  const icp::DetectorConfig& seed_config,
                                  const BatchSettings& settings,
                                  std::size_t validation_episodes) {
    const std::size_t per_side = std::max<std::size_t>(1, validation_episodes / 2);
    BatchSettings val = settings;
    val.seed = mix_seed(settings.seed, "validation");
    val.records_dir.clear();

    double nominal_max_s = 0.0;
    double attacked_min_s10 = std::numeric_limits<double>::infinity();
    for (std::size_t side = 0; side < 2; ++side) {
        const bool attacked = side == 1;
        for (std::size_t i = 0; i < per_side; ++i) {
            const EpisodeOutcome out =
                run_one(artifacts, seed_config, val, i, attacked, false);
            if (!attacked) {
                for (const sim::StepRecord& step : out.record.steps)
                    nominal_max_s = std::max(nominal_max_s, step.s);
            } else {
                const auto start = static_cast<std::size_t>(out.record.attack_start_step);
                double s10 = 0.0;
                for (const sim::StepRecord& step : out.record.steps)
                    if (step.t >= start && step.t < start + 10) s10 = std::max(s10, step.s);
                attacked_min_s10 = std::min(attacked_min_s10, s10);
            }
        }
    }

    icp::DetectorConfig tuned = seed_config;
    const double lower = 2.0 * nominal_max_s + 5.0;
    const double upper = 0.8 * attacked_min_s10;
    if (std::isfinite(attacked_min_s10) && lower < upper)
        tuned.tau = std::clamp(0.5 * attacked_min_s10, lower, upper);
    return tuned;
}

}  // namespace vaereg::experiment
