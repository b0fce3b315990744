#include "vaereg/sim.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vaereg/errors.hpp"

namespace vaereg::sim {

void SceneParams::validate() const {
    if (image_side < 8) throw ValidationError("scene: image_side must be >= 8");
    if (noise_level < 0.0 || noise_level > 1.0)
        throw ValidationError("scene: noise_level must lie in [0,1]");
    if (brightness < 0.5 || brightness > 1.0)
        throw ValidationError("scene: brightness must lie in [0.5, 1.0]");
}

void EpisodeConfig::validate() const {
    nuisance.validate();
    if (!(d0 > control.l_max)) throw ValidationError("episode: d0 must exceed l_max");
    if (!(dt > 0.0)) throw ValidationError("episode: dt must be > 0");
    if (v0 < 0.0) throw ValidationError("episode: v0 must be >= 0");
    if (max_steps == 0) throw ValidationError("episode: max_steps must be >= 1");
    if (attack) attack->validate();
}

Tensor render_scene(double distance, const SceneParams& params) {
    params.validate();
    if (!(distance >= 0.0) || distance > 120.0)
        throw ValidationError("render_scene: distance out of [0, 120]");

    const std::size_t side = params.image_side;
    const double ratio =
        distance > 0.0
            ? std::clamp(kPinholeScale / distance, 0.05, 0.95)
            : 0.95;
    const auto obstacle_px =
        static_cast<std::size_t>(std::llround(static_cast<double>(side) * ratio));

    // Apparent size saturates once the ratio clamp binds (d below k/0.95),
    // so inside 2k the obstacle also dims proportionally: frames stay a
    // strictly monotone function of distance all the way to contact, and the
    // largest apparent sizes are not all rendered at full brightness.
    const double intensity =
        params.brightness * std::min(1.0, distance / (2.0 * kPinholeScale));

    Tensor img = Tensor::zeros({side * side});
    const std::size_t start = (side - obstacle_px) / 2;
    for (std::size_t r = start; r < start + obstacle_px; ++r)
        for (std::size_t c = start; c < start + obstacle_px; ++c)
            img.data[r * side + c] = intensity;

    if (params.noise_level > 0.0) {
        // Smooth zero-mean field, three sinusoidal components with random
        // direction/phase/weight; per-pixel amplitude capped at 0.1x level.
        Rng noise_rng(mix_seed(params.seed, std::bit_cast<std::uint64_t>(distance)));
        const double amp = params.noise_level * 0.1;
        double weight[3], freq_r[3], freq_c[3], phase[3];
        double weight_sum = 0.0;
        for (int j = 0; j < 3; ++j) {
            weight[j] = noise_rng.uniform();
            weight_sum += weight[j];
            freq_r[j] = noise_rng.uniform(0.02, 0.18);
            freq_c[j] = noise_rng.uniform(0.02, 0.18);
            phase[j] = noise_rng.uniform(0.0, 6.283185307179586);
        }
        for (int j = 0; j < 3; ++j) weight[j] = amp * weight[j] / weight_sum;
        for (std::size_t r = 0; r < side; ++r)
            for (std::size_t c = 0; c < side; ++c) {
                double n = 0.0;
                for (int j = 0; j < 3; ++j)
                    n += weight[j] *
                         std::sin(6.283185307179586 *
                                      (freq_r[j] * static_cast<double>(r) +
                                       freq_c[j] * static_cast<double>(c)) +
                                  phase[j]);
                img.data[r * side + c] += n;
            }
    }
    for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
    return img;
}

VehicleState step_vehicle(const VehicleState& s, double brake_decel, double dt) {
    if (brake_decel < 0.0 || brake_decel > 8.0)
        throw ValidationError("step_vehicle: brake out of [0, 8] m/s^2");
    VehicleState next;
    next.velocity = std::max(0.0, s.velocity - brake_decel * dt);
    next.distance = std::max(0.0, s.distance - s.velocity * dt);
    next.time_step = s.time_step + 1;
    return next;
}

double controller(double d_est, double velocity, const ControlParams& params) {
    const double gap = std::max(d_est - params.l_target(), 0.1);
    const double required = velocity * velocity / (2.0 * gap);
    return std::clamp(required, 0.0, params.a_max);
}

Dataset generate_dataset(std::size_t count, double label_min, double label_max,
                         std::size_t image_side, const NuisanceRanges& nuisance,
                         std::uint64_t seed) {
    if (count < 1) throw ValidationError("generate_dataset: count must be >= 1");
    if (!(label_max > label_min) || label_min < 0.0)
        throw ValidationError("generate_dataset: bad label range");

    Rng rng(mix_seed(seed, "dataset"));
    Dataset dataset;
    dataset.image_side = image_side;
    dataset.examples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double d = rng.uniform(label_min, label_max);
        SceneParams scene;
        scene.image_side = image_side;
        scene.noise_level = rng.uniform(nuisance.noise_min, nuisance.noise_max);
        scene.brightness = rng.uniform(nuisance.brightness_min, nuisance.brightness_max);
        scene.seed = rng.next_u64();
        dataset.examples.push_back({render_scene(d, scene), d});
    }
    return dataset;
}

const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::kStoppedInZone: return "STOPPED_IN_ZONE";
        case Outcome::kStoppedShort: return "STOPPED_SHORT";
        case Outcome::kCollision: return "COLLISION";
    }
    return "UNKNOWN";
}

EpisodeConfig sample_episode_config(const EpisodeConfig& base, const NuisanceRanges& nuisance,
                                    std::uint64_t episode_seed, bool attacked) {
    EpisodeConfig cfg = base;
    Rng rng(mix_seed(episode_seed, "episode-setup"));
    cfg.v0 = rng.uniform(25.0, 27.8);
    cfg.frame_nuisance = nuisance;
    cfg.nuisance.noise_level = rng.uniform(nuisance.noise_min, nuisance.noise_max);
    cfg.nuisance.brightness = rng.uniform(nuisance.brightness_min, nuisance.brightness_max);
    cfg.nuisance.seed = rng.next_u64();
    if (attacked) {
        if (!cfg.attack) cfg.attack = attack::AttackConfig{};
        cfg.attack->start_step = static_cast<std::size_t>(rng.uniform_int(20, 60));
    } else {
        cfg.attack.reset();
    }
    cfg.detector_seed = mix_seed(episode_seed, "episode-detector");
    return cfg;
}

EpisodeRecord run_episode(const EpisodeConfig& cfg, const pipeline::OfflineArtifacts& artifacts,
                          const icp::DetectorConfig& detector) {
    cfg.validate();
    EpisodeRecord record;
    record.attack_start_step =
        cfg.attack ? static_cast<std::int64_t>(cfg.attack->start_step) : -1;

    icp::DetectorState det = pipeline::make_detector_state(detector, artifacts.calibration);
    Rng detector_rng(cfg.detector_seed);
    Rng frame_rng(mix_seed(cfg.nuisance.seed, "frame-nuisance"));
    VehicleState vehicle{cfg.d0, cfg.v0, 0};

    // Terminal full-brake latch: once the estimated gap is within the
    // full-braking stopping envelope (plus margin), hold a_max until v = 0.
    // The quadratic law alone cannot zero the velocity in discrete time.
    // Hysteresis releases the latch if the gap estimate recovers.
    constexpr double kLatchMargin = 0.2;  // meters
    bool brake_latched = false;

    const auto clock_now = [] { return std::chrono::steady_clock::now(); };
    while (vehicle.time_step < cfg.max_steps) {
        SceneParams scene = cfg.nuisance;
        scene.noise_level =
            frame_rng.uniform(cfg.frame_nuisance.noise_min, cfg.frame_nuisance.noise_max);
        scene.brightness = frame_rng.uniform(cfg.frame_nuisance.brightness_min,
                                             cfg.frame_nuisance.brightness_max);
        scene.seed = frame_rng.next_u64();
        Tensor frame = render_scene(vehicle.distance, scene);
        if (cfg.attack && vehicle.time_step >= cfg.attack->start_step)
            frame = attack::fgsm(artifacts.trained_model, frame, *cfg.attack).x_adv;

        const auto t0 = clock_now();
        const pipeline::OnlineStepResult step =
            pipeline::online_step(frame, artifacts, det, detector_rng);
        record.detection_seconds_total +=
            std::chrono::duration<double>(clock_now() - t0).count();

        const double gap = step.predicted_distance - cfg.control.l_target();
        const double envelope =
            vehicle.velocity * vehicle.velocity / (2.0 * cfg.control.a_max);
        if (!brake_latched && vehicle.velocity > 0.0 && gap <= envelope + kLatchMargin)
            brake_latched = true;
        else if (brake_latched && gap > 2.0 * (envelope + kLatchMargin))
            brake_latched = false;
        const double brake = brake_latched
                                 ? cfg.control.a_max
                                 : controller(step.predicted_distance, vehicle.velocity,
                                              cfg.control);

        StepRecord row;
        row.t = vehicle.time_step;
        row.d_true = vehicle.distance;
        row.d_pred = step.predicted_distance;
        row.v = vehicle.velocity;
        row.brake = brake;
        row.p_values = step.p_values;
        row.log_m = step.log_m;
        row.s = step.s;
        row.alarm = step.anomaly;
        record.steps.push_back(std::move(row));

        if (step.anomaly && record.first_alarm_step < 0)
            record.first_alarm_step = static_cast<std::int64_t>(vehicle.time_step);
        if (cfg.stop_on_first_alarm && step.anomaly) break;

        vehicle = step_vehicle(vehicle, brake, cfg.dt);
        if (vehicle.distance <= 0.0 || vehicle.velocity <= 0.0) break;
    }

    record.final_distance = vehicle.distance;
    record.final_velocity = vehicle.velocity;
    if (vehicle.distance <= 0.0 && vehicle.velocity > 0.0) {
        record.outcome = Outcome::kCollision;
    } else if (vehicle.velocity <= 0.0 && vehicle.distance >= cfg.control.l_min &&
               vehicle.distance <= cfg.control.l_max) {
        record.outcome = Outcome::kStoppedInZone;
    } else {
        record.outcome = Outcome::kStoppedShort;
    }
    return record;
}

void write_episode_csv(const std::string& path, const EpisodeRecord& record,
                       std::size_t sample_count) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path);
    out << "t,d_true,d_pred,v,brake";
    for (std::size_t k = 1; k <= sample_count; ++k) out << ",p_" << k;
    out << ",log_m,s,alarm\n";
    char buf[64];
    for (const StepRecord& row : record.steps) {
        out << row.t;
        for (const double v : {row.d_true, row.d_pred, row.v, row.brake}) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            out << buf;
        }
        for (const double p : row.p_values) {
            std::snprintf(buf, sizeof buf, ",%.17g", p);
            out << buf;
        }
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%d\n", row.log_m, row.s,
                      row.alarm ? 1 : 0);
        out << buf;
    }
    if (!out) throw IoError("write failed: " + path);
}

EpisodeRecord read_episode_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty record file");

    std::size_t p_count = 0;
    {
        std::stringstream header(line);
        std::string col;
        while (std::getline(header, col, ','))
            if (col.rfind("p_", 0) == 0) ++p_count;
    }

    EpisodeRecord record;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<double> values;
        while (std::getline(ss, field, ',')) {
            char* end = nullptr;
            const double v = std::strtod(field.c_str(), &end);
            if (end == field.c_str())
                throw IoError(path + ":" + std::to_string(lineno) + ": bad field '" + field +
                              "'");
            values.push_back(v);
        }
        if (values.size() != 5 + p_count + 3)
            throw IoError(path + ":" + std::to_string(lineno) + ": wrong column count");
        StepRecord row;
        row.t = static_cast<std::size_t>(values[0]);
        row.d_true = values[1];
        row.d_pred = values[2];
        row.v = values[3];
        row.brake = values[4];
        row.p_values.assign(values.begin() + 5, values.begin() + 5 + p_count);
        row.log_m = values[5 + p_count];
        row.s = values[6 + p_count];
        row.alarm = values[7 + p_count] != 0.0;
        if (!record.steps.empty() && row.t <= record.steps.back().t)
            throw IoError(path + ":" + std::to_string(lineno) + ": steps out of order");
        if (row.alarm && record.first_alarm_step < 0)
            record.first_alarm_step = static_cast<std::int64_t>(row.t);
        record.steps.push_back(std::move(row));
    }
    return record;
}

void write_episode_summary(const std::string& path, const EpisodeRecord& record,
                           const EpisodeConfig& cfg) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path);
    char buf[128];
    out << "{\n";
    out << "  \"outcome\": \"" << outcome_name(record.outcome) << "\",\n";
    out << "  \"first_alarm_step\": " << record.first_alarm_step << ",\n";
    out << "  \"attack_start_step\": " << record.attack_start_step << ",\n";
    std::snprintf(buf, sizeof buf, "  \"final_distance_m\": %.6g,\n", record.final_distance);
    out << buf;
    std::snprintf(buf, sizeof buf, "  \"final_velocity_mps\": %.6g,\n", record.final_velocity);
    out << buf;
    out << "  \"steps\": " << record.steps.size() << ",\n";
    std::snprintf(buf, sizeof buf, "  \"config\": {\"d0\": %.6g, \"v0\": %.6g, \"dt\": %.6g, "
                                   "\"noise_level\": %.6g, \"brightness\": %.6g}\n",
                  cfg.d0, cfg.v0, cfg.dt, cfg.nuisance.noise_level, cfg.nuisance.brightness);
    out << buf;
    out << "}\n";
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace vaereg::sim
