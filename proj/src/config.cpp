#include "vaereg/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "vaereg/errors.hpp"

namespace vaereg::config {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
    for (const auto& [key, _] : obj.items())
        if (!known.contains(key))
            throw ValidationError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
    if (dataset.count < 1) throw ValidationError("config: dataset.count must be >= 1");
    if (dataset.image_side < 8) throw ValidationError("config: dataset.image_side must be >= 8");
    if (!(dataset.label_max > dataset.label_min))
        throw ValidationError("config: empty label range");
    if (dataset.nuisance.noise_min > dataset.nuisance.noise_max ||
        dataset.nuisance.noise_min < 0.0 || dataset.nuisance.noise_max > 1.0)
        throw ValidationError("config: bad noise range");
    if (dataset.nuisance.brightness_min > dataset.nuisance.brightness_max ||
        dataset.nuisance.brightness_min < 0.5 || dataset.nuisance.brightness_max > 1.0)
        throw ValidationError("config: bad brightness range");
    if (split_proper == 0 || split_proper >= dataset.count)
        throw ValidationError("config: need 0 < split_proper < dataset.count");
    model::ModelConfig m = model;
    m.input_dim = dataset.image_side * dataset.image_side;
    m.label_min = dataset.label_min;
    m.label_max = dataset.label_max;
    m.validate();
    schedule.validate();
    detector.validate();
    for (const icp::DetectorConfig& row : detector_rows) row.validate();
    attack.validate();
    episodes.base.validate();
    if (episodes.count < 1 && episodes.validation_episodes < 1)
        throw ValidationError("config: no episodes configured");
}

RunConfig default_config() { return RunConfig{}; }

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config: " + path + ": " + e.what());
    }

    RunConfig cfg;
    try {
        reject_unknown(root,
                       {"master_seed", "out_dir", "dataset", "split", "model", "train",
                        "detector", "detector_rows", "attack", "episodes"},
                       "top level");
        read(root, "master_seed", cfg.master_seed);
        read(root, "out_dir", cfg.out_dir);

        if (root.contains("dataset")) {
            const json& d = root.at("dataset");
            reject_unknown(d,
                           {"count", "label_min", "label_max", "image_side", "noise_min",
                            "noise_max", "brightness_min", "brightness_max"},
                           "dataset");
            read(d, "count", cfg.dataset.count);
            read(d, "label_min", cfg.dataset.label_min);
            read(d, "label_max", cfg.dataset.label_max);
            read(d, "image_side", cfg.dataset.image_side);
            read(d, "noise_min", cfg.dataset.nuisance.noise_min);
            read(d, "noise_max", cfg.dataset.nuisance.noise_max);
            read(d, "brightness_min", cfg.dataset.nuisance.brightness_min);
            read(d, "brightness_max", cfg.dataset.nuisance.brightness_max);
        }
        if (root.contains("split")) {
            const json& s = root.at("split");
            reject_unknown(s, {"proper"}, "split");
            read(s, "proper", cfg.split_proper);
        }
        if (root.contains("model")) {
            const json& m = root.at("model");
            reject_unknown(m,
                           {"latent_dim", "trunk_units", "regressor_units", "generator_units",
                            "decoder_units", "label_prior_sigma"},
                           "model");
            read(m, "latent_dim", cfg.model.latent_dim);
            read(m, "trunk_units", cfg.model.trunk_units);
            read(m, "regressor_units", cfg.model.regressor_units);
            read(m, "generator_units", cfg.model.generator_units);
            read(m, "decoder_units", cfg.model.decoder_units);
            read(m, "label_prior_sigma", cfg.model.label_prior_sigma);
        }
        if (root.contains("train")) {
            const json& t = root.at("train");
            reject_unknown(t,
                           {"phase1_lr", "phase1_epochs", "phase2_lr", "phase2_epochs",
                            "batch_size"},
                           "train");
            read(t, "phase1_lr", cfg.schedule.phase1.learning_rate);
            read(t, "phase1_epochs", cfg.schedule.phase1.epochs);
            read(t, "phase2_lr", cfg.schedule.phase2.learning_rate);
            read(t, "phase2_epochs", cfg.schedule.phase2.epochs);
            read(t, "batch_size", cfg.schedule.batch_size);
        }
        const auto read_detector = [&](const json& d, const char* where) {
            icp::DetectorConfig out = cfg.detector;
            reject_unknown(d, {"n", "delta", "tau", "p_floor", "quadrature_nodes"}, where);
            read(d, "n", out.sample_count);
            read(d, "delta", out.delta);
            read(d, "tau", out.tau);
            read(d, "p_floor", out.p_floor);
            read(d, "quadrature_nodes", out.quadrature_nodes);
            return out;
        };
        if (root.contains("detector"))
            cfg.detector = read_detector(root.at("detector"), "detector");
        if (root.contains("detector_rows"))
            for (const json& row : root.at("detector_rows"))
                cfg.detector_rows.push_back(read_detector(row, "detector_rows"));
        if (root.contains("attack")) {
            const json& a = root.at("attack");
            reject_unknown(a, {"fgsm_epsilon", "y_target", "iterations", "start_step"},
                           "attack");
            read(a, "fgsm_epsilon", cfg.attack.fgsm_epsilon);
            read(a, "y_target", cfg.attack.y_target);
            read(a, "iterations", cfg.attack.iterations);
            read(a, "start_step", cfg.attack.start_step);
        }
        if (root.contains("episodes")) {
            const json& e = root.at("episodes");
            reject_unknown(e,
                           {"count", "validation_episodes", "tune", "stop_on_first_alarm",
                            "threads", "max_steps", "d0", "dt", "l_min", "l_max", "a_max"},
                           "episodes");
            read(e, "count", cfg.episodes.count);
            read(e, "validation_episodes", cfg.episodes.validation_episodes);
            read(e, "tune", cfg.episodes.tune);
            read(e, "stop_on_first_alarm", cfg.episodes.stop_on_first_alarm);
            read(e, "threads", cfg.episodes.threads);
            read(e, "max_steps", cfg.episodes.base.max_steps);
            read(e, "d0", cfg.episodes.base.d0);
            read(e, "dt", cfg.episodes.base.dt);
            read(e, "l_min", cfg.episodes.base.control.l_min);
            read(e, "l_max", cfg.episodes.base.control.l_max);
            read(e, "a_max", cfg.episodes.base.control.a_max);
        }
    } catch (const json::exception& e) {
        throw ValidationError("config: " + path + ": " + e.what());
    }

    // Fields derived from other sections.
    cfg.model.input_dim = cfg.dataset.image_side * cfg.dataset.image_side;
    cfg.model.label_min = cfg.dataset.label_min;
    cfg.model.label_max = cfg.dataset.label_max;
    cfg.episodes.base.nuisance.image_side = cfg.dataset.image_side;

    cfg.validate();
    return cfg;
}

void write_config_echo(const std::string& path, const RunConfig& cfg) {
    json root;
    root["master_seed"] = cfg.master_seed;
    root["out_dir"] = cfg.out_dir;
    root["dataset"] = {{"count", cfg.dataset.count},
                       {"label_min", cfg.dataset.label_min},
                       {"label_max", cfg.dataset.label_max},
                       {"image_side", cfg.dataset.image_side},
                       {"noise_min", cfg.dataset.nuisance.noise_min},
                       {"noise_max", cfg.dataset.nuisance.noise_max},
                       {"brightness_min", cfg.dataset.nuisance.brightness_min},
                       {"brightness_max", cfg.dataset.nuisance.brightness_max}};
    root["split"] = {{"proper", cfg.split_proper}};
    root["model"] = {{"latent_dim", cfg.model.latent_dim},
                     {"trunk_units", cfg.model.trunk_units},
                     {"regressor_units", cfg.model.regressor_units},
                     {"generator_units", cfg.model.generator_units},
                     {"decoder_units", cfg.model.decoder_units},
                     {"label_prior_sigma", cfg.model.label_prior_sigma}};
    root["train"] = {{"phase1_lr", cfg.schedule.phase1.learning_rate},
                     {"phase1_epochs", cfg.schedule.phase1.epochs},
                     {"phase2_lr", cfg.schedule.phase2.learning_rate},
                     {"phase2_epochs", cfg.schedule.phase2.epochs},
                     {"batch_size", cfg.schedule.batch_size}};
    root["detector"] = {{"n", cfg.detector.sample_count},
                        {"delta", cfg.detector.delta},
                        {"tau", cfg.detector.tau},
                        {"p_floor", cfg.detector.p_floor},
                        {"quadrature_nodes", cfg.detector.quadrature_nodes}};
    root["attack"] = {{"fgsm_epsilon", cfg.attack.fgsm_epsilon},
                      {"y_target", cfg.attack.y_target},
                      {"iterations", cfg.attack.iterations},
                      {"start_step", cfg.attack.start_step}};
    root["episodes"] = {{"count", cfg.episodes.count},
                        {"validation_episodes", cfg.episodes.validation_episodes},
                        {"tune", cfg.episodes.tune},
                        {"stop_on_first_alarm", cfg.episodes.stop_on_first_alarm},
                        {"threads", cfg.episodes.threads},
                        {"max_steps", cfg.episodes.base.max_steps},
                        {"d0", cfg.episodes.base.d0},
                        {"dt", cfg.episodes.base.dt},
                        {"l_min", cfg.episodes.base.control.l_min},
                        {"l_max", cfg.episodes.base.control.l_max},
                        {"a_max", cfg.episodes.base.control.a_max}};

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path);
    out << root.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace vaereg::config
