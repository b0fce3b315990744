#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <vector>

#include "vaereg/attack.hpp"
#include "vaereg/gaussian.hpp"
#include "vaereg/icp.hpp"
#include "vaereg/model.hpp"
#include "vaereg/rng.hpp"
#include "vaereg/sim.hpp"
#include "vaereg/tensor.hpp"

namespace py = pybind11;
using namespace vaereg;

namespace {

Tensor to_tensor(const std::vector<double>& v) {
    return Tensor{{v.size()}, v};
}

GaussianParams to_gaussian(const std::vector<double>& mean, const std::vector<double>& log_var) {
    return GaussianParams{to_tensor(mean), to_tensor(log_var)};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "VAE-regression conformal adversarial detection core";

    m.def(
        "gaussian_kl",
        [](const std::vector<double>& q_mean, const std::vector<double>& q_log_var,
           const std::vector<double>& p_mean, const std::vector<double>& p_log_var) {
            return gaussian_kl(to_gaussian(q_mean, q_log_var), to_gaussian(p_mean, p_log_var));
        },
        py::arg("q_mean"), py::arg("q_log_var"), py::arg("p_mean"), py::arg("p_log_var"));

    m.def(
        "reparameterize",
        [](const std::vector<double>& mean, const std::vector<double>& log_var,
           const std::vector<double>& noise) {
            return reparameterize(to_gaussian(mean, log_var), to_tensor(noise)).data;
        },
        py::arg("mean"), py::arg("log_var"), py::arg("noise"));

    m.def(
        "nonconformity",
        [](const std::vector<double>& x, const std::vector<double>& x_hat) {
            return icp::nonconformity(to_tensor(x), to_tensor(x_hat));
        },
        py::arg("x"), py::arg("x_hat"));

    py::class_<icp::CalibrationSet>(m, "CalibrationSet")
        .def(py::init<std::vector<double>>(), py::arg("scores"))
        .def_property_readonly("count", &icp::CalibrationSet::count)
        .def_property_readonly("scores", &icp::CalibrationSet::scores)
        .def(
            "p_value",
            [](const icp::CalibrationSet& c, double alpha, double p_floor) {
                return p_floor > 0.0 ? icp::p_value(alpha, c, p_floor) : icp::p_value(alpha, c);
            },
            py::arg("alpha"), py::arg("p_floor") = 0.0);

    m.def(
        "log_martingale",
        [](const std::vector<double>& p_values, std::size_t nodes) {
            return icp::log_martingale(p_values, nodes).log_m;
        },
        py::arg("p_values"), py::arg("nodes") = 1001);

    m.def(
        "cusum_update",
        [](double s, double log_m, double delta) {
            icp::DetectorConfig cfg;
            cfg.delta = delta;
            return icp::cusum_update(icp::DetectorState{s, cfg}, icp::MartingaleLog{log_m}).s;
        },
        py::arg("s"), py::arg("log_m"), py::arg("delta"));

    m.def("threshold_detect", &icp::threshold_detect, py::arg("p"), py::arg("epsilon_thr"));

    m.def(
        "render_scene",
        [](double distance, std::size_t image_side, double noise_level, double brightness,
           std::uint64_t seed) {
            sim::SceneParams params{image_side, noise_level, brightness, seed};
            return sim::render_scene(distance, params).data;
        },
        py::arg("distance"), py::arg("image_side") = 16, py::arg("noise_level") = 0.0,
        py::arg("brightness") = 1.0, py::arg("seed") = 0);

    m.def(
        "step_vehicle",
        [](double distance, double velocity, std::size_t t, double brake, double dt) {
            const sim::VehicleState next =
                sim::step_vehicle(sim::VehicleState{distance, velocity, t}, brake, dt);
            return py::make_tuple(next.distance, next.velocity, next.time_step);
        },
        py::arg("distance"), py::arg("velocity"), py::arg("t"), py::arg("brake"),
        py::arg("dt") = 0.05);

    m.def(
        "controller",
        [](double d_est, double velocity, double l_min, double l_max, double a_max) {
            return sim::controller(d_est, velocity, sim::ControlParams{l_min, l_max, a_max});
        },
        py::arg("d_est"), py::arg("velocity"), py::arg("l_min") = 1.0, py::arg("l_max") = 3.0,
        py::arg("a_max") = 8.0);

    py::class_<model::VaeRegressionModel>(m, "Model")
        .def_property_readonly(
            "input_dim", [](const model::VaeRegressionModel& mdl) { return mdl.config.input_dim; })
        .def_property_readonly(
            "latent_dim",
            [](const model::VaeRegressionModel& mdl) { return mdl.config.latent_dim; })
        .def(
            "predict_distance",
            [](const model::VaeRegressionModel& mdl, const std::vector<double>& x) {
                return model::predict_distance(mdl, to_tensor(x));
            },
            py::arg("x"))
        .def(
            "sample_reconstructions",
            [](const model::VaeRegressionModel& mdl, const std::vector<double>& x, std::size_t n,
               std::uint64_t seed) {
                Rng rng(seed);
                std::vector<std::vector<double>> out;
                for (Tensor& t : model::sample_reconstructions(mdl, to_tensor(x), n, rng))
                    out.push_back(std::move(t.data));
                return out;
            },
            py::arg("x"), py::arg("n"), py::arg("seed"))
        .def(
            "loss",
            [](const model::VaeRegressionModel& mdl, const std::vector<double>& x, double y,
               std::uint64_t seed) {
                Rng rng(seed);
                const model::LossBreakdown b = model::loss(mdl, to_tensor(x), y, rng);
                return py::make_tuple(b.total, b.label_kl, b.reconstruction, b.latent_kl);
            },
            py::arg("x"), py::arg("y"), py::arg("seed"));

    m.def(
        "make_model",
        [](std::size_t input_dim, std::size_t latent_dim, std::size_t trunk_units,
           double label_min, double label_max, std::uint64_t seed) {
            model::ModelConfig cfg;
            cfg.input_dim = input_dim;
            cfg.latent_dim = latent_dim;
            cfg.trunk_units = trunk_units;
            cfg.label_min = label_min;
            cfg.label_max = label_max;
            return model::make_model(cfg, seed);
        },
        py::arg("input_dim"), py::arg("latent_dim") = 4, py::arg("trunk_units") = 64,
        py::arg("label_min") = 2.0, py::arg("label_max") = 110.0, py::arg("seed") = 0);

    m.def(
        "train_model",
        [](model::VaeRegressionModel& mdl, const std::vector<std::vector<double>>& images,
           const std::vector<double>& labels, double learning_rate, std::size_t epochs,
           std::size_t batch_size, std::uint64_t seed) {
            if (images.size() != labels.size())
                throw ValidationError("train_model: images/labels length mismatch");
            Dataset ds;
            ds.image_side = static_cast<std::size_t>(std::sqrt(double(mdl.config.input_dim)));
            for (std::size_t i = 0; i < images.size(); ++i)
                ds.examples.push_back({to_tensor(images[i]), labels[i]});
            model::TrainingSchedule schedule;
            schedule.phase1 = {learning_rate, epochs};
            schedule.phase2 = {learning_rate, 0};
            schedule.batch_size = batch_size;
            schedule.seed = seed;
            std::vector<double> totals;
            for (const model::EpochStats& s : model::train(mdl, ds, schedule))
                totals.push_back(s.mean_total);
            return totals;
        },
        py::arg("model"), py::arg("images"), py::arg("labels"), py::arg("learning_rate") = 1e-3,
        py::arg("epochs") = 5, py::arg("batch_size") = 16, py::arg("seed") = 0);

    m.def(
        "fgsm",
        [](const model::VaeRegressionModel& mdl, const std::vector<double>& x, double epsilon,
           double y_target, std::size_t iterations) {
            attack::AttackConfig cfg;
            cfg.fgsm_epsilon = epsilon;
            cfg.y_target = y_target;
            cfg.iterations = iterations;
            const attack::FgsmResult r = attack::fgsm(mdl, to_tensor(x), cfg);
            return py::make_tuple(r.x_adv.data, r.zero_gradient);
        },
        py::arg("model"), py::arg("x"), py::arg("epsilon") = 0.02, py::arg("y_target") = 110.0,
        py::arg("iterations") = 1);

    m.def("save_model", &model::save_model, py::arg("path"), py::arg("model"));
    m.def("load_model", &model::load_model, py::arg("path"));

    py::register_exception<ValidationError>(m, "ValidationError");
    py::register_exception<IoError>(m, "IoError");
    py::register_exception<NumericError>(m, "NumericError");
}
