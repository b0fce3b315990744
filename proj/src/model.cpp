#include "vaereg/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "vaereg/errors.hpp"
#include "vaereg/optimizer.hpp"
#include "vaereg/weights_io.hpp"

namespace vaereg::model {

void ModelConfig::validate() const {
    if (input_dim == 0 || latent_dim == 0) throw ValidationError("model: zero dimension");
    if (trunk_units == 0 || regressor_units == 0 || generator_units == 0 || decoder_units == 0)
        throw ValidationError("model: zero hidden width");
    if (!(label_max > label_min)) throw ValidationError("model: empty label range");
    if (!(label_prior_sigma > 0.0)) throw ValidationError("model: label prior sigma must be > 0");
}

void TrainingSchedule::validate() const {
    if (!(phase1.learning_rate > 0.0) || !(phase2.learning_rate > 0.0))
        throw ValidationError("schedule: learning rates must be > 0");
    if (batch_size == 0) throw ValidationError("schedule: batch size must be >= 1");
}

VaeRegressionModel make_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(mix_seed(seed, "model-init"));
    VaeRegressionModel m;
    m.config = config;
    m.trunk = {nn::make_dense(config.input_dim, config.trunk_units, nn::Activation::kElu, rng),
               nn::make_dense(config.trunk_units, config.trunk_units, nn::Activation::kElu, rng)};
    m.encoder_head = {
        nn::make_dense(config.trunk_units, 2 * config.latent_dim, nn::Activation::kIdentity, rng)};
    m.regressor_head = {
        nn::make_dense(config.trunk_units, config.regressor_units, nn::Activation::kElu, rng),
        nn::make_dense(config.regressor_units, 2, nn::Activation::kIdentity, rng)};
    m.latent_generator = {
        nn::make_dense(1, config.generator_units, nn::Activation::kElu, rng),
        nn::make_dense(config.generator_units, 2 * config.latent_dim, nn::Activation::kIdentity,
                       rng)};
    m.decoder = {
        nn::make_dense(config.latent_dim, config.decoder_units, nn::Activation::kElu, rng),
        nn::make_dense(config.decoder_units, config.decoder_units, nn::Activation::kElu, rng),
        nn::make_dense(config.decoder_units, config.input_dim, nn::Activation::kIdentity, rng)};
    return m;
}

namespace {

GaussianParams split_gaussian(const Tensor& out) {
    const std::size_t d = out.numel() / 2;
    Tensor mean = Tensor::zeros({d});
    Tensor log_var = Tensor::zeros({d});
    for (std::size_t i = 0; i < d; ++i) {
        mean.data[i] = out.data[i];
        log_var.data[i] = out.data[d + i];
    }
    return GaussianParams{std::move(mean), std::move(log_var)};
}

Tensor join_gaussian_grads(const Tensor& d_mean, const Tensor& d_log_var) {
    const std::size_t d = d_mean.numel();
    Tensor out = Tensor::zeros({2 * d});
    for (std::size_t i = 0; i < d; ++i) {
        out.data[i] = d_mean.data[i];
        out.data[d + i] = d_log_var.data[i];
    }
    return out;
}

void check_input(const VaeRegressionModel& m, const Tensor& x) {
    if (x.shape.size() != 1 || x.shape[0] != m.config.input_dim)
        throw ValidationError("model: input dimension mismatch");
}

}  // namespace

GaussianParams encode(const VaeRegressionModel& m, const Tensor& x) {
    check_input(m, x);
    return split_gaussian(nn::forward(m.encoder_head, nn::forward(m.trunk, x)));
}

GaussianParams regress(const VaeRegressionModel& m, const Tensor& x) {
    check_input(m, x);
    return split_gaussian(nn::forward(m.regressor_head, nn::forward(m.trunk, x)));
}

GaussianParams latent_prior(const VaeRegressionModel& m, double c_normalized) {
    return split_gaussian(nn::forward(m.latent_generator, Tensor::scalar(c_normalized)));
}

Tensor decode(const VaeRegressionModel& m, const Tensor& z) {
    if (z.numel() != m.config.latent_dim) throw ValidationError("decode: latent dim mismatch");
    return nn::forward(m.decoder, z);
}

double predict_distance(const VaeRegressionModel& m, const Tensor& x) {
    return m.denormalize_label(regress(m, x).mean.data[0]);
}

DistanceGradient predict_distance_with_gradient(const VaeRegressionModel& m, const Tensor& x) {
    check_input(m, x);
    const nn::ForwardTrace trunk_trace = nn::forward_trace(m.trunk, x);
    const nn::ForwardTrace reg_trace = nn::forward_trace(m.regressor_head, trunk_trace.output);

    // d(prediction)/d(head output) is the label range on the mean slot.
    Tensor upstream = Tensor::zeros({2});
    upstream.data[0] = m.config.label_range();
    const nn::Gradients reg_grads = nn::backward(m.regressor_head, reg_trace, upstream);
    nn::Gradients trunk_grads = nn::backward(m.trunk, trunk_trace, reg_grads.input_grad);

    return DistanceGradient{m.denormalize_label(reg_trace.output.data[0]),
                            std::move(trunk_grads.input_grad)};
}

namespace {

struct LossWork {
    LossBreakdown breakdown;
    // Forward traces, kept when gradients are requested.
    nn::ForwardTrace trunk_trace;
    nn::ForwardTrace enc_trace;
    nn::ForwardTrace reg_trace;
    nn::ForwardTrace gen_trace;
    nn::ForwardTrace dec_trace;
    GaussianParams q_z;
    GaussianParams q_c;
    GaussianParams p_z_given_c;
    Tensor z;
    double c_tilde = 0.0;
};

LossWork loss_forward(const VaeRegressionModel& m, const Tensor& x, double y_meters,
                      const Tensor& noise_z, const Tensor& noise_c) {
    check_input(m, x);
    if (noise_z.numel() != m.config.latent_dim)
        throw ValidationError("loss: noise_z dimension mismatch");
    if (noise_c.numel() != 1) throw ValidationError("loss: noise_c must be scalar");

    LossWork w;
    w.trunk_trace = nn::forward_trace(m.trunk, x);
    w.enc_trace = nn::forward_trace(m.encoder_head, w.trunk_trace.output);
    w.reg_trace = nn::forward_trace(m.regressor_head, w.trunk_trace.output);
    w.q_z = split_gaussian(w.enc_trace.output);
    w.q_c = split_gaussian(w.reg_trace.output);

    const double y_norm = m.normalize_label(y_meters);
    GaussianParams label_prior{Tensor::scalar(y_norm),
                               Tensor::scalar(2.0 * std::log(m.config.label_prior_sigma))};
    w.breakdown.label_kl = gaussian_kl(w.q_c, label_prior);

    w.z = reparameterize(w.q_z, noise_z);
    w.dec_trace = nn::forward_trace(m.decoder, w.z);
    double sq = 0.0;
    for (std::size_t d = 0; d < x.numel(); ++d) {
        const double diff = x.data[d] - w.dec_trace.output.data[d];
        sq += diff * diff;
    }
    w.breakdown.reconstruction = -0.5 * sq;

    w.c_tilde = reparameterize(w.q_c, noise_c).data[0];
    w.gen_trace = nn::forward_trace(m.latent_generator, Tensor::scalar(w.c_tilde));
    w.p_z_given_c = split_gaussian(w.gen_trace.output);
    w.breakdown.latent_kl = gaussian_kl(w.q_z, w.p_z_given_c);

    w.breakdown.total =
        -w.breakdown.label_kl + w.breakdown.reconstruction - w.breakdown.latent_kl;
    if (!std::isfinite(w.breakdown.total)) {
        const char* term = !std::isfinite(w.breakdown.label_kl)        ? "label_kl"
                           : !std::isfinite(w.breakdown.reconstruction) ? "reconstruction"
                                                                        : "latent_kl";
        throw NumericError(std::string("loss: non-finite ") + term + " term");
    }
    return w;
}

}  // namespace

LossBreakdown loss(const VaeRegressionModel& m, const Tensor& x, double y_meters,
                   const Tensor& noise_z, const Tensor& noise_c) {
    return loss_forward(m, x, y_meters, noise_z, noise_c).breakdown;
}

LossBreakdown loss(const VaeRegressionModel& m, const Tensor& x, double y_meters, Rng& rng) {
    Tensor noise_z = Tensor::zeros({m.config.latent_dim});
    for (double& v : noise_z.data) v = rng.normal();
    Tensor noise_c = Tensor::scalar(rng.normal());
    return loss(m, x, y_meters, noise_z, noise_c);
}

namespace {

// Accumulates d(-total)/d(params) into grads; -total = label_kl
// + 1/2||x - x_hat||^2 + latent_kl.
LossBreakdown loss_gradients_accumulate(const VaeRegressionModel& m, const Tensor& x,
                                        double y_meters, const Tensor& noise_z,
                                        const Tensor& noise_c, ModelGradients& grads) {
    LossWork w = loss_forward(m, x, y_meters, noise_z, noise_c);
    const std::size_t latent = m.config.latent_dim;

    // Reconstruction path: d/d x_hat = (x_hat - x), back through decoder to z.
    Tensor d_xhat = Tensor::zeros({m.config.input_dim});
    for (std::size_t d = 0; d < x.numel(); ++d)
        d_xhat.data[d] = w.dec_trace.output.data[d] - x.data[d];
    Tensor d_z;
    nn::backward_accumulate(m.decoder, w.dec_trace, d_xhat, grads.decoder, &d_z);

    // Latent KL: direct derivatives in both q(z|x) and p(z|c~).
    const GaussianKlGrads latent_kl_g = gaussian_kl_grads(w.q_z, w.p_z_given_c);

    // Generator backprop; its input gradient is d(-total)/d c~.
    Tensor d_c_tilde_t;
    nn::backward_accumulate(
        m.latent_generator, w.gen_trace,
        join_gaussian_grads(latent_kl_g.d_p_mean, latent_kl_g.d_p_log_variance),
        grads.latent_generator, &d_c_tilde_t);
    const double d_c_tilde = d_c_tilde_t.data[0];

    // Encoder head: KL path plus reconstruction path through z = mu + s*eps.
    Tensor d_mu_z = latent_kl_g.d_q_mean;
    Tensor d_lv_z = latent_kl_g.d_q_log_variance;
    for (std::size_t i = 0; i < latent; ++i) {
        d_mu_z.data[i] += d_z.data[i];
        d_lv_z.data[i] +=
            d_z.data[i] * 0.5 * std::exp(0.5 * w.q_z.log_variance.data[i]) * noise_z.data[i];
    }
    Tensor d_h_enc;
    nn::backward_accumulate(m.encoder_head, w.enc_trace, join_gaussian_grads(d_mu_z, d_lv_z),
                            grads.encoder_head, &d_h_enc);

    // Regressor head: label KL plus the c~ path into the generator.
    const double y_norm = m.normalize_label(y_meters);
    GaussianParams label_prior{Tensor::scalar(y_norm),
                               Tensor::scalar(2.0 * std::log(m.config.label_prior_sigma))};
    const GaussianKlGrads label_kl_g = gaussian_kl_grads(w.q_c, label_prior);
    Tensor d_mu_c = label_kl_g.d_q_mean;
    Tensor d_lv_c = label_kl_g.d_q_log_variance;
    d_mu_c.data[0] += d_c_tilde;
    d_lv_c.data[0] +=
        d_c_tilde * 0.5 * std::exp(0.5 * w.q_c.log_variance.data[0]) * noise_c.data[0];
    Tensor d_h_reg;
    nn::backward_accumulate(m.regressor_head, w.reg_trace, join_gaussian_grads(d_mu_c, d_lv_c),
                            grads.regressor_head, &d_h_reg);

    // Shared trunk collects both heads.
    for (std::size_t i = 0; i < d_h_enc.numel(); ++i) d_h_enc.data[i] += d_h_reg.data[i];
    nn::backward_accumulate(m.trunk, w.trunk_trace, d_h_enc, grads.trunk, nullptr);

    return w.breakdown;
}

}  // namespace

LossBreakdown loss_gradients(const VaeRegressionModel& m, const Tensor& x, double y_meters,
                             const Tensor& noise_z, const Tensor& noise_c,
                             ModelGradients& grads) {
    grads.trunk = nn::zero_gradients(m.trunk);
    grads.encoder_head = nn::zero_gradients(m.encoder_head);
    grads.regressor_head = nn::zero_gradients(m.regressor_head);
    grads.latent_generator = nn::zero_gradients(m.latent_generator);
    grads.decoder = nn::zero_gradients(m.decoder);
    return loss_gradients_accumulate(m, x, y_meters, noise_z, noise_c, grads);
}

namespace {

void collect_params(VaeRegressionModel& m, std::vector<Tensor*>& params) {
    for (nn::Network* net :
         {&m.trunk, &m.encoder_head, &m.regressor_head, &m.latent_generator, &m.decoder}) {
        for (nn::DenseLayer& layer : *net) {
            params.push_back(&layer.weights);
            params.push_back(&layer.bias);
        }
    }
}

void collect_grads(ModelGradients& g, std::vector<const Tensor*>& grads) {
    for (nn::Gradients* ng :
         {&g.trunk, &g.encoder_head, &g.regressor_head, &g.latent_generator, &g.decoder}) {
        for (std::size_t i = 0; i < ng->weight_grads.size(); ++i) {
            grads.push_back(&ng->weight_grads[i]);
            grads.push_back(&ng->bias_grads[i]);
        }
    }
}

void scale_gradients(ModelGradients& g, double factor) {
    for (nn::Gradients* ng :
         {&g.trunk, &g.encoder_head, &g.regressor_head, &g.latent_generator, &g.decoder}) {
        for (Tensor& t : ng->weight_grads)
            for (double& v : t.data) v *= factor;
        for (Tensor& t : ng->bias_grads)
            for (double& v : t.data) v *= factor;
    }
}

ModelGradients zero_model_gradients(const VaeRegressionModel& m) {
    ModelGradients g;
    g.trunk = nn::zero_gradients(m.trunk);
    g.encoder_head = nn::zero_gradients(m.encoder_head);
    g.regressor_head = nn::zero_gradients(m.regressor_head);
    g.latent_generator = nn::zero_gradients(m.latent_generator);
    g.decoder = nn::zero_gradients(m.decoder);
    return g;
}

}  // namespace

std::vector<EpochStats> train(VaeRegressionModel& m, const Dataset& proper_training_set,
                              const TrainingSchedule& schedule) {
    schedule.validate();
    if (proper_training_set.examples.empty())
        throw ValidationError("train: proper training set is empty");
    for (const LabeledExample& ex : proper_training_set.examples)
        if (ex.image.numel() != m.config.input_dim)
            throw ValidationError("train: example dimension mismatch");

    std::vector<Tensor*> params;
    collect_params(m, params);
    std::vector<const Tensor*> param_views(params.begin(), params.end());

    Rng shuffle_rng(mix_seed(schedule.seed, "train-shuffle"));
    Rng noise_rng(mix_seed(schedule.seed, "train-noise"));

    std::vector<EpochStats> history;
    const std::size_t count = proper_training_set.size();
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);

    std::size_t global_epoch = 0;
    const TrainingPhase phases[2] = {schedule.phase1, schedule.phase2};
    for (int phase_idx = 0; phase_idx < 2; ++phase_idx) {
        const TrainingPhase& phase = phases[phase_idx];
        if (phase.epochs == 0) continue;
        auto opt = nn::OptimizerState::init(param_views, phase.learning_rate);

        for (std::size_t e = 0; e < phase.epochs; ++e, ++global_epoch) {
            // Fisher-Yates with the dedicated shuffle stream.
            for (std::size_t i = count; i > 1; --i) {
                const auto j = static_cast<std::size_t>(shuffle_rng.uniform_int(0, i - 1));
                std::swap(order[i - 1], order[j]);
            }

            EpochStats stats;
            stats.epoch = global_epoch;
            stats.phase = phase_idx + 1;

            for (std::size_t start = 0; start < count; start += schedule.batch_size) {
                const std::size_t stop = std::min(count, start + schedule.batch_size);
                ModelGradients batch = zero_model_gradients(m);
                for (std::size_t i = start; i < stop; ++i) {
                    const LabeledExample& ex = proper_training_set.examples[order[i]];
                    Tensor noise_z = Tensor::zeros({m.config.latent_dim});
                    for (double& v : noise_z.data) v = noise_rng.normal();
                    Tensor noise_c = Tensor::scalar(noise_rng.normal());

                    LossBreakdown b;
                    try {
                        b = loss_gradients_accumulate(m, ex.image, ex.distance, noise_z,
                                                      noise_c, batch);
                    } catch (const NumericError& err) {
                        throw NumericError("train: diverged at epoch " +
                                           std::to_string(global_epoch) + ": " + err.what());
                    }
                    stats.mean_total += b.total;
                    stats.mean_label_kl += b.label_kl;
                    stats.mean_reconstruction += b.reconstruction;
                    stats.mean_latent_kl += b.latent_kl;
                }
                scale_gradients(batch, 1.0 / static_cast<double>(stop - start));
                std::vector<const Tensor*> grad_views;
                collect_grads(batch, grad_views);
                try {
                    nn::adam_step(params, grad_views, opt);
                } catch (const NumericError& err) {
                    throw NumericError("train: diverged at epoch " +
                                       std::to_string(global_epoch) + ": " + err.what());
                }
            }
            const double inv = 1.0 / static_cast<double>(count);
            stats.mean_total *= inv;
            stats.mean_label_kl *= inv;
            stats.mean_reconstruction *= inv;
            stats.mean_latent_kl *= inv;
            if (!std::isfinite(stats.mean_total))
                throw NumericError("train: diverged at epoch " + std::to_string(global_epoch));
            history.push_back(stats);
        }
    }
    return history;
}

std::vector<Tensor> sample_reconstructions(const VaeRegressionModel& m, const Tensor& x,
                                           std::size_t n, Rng& rng) {
    if (n < 1) throw ValidationError("sample_reconstructions: N must be >= 1");
    const GaussianParams q_z = encode(m, x);
    std::vector<Tensor> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        Tensor noise = Tensor::zeros({m.config.latent_dim});
        for (double& v : noise.data) v = rng.normal();
        Tensor x_hat = decode(m, reparameterize(q_z, noise));
        for (double& v : x_hat.data) v = std::clamp(v, 0.0, 1.0);
        out.push_back(std::move(x_hat));
    }
    return out;
}

std::vector<LatentRow> export_latent(const VaeRegressionModel& m, const Dataset& dataset) {
    if (dataset.examples.empty()) throw ValidationError("export_latent: empty dataset");
    std::vector<LatentRow> rows;
    rows.reserve(dataset.size());
    for (const LabeledExample& ex : dataset.examples) {
        const nn::ForwardTrace trunk_trace = nn::forward_trace(m.trunk, ex.image);
        const GaussianParams q_z =
            split_gaussian(nn::forward(m.encoder_head, trunk_trace.output));
        const GaussianParams q_c =
            split_gaussian(nn::forward(m.regressor_head, trunk_trace.output));
        LatentRow row;
        row.z_mean = q_z.mean.data;
        row.y_true = ex.distance;
        row.y_pred = m.denormalize_label(q_c.mean.data[0]);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_latent_csv(const std::string& path, const std::vector<LatentRow>& rows,
                      std::size_t latent_dim) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path);
    for (std::size_t i = 0; i < latent_dim; ++i) out << "z" << i << ",";
    out << "y_true,y_pred\n";
    char buf[64];
    for (const LatentRow& row : rows) {
        for (const double z : row.z_mean) {
            std::snprintf(buf, sizeof buf, "%.17g,", z);
            out << buf;
        }
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", row.y_true, row.y_pred);
        out << buf;
    }
    if (!out) throw IoError("write failed: " + path);
}

namespace {

constexpr double kModelFormatVersion = 1.0;

void append_network(NamedTensors& tensors, const std::string& prefix, const nn::Network& net) {
    for (std::size_t i = 0; i < net.size(); ++i) {
        tensors.emplace_back(prefix + "." + std::to_string(i) + ".weight", net[i].weights);
        tensors.emplace_back(prefix + "." + std::to_string(i) + ".bias", net[i].bias);
    }
}

void load_network(const NamedTensors& tensors, const std::string& prefix, nn::Network& net,
                  const std::string& path) {
    for (std::size_t i = 0; i < net.size(); ++i) {
        const std::string wname = prefix + "." + std::to_string(i) + ".weight";
        const std::string bname = prefix + "." + std::to_string(i) + ".bias";
        bool got_w = false;
        bool got_b = false;
        for (const auto& [name, t] : tensors) {
            if (name == wname) {
                if (!t.same_shape(net[i].weights))
                    throw IoError("weight shape mismatch for " + wname + " in " + path);
                net[i].weights = t;
                got_w = true;
            } else if (name == bname) {
                if (!t.same_shape(net[i].bias))
                    throw IoError("bias shape mismatch for " + bname + " in " + path);
                net[i].bias = t;
                got_b = true;
            }
        }
        if (!got_w || !got_b) throw IoError("missing tensor " + wname + " in " + path);
    }
}

}  // namespace

void save_model(const std::string& path, const VaeRegressionModel& m) {
    NamedTensors tensors;
    Tensor meta = Tensor::zeros({10});
    meta.data = {kModelFormatVersion,
                 static_cast<double>(m.config.input_dim),
                 static_cast<double>(m.config.latent_dim),
                 static_cast<double>(m.config.trunk_units),
                 static_cast<double>(m.config.regressor_units),
                 static_cast<double>(m.config.generator_units),
                 static_cast<double>(m.config.decoder_units),
                 m.config.label_min,
                 m.config.label_max,
                 m.config.label_prior_sigma};
    tensors.emplace_back("meta", std::move(meta));
    append_network(tensors, "trunk", m.trunk);
    append_network(tensors, "encoder_head", m.encoder_head);
    append_network(tensors, "regressor_head", m.regressor_head);
    append_network(tensors, "latent_generator", m.latent_generator);
    append_network(tensors, "decoder", m.decoder);
    save_tensors(path, tensors);
}

VaeRegressionModel load_model(const std::string& path) {
    const NamedTensors tensors = load_tensors(path);
    const Tensor* meta = nullptr;
    for (const auto& [name, t] : tensors)
        if (name == "meta") meta = &t;
    if (!meta || meta->numel() != 10) throw IoError("model file missing meta tensor: " + path);
    if (meta->data[0] != kModelFormatVersion)
        throw IoError("unsupported model format version in: " + path);

    ModelConfig config;
    config.input_dim = static_cast<std::size_t>(meta->data[1]);
    config.latent_dim = static_cast<std::size_t>(meta->data[2]);
    config.trunk_units = static_cast<std::size_t>(meta->data[3]);
    config.regressor_units = static_cast<std::size_t>(meta->data[4]);
    config.generator_units = static_cast<std::size_t>(meta->data[5]);
    config.decoder_units = static_cast<std::size_t>(meta->data[6]);
    config.label_min = meta->data[7];
    config.label_max = meta->data[8];
    config.label_prior_sigma = meta->data[9];

    VaeRegressionModel m = make_model(config, 0);
    load_network(tensors, "trunk", m.trunk, path);
    load_network(tensors, "encoder_head", m.encoder_head, path);
    load_network(tensors, "regressor_head", m.regressor_head, path);
    load_network(tensors, "latent_generator", m.latent_generator, path);
    load_network(tensors, "decoder", m.decoder, path);
    return m;
}

}  // namespace vaereg::model
