#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vaereg/dataset.hpp"
#include "vaereg/gaussian.hpp"
#include "vaereg/nn.hpp"
#include "vaereg/rng.hpp"
#include "vaereg/tensor.hpp"

namespace vaereg::model {

struct ModelConfig {
    std::size_t input_dim = 1024;
    std::size_t latent_dim = 6;
    std::size_t trunk_units = 64;
    std::size_t regressor_units = 32;
    std::size_t generator_units = 32;
    std::size_t decoder_units = 128;
    double label_min = 2.0;
    double label_max = 110.0;
    // sigma of the ground-truth label prior, as a fraction of the label range
    double label_prior_sigma = 0.02;

    double label_range() const { return label_max - label_min; }
    void validate() const;
};

// Encoder/regressor share the trunk; the latent generator conditions the
// latent prior on the (normalized) regression target; the decoder maps latent
// codes back to images. Gaussian heads emit (mean, log-variance) pairs.
struct VaeRegressionModel {
    ModelConfig config;
    nn::Network trunk;             // x -> features
    nn::Network encoder_head;      // features -> 2*latent_dim
    nn::Network regressor_head;    // features -> 2 (scalar Gaussian)
    nn::Network latent_generator;  // normalized c -> 2*latent_dim
    nn::Network decoder;           // latent -> input_dim

    double normalize_label(double y) const {
        return (y - config.label_min) / config.label_range();
    }
    double denormalize_label(double c) const {
        return config.label_min + c * config.label_range();
    }
};

VaeRegressionModel make_model(const ModelConfig& config, std::uint64_t seed);

GaussianParams encode(const VaeRegressionModel& m, const Tensor& x);
GaussianParams regress(const VaeRegressionModel& m, const Tensor& x);  // normalized units
GaussianParams latent_prior(const VaeRegressionModel& m, double c_normalized);
Tensor decode(const VaeRegressionModel& m, const Tensor& z);  // raw, unclamped

double predict_distance(const VaeRegressionModel& m, const Tensor& x);  // meters

// d predict_distance / d x, along with the prediction itself.
struct DistanceGradient {
    double prediction;
    Tensor input_grad;
};
DistanceGradient predict_distance_with_gradient(const VaeRegressionModel& m, const Tensor& x);

// Loss terms follow the sign convention total = -label_kl + reconstruction
// - latent_kl with reconstruction = -1/2 ||x - x_hat||^2; training maximizes
// total (descends on -total).
struct LossBreakdown {
    double total = 0.0;
    double label_kl = 0.0;
    double reconstruction = 0.0;
    double latent_kl = 0.0;
};

// Single-sample reparameterized loss with caller-supplied noise; noise_z has
// latent_dim entries, noise_c is scalar.
LossBreakdown loss(const VaeRegressionModel& m, const Tensor& x, double y_meters,
                   const Tensor& noise_z, const Tensor& noise_c);
LossBreakdown loss(const VaeRegressionModel& m, const Tensor& x, double y_meters, Rng& rng);

struct ModelGradients {
    nn::Gradients trunk;
    nn::Gradients encoder_head;
    nn::Gradients regressor_head;
    nn::Gradients latent_generator;
    nn::Gradients decoder;
};

// Gradients of -total (the minimized objective) for every parameter group.
LossBreakdown loss_gradients(const VaeRegressionModel& m, const Tensor& x, double y_meters,
                             const Tensor& noise_z, const Tensor& noise_c,
                             ModelGradients& grads);

struct TrainingPhase {
    double learning_rate = 1e-3;
    std::size_t epochs = 0;
};

struct TrainingSchedule {
    TrainingPhase phase1{1e-3, 60};
    TrainingPhase phase2{1e-4, 25};
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;  // global index, phase1 then phase2
    int phase = 1;
    double mean_total = 0.0;
    double mean_label_kl = 0.0;
    double mean_reconstruction = 0.0;
    double mean_latent_kl = 0.0;
};

// Two-phase minibatch Adam over the proper training set. Deterministic given
// the schedule seed. Throws NumericError (with the epoch index) if the loss
// goes non-finite.
std::vector<EpochStats> train(VaeRegressionModel& m, const Dataset& proper_training_set,
                              const TrainingSchedule& schedule);

// N decodes of independent posterior draws, clamped to [0,1].
std::vector<Tensor> sample_reconstructions(const VaeRegressionModel& m, const Tensor& x,
                                           std::size_t n, Rng& rng);

struct LatentRow {
    std::vector<double> z_mean;
    double y_true = 0.0;
    double y_pred = 0.0;
};

// One row per example: posterior latent mean, true and predicted distance.
std::vector<LatentRow> export_latent(const VaeRegressionModel& m, const Dataset& dataset);
void write_latent_csv(const std::string& path, const std::vector<LatentRow>& rows,
                      std::size_t latent_dim);

void save_model(const std::string& path, const VaeRegressionModel& m);
VaeRegressionModel load_model(const std::string& path);

}  // namespace vaereg::model
