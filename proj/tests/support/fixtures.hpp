#pragma once

#include "vaereg/model.hpp"
#include "vaereg/pipeline.hpp"
#include "vaereg/sim.hpp"

namespace vaereg::testsupport {

struct SmallFixture {
    Dataset dataset;
    pipeline::OfflineArtifacts artifacts;
    model::ModelConfig model_config;
};

// A quickly trained small-scale setup shared by the episode-level tests.
// Built once per process.
inline const SmallFixture& small_fixture() {
    static const SmallFixture fixture = [] {
        const std::size_t image_side = 16;
        sim::NuisanceRanges nuisance;  // defaults: fixed noise, brightness band
        Dataset dataset =
            sim::generate_dataset(700, 2.0, 110.0, image_side, nuisance, 424242);

        model::ModelConfig mc;
        mc.input_dim = image_side * image_side;
        mc.latent_dim = 4;
        mc.trunk_units = 48;
        mc.regressor_units = 24;
        mc.generator_units = 24;
        mc.decoder_units = 48;
        mc.label_min = 2.0;
        mc.label_max = 110.0;

        model::TrainingSchedule schedule;
        schedule.phase1 = {2e-3, 30};
        schedule.phase2 = {2e-4, 5};
        schedule.batch_size = 32;
        schedule.seed = 99;

        pipeline::SplitSpec split{dataset.size(), 525, 17};
        pipeline::OfflineArtifacts artifacts =
            pipeline::offline(dataset, split, mc, schedule, 1234);
        return SmallFixture{std::move(dataset), std::move(artifacts), mc};
    }();
    return fixture;
}

}  // namespace vaereg::testsupport
