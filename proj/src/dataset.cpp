#include "vaereg/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "vaereg/errors.hpp"
#include "vaereg/weights_io.hpp"

namespace vaereg {

void save_dataset(const std::string& path, const Dataset& dataset) {
    if (dataset.examples.empty()) throw ValidationError("save_dataset: empty dataset");
    const std::size_t count = dataset.size();
    const std::size_t dim = dataset.input_dim();

    Tensor images = Tensor::zeros({count, dim});
    Tensor labels = Tensor::zeros({count});
    for (std::size_t i = 0; i < count; ++i) {
        const LabeledExample& ex = dataset.examples[i];
        if (ex.image.numel() != dim)
            throw ValidationError("save_dataset: example dimension mismatch");
        for (std::size_t d = 0; d < dim; ++d) images.at(i, d) = ex.image.data[d];
        labels.data[i] = ex.distance;
    }
    Tensor meta{{1}, {static_cast<double>(dataset.image_side)}};
    save_tensors(path, {{"meta.image_side", meta}, {"images", images}, {"labels", labels}});

    std::ofstream csv(path + ".labels.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot open for write: " + path + ".labels.csv");
    csv << "index,distance_m\n";
    char buf[64];
    for (std::size_t i = 0; i < count; ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, dataset.examples[i].distance);
        csv << buf;
    }
    if (!csv) throw IoError("write failed: " + path + ".labels.csv");
}

Dataset load_dataset(const std::string& path) {
    const NamedTensors tensors = load_tensors(path);
    const Tensor* images = nullptr;
    const Tensor* labels = nullptr;
    const Tensor* meta = nullptr;
    for (const auto& [name, t] : tensors) {
        if (name == "images") images = &t;
        if (name == "labels") labels = &t;
        if (name == "meta.image_side") meta = &t;
    }
    if (!images || !labels || !meta)
        throw IoError("dataset file missing images/labels/meta tensors: " + path);
    if (images->shape.size() != 2 || labels->shape.size() != 1 ||
        images->shape[0] != labels->shape[0])
        throw IoError("dataset tensors have inconsistent shapes: " + path);

    Dataset dataset;
    dataset.image_side = static_cast<std::size_t>(std::llround(meta->data[0]));
    if (dataset.image_side * dataset.image_side != images->shape[1])
        throw IoError("dataset image_side does not match image dimension: " + path);

    const std::size_t count = images->shape[0];
    const std::size_t dim = images->shape[1];
    dataset.examples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Tensor img = Tensor::zeros({dim});
        for (std::size_t d = 0; d < dim; ++d) img.data[d] = images->at(i, d);
        dataset.examples.push_back({std::move(img), labels->data[i]});
    }
    return dataset;
}

}  // namespace vaereg
