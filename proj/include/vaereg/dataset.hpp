#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vaereg/tensor.hpp"

namespace vaereg {

struct LabeledExample {
    Tensor image;     // flattened grayscale, values in [0,1]
    double distance;  // meters
};

struct Dataset {
    std::vector<LabeledExample> examples;
    std::size_t image_side = 0;

    std::size_t size() const { return examples.size(); }
    std::size_t input_dim() const { return image_side * image_side; }
};

// Binary container (tensor format) holding "images" (count x dim) and
// "labels" (count), plus a sibling CSV label index next to it.
void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

}  // namespace vaereg
