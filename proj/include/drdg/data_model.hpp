#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "drdg/tensor.hpp"

namespace drdg {

// A domain's tile geometry, ground resolution and normalization statistics.
struct DomainSpec {
    std::string name;
    int tile_height = 512;
    int tile_width = 512;
    double ground_resolution_cm = 9.0;
    int class_count = 6;
    double depth_min = 0.0;
    double depth_max = 1.0;

    void validate() const;
};

// RGB tile, values in [-1, 1], stored CHW.
struct ImageTile {
    int h = 0, w = 0;
    std::vector<double> data;  // 3*h*w

    double& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * h + y) * w + x]; }
    double at(int c, int y, int x) const { return data[(static_cast<size_t>(c) * h + y) * w + x]; }

    Tensor to_tensor() const;
    static ImageTile from_tensor(const Tensor& t);  // expects (1,3,h,w)
};

// Normalized DSM tile, values in [0, 1].
struct DepthTile {
    int h = 0, w = 0;
    std::vector<double> data;  // h*w

    Tensor to_tensor() const;
    static DepthTile from_tensor(const Tensor& t);  // expects (1,1,h,w)
};

// Class-index tile, values in {0..C-1}.
struct LabelTile {
    int h = 0, w = 0;
    std::vector<int> data;

    int at(int y, int x) const { return data[static_cast<size_t>(y) * w + x]; }
};

struct SampleTriple {
    ImageTile image;
    std::optional<LabelTile> label;
    std::optional<DepthTile> depth;
    std::shared_ptr<const DomainSpec> domain;
    std::string tile_id;
};

// Throws ShapeError / DataError naming the offending field when an invariant fails.
void validate_sample(const SampleTriple& s);

// Linear map from [0, 2^bit_depth - 1] interleaved HWC samples to [-1, 1].
ImageTile normalize_image(const std::vector<int>& raw_hwc, int h, int w, int bit_depth);
std::vector<int> denormalize_image(const ImageTile& tile, int bit_depth);

}  // namespace drdg
