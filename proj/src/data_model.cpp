#include "drdg/data_model.hpp"

#include <cmath>

namespace drdg {

void DomainSpec::validate() const {
    if (tile_height <= 0 || tile_width <= 0)
        throw DataError("DomainSpec '" + name + "': tile dimensions must be positive");
    if (class_count < 2) throw DataError("DomainSpec '" + name + "': class_count must be >= 2");
    if (depth_min > depth_max)
        throw DataError("DomainSpec '" + name + "': depth_stats min > max");
    if (ground_resolution_cm <= 0)
        throw DataError("DomainSpec '" + name + "': ground resolution must be positive");
}

Tensor ImageTile::to_tensor() const {
    Tensor t(Shape{1, 3, h, w});
    t.v = data;
    return t;
}

ImageTile ImageTile::from_tensor(const Tensor& t) {
    if (t.shape.n != 1 || t.shape.c != 3) throw ShapeError("ImageTile::from_tensor: need (1,3,h,w), got " + t.shape.str());
    ImageTile tile;
    tile.h = t.shape.h;
    tile.w = t.shape.w;
    tile.data = t.v;
    return tile;
}

Tensor DepthTile::to_tensor() const {
    Tensor t(Shape{1, 1, h, w});
    t.v = data;
    return t;
}

DepthTile DepthTile::from_tensor(const Tensor& t) {
    if (t.shape.n != 1 || t.shape.c != 1) throw ShapeError("DepthTile::from_tensor: need (1,1,h,w), got " + t.shape.str());
    DepthTile tile;
    tile.h = t.shape.h;
    tile.w = t.shape.w;
    tile.data = t.v;
    return tile;
}

void validate_sample(const SampleTriple& s) {
    const int h = s.image.h, w = s.image.w;
    if (h <= 0 || w <= 0 || s.image.data.size() != static_cast<size_t>(3) * h * w)
        throw ShapeError("sample '" + s.tile_id + "': image buffer does not match its dimensions");
    for (double v : s.image.data)
        if (v < -1.0 || v > 1.0 || !std::isfinite(v))
            throw DataError("sample '" + s.tile_id + "': image value " + std::to_string(v) +
                            " outside [-1, 1]");
    if (s.depth) {
        if (s.depth->h != h || s.depth->w != w)
            throw ShapeError("sample '" + s.tile_id + "': depth is " + std::to_string(s.depth->h) + "x" +
                             std::to_string(s.depth->w) + " but image is " + std::to_string(h) + "x" +
                             std::to_string(w));
        for (double v : s.depth->data)
            if (v < 0.0 || v > 1.0 || !std::isfinite(v))
                throw DataError("sample '" + s.tile_id + "': depth value " + std::to_string(v) +
                                " outside [0, 1]");
    }
    if (s.label) {
        if (s.label->h != h || s.label->w != w)
            throw ShapeError("sample '" + s.tile_id + "': label is " + std::to_string(s.label->h) + "x" +
                             std::to_string(s.label->w) + " but image is " + std::to_string(h) + "x" +
                             std::to_string(w));
        const int c = s.domain ? s.domain->class_count : 1 << 30;
        for (int v : s.label->data)
            if (v < 0 || v >= c)
                throw DataError("sample '" + s.tile_id + "': label value " + std::to_string(v) +
                                " outside {0.." + std::to_string(c - 1) + "}");
    }
    if (s.domain) {
        s.domain->validate();
        if (h != s.domain->tile_height || w != s.domain->tile_width)
            throw ShapeError("sample '" + s.tile_id + "': image " + std::to_string(h) + "x" +
                             std::to_string(w) + " does not match domain tile geometry " +
                             std::to_string(s.domain->tile_height) + "x" +
                             std::to_string(s.domain->tile_width));
    }
}

ImageTile normalize_image(const std::vector<int>& raw_hwc, int h, int w, int bit_depth) {
    if (raw_hwc.size() != static_cast<size_t>(3) * h * w)
        throw ShapeError("normalize_image: buffer does not match dimensions");
    const int maxval = (1 << bit_depth) - 1;
    ImageTile tile;
    tile.h = h;
    tile.w = w;
    tile.data.resize(raw_hwc.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                const int raw = raw_hwc[(static_cast<size_t>(y) * w + x) * 3 + c];
                if (raw < 0 || raw > maxval)
                    throw DataError("normalize_image: raw value " + std::to_string(raw) +
                                    " outside [0, " + std::to_string(maxval) + "]");
                tile.at(c, y, x) = 2.0 * raw / maxval - 1.0;
            }
    return tile;
}

std::vector<int> denormalize_image(const ImageTile& tile, int bit_depth) {
    const int maxval = (1 << bit_depth) - 1;
    std::vector<int> raw(tile.data.size());
    for (int y = 0; y < tile.h; ++y)
        for (int x = 0; x < tile.w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = (tile.at(c, y, x) + 1.0) * 0.5 * maxval;
                int q = static_cast<int>(std::lround(v));
                raw[(static_cast<size_t>(y) * tile.w + x) * 3 + c] = std::clamp(q, 0, maxval);
            }
    return raw;
}

}  // namespace drdg
