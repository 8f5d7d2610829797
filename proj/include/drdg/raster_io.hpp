#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "drdg/data_model.hpp"

// Lossless raster codecs: binary PPM (8-bit RGB), PGM (8-bit single band)
// and PFM (32-bit float single band, bottom-up scanlines).

namespace drdg {

struct Rgb8Raster {
    int h = 0, w = 0;
    std::vector<uint8_t> data;  // HWC interleaved

    uint8_t at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * w + x) * 3 + c]; }
    uint8_t& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * w + x) * 3 + c]; }
};

struct Gray8Raster {
    int h = 0, w = 0;
    std::vector<uint8_t> data;
};

struct FloatRaster {
    int h = 0, w = 0;
    std::vector<float> data;

    float at(int y, int x) const { return data[static_cast<size_t>(y) * w + x]; }
    float& at(int y, int x) { return data[static_cast<size_t>(y) * w + x]; }
};

void write_ppm(const std::filesystem::path& path, const Rgb8Raster& img);
Rgb8Raster read_ppm(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const Gray8Raster& img);
Gray8Raster read_pgm(const std::filesystem::path& path);

void write_pfm(const std::filesystem::path& path, const FloatRaster& img);
FloatRaster read_pfm(const std::filesystem::path& path);

// Tile adapters. Images are [-1,1] <-> 8 bit, depth is stored as float32.
ImageTile read_image_tile(const std::filesystem::path& path);
void write_image_tile(const std::filesystem::path& path, const ImageTile& tile);
DepthTile read_depth_tile(const std::filesystem::path& path);
void write_depth_tile(const std::filesystem::path& path, const DepthTile& tile);
LabelTile read_label_tile(const std::filesystem::path& path);
void write_label_tile(const std::filesystem::path& path, const LabelTile& tile);

}  // namespace drdg
