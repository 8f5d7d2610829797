#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "drdg/ingestion.hpp"

// Procedural two-domain aerial scenes: a ground plane with rectangular
// buildings, disk trees, road ribbons, low-vegetation patches and cars,
// painted from per-domain palettes, with a DSM of ground elevation plus
// per-object height. Deterministic in the seed.

namespace drdg {

// class indices, matching the evaluation table order
enum SynthClass : int {
    kClutter = 0,
    kImpervious = 1,
    kCar = 2,
    kTree = 3,
    kLowVeg = 4,
    kBuilding = 5,
};

struct SynthDomain {
    std::string name;
    int scene_px = 224;
    int tile_px = 112;
    double resolution_cm = 5.0;
    std::vector<Rgb> palette;  // class index -> mean RGB
};

struct SynthConfig {
    SynthDomain source;
    SynthDomain target;
    int color_jitter = 12;

    // objects per scene by class
    int buildings = 4;
    int trees = 10;
    int roads = 2;
    int lowveg_patches = 6;
    int cars = 5;

    // raw DSM units (meters)
    double ground_base = 30.0;
    double ground_relief = 1.0;
    std::array<double, 2> building_height{6.0, 15.0};
    std::array<double, 2> tree_height{3.0, 7.0};
    std::array<double, 2> car_height{1.5, 2.2};

    uint64_t seed = 0;

    void validate() const;
    static SynthConfig defaults();
};

struct SynthOutput {
    std::vector<SceneRecord> scenes;
    DomainSpec domain;
    std::vector<Rgb> class_colors;
};

// Writes sceneNNN_{rgb.ppm,dsm.pfm,label.pgm} under out_dir and returns the records.
SynthOutput generate_synthetic_domain(const SynthConfig& cfg, bool target_domain, int n_scenes,
                                      const std::filesystem::path& out_dir);

void write_scene_index(const std::vector<SceneRecord>& scenes, const DomainSpec& domain,
                       const std::vector<Rgb>& colors, const std::filesystem::path& path);
SynthOutput read_scene_index(const std::filesystem::path& path);

}  // namespace drdg
