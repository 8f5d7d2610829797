#include "drdg/synth.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace drdg {

using nlohmann::json;

void SynthConfig::validate() const {
    if (source.palette.size() != 6 || target.palette.size() != 6)
        throw ConfigError("synth: palettes must list 6 class colors");
    if (source.palette == target.palette)
        throw ConfigError("synth: source and target palettes must differ (the domain gap)");
    if (source.scene_px < source.tile_px || target.scene_px < target.tile_px)
        throw ConfigError("synth: scene smaller than tile");
    for (auto r : {building_height, tree_height, car_height})
        if (r[0] < 0 || r[1] < r[0]) throw ConfigError("synth: invalid height range");
    if (building_height[0] <= 0 || tree_height[0] <= 0)
        throw ConfigError("synth: building and tree heights must be strictly above ground");
    if (color_jitter < 0 || color_jitter > 60) throw ConfigError("synth: color_jitter out of range");
    if (buildings < 0 || trees < 0 || roads < 0 || lowveg_patches < 0 || cars < 0)
        throw ConfigError("synth: object counts must be non-negative");
}

SynthConfig SynthConfig::defaults() {
    SynthConfig c;
    c.source.name = "synth_source";
    c.source.scene_px = 224;
    c.source.tile_px = 112;
    c.source.resolution_cm = 5.0;
    // RGB-like source vs IRRG-like target: vegetation flips toward red,
    // man-made surfaces shift tint, so the gap is a learnable color map.
    c.source.palette = {Rgb{120, 90, 70},  Rgb{150, 150, 150}, Rgb{200, 40, 40},
                        Rgb{30, 110, 40},  Rgb{90, 170, 80},   Rgb{180, 120, 90}};
    c.target.name = "synth_target";
    c.target.scene_px = 128;
    c.target.tile_px = 64;
    c.target.resolution_cm = 9.0;
    c.target.palette = {Rgb{70, 85, 110},  Rgb{185, 180, 170}, Rgb{40, 60, 190},
                        Rgb{150, 60, 50},  Rgb{200, 120, 110}, Rgb{90, 95, 105}};
    return c;
}

namespace {

struct Scene {
    int px;
    std::vector<int> label;     // class per pixel
    std::vector<double> height; // object height above ground, per pixel

    int& lab(int y, int x) { return label[static_cast<size_t>(y) * px + x]; }
    double& hei(int y, int x) { return height[static_cast<size_t>(y) * px + x]; }
};

// All geometry in unit scene coordinates so both resolutions share one layout
// distribution.
void paint_rect(Scene& s, double cx, double cy, double hw, double hh, int cls, double h) {
    int y0 = std::max(0, static_cast<int>(std::floor((cy - hh) * s.px)));
    int y1 = std::min(s.px - 1, static_cast<int>(std::ceil((cy + hh) * s.px)));
    int x0 = std::max(0, static_cast<int>(std::floor((cx - hw) * s.px)));
    int x1 = std::min(s.px - 1, static_cast<int>(std::ceil((cx + hw) * s.px)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            s.lab(y, x) = cls;
            s.hei(y, x) = h;
        }
}

void paint_disk(Scene& s, double cx, double cy, double r, int cls, double h) {
    int y0 = std::max(0, static_cast<int>(std::floor((cy - r) * s.px)));
    int y1 = std::min(s.px - 1, static_cast<int>(std::ceil((cy + r) * s.px)));
    int x0 = std::max(0, static_cast<int>(std::floor((cx - r) * s.px)));
    int x1 = std::min(s.px - 1, static_cast<int>(std::ceil((cx + r) * s.px)));
    const double r2 = r * r;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            double dy = (y + 0.5) / s.px - cy;
            double dx = (x + 0.5) / s.px - cx;
            if (dx * dx + dy * dy <= r2) {
                s.lab(y, x) = cls;
                s.hei(y, x) = h;
            }
        }
}

struct RoadBand {
    bool horizontal;
    double lo, hi;  // band extent in unit coords
};

}  // namespace

SynthOutput generate_synthetic_domain(const SynthConfig& cfg, bool target_domain, int n_scenes,
                                      const std::filesystem::path& out_dir) {
    cfg.validate();
    if (n_scenes <= 0) throw ConfigError("synth: n_scenes must be positive");
    const SynthDomain& dom = target_domain ? cfg.target : cfg.source;
    std::filesystem::create_directories(out_dir);

    SynthOutput out;
    out.domain.name = dom.name;
    out.domain.tile_height = dom.tile_px;
    out.domain.tile_width = dom.tile_px;
    out.domain.ground_resolution_cm = dom.resolution_cm;
    out.domain.class_count = 6;
    for (const auto& c : dom.palette) out.class_colors.push_back(c);

    for (int si = 0; si < n_scenes; ++si) {
        Rng rng = derive_rng(cfg.seed, "layout/" + dom.name, static_cast<uint64_t>(si));
        Scene sc;
        sc.px = dom.scene_px;
        sc.label.assign(static_cast<size_t>(sc.px) * sc.px, kClutter);
        sc.height.assign(static_cast<size_t>(sc.px) * sc.px, 0.0);

        for (int i = 0; i < cfg.lowveg_patches; ++i)
            paint_rect(sc, rng.uniform(), rng.uniform(), rng.uniform(0.08, 0.2), rng.uniform(0.08, 0.2),
                       kLowVeg, 0.0);

        std::vector<RoadBand> roads;
        for (int i = 0; i < cfg.roads; ++i) {
            RoadBand rb;
            rb.horizontal = rng.uniform() < 0.5;
            double c = rng.uniform(0.1, 0.9), w = rng.uniform(0.03, 0.06);
            rb.lo = c - w;
            rb.hi = c + w;
            roads.push_back(rb);
            if (rb.horizontal)
                paint_rect(sc, 0.5, c, 0.6, w, kImpervious, 0.0);
            else
                paint_rect(sc, c, 0.5, w, 0.6, kImpervious, 0.0);
        }

        for (int i = 0; i < cfg.buildings; ++i)
            paint_rect(sc, rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.06, 0.14),
                       rng.uniform(0.06, 0.14), kBuilding,
                       rng.uniform(cfg.building_height[0], cfg.building_height[1]));

        for (int i = 0; i < cfg.trees; ++i)
            paint_disk(sc, rng.uniform(), rng.uniform(), rng.uniform(0.025, 0.05), kTree,
                       rng.uniform(cfg.tree_height[0], cfg.tree_height[1]));

        for (int i = 0; i < cfg.cars; ++i) {
            double cx, cy;
            if (!roads.empty()) {
                const RoadBand& rb = roads[rng.uniform_int(0, static_cast<int>(roads.size()) - 1)];
                double along = rng.uniform(0.05, 0.95);
                double across = rng.uniform(rb.lo + 0.005, rb.hi - 0.005);
                cx = rb.horizontal ? along : across;
                cy = rb.horizontal ? across : along;
            } else {
                cx = rng.uniform();
                cy = rng.uniform();
            }
            paint_rect(sc, cx, cy, rng.uniform(0.008, 0.014), rng.uniform(0.014, 0.025), kCar,
                       rng.uniform(cfg.car_height[0], cfg.car_height[1]));
        }

        // smooth ground ramp under everything
        const double gax = rng.uniform(-1.0, 1.0) * cfg.ground_relief;
        const double gay = rng.uniform(-1.0, 1.0) * cfg.ground_relief;

        Rng jit = derive_rng(cfg.seed, "paint/" + dom.name, static_cast<uint64_t>(si));
        Rgb8Raster rgb;
        rgb.h = rgb.w = sc.px;
        rgb.data.resize(static_cast<size_t>(sc.px) * sc.px * 3);
        FloatRaster dsm;
        dsm.h = dsm.w = sc.px;
        dsm.data.resize(static_cast<size_t>(sc.px) * sc.px);
        Gray8Raster lab;
        lab.h = lab.w = sc.px;
        lab.data.resize(static_cast<size_t>(sc.px) * sc.px);

        for (int y = 0; y < sc.px; ++y)
            for (int x = 0; x < sc.px; ++x) {
                const int cls = sc.lab(y, x);
                const Rgb& base = dom.palette[cls];
                for (int c = 0; c < 3; ++c) {
                    int v = base[c] + jit.uniform_int(-cfg.color_jitter, cfg.color_jitter);
                    rgb.at(y, x, c) = static_cast<uint8_t>(std::clamp(v, 0, 255));
                }
                double ground = cfg.ground_base + gax * (double(x) / sc.px - 0.5) +
                                gay * (double(y) / sc.px - 0.5);
                dsm.at(y, x) = static_cast<float>(ground + sc.hei(y, x) + jit.uniform(-0.02, 0.02));
                lab.data[static_cast<size_t>(y) * sc.px + x] = static_cast<uint8_t>(cls);
            }

        char stem[32];
        std::snprintf(stem, sizeof(stem), "scene%03d", si);
        SceneRecord rec;
        rec.scene_id = si;
        rec.height = rec.width = sc.px;
        rec.rgb_path = out_dir / (std::string(stem) + "_rgb.ppm");
        rec.dsm_path = out_dir / (std::string(stem) + "_dsm.pfm");
        rec.label_path = out_dir / (std::string(stem) + "_label.pgm");
        write_ppm(rec.rgb_path, rgb);
        write_pfm(rec.dsm_path, dsm);
        write_pgm(*rec.label_path, lab);
        out.scenes.push_back(std::move(rec));
    }

    auto stats = compute_depth_stats(out.scenes);
    out.domain.depth_min = stats.first;
    out.domain.depth_max = stats.second;
    return out;
}

void write_scene_index(const std::vector<SceneRecord>& scenes, const DomainSpec& domain,
                       const std::vector<Rgb>& colors, const std::filesystem::path& path) {
    json colors_j = json::array();
    for (const auto& c : colors) colors_j.push_back({c[0], c[1], c[2]});
    json scenes_j = json::array();
    auto rel = [&](const std::filesystem::path& p) {
        return std::filesystem::relative(p, path.parent_path()).string();
    };
    for (const auto& s : scenes) {
        json e{{"scene_id", s.scene_id}, {"rgb", rel(s.rgb_path)}, {"dsm", rel(s.dsm_path)},
               {"height", s.height}, {"width", s.width}};
        e["label"] = s.label_path ? json(rel(*s.label_path)) : json(nullptr);
        scenes_j.push_back(std::move(e));
    }
    json j{{"schema_version", 1},
           {"domain",
            {{"name", domain.name},
             {"tile_height", domain.tile_height},
             {"tile_width", domain.tile_width},
             {"ground_resolution_cm", domain.ground_resolution_cm},
             {"class_count", domain.class_count}}},
           {"class_colors", colors_j},
           {"scenes", scenes_j}};
    auto dir = path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    std::ofstream out(path);
    if (!out) throw DataError("write_scene_index: cannot write '" + path.string() + "'");
    out << j.dump(2) << "\n";
}

SynthOutput read_scene_index(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("read_scene_index: cannot open '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("read_scene_index: invalid JSON: " + std::string(e.what()));
    }
    if (j.at("schema_version").get<int>() != 1)
        throw DataError("read_scene_index: unsupported schema_version");
    SynthOutput out;
    const auto& d = j.at("domain");
    out.domain.name = d.at("name").get<std::string>();
    out.domain.tile_height = d.at("tile_height").get<int>();
    out.domain.tile_width = d.at("tile_width").get<int>();
    out.domain.ground_resolution_cm = d.at("ground_resolution_cm").get<double>();
    out.domain.class_count = d.at("class_count").get<int>();
    for (const auto& c : j.at("class_colors")) out.class_colors.push_back(Rgb{c.at(0), c.at(1), c.at(2)});
    const auto base = path.parent_path();
    for (const auto& e : j.at("scenes")) {
        SceneRecord s;
        s.scene_id = e.at("scene_id").get<int>();
        s.rgb_path = base / e.at("rgb").get<std::string>();
        s.dsm_path = base / e.at("dsm").get<std::string>();
        if (!e.at("label").is_null()) s.label_path = base / e.at("label").get<std::string>();
        s.height = e.at("height").get<int>();
        s.width = e.at("width").get<int>();
        out.scenes.push_back(std::move(s));
    }
    return out;
}

}  // namespace drdg
