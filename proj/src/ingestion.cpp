#include "drdg/ingestion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"

namespace drdg {

using nlohmann::json;

std::pair<double, double> compute_depth_stats(const std::vector<SceneRecord>& scenes) {
    bool any = false;
    double mn = 0, mx = 0;
    for (const auto& s : scenes) {
        if (s.dsm_path.empty()) continue;
        FloatRaster r = read_pfm(s.dsm_path);
        for (float v : r.data) {
            if (!any) {
                mn = mx = v;
                any = true;
            } else {
                mn = std::min(mn, static_cast<double>(v));
                mx = std::max(mx, static_cast<double>(v));
            }
        }
    }
    if (!any) throw DataError("compute_depth_stats: no scene provides a DSM");
    return {mn, mx};
}

DepthTile normalize_dsm(const FloatRaster& raw, std::pair<double, double> stats) {
    if (stats.first > stats.second) throw DataError("normalize_dsm: stats min > max");
    DepthTile d;
    d.h = raw.h;
    d.w = raw.w;
    d.data.resize(raw.data.size());
    const double lo = stats.first, range = stats.second - stats.first;
    for (size_t i = 0; i < raw.data.size(); ++i) {
        double v = range > 0 ? (raw.data[i] - lo) / range : 0.0;
        d.data[i] = std::clamp(v, 0.0, 1.0);
    }
    return d;
}

std::vector<int> tile_anchors(int extent, int tile, int stride, bool include_edge) {
    if (extent < tile) throw DataError("clip_tiles: scene extent " + std::to_string(extent) +
                                       " smaller than tile " + std::to_string(tile));
    std::vector<int> anchors;
    for (int pos = 0;; pos += stride) {
        if (pos <= extent - tile) {
            anchors.push_back(pos);
            if (pos == extent - tile) break;
        } else {
            if (include_edge) anchors.push_back(extent - tile);
            break;
        }
    }
    return anchors;
}

namespace {

std::string tile_name(int scene_id, int y, int x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "scene%03d_y%05d_x%05d", scene_id, y, x);
    return buf;
}

}  // namespace

std::vector<ClippedTile> clip_tiles(const SceneRecord& scene, const DomainSpec& domain, int stride,
                                    bool include_edge_tiles) {
    domain.validate();
    const int th = domain.tile_height, tw = domain.tile_width;
    if (stride <= 0) throw DataError("clip_tiles: stride must be positive");

    Rgb8Raster rgb = read_ppm(scene.rgb_path);
    FloatRaster dsm = read_pfm(scene.dsm_path);
    std::optional<Gray8Raster> label;
    if (scene.label_path) label = read_pgm(*scene.label_path);

    if (dsm.h != rgb.h || dsm.w != rgb.w)
        throw ShapeError("scene " + std::to_string(scene.scene_id) + ": DSM dimensions differ from RGB");
    if (label && (label->h != rgb.h || label->w != rgb.w))
        throw ShapeError("scene " + std::to_string(scene.scene_id) + ": label dimensions differ from RGB");

    const auto ys = tile_anchors(rgb.h, th, stride, include_edge_tiles);
    const auto xs = tile_anchors(rgb.w, tw, stride, include_edge_tiles);

    auto domain_ptr = std::make_shared<DomainSpec>(domain);
    std::vector<ClippedTile> tiles;
    tiles.reserve(ys.size() * xs.size());
    for (int y0 : ys)
        for (int x0 : xs) {
            ClippedTile t;
            t.y = y0;
            t.x = x0;
            SampleTriple& s = t.sample;
            s.tile_id = tile_name(scene.scene_id, y0, x0);
            s.domain = domain_ptr;

            std::vector<int> raw(static_cast<size_t>(th) * tw * 3);
            for (int y = 0; y < th; ++y)
                for (int x = 0; x < tw; ++x)
                    for (int c = 0; c < 3; ++c)
                        raw[(static_cast<size_t>(y) * tw + x) * 3 + c] = rgb.at(y0 + y, x0 + x, c);
            s.image = normalize_image(raw, th, tw, 8);

            FloatRaster draw;
            draw.h = th;
            draw.w = tw;
            draw.data.resize(static_cast<size_t>(th) * tw);
            for (int y = 0; y < th; ++y)
                for (int x = 0; x < tw; ++x) draw.at(y, x) = dsm.at(y0 + y, x0 + x);
            s.depth = normalize_dsm(draw, {domain.depth_min, domain.depth_max});

            if (label) {
                LabelTile lt;
                lt.h = th;
                lt.w = tw;
                lt.data.resize(static_cast<size_t>(th) * tw);
                for (int y = 0; y < th; ++y)
                    for (int x = 0; x < tw; ++x)
                        lt.data[static_cast<size_t>(y) * tw + x] = label->data[static_cast<size_t>(y0 + y) * label->w + x0 + x];
                s.label = std::move(lt);
            }
            tiles.push_back(std::move(t));
        }
    return tiles;
}

LabelTile labels_from_color(const Rgb8Raster& raster, const std::vector<std::pair<Rgb, int>>& color_map) {
    std::set<Rgb> seen;
    for (const auto& [color, idx] : color_map) {
        if (!seen.insert(color).second)
            throw DataError("labels_from_color: duplicate color (" + std::to_string(color[0]) + "," +
                            std::to_string(color[1]) + "," + std::to_string(color[2]) + ") in map");
        (void)idx;
    }
    LabelTile out;
    out.h = raster.h;
    out.w = raster.w;
    out.data.assign(static_cast<size_t>(raster.h) * raster.w, 0);
    std::map<Rgb, int> lut(color_map.begin(), color_map.end());
    for (int y = 0; y < raster.h; ++y)
        for (int x = 0; x < raster.w; ++x) {
            Rgb c{raster.at(y, x, 0), raster.at(y, x, 1), raster.at(y, x, 2)};
            auto it = lut.find(c);
            out.data[static_cast<size_t>(y) * raster.w + x] = it == lut.end() ? 0 : it->second;
        }
    return out;
}

namespace {

json domain_to_json(const DomainSpec& d, const std::vector<Rgb>& colors) {
    json colors_j = json::array();
    for (const auto& c : colors) colors_j.push_back({c[0], c[1], c[2]});
    return json{{"name", d.name},
                {"tile_height", d.tile_height},
                {"tile_width", d.tile_width},
                {"ground_resolution_cm", d.ground_resolution_cm},
                {"class_count", d.class_count},
                {"depth_min", d.depth_min},
                {"depth_max", d.depth_max},
                {"class_colors", colors_j}};
}

void expect_keys(const json& j, const std::set<std::string>& keys, const std::string& ctx) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!keys.count(it.key())) throw DataError(ctx + ": unknown key '" + it.key() + "'");
}

void parse_domain(const json& j, DomainSpec& d, std::vector<Rgb>& colors) {
    expect_keys(j, {"name", "tile_height", "tile_width", "ground_resolution_cm", "class_count",
                    "depth_min", "depth_max", "class_colors"}, "manifest domain");
    d.name = j.at("name").get<std::string>();
    d.tile_height = j.at("tile_height").get<int>();
    d.tile_width = j.at("tile_width").get<int>();
    d.ground_resolution_cm = j.at("ground_resolution_cm").get<double>();
    d.class_count = j.at("class_count").get<int>();
    d.depth_min = j.at("depth_min").get<double>();
    d.depth_max = j.at("depth_max").get<double>();
    colors.clear();
    for (const auto& c : j.at("class_colors")) colors.push_back(Rgb{c.at(0), c.at(1), c.at(2)});
}

}  // namespace

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    json samples = json::array();
    for (const auto& s : m.samples) {
        json e{{"tile_id", s.tile_id}, {"scene_id", s.scene_id}, {"y", s.y}, {"x", s.x},
               {"image", s.image_path}};
        e["label"] = s.label_path ? json(*s.label_path) : json(nullptr);
        e["depth"] = s.depth_path ? json(*s.depth_path) : json(nullptr);
        samples.push_back(std::move(e));
    }
    json scenes = json::array();
    for (const auto& [id, hw] : m.scene_dims)
        scenes.push_back({{"id", id}, {"height", hw.first}, {"width", hw.second}});
    json j{{"schema_version", 1},
           {"domain", domain_to_json(m.domain, m.class_colors)},
           {"split", m.split},
           {"seed", m.seed},
           {"scenes", scenes},
           {"samples", samples}};
    auto dir = path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    std::ofstream out(path);
    if (!out) throw DataError("write_manifest: cannot write '" + path.string() + "'");
    out << j.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("read_manifest: cannot open '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("read_manifest: '" + path.string() + "' is not valid JSON: " + e.what());
    }
    expect_keys(j, {"schema_version", "domain", "split", "seed", "scenes", "samples"}, "manifest");
    if (j.at("schema_version").get<int>() != 1)
        throw DataError("read_manifest: unsupported schema_version");

    DatasetManifest m;
    m.base_dir = path.parent_path();
    parse_domain(j.at("domain"), m.domain, m.class_colors);
    m.domain.validate();
    m.split = j.at("split").get<std::string>();
    if (m.split != "train" && m.split != "val" && m.split != "test")
        throw DataError("read_manifest: split must be train/val/test");
    m.seed = j.at("seed").get<uint64_t>();
    for (const auto& sc : j.at("scenes"))
        m.scene_dims[sc.at("id").get<int>()] = {sc.at("height").get<int>(), sc.at("width").get<int>()};
    for (const auto& e : j.at("samples")) {
        expect_keys(e, {"tile_id", "scene_id", "y", "x", "image", "label", "depth"}, "manifest sample");
        SampleRef s;
        s.tile_id = e.at("tile_id").get<std::string>();
        s.scene_id = e.at("scene_id").get<int>();
        s.y = e.at("y").get<int>();
        s.x = e.at("x").get<int>();
        s.image_path = e.at("image").get<std::string>();
        if (!e.at("label").is_null()) s.label_path = e.at("label").get<std::string>();
        if (!e.at("depth").is_null()) s.depth_path = e.at("depth").get<std::string>();
        m.samples.push_back(std::move(s));
    }
    // fail loud on dangling references
    for (const auto& s : m.samples) {
        auto check = [&](const std::string& rel) {
            if (!std::filesystem::exists(m.base_dir / rel))
                throw DataError("read_manifest: missing file '" + (m.base_dir / rel).string() +
                                "' referenced by sample '" + s.tile_id + "'");
        };
        check(s.image_path);
        if (s.label_path) check(*s.label_path);
        if (s.depth_path) check(*s.depth_path);
    }
    return m;
}

SampleTriple load_sample(const DatasetManifest& m, size_t index) {
    if (index >= m.samples.size()) throw DataError("load_sample: index out of range");
    const SampleRef& r = m.samples[index];
    SampleTriple s;
    s.tile_id = r.tile_id;
    s.domain = std::make_shared<DomainSpec>(m.domain);
    s.image = read_image_tile(m.base_dir / r.image_path);
    if (r.label_path) s.label = read_label_tile(m.base_dir / *r.label_path);
    if (r.depth_path) s.depth = read_depth_tile(m.base_dir / *r.depth_path);
    return s;
}

std::vector<std::filesystem::path> ingest_domain(const std::vector<SceneRecord>& scenes,
                                                 DomainSpec domain, const std::vector<Rgb>& class_colors,
                                                 const std::filesystem::path& out_dir,
                                                 const IngestOptions& opt) {
    if (scenes.empty()) throw DataError("ingest_domain: no scenes");
    auto stats = compute_depth_stats(scenes);
    domain.depth_min = stats.first;
    domain.depth_max = stats.second;
    domain.validate();

    // split scenes deterministically by scene id
    std::vector<int> ids;
    for (const auto& s : scenes) ids.push_back(s.scene_id);
    std::sort(ids.begin(), ids.end());
    Rng rng = derive_rng(opt.seed, "scene_split");
    rng.shuffle(ids);
    const int n = static_cast<int>(ids.size());
    int n_val = static_cast<int>(std::floor(opt.val_frac * n));
    int n_test = n - static_cast<int>(std::floor(opt.train_frac * n)) - n_val;
    if (n >= 3) {
        n_val = std::max(1, n_val);
        n_test = std::max(1, n_test);
    } else {
        n_val = std::min(n_val, n - 1);
        n_test = std::min(std::max(0, n_test), n - n_val - 1);
    }
    std::set<int> val_ids(ids.begin(), ids.begin() + n_val);
    std::set<int> test_ids(ids.begin() + n_val, ids.begin() + n_val + n_test);

    const int stride = opt.stride > 0 ? opt.stride : domain.tile_height;
    std::map<std::string, DatasetManifest> manifests;
    for (const char* split : {"train", "val", "test"}) {
        DatasetManifest m;
        m.domain = domain;
        m.class_colors = class_colors;
        m.split = split;
        m.seed = opt.seed;
        manifests[split] = std::move(m);
    }

    for (const auto& scene : scenes) {
        std::string split = val_ids.count(scene.scene_id)    ? "val"
                            : test_ids.count(scene.scene_id) ? "test"
                                                             : "train";
        auto tiles = clip_tiles(scene, domain, stride, opt.include_edge_tiles);
        DatasetManifest& m = manifests[split];
        m.scene_dims[scene.scene_id] = {scene.height, scene.width};
        for (auto& t : tiles) {
            validate_sample(t.sample);
            SampleRef ref;
            ref.tile_id = t.sample.tile_id;
            ref.scene_id = scene.scene_id;
            ref.y = t.y;
            ref.x = t.x;
            std::string stem = "tiles/" + t.sample.tile_id;
            ref.image_path = stem + ".ppm";
            write_image_tile(out_dir / ref.image_path, t.sample.image);
            if (t.sample.depth) {
                ref.depth_path = stem + "_dsm.pfm";
                write_depth_tile(out_dir / *ref.depth_path, *t.sample.depth);
            }
            const bool strip = opt.strip_labels_from_train && split == "train";
            if (t.sample.label && !strip) {
                ref.label_path = stem + "_label.pgm";
                write_label_tile(out_dir / *ref.label_path, *t.sample.label);
            }
            m.samples.push_back(std::move(ref));
        }
    }

    std::vector<std::filesystem::path> written;
    for (auto& [split, m] : manifests) {
        if (m.samples.empty()) continue;
        auto p = out_dir / (split + std::string(".json"));
        write_manifest(m, p);
        written.push_back(p);
    }
    return written;
}

}  // namespace drdg
