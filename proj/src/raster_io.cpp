#include "drdg/raster_io.hpp"

#include <cstring>
#include <fstream>

namespace drdg {

namespace {

void must_exist_dir(const std::filesystem::path& path) {
    auto dir = path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
}

std::string next_token(std::istream& in) {
    // Netpbm headers allow '#' comments between tokens
    std::string tok;
    while (in >> tok) {
        if (tok[0] == '#') {
            std::string rest;
            std::getline(in, rest);
            continue;
        }
        return tok;
    }
    throw DataError("raster: truncated header");
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("raster: cannot open '" + path.string() + "'");
    return in;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Rgb8Raster& img) {
    must_exist_dir(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("raster: cannot write '" + path.string() + "'");
    out << "P6\n" << img.w << " " << img.h << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
}

Rgb8Raster read_ppm(const std::filesystem::path& path) {
    auto in = open_in(path);
    if (next_token(in) != "P6") throw DataError("raster: '" + path.string() + "' is not binary PPM");
    Rgb8Raster img;
    img.w = std::stoi(next_token(in));
    img.h = std::stoi(next_token(in));
    int maxval = std::stoi(next_token(in));
    if (maxval != 255) throw DataError("raster: only 8-bit PPM supported");
    in.get();  // single whitespace after maxval
    img.data.resize(static_cast<size_t>(img.h) * img.w * 3);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!in) throw DataError("raster: truncated PPM '" + path.string() + "'");
    return img;
}

void write_pgm(const std::filesystem::path& path, const Gray8Raster& img) {
    must_exist_dir(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("raster: cannot write '" + path.string() + "'");
    out << "P5\n" << img.w << " " << img.h << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
}

Gray8Raster read_pgm(const std::filesystem::path& path) {
    auto in = open_in(path);
    if (next_token(in) != "P5") throw DataError("raster: '" + path.string() + "' is not binary PGM");
    Gray8Raster img;
    img.w = std::stoi(next_token(in));
    img.h = std::stoi(next_token(in));
    int maxval = std::stoi(next_token(in));
    if (maxval != 255) throw DataError("raster: only 8-bit PGM supported");
    in.get();
    img.data.resize(static_cast<size_t>(img.h) * img.w);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!in) throw DataError("raster: truncated PGM '" + path.string() + "'");
    return img;
}

void write_pfm(const std::filesystem::path& path, const FloatRaster& img) {
    must_exist_dir(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("raster: cannot write '" + path.string() + "'");
    out << "Pf\n" << img.w << " " << img.h << "\n-1.0\n";  // negative scale = little endian
    // PFM scanlines run bottom-to-top
    for (int y = img.h - 1; y >= 0; --y)
        out.write(reinterpret_cast<const char*>(img.data.data() + static_cast<size_t>(y) * img.w),
                  static_cast<std::streamsize>(img.w * sizeof(float)));
}

FloatRaster read_pfm(const std::filesystem::path& path) {
    auto in = open_in(path);
    if (next_token(in) != "Pf") throw DataError("raster: '" + path.string() + "' is not single-band PFM");
    FloatRaster img;
    img.w = std::stoi(next_token(in));
    img.h = std::stoi(next_token(in));
    double sc = std::stod(next_token(in));
    if (sc >= 0) throw DataError("raster: big-endian PFM not supported");
    in.get();
    img.data.resize(static_cast<size_t>(img.h) * img.w);
    for (int y = img.h - 1; y >= 0; --y)
        in.read(reinterpret_cast<char*>(img.data.data() + static_cast<size_t>(y) * img.w),
                static_cast<std::streamsize>(img.w * sizeof(float)));
    if (!in) throw DataError("raster: truncated PFM '" + path.string() + "'");
    return img;
}

ImageTile read_image_tile(const std::filesystem::path& path) {
    Rgb8Raster img = read_ppm(path);
    std::vector<int> raw(img.data.begin(), img.data.end());
    return normalize_image(raw, img.h, img.w, 8);
}

void write_image_tile(const std::filesystem::path& path, const ImageTile& tile) {
    Rgb8Raster img;
    img.h = tile.h;
    img.w = tile.w;
    auto raw = denormalize_image(tile, 8);
    img.data.assign(raw.begin(), raw.end());
    write_ppm(path, img);
}

DepthTile read_depth_tile(const std::filesystem::path& path) {
    FloatRaster r = read_pfm(path);
    DepthTile d;
    d.h = r.h;
    d.w = r.w;
    d.data.assign(r.data.begin(), r.data.end());
    return d;
}

void write_depth_tile(const std::filesystem::path& path, const DepthTile& tile) {
    FloatRaster r;
    r.h = tile.h;
    r.w = tile.w;
    r.data.assign(tile.data.begin(), tile.data.end());
    write_pfm(path, r);
}

LabelTile read_label_tile(const std::filesystem::path& path) {
    Gray8Raster g = read_pgm(path);
    LabelTile t;
    t.h = g.h;
    t.w = g.w;
    t.data.assign(g.data.begin(), g.data.end());
    return t;
}

void write_label_tile(const std::filesystem::path& path, const LabelTile& tile) {
    Gray8Raster g;
    g.h = tile.h;
    g.w = tile.w;
    g.data.resize(tile.data.size());
    for (size_t i = 0; i < tile.data.size(); ++i) {
        if (tile.data[i] < 0 || tile.data[i] > 255) throw DataError("label raster: index out of 8-bit range");
        g.data[i] = static_cast<uint8_t>(tile.data[i]);
    }
    write_pgm(path, g);
}

}  // namespace drdg
