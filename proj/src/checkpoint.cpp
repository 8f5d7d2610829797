#include "drdg/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace drdg {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'D', 'R', 'D', 'G', 'C', 'K', 'P', '1'};
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
    json index = json::array();
    int64_t offset = 0;
    for (const auto& [name, t] : data.tensors) {
        index.push_back({{"name", name},
                         {"n", t.shape.n},
                         {"c", t.shape.c},
                         {"h", t.shape.h},
                         {"w", t.shape.w},
                         {"offset", offset}});
        offset += t.numel();
    }
    json header{{"schema_version", kCheckpointSchemaVersion},
                {"kind", data.kind},
                {"step", data.step},
                {"seed", data.seed},
                {"config", data.config},
                {"extra", data.extra},
                {"tensors", index}};
    const std::string hs = header.dump();

    auto dir = path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot write '" + path.string() + "'");
    out.write(kMagic, sizeof(kMagic));
    const uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : data.tensors)
        out.write(reinterpret_cast<const char*>(t.v.data()),
                  static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    if (!out) throw DataError("checkpoint: short write to '" + path.string() + "'");
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open '" + path.string() + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw DataError("checkpoint: '" + path.string() + "' has no valid schema tag");
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!in || hlen == 0 || hlen > (1ULL << 30))
        throw DataError("checkpoint: corrupt header length in '" + path.string() + "'");
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw DataError("checkpoint: truncated header in '" + path.string() + "'");

    json header;
    try {
        header = json::parse(hs);
    } catch (const json::exception& e) {
        throw DataError("checkpoint: corrupt header JSON in '" + path.string() + "': " + e.what());
    }
    if (!header.contains("schema_version") ||
        header.at("schema_version").get<int>() != kCheckpointSchemaVersion)
        throw DataError("checkpoint: unsupported schema version in '" + path.string() + "'");

    CheckpointData data;
    data.kind = header.at("kind").get<std::string>();
    data.step = header.at("step").get<int64_t>();
    data.seed = header.at("seed").get<uint64_t>();
    data.config = header.at("config");
    data.extra = header.at("extra");

    for (const auto& e : header.at("tensors")) {
        Tensor t(Shape{e.at("n").get<int>(), e.at("c").get<int>(), e.at("h").get<int>(),
                       e.at("w").get<int>()});
        in.read(reinterpret_cast<char*>(t.v.data()),
                static_cast<std::streamsize>(t.v.size() * sizeof(double)));
        if (!in) throw DataError("checkpoint: truncated payload in '" + path.string() + "'");
        data.tensors.emplace(e.at("name").get<std::string>(), std::move(t));
    }
    return data;
}

}  // namespace drdg
