#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "exechecker/errors.hpp"
#include "exechecker/stgat.hpp"
#include "exechecker/tensor.hpp"

namespace exechecker {

// Container file: 8-byte little-endian header length, a JSON header listing
// named tensors with shapes (plus arbitrary metadata), then the concatenated
// float64 payload in listing order, little-endian.

namespace detail_ckpt {

static_assert(sizeof(double) == 8, "float64 storage required");

inline void write_u64_le(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64_le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void write_doubles_le(std::ostream& out, const std::vector<double>& d) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(d.data()),
                  static_cast<std::streamsize>(d.size() * 8));
    } else {
        for (double x : d) {
            std::uint64_t bits;
            std::memcpy(&bits, &x, 8);
            write_u64_le(out, bits);
        }
    }
}

inline void read_doubles_le(std::istream& in, std::vector<double>& d) {
    if constexpr (std::endian::native == std::endian::little) {
        in.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(d.size() * 8));
    } else {
        for (auto& x : d) {
            std::uint64_t bits = read_u64_le(in);
            std::memcpy(&x, &bits, 8);
        }
    }
}

}  // namespace detail_ckpt

inline void save_checkpoint(const std::string& path,
                            const std::vector<std::pair<std::string, Tensor>>& tensors,
                            nlohmann::json meta = nlohmann::json::object()) {
    nlohmann::json header = std::move(meta);
    header["format"] = "exechecker-tensors-v1";
    auto list = nlohmann::json::array();
    for (const auto& [name, t] : tensors) list.push_back({{"name", name}, {"shape", t.shape()}});
    header["tensors"] = list;
    std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write checkpoint: " + path);
    detail_ckpt::write_u64_le(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : tensors) detail_ckpt::write_doubles_le(out, t.data());
    if (!out) throw IOError("write failed: " + path);
}

struct Checkpoint {
    nlohmann::json header;
    std::map<std::string, Tensor> tensors;

    Tensor require(const std::string& name) const {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ParseError("checkpoint: missing tensor " + name);
        return it->second;
    }
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open checkpoint: " + path);
    std::uint64_t hlen = detail_ckpt::read_u64_le(in);
    if (!in || hlen > (1u << 30)) throw ParseError("checkpoint: bad header length");
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    Checkpoint ck;
    try {
        ck.header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
    if (ck.header.value("format", "") != "exechecker-tensors-v1")
        throw ParseError("checkpoint: unknown format");
    for (const auto& entry : ck.header.at("tensors")) {
        std::string name = entry.at("name").get<std::string>();
        std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        std::vector<double> data(static_cast<std::size_t>(n));
        detail_ckpt::read_doubles_le(in, data);
        if (!in) throw ParseError("checkpoint: truncated payload");
        ck.tensors.emplace(name, Tensor::from(shape, std::move(data), true));
    }
    return ck;
}

// ---- model persistence ----

inline void save_model(const StgatModel& model, const std::string& path,
                       nlohmann::json extra = nlohmann::json::object()) {
    nlohmann::json meta = std::move(extra);
    meta["stgat"] = config_to_json(model.config);
    meta["input_channels"] = model.input_channels;
    save_checkpoint(path, model.named_parameters(), std::move(meta));
}

inline StgatModel load_model(const std::string& path, nlohmann::json* header_out = nullptr) {
    Checkpoint ck = load_checkpoint(path);
    StgatConfig cfg = config_from_json(ck.header.at("stgat"));
    int in_ch = ck.header.value("input_channels", 3);
    Rng dummy(0);
    StgatModel m = StgatModel::init(cfg, dummy, in_ch);
    for (auto& [name, t] : m.named_parameters()) {
        Tensor loaded = ck.require(name);
        if (loaded.shape() != t.shape()) throw ParseError("checkpoint: shape mismatch for " + name);
        t.data() = loaded.data();
    }
    if (header_out) *header_out = ck.header;
    return m;
}

}  // namespace exechecker
