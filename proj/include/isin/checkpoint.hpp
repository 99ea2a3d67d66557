#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "isin/networks.hpp"

namespace isin {

/// Versioned container for the Part-3, Part-6 and State networks plus the
/// trained iteration count.
///
/// Layout: magic "ISIN0001", u32-LE header length, UTF-8 JSON header,
/// all parameter tensors as little-endian f32 in declaration order,
/// trailing u32-LE CRC32 over every preceding byte.
template <typename T>
struct Checkpoint {
    uint64_t schema_fingerprint = 0;
    int iterations = 0;
    std::string mode;
    std::vector<std::pair<std::string, NetworkParams<T>>> networks;

    NetworkParams<T>& net(const std::string& name) {
        for (auto& [n, p] : networks)
            if (n == name) return p;
        throw std::runtime_error("checkpoint: no network named '" + name + "'");
    }

    const NetworkParams<T>& net(const std::string& name) const {
        return const_cast<Checkpoint*>(this)->net(name);
    }

    bool has(const std::string& name) const {
        for (auto& [n, p] : networks)
            if (n == name) return true;
        return false;
    }
};

namespace detail {

constexpr char kCkptMagic[9] = "ISIN0001";

inline void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline uint32_t get_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline void put_f32(std::string& buf, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(buf, u);
}

inline nlohmann::json arch_json(const ArchConfig& a) {
    return {{"input_size", a.input_size},
            {"input_channels", a.input_channels},
            {"conv_widths", a.conv_widths},
            {"num_parts", a.num_parts},
            {"num_state_bins", a.num_state_bins}};
}

inline ArchConfig arch_from_json(const nlohmann::json& j) {
    ArchConfig a;
    a.input_size = j.at("input_size");
    a.input_channels = j.at("input_channels");
    a.conv_widths = j.at("conv_widths").get<std::vector<int>>();
    a.num_parts = j.at("num_parts");
    a.num_state_bins = j.at("num_state_bins");
    return a;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const Checkpoint<T>& ckpt, const std::string& path) {
    nlohmann::json header;
    header["version"] = 1;
    header["schema_fingerprint"] = ckpt.schema_fingerprint;
    header["iterations"] = ckpt.iterations;
    header["mode"] = ckpt.mode;
    header["networks"] = nlohmann::json::array();
    for (const auto& [name, net] : ckpt.networks) {
        nlohmann::json tensors = nlohmann::json::array();
        for (const auto& tname : net.params.order)
            tensors.push_back({{"name", tname}, {"shape", net.params.value.at(tname).shape}});
        header["networks"].push_back(
            {{"name", name}, {"arch", detail::arch_json(net.arch)}, {"tensors", tensors}});
    }
    const std::string hs = header.dump();

    std::string buf(detail::kCkptMagic, 8);
    detail::put_u32(buf, static_cast<uint32_t>(hs.size()));
    buf += hs;
    for (const auto& [name, net] : ckpt.networks)
        for (const auto& tname : net.params.order)
            for (T v : net.params.value.at(tname).data) detail::put_f32(buf, static_cast<float>(v));

    const uint32_t crc = static_cast<uint32_t>(
        ::crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
    detail::put_u32(buf, crc);

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(path + ": cannot create");
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) throw std::runtime_error(path + ": write failed");
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open");
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (buf.size() < 16 || std::memcmp(buf.data(), detail::kCkptMagic, 8) != 0)
        throw std::runtime_error(path + ": not an ISIN checkpoint");
    const uint32_t stored_crc = detail::get_u32(buf.data() + buf.size() - 4);
    const uint32_t crc = static_cast<uint32_t>(
        ::crc32(0, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
    if (crc != stored_crc) throw std::runtime_error(path + ": checksum mismatch");

    const uint32_t hlen = detail::get_u32(buf.data() + 8);
    if (12 + hlen > buf.size() - 4) throw std::runtime_error(path + ": truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(buf.begin() + 12, buf.begin() + 12 + hlen);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": bad header: " + e.what());
    }
    if (header.at("version") != 1) throw std::runtime_error(path + ": unsupported version");

    Checkpoint<T> ckpt;
    ckpt.schema_fingerprint = header.at("schema_fingerprint");
    ckpt.iterations = header.at("iterations");
    ckpt.mode = header.at("mode");
    size_t off = 12 + hlen;
    for (const auto& jn : header.at("networks")) {
        NetworkParams<T> net;
        net.arch = detail::arch_from_json(jn.at("arch"));
        for (const auto& jt : jn.at("tensors")) {
            const std::vector<int> shape = jt.at("shape").get<std::vector<int>>();
            Tensor<T> t(shape);
            for (size_t i = 0; i < t.data.size(); ++i) {
                if (off + 4 > buf.size() - 4) throw std::runtime_error(path + ": truncated tensor data");
                uint32_t u = detail::get_u32(buf.data() + off);
                float f;
                std::memcpy(&f, &u, 4);
                t.data[i] = static_cast<T>(f);
                off += 4;
            }
            const std::string tname = jt.at("name");
            net.params.add(tname, std::move(t));
        }
        ckpt.networks.emplace_back(jn.at("name"), std::move(net));
    }
    if (off != buf.size() - 4) throw std::runtime_error(path + ": trailing bytes");
    return ckpt;
}

}  // namespace isin
