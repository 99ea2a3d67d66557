#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "isin/tensor.hpp"

namespace isin {

/// Binary netpbm I/O: P6 (RGB, maxval 255) and P5 (gray, maxval 255).
namespace netpbm {

struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 or 3
    std::vector<uint8_t> pixels;  // row-major, interleaved
};

namespace detail {
inline int read_token(std::istream& is, const std::string& path) {
    // skip whitespace and '#' comments
    int c = is.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = is.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = is.get();
    }
    if (c == EOF || !std::isdigit(c)) throw std::runtime_error(path + ": malformed netpbm header");
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = is.get();
    }
    return v;
}
}  // namespace detail

inline Image read(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open");
    char m0 = 0, m1 = 0;
    is.get(m0);
    is.get(m1);
    Image img;
    if (m0 == 'P' && m1 == '6')
        img.channels = 3;
    else if (m0 == 'P' && m1 == '5')
        img.channels = 1;
    else
        throw std::runtime_error(path + ": not a binary PPM/PGM (P6/P5) file");
    img.width = detail::read_token(is, path);
    img.height = detail::read_token(is, path);
    const int maxval = detail::read_token(is, path);
    if (maxval != 255) throw std::runtime_error(path + ": unsupported maxval " + std::to_string(maxval));
    if (img.width <= 0 || img.height <= 0) throw std::runtime_error(path + ": bad dimensions");
    // header ends with exactly one whitespace byte, already consumed by read_token
    const size_t n = static_cast<size_t>(img.width) * img.height * img.channels;
    img.pixels.resize(n);
    is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(is.gcount()) != n)
        throw std::runtime_error(path + ": truncated pixel data");
    return img;
}

inline void write(const std::string& path, const Image& img) {
    check(img.channels == 1 || img.channels == 3, "netpbm: channels must be 1 or 3");
    check(img.pixels.size() == static_cast<size_t>(img.width) * img.height * img.channels,
          "netpbm: pixel buffer size mismatch");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(path + ": cannot create");
    os << (img.channels == 3 ? "P6" : "P5") << "\n"
       << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()),
             static_cast<std::streamsize>(img.pixels.size()));
    if (!os) throw std::runtime_error(path + ": write failed");
}

/// [0,1] float image HxWx3 -> 8-bit, round-to-nearest.
template <typename T>
Image from_tensor_rgb(const Tensor<T>& t) {
    check(t.shape.size() == 3 && t.dim(2) == 3, "from_tensor_rgb: expected HxWx3");
    Image img;
    img.height = t.dim(0);
    img.width = t.dim(1);
    img.channels = 3;
    img.pixels.resize(t.data.size());
    for (size_t i = 0; i < t.data.size(); ++i) {
        double v = static_cast<double>(t.data[i]);
        v = v < 0 ? 0 : (v > 1 ? 1 : v);
        img.pixels[i] = static_cast<uint8_t>(v * 255.0 + 0.5);
    }
    return img;
}

template <typename T>
Tensor<T> to_tensor_rgb(const Image& img) {
    check(img.channels == 3, "to_tensor_rgb: expected 3 channels");
    Tensor<T> t({img.height, img.width, 3});
    for (size_t i = 0; i < img.pixels.size(); ++i)
        t.data[i] = static_cast<T>(img.pixels[i]) / static_cast<T>(255);
    return t;
}

}  // namespace netpbm
}  // namespace isin
