#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "isin/graph.hpp"
#include "isin/tensor.hpp"

namespace isin {

/// Part-id -> RGB mapping used to render probability volumes into the
/// 3-channel S image. Row i is the color of part id i+1; background
/// (id 0) is fixed black and is not a row.
struct ColorMap {
    std::vector<std::array<double, 3>> rows;

    static constexpr std::array<double, 3> background() { return {0.0, 0.0, 0.0}; }

    int parts() const { return static_cast<int>(rows.size()); }

    /// (k+1) x 3 matrix including the background row, for channel mixing.
    template <typename T>
    Tensor<T> matrix() const {
        Tensor<T> m({parts() + 1, 3});
        for (int i = 0; i < parts(); ++i)
            for (int c = 0; c < 3; ++c) m.data[static_cast<size_t>(i + 1) * 3 + c] = static_cast<T>(rows[static_cast<size_t>(i)][static_cast<size_t>(c)]);
        return m;
    }
};

namespace detail {
constexpr int kColorGrid = 17;  // grid points per axis, values i/16

inline std::array<double, 3> grid_point(int flat) {
    const int b = flat % kColorGrid;
    const int g = (flat / kColorGrid) % kColorGrid;
    const int r = flat / (kColorGrid * kColorGrid);
    const double s = 1.0 / (kColorGrid - 1);
    return {r * s, g * s, b * s};
}

inline double dist2(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double d = 0;
    for (int i = 0; i < 3; ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return d;
}
}  // namespace detail

/// Greedy farthest-point color selection over a uniform RGB grid, seeded
/// with black. Ties break toward the lowest flat grid index (r-major).
inline ColorMap build_colormap(int k) {
    check(k >= 1 && k <= 64, "build_colormap: k must be in [1,64], got " + std::to_string(k));
    const int n = detail::kColorGrid * detail::kColorGrid * detail::kColorGrid;
    std::vector<double> min_d2(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        min_d2[static_cast<size_t>(i)] = detail::dist2(detail::grid_point(i), ColorMap::background());

    ColorMap cmap;
    for (int chosen = 0; chosen < k; ++chosen) {
        int best = 0;
        for (int i = 1; i < n; ++i)
            if (min_d2[static_cast<size_t>(i)] > min_d2[static_cast<size_t>(best)]) best = i;
        const auto col = detail::grid_point(best);
        cmap.rows.push_back(col);
        for (int i = 0; i < n; ++i) {
            const double d = detail::dist2(detail::grid_point(i), col);
            if (d < min_d2[static_cast<size_t>(i)]) min_d2[static_cast<size_t>(i)] = d;
        }
    }
    return cmap;
}

template <typename T>
void check_normalized(const Tensor<T>& probs) {
    check(probs.shape.size() == 3, "render_s: probs must be HxWx(k+1), got " + probs.shape_str());
    const int hw = probs.dim(0) * probs.dim(1), c = probs.dim(2);
    for (int p = 0; p < hw; ++p) {
        double sum = 0;
        for (int ch = 0; ch < c; ++ch) {
            const double v = static_cast<double>(probs.data[static_cast<size_t>(p) * c + ch]);
            check(v >= 0, "render_s: negative probability");
            sum += v;
        }
        check(std::abs(sum - 1.0) <= 1e-4, "render_s: pixel probabilities sum to " + std::to_string(sum));
    }
}

/// S = probs * M, per pixel. Channel 0 is background and contributes black.
template <typename T>
Tensor<T> render_s(const Tensor<T>& probs, const ColorMap& cmap) {
    check_normalized(probs);
    check(probs.dim(2) == cmap.parts() + 1,
          "render_s: probs channels must be k+1 = " + std::to_string(cmap.parts() + 1));
    const int hw = probs.dim(0) * probs.dim(1), c = probs.dim(2);
    Tensor<T> out({probs.dim(0), probs.dim(1), 3});
    for (int p = 0; p < hw; ++p) {
        const T* pp = probs.data.data() + static_cast<size_t>(p) * c;
        T* op = out.data.data() + static_cast<size_t>(p) * 3;
        for (int part = 1; part < c; ++part) {
            const auto& col = cmap.rows[static_cast<size_t>(part - 1)];
            for (int ch = 0; ch < 3; ++ch) op[ch] += pp[part] * static_cast<T>(col[static_cast<size_t>(ch)]);
        }
    }
    return out;
}

/// In-graph differentiable variant; participates in the joint objective.
template <typename T>
typename Graph<T>::NodeId render_s_node(Graph<T>& g, typename Graph<T>::NodeId probs,
                                        const ColorMap& cmap) {
    check_normalized(g.value(probs));
    return g.channel_linear(probs, cmap.matrix<T>());
}

}  // namespace isin
