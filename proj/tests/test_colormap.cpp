#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "isin/colormap.hpp"

using namespace isin;

namespace {

// Independent reimplementation of the greedy scan: no incremental
// min-distance cache, recomputed from scratch against the chosen set.
std::vector<std::array<double, 3>> oracle_colormap(int k) {
    const int n = 17;
    auto point = [&](int r, int g, int b) {
        return std::array<double, 3>{r / 16.0, g / 16.0, b / 16.0};
    };
    std::vector<std::array<double, 3>> chosen = {{0.0, 0.0, 0.0}};
    std::vector<std::array<double, 3>> rows;
    for (int step = 0; step < k; ++step) {
        double best_d = -1;
        std::array<double, 3> best{};
        for (int r = 0; r < n; ++r)
            for (int g = 0; g < n; ++g)
                for (int b = 0; b < n; ++b) {
                    const auto p = point(r, g, b);
                    double mind = 1e300;
                    for (const auto& c : chosen) {
                        const double d = (p[0] - c[0]) * (p[0] - c[0]) +
                                         (p[1] - c[1]) * (p[1] - c[1]) +
                                         (p[2] - c[2]) * (p[2] - c[2]);
                        mind = std::min(mind, d);
                    }
                    // strict > keeps the first (lowest r-major index) on ties
                    if (mind > best_d) {
                        best_d = mind;
                        best = p;
                    }
                }
        chosen.push_back(best);
        rows.push_back(best);
    }
    return rows;
}

double min_pairwise_d2(const std::vector<std::array<double, 3>>& pts) {
    double best = 1e300;
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j) {
            double d = 0;
            for (int c = 0; c < 3; ++c) d += (pts[i][c] - pts[j][c]) * (pts[i][c] - pts[j][c]);
            best = std::min(best, d);
        }
    return best;
}

}  // namespace

TEST_CASE("colormap k=1 picks white") {
    ColorMap m = build_colormap(1);
    REQUIRE(m.parts() == 1);
    REQUIRE(m.rows[0] == std::array<double, 3>{1.0, 1.0, 1.0});
}

TEST_CASE("colormap rejects k out of range") {
    REQUIRE_THROWS_AS(build_colormap(0), std::invalid_argument);
    REQUIRE_THROWS_AS(build_colormap(65), std::invalid_argument);
}

TEST_CASE("colormap equals the brute-force greedy oracle") {
    for (int k : {1, 2, 3, 5, 8}) {
        ColorMap m = build_colormap(k);
        const auto oracle = oracle_colormap(k);
        REQUIRE(m.rows.size() == oracle.size());
        for (int i = 0; i < k; ++i) {
            INFO("k=" << k << " row " << i);
            REQUIRE(m.rows[static_cast<size_t>(i)] == oracle[static_cast<size_t>(i)]);
        }
        // min pairwise distance including background matches the oracle's
        auto with_bg = m.rows;
        with_bg.push_back({0.0, 0.0, 0.0});
        auto oracle_with_bg = oracle;
        oracle_with_bg.push_back({0.0, 0.0, 0.0});
        REQUIRE(min_pairwise_d2(with_bg) == min_pairwise_d2(oracle_with_bg));
    }
}

TEST_CASE("colormap rows form a greedy prefix") {
    ColorMap small = build_colormap(4);
    ColorMap big = build_colormap(5);
    for (int i = 0; i < 4; ++i) REQUIRE(small.rows[static_cast<size_t>(i)] == big.rows[static_cast<size_t>(i)]);
}

TEST_CASE("colormap rows are distinct from each other and background") {
    ColorMap m = build_colormap(12);
    auto pts = m.rows;
    pts.push_back({0.0, 0.0, 0.0});
    REQUIRE(min_pairwise_d2(pts) > 0);
}

TEST_CASE("render_s maps one-hot pixels to their part color") {
    ColorMap m = build_colormap(3);
    Tensor<double> probs({1, 4, 4});
    for (int p = 0; p < 4; ++p) probs.at({0, p, p}) = 1.0;  // bg, part1, part2, part3
    Tensor<double> s = render_s(probs, m);
    for (int c = 0; c < 3; ++c) {
        REQUIRE(s.at({0, 0, c}) == 0.0);  // pure background renders black
        REQUIRE(s.at({0, 1, c}) == m.rows[0][static_cast<size_t>(c)]);
        REQUIRE(s.at({0, 2, c}) == m.rows[1][static_cast<size_t>(c)]);
        REQUIRE(s.at({0, 3, c}) == m.rows[2][static_cast<size_t>(c)]);
    }
}

TEST_CASE("render_s of a 50/50 mix is the color midpoint") {
    ColorMap m = build_colormap(2);
    Tensor<double> probs({1, 1, 3});
    probs.at({0, 0, 1}) = 0.5;
    probs.at({0, 0, 2}) = 0.5;
    Tensor<double> s = render_s(probs, m);
    for (int c = 0; c < 3; ++c)
        REQUIRE(s.at({0, 0, c}) ==
                Catch::Approx(0.5 * (m.rows[0][static_cast<size_t>(c)] + m.rows[1][static_cast<size_t>(c)])).margin(1e-15));
}

TEST_CASE("render_s is linear in the probabilities") {
    ColorMap m = build_colormap(3);
    Rng rng(7);
    auto random_probs = [&]() {
        Tensor<double> p({3, 3, 4});
        for (int px = 0; px < 9; ++px) {
            double sum = 0;
            for (int c = 0; c < 4; ++c) {
                const double v = rng.uniform(0.01, 1.0);
                p.data[static_cast<size_t>(px) * 4 + c] = v;
                sum += v;
            }
            for (int c = 0; c < 4; ++c) p.data[static_cast<size_t>(px) * 4 + c] /= sum;
        }
        return p;
    };
    const Tensor<double> p = random_probs();
    const Tensor<double> q = random_probs();
    const double alpha = rng.uniform(0.0, 1.0);
    Tensor<double> mix({3, 3, 4});
    for (size_t i = 0; i < mix.data.size(); ++i)
        mix.data[i] = alpha * p.data[i] + (1 - alpha) * q.data[i];
    const Tensor<double> sp = render_s(p, m);
    const Tensor<double> sq = render_s(q, m);
    const Tensor<double> sm = render_s(mix, m);
    for (size_t i = 0; i < sm.data.size(); ++i)
        REQUIRE(sm.data[i] == Catch::Approx(alpha * sp.data[i] + (1 - alpha) * sq.data[i]).margin(1e-12));
}

TEST_CASE("distinct one-hot assignments give distinct colors") {
    ColorMap m = build_colormap(6);
    std::vector<std::array<double, 3>> colors = {{0.0, 0.0, 0.0}};
    for (const auto& r : m.rows) colors.push_back(r);
    REQUIRE(min_pairwise_d2(colors) > 0);
}

TEST_CASE("render_s rejects unnormalized probabilities") {
    ColorMap m = build_colormap(2);
    Tensor<double> probs({1, 1, 3});
    probs.at({0, 0, 0}) = 0.7;  // sums to 0.7
    REQUIRE_THROWS_AS(render_s(probs, m), std::invalid_argument);
    probs.at({0, 0, 1}) = -0.1;
    probs.at({0, 0, 2}) = 0.4;
    REQUIRE_THROWS_AS(render_s(probs, m), std::invalid_argument);
}

TEST_CASE("render_s_node matches render_s and is differentiable") {
    ColorMap m = build_colormap(3);
    Tensor<double> probs({2, 2, 4});
    for (int px = 0; px < 4; ++px)
        for (int c = 0; c < 4; ++c) probs.data[static_cast<size_t>(px) * 4 + c] = 0.25;
    Graph<double> g;
    auto in = g.input(probs, true);
    auto s = render_s_node(g, in, m);
    REQUIRE(g.value(s).data == render_s(probs, m).data);
    Tensor<int> lab({2, 2});
    g.backward(g.softmax_cross_entropy(s, lab));
    double norm = 0;
    for (double v : g.grad(in).data) norm += v * v;
    REQUIRE(norm > 0);
}
