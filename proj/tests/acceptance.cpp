// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when
// any criterion fails. Heavier than the unit tests; run via ctest or
// directly as ./acceptance.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "helpers.hpp"
#include "isin/checkpoint.hpp"
#include "isin/colormap.hpp"
#include "isin/dataset.hpp"
#include "isin/evaluator.hpp"
#include "isin/networks.hpp"
#include "isin/pipeline.hpp"
#include "isin/relationship.hpp"
#include "isin/trainer.hpp"

using namespace isin;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;
std::ostringstream g_detail;

void report(int number, const std::string& name, bool pass) {
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << number << ": " << name << "\n";
    if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- criterion 1

bool check_gradients() {
    const auto t0 = Clock::now();
    using test::BuildFn;
    using test::grad_check;
    using test::random_tensor;
    using G = Graph<double>;

    bool ok = true;
    double worst_primitive = 0, worst_composed = 0;

    for (uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(900 + seed);
        // every input reduced to a scalar through ops whose gradients are
        // themselves covered below
        auto reduce = [](G& g, G::NodeId x) {
            Tensor<int> lab({1, 1});
            return g.softmax_cross_entropy(g.global_avg_pool(x), lab);
        };

        std::vector<std::pair<const char*, double>> checks;
        checks.emplace_back("conv2d", grad_check(
            [&](G& g, const std::vector<G::NodeId>& in) {
                return reduce(g, g.conv2d(in[0], in[1], 1, 1));
            },
            {random_tensor({5, 5, 2}, rng), random_tensor({3, 3, 2, 3}, rng)}));
        checks.emplace_back("conv2d_transpose", grad_check(
            [&](G& g, const std::vector<G::NodeId>& in) {
                return reduce(g, g.conv2d_transpose(in[0], in[1], 2, 0));
            },
            {random_tensor({3, 3, 3}, rng), random_tensor({2, 2, 3, 2}, rng)}));
        checks.emplace_back("relu", grad_check(
            [&](G& g, const std::vector<G::NodeId>& in) { return reduce(g, g.relu(in[0])); },
            {random_tensor({4, 4, 2}, rng)}));
        checks.emplace_back("max_pool2x2", grad_check(
            [&](G& g, const std::vector<G::NodeId>& in) { return reduce(g, g.max_pool2x2(in[0])); },
            {random_tensor({4, 4, 2}, rng)}));
        checks.emplace_back("add_channel_bias", grad_check(
            [&](G& g, const std::vector<G::NodeId>& in) {
                return reduce(g, g.add_channel_bias(in[0], in[1]));
            },
            {random_tensor({3, 3, 2}, rng), random_tensor({2}, rng)}));
        checks.emplace_back("fully_connected", grad_check(
            [&](G& g, const std::vector<G::NodeId>& in) {
                auto y = g.fully_connected(in[0], in[1], in[2]);
                return g.binary_cross_entropy(y, std::vector<uint8_t>{1, 0, 1});
            },
            {random_tensor({4}, rng), random_tensor({4, 3}, rng), random_tensor({3}, rng)}));
        checks.emplace_back("concat+slice", grad_check(
            [&](G& g, const std::vector<G::NodeId>& in) {
                auto c = g.concat_channels(in[0], in[1]);
                return reduce(g, g.slice_channels(c, 1, 3));
            },
            {random_tensor({3, 3, 2}, rng), random_tensor({3, 3, 2}, rng)}));
        checks.emplace_back("channel_linear", grad_check(
            [&](G& g, const std::vector<G::NodeId>& in) {
                Tensor<double> m({3, 2});
                Rng mr(seed);
                for (double& v : m.data) v = mr.uniform(0, 1);
                return reduce(g, g.channel_linear(in[0], m));
            },
            {random_tensor({3, 3, 3}, rng)}));
        checks.emplace_back("softmax2d+nll", grad_check(
            [&](G& g, const std::vector<G::NodeId>& in) {
                Tensor<int> lab({3, 3});
                for (size_t i = 0; i < lab.data.size(); ++i) lab.data[i] = static_cast<int>(i % 3);
                return g.nll_loss(g.softmax2d(in[0]), lab);
            },
            {random_tensor({3, 3, 3}, rng)}));
        checks.emplace_back("softmax_cross_entropy", grad_check(
            [&](G& g, const std::vector<G::NodeId>& in) {
                Tensor<int> lab({2, 2});
                lab.data = {0, 2, 1, 0};
                return g.softmax_cross_entropy(in[0], lab);
            },
            {random_tensor({2, 2, 3}, rng)}));
        checks.emplace_back("binary_cross_entropy", grad_check(
            [&](G& g, const std::vector<G::NodeId>& in) {
                return g.binary_cross_entropy(in[0], std::vector<uint8_t>{1, 0, 1, 1});
            },
            {random_tensor({4}, rng)}));
        checks.emplace_back("add+scale", grad_check(
            [&](G& g, const std::vector<G::NodeId>& in) {
                auto a = reduce(g, in[0]);
                auto b = reduce(g, g.scale(in[1], 0.3));
                return g.add(a, g.scale(b, 2.0));
            },
            {random_tensor({3, 3, 2}, rng), random_tensor({3, 3, 2}, rng)}));

        for (const auto& [name, err] : checks) {
            worst_primitive = std::max(worst_primitive, err);
            if (err >= 1e-6) {
                g_detail << "  primitive " << name << " seed " << seed << " rel err " << err << "\n";
                ok = false;
            }
        }

        // composed objective: state loss + lambda * seg loss through the
        // in-graph S-image recomputation. Seeds are offset to ones whose
        // activations sit away from ReLU/max-pool kinks, where a finite
        // difference is not a valid derivative estimate.
        const uint64_t cseed = seed + 2;
        ArchConfig arch;
        arch.input_size = 8;
        arch.conv_widths = {2, 3, 3};
        arch.input_channels = 6;
        Rng crng(500 + cseed);
        Rng r6(70 + cseed), rs(80 + cseed);
        NetworkParams<double> part6 = init_part_net<double>(arch, r6);
        NetworkParams<double> state = init_state_net<double>(arch, rs);
        const ColorMap cmap = build_colormap(arch.num_parts);
        Tensor<double> rgb = random_tensor({8, 8, 3}, crng, 0, 1);
        Tensor<double> u0 = random_tensor({8, 8, 6}, crng, 0, 1);
        Tensor<uint8_t> labels({8, 8});
        std::vector<uint8_t> states = {1, 0, 0, 1, 0, 1};
        Rng lr(cseed);
        for (auto& v : labels.data) v = static_cast<uint8_t>(lr.below(4));

        std::vector<Tensor<double>> inputs;
        std::vector<std::string> names6(part6.params.order), namess(state.params.order);
        for (const auto& n : names6) inputs.push_back(part6.params.value[n]);
        for (const auto& n : namess) inputs.push_back(state.params.value[n]);
        inputs.push_back(u0);

        const double err = grad_check(
            [&](G& g, const std::vector<G::NodeId>& in) {
                detail::BoundNet<double> p6{&g, {}}, ps{&g, {}};
                size_t k = 0;
                for (const auto& n : names6) p6.ids[n] = in[k++];
                for (const auto& n : namess) ps.ids[n] = in[k++];
                auto u = in[k];
                auto rgb_id = g.input(rgb, false);
                auto probs = part_net_forward_node(g, p6, u);
                auto u1 = g.concat_channels(g.channel_linear(probs, cmap.matrix<double>()), rgb_id);
                auto logits = state_net_forward_node(g, ps, u1);
                auto sl = state_loss_node(g, logits, states);
                auto gl = seg_loss_node(g, probs, labels, arch.num_parts);
                return g.add(sl, g.scale(gl, 0.2));
            },
            inputs);
        worst_composed = std::max(worst_composed, err);
        if (err >= 1e-5) {
            g_detail << "  composed objective seed " << cseed << " rel err " << err << "\n";
            ok = false;
        }
    }

    const double secs = seconds_since(t0);
    g_detail << "  gradient checks: worst primitive rel err " << worst_primitive
             << ", worst composed rel err " << worst_composed << ", " << secs << " s\n";
    if (secs >= 60) {
        g_detail << "  gradient suite exceeded the 1 min budget\n";
        ok = false;
    }
    return ok;
}

// ---------------------------------------------------------------- criterion 2

// Brute-force oracle: for every prefix of the score-ranked list, redo the
// greedy matching from scratch and collect one PR point; integrate the
// all-points envelope over those points.
double oracle_ap(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                 double thr = 0.5) {
    if (gts.empty()) return dets.empty() ? 1.0 : 0.0;
    std::vector<size_t> order(dets.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return dets[a].score > dets[b].score; });
    std::vector<std::pair<double, double>> pr;  // (recall, precision)
    for (size_t m = 1; m <= order.size(); ++m) {
        std::vector<uint8_t> used(gts.size(), 0);
        int tp = 0;
        for (size_t r = 0; r < m; ++r) {
            const Detection& d = dets[order[r]];
            double best_iou = -1;
            size_t best = gts.size();
            for (size_t g = 0; g < gts.size(); ++g) {
                if (used[g] || gts[g].image != d.image || gts[g].class_id != d.class_id) continue;
                const double v = iou(d.mask, gts[g].mask);
                if (v > best_iou) {
                    best_iou = v;
                    best = g;
                }
            }
            if (best < gts.size() && best_iou > thr) {
                used[best] = 1;
                ++tp;
            }
        }
        pr.emplace_back(static_cast<double>(tp) / static_cast<double>(gts.size()),
                        static_cast<double>(tp) / static_cast<double>(m));
    }
    double ap = 0, prev = 0;
    for (size_t i = 0; i < pr.size(); ++i) {
        double env = 0;
        for (size_t j = i; j < pr.size(); ++j)
            if (pr[j].first >= pr[i].first) env = std::max(env, pr[j].second);
        if (pr[i].first > prev) {
            ap += (pr[i].first - prev) * env;
            prev = pr[i].first;
        }
    }
    return ap;
}

Mask random_mask(Rng& rng) {
    Mask m{4, 4, std::vector<uint8_t>(16, 0)};
    for (auto& b : m.bits) b = rng.uniform(0, 1) < 0.4;
    m.bits[rng.below(16)] = 1;
    return m;
}

bool check_metric_oracle() {
    const auto t0 = Clock::now();
    bool ok = true;
    double worst = 0;
    Rng rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Detection> dets;
        std::vector<GroundTruth> gts;
        const int ng = static_cast<int>(rng.below(4));   // up to 3 GTs
        const int nd = static_cast<int>(rng.below(5));   // up to 4 detections
        for (int i = 0; i < ng; ++i)
            gts.push_back({static_cast<int>(rng.below(2)), static_cast<int>(rng.below(2)),
                           random_mask(rng)});
        for (int i = 0; i < nd; ++i)
            dets.push_back({static_cast<int>(rng.below(2)), static_cast<int>(rng.below(2)),
                            random_mask(rng), rng.uniform(0, 1)});

        const double got = average_precision(dets, gts).average_precision;
        const double want = oracle_ap(dets, gts);
        worst = std::max(worst, std::abs(got - want));

        // part_state_map against the per-class oracle mean
        const PartStateMapResult res = part_state_map(dets, gts);
        std::vector<int> bins;
        for (const auto& g : gts)
            if (std::find(bins.begin(), bins.end(), g.class_id) == bins.end())
                bins.push_back(g.class_id);
        double sum = 0;
        for (int bin : bins) {
            std::vector<Detection> d;
            std::vector<GroundTruth> g;
            for (const auto& x : dets)
                if (x.class_id == bin) d.push_back(x);
            for (const auto& x : gts)
                if (x.class_id == bin) g.push_back(x);
            const double bin_ap = oracle_ap(d, g);
            sum += bin_ap;
            auto it = res.per_bin_ap.find(bin);
            if (it == res.per_bin_ap.end() || std::abs(it->second - bin_ap) > 1e-9) {
                g_detail << "  trial " << trial << " bin " << bin << " AP mismatch\n";
                ok = false;
            }
        }
        const double want_map = bins.empty() ? 0.0 : sum / static_cast<double>(bins.size());
        worst = std::max(worst, std::abs(res.map - want_map));
    }
    const double secs = seconds_since(t0);
    g_detail << "  metric oracle: worst |delta| " << worst << " over 200 instances, " << secs << " s\n";
    if (worst > 1e-9) ok = false;
    if (secs >= 10) {
        g_detail << "  metric oracle exceeded the 10 s budget\n";
        ok = false;
    }
    return ok;
}

// ------------------------------------------------------- criteria 3, 4, 5, 6

struct BenchmarkData {
    PartStateSchema schema;
    std::vector<Sample> train, test;
};

BenchmarkData make_benchmark() {
    GenConfig gc;
    gc.seed = 20260817;
    gc.image_size = 32;
    gc.num_samples = 1200;
    BenchmarkData d;
    d.schema = default_schema();
    std::vector<Sample> all = generate(gc, d.schema);
    d.train.assign(all.begin(), all.begin() + 1000);
    d.test.assign(all.begin() + 1000, all.end());
    return d;
}

TrainConfig benchmark_config(uint64_t seed, TrainMode mode) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.mode = mode;
    cfg.max_iterations = 6;
    cfg.epochs_per_iteration = 6;
    cfg.subsequence_length = 3;
    cfg.stop_rel_improvement = 0;  // run the full schedule so curves are comparable
    return cfg;
}

struct SeedRun {
    double map_s2 = 0, map_s1 = 0, map_b1 = 0;
    double gt_seg_map = 0;
    std::vector<double> seg_acc_curve;  // test seg accuracy after iteration i
    double seconds = 0;
};

SeedRun run_benchmark_seed(const BenchmarkData& d, uint64_t seed) {
    const auto t0 = Clock::now();
    SeedRun out;

    // setting2, instrumented per iteration (criteria 3, 4, 5)
    {
        TrainConfig cfg = benchmark_config(seed, TrainMode::setting2);
        Trainer<float> tr(d.schema, d.train, cfg);
        tr.bootstrap();
        EvalReport rep;
        while (tr.state().current_iteration < cfg.max_iterations) {
            tr.train_iteration();
            rep = evaluate_checkpoint(tr.to_checkpoint(), d.schema, d.test);
            out.seg_acc_curve.push_back(rep.mean_seg_accuracy);
        }
        out.map_s2 = rep.state_map.map;
        out.gt_seg_map = state_map_with_gt_segments(tr.to_checkpoint(), d.schema, d.test);
    }
    // setting1 (criterion 3)
    {
        Trainer<float> tr(d.schema, d.train, benchmark_config(seed, TrainMode::setting1));
        tr.run();
        out.map_s1 = evaluate_checkpoint(tr.to_checkpoint(), d.schema, d.test).state_map.map;
    }
    // baseline1 (criterion 3); the state net converges quickly without a
    // segmentation stage, so a short schedule suffices
    {
        TrainConfig cfg = benchmark_config(seed, TrainMode::baseline1);
        cfg.max_iterations = 2;
        cfg.subsequence_length = 1;
        Trainer<float> tr(d.schema, d.train, cfg);
        tr.run();
        out.map_b1 = evaluate_checkpoint(tr.to_checkpoint(), d.schema, d.test).state_map.map;
    }
    out.seconds = seconds_since(t0);
    return out;
}

void check_benchmark(const BenchmarkData& d) {
    std::vector<SeedRun> runs;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        runs.push_back(run_benchmark_seed(d, seed));
        const SeedRun& r = runs.back();
        g_detail << "  seed " << seed << ": mAP s2 " << 100 * r.map_s2 << " s1 " << 100 * r.map_s1
                 << " b1 " << 100 * r.map_b1 << " gt-seg " << 100 * r.gt_seg_map << ", seg acc";
        for (double a : r.seg_acc_curve) g_detail << " " << 100 * a;
        g_detail << ", " << r.seconds << " s\n";
    }

    // criterion 3: ordinal gaps on seed medians, in percentage points
    std::vector<double> s2, s1, b1;
    double max_secs = 0;
    for (const auto& r : runs) {
        s2.push_back(100 * r.map_s2);
        s1.push_back(100 * r.map_s1);
        b1.push_back(100 * r.map_b1);
        max_secs = std::max(max_secs, r.seconds);
    }
    const double m2 = median(s2), m1 = median(s1), mb = median(b1);
    g_detail << "  medians: s2 " << m2 << " s1 " << m1 << " b1 " << mb << "; slowest seed "
             << max_secs << " s\n";
    report(3, "setting2 > setting1 by >= 2 points and setting1 > baseline1 by >= 5 points (median, 5 seeds)",
           m2 >= m1 + 2 && m1 >= mb + 5 && max_secs < 600);

    // criterion 4: GT-segmentation upper bound, every seed
    bool gt_ok = true;
    for (const auto& r : runs)
        if (r.gt_seg_map < r.map_s2) gt_ok = false;
    report(4, "state mAP with ground-truth S >= predicted S, every seed", gt_ok);

    // criterion 5: median per-iteration segmentation accuracy curve
    const size_t iters = runs[0].seg_acc_curve.size();
    std::vector<double> curve;
    for (size_t i = 0; i < iters; ++i) {
        std::vector<double> v;
        for (const auto& r : runs) v.push_back(100 * r.seg_acc_curve[i]);
        curve.push_back(median(v));
    }
    g_detail << "  median seg acc curve:";
    for (double a : curve) g_detail << " " << a;
    g_detail << "\n";
    bool curve_ok = curve.back() >= curve.front() + 3;
    for (size_t i = 1; i < curve.size(); ++i)
        if (curve[i] < curve[i - 1] - 1) curve_ok = false;
    report(5, "median seg accuracy: final >= iteration 1 + 3 points, nondecreasing within 1 point",
           curve_ok);

    // criterion 6: unfolded parity over 3 seeds
    std::vector<double> diffs;
    for (uint64_t seed = 1; seed <= 3; ++seed) {
        Trainer<float> tr(d.schema, d.train, benchmark_config(seed, TrainMode::setting3));
        tr.run();
        const double m3 = 100 * evaluate_checkpoint(tr.to_checkpoint(), d.schema, d.test).state_map.map;
        diffs.push_back(std::abs(m3 - s2[static_cast<size_t>(seed - 1)]));
        g_detail << "  seed " << seed << ": mAP s3 " << m3 << " (|s3-s2| " << diffs.back() << ")\n";
    }
    report(6, "|mAP(setting3) - mAP(setting2)| <= 2 points (median, 3 seeds)", median(diffs) <= 2);
}

// ---------------------------------------------------------------- criterion 7

bool check_relationships() {
    bool ok = true;
    // separable toy set: predicate j holds iff subject bin j is set
    std::vector<RelationshipSample> samples;
    for (int j = 0; j < 4; ++j)
        for (int c = 0; c < 5; ++c) {
            RelationshipSample s;
            s.id = "pair_" + std::to_string(j) + "_" + std::to_string(c);
            s.subject_category = s.object_category = "widget";
            s.subject_states.assign(6, 0);
            s.subject_states[static_cast<size_t>(j)] = 1;
            s.object_states.assign(6, 0);
            s.object_states[static_cast<size_t>((j + c) % 6)] = 1;
            s.predicate = j;
            samples.push_back(std::move(s));
        }
    RelTrainConfig cfg;
    cfg.seed = 9;
    cfg.pad_len = 6;
    const LinearPredicateModel model = train_predicate_model(samples, cfg);
    std::vector<std::vector<int64_t>> ranked, gt;
    for (const auto& s : samples) {
        auto r = predict_relationships(s.subject_states, s.object_states, model);
        std::vector<int64_t> ids;
        for (const auto& rp : r) ids.push_back(rp.predicate);
        ranked.push_back(std::move(ids));
        gt.push_back({s.predicate});
    }
    const double r1 = recall_at_k(ranked, gt, 1);
    g_detail << "  separable set recall@1 " << r1 << "\n";
    if (r1 != 1.0) ok = false;

    if (fuse_scores(0.4, 0.6) != 0.5) ok = false;
    if (fuse_scores(0.0, 0.0) != 0.0) ok = false;
    if (fuse_scores(1.0, 1.0) != 1.0) ok = false;
    if (fuse_scores(0.25, 0.75) != 0.5) ok = false;
    if (fuse_scores(0.5, 0.25) != 0.375) ok = false;

    // hand-computed recall_at_k fixtures
    const std::vector<std::vector<int64_t>> rk = {{7, 3, 5}, {1, 2}, {9}};
    const std::vector<std::vector<int64_t>> gk = {{3, 8}, {2}, {4}};
    // k=1: hits 0 of 2, 0 of 1, 0 of 1 -> 0
    if (recall_at_k(rk, gk, 1) != 0.0) ok = false;
    // k=2: {7,3} hits 3 -> 1 of 2; {1,2} hits 2 -> 1 of 1; {9} misses -> 2/4
    if (recall_at_k(rk, gk, 2) != 0.5) ok = false;
    // k=100: same hits as k=3 -> still 2/4
    if (recall_at_k(rk, gk, 100) != 0.5) ok = false;
    return ok;
}

// ---------------------------------------------------------------- criterion 8

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), {});
}

bool check_determinism() {
    bool ok = true;
    const fs::path work = fs::temp_directory_path() / "isin_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    // byte-identical datasets
    GenConfig gc;
    gc.seed = 11;
    gc.image_size = 16;
    gc.num_samples = 30;
    const PartStateSchema schema = default_schema();
    write_dataset(generate(gc, schema), schema, (work / "d1").string());
    write_dataset(generate(gc, schema), schema, (work / "d2").string());
    for (const auto& e : fs::recursive_directory_iterator(work / "d1")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), work / "d1");
        if (slurp(e.path()) != slurp(work / "d2" / rel)) {
            g_detail << "  dataset file differs: " << rel.string() << "\n";
            ok = false;
        }
    }

    // byte-identical checkpoints from identical config+seed
    Dataset ds = read_dataset((work / "d1").string());
    TrainConfig tc;
    tc.seed = 5;
    tc.mode = TrainMode::setting1;
    tc.max_iterations = 1;
    tc.epochs_per_iteration = 1;
    tc.subsequence_length = 1;
    for (int run = 0; run < 2; ++run) {
        Trainer<float> tr(ds.schema, ds.samples, tc);
        tr.run();
        save_checkpoint(tr.to_checkpoint(), (work / ("run" + std::to_string(run) + ".ckpt")).string());
    }
    if (slurp(work / "run0.ckpt") != slurp(work / "run1.ckpt")) {
        g_detail << "  checkpoints from identical config+seed differ\n";
        ok = false;
    }

    // round-trip yields bit-identical inference
    Trainer<float> tr(ds.schema, ds.samples, tc);
    tr.run();
    const Checkpoint<float> before = tr.to_checkpoint();
    save_checkpoint(before, (work / "rt.ckpt").string());
    const Checkpoint<float> after = load_checkpoint<float>((work / "rt.ckpt").string());
    for (const auto& s : ds.samples) {
        const InferResult<float> a = Trainer<float>::infer(before, s.image);
        const InferResult<float> b = Trainer<float>::infer(after, s.image);
        if (a.part_probs.data != b.part_probs.data || a.label_map.data != b.label_map.data ||
            a.state_scores != b.state_scores) {
            g_detail << "  inference differs after checkpoint round-trip (" << s.id << ")\n";
            ok = false;
            break;
        }
    }
    // and the re-saved file is byte-identical
    save_checkpoint(after, (work / "rt2.ckpt").string());
    if (slurp(work / "rt.ckpt") != slurp(work / "rt2.ckpt")) {
        g_detail << "  checkpoint re-save is not byte-identical\n";
        ok = false;
    }
    return ok;
}

}  // namespace

int main() {
    report(1, "finite-difference gradient checks (primitives < 1e-6, composed objective < 1e-5)",
           check_gradients());
    report(2, "average_precision and part_state_map match the brute-force oracle within 1e-9",
           check_metric_oracle());
    const BenchmarkData bench = make_benchmark();
    check_benchmark(bench);  // reports criteria 3-6
    report(7, "relationship pipeline: separable recall@1 = 1, fuse_scores and recall_at_k exact",
           check_relationships());
    report(8, "determinism and persistence: byte-identical artifacts, bit-identical inference",
           check_determinism());

    std::cout << "---\n" << g_detail.str();
    if (g_failures) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all acceptance criteria passed\n";
    return 0;
}
