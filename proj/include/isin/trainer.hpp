#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "isin/checkpoint.hpp"
#include "isin/colormap.hpp"
#include "isin/dataset.hpp"
#include "isin/graph.hpp"
#include "isin/networks.hpp"
#include "isin/parallel.hpp"
#include "isin/sgd.hpp"

namespace isin {

enum class TrainMode { setting1, setting2, setting3, baseline1 };

inline std::string to_string(TrainMode m) {
    switch (m) {
        case TrainMode::setting1: return "setting1";
        case TrainMode::setting2: return "setting2";
        case TrainMode::setting3: return "setting3";
        case TrainMode::baseline1: return "baseline1";
    }
    return "?";
}

inline TrainMode train_mode_from(const std::string& s) {
    if (s == "setting1") return TrainMode::setting1;
    if (s == "setting2") return TrainMode::setting2;
    if (s == "setting3") return TrainMode::setting3;
    if (s == "baseline1") return TrainMode::baseline1;
    throw std::invalid_argument("unknown train mode: " + s);
}

struct TrainConfig {
    double lambda = 0.2;
    int max_iterations = 12;       // M
    int epochs_per_iteration = 3;
    int subsequence_length = 3;    // h, setting3 only
    double stop_rel_improvement = 1e-3;
    SgdConfig sgd;
    uint64_t seed = 0;
    TrainMode mode = TrainMode::setting2;

    void validate() const {
        check(lambda >= 0, "train: lambda must be nonnegative");
        check(max_iterations >= 1, "train: max_iterations must be >= 1");
        check(epochs_per_iteration >= 0, "train: epochs_per_iteration must be >= 0");
        check(subsequence_length >= 1 && subsequence_length <= max_iterations,
              "train: subsequence_length must be in [1, max_iterations]");
        check(stop_rel_improvement >= 0, "train: stop_rel_improvement must be >= 0");
        sgd.validate();
    }
};

struct IterationLoss {
    double seg = 0;
    double state = 0;
    double total = 0;
};

template <typename T>
struct TrainState {
    NetworkParams<T> part3, part6, state;
    int current_iteration = 0;  // completed outer iterations
    std::vector<IterationLoss> loss_history;
    bool bootstrapped = false;
    ColorMap cmap;
    std::vector<Tensor<T>> u;  // cached RGB-S input per training sample
};

template <typename T>
struct InferResult {
    Tensor<T> part_probs;        // HxWx(k+1); empty for baseline1
    Tensor<uint8_t> label_map;   // per-pixel argmax; all background for baseline1
    std::vector<double> state_scores;  // sigmoid of the state logits
};

/// Stop when the iteration cap is reached or the relative total-loss
/// improvement over the previous iteration falls under the threshold.
inline bool should_stop(const std::vector<IterationLoss>& history, int current_iteration,
                        const TrainConfig& cfg) {
    check(current_iteration >= 1, "should_stop: needs >= 1 completed iteration");
    if (current_iteration >= cfg.max_iterations) return true;
    if (history.size() < 2) return false;
    const double prev = history[history.size() - 2].total;
    const double cur = history.back().total;
    if (prev <= 0) return true;
    return (prev - cur) / prev < cfg.stop_rel_improvement;
}

template <typename T>
class Trainer {
public:
    Trainer(PartStateSchema schema, std::vector<Sample> train_samples, TrainConfig cfg)
        : schema_(std::move(schema)), samples_(std::move(train_samples)), cfg_(cfg) {
        cfg_.validate();
        schema_.validate();
        check(!samples_.empty(), "train: empty dataset");
        arch_rgb_.input_size = samples_[0].image.dim(0);
        arch_rgb_.input_channels = 3;
        arch_rgb_.num_parts = schema_.num_parts();
        arch_rgb_.num_state_bins = schema_.total_state_bins();
        arch_rgbs_ = arch_rgb_;
        arch_rgbs_.input_channels = 6;
        st_.cmap = build_colormap(schema_.num_parts());
    }

    void set_log(std::ostream* log) { log_ = log; }
    void set_checkpoint_dir(std::string dir) { ckpt_dir_ = std::move(dir); }
    void set_jobs(int jobs) { jobs_ = jobs < 1 ? 1 : jobs; }

    TrainState<T>& state() { return st_; }
    const TrainState<T>& state() const { return st_; }
    const PartStateSchema& schema() const { return schema_; }

    /// Train Part-3 on RGB, then seed every sample's RGB-S input from it.
    void bootstrap() {
        check(!st_.bootstrapped, "bootstrap: already bootstrapped");
        Rng r3 = Rng::substream(cfg_.seed, "init.part3");
        Rng r6 = Rng::substream(cfg_.seed, "init.part6");
        Rng rs = Rng::substream(cfg_.seed, "init.state");
        st_.part3 = init_part_net<T>(arch_rgb_, r3);
        st_.part6 = init_part_net<T>(arch_rgbs_, r6);
        st_.state = init_state_net<T>(arch_rgbs_, rs);
        shuffle_rng_ = Rng::substream(cfg_.seed, "shuffle");

        for (int epoch = 0; epoch < cfg_.epochs_per_iteration; ++epoch) {
            const double loss = run_epoch_part3();
            if (log_) (*log_) << "0," << epoch << "," << loss << ",0," << loss << "\n";
        }
        recompute_u_from_part3();
        st_.bootstrapped = true;
    }

    /// One outer iteration: joint SGD on the fixed u, then refresh u.
    void train_iteration() {
        check(st_.bootstrapped, "train_iteration: bootstrap first");
        check(st_.current_iteration < cfg_.max_iterations, "train_iteration: iteration cap reached");
        run_window_iterations(1);
    }

    bool should_stop() const { return isin::should_stop(st_.loss_history, st_.current_iteration, cfg_); }

    /// One unfolded round: joint SGD through a window of chained
    /// iterations (gradients cross the S recomputation), then advance u
    /// by the window length.
    void train_unfolded_round() {
        check(st_.bootstrapped, "train_unfolded_round: bootstrap first");
        check(st_.current_iteration < cfg_.max_iterations, "train_unfolded_round: iteration cap reached");
        const int remaining = cfg_.max_iterations - st_.current_iteration;
        run_window_iterations(std::min(cfg_.subsequence_length, remaining));
    }

    /// Full training schedule for the configured mode.
    void run() {
        if (cfg_.mode == TrainMode::baseline1) {
            run_baseline1();
            write_checkpoint("final.ckpt");
            return;
        }
        bootstrap();
        const int window = cfg_.mode == TrainMode::setting3 ? cfg_.subsequence_length : 1;
        const int cap = cfg_.mode == TrainMode::setting1 ? 1 : cfg_.max_iterations;
        double prev_round = -1;
        while (st_.current_iteration < cap) {
            run_window_iterations(std::min(window, cap - st_.current_iteration));
            write_checkpoint("iter_" + std::to_string(st_.current_iteration) + ".ckpt");
            if (st_.current_iteration >= cap) break;
            if (cfg_.mode == TrainMode::setting2 && should_stop()) break;
            if (cfg_.mode == TrainMode::setting3) {
                // window entries repeat the round average, so compare rounds
                const double cur = st_.loss_history.back().total;
                if (prev_round > 0 && (prev_round - cur) / prev_round < cfg_.stop_rel_improvement) break;
                prev_round = cur;
            }
        }
        write_checkpoint("final.ckpt");
    }

    Checkpoint<T> to_checkpoint() const {
        Checkpoint<T> c;
        c.schema_fingerprint = schema_.fingerprint();
        c.iterations = st_.current_iteration;
        c.mode = to_string(cfg_.mode);
        if (cfg_.mode != TrainMode::baseline1) {
            c.networks.emplace_back("part3", st_.part3);
            c.networks.emplace_back("part6", st_.part6);
        }
        c.networks.emplace_back("state", st_.state);
        return c;
    }

    /// Staged inference: Part-3 once, Part-6 exactly as many times as
    /// training iterated, State net once on the final RGB-S image.
    static InferResult<T> infer(const Checkpoint<T>& ckpt, const Tensor<T>& rgb) {
        check(rgb.shape.size() == 3 && rgb.dim(2) == 3, "infer: expected HxWx3 RGB input");
        InferResult<T> res;
        NetworkParams<T>& state_net = const_cast<Checkpoint<T>&>(ckpt).net("state");
        if (ckpt.mode == "baseline1") {
            Tensor<T> zero_s({rgb.dim(0), rgb.dim(1), 3});
            res.state_scores = sigmoid_scores(state_net_forward(state_net, concat_s_rgb(zero_s, rgb)));
            res.label_map = Tensor<uint8_t>({rgb.dim(0), rgb.dim(1)});
            return res;
        }
        check(ckpt.iterations >= 1, "infer: checkpoint holds an untrained model");
        NetworkParams<T>& part3 = const_cast<Checkpoint<T>&>(ckpt).net("part3");
        NetworkParams<T>& part6 = const_cast<Checkpoint<T>&>(ckpt).net("part6");
        const ColorMap cmap = build_colormap(part3.arch.num_parts);

        Tensor<T> probs = part_net_forward(part3, rgb);
        Tensor<T> u = concat_s_rgb(render_s(probs, cmap), rgb);
        for (int i = 0; i < ckpt.iterations; ++i) {
            probs = part_net_forward(part6, u);
            u = concat_s_rgb(render_s(probs, cmap), rgb);
        }
        res.state_scores = sigmoid_scores(state_net_forward(state_net, u));
        res.part_probs = probs;
        res.label_map = argmax_labels(probs);
        return res;
    }

    /// State prediction from a ground-truth S image (upper-bound probe).
    static std::vector<double> infer_states_with_gt_s(const Checkpoint<T>& ckpt,
                                                      const Tensor<T>& rgb,
                                                      const Tensor<uint8_t>& gt_labels) {
        NetworkParams<T>& state_net = const_cast<Checkpoint<T>&>(ckpt).net("state");
        const int k = state_net.arch.num_parts;
        const ColorMap cmap = build_colormap(k);
        Tensor<T> onehot({gt_labels.dim(0), gt_labels.dim(1), k + 1});
        for (size_t p = 0; p < gt_labels.data.size(); ++p)
            onehot.data[p * static_cast<size_t>(k + 1) + gt_labels.data[p]] = T(1);
        Tensor<T> u = concat_s_rgb(render_s(onehot, cmap), rgb);
        return sigmoid_scores(state_net_forward(state_net, u));
    }

    /// Argmax label map; ties break toward the lower part id.
    static Tensor<uint8_t> argmax_labels(const Tensor<T>& probs) {
        const int hw = probs.dim(0) * probs.dim(1), c = probs.dim(2);
        Tensor<uint8_t> out({probs.dim(0), probs.dim(1)});
        for (int p = 0; p < hw; ++p) {
            const T* pp = probs.data.data() + static_cast<size_t>(p) * c;
            int best = 0;
            for (int ch = 1; ch < c; ++ch)
                if (pp[ch] > pp[best]) best = ch;
            out.data[static_cast<size_t>(p)] = static_cast<uint8_t>(best);
        }
        return out;
    }

    static Tensor<T> concat_s_rgb(const Tensor<T>& s, const Tensor<T>& rgb) {
        Graph<T> g;
        return g.value(g.concat_channels(g.input(s), g.input(rgb)));
    }

private:
    static std::vector<double> sigmoid_scores(const Tensor<T>& logits) {
        std::vector<double> out(logits.data.size());
        for (size_t i = 0; i < out.size(); ++i)
            out[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(logits.data[i])));
        return out;
    }

    std::vector<int> shuffled_indices() {
        std::vector<int> idx(samples_.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        for (size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[shuffle_rng_.below(i)]);
        return idx;
    }

    double run_epoch_part3() {
        const std::vector<int> order = shuffled_indices();
        double loss_sum = 0;
        const int n = static_cast<int>(order.size());
        for (int b = 0; b < n; b += cfg_.sgd.batch_size) {
            const int bs = std::min(cfg_.sgd.batch_size, n - b);
            std::vector<std::vector<Tensor<T>>> grads(static_cast<size_t>(bs));
            std::vector<double> losses(static_cast<size_t>(bs));
            parallel_for(bs, jobs_, [&](int i) {
                const Sample& s = samples_[static_cast<size_t>(order[static_cast<size_t>(b + i)])];
                Graph<T> g;
                auto p = detail::bind(g, st_.part3, true);
                auto probs = part_net_forward_node(g, p, g.input(s.image.template cast<T>()));
                auto loss = seg_loss_node(g, probs, s.labels, schema_.num_parts());
                g.backward(loss);
                losses[static_cast<size_t>(i)] = g.value(loss).data[0];
                for (const auto& name : st_.part3.params.order)
                    grads[static_cast<size_t>(i)].push_back(g.grad(p[name]));
            });
            apply_batch(st_.part3, grads, bs);
            for (double l : losses) loss_sum += l;
        }
        return loss_sum / n;
    }

    /// Joint SGD over a window of `win` chained iterations (win=1 is the
    /// plain iterative scheme), then advance every sample's u by win.
    void run_window_iterations(int win) {
        // each window solves a fresh optimization problem on a refreshed u,
        // so momentum carried over from the previous distribution is stale
        st_.part6.params.zero_velocity();
        st_.state.params.zero_velocity();
        IterationLoss avg;
        // a round covers `win` iterations, so it gets win times the
        // per-iteration epoch budget
        const int epochs = cfg_.epochs_per_iteration * win;
        for (int epoch = 0; epoch < std::max(epochs, 1); ++epoch) {
            const bool update = epoch < epochs;  // epochs==0: evaluate only
            avg = run_joint_epoch(win, update);
            if (log_ && update)
                (*log_) << (st_.current_iteration + 1) << "," << epoch << "," << avg.seg << ","
                        << avg.state << "," << avg.total << "\n";
            if (!update) break;
        }
        advance_u(win);
        for (int i = 0; i < win; ++i) {
            st_.loss_history.push_back(avg);
            ++st_.current_iteration;
        }
    }

    IterationLoss run_joint_epoch(int win, bool update) {
        const std::vector<int> order = update ? shuffled_indices() : identity_order();
        const int n = static_cast<int>(order.size());
        IterationLoss sum;
        std::vector<std::string> pnames;
        for (const auto& name : st_.part6.params.order) pnames.push_back("part6/" + name);
        for (const auto& name : st_.state.params.order) pnames.push_back("state/" + name);

        for (int b = 0; b < n; b += cfg_.sgd.batch_size) {
            const int bs = std::min(cfg_.sgd.batch_size, n - b);
            std::vector<std::vector<Tensor<T>>> g6(static_cast<size_t>(bs)), gs(static_cast<size_t>(bs));
            std::vector<IterationLoss> losses(static_cast<size_t>(bs));
            parallel_for(bs, jobs_, [&](int i) {
                const int si = order[static_cast<size_t>(b + i)];
                const Sample& s = samples_[static_cast<size_t>(si)];
                Graph<T> g;
                auto p6 = detail::bind(g, st_.part6, update);
                auto ps = detail::bind(g, st_.state, update);
                auto rgb = g.input(s.image.template cast<T>());
                auto u = g.input(st_.u[static_cast<size_t>(si)]);
                typename Graph<T>::NodeId total = -1;
                IterationLoss il;
                for (int t = 0; t < win; ++t) {
                    auto probs = part_net_forward_node(g, p6, u);
                    u = g.concat_channels(g.channel_linear(probs, st_.cmap.template matrix<T>()), rgb);
                    auto logits = state_net_forward_node(g, ps, u);
                    auto sl = state_loss_node(g, logits, s.states);
                    auto gl = seg_loss_node(g, probs, s.labels, schema_.num_parts());
                    il.state += g.value(sl).data[0];
                    il.seg += g.value(gl).data[0];
                    auto step = g.add(sl, g.scale(gl, static_cast<T>(cfg_.lambda)));
                    total = (total < 0) ? step : g.add(total, step);
                }
                il.seg /= win;
                il.state /= win;
                il.total = il.state + cfg_.lambda * il.seg;
                losses[static_cast<size_t>(i)] = il;
                if (update) {
                    // mean over the window keeps step sizes comparable across h
                    auto loss = g.scale(total, static_cast<T>(1.0 / win));
                    g.backward(loss);
                    for (const auto& name : st_.part6.params.order)
                        g6[static_cast<size_t>(i)].push_back(g.grad(p6[name]));
                    for (const auto& name : st_.state.params.order)
                        gs[static_cast<size_t>(i)].push_back(g.grad(ps[name]));
                }
            });
            for (const auto& il : losses) {
                sum.seg += il.seg;
                sum.state += il.state;
                sum.total += il.total;
            }
            if (update) {
                apply_batch(st_.part6, g6, bs);
                apply_batch(st_.state, gs, bs);
            }
        }
        return {sum.seg / n, sum.state / n, sum.total / n};
    }

    void run_baseline1() {
        Rng rs = Rng::substream(cfg_.seed, "init.state");
        st_.state = init_state_net<T>(arch_rgbs_, rs);
        shuffle_rng_ = Rng::substream(cfg_.seed, "shuffle");
        const int size = arch_rgb_.input_size;
        Tensor<T> zero_s({size, size, 3});
        st_.u.clear();
        for (const auto& s : samples_)
            st_.u.push_back(concat_s_rgb(zero_s, s.image.template cast<T>()));

        for (int iter = 0; iter < cfg_.max_iterations; ++iter) {
            IterationLoss avg;
            for (int epoch = 0; epoch < cfg_.epochs_per_iteration; ++epoch) {
                avg = run_state_only_epoch();
                if (log_)
                    (*log_) << (iter + 1) << "," << epoch << ",0," << avg.state << "," << avg.total << "\n";
            }
            st_.loss_history.push_back(avg);
            ++st_.current_iteration;
            if (should_stop()) break;
        }
    }

    IterationLoss run_state_only_epoch() {
        const std::vector<int> order = shuffled_indices();
        const int n = static_cast<int>(order.size());
        double sum = 0;
        for (int b = 0; b < n; b += cfg_.sgd.batch_size) {
            const int bs = std::min(cfg_.sgd.batch_size, n - b);
            std::vector<std::vector<Tensor<T>>> grads(static_cast<size_t>(bs));
            std::vector<double> losses(static_cast<size_t>(bs));
            parallel_for(bs, jobs_, [&](int i) {
                const int si = order[static_cast<size_t>(b + i)];
                const Sample& s = samples_[static_cast<size_t>(si)];
                Graph<T> g;
                auto ps = detail::bind(g, st_.state, true);
                auto logits = state_net_forward_node(g, ps, g.input(st_.u[static_cast<size_t>(si)]));
                auto loss = state_loss_node(g, logits, s.states);
                g.backward(loss);
                losses[static_cast<size_t>(i)] = g.value(loss).data[0];
                for (const auto& name : st_.state.params.order)
                    grads[static_cast<size_t>(i)].push_back(g.grad(ps[name]));
            });
            apply_batch(st_.state, grads, bs);
            for (double l : losses) sum += l;
        }
        const double avg = sum / n;
        return {0, avg, avg};
    }

    void apply_batch(NetworkParams<T>& net, const std::vector<std::vector<Tensor<T>>>& grads, int bs) {
        net.params.zero_grad();
        for (int i = 0; i < bs; ++i) {
            size_t j = 0;
            for (const auto& name : net.params.order) {
                Tensor<T>& acc = net.params.grad[name];
                const Tensor<T>& g = grads[static_cast<size_t>(i)][j++];
                for (size_t x = 0; x < acc.data.size(); ++x) acc.data[x] += g.data[x];
            }
        }
        const T inv = T(1) / static_cast<T>(bs);
        for (const auto& name : net.params.order)
            for (T& v : net.params.grad[name].data) v *= inv;
        sgd_step(net.params, cfg_.sgd);
    }

    std::vector<int> identity_order() const {
        std::vector<int> idx(samples_.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        return idx;
    }

    void recompute_u_from_part3() {
        st_.u.assign(samples_.size(), {});
        parallel_for(static_cast<int>(samples_.size()), jobs_, [&](int i) {
            const Tensor<T> rgb = samples_[static_cast<size_t>(i)].image.template cast<T>();
            const Tensor<T> probs = part_net_forward(st_.part3, rgb);
            st_.u[static_cast<size_t>(i)] = concat_s_rgb(render_s(probs, st_.cmap), rgb);
        });
    }

    void advance_u(int steps) {
        parallel_for(static_cast<int>(samples_.size()), jobs_, [&](int i) {
            const Tensor<T> rgb = samples_[static_cast<size_t>(i)].image.template cast<T>();
            Tensor<T> u = st_.u[static_cast<size_t>(i)];
            for (int t = 0; t < steps; ++t)
                u = concat_s_rgb(render_s(part_net_forward(st_.part6, u), st_.cmap), rgb);
            st_.u[static_cast<size_t>(i)] = std::move(u);
        });
    }

    void write_checkpoint(const std::string& name) {
        if (ckpt_dir_.empty()) return;
        std::filesystem::create_directories(ckpt_dir_);
        save_checkpoint(to_checkpoint(), (std::filesystem::path(ckpt_dir_) / name).string());
    }

    PartStateSchema schema_;
    std::vector<Sample> samples_;
    TrainConfig cfg_;
    ArchConfig arch_rgb_, arch_rgbs_;
    TrainState<T> st_;
    Rng shuffle_rng_{0};
    std::ostream* log_ = nullptr;
    std::string ckpt_dir_;
    int jobs_ = 1;
};

}  // namespace isin
