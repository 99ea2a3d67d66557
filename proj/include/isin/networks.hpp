#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "isin/graph.hpp"
#include "isin/rng.hpp"
#include "isin/sgd.hpp"
#include "isin/tensor.hpp"

namespace isin {

struct ArchConfig {
    int input_size = 32;
    int input_channels = 3;  // 3 (RGB) or 6 (RGB-S)
    std::vector<int> conv_widths = {16, 32, 32};
    int num_parts = 3;
    int num_state_bins = 6;

    void validate() const {
        check(input_size >= 4 && input_size % 4 == 0, "arch: input_size must be divisible by 4");
        check(input_channels == 3 || input_channels == 6, "arch: input_channels must be 3 or 6");
        check(conv_widths.size() == 3, "arch: expected 3 conv widths");
        for (int w : conv_widths) check(w >= 1, "arch: conv width must be positive");
        check(num_parts >= 1, "arch: num_parts must be positive");
        check(num_state_bins >= 1, "arch: num_state_bins must be positive");
    }

    std::string fingerprint() const {
        std::ostringstream os;
        os << input_size << ":" << input_channels << ":";
        for (int w : conv_widths) os << w << ",";
        os << ":" << num_parts << ":" << num_state_bins;
        return os.str();
    }

    bool operator==(const ArchConfig& o) const = default;
};

template <typename T>
struct NetworkParams {
    ArchConfig arch;
    ParamStore<T> params;

    template <typename U>
    NetworkParams<U> cast() const {
        return NetworkParams<U>{arch, params.template cast<U>()};
    }
};

namespace detail {
template <typename T>
void add_conv(ParamStore<T>& p, const std::string& name, int kh, int kw, int cin, int cout, Rng& rng) {
    p.add(name + ".k", glorot_init<T>({kh, kw, cin, cout}, kh * kw * cin, kh * kw * cout, rng));
    p.add(name + ".b", Tensor<T>({cout}));
}
}  // namespace detail

/// Encoder-decoder segmentation net: conv3x3+relu+pool x2, conv3x3+relu,
/// two stride-2 transpose convs back to full resolution, 1x1 conv, softmax.
template <typename T>
NetworkParams<T> init_part_net(const ArchConfig& arch, Rng& rng) {
    arch.validate();
    const auto& w = arch.conv_widths;
    NetworkParams<T> net{arch, {}};
    detail::add_conv(net.params, "enc1", 3, 3, arch.input_channels, w[0], rng);
    detail::add_conv(net.params, "enc2", 3, 3, w[0], w[1], rng);
    detail::add_conv(net.params, "enc3", 3, 3, w[1], w[2], rng);
    detail::add_conv(net.params, "dec1", 2, 2, w[2], w[1], rng);
    detail::add_conv(net.params, "dec2", 2, 2, w[1], w[0], rng);
    detail::add_conv(net.params, "head", 1, 1, w[0], arch.num_parts + 1, rng);
    return net;
}

/// Classification net for the state vector: conv3x3+relu+pool x2,
/// conv3x3+relu, global average pool, fully connected to D logits.
template <typename T>
NetworkParams<T> init_state_net(const ArchConfig& arch, Rng& rng) {
    arch.validate();
    const auto& w = arch.conv_widths;
    NetworkParams<T> net{arch, {}};
    detail::add_conv(net.params, "c1", 3, 3, arch.input_channels, w[0], rng);
    detail::add_conv(net.params, "c2", 3, 3, w[0], w[1], rng);
    detail::add_conv(net.params, "c3", 3, 3, w[1], w[2], rng);
    net.params.add("fc.w", glorot_init<T>({w[2], arch.num_state_bins}, w[2], arch.num_state_bins, rng));
    net.params.add("fc.b", Tensor<T>({arch.num_state_bins}));
    return net;
}

namespace detail {
template <typename T>
struct BoundNet {
    Graph<T>* g;
    std::unordered_map<std::string, typename Graph<T>::NodeId> ids;

    typename Graph<T>::NodeId operator[](const std::string& name) const { return ids.at(name); }
};

/// Insert all parameters of a network as graph inputs.
template <typename T>
BoundNet<T> bind(Graph<T>& g, NetworkParams<T>& net, bool trainable) {
    BoundNet<T> b{&g, {}};
    for (const auto& name : net.params.order)
        b.ids[name] = g.input(net.params.value[name], trainable);
    return b;
}

/// Copy accumulated input-node gradients back into the store.
template <typename T>
void collect_grads(Graph<T>& g, NetworkParams<T>& net, const BoundNet<T>& b) {
    for (const auto& name : net.params.order) {
        const Tensor<T>& gt = g.grad(b[name]);
        Tensor<T>& acc = net.params.grad[name];
        for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += gt.data[i];
    }
}
}  // namespace detail

/// Part net forward inside an existing graph; returns the HxWx(k+1)
/// per-pixel probability node.
template <typename T>
typename Graph<T>::NodeId part_net_forward_node(Graph<T>& g, const detail::BoundNet<T>& p,
                                                typename Graph<T>::NodeId input) {
    auto x = g.relu(g.add_channel_bias(g.conv2d(input, p["enc1.k"], 1, 1), p["enc1.b"]));
    x = g.max_pool2x2(x);
    x = g.relu(g.add_channel_bias(g.conv2d(x, p["enc2.k"], 1, 1), p["enc2.b"]));
    x = g.max_pool2x2(x);
    x = g.relu(g.add_channel_bias(g.conv2d(x, p["enc3.k"], 1, 1), p["enc3.b"]));
    x = g.add_channel_bias(g.conv2d_transpose(x, p["dec1.k"], 2, 0), p["dec1.b"]);
    x = g.add_channel_bias(g.conv2d_transpose(x, p["dec2.k"], 2, 0), p["dec2.b"]);
    x = g.add_channel_bias(g.conv2d(x, p["head.k"], 1, 0), p["head.b"]);
    return g.softmax2d(x);
}

template <typename T>
typename Graph<T>::NodeId state_net_forward_node(Graph<T>& g, const detail::BoundNet<T>& p,
                                                 typename Graph<T>::NodeId input) {
    auto x = g.relu(g.add_channel_bias(g.conv2d(input, p["c1.k"], 1, 1), p["c1.b"]));
    x = g.max_pool2x2(x);
    x = g.relu(g.add_channel_bias(g.conv2d(x, p["c2.k"], 1, 1), p["c2.b"]));
    x = g.max_pool2x2(x);
    x = g.relu(g.add_channel_bias(g.conv2d(x, p["c3.k"], 1, 1), p["c3.b"]));
    x = g.global_avg_pool(x);
    return g.fully_connected(x, p["fc.w"], p["fc.b"]);
}

/// Standalone forward pass; pure function of (params, input).
template <typename T>
Tensor<T> part_net_forward(NetworkParams<T>& net, const Tensor<T>& input) {
    check(input.shape.size() == 3 && input.dim(2) == net.arch.input_channels,
          "part_net_forward: expected " + std::to_string(net.arch.input_channels) +
              " input channels, got " + input.shape_str());
    Graph<T> g;
    auto p = detail::bind(g, net, false);
    auto out = part_net_forward_node(g, p, g.input(input));
    return g.value(out);
}

template <typename T>
Tensor<T> state_net_forward(NetworkParams<T>& net, const Tensor<T>& input) {
    check(input.shape.size() == 3 && input.dim(2) == 6,
          "state_net_forward: expected HxWx6 input, got " + input.shape_str());
    Graph<T> g;
    auto p = detail::bind(g, net, false);
    auto out = state_net_forward_node(g, p, g.input(input));
    return g.value(out);
}

/// Pixelwise cross entropy on part probabilities.
template <typename T>
typename Graph<T>::NodeId seg_loss_node(Graph<T>& g, typename Graph<T>::NodeId probs,
                                        const Tensor<uint8_t>& labels, int num_parts) {
    Tensor<int> lab({labels.dim(0), labels.dim(1)});
    for (size_t i = 0; i < labels.data.size(); ++i) {
        check(labels.data[i] <= num_parts,
              "seg_loss: label id " + std::to_string(labels.data[i]) + " exceeds part count");
        lab.data[i] = labels.data[i];
    }
    return g.nll_loss(probs, lab);
}

/// Per-bin binary cross entropy on state logits.
template <typename T>
typename Graph<T>::NodeId state_loss_node(Graph<T>& g, typename Graph<T>::NodeId logits,
                                          const std::vector<uint8_t>& states) {
    return g.binary_cross_entropy(logits, states);
}

template <typename T>
T seg_loss(const Tensor<T>& probs, const Tensor<uint8_t>& labels, int num_parts) {
    Graph<T> g;
    auto l = seg_loss_node(g, g.input(probs), labels, num_parts);
    return g.value(l).data[0];
}

template <typename T>
T state_loss(const Tensor<T>& logits, const std::vector<uint8_t>& states) {
    Graph<T> g;
    auto l = state_loss_node(g, g.input(logits), states);
    return g.value(l).data[0];
}

}  // namespace isin
