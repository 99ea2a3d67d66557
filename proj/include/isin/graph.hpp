#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "isin/tensor.hpp"

namespace isin {

/// Tape-based reverse-mode autodiff over dense tensors.
///
/// A Graph owns one forward pass: ops append nodes in topological order,
/// backward() walks the tape in reverse. Inputs are copied in; parameters
/// live outside the graph (see ParamStore) and receive gradients through
/// the grad() accessor after backward().
template <typename T>
class Graph {
public:
    using NodeId = int;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    NodeId input(Tensor<T> v, bool needs_grad = false) {
        return push(std::move(v), needs_grad, {});
    }

    const Tensor<T>& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }

    /// Valid after backward(); zero tensor if the node was unreachable.
    const Tensor<T>& grad(NodeId id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        ensure_grad(n);
        return n.grad;
    }

    // ---- ops ------------------------------------------------------------

    NodeId conv2d(NodeId in, NodeId kernel, int stride, int pad) {
        const Tensor<T>& x = value(in);
        const Tensor<T>& k = value(kernel);
        check(x.shape.size() == 3, "conv2d: input must be HxWxC, got " + x.shape_str());
        check(k.shape.size() == 4, "conv2d: kernel must be kh x kw x Cin x Cout, got " + k.shape_str());
        const int h = x.dim(0), w = x.dim(1), cin = x.dim(2);
        const int kh = k.dim(0), kw = k.dim(1);
        check(k.dim(2) == cin, "conv2d: kernel Cin " + std::to_string(k.dim(2)) +
                                   " != input channels " + std::to_string(cin));
        check(stride >= 1, "conv2d: stride must be >= 1");
        check(kh <= h + 2 * pad && kw <= w + 2 * pad,
              "conv2d: kernel " + k.shape_str() + " larger than padded input " + x.shape_str());
        const int cout = k.dim(3);
        const int ho = (h + 2 * pad - kh) / stride + 1;
        const int wo = (w + 2 * pad - kw) / stride + 1;

        std::vector<T> cols;
        im2col(x, kh, kw, stride, pad, ho, wo, cols);
        Tensor<T> out({ho, wo, cout});
        matmul(cols.data(), k.data.data(), out.data.data(), ho * wo, kh * kw * cin, cout);

        NodeId id = push(std::move(out), needs(in) || needs(kernel), {in, kernel});
        if (node(id).needs_grad) {
            node(id).backward_fn = [this, id, in, kernel, stride, pad, kh, kw, cin, cout, ho, wo]() {
                const Tensor<T>& x2 = value(in);
                const Tensor<T>& k2 = value(kernel);
                const Tensor<T>& go = node(id).grad;
                std::vector<T> cols2;
                im2col(x2, kh, kw, stride, pad, ho, wo, cols2);
                const int rows = ho * wo, inner = kh * kw * cin;
                if (needs(kernel)) {
                    Tensor<T>& gk = grad_ref(kernel);
                    // gK[j][co] += sum_r cols[r][j] * go[r][co]
                    for (int r = 0; r < rows; ++r) {
                        const T* c = cols2.data() + static_cast<size_t>(r) * inner;
                        const T* g = go.data.data() + static_cast<size_t>(r) * cout;
                        for (int j = 0; j < inner; ++j) {
                            T cj = c[j];
                            if (cj == T(0)) continue;
                            T* gkj = gk.data.data() + static_cast<size_t>(j) * cout;
                            for (int co = 0; co < cout; ++co) gkj[co] += cj * g[co];
                        }
                    }
                }
                if (needs(in)) {
                    std::vector<T> gcols(static_cast<size_t>(rows) * inner, T(0));
                    // gCols[r][j] = sum_co go[r][co] * K[j][co]
                    for (int r = 0; r < rows; ++r) {
                        const T* g = go.data.data() + static_cast<size_t>(r) * cout;
                        T* gc = gcols.data() + static_cast<size_t>(r) * inner;
                        for (int j = 0; j < inner; ++j) {
                            const T* kj = k2.data.data() + static_cast<size_t>(j) * cout;
                            T acc = T(0);
                            for (int co = 0; co < cout; ++co) acc += g[co] * kj[co];
                            gc[j] = acc;
                        }
                    }
                    col2im_add(gcols, kh, kw, stride, pad, ho, wo, grad_ref(in));
                }
            };
        }
        return id;
    }

    NodeId conv2d_transpose(NodeId in, NodeId kernel, int stride, int pad) {
        const Tensor<T>& x = value(in);
        const Tensor<T>& k = value(kernel);
        check(x.shape.size() == 3, "conv2d_transpose: input must be HxWxC, got " + x.shape_str());
        check(k.shape.size() == 4, "conv2d_transpose: kernel must be kh x kw x Cin x Cout");
        const int h = x.dim(0), w = x.dim(1), cin = x.dim(2);
        const int kh = k.dim(0), kw = k.dim(1);
        check(k.dim(2) == cin, "conv2d_transpose: kernel Cin " + std::to_string(k.dim(2)) +
                                   " != input channels " + std::to_string(cin));
        const int cout = k.dim(3);
        const int ho = (h - 1) * stride + kh - 2 * pad;
        const int wo = (w - 1) * stride + kw - 2 * pad;
        check(ho > 0 && wo > 0, "conv2d_transpose: empty output for input " + x.shape_str());

        Tensor<T> out({ho, wo, cout});
        // out[iy*s+ky-p][ix*s+kx-p][co] += x[iy][ix][ci] * K[ky][kx][ci][co]
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < w; ++ix) {
                const T* xp = x.data.data() + (static_cast<size_t>(iy) * w + ix) * cin;
                for (int ky = 0; ky < kh; ++ky) {
                    const int oy = iy * stride + ky - pad;
                    if (oy < 0 || oy >= ho) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ox = ix * stride + kx - pad;
                        if (ox < 0 || ox >= wo) continue;
                        T* op = out.data.data() + (static_cast<size_t>(oy) * wo + ox) * cout;
                        const T* kp = k.data.data() + (static_cast<size_t>(ky) * kw + kx) * cin * cout;
                        for (int ci = 0; ci < cin; ++ci) {
                            const T xv = xp[ci];
                            if (xv == T(0)) continue;
                            const T* kc = kp + static_cast<size_t>(ci) * cout;
                            for (int co = 0; co < cout; ++co) op[co] += xv * kc[co];
                        }
                    }
                }
            }

        NodeId id = push(std::move(out), needs(in) || needs(kernel), {in, kernel});
        if (node(id).needs_grad) {
            node(id).backward_fn = [this, id, in, kernel, stride, pad, kh, kw, cin, cout, h, w, ho, wo]() {
                const Tensor<T>& x2 = value(in);
                const Tensor<T>& k2 = value(kernel);
                const Tensor<T>& go = node(id).grad;
                const bool gi = needs(in), gk = needs(kernel);
                Tensor<T>* gin = gi ? &grad_ref(in) : nullptr;
                Tensor<T>* gker = gk ? &grad_ref(kernel) : nullptr;
                for (int iy = 0; iy < h; ++iy)
                    for (int ix = 0; ix < w; ++ix) {
                        const T* xp = x2.data.data() + (static_cast<size_t>(iy) * w + ix) * cin;
                        T* gxp = gi ? gin->data.data() + (static_cast<size_t>(iy) * w + ix) * cin : nullptr;
                        for (int ky = 0; ky < kh; ++ky) {
                            const int oy = iy * stride + ky - pad;
                            if (oy < 0 || oy >= ho) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ox = ix * stride + kx - pad;
                                if (ox < 0 || ox >= wo) continue;
                                const T* gop = go.data.data() + (static_cast<size_t>(oy) * wo + ox) * cout;
                                const size_t kbase = (static_cast<size_t>(ky) * kw + kx) * cin * cout;
                                for (int ci = 0; ci < cin; ++ci) {
                                    const T* kc = k2.data.data() + kbase + static_cast<size_t>(ci) * cout;
                                    if (gi) {
                                        T acc = T(0);
                                        for (int co = 0; co < cout; ++co) acc += gop[co] * kc[co];
                                        gxp[ci] += acc;
                                    }
                                    if (gk) {
                                        const T xv = xp[ci];
                                        if (xv == T(0)) continue;
                                        T* gkc = gker->data.data() + kbase + static_cast<size_t>(ci) * cout;
                                        for (int co = 0; co < cout; ++co) gkc[co] += xv * gop[co];
                                    }
                                }
                            }
                        }
                    }
            };
        }
        return id;
    }

    NodeId relu(NodeId in) {
        Tensor<T> out = value(in);
        for (T& v : out.data)
            if (v < T(0)) v = T(0);
        NodeId id = push(std::move(out), needs(in), {in});
        if (node(id).needs_grad) {
            // subgradient at 0 is 0
            node(id).backward_fn = [this, id, in]() {
                const Tensor<T>& x = value(in);
                const Tensor<T>& go = node(id).grad;
                Tensor<T>& gx = grad_ref(in);
                for (size_t i = 0; i < x.data.size(); ++i)
                    if (x.data[i] > T(0)) gx.data[i] += go.data[i];
            };
        }
        return id;
    }

    /// input: flat vector of length n; weights: n x m; bias: m.
    NodeId fully_connected(NodeId in, NodeId weights, NodeId bias) {
        const Tensor<T>& x = value(in);
        const Tensor<T>& wt = value(weights);
        const Tensor<T>& b = value(bias);
        check(wt.shape.size() == 2, "fully_connected: weights must be n x m");
        const int n = wt.dim(0), m = wt.dim(1);
        check(x.numel() == n, "fully_connected: input length " + std::to_string(x.numel()) +
                                  " != weight rows " + std::to_string(n));
        check(b.numel() == m, "fully_connected: bias length mismatch");
        Tensor<T> out({m});
        for (int j = 0; j < m; ++j) out.data[j] = b.data[j];
        for (int i = 0; i < n; ++i) {
            const T xi = x.data[i];
            const T* wr = wt.data.data() + static_cast<size_t>(i) * m;
            for (int j = 0; j < m; ++j) out.data[j] += xi * wr[j];
        }
        NodeId id = push(std::move(out), needs(in) || needs(weights) || needs(bias), {in, weights, bias});
        if (node(id).needs_grad) {
            node(id).backward_fn = [this, id, in, weights, bias, n, m]() {
                const Tensor<T>& x2 = value(in);
                const Tensor<T>& w2 = value(weights);
                const Tensor<T>& go = node(id).grad;
                if (needs(bias)) {
                    Tensor<T>& gb = grad_ref(bias);
                    for (int j = 0; j < m; ++j) gb.data[j] += go.data[j];
                }
                if (needs(weights)) {
                    Tensor<T>& gw = grad_ref(weights);
                    for (int i = 0; i < n; ++i) {
                        const T xi = x2.data[i];
                        T* gwr = gw.data.data() + static_cast<size_t>(i) * m;
                        for (int j = 0; j < m; ++j) gwr[j] += xi * go.data[j];
                    }
                }
                if (needs(in)) {
                    Tensor<T>& gx = grad_ref(in);
                    for (int i = 0; i < n; ++i) {
                        const T* wr = w2.data.data() + static_cast<size_t>(i) * m;
                        T acc = T(0);
                        for (int j = 0; j < m; ++j) acc += wr[j] * go.data[j];
                        gx.data[i] += acc;
                    }
                }
            };
        }
        return id;
    }

    NodeId max_pool2x2(NodeId in) {
        const Tensor<T>& x = value(in);
        check(x.shape.size() == 3, "max_pool2x2: input must be HxWxC");
        const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
        check(h % 2 == 0 && w % 2 == 0, "max_pool2x2: dims must be even, got " + x.shape_str());
        const int ho = h / 2, wo = w / 2;
        Tensor<T> out({ho, wo, c});
        auto argmax = std::make_shared<std::vector<uint32_t>>(out.data.size());
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox)
                for (int ch = 0; ch < c; ++ch) {
                    size_t best = ((static_cast<size_t>(2 * oy) * w) + 2 * ox) * c + ch;
                    T bv = x.data[best];
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            size_t off = ((static_cast<size_t>(2 * oy + dy) * w) + 2 * ox + dx) * c + ch;
                            if (x.data[off] > bv) {
                                bv = x.data[off];
                                best = off;
                            }
                        }
                    size_t o = (static_cast<size_t>(oy) * wo + ox) * c + ch;
                    out.data[o] = bv;
                    (*argmax)[o] = static_cast<uint32_t>(best);
                }
        NodeId id = push(std::move(out), needs(in), {in});
        if (node(id).needs_grad) {
            node(id).backward_fn = [this, id, in, argmax]() {
                const Tensor<T>& go = node(id).grad;
                Tensor<T>& gx = grad_ref(in);
                for (size_t i = 0; i < go.data.size(); ++i) gx.data[(*argmax)[i]] += go.data[i];
            };
        }
        return id;
    }

    /// H x W x C -> C
    NodeId global_avg_pool(NodeId in) {
        const Tensor<T>& x = value(in);
        check(x.shape.size() == 3, "global_avg_pool: input must be HxWxC");
        const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
        Tensor<T> out({c});
        const T inv = T(1) / static_cast<T>(h * w);
        for (int p = 0; p < h * w; ++p) {
            const T* xp = x.data.data() + static_cast<size_t>(p) * c;
            for (int ch = 0; ch < c; ++ch) out.data[ch] += xp[ch];
        }
        for (int ch = 0; ch < c; ++ch) out.data[ch] *= inv;
        NodeId id = push(std::move(out), needs(in), {in});
        if (node(id).needs_grad) {
            node(id).backward_fn = [this, id, in, h, w, c, inv]() {
                const Tensor<T>& go = node(id).grad;
                Tensor<T>& gx = grad_ref(in);
                for (int p = 0; p < h * w; ++p) {
                    T* gp = gx.data.data() + static_cast<size_t>(p) * c;
                    for (int ch = 0; ch < c; ++ch) gp[ch] += go.data[ch] * inv;
                }
            };
        }
        return id;
    }

    NodeId concat_channels(NodeId a, NodeId b) {
        const Tensor<T>& xa = value(a);
        const Tensor<T>& xb = value(b);
        check(xa.shape.size() == 3 && xb.shape.size() == 3, "concat_channels: inputs must be HxWxC");
        check(xa.dim(0) == xb.dim(0) && xa.dim(1) == xb.dim(1),
              "concat_channels: spatial dims differ, " + xa.shape_str() + " vs " + xb.shape_str());
        const int h = xa.dim(0), w = xa.dim(1), ca = xa.dim(2), cb = xb.dim(2);
        Tensor<T> out({h, w, ca + cb});
        for (int p = 0; p < h * w; ++p) {
            T* op = out.data.data() + static_cast<size_t>(p) * (ca + cb);
            const T* ap = xa.data.data() + static_cast<size_t>(p) * ca;
            const T* bp = xb.data.data() + static_cast<size_t>(p) * cb;
            for (int ch = 0; ch < ca; ++ch) op[ch] = ap[ch];
            for (int ch = 0; ch < cb; ++ch) op[ca + ch] = bp[ch];
        }
        NodeId id = push(std::move(out), needs(a) || needs(b), {a, b});
        if (node(id).needs_grad) {
            node(id).backward_fn = [this, id, a, b, h, w, ca, cb]() {
                const Tensor<T>& go = node(id).grad;
                for (int p = 0; p < h * w; ++p) {
                    const T* gp = go.data.data() + static_cast<size_t>(p) * (ca + cb);
                    if (needs(a)) {
                        T* ga = grad_ref(a).data.data() + static_cast<size_t>(p) * ca;
                        for (int ch = 0; ch < ca; ++ch) ga[ch] += gp[ch];
                    }
                    if (needs(b)) {
                        T* gb = grad_ref(b).data.data() + static_cast<size_t>(p) * cb;
                        for (int ch = 0; ch < cb; ++ch) gb[ch] += gp[ca + ch];
                    }
                }
            };
        }
        return id;
    }

    /// HxWxC plus a length-C bias, broadcast over pixels.
    NodeId add_channel_bias(NodeId in, NodeId bias) {
        const Tensor<T>& x = value(in);
        const Tensor<T>& b = value(bias);
        check(x.shape.size() == 3, "add_channel_bias: input must be HxWxC");
        const int hw = x.dim(0) * x.dim(1), c = x.dim(2);
        check(b.numel() == c, "add_channel_bias: bias length must equal channels");
        Tensor<T> out = x;
        for (int p = 0; p < hw; ++p) {
            T* op = out.data.data() + static_cast<size_t>(p) * c;
            for (int ch = 0; ch < c; ++ch) op[ch] += b.data[static_cast<size_t>(ch)];
        }
        NodeId id = push(std::move(out), needs(in) || needs(bias), {in, bias});
        if (node(id).needs_grad) {
            node(id).backward_fn = [this, id, in, bias, hw, c]() {
                const Tensor<T>& go = node(id).grad;
                if (needs(in)) {
                    Tensor<T>& gx = grad_ref(in);
                    for (size_t i = 0; i < go.data.size(); ++i) gx.data[i] += go.data[i];
                }
                if (needs(bias)) {
                    Tensor<T>& gb = grad_ref(bias);
                    for (int p = 0; p < hw; ++p)
                        for (int ch = 0; ch < c; ++ch)
                            gb.data[static_cast<size_t>(ch)] += go.data[static_cast<size_t>(p) * c + ch];
                }
            };
        }
        return id;
    }

    NodeId slice_channels(NodeId in, int from, int count) {
        const Tensor<T>& x = value(in);
        check(x.shape.size() == 3, "slice_channels: input must be HxWxC");
        const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
        check(from >= 0 && from + count <= c, "slice_channels: range out of bounds");
        Tensor<T> out({h, w, count});
        for (int p = 0; p < h * w; ++p)
            for (int ch = 0; ch < count; ++ch)
                out.data[static_cast<size_t>(p) * count + ch] =
                    x.data[static_cast<size_t>(p) * c + from + ch];
        NodeId id = push(std::move(out), needs(in), {in});
        if (node(id).needs_grad) {
            node(id).backward_fn = [this, id, in, h, w, c, from, count]() {
                const Tensor<T>& go = node(id).grad;
                Tensor<T>& gx = grad_ref(in);
                for (int p = 0; p < h * w; ++p)
                    for (int ch = 0; ch < count; ++ch)
                        gx.data[static_cast<size_t>(p) * c + from + ch] +=
                            go.data[static_cast<size_t>(p) * count + ch];
            };
        }
        return id;
    }

    /// Per-pixel softmax over the channel axis.
    NodeId softmax2d(NodeId in) {
        const Tensor<T>& x = value(in);
        check(x.shape.size() == 3, "softmax2d: input must be HxWxC");
        const int hw = x.dim(0) * x.dim(1), c = x.dim(2);
        Tensor<T> out = x;
        for (int p = 0; p < hw; ++p) softmax_row(out.data.data() + static_cast<size_t>(p) * c, c);
        NodeId id = push(std::move(out), needs(in), {in});
        if (node(id).needs_grad) {
            node(id).backward_fn = [this, id, in, hw, c]() {
                const Tensor<T>& y = node(id).value;
                const Tensor<T>& go = node(id).grad;
                Tensor<T>& gx = grad_ref(in);
                for (int p = 0; p < hw; ++p) {
                    const T* yp = y.data.data() + static_cast<size_t>(p) * c;
                    const T* gp = go.data.data() + static_cast<size_t>(p) * c;
                    T dot = T(0);
                    for (int ch = 0; ch < c; ++ch) dot += yp[ch] * gp[ch];
                    T* gxp = gx.data.data() + static_cast<size_t>(p) * c;
                    for (int ch = 0; ch < c; ++ch) gxp[ch] += yp[ch] * (gp[ch] - dot);
                }
            };
        }
        return id;
    }

    /// Per-pixel channel mixing by a constant Cin x Cout matrix.
    NodeId channel_linear(NodeId in, const Tensor<T>& matrix) {
        const Tensor<T>& x = value(in);
        check(x.shape.size() == 3, "channel_linear: input must be HxWxC");
        check(matrix.shape.size() == 2 && matrix.dim(0) == x.dim(2),
              "channel_linear: matrix rows must equal input channels");
        const int hw = x.dim(0) * x.dim(1), cin = x.dim(2), cout = matrix.dim(1);
        Tensor<T> out({x.dim(0), x.dim(1), cout});
        matmul(x.data.data(), matrix.data.data(), out.data.data(), hw, cin, cout);
        NodeId id = push(std::move(out), needs(in), {in});
        if (node(id).needs_grad) {
            auto m = std::make_shared<Tensor<T>>(matrix);
            node(id).backward_fn = [this, id, in, m, hw, cin, cout]() {
                const Tensor<T>& go = node(id).grad;
                Tensor<T>& gx = grad_ref(in);
                for (int p = 0; p < hw; ++p) {
                    const T* gp = go.data.data() + static_cast<size_t>(p) * cout;
                    T* gxp = gx.data.data() + static_cast<size_t>(p) * cin;
                    for (int ci = 0; ci < cin; ++ci) {
                        const T* mr = m->data.data() + static_cast<size_t>(ci) * cout;
                        T acc = T(0);
                        for (int co = 0; co < cout; ++co) acc += gp[co] * mr[co];
                        gxp[ci] += acc;
                    }
                }
            };
        }
        return id;
    }

    /// Fused softmax + cross entropy. logits: HxWxC with a per-pixel class
    /// map, or a flat length-C vector with a single class index in labels.
    NodeId softmax_cross_entropy(NodeId logits, const Tensor<int>& labels) {
        const Tensor<T>& x = value(logits);
        int hw, c;
        if (x.shape.size() == 3) {
            hw = x.dim(0) * x.dim(1);
            c = x.dim(2);
            check(labels.shape.size() == 2 && labels.dim(0) == x.dim(0) && labels.dim(1) == x.dim(1),
                  "softmax_cross_entropy: label map dims must match logits");
        } else {
            hw = 1;
            c = static_cast<int>(x.numel());
            check(labels.numel() == 1, "softmax_cross_entropy: expected a single class index");
        }
        auto probs = std::make_shared<Tensor<T>>(x);
        double loss = 0;
        for (int p = 0; p < hw; ++p) {
            const int cls = labels.data[static_cast<size_t>(p)];
            check(cls >= 0 && cls < c,
                  "softmax_cross_entropy: class " + std::to_string(cls) + " out of range [0," +
                      std::to_string(c) + ")");
            T* row = probs->data.data() + static_cast<size_t>(p) * c;
            softmax_row(row, c);
            loss -= std::log(std::max(static_cast<double>(row[cls]), 1e-300));
        }
        Tensor<T> out({1});
        out.data[0] = static_cast<T>(loss / hw);
        NodeId id = push(std::move(out), needs(logits), {logits});
        if (node(id).needs_grad) {
            auto lab = std::make_shared<Tensor<int>>(labels);
            node(id).backward_fn = [this, id, logits, probs, lab, hw, c]() {
                const T g = node(id).grad.data[0] / static_cast<T>(hw);
                Tensor<T>& gx = grad_ref(logits);
                for (int p = 0; p < hw; ++p) {
                    const T* row = probs->data.data() + static_cast<size_t>(p) * c;
                    T* gp = gx.data.data() + static_cast<size_t>(p) * c;
                    const int cls = lab->data[static_cast<size_t>(p)];
                    for (int ch = 0; ch < c; ++ch) gp[ch] += g * (row[ch] - (ch == cls ? T(1) : T(0)));
                }
            };
        }
        return id;
    }

    /// Negative log likelihood on probabilities with a per-pixel class map.
    NodeId nll_loss(NodeId probs, const Tensor<int>& labels) {
        const Tensor<T>& x = value(probs);
        check(x.shape.size() == 3, "nll_loss: probs must be HxWxC");
        const int hw = x.dim(0) * x.dim(1), c = x.dim(2);
        check(labels.shape.size() == 2 && labels.dim(0) == x.dim(0) && labels.dim(1) == x.dim(1),
              "nll_loss: label map dims must match probs");
        double loss = 0;
        for (int p = 0; p < hw; ++p) {
            const int cls = labels.data[static_cast<size_t>(p)];
            check(cls >= 0 && cls < c, "nll_loss: class " + std::to_string(cls) + " out of range");
            loss -= std::log(std::max(static_cast<double>(x.data[static_cast<size_t>(p) * c + cls]), 1e-300));
        }
        Tensor<T> out({1});
        out.data[0] = static_cast<T>(loss / hw);
        NodeId id = push(std::move(out), needs(probs), {probs});
        if (node(id).needs_grad) {
            auto lab = std::make_shared<Tensor<int>>(labels);
            node(id).backward_fn = [this, id, probs, lab, hw, c]() {
                const T g = node(id).grad.data[0] / static_cast<T>(hw);
                const Tensor<T>& x2 = value(probs);
                Tensor<T>& gx = grad_ref(probs);
                for (int p = 0; p < hw; ++p) {
                    const int cls = lab->data[static_cast<size_t>(p)];
                    const size_t off = static_cast<size_t>(p) * c + cls;
                    gx.data[off] -= g / std::max(x2.data[off], static_cast<T>(1e-30));
                }
            };
        }
        return id;
    }

    /// Mean per-bin binary cross entropy on logits; targets must be 0/1.
    NodeId binary_cross_entropy(NodeId logits, const std::vector<uint8_t>& targets) {
        const Tensor<T>& x = value(logits);
        check(static_cast<size_t>(x.numel()) == targets.size(),
              "binary_cross_entropy: logit/target length mismatch");
        for (uint8_t t : targets)
            check(t == 0 || t == 1, "binary_cross_entropy: target must be 0 or 1");
        const int n = static_cast<int>(targets.size());
        double loss = 0;
        for (int i = 0; i < n; ++i) {
            const double z = static_cast<double>(x.data[static_cast<size_t>(i)]);
            const double t = targets[static_cast<size_t>(i)];
            // max(z,0) - z*t + log(1+exp(-|z|))
            loss += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
        }
        Tensor<T> out({1});
        out.data[0] = static_cast<T>(loss / n);
        NodeId id = push(std::move(out), needs(logits), {logits});
        if (node(id).needs_grad) {
            auto tg = std::make_shared<std::vector<uint8_t>>(targets);
            node(id).backward_fn = [this, id, logits, tg, n]() {
                const T g = node(id).grad.data[0] / static_cast<T>(n);
                const Tensor<T>& x2 = value(logits);
                Tensor<T>& gx = grad_ref(logits);
                for (int i = 0; i < n; ++i) {
                    const double z = static_cast<double>(x2.data[static_cast<size_t>(i)]);
                    const double s = 1.0 / (1.0 + std::exp(-z));
                    gx.data[static_cast<size_t>(i)] += g * static_cast<T>(s - (*tg)[static_cast<size_t>(i)]);
                }
            };
        }
        return id;
    }

    NodeId add(NodeId a, NodeId b) {
        const Tensor<T>& xa = value(a);
        const Tensor<T>& xb = value(b);
        check(xa.same_shape(xb), "add: shape mismatch " + xa.shape_str() + " vs " + xb.shape_str());
        Tensor<T> out = xa;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += xb.data[i];
        NodeId id = push(std::move(out), needs(a) || needs(b), {a, b});
        if (node(id).needs_grad) {
            node(id).backward_fn = [this, id, a, b]() {
                const Tensor<T>& go = node(id).grad;
                if (needs(a)) {
                    Tensor<T>& ga = grad_ref(a);
                    for (size_t i = 0; i < go.data.size(); ++i) ga.data[i] += go.data[i];
                }
                if (needs(b)) {
                    Tensor<T>& gb = grad_ref(b);
                    for (size_t i = 0; i < go.data.size(); ++i) gb.data[i] += go.data[i];
                }
            };
        }
        return id;
    }

    NodeId scale(NodeId in, T factor) {
        Tensor<T> out = value(in);
        for (T& v : out.data) v *= factor;
        NodeId id = push(std::move(out), needs(in), {in});
        if (node(id).needs_grad) {
            node(id).backward_fn = [this, id, in, factor]() {
                const Tensor<T>& go = node(id).grad;
                Tensor<T>& gx = grad_ref(in);
                for (size_t i = 0; i < go.data.size(); ++i) gx.data[i] += factor * go.data[i];
            };
        }
        return id;
    }

    // ---- backward -------------------------------------------------------

    void backward(NodeId loss) {
        Node& l = node(loss);
        check(l.value.numel() == 1, "backward: loss must be scalar, got " + l.value.shape_str());
        check(std::isfinite(static_cast<double>(l.value.data[0])),
              "backward: loss is not finite");
        ensure_grad(l);
        l.grad.data[0] = T(1);
        for (int id = loss; id >= 0; --id) {
            Node& n = node(id);
            if (n.backward_fn && n.grad.numel() > 0) n.backward_fn();
        }
    }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;  // empty until touched
        bool needs_grad = false;
        std::function<void()> backward_fn;
    };

    NodeId push(Tensor<T> v, bool needs_grad, std::vector<NodeId>) {
        nodes_.push_back(Node{std::move(v), {}, needs_grad, nullptr});
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    Node& node(NodeId id) { return nodes_[static_cast<size_t>(id)]; }
    bool needs(NodeId id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

    void ensure_grad(Node& n) {
        if (n.grad.numel() == 0) n.grad = Tensor<T>(n.value.shape);
    }

    Tensor<T>& grad_ref(NodeId id) {
        Node& n = node(id);
        ensure_grad(n);
        return n.grad;
    }

    static void softmax_row(T* row, int c) {
        T mx = row[0];
        for (int i = 1; i < c; ++i) mx = std::max(mx, row[i]);
        T sum = T(0);
        for (int i = 0; i < c; ++i) {
            row[i] = std::exp(row[i] - mx);
            sum += row[i];
        }
        const T inv = T(1) / sum;
        for (int i = 0; i < c; ++i) row[i] *= inv;
    }

    /// out[M x N] = a[M x K] * b[K x N], accumulating into zeroed out.
    static void matmul(const T* a, const T* b, T* out, int m, int k, int n) {
        for (int i = 0; i < m; ++i) {
            T* o = out + static_cast<size_t>(i) * n;
            const T* ar = a + static_cast<size_t>(i) * k;
            for (int kk = 0; kk < k; ++kk) {
                const T av = ar[kk];
                if (av == T(0)) continue;
                const T* br = b + static_cast<size_t>(kk) * n;
                for (int j = 0; j < n; ++j) o[j] += av * br[j];
            }
        }
    }

    static void im2col(const Tensor<T>& x, int kh, int kw, int stride, int pad, int ho, int wo,
                       std::vector<T>& cols) {
        const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
        const int inner = kh * kw * c;
        cols.assign(static_cast<size_t>(ho) * wo * inner, T(0));
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                T* row = cols.data() + (static_cast<size_t>(oy) * wo + ox) * inner;
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= w) continue;
                        const T* src = x.data.data() + (static_cast<size_t>(iy) * w + ix) * c;
                        T* dst = row + (static_cast<size_t>(ky) * kw + kx) * c;
                        for (int ch = 0; ch < c; ++ch) dst[ch] = src[ch];
                    }
                }
            }
    }

    void col2im_add(const std::vector<T>& cols, int kh, int kw, int stride, int pad, int ho, int wo,
                    Tensor<T>& gx) {
        const int h = gx.dim(0), w = gx.dim(1), c = gx.dim(2);
        const int inner = kh * kw * c;
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                const T* row = cols.data() + (static_cast<size_t>(oy) * wo + ox) * inner;
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= w) continue;
                        T* dst = gx.data.data() + (static_cast<size_t>(iy) * w + ix) * c;
                        const T* src = row + (static_cast<size_t>(ky) * kw + kx) * c;
                        for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
                    }
                }
            }
    }

    std::vector<Node> nodes_;
};

}  // namespace isin
