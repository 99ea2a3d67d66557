#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "isin/tensor.hpp"

namespace isin {

/// Binary pixel mask over an image grid.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> bits;  // row-major, 0/1

    static Mask from_labels(const Tensor<uint8_t>& labels, uint8_t cls) {
        Mask m;
        m.height = labels.dim(0);
        m.width = labels.dim(1);
        m.bits.resize(labels.data.size());
        for (size_t i = 0; i < labels.data.size(); ++i) m.bits[i] = labels.data[i] == cls;
        return m;
    }

    static Mask full(int height, int width) {
        Mask m{height, width, {}};
        m.bits.assign(static_cast<size_t>(height) * width, 1);
        return m;
    }

    int count() const { return static_cast<int>(std::count(bits.begin(), bits.end(), 1)); }
};

/// |a n b| / |a u b|; both empty -> 0.
inline double iou(const Mask& a, const Mask& b) {
    check(a.height == b.height && a.width == b.width,
          "iou: masks cover different grids (" + std::to_string(a.height) + "x" +
              std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
              std::to_string(b.width) + ")");
    int inter = 0, uni = 0;
    for (size_t i = 0; i < a.bits.size(); ++i) {
        inter += a.bits[i] & b.bits[i];
        uni += a.bits[i] | b.bits[i];
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

/// One scored segment prediction. class_id selects which ground truths it
/// may match; image scopes the matching.
struct Detection {
    int image = 0;
    int class_id = 0;
    Mask mask;
    double score = 0;
};

struct GroundTruth {
    int image = 0;
    int class_id = 0;
    Mask mask;
};

struct PrCurve {
    std::vector<std::pair<double, double>> points;  // (recall, precision)
    double average_precision = 0;
};

/// PASCAL-style AP: rank by score (ties keep insertion order), greedily
/// match to the highest-IoU unmatched same-class ground truth of the same
/// image, true positive iff IoU > threshold, all-points interpolation.
inline PrCurve average_precision(const std::vector<Detection>& detections,
                                 const std::vector<GroundTruth>& ground_truths,
                                 double iou_threshold = 0.5) {
    PrCurve out;
    const size_t ng = ground_truths.size();
    if (ng == 0) {
        out.average_precision = detections.empty() ? 1.0 : 0.0;
        return out;
    }
    std::vector<size_t> order(detections.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return detections[a].score > detections[b].score; });

    std::vector<uint8_t> gt_used(ng, 0);
    std::vector<uint8_t> tp(order.size(), 0);
    for (size_t r = 0; r < order.size(); ++r) {
        const Detection& d = detections[order[r]];
        double best_iou = -1;
        size_t best = ng;
        for (size_t g = 0; g < ng; ++g) {
            if (gt_used[g]) continue;
            const GroundTruth& gt = ground_truths[g];
            if (gt.image != d.image || gt.class_id != d.class_id) continue;
            const double v = iou(d.mask, gt.mask);
            if (v > best_iou) {
                best_iou = v;
                best = g;
            }
        }
        if (best < ng && best_iou > iou_threshold) {
            gt_used[best] = 1;
            tp[r] = 1;
        }
    }

    std::vector<double> prec(order.size()), rec(order.size());
    int tp_cum = 0;
    for (size_t r = 0; r < order.size(); ++r) {
        tp_cum += tp[r];
        prec[r] = static_cast<double>(tp_cum) / static_cast<double>(r + 1);
        rec[r] = static_cast<double>(tp_cum) / static_cast<double>(ng);
        out.points.emplace_back(rec[r], prec[r]);
    }
    // precision envelope, then area under the step curve
    for (size_t r = order.size(); r-- > 1;) prec[r - 1] = std::max(prec[r - 1], prec[r]);
    double ap = 0, prev_rec = 0;
    for (size_t r = 0; r < order.size(); ++r) {
        if (rec[r] > prev_rec) {
            ap += (rec[r] - prev_rec) * prec[r];
            prev_rec = rec[r];
        }
    }
    out.average_precision = ap;
    return out;
}

struct PartStateMapResult {
    std::map<int, double> per_bin_ap;  // state bin -> AP, only bins present in GT
    double map = 0;
};

/// Segment-IoU mAP over state bins: a detection is a (segment, state bin,
/// score) triple, correct iff its mask overlaps (IoU > threshold) a GT
/// part whose bin is set. Bins absent from GT are left out of the mean.
inline PartStateMapResult part_state_map(const std::vector<Detection>& detections,
                                         const std::vector<GroundTruth>& ground_truths,
                                         double iou_threshold = 0.5) {
    PartStateMapResult res;
    std::vector<int> bins;
    for (const auto& g : ground_truths)
        if (std::find(bins.begin(), bins.end(), g.class_id) == bins.end()) bins.push_back(g.class_id);
    std::sort(bins.begin(), bins.end());
    if (bins.empty()) return res;
    double sum = 0;
    for (int bin : bins) {
        std::vector<Detection> d;
        std::vector<GroundTruth> g;
        for (const auto& x : detections)
            if (x.class_id == bin) d.push_back(x);
        for (const auto& x : ground_truths)
            if (x.class_id == bin) g.push_back(x);
        const double ap = average_precision(d, g, iou_threshold).average_precision;
        res.per_bin_ap[bin] = ap;
        sum += ap;
    }
    res.map = sum / static_cast<double>(bins.size());
    return res;
}

/// Mean over part classes present in GT of per-class pixel recall.
inline double seg_accuracy(const Tensor<uint8_t>& pred, const Tensor<uint8_t>& gt) {
    check(pred.shape == gt.shape, "seg_accuracy: dimension mismatch");
    uint8_t maxc = 0;
    for (uint8_t v : gt.data) maxc = std::max(maxc, v);
    double sum = 0;
    int classes = 0;
    for (int c = 1; c <= maxc; ++c) {
        int correct = 0, total = 0;
        for (size_t i = 0; i < gt.data.size(); ++i) {
            if (gt.data[i] != c) continue;
            ++total;
            correct += pred.data[i] == c;
        }
        if (total == 0) continue;
        sum += static_cast<double>(correct) / total;
        ++classes;
    }
    return classes == 0 ? 0.0 : sum / classes;
}

/// Fraction of ground-truth items appearing in their image's top-k ranked
/// predictions. `ranked[i]` must already be sorted by descending score.
inline double recall_at_k(const std::vector<std::vector<int64_t>>& ranked,
                          const std::vector<std::vector<int64_t>>& ground_truth, int k) {
    check(k > 0, "recall_at_k: k must be positive");
    check(ranked.size() == ground_truth.size(), "recall_at_k: per-image list count mismatch");
    int hits = 0, total = 0;
    for (size_t img = 0; img < ranked.size(); ++img) {
        const auto& r = ranked[img];
        const size_t top = std::min(static_cast<size_t>(k), r.size());
        for (int64_t gt : ground_truth[img]) {
            ++total;
            for (size_t i = 0; i < top; ++i)
                if (r[i] == gt) {
                    ++hits;
                    break;
                }
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(hits) / total;
}

}  // namespace isin
