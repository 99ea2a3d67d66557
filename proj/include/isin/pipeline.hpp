#pragma once

#include <string>
#include <vector>

#include "isin/dataset.hpp"
#include "isin/evaluator.hpp"
#include "isin/trainer.hpp"

namespace isin {

/// Per-sample model output in evaluation form. `has_labels` is false for
/// models without a segmentation head (baseline1); their detections fall
/// back to the whole image as segment.
struct SamplePrediction {
    bool has_labels = false;
    Tensor<uint8_t> labels;
    std::vector<double> state_scores;
};

/// Expand one sample into scored detections and ground-truth instances:
/// one detection per (part segment, state bin of that part), one GT per
/// set state bin of a visible part.
inline void build_eval_instances(const PartStateSchema& schema, int image_idx,
                                 const SamplePrediction& pred, const Sample& gt,
                                 std::vector<Detection>& dets, std::vector<GroundTruth>& gts) {
    const int h = gt.labels.dim(0), w = gt.labels.dim(1);
    for (int p = 1; p <= schema.num_parts(); ++p) {
        Mask gt_mask = Mask::from_labels(gt.labels, static_cast<uint8_t>(p));
        if (gt_mask.count() > 0) {
            const int off = schema.bin_offset(p);
            for (int b = 0; b < schema.bins_of(p); ++b)
                if (gt.states[static_cast<size_t>(off + b)])
                    gts.push_back({image_idx, off + b, gt_mask});
        }
        Mask pred_mask = pred.has_labels ? Mask::from_labels(pred.labels, static_cast<uint8_t>(p))
                                         : Mask::full(h, w);
        if (pred_mask.count() == 0) continue;
        const int off = schema.bin_offset(p);
        for (int b = 0; b < schema.bins_of(p); ++b)
            dets.push_back({image_idx, off + b, pred_mask,
                            pred.state_scores[static_cast<size_t>(off + b)]});
    }
}

struct EvalReport {
    PartStateMapResult state_map;
    double mean_seg_accuracy = 0;
};

inline EvalReport evaluate_predictions(const PartStateSchema& schema,
                                       const std::vector<SamplePrediction>& preds,
                                       const std::vector<Sample>& samples) {
    check(preds.size() == samples.size(), "evaluate: prediction/sample count mismatch");
    std::vector<Detection> dets;
    std::vector<GroundTruth> gts;
    double acc = 0;
    for (size_t i = 0; i < samples.size(); ++i) {
        build_eval_instances(schema, static_cast<int>(i), preds[i], samples[i], dets, gts);
        if (preds[i].has_labels) acc += seg_accuracy(preds[i].labels, samples[i].labels);
    }
    EvalReport rep;
    rep.state_map = part_state_map(dets, gts);
    rep.mean_seg_accuracy = samples.empty() ? 0 : acc / static_cast<double>(samples.size());
    return rep;
}

template <typename T>
SamplePrediction predict_sample(const Checkpoint<T>& ckpt, const Sample& s) {
    InferResult<T> r = Trainer<T>::infer(ckpt, s.image.template cast<T>());
    SamplePrediction p;
    p.has_labels = r.part_probs.numel() > 0;
    p.labels = r.label_map;
    p.state_scores = r.state_scores;
    return p;
}

template <typename T>
EvalReport evaluate_checkpoint(const Checkpoint<T>& ckpt, const PartStateSchema& schema,
                               const std::vector<Sample>& samples) {
    std::vector<SamplePrediction> preds;
    preds.reserve(samples.size());
    for (const auto& s : samples) preds.push_back(predict_sample(ckpt, s));
    return evaluate_predictions(schema, preds, samples);
}

/// State mAP when the model is fed ground-truth S images; segments are
/// the GT masks, so only state scoring is measured.
template <typename T>
double state_map_with_gt_segments(const Checkpoint<T>& ckpt, const PartStateSchema& schema,
                                  const std::vector<Sample>& samples) {
    std::vector<SamplePrediction> preds;
    preds.reserve(samples.size());
    for (const auto& s : samples) {
        SamplePrediction p;
        p.has_labels = true;
        p.labels = s.labels;
        p.state_scores = Trainer<T>::infer_states_with_gt_s(ckpt, s.image.template cast<T>(), s.labels);
        preds.push_back(std::move(p));
    }
    std::vector<Detection> dets;
    std::vector<GroundTruth> gts;
    for (size_t i = 0; i < samples.size(); ++i)
        build_eval_instances(schema, static_cast<int>(i), preds[i], samples[i], dets, gts);
    return part_state_map(dets, gts).map;
}

}  // namespace isin
