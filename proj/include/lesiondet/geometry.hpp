#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "lesiondet/types.hpp"

namespace lesiondet {

// Intersection over union. Returns 0 when the union is empty, so the
// function is total on valid (possibly zero-area) boxes.
inline double iou(const Box& a, const Box& b) {
    double inter = intersection_area(a, b);
    double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

namespace detail {

// Deterministic detection ordering: score descending, then smaller area,
// then input order. Shared by nms and greedy_match so results are
// oracle-comparable.
inline std::vector<int> score_order(const std::vector<Detection>& dets) {
    std::vector<int> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        if (dets[i].score != dets[j].score) return dets[i].score > dets[j].score;
        double ai = dets[i].box.area(), aj = dets[j].box.area();
        if (ai != aj) return ai < aj;
        return i < j;
    });
    return order;
}

}  // namespace detail

// Greedy non-maximum suppression. A detection is kept iff its IoU with
// every already-kept detection (of the same class when class_aware) is
// strictly below tau. Output preserves the kept (sorted) order.
inline std::vector<Detection> nms(const std::vector<Detection>& dets, double tau,
                                  bool class_aware = true) {
    std::vector<Detection> kept;
    for (int idx : detail::score_order(dets)) {
        const Detection& d = dets[idx];
        bool suppressed = false;
        for (const Detection& k : kept) {
            if (class_aware && k.label != d.label) continue;
            if (iou(k.box, d.box) >= tau) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

struct MatchResult {
    // pred_to_gt[i] = index into gts, or -1 when unmatched. Indices refer
    // to the caller's input order.
    std::vector<int> pred_to_gt;
    std::vector<int> gt_to_pred;

    int matched_count() const {
        int n = 0;
        for (int g : pred_to_gt)
            if (g >= 0) ++n;
        return n;
    }
};

// Greedy prediction-to-ground-truth matching: predictions visited in
// descending score (same tie-break as nms); each claims the highest-IoU
// unmatched same-class ground truth with IoU >= tau. Equal IoUs resolve
// to the lowest ground-truth index.
inline MatchResult greedy_match(const std::vector<Detection>& preds,
                                const std::vector<Annotation>& gts, double tau) {
    MatchResult res;
    res.pred_to_gt.assign(preds.size(), -1);
    res.gt_to_pred.assign(gts.size(), -1);
    for (int pi : detail::score_order(preds)) {
        const Detection& p = preds[pi];
        int best_gt = -1;
        double best_iou = 0.0;
        for (std::size_t gi = 0; gi < gts.size(); ++gi) {
            if (res.gt_to_pred[gi] >= 0) continue;
            if (gts[gi].label != p.label) continue;
            double v = iou(p.box, gts[gi].box);
            if (v >= tau && v > best_iou) {
                best_iou = v;
                best_gt = static_cast<int>(gi);
            }
        }
        if (best_gt >= 0) {
            res.pred_to_gt[pi] = best_gt;
            res.gt_to_pred[best_gt] = pi;
        }
    }
    return res;
}

}  // namespace lesiondet
