#pragma once

// Brute-force reference evaluator, written before and independently of
// lesiondet/evaluator.hpp. Everything is recomputed naively per
// (class, IoU threshold, area bucket): no shared matching, no cumulative
// sums, no precision envelopes. Only the protocol constants are shared.
//
// Protocol (COCO-style, boxes only):
//  - matching is per image, detections visited in score order (ties:
//    smaller area, then input order); each claims the not-yet-matched
//    ground truth with the highest IoU >= t, preferring non-ignored
//    ground truths; equal IoUs resolve to the lowest gt index
//  - a ground truth is ignored for a bucket iff its area is outside it
//  - a detection matched to an ignored gt is dropped; an unmatched
//    detection whose own area is outside the bucket is dropped
//  - AP is the 101-point interpolation of the precision/recall curve
//    over all remaining detections sorted by (score desc, area asc,
//    image order, input order); recall denominator is the count of
//    non-ignored ground truths

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lesiondet/dataset.hpp"
#include "lesiondet/types.hpp"

namespace oracle {

struct Instance {
    lesiondet::DatasetManifest gts;
    std::vector<lesiondet::DetectionRecord> dets;
};

inline double o_iou(const lesiondet::Box& a, const lesiondet::Box& b) {
    double ix0 = a.x_min > b.x_min ? a.x_min : b.x_min;
    double iy0 = a.y_min > b.y_min ? a.y_min : b.y_min;
    double ix1 = a.x_max < b.x_max ? a.x_max : b.x_max;
    double iy1 = a.y_max < b.y_max ? a.y_max : b.y_max;
    double iw = ix1 - ix0, ih = iy1 - iy0;
    double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
    double ua = (a.x_max - a.x_min) * (a.y_max - a.y_min);
    double ub = (b.x_max - b.x_min) * (b.y_max - b.y_min);
    double uni = ua + ub - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

// AP for one (class, threshold, bucket). Returns NaN when the bucket has
// no ground truths of this class.
inline double brute_force_ap(const Instance& inst, int label, double thr, double area_lo,
                             double area_hi) {
    struct DetRef {
        double score;
        double area;
        int image_order;
        int input_order;
        bool tp = false;
        bool dropped = false;
    };
    std::vector<DetRef> prs;
    long n_pos = 0;

    for (std::size_t img_idx = 0; img_idx < inst.gts.images.size(); ++img_idx) {
        const auto& im = inst.gts.images[img_idx];

        std::vector<const lesiondet::Annotation*> gts;
        for (const auto& a : inst.gts.annotations)
            if (a.image_id == im.id && a.label == label) gts.push_back(&a);
        std::vector<bool> gt_ignored(gts.size()), gt_used(gts.size(), false);
        for (std::size_t g = 0; g < gts.size(); ++g) {
            double area = gts[g]->box.area();
            gt_ignored[g] = !(area >= area_lo && area < area_hi);
            if (!gt_ignored[g]) ++n_pos;
        }

        std::vector<int> det_ids;
        for (std::size_t d = 0; d < inst.dets.size(); ++d)
            if (inst.dets[d].image_id == im.id && inst.dets[d].det.label == label)
                det_ids.push_back(static_cast<int>(d));
        std::sort(det_ids.begin(), det_ids.end(), [&](int x, int y) {
            const auto& dx = inst.dets[x].det;
            const auto& dy = inst.dets[y].det;
            if (dx.score != dy.score) return dx.score > dy.score;
            if (dx.box.area() != dy.box.area()) return dx.box.area() < dy.box.area();
            return x < y;
        });

        for (int did : det_ids) {
            const auto& det = inst.dets[did].det;
            // pass 1: best non-ignored candidate; pass 2: best ignored
            int match = -1;
            for (int want_ignored = 0; want_ignored <= 1 && match < 0; ++want_ignored) {
                double best = -1.0;
                for (std::size_t g = 0; g < gts.size(); ++g) {
                    if (gt_used[g]) continue;
                    if (gt_ignored[g] != static_cast<bool>(want_ignored)) continue;
                    double v = o_iou(det.box, gts[g]->box);
                    if (v >= thr && v > best) {
                        best = v;
                        match = static_cast<int>(g);
                    }
                }
            }
            DetRef ref;
            ref.score = det.score;
            ref.area = det.box.area();
            ref.image_order = static_cast<int>(img_idx);
            ref.input_order = did;
            if (match >= 0) {
                gt_used[match] = true;
                if (gt_ignored[match])
                    ref.dropped = true;
                else
                    ref.tp = true;
            } else {
                double area = det.box.area();
                if (!(area >= area_lo && area < area_hi)) ref.dropped = true;
            }
            if (!ref.dropped) prs.push_back(ref);
        }
    }

    if (n_pos == 0) return std::numeric_limits<double>::quiet_NaN();

    std::sort(prs.begin(), prs.end(), [](const DetRef& x, const DetRef& y) {
        if (x.score != y.score) return x.score > y.score;
        if (x.area != y.area) return x.area < y.area;
        if (x.image_order != y.image_order) return x.image_order < y.image_order;
        return x.input_order < y.input_order;
    });

    std::vector<double> precision, recall;
    long tp = 0, fp = 0;
    for (const auto& p : prs) {
        if (p.tp)
            ++tp;
        else
            ++fp;
        precision.push_back(static_cast<double>(tp) / (tp + fp));
        recall.push_back(static_cast<double>(tp) / n_pos);
    }

    double ap = 0.0;
    for (int k = 0; k <= 100; ++k) {
        double r = k / 100.0;
        double best = 0.0;
        for (std::size_t i = 0; i < precision.size(); ++i)
            if (recall[i] >= r && precision[i] > best) best = precision[i];
        ap += best;
    }
    return ap / 101.0;
}

struct BruteForceResult {
    // NaN marks undefined (no ground truth in the class/bucket)
    double map = 0, map50 = 0, map75 = 0, map_small = 0, map_medium = 0, map_large = 0;
    std::vector<double> per_class_map;
};

inline BruteForceResult brute_force_evaluate(const Instance& inst, double a_s, double a_l,
                                             const std::vector<double>& iou_grid) {
    const double inf = std::numeric_limits<double>::infinity();
    struct Acc {
        double sum = 0;
        int n = 0;
        void add(double v) {
            if (!std::isnan(v)) {
                sum += v;
                ++n;
            }
        }
        double mean() const { return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN(); }
    };
    Acc map, map50, map75, ms, mm, ml;
    BruteForceResult out;
    for (int label = 0; label < lesiondet::kNumDatasetClasses; ++label) {
        Acc cls_all, cls_s, cls_m, cls_l;
        for (double t : iou_grid) {
            cls_all.add(brute_force_ap(inst, label, t, 0.0, inf));
            cls_s.add(brute_force_ap(inst, label, t, 0.0, a_s));
            cls_m.add(brute_force_ap(inst, label, t, a_s, a_l));
            cls_l.add(brute_force_ap(inst, label, t, a_l, inf));
        }
        out.per_class_map.push_back(cls_all.mean());
        map.add(cls_all.mean());
        map50.add(brute_force_ap(inst, label, iou_grid.front(), 0.0, inf));
        map75.add(brute_force_ap(inst, label, iou_grid[5], 0.0, inf));
        ms.add(cls_s.mean());
        mm.add(cls_m.mean());
        ml.add(cls_l.mean());
    }
    auto finalize = [](const Acc& a) { return a.n > 0 ? a.mean() : 0.0; };
    out.map = finalize(map);
    out.map50 = finalize(map50);
    out.map75 = finalize(map75);
    out.map_small = finalize(ms);
    out.map_medium = finalize(mm);
    out.map_large = finalize(ml);
    return out;
}

}  // namespace oracle
