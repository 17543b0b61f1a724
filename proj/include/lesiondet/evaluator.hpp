#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lesiondet/dataset.hpp"
#include "lesiondet/geometry.hpp"
#include "lesiondet/types.hpp"

namespace lesiondet {

// COCO-style IoU threshold grid 0.50:0.05:0.95 as literal constants so
// comparisons against thresholds are reproducible bit-for-bit.
inline const std::vector<double>& iou_threshold_grid() {
    static const std::vector<double> grid = {0.50, 0.55, 0.60, 0.65, 0.70,
                                             0.75, 0.80, 0.85, 0.90, 0.95};
    return grid;
}

struct ClassEval {
    int label = 0;
    bool has_gt = false;
    long gt_count = 0;
    long det_count = 0;
    long gt_small = 0, gt_medium = 0, gt_large = 0;
    // NaN marks an undefined AP (no ground truth in that bucket).
    double ap = std::numeric_limits<double>::quiet_NaN();    // mean over the IoU grid
    double ap50 = std::numeric_limits<double>::quiet_NaN();
    double ap75 = std::numeric_limits<double>::quiet_NaN();
    double ap_small = std::numeric_limits<double>::quiet_NaN();
    double ap_medium = std::numeric_limits<double>::quiet_NaN();
    double ap_large = std::numeric_limits<double>::quiet_NaN();
};

struct EvalResult {
    std::vector<ClassEval> per_class;
    // Means over classes; classes with no ground truth in the relevant
    // bucket are excluded rather than counted as zero.
    double map = 0, map50 = 0, map75 = 0;
    double map_small = 0, map_medium = 0, map_large = 0;
    double area_small_max = 0, area_large_min = 0;
    long gt_total = 0, det_total = 0;
};

namespace detail {

struct EvalDet {
    double score = 0;
    double area = 0;
    int image_order = 0;
    int input_order = 0;
    const Box* box = nullptr;
};

struct EvalImage {
    std::vector<EvalDet> dets;           // sorted: score desc, area asc, input order
    std::vector<const Box*> gt_boxes;    // manifest order
    std::vector<double> gt_areas;
    std::vector<std::vector<double>> iou_matrix;  // [det][gt]
};

// Greedy per-image matching at one threshold with an ignore partition,
// then the 101-point interpolated AP over the pooled detections.
inline double ap_at(const std::vector<EvalImage>& images, double thr, double area_lo,
                    double area_hi) {
    struct Point {
        double score, area;
        int image_order, input_order;
        bool tp;
    };
    std::vector<Point> points;
    long n_pos = 0;
    for (const EvalImage& img : images) {
        std::size_t n_gt = img.gt_boxes.size();
        std::vector<char> ignored(n_gt), used(n_gt, 0);
        for (std::size_t g = 0; g < n_gt; ++g) {
            ignored[g] = !(img.gt_areas[g] >= area_lo && img.gt_areas[g] < area_hi);
            if (!ignored[g]) ++n_pos;
        }
        for (std::size_t d = 0; d < img.dets.size(); ++d) {
            int match = -1;
            bool match_ignored = false;
            double best = -1.0;
            for (std::size_t g = 0; g < n_gt; ++g) {
                if (used[g]) continue;
                double v = img.iou_matrix[d][g];
                if (v < thr) continue;
                // prefer any non-ignored match over any ignored one
                if (match >= 0 && !match_ignored && ignored[g]) continue;
                bool upgrade = match >= 0 && match_ignored && !ignored[g];
                if (upgrade || v > best) {
                    best = v;
                    match = static_cast<int>(g);
                    match_ignored = ignored[g];
                }
            }
            const EvalDet& det = img.dets[d];
            if (match >= 0) {
                used[match] = 1;
                if (!match_ignored)
                    points.push_back({det.score, det.area, det.image_order, det.input_order, true});
            } else if (det.area >= area_lo && det.area < area_hi) {
                points.push_back({det.score, det.area, det.image_order, det.input_order, false});
            }
        }
    }
    if (n_pos == 0) return std::numeric_limits<double>::quiet_NaN();

    std::sort(points.begin(), points.end(), [](const Point& x, const Point& y) {
        if (x.score != y.score) return x.score > y.score;
        if (x.area != y.area) return x.area < y.area;
        if (x.image_order != y.image_order) return x.image_order < y.image_order;
        return x.input_order < y.input_order;
    });

    std::vector<double> precision(points.size()), recall(points.size());
    long tp = 0, fp = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        points[i].tp ? ++tp : ++fp;
        precision[i] = static_cast<double>(tp) / (tp + fp);
        recall[i] = static_cast<double>(tp) / n_pos;
    }
    // suffix max of precision: envelope value from each point onward
    std::vector<double> env(points.size());
    double run = 0.0;
    for (std::size_t i = points.size(); i-- > 0;) {
        run = std::max(run, precision[i]);
        env[i] = run;
    }
    double ap = 0.0;
    for (int k = 0; k <= 100; ++k) {
        double r = k / 100.0;
        auto it = std::lower_bound(recall.begin(), recall.end(), r);
        if (it != recall.end()) ap += env[static_cast<std::size_t>(it - recall.begin())];
    }
    return ap / 101.0;
}

inline double nan_mean(const std::vector<double>& vals) {
    double sum = 0;
    int n = 0;
    for (double v : vals)
        if (!std::isnan(v)) {
            sum += v;
            ++n;
        }
    return n > 0 ? sum / n : 0.0;
}

}  // namespace detail

// Full COCO-style evaluation: per-class AP averaged over the IoU grid,
// AP at fixed 0.50/0.75, and size-bucketed AP with ground truths (and
// unmatched detections) outside the bucket ignored. The greedy matching
// inside ap_at follows the same contract as greedy_match; it is inlined
// here because of the ignore partition.
inline EvalResult evaluate(const std::vector<DetectionRecord>& dets, const DatasetManifest& gts,
                           double area_small_max = 32.0 * 32.0,
                           double area_large_min = 96.0 * 96.0) {
    const double inf = std::numeric_limits<double>::infinity();
    std::map<int, int> image_order;
    for (std::size_t i = 0; i < gts.images.size(); ++i)
        image_order[gts.images[i].id] = static_cast<int>(i);
    for (const auto& r : dets) {
        if (!image_order.count(r.image_id))
            throw ManifestError("evaluate: detection references unknown image " +
                                std::to_string(r.image_id));
        if (r.det.label < 0 || r.det.label >= kNumDatasetClasses)
            throw ManifestError("evaluate: detection references unknown category " +
                                std::to_string(r.det.label + 1));
    }

    EvalResult result;
    result.area_small_max = area_small_max;
    result.area_large_min = area_large_min;
    result.det_total = static_cast<long>(dets.size());
    result.gt_total = static_cast<long>(gts.annotations.size());

    const auto& grid = iou_threshold_grid();
    for (int label = 0; label < kNumDatasetClasses; ++label) {
        ClassEval ce;
        ce.label = label;

        std::vector<detail::EvalImage> images(gts.images.size());
        for (const auto& a : gts.annotations) {
            if (a.label != label) continue;
            auto& img = images[image_order[a.image_id]];
            img.gt_boxes.push_back(&a.box);
            img.gt_areas.push_back(a.box.area());
            ++ce.gt_count;
            double area = a.box.area();
            if (area < area_small_max)
                ++ce.gt_small;
            else if (area < area_large_min)
                ++ce.gt_medium;
            else
                ++ce.gt_large;
        }
        for (std::size_t d = 0; d < dets.size(); ++d) {
            if (dets[d].det.label != label) continue;
            auto& img = images[image_order[dets[d].image_id]];
            detail::EvalDet ed;
            ed.score = dets[d].det.score;
            ed.area = dets[d].det.box.area();
            ed.image_order = image_order[dets[d].image_id];
            ed.input_order = static_cast<int>(d);
            ed.box = &dets[d].det.box;
            img.dets.push_back(ed);
            ++ce.det_count;
        }
        for (auto& img : images) {
            std::sort(img.dets.begin(), img.dets.end(),
                      [](const detail::EvalDet& x, const detail::EvalDet& y) {
                          if (x.score != y.score) return x.score > y.score;
                          if (x.area != y.area) return x.area < y.area;
                          return x.input_order < y.input_order;
                      });
            img.iou_matrix.assign(img.dets.size(),
                                  std::vector<double>(img.gt_boxes.size(), 0.0));
            for (std::size_t d = 0; d < img.dets.size(); ++d)
                for (std::size_t g = 0; g < img.gt_boxes.size(); ++g)
                    img.iou_matrix[d][g] = iou(*img.dets[d].box, *img.gt_boxes[g]);
        }

        ce.has_gt = ce.gt_count > 0;
        std::vector<double> ap_all, ap_s, ap_m, ap_l;
        for (double t : grid) {
            ap_all.push_back(detail::ap_at(images, t, 0.0, inf));
            ap_s.push_back(detail::ap_at(images, t, 0.0, area_small_max));
            ap_m.push_back(detail::ap_at(images, t, area_small_max, area_large_min));
            ap_l.push_back(detail::ap_at(images, t, area_large_min, inf));
        }
        auto grid_mean = [](const std::vector<double>& v) {
            bool any = false;
            double s = 0;
            int n = 0;
            for (double x : v)
                if (!std::isnan(x)) {
                    s += x;
                    ++n;
                    any = true;
                }
            return any ? s / n : std::numeric_limits<double>::quiet_NaN();
        };
        ce.ap = grid_mean(ap_all);
        ce.ap50 = ap_all[0];
        ce.ap75 = ap_all[5];
        ce.ap_small = grid_mean(ap_s);
        ce.ap_medium = grid_mean(ap_m);
        ce.ap_large = grid_mean(ap_l);
        result.per_class.push_back(ce);
    }

    auto collect = [&](auto field) {
        std::vector<double> vals;
        for (const auto& ce : result.per_class) vals.push_back(field(ce));
        return detail::nan_mean(vals);
    };
    result.map = collect([](const ClassEval& c) { return c.ap; });
    result.map50 = collect([](const ClassEval& c) { return c.ap50; });
    result.map75 = collect([](const ClassEval& c) { return c.ap75; });
    result.map_small = collect([](const ClassEval& c) { return c.ap_small; });
    result.map_medium = collect([](const ClassEval& c) { return c.ap_medium; });
    result.map_large = collect([](const ClassEval& c) { return c.ap_large; });
    return result;
}

enum class TableFormat { table1, table2, table3 };

namespace detail {

inline std::string pct(double v) {
    if (std::isnan(v)) v = 0.0;
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << v * 100.0;
    return os.str();
}

}  // namespace detail

// Fixed-width text tables. table1/table3 report mAP / mAP50 / mAP75 per
// model row; table2 is the distillation ablation layout with the size
// buckets appended. Values are percentages to one decimal.
inline std::string report(const std::vector<std::pair<std::string, EvalResult>>& rows,
                          TableFormat format) {
    std::vector<std::string> headers;
    std::string label_header;
    switch (format) {
        case TableFormat::table1:
        case TableFormat::table3:
            label_header = "Model";
            headers = {"mAP", "mAP50", "mAP75"};
            break;
        case TableFormat::table2:
            label_header = "phi";
            headers = {"mAP", "mAP50", "mAP75", "mAPs", "APm", "mAPL"};
            break;
    }
    std::size_t label_w = label_header.size();
    for (const auto& [name, _] : rows) label_w = std::max(label_w, name.size());
    label_w += 2;

    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(label_w)) << label_header;
    for (const auto& h : headers) os << std::left << std::setw(8) << h;
    os << "\n";
    for (const auto& [name, r] : rows) {
        os << std::left << std::setw(static_cast<int>(label_w)) << name;
        std::vector<double> vals;
        if (format == TableFormat::table2)
            vals = {r.map, r.map50, r.map75, r.map_small, r.map_medium, r.map_large};
        else
            vals = {r.map, r.map50, r.map75};
        for (double v : vals) os << std::left << std::setw(8) << detail::pct(v);
        os << "\n";
    }
    return os.str();
}

inline std::string report(const EvalResult& result, TableFormat format,
                          const std::string& label = "model") {
    return report({{label, result}}, format);
}

inline ordered_json eval_result_to_json(const EvalResult& r) {
    ordered_json j;
    j["mAP"] = r.map;
    j["mAP50"] = r.map50;
    j["mAP75"] = r.map75;
    j["mAP_small"] = r.map_small;
    j["mAP_medium"] = r.map_medium;
    j["mAP_large"] = r.map_large;
    j["gt_total"] = r.gt_total;
    j["det_total"] = r.det_total;
    j["area_small_max"] = r.area_small_max;
    j["area_large_min"] = r.area_large_min;
    j["per_class"] = ordered_json::array();
    for (const auto& ce : r.per_class) {
        auto safe = [](double v) { return std::isnan(v) ? ordered_json() : ordered_json(v); };
        j["per_class"].push_back(ordered_json{{"label", class_name(ce.label)},
                                              {"AP", safe(ce.ap)},
                                              {"AP50", safe(ce.ap50)},
                                              {"AP75", safe(ce.ap75)},
                                              {"AP_small", safe(ce.ap_small)},
                                              {"AP_medium", safe(ce.ap_medium)},
                                              {"AP_large", safe(ce.ap_large)},
                                              {"gt_count", ce.gt_count},
                                              {"det_count", ce.det_count},
                                              {"gt_small", ce.gt_small},
                                              {"gt_medium", ce.gt_medium},
                                              {"gt_large", ce.gt_large}}});
    }
    return j;
}

}  // namespace lesiondet
