#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace lesiondet {

// Axis-aligned box in corner form. COCO-style [x, y, w, h] records are
// converted at the I/O boundary; all internal arithmetic uses corners.
struct Box {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    bool valid() const { return x_max >= x_min && y_max >= y_min; }
    bool positive() const { return x_max > x_min && y_max > y_min; }

    double center_x() const { return 0.5 * (x_min + x_max); }
    double center_y() const { return 0.5 * (y_min + y_max); }

    static Box from_xywh(double x, double y, double w, double h) {
        return Box{x, y, x + w, y + h};
    }

    // Intersection with [0,w]x[0,h]; may be degenerate (zero extent).
    Box clipped(double w, double h) const {
        Box r;
        r.x_min = std::clamp(x_min, 0.0, w);
        r.y_min = std::clamp(y_min, 0.0, h);
        r.x_max = std::clamp(x_max, 0.0, w);
        r.y_max = std::clamp(y_max, 0.0, h);
        return r;
    }

    Box translated(double dx, double dy) const {
        return Box{x_min + dx, y_min + dy, x_max + dx, y_max + dy};
    }

    bool operator==(const Box& o) const {
        return x_min == o.x_min && y_min == o.y_min && x_max == o.x_max && y_max == o.y_max;
    }
};

inline double intersection_area(const Box& a, const Box& b) {
    double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

// The two lesion classes, 0-based internally. COCO category ids are
// label + 1 ({1: caries, 2: mih}).
constexpr int kNumDatasetClasses = 2;
constexpr int kClassCaries = 0;
constexpr int kClassMih = 1;

inline const char* class_name(int label) {
    switch (label) {
        case kClassCaries: return "caries";
        case kClassMih: return "mih";
        default: return "unknown";
    }
}

// A scored model prediction in pixel coordinates.
// class_probs is the softmax class distribution of the emitting cell;
// decoders fill it on request, it is never serialized.
struct Detection {
    Box box;
    int label = 0;
    double score = 0.0;
    std::vector<double> class_probs;
};

struct ImageRecord {
    int id = 0;
    int width = 0;
    int height = 0;
    std::string file_name;
    // Provenance, set only on patch manifests produced by crop_patches.
    int source_image_id = -1;
    double offset_x = 0.0;
    double offset_y = 0.0;

    bool is_patch() const { return source_image_id >= 0; }
};

struct Annotation {
    int id = 0;
    int image_id = 0;
    int label = 0;  // 0-based class index
    Box box;
};

enum class SplitTag { none, train, val };

inline const char* split_tag_name(SplitTag t) {
    switch (t) {
        case SplitTag::train: return "train";
        case SplitTag::val: return "val";
        default: return "none";
    }
}

struct DatasetManifest {
    std::vector<ImageRecord> images;
    std::vector<Annotation> annotations;
    SplitTag split_tag = SplitTag::none;

    const ImageRecord* find_image(int image_id) const {
        for (const auto& im : images)
            if (im.id == image_id) return &im;
        return nullptr;
    }

    std::vector<Annotation> annotations_of(int image_id) const {
        std::vector<Annotation> out;
        for (const auto& a : annotations)
            if (a.image_id == image_id) out.push_back(a);
        return out;
    }
};

}  // namespace lesiondet
