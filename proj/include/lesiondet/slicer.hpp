#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lesiondet/geometry.hpp"
#include "lesiondet/types.hpp"

namespace lesiondet {

struct TileSpec {
    int offset_x = 0;
    int offset_y = 0;
    int width = 0;
    int height = 0;

    Box rect() const {
        return Box{static_cast<double>(offset_x), static_cast<double>(offset_y),
                   static_cast<double>(offset_x + width), static_cast<double>(offset_y + height)};
    }
    bool operator==(const TileSpec& o) const {
        return offset_x == o.offset_x && offset_y == o.offset_y && width == o.width &&
               height == o.height;
    }
};

struct SliceGrid {
    int image_w = 0;
    int image_h = 0;
    double overlap = 0.0;
    std::vector<int> x_offsets;
    std::vector<int> y_offsets;
    std::vector<TileSpec> tiles;  // row-major: y outer, x inner
};

namespace detail {

// Window offsets along one axis: 0, stride, 2*stride, ...; the final
// window is clamped so its far edge equals the image edge. If the tile
// does not fit, a single full-span window is used.
inline std::vector<int> axis_offsets(int dim, int tile, int stride) {
    std::vector<int> offsets;
    if (tile >= dim) {
        offsets.push_back(0);
        return offsets;
    }
    for (int o = 0;; o += stride) {
        if (o + tile >= dim) {
            int last = dim - tile;
            if (offsets.empty() || offsets.back() != last) offsets.push_back(last);
            break;
        }
        offsets.push_back(o);
    }
    return offsets;
}

}  // namespace detail

inline SliceGrid make_grid(int image_w, int image_h, int tile, double overlap) {
    if (tile <= 0) throw std::invalid_argument("make_grid: tile must be positive");
    if (overlap < 0.0 || overlap >= 1.0)
        throw std::invalid_argument("make_grid: overlap must be in [0, 1)");
    int stride = static_cast<int>(std::floor(tile * (1.0 - overlap)));
    if (stride < 1) stride = 1;

    SliceGrid grid;
    grid.image_w = image_w;
    grid.image_h = image_h;
    grid.overlap = overlap;
    grid.x_offsets = detail::axis_offsets(image_w, tile, stride);
    grid.y_offsets = detail::axis_offsets(image_h, tile, stride);
    int tw = std::min(tile, image_w);
    int th = std::min(tile, image_h);
    for (int oy : grid.y_offsets)
        for (int ox : grid.x_offsets) grid.tiles.push_back(TileSpec{ox, oy, tw, th});
    return grid;
}

// A box joins a tile iff (clipped intersection area / original box area)
// >= min_visibility; it is then clipped to the tile and expressed in
// tile-local coordinates. Used both for training crops and tile-level
// evaluation.
inline std::vector<std::vector<Annotation>> assign_annotations(
    const SliceGrid& grid, const std::vector<Annotation>& anns, double min_visibility) {
    if (min_visibility <= 0.0 || min_visibility > 1.0)
        throw std::invalid_argument("assign_annotations: min_visibility must be in (0, 1]");
    std::vector<std::vector<Annotation>> per_tile(grid.tiles.size());
    for (std::size_t ti = 0; ti < grid.tiles.size(); ++ti) {
        const TileSpec& tile = grid.tiles[ti];
        Box trect = tile.rect();
        for (const Annotation& a : anns) {
            double orig = a.box.area();
            if (orig <= 0.0) continue;
            double inter = intersection_area(a.box, trect);
            if (inter / orig < min_visibility) continue;
            Annotation local = a;
            local.box.x_min = std::max(a.box.x_min, trect.x_min) - tile.offset_x;
            local.box.y_min = std::max(a.box.y_min, trect.y_min) - tile.offset_y;
            local.box.x_max = std::min(a.box.x_max, trect.x_max) - tile.offset_x;
            local.box.y_max = std::min(a.box.y_max, trect.y_max) - tile.offset_y;
            per_tile[ti].push_back(local);
        }
    }
    return per_tile;
}

// Fusion step of sliced inference: class-aware NMS over detections
// already remapped to full-image coordinates.
inline std::vector<Detection> merge_detections(const std::vector<Detection>& dets,
                                               double tau_merge) {
    return nms(dets, tau_merge, /*class_aware=*/true);
}

// Runs `model` over every tile of `grid` plus an optional full-frame
// pass, remaps tile-local detections by the tile offset, and fuses the
// result. The model callable receives a TileSpec and must return
// detections in that rectangle's local pixel coordinates at native
// resolution; resizing (for the full-frame pass or oversized rects) is
// the callable's concern.
template <typename Model>
std::vector<Detection> sliced_infer(Model&& model, const SliceGrid& grid, double conf_thresh,
                                    double tau_merge, bool include_full_frame = false) {
    std::vector<Detection> all;
    for (const TileSpec& tile : grid.tiles) {
        std::vector<Detection> dets = model(tile, conf_thresh);
        for (Detection& d : dets) {
            d.box = d.box.translated(tile.offset_x, tile.offset_y);
            all.push_back(std::move(d));
        }
    }
    if (include_full_frame) {
        TileSpec full{0, 0, grid.image_w, grid.image_h};
        std::vector<Detection> dets = model(full, conf_thresh);
        for (Detection& d : dets) all.push_back(std::move(d));
    }
    return merge_detections(all, tau_merge);
}

}  // namespace lesiondet
