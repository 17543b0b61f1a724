#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lesiondet/rng.hpp"
#include "lesiondet/slicer.hpp"
#include "lesiondet/types.hpp"

namespace lesiondet {

using ordered_json = nlohmann::ordered_json;

struct ManifestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ManifestError(msg);
}

}  // namespace detail

// Annotation schema (COCO-style JSON):
//   images:      [{id, width, height, file_name, [source_image_id, offset_x, offset_y]}]
//   annotations: [{id, image_id, category_id, bbox: [x, y, w, h]}]
//   categories:  [{id: 1, name: "caries"}, {id: 2, name: "mih"}]
// Patch manifests carry the provenance triple on each image entry.
inline DatasetManifest parse_manifest(const ordered_json& j) {
    DatasetManifest m;
    detail::require(j.is_object(), "manifest: top level must be an object");
    detail::require(j.contains("images") && j["images"].is_array(), "manifest: missing 'images'");
    detail::require(j.contains("annotations") && j["annotations"].is_array(),
                    "manifest: missing 'annotations'");
    detail::require(j.contains("categories") && j["categories"].is_array(),
                    "manifest: missing 'categories'");

    std::map<int, std::string> cats;
    for (const auto& c : j["categories"])
        cats[c.at("id").get<int>()] = c.at("name").get<std::string>();
    detail::require(cats.size() == 2 && cats.count(1) && cats.count(2) && cats[1] == "caries" &&
                        cats[2] == "mih",
                    "manifest: categories must be exactly {1: caries, 2: mih}");

    std::set<int> image_ids;
    std::map<int, const ImageRecord*> by_id;
    for (const auto& ji : j["images"]) {
        ImageRecord im;
        im.id = ji.at("id").get<int>();
        im.width = ji.at("width").get<int>();
        im.height = ji.at("height").get<int>();
        im.file_name = ji.at("file_name").get<std::string>();
        if (ji.contains("source_image_id")) {
            im.source_image_id = ji["source_image_id"].get<int>();
            im.offset_x = ji.value("offset_x", 0.0);
            im.offset_y = ji.value("offset_y", 0.0);
        }
        detail::require(im.width > 0 && im.height > 0,
                        "manifest: image " + std::to_string(im.id) + " has non-positive size");
        detail::require(image_ids.insert(im.id).second,
                        "manifest: duplicate image id " + std::to_string(im.id));
        m.images.push_back(im);
    }
    for (const auto& im : m.images) by_id[im.id] = &im;

    for (const auto& ja : j["annotations"]) {
        Annotation a;
        a.id = ja.at("id").get<int>();
        a.image_id = ja.at("image_id").get<int>();
        int cat = ja.at("category_id").get<int>();
        detail::require(cat == 1 || cat == 2, "manifest: annotation " + std::to_string(a.id) +
                                                  " has unknown category id " +
                                                  std::to_string(cat));
        a.label = cat - 1;
        const auto& bb = ja.at("bbox");
        detail::require(bb.is_array() && bb.size() == 4,
                        "manifest: annotation " + std::to_string(a.id) + " bbox must be [x,y,w,h]");
        double w = bb[2].get<double>(), h = bb[3].get<double>();
        detail::require(w > 0.0 && h > 0.0, "manifest: annotation " + std::to_string(a.id) +
                                                " has degenerate box (non-positive extent)");
        auto it = by_id.find(a.image_id);
        detail::require(it != by_id.end(), "manifest: annotation " + std::to_string(a.id) +
                                               " references absent image " +
                                               std::to_string(a.image_id));
        // Boxes partially outside the image are clipped; a box that clips
        // to nothing is degenerate data, not a camera-edge lesion.
        a.box = Box::from_xywh(bb[0].get<double>(), bb[1].get<double>(), w, h)
                    .clipped(it->second->width, it->second->height);
        detail::require(a.box.positive(), "manifest: annotation " + std::to_string(a.id) +
                                              " lies entirely outside its image");
        m.annotations.push_back(a);
    }

    std::string tag = j.value("split_tag", "none");
    m.split_tag = tag == "train" ? SplitTag::train : tag == "val" ? SplitTag::val : SplitTag::none;
    return m;
}

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError("manifest: cannot open " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ManifestError("manifest: " + path + " is not valid JSON: " + e.what());
    }
    return parse_manifest(j);
}

inline ordered_json manifest_to_json(const DatasetManifest& m) {
    ordered_json j;
    j["images"] = ordered_json::array();
    for (const auto& im : m.images) {
        ordered_json ji{{"id", im.id},
                        {"width", im.width},
                        {"height", im.height},
                        {"file_name", im.file_name}};
        if (im.is_patch()) {
            ji["source_image_id"] = im.source_image_id;
            ji["offset_x"] = im.offset_x;
            ji["offset_y"] = im.offset_y;
        }
        j["images"].push_back(ji);
    }
    j["annotations"] = ordered_json::array();
    for (const auto& a : m.annotations) {
        j["annotations"].push_back(ordered_json{
            {"id", a.id},
            {"image_id", a.image_id},
            {"category_id", a.label + 1},
            {"bbox", {a.box.x_min, a.box.y_min, a.box.width(), a.box.height()}}});
    }
    j["categories"] = ordered_json::array(
        {ordered_json{{"id", 1}, {"name", "caries"}}, ordered_json{{"id", 2}, {"name", "mih"}}});
    if (m.split_tag != SplitTag::none) j["split_tag"] = split_tag_name(m.split_tag);
    return j;
}

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ManifestError("manifest: cannot write " + path);
    out << manifest_to_json(m).dump(2) << "\n";
}

// Image-level random split; annotations follow their image. The train
// side gets floor(ratio * N) images, matching the reference 822 -> 657.
// Images keep their original manifest order within each side.
inline std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& m,
                                                                 double ratio,
                                                                 std::uint64_t seed) {
    if (m.images.empty()) throw ManifestError("split_dataset: empty manifest");
    if (ratio <= 0.0 || ratio >= 1.0)
        throw std::invalid_argument("split_dataset: ratio must be in (0, 1)");
    std::vector<int> idx(m.images.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    Rng rng(seed);
    rng.shuffle(idx);
    std::size_t n_train = static_cast<std::size_t>(std::floor(ratio * m.images.size()));
    std::set<int> train_set(idx.begin(), idx.begin() + n_train);

    DatasetManifest train, val;
    train.split_tag = SplitTag::train;
    val.split_tag = SplitTag::val;
    std::set<int> train_ids;
    for (std::size_t i = 0; i < m.images.size(); ++i) {
        if (train_set.count(static_cast<int>(i))) {
            train.images.push_back(m.images[i]);
            train_ids.insert(m.images[i].id);
        } else {
            val.images.push_back(m.images[i]);
        }
    }
    for (const auto& a : m.annotations) {
        if (train_ids.count(a.image_id))
            train.annotations.push_back(a);
        else
            val.annotations.push_back(a);
    }
    return {train, val};
}

// Tiles each image with the zero-overlap slicer grid, assigns boxes by
// the visibility rule, clips them to the patch, and drops patches with
// no boxes. Patch records keep the source file name plus provenance
// (source image id, offset); pixel extraction is the training loader's
// job, so this stays pure.
inline DatasetManifest crop_patches(const DatasetManifest& m, int patch_size,
                                    double min_visibility) {
    if (patch_size <= 0) throw std::invalid_argument("crop_patches: patch_size must be positive");
    if (min_visibility <= 0.0 || min_visibility > 1.0)
        throw std::invalid_argument("crop_patches: min_visibility must be in (0, 1]");
    DatasetManifest out;
    out.split_tag = m.split_tag;
    int next_image_id = 1;
    int next_ann_id = 1;
    for (const auto& im : m.images) {
        SliceGrid grid = make_grid(im.width, im.height, patch_size, 0.0);
        auto anns = m.annotations_of(im.id);
        auto per_tile = assign_annotations(grid, anns, min_visibility);
        for (std::size_t ti = 0; ti < grid.tiles.size(); ++ti) {
            if (per_tile[ti].empty()) continue;
            const TileSpec& tile = grid.tiles[ti];
            ImageRecord patch;
            patch.id = next_image_id++;
            patch.width = tile.width;
            patch.height = tile.height;
            patch.file_name = im.file_name;
            patch.source_image_id = im.id;
            patch.offset_x = tile.offset_x;
            patch.offset_y = tile.offset_y;
            out.images.push_back(patch);
            for (Annotation a : per_tile[ti]) {
                a.id = next_ann_id++;
                a.image_id = patch.id;
                out.annotations.push_back(a);
            }
        }
    }
    return out;
}

struct AreaStats {
    std::vector<double> thresholds;
    // bin_counts[i] counts ratios in [thresholds[i-1], thresholds[i});
    // the final entry counts ratios >= the last threshold.
    std::vector<long> bin_counts;
    std::vector<double> cumulative_fraction;  // fraction with ratio < thresholds[i]
    long total = 0;
    bool empty_input = false;
};

// Per-annotation ratio = box area / image area, binned against the given
// strictly increasing thresholds in (0, 1].
inline AreaStats lesion_area_stats(const DatasetManifest& m,
                                   const std::vector<double>& thresholds) {
    if (thresholds.empty())
        throw std::invalid_argument("lesion_area_stats: thresholds must be non-empty");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (thresholds[i] <= 0.0 || thresholds[i] > 1.0)
            throw std::invalid_argument("lesion_area_stats: thresholds must lie in (0, 1]");
        if (i > 0 && thresholds[i] <= thresholds[i - 1])
            throw std::invalid_argument("lesion_area_stats: thresholds must be strictly increasing");
    }
    AreaStats stats;
    stats.thresholds = thresholds;
    stats.bin_counts.assign(thresholds.size() + 1, 0);
    stats.cumulative_fraction.assign(thresholds.size(), 0.0);
    stats.empty_input = m.annotations.empty();
    if (stats.empty_input) return stats;

    std::map<int, double> image_area;
    for (const auto& im : m.images)
        image_area[im.id] = static_cast<double>(im.width) * static_cast<double>(im.height);
    for (const auto& a : m.annotations) {
        auto it = image_area.find(a.image_id);
        detail::require(it != image_area.end(), "lesion_area_stats: annotation " +
                                                    std::to_string(a.id) +
                                                    " references absent image");
        double ratio = a.box.area() / it->second;
        std::size_t bin = thresholds.size();
        for (std::size_t i = 0; i < thresholds.size(); ++i) {
            if (ratio < thresholds[i]) {
                bin = i;
                break;
            }
        }
        ++stats.bin_counts[bin];
        ++stats.total;
    }
    long below = 0;
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        below += stats.bin_counts[i];
        stats.cumulative_fraction[i] = static_cast<double>(below) / stats.total;
    }
    return stats;
}

// --- Detection JSON (shared by slicer output, pseudo-labels, evaluator) ---
//
// A flat list of {image_id, category_id, bbox [x, y, w, h], score}.
// Pseudo-label files additionally carry teacher_conf as an alias of score.

struct DetectionRecord {
    int image_id = 0;
    Detection det;
};

inline ordered_json detections_to_json(const std::vector<DetectionRecord>& recs,
                                       bool teacher_conf_alias = false) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : recs) {
        ordered_json j{{"image_id", r.image_id},
                       {"category_id", r.det.label + 1},
                       {"bbox",
                        {r.det.box.x_min, r.det.box.y_min, r.det.box.width(), r.det.box.height()}},
                       {"score", r.det.score}};
        if (teacher_conf_alias) j["teacher_conf"] = r.det.score;
        arr.push_back(j);
    }
    return arr;
}

inline void save_detections(const std::vector<DetectionRecord>& recs, const std::string& path,
                            bool teacher_conf_alias = false) {
    std::ofstream out(path);
    if (!out) throw ManifestError("detections: cannot write " + path);
    out << detections_to_json(recs, teacher_conf_alias).dump(2) << "\n";
}

inline std::vector<DetectionRecord> parse_detections(const ordered_json& arr) {
    detail::require(arr.is_array(), "detections: top level must be an array");
    std::vector<DetectionRecord> recs;
    for (const auto& j : arr) {
        DetectionRecord r;
        r.image_id = j.at("image_id").get<int>();
        int cat = j.at("category_id").get<int>();
        detail::require(cat == 1 || cat == 2,
                        "detections: unknown category id " + std::to_string(cat));
        r.det.label = cat - 1;
        const auto& bb = j.at("bbox");
        r.det.box = Box::from_xywh(bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(),
                                   bb[3].get<double>());
        r.det.score = j.contains("score") ? j["score"].get<double>()
                                          : j.at("teacher_conf").get<double>();
        recs.push_back(r);
    }
    return recs;
}

inline std::vector<DetectionRecord> load_detections(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError("detections: cannot open " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ManifestError("detections: " + path + " is not valid JSON: " + e.what());
    }
    return parse_detections(j);
}

}  // namespace lesiondet
