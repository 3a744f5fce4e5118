#include "osb/coco.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "osb/errors.hpp"

namespace osb {

namespace {

using nlohmann::json;

const json& require_field(const json& obj, const char* field, const char* where) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw ParseError(std::string("missing required field '") + field + "' in " + where);
  }
  return *it;
}

template <typename T>
const T* find_by_id(const std::vector<T>& sorted, int id) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), id,
                             [](const T& rec, int key) { return rec.id < key; });
  if (it == sorted.end() || it->id != id) return nullptr;
  return &*it;
}

Segmentation parse_segmentation(const json& seg, int ann_id) {
  Segmentation out;
  if (seg.is_array()) {
    // list of polygons, each a flat x,y list
    for (const auto& poly : seg) {
      if (!poly.is_array() || poly.size() < 6 || poly.size() % 2 != 0) {
        throw ParseError("annotation " + std::to_string(ann_id) +
                         ": polygon must be a flat list of >= 3 (x,y) pairs");
      }
      std::vector<double> pts;
      pts.reserve(poly.size());
      for (const auto& v : poly) pts.push_back(v.get<double>());
      out.polygons.push_back(std::move(pts));
    }
  } else if (seg.is_object()) {
    // uncompressed RLE: {"size": [h, w], "counts": [...]}
    const auto& size = require_field(seg, "size", "segmentation");
    const auto& counts = require_field(seg, "counts", "segmentation");
    if (!size.is_array() || size.size() != 2 || !counts.is_array()) {
      throw ParseError("annotation " + std::to_string(ann_id) +
                       ": RLE segmentation needs size [h,w] and a counts list");
    }
    RleMask rle;
    rle.height = size[0].get<int>();
    rle.width = size[1].get<int>();
    for (const auto& v : counts) rle.counts.push_back(v.get<std::uint32_t>());
    out.rle = std::move(rle);
  } else if (!seg.is_null()) {
    throw ParseError("annotation " + std::to_string(ann_id) +
                     ": unsupported segmentation payload");
  }
  return out;
}

}  // namespace

const ImageRecord& Dataset::image(int id) const {
  const ImageRecord* rec = find_by_id(images, id);
  if (!rec) throw MismatchError("unknown image id " + std::to_string(id));
  return *rec;
}

const AnnotationRecord& Dataset::annotation(int id) const {
  const AnnotationRecord* rec = find_by_id(annotations, id);
  if (!rec) throw MismatchError("unknown annotation id " + std::to_string(id));
  return *rec;
}

const CategoryDef& Dataset::category(int id) const {
  const CategoryDef* rec = find_by_id(categories, id);
  if (!rec) throw MismatchError("unknown category id " + std::to_string(id));
  return *rec;
}

bool Dataset::has_category(int id) const {
  return find_by_id(categories, id) != nullptr;
}

std::vector<int> Dataset::category_ids() const {
  std::vector<int> ids;
  ids.reserve(categories.size());
  for (const auto& c : categories) ids.push_back(c.id);
  return ids;
}

Dataset parse_dataset(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed annotation document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("annotation document must be a JSON object");

  Dataset ds;

  for (const auto& c : require_field(doc, "categories", "document")) {
    CategoryDef cat;
    cat.id = require_field(c, "id", "category").get<int>();
    cat.name = require_field(c, "name", "category").get<std::string>();
    if (c.contains("supercategory")) cat.supercategory = c["supercategory"].get<std::string>();
    if (cat.id < 1) throw ParseError("category id must be >= 1, got " + std::to_string(cat.id));
    ds.categories.push_back(std::move(cat));
  }
  std::sort(ds.categories.begin(), ds.categories.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (size_t i = 1; i < ds.categories.size(); ++i) {
    if (ds.categories[i].id == ds.categories[i - 1].id) {
      throw ParseError("duplicate category id " + std::to_string(ds.categories[i].id));
    }
  }

  for (const auto& im : require_field(doc, "images", "document")) {
    ImageRecord rec;
    rec.id = require_field(im, "id", "image").get<int>();
    rec.width = require_field(im, "width", "image").get<int>();
    rec.height = require_field(im, "height", "image").get<int>();
    if (im.contains("file_name")) rec.file_name = im["file_name"].get<std::string>();
    if (rec.width <= 0 || rec.height <= 0) {
      throw ParseError("image " + std::to_string(rec.id) + " has non-positive size");
    }
    ds.images.push_back(std::move(rec));
  }
  std::sort(ds.images.begin(), ds.images.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (size_t i = 1; i < ds.images.size(); ++i) {
    if (ds.images[i].id == ds.images[i - 1].id) {
      throw ParseError("duplicate image id " + std::to_string(ds.images[i].id));
    }
  }

  for (const auto& a : require_field(doc, "annotations", "document")) {
    AnnotationRecord ann;
    ann.id = require_field(a, "id", "annotation").get<int>();
    ann.image_id = require_field(a, "image_id", "annotation").get<int>();
    ann.category_id = require_field(a, "category_id", "annotation").get<int>();
    const auto& bbox = require_field(a, "bbox", "annotation");
    if (!bbox.is_array() || bbox.size() != 4) {
      throw ParseError("annotation " + std::to_string(ann.id) + ": bbox must be [x,y,w,h]");
    }
    for (int i = 0; i < 4; ++i) ann.bbox[i] = bbox[i].get<double>();
    if (a.contains("segmentation")) {
      ann.segmentation = parse_segmentation(a["segmentation"], ann.id);
    }
    if (a.contains("area")) ann.area = a["area"].get<double>();
    if (a.contains("iscrowd")) ann.iscrowd = a["iscrowd"].get<int>() != 0;

    const ImageRecord* img = find_by_id(ds.images, ann.image_id);
    if (!img) {
      throw ParseError("annotation " + std::to_string(ann.id) + " references missing image " +
                       std::to_string(ann.image_id));
    }
    if (!find_by_id(ds.categories, ann.category_id)) {
      throw ParseError("annotation " + std::to_string(ann.id) + " references missing category " +
                       std::to_string(ann.category_id));
    }
    // Clip the box to the image rectangle, preserving the COCO x,y,w,h form.
    double x1 = std::clamp(ann.bbox[0], 0.0, double(img->width));
    double y1 = std::clamp(ann.bbox[1], 0.0, double(img->height));
    double x2 = std::clamp(ann.bbox[0] + ann.bbox[2], x1, double(img->width));
    double y2 = std::clamp(ann.bbox[1] + ann.bbox[3], y1, double(img->height));
    ann.bbox[0] = x1;
    ann.bbox[1] = y1;
    ann.bbox[2] = x2 - x1;
    ann.bbox[3] = y2 - y1;

    ds.annotations.push_back(std::move(ann));
  }
  std::sort(ds.annotations.begin(), ds.annotations.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (size_t i = 1; i < ds.annotations.size(); ++i) {
    if (ds.annotations[i].id == ds.annotations[i - 1].id) {
      throw ParseError("duplicate annotation id " + std::to_string(ds.annotations[i].id));
    }
  }

  for (size_t i = 0; i < ds.annotations.size(); ++i) {
    const auto& ann = ds.annotations[i];
    ds.annotations_by_image[ann.image_id].push_back(int(i));
    if (!ann.iscrowd) {
      ds.presence_index[ann.category_id].emplace_back(ann.image_id, ann.id);
    }
  }
  for (auto& [cat, refs] : ds.presence_index) std::sort(refs.begin(), refs.end());

  return ds;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open annotation file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

BinaryMask mask_of(const AnnotationRecord& ann, const ImageRecord& image) {
  if (ann.segmentation.empty()) {
    throw ParseError("annotation " + std::to_string(ann.id) + " has no segmentation");
  }
  if (ann.segmentation.rle) {
    return rle_decode(*ann.segmentation.rle);
  }
  return polygon_rasterize(ann.segmentation.polygons, image.height, image.width);
}

}  // namespace osb
