#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "osb/mask.hpp"

namespace osb {

struct CategoryDef {
  int id = 0;
  std::string name;
  std::string supercategory;
};

struct ImageRecord {
  int id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;
};

// Either a list of polygons (flat x,y pairs) or an uncompressed RLE.
struct Segmentation {
  std::vector<std::vector<double>> polygons;
  std::optional<RleMask> rle;

  bool empty() const { return polygons.empty() && !rle.has_value(); }
};

struct AnnotationRecord {
  int id = 0;
  int image_id = 0;
  int category_id = 0;
  double bbox[4] = {0, 0, 0, 0};  // x, y, w, h; clipped to the image
  Segmentation segmentation;
  double area = 0;
  bool iscrowd = false;
};

// Parsed annotation store. Records are kept sorted by id; the presence index
// lists exactly the non-crowd annotations of each category, sorted by
// (image_id, annotation_id), for reference lookup during episode sampling.
struct Dataset {
  std::vector<CategoryDef> categories;  // ascending id
  std::vector<ImageRecord> images;      // ascending id
  std::vector<AnnotationRecord> annotations;  // ascending id

  // category_id -> [(image_id, annotation_id)], non-crowd only
  std::map<int, std::vector<std::pair<int, int>>> presence_index;
  // image_id -> indices into `annotations`
  std::map<int, std::vector<int>> annotations_by_image;

  const ImageRecord& image(int id) const;
  const AnnotationRecord& annotation(int id) const;
  const CategoryDef& category(int id) const;
  bool has_category(int id) const;

  // Category ids in ascending order; position k (1-based) in this list is
  // the category's rank in the canonical ordering used by splits.
  std::vector<int> category_ids() const;
};

// Parses a COCO-format annotation document (`images`, `annotations`,
// `categories`). Cross-references are resolved eagerly: an annotation whose
// image_id or category_id does not exist is a ParseError naming the
// annotation. Bounding boxes are clipped to their image rectangle.
Dataset parse_dataset(const std::string& json_text);

// Convenience wrapper: read + parse a file (FileError when unreadable).
Dataset load_dataset(const std::string& path);

// Rasterizes the annotation's segmentation at image resolution. RLE payloads
// are decoded directly, polygons rasterized. Throws ParseError when the
// annotation has no segmentation.
BinaryMask mask_of(const AnnotationRecord& ann, const ImageRecord& image);

}  // namespace osb
