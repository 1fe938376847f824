#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "scalecamo/replica.hpp"

namespace scalecamo {

/// Integer pixel box, VOC style: 0 <= xmin < xmax <= width.
struct BBox {
  int xmin = 0;
  int ymin = 0;
  int xmax = 0;
  int ymax = 0;

  long area() const noexcept {
    return xmax > xmin && ymax > ymin ? static_cast<long>(xmax - xmin) * (ymax - ymin) : 0;
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

BBox to_bbox(const Region& r) noexcept;
Region to_region(const BBox& b) noexcept;
double iou(const BBox& a, const BBox& b) noexcept;
long intersection_area(const BBox& a, const BBox& b) noexcept;

struct AnnotatedObject {
  std::string name;  // class label
  BBox bbox;
  std::string pose = "Unspecified";
  bool truncated = false;
  bool difficult = false;

  friend bool operator==(const AnnotatedObject&, const AnnotatedObject&) = default;
};

struct AnnotatedSample {
  std::filesystem::path image_path;  // where the pixels live; may be empty
  std::string folder = "VOC2007";
  std::string filename;  // file name inside the dataset's image directory
  int width = 0;
  int height = 0;
  int depth = 3;
  bool segmented = false;
  std::vector<AnnotatedObject> objects;

  friend bool operator==(const AnnotatedSample&, const AnnotatedSample&) = default;
};

/// The 20 object categories of the VOC benchmark, in its canonical order.
const std::vector<std::string>& voc_classes();
bool is_voc_class(std::string_view label);

/// Canonical tab-indented VOC annotation; identical samples give identical bytes.
std::string to_voc_xml(const AnnotatedSample& sample);
/// Throws ParseFailure. image_path is left empty.
AnnotatedSample parse_voc_xml(const std::string& xml);

AnnotatedSample read_voc(const std::filesystem::path& path);
void write_voc(const AnnotatedSample& sample, const std::filesystem::path& path);

/// Maps a box drawn on the small (target) image onto the large attack image,
/// rounding outwards and clipping to `large`.
BBox scale_bbox(const BBox& small, double ratio_x, double ratio_y, Size large) noexcept;

}  // namespace scalecamo
