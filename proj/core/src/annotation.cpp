#include "scalecamo/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "scalecamo/error.hpp"

namespace scalecamo {

BBox to_bbox(const Region& r) noexcept { return {r.x, r.y, r.x + r.w, r.y + r.h}; }

Region to_region(const BBox& b) noexcept {
  return {b.xmin, b.ymin, b.xmax - b.xmin, b.ymax - b.ymin};
}

long intersection_area(const BBox& a, const BBox& b) noexcept {
  return BBox{std::max(a.xmin, b.xmin), std::max(a.ymin, b.ymin), std::min(a.xmax, b.xmax),
              std::min(a.ymax, b.ymax)}
      .area();
}

double iou(const BBox& a, const BBox& b) noexcept {
  const long inter = intersection_area(a, b);
  const long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

const std::vector<std::string>& voc_classes() {
  static const std::vector<std::string> classes = {
      "aeroplane", "bicycle", "bird",  "boat",      "bottle", "bus",         "car",
      "cat",       "chair",   "cow",   "diningtable", "dog",  "horse",       "motorbike",
      "person",    "pottedplant", "sheep", "sofa",  "train",  "tvmonitor"};
  return classes;
}

bool is_voc_class(std::string_view label) {
  const auto& c = voc_classes();
  return std::find(c.begin(), c.end(), label) != c.end();
}

namespace {

std::string escape(std::string_view text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

std::string to_voc_xml(const AnnotatedSample& s) {
  std::ostringstream x;
  x << "<annotation>\n";
  x << "\t<folder>" << escape(s.folder) << "</folder>\n";
  x << "\t<filename>" << escape(s.filename) << "</filename>\n";
  x << "\t<size>\n";
  x << "\t\t<width>" << s.width << "</width>\n";
  x << "\t\t<height>" << s.height << "</height>\n";
  x << "\t\t<depth>" << s.depth << "</depth>\n";
  x << "\t</size>\n";
  x << "\t<segmented>" << (s.segmented ? 1 : 0) << "</segmented>\n";
  for (const auto& o : s.objects) {
    x << "\t<object>\n";
    x << "\t\t<name>" << escape(o.name) << "</name>\n";
    x << "\t\t<pose>" << escape(o.pose) << "</pose>\n";
    x << "\t\t<truncated>" << (o.truncated ? 1 : 0) << "</truncated>\n";
    x << "\t\t<difficult>" << (o.difficult ? 1 : 0) << "</difficult>\n";
    x << "\t\t<bndbox>\n";
    x << "\t\t\t<xmin>" << o.bbox.xmin << "</xmin>\n";
    x << "\t\t\t<ymin>" << o.bbox.ymin << "</ymin>\n";
    x << "\t\t\t<xmax>" << o.bbox.xmax << "</xmax>\n";
    x << "\t\t\t<ymax>" << o.bbox.ymax << "</ymax>\n";
    x << "\t\t</bndbox>\n";
    x << "\t</object>\n";
  }
  x << "</annotation>\n";
  return x.str();
}

AnnotatedSample parse_voc_xml(const std::string& xml) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(xml);
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
    const auto& root = tree.get_child("annotation");
    AnnotatedSample s;
    s.folder = root.get<std::string>("folder", "");
    s.filename = root.get<std::string>("filename");
    s.width = root.get<int>("size.width");
    s.height = root.get<int>("size.height");
    s.depth = root.get<int>("size.depth", 3);
    s.segmented = root.get<int>("segmented", 0) != 0;
    for (const auto& [key, node] : root) {
      if (key != "object") continue;
      AnnotatedObject o;
      o.name = node.get<std::string>("name");
      o.pose = node.get<std::string>("pose", "Unspecified");
      o.truncated = node.get<int>("truncated", 0) != 0;
      o.difficult = node.get<int>("difficult", 0) != 0;
      // Some tools write fractional coordinates; VOC boxes are integral.
      auto coord = [&](const char* k) {
        return static_cast<int>(std::lround(node.get<double>(std::string("bndbox.") + k)));
      };
      o.bbox = {coord("xmin"), coord("ymin"), coord("xmax"), coord("ymax")};
      s.objects.push_back(std::move(o));
    }
    return s;
  } catch (const pt::ptree_error& e) {
    throw Error(ErrorCode::parse_failure, std::string("VOC annotation: ") + e.what());
  }
}

AnnotatedSample read_voc(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_failure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_voc_xml(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_voc(const AnnotatedSample& sample, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
  out << to_voc_xml(sample);
  if (!out) throw Error(ErrorCode::io_failure, "short write to " + path.string());
}

BBox scale_bbox(const BBox& small, double ratio_x, double ratio_y, Size large) noexcept {
  BBox b;
  b.xmin = std::clamp(static_cast<int>(std::floor(small.xmin * ratio_x)), 0, large.width);
  b.ymin = std::clamp(static_cast<int>(std::floor(small.ymin * ratio_y)), 0, large.height);
  b.xmax = std::clamp(static_cast<int>(std::ceil(small.xmax * ratio_x)), 0, large.width);
  b.ymax = std::clamp(static_cast<int>(std::ceil(small.ymax * ratio_y)), 0, large.height);
  return b;
}

}  // namespace scalecamo
