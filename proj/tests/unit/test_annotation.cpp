#include <gtest/gtest.h>

#include <string>

#include "oracles.hpp"
#include "scalecamo/annotation.hpp"
#include "scalecamo/error.hpp"
#include "temp_dir.hpp"

using namespace scalecamo;

namespace {

AnnotatedSample sample() {
  AnnotatedSample s;
  s.filename = "000005.jpg";
  s.width = 500;
  s.height = 375;
  s.objects.push_back({"chair", {263, 211, 324, 339}, "Rear", false, false});
  s.objects.push_back({"person", {5, 20, 90, 300}, "Frontal", true, true});
  return s;
}

}  // namespace

TEST(BBox, IouAndConversions) {
  const BBox a{0, 0, 10, 10}, b{5, 5, 15, 15};
  EXPECT_EQ(intersection_area(a, b), 25);
  EXPECT_NEAR(iou(a, b), 25.0 / 175.0, 1e-12);
  EXPECT_EQ(iou(a, {20, 20, 30, 30}), 0.0);
  EXPECT_EQ(to_bbox(Region{2, 3, 4, 5}), (BBox{2, 3, 6, 8}));
  EXPECT_EQ(to_region(BBox{2, 3, 6, 8}), (Region{2, 3, 4, 5}));
}

TEST(BBox, ScaleRoundsOutwardAndClips) {
  EXPECT_EQ(scale_bbox({1, 2, 3, 4}, 3.0, 3.0, {100, 100}), (BBox{3, 6, 9, 12}));
  EXPECT_EQ(scale_bbox({1, 1, 3, 3}, 2.5, 1.5, {100, 100}), (BBox{2, 1, 8, 5}));
  EXPECT_EQ(scale_bbox({0, 0, 40, 40}, 3.0, 3.0, {100, 110}), (BBox{0, 0, 110, 100}));
}

TEST(Voc, ClassesAreTheTwentyCategories) {
  EXPECT_EQ(voc_classes().size(), 20u);
  EXPECT_TRUE(is_voc_class("diningtable"));
  EXPECT_TRUE(is_voc_class("person"));
  EXPECT_FALSE(is_voc_class("Person"));
  EXPECT_FALSE(is_voc_class("table"));
}

TEST(Voc, WriteParseRoundTripIsByteStable) {
  const auto s = sample();
  const auto xml = to_voc_xml(s);
  const auto back = parse_voc_xml(xml);
  EXPECT_EQ(back, s);
  EXPECT_EQ(to_voc_xml(back), xml);
}

TEST(Voc, ParsesForeignLayout) {
  const std::string xml = R"(<annotation><folder>VOC2012</folder><filename>a.jpg</filename>
    <source><database>x</database></source>
    <size><width>10</width><height>20</height><depth>3</depth></size>
    <object><name>dog</name><bndbox><xmin>1.0</xmin><ymin>2</ymin><xmax>7.6</xmax><ymax>9</ymax></bndbox></object>
    </annotation>)";
  const auto s = parse_voc_xml(xml);
  EXPECT_EQ(s.folder, "VOC2012");
  EXPECT_EQ(s.width, 10);
  EXPECT_EQ(s.height, 20);
  ASSERT_EQ(s.objects.size(), 1u);
  EXPECT_EQ(s.objects[0].name, "dog");
  EXPECT_EQ(s.objects[0].bbox, (BBox{1, 2, 8, 9}));
  EXPECT_EQ(s.objects[0].pose, "Unspecified");
}

TEST(Voc, MalformedInputThrowsParseFailure) {
  for (const std::string bad : {"<annotation>", "<annotation><size></size></annotation>",
                                "<annotation><size><width>a</width><height>2</height></size></annotation>"}) {
    try {
      parse_voc_xml(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::parse_failure);
    }
  }
}

TEST(Voc, FileRoundTripAndEscaping) {
  testutil::TempDir dir("voc");
  auto s = sample();
  s.filename = "a&b<c>.jpg";
  write_voc(s, dir / "x.xml");
  EXPECT_EQ(read_voc(dir / "x.xml"), s);
  EXPECT_THROW(read_voc(dir / "none.xml"), Error);
}

TEST(VocProperty, RandomSamplesRoundTrip) {
  oracle::Gen g(5);
  for (int trial = 0; trial < 50; ++trial) {
    AnnotatedSample s;
    s.filename = std::to_string(g.integer(0, 999999)) + ".jpg";
    s.width = g.integer(1, 2000);
    s.height = g.integer(1, 2000);
    s.segmented = g.coin();
    const int n = g.integer(0, 6);
    for (int i = 0; i < n; ++i) {
      const int x0 = g.integer(0, s.width - 1), y0 = g.integer(0, s.height - 1);
      s.objects.push_back({voc_classes()[static_cast<std::size_t>(g.integer(0, 19))],
                           {x0, y0, g.integer(x0 + 1, s.width), g.integer(y0 + 1, s.height)},
                           g.coin() ? "Left" : "Unspecified", g.coin(), g.coin()});
    }
    const auto xml = to_voc_xml(s);
    EXPECT_EQ(parse_voc_xml(xml), s);
    EXPECT_EQ(to_voc_xml(parse_voc_xml(xml)), xml);
  }
}
