#include "scalecamo/raster_image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "scalecamo/error.hpp"

namespace scalecamo {

namespace {

constexpr double kRangeSlack = 1e-9;

void check_geometry(int height, int width, int channels) {
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::invalid_argument,
                "image dimensions must be positive, got " + std::to_string(height) + "x" +
                    std::to_string(width));
  }
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::invalid_argument,
                "images carry 1 or 3 channels, got " + std::to_string(channels));
  }
}

double checked_intensity(double v) {
  if (!(v >= -kRangeSlack && v <= 255.0 + kRangeSlack)) {
    throw Error(ErrorCode::invalid_argument,
                "intensity " + std::to_string(v) + " outside [0, 255]");
  }
  return std::clamp(v, 0.0, 255.0);
}

}  // namespace

std::string to_string(Size size) {
  return std::to_string(size.height) + "x" + std::to_string(size.width);
}

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::unsupported_algorithm: return "UnsupportedAlgorithm";
    case ErrorCode::upscale_requested: return "UpscaleRequested";
    case ErrorCode::downscale_requested: return "DownscaleRequested";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::infeasible: return "Infeasible";
    case ErrorCode::placement_out_of_bounds: return "PlacementOutOfBounds";
    case ErrorCode::degenerate_pair: return "DegeneratePair";
    case ErrorCode::insufficient_candidates: return "InsufficientCandidates";
    case ErrorCode::all_scenes_empty: return "AllScenesEmpty";
    case ErrorCode::annotation_content_mismatch: return "AnnotationContentMismatch";
    case ErrorCode::image_too_small: return "ImageTooSmall";
    case ErrorCode::empty_corpus: return "EmptyCorpus";
    case ErrorCode::policy_range_invalid: return "PolicyRangeInvalid";
    case ErrorCode::io_failure: return "IOFailure";
    case ErrorCode::parse_failure: return "ParseFailure";
  }
  return "Unknown";
}

bool is_domain_failure(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::infeasible:
    case ErrorCode::degenerate_pair:
    case ErrorCode::insufficient_candidates:
    case ErrorCode::all_scenes_empty:
    case ErrorCode::annotation_content_mismatch:
      return true;
    default:
      return false;
  }
}

RasterImage::RasterImage(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  check_geometry(height, width, channels);
  pixels_.assign(static_cast<std::size_t>(height) * width * channels, checked_intensity(fill));
}

RasterImage::RasterImage(int height, int width, int channels, std::vector<double> pixels)
    : height_(height), width_(width), channels_(channels), pixels_(std::move(pixels)) {
  check_geometry(height, width, channels);
  if (pixels_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw Error(ErrorCode::dimension_mismatch, "pixel buffer does not match image geometry");
  }
  for (double& v : pixels_) v = checked_intensity(v);
}

RasterImage RasterImage::from_planes(std::span<const Plane> planes) {
  if (planes.empty()) throw Error(ErrorCode::invalid_argument, "no planes given");
  const int h = planes[0].rows;
  const int w = planes[0].cols;
  RasterImage out(h, w, static_cast<int>(planes.size()));
  for (int c = 0; c < out.channels(); ++c) out.set_plane(c, planes[static_cast<std::size_t>(c)]);
  return out;
}

void RasterImage::set(int y, int x, int c, double value) {
  pixels_[index(y, x, c)] = std::clamp(value, 0.0, 255.0);
}

Plane RasterImage::plane(int c) const {
  Plane p(height_, width_);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x) p(y, x) = pixels_[index(y, x, c)];
  return p;
}

void RasterImage::set_plane(int c, const Plane& plane) {
  if (plane.rows != height_ || plane.cols != width_) {
    throw Error(ErrorCode::dimension_mismatch, "plane does not match image geometry");
  }
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x) pixels_[index(y, x, c)] = checked_intensity(plane(y, x));
}

RasterImage RasterImage::quantized() const {
  RasterImage out = *this;
  for (double& v : out.pixels_) v = std::round(v);
  return out;
}

RasterImage RasterImage::grayscale() const {
  if (channels_ == 1) return *this;
  RasterImage out(height_, width_, 1);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const double luma = 0.299 * (*this)(y, x, 0) + 0.587 * (*this)(y, x, 1) +
                          0.114 * (*this)(y, x, 2);
      out.set(y, x, 0, luma);
    }
  }
  return out;
}

RasterImage read_image(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_ANYCOLOR);
  if (mat.empty()) {
    throw Error(ErrorCode::io_failure, "cannot read image " + path.string());
  }
  if (mat.depth() != CV_8U) mat.convertTo(mat, CV_8U);
  if (mat.channels() == 4) cv::cvtColor(mat, mat, cv::COLOR_BGRA2BGR);
  if (mat.channels() == 3) cv::cvtColor(mat, mat, cv::COLOR_BGR2RGB);

  const int channels = mat.channels();
  std::vector<double> pixels(static_cast<std::size_t>(mat.rows) * mat.cols * channels);
  std::size_t k = 0;
  for (int y = 0; y < mat.rows; ++y) {
    const auto* row = mat.ptr<unsigned char>(y);
    for (int i = 0; i < mat.cols * channels; ++i) pixels[k++] = row[i];
  }
  return RasterImage(mat.rows, mat.cols, channels, std::move(pixels));
}

void write_image(const RasterImage& image, const std::filesystem::path& path) {
  if (image.empty()) throw Error(ErrorCode::invalid_argument, "cannot write an empty image");
  const int type = image.channels() == 3 ? CV_8UC3 : CV_8UC1;
  cv::Mat mat(image.height(), image.width(), type);
  const auto px = image.pixels();
  std::size_t k = 0;
  for (int y = 0; y < mat.rows; ++y) {
    auto* row = mat.ptr<unsigned char>(y);
    for (int i = 0; i < mat.cols * image.channels(); ++i) {
      row[i] = static_cast<unsigned char>(std::lround(std::clamp(px[k++], 0.0, 255.0)));
    }
  }
  if (image.channels() == 3) cv::cvtColor(mat, mat, cv::COLOR_RGB2BGR);

  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::io_failure, "cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
}

void write_png(const RasterImage& image, const std::filesystem::path& path) {
  if (path.extension() != ".png") {
    throw Error(ErrorCode::invalid_argument,
                "attack images must be stored losslessly as .png, got " + path.string());
  }
  write_image(image, path);
}

}  // namespace scalecamo
