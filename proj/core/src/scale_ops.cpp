#include "scalecamo/scale_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "scalecamo/error.hpp"

namespace scalecamo {

namespace {

void check_lengths(int src_len, int dst_len) {
  if (src_len < 1 || dst_len < 1) {
    throw Error(ErrorCode::invalid_argument, "resize lengths must be positive");
  }
}

// Half-pixel centered: output index d samples u = (d + 0.5) * src / dst - 0.5.
std::vector<CoefficientMatrix::Entry> bilinear_row(int d, int src_len, int dst_len) {
  const double u = (static_cast<double>(2 * d + 1) * src_len - dst_len) / (2.0 * dst_len);
  int s = static_cast<int>(std::floor(u));
  double frac = u - s;
  if (s < 0) {
    s = 0;
    frac = 0.0;
  }
  if (s >= src_len - 1) {
    s = src_len - 1;
    frac = 0.0;
  }
  if (frac == 0.0) return {{s, 1.0}};
  return {{s, 1.0 - frac}, {s + 1, frac}};
}

std::vector<CoefficientMatrix::Entry> nearest_row(int d, int src_len, int dst_len) {
  // round(u) with halves up == floor((d + 0.5) * src / dst), done in integers.
  const long long s = (static_cast<long long>(2 * d + 1) * src_len) / (2LL * dst_len);
  return {{static_cast<int>(std::min<long long>(s, src_len - 1)), 1.0}};
}

std::vector<CoefficientMatrix::Entry> area_row(int d, int src_len, int dst_len) {
  // Source box [d * src / dst, (d + 1) * src / dst), weights by fractional coverage.
  const double lo = static_cast<double>(static_cast<long long>(d) * src_len) / dst_len;
  const double hi = std::min<double>(
      static_cast<double>(static_cast<long long>(d + 1) * src_len) / dst_len, src_len);
  std::vector<CoefficientMatrix::Entry> row;
  double total = 0.0;
  const int first = static_cast<int>(std::floor(lo));
  const int last = std::min(src_len - 1, static_cast<int>(std::ceil(hi)) - 1);
  for (int k = first; k <= last; ++k) {
    const double overlap = std::min<double>(hi, k + 1) - std::max<double>(lo, k);
    if (overlap > 1e-12) {
      row.push_back({k, overlap});
      total += overlap;
    }
  }
  for (auto& e : row) e.weight /= total;
  return row;
}

Plane apply_pair(const CoefficientMatrix& rows, const CoefficientMatrix& cols, const Plane& in) {
  // tmp = X C^T  (in.rows x cols.rows)
  Plane tmp(in.rows, cols.rows());
  for (int r = 0; r < in.rows; ++r) cols.apply(in.row(r), tmp.row(r));
  // out = R tmp
  Plane out(rows.rows(), cols.rows());
  for (int i = 0; i < rows.rows(); ++i) {
    auto dst = out.row(i);
    for (const auto& e : rows.row(i)) {
      const auto src = tmp.row(e.col);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += e.weight * src[j];
    }
  }
  return out;
}

RasterImage apply_per_channel(const RasterImage& image, const ScalingOperator& op) {
  std::vector<Plane> planes;
  planes.reserve(static_cast<std::size_t>(image.channels()));
  for (int c = 0; c < image.channels(); ++c) {
    Plane p = op.apply(image.plane(c));
    for (double& v : p.values) v = std::clamp(v, 0.0, 255.0);
    planes.push_back(std::move(p));
  }
  return RasterImage::from_planes(planes);
}

}  // namespace

std::string_view to_string(Algorithm algorithm) noexcept {
  switch (algorithm) {
    case Algorithm::nearest: return "nearest";
    case Algorithm::bilinear: return "bilinear";
    case Algorithm::area: return "area";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "nearest") return Algorithm::nearest;
  if (name == "bilinear" || name == "linear") return Algorithm::bilinear;
  if (name == "area") return Algorithm::area;
  throw Error(ErrorCode::unsupported_algorithm,
              "unsupported scaling algorithm '" + std::string(name) + "'");
}

CoefficientMatrix::CoefficientMatrix(int rows, int cols,
                                     std::vector<std::vector<Entry>> row_entries)
    : rows_(rows), cols_(cols) {
  if (static_cast<int>(row_entries.size()) != rows) {
    throw Error(ErrorCode::dimension_mismatch, "row count does not match entries");
  }
  offsets_.reserve(static_cast<std::size_t>(rows) + 1);
  for (auto& r : row_entries) {
    for (const auto& e : r) {
      if (e.col < 0 || e.col >= cols) {
        throw Error(ErrorCode::invalid_argument, "coefficient column out of range");
      }
      entries_.push_back(e);
    }
    offsets_.push_back(entries_.size());
  }
}

void CoefficientMatrix::apply(std::span<const double> x, std::span<double> y) const {
  for (int r = 0; r < rows_; ++r) {
    double acc = 0.0;
    for (const auto& e : row(r)) acc += e.weight * x[static_cast<std::size_t>(e.col)];
    y[static_cast<std::size_t>(r)] = acc;
  }
}

void CoefficientMatrix::apply_transpose(std::span<const double> y, std::span<double> x) const {
  std::fill(x.begin(), x.end(), 0.0);
  for (int r = 0; r < rows_; ++r) {
    const double v = y[static_cast<std::size_t>(r)];
    for (const auto& e : row(r)) x[static_cast<std::size_t>(e.col)] += e.weight * v;
  }
}

double CoefficientMatrix::max_row_sum() const {
  double best = 0.0;
  for (int r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (const auto& e : row(r)) s += std::abs(e.weight);
    best = std::max(best, s);
  }
  return best;
}

double CoefficientMatrix::max_col_sum() const {
  std::vector<double> sums(static_cast<std::size_t>(cols_), 0.0);
  for (const auto& e : entries_) sums[static_cast<std::size_t>(e.col)] += std::abs(e.weight);
  return sums.empty() ? 0.0 : *std::max_element(sums.begin(), sums.end());
}

std::vector<double> CoefficientMatrix::to_dense() const {
  std::vector<double> dense(static_cast<std::size_t>(rows_) * cols_, 0.0);
  for (int r = 0; r < rows_; ++r)
    for (const auto& e : row(r)) dense[static_cast<std::size_t>(r) * cols_ + e.col] += e.weight;
  return dense;
}

CoefficientMatrix axis_weights(Algorithm algorithm, int src_len, int dst_len) {
  check_lengths(src_len, dst_len);
  std::vector<std::vector<CoefficientMatrix::Entry>> rows(static_cast<std::size_t>(dst_len));
  for (int d = 0; d < dst_len; ++d) {
    switch (algorithm) {
      case Algorithm::nearest: rows[d] = nearest_row(d, src_len, dst_len); break;
      case Algorithm::bilinear: rows[d] = bilinear_row(d, src_len, dst_len); break;
      case Algorithm::area:
        if (dst_len > src_len) {
          throw Error(ErrorCode::unsupported_algorithm, "area interpolation is downscale-only");
        }
        rows[d] = area_row(d, src_len, dst_len);
        break;
    }
  }
  return CoefficientMatrix(dst_len, src_len, std::move(rows));
}

ScalingOperator::ScalingOperator(Algorithm algorithm, Size source, Size destination,
                                 CoefficientMatrix rows, CoefficientMatrix cols)
    : algorithm_(algorithm),
      source_(source),
      destination_(destination),
      rows_(std::move(rows)),
      cols_(std::move(cols)) {
  if (rows_.rows() != destination.height || rows_.cols() != source.height ||
      cols_.rows() != destination.width || cols_.cols() != source.width) {
    throw Error(ErrorCode::dimension_mismatch, "coefficient matrices do not match geometry");
  }
}

Plane ScalingOperator::apply(const Plane& input) const {
  if (input.rows != source_.height || input.cols != source_.width) {
    throw Error(ErrorCode::dimension_mismatch, "plane " + std::to_string(input.rows) + "x" +
                                                   std::to_string(input.cols) +
                                                   " does not match operator source " +
                                                   to_string(source_));
  }
  return apply_pair(rows_, cols_, input);
}

Plane ScalingOperator::apply_rows_first(const Plane& input) const {
  if (input.rows != source_.height || input.cols != source_.width) {
    throw Error(ErrorCode::dimension_mismatch, "plane does not match operator source");
  }
  // tmp = R X, then out = tmp C^T
  Plane tmp(destination_.height, source_.width);
  for (int i = 0; i < destination_.height; ++i) {
    auto dst = tmp.row(i);
    for (const auto& e : rows_.row(i)) {
      const auto src = input.row(e.col);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += e.weight * src[j];
    }
  }
  Plane out(destination_.height, destination_.width);
  for (int i = 0; i < destination_.height; ++i) cols_.apply(tmp.row(i), out.row(i));
  return out;
}

Plane ScalingOperator::apply_transpose(const Plane& output) const {
  if (output.rows != destination_.height || output.cols != destination_.width) {
    throw Error(ErrorCode::dimension_mismatch, "plane does not match operator destination");
  }
  // tmp = R^T Y  (src_h x dst_w)
  Plane tmp(source_.height, destination_.width);
  for (int i = 0; i < destination_.height; ++i) {
    const auto src = output.row(i);
    for (const auto& e : rows_.row(i)) {
      auto dst = tmp.row(e.col);
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += e.weight * src[j];
    }
  }
  // out = tmp C
  Plane out(source_.height, source_.width);
  for (int k = 0; k < source_.height; ++k) cols_.apply_transpose(tmp.row(k), out.row(k));
  return out;
}

ScalingOperator build_operator(Algorithm algorithm, Size source, Size destination) {
  if (source.height < 1 || source.width < 1 || destination.height < 1 ||
      destination.width < 1) {
    throw Error(ErrorCode::invalid_argument, "operator geometry must be positive");
  }
  if (destination.height > source.height || destination.width > source.width) {
    throw Error(ErrorCode::upscale_requested, "destination " + to_string(destination) +
                                                  " exceeds source " + to_string(source));
  }
  return ScalingOperator(algorithm, source, destination,
                         axis_weights(algorithm, source.height, destination.height),
                         axis_weights(algorithm, source.width, destination.width));
}

RasterImage downscale(const RasterImage& image, const ScalingOperator& op) {
  if (image.size() != op.source()) {
    throw Error(ErrorCode::dimension_mismatch, "image " + to_string(image.size()) +
                                                   " does not match operator source " +
                                                   to_string(op.source()));
  }
  return apply_per_channel(image, op);
}

RasterImage upscale(const RasterImage& image, Algorithm algorithm, Size destination) {
  if (destination.height < image.height() || destination.width < image.width()) {
    throw Error(ErrorCode::downscale_requested, "destination " + to_string(destination) +
                                                    " is smaller than " +
                                                    to_string(image.size()));
  }
  if (algorithm == Algorithm::area) {
    throw Error(ErrorCode::unsupported_algorithm, "upscaling supports nearest and bilinear");
  }
  ScalingOperator op(algorithm, image.size(), destination,
                     axis_weights(algorithm, image.height(), destination.height),
                     axis_weights(algorithm, image.width(), destination.width));
  return apply_per_channel(image, op);
}

RasterImage resize_direct(const RasterImage& image, Algorithm algorithm, Size destination) {
  if (destination.height < 1 || destination.width < 1) {
    throw Error(ErrorCode::invalid_argument, "destination must be positive");
  }
  const int sh = image.height();
  const int sw = image.width();
  const int dh = destination.height;
  const int dw = destination.width;
  const int ch = image.channels();
  const double scale_y = static_cast<double>(sh) / dh;
  const double scale_x = static_cast<double>(sw) / dw;
  RasterImage out(dh, dw, ch);

  switch (algorithm) {
    case Algorithm::nearest:
      // floor((y + 0.5) * scale) in exact integer arithmetic.
      for (int y = 0; y < dh; ++y) {
        const int sy = std::min(static_cast<int>((2LL * y + 1) * sh / (2LL * dh)), sh - 1);
        for (int x = 0; x < dw; ++x) {
          const int sx = std::min(static_cast<int>((2LL * x + 1) * sw / (2LL * dw)), sw - 1);
          for (int c = 0; c < ch; ++c) out.set(y, x, c, image(sy, sx, c));
        }
      }
      break;

    case Algorithm::bilinear:
      for (int y = 0; y < dh; ++y) {
        double fy = (y + 0.5) * scale_y - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        fy -= y0;
        if (y0 < 0) y0 = 0, fy = 0.0;
        if (y0 >= sh - 1) y0 = sh - 1, fy = 0.0;
        const int y1 = std::min(y0 + 1, sh - 1);
        for (int x = 0; x < dw; ++x) {
          double fx = (x + 0.5) * scale_x - 0.5;
          int x0 = static_cast<int>(std::floor(fx));
          fx -= x0;
          if (x0 < 0) x0 = 0, fx = 0.0;
          if (x0 >= sw - 1) x0 = sw - 1, fx = 0.0;
          const int x1 = std::min(x0 + 1, sw - 1);
          for (int c = 0; c < ch; ++c) {
            const double top = (1.0 - fx) * image(y0, x0, c) + fx * image(y0, x1, c);
            const double bottom = (1.0 - fx) * image(y1, x0, c) + fx * image(y1, x1, c);
            out.set(y, x, c, (1.0 - fy) * top + fy * bottom);
          }
        }
      }
      break;

    case Algorithm::area: {
      if (dh > sh || dw > sw) {
        throw Error(ErrorCode::unsupported_algorithm, "area interpolation is downscale-only");
      }
      std::vector<double> acc(static_cast<std::size_t>(ch));
      for (int y = 0; y < dh; ++y) {
        const double y_lo = y * scale_y;
        const double y_hi = std::min((y + 1) * scale_y, static_cast<double>(sh));
        for (int x = 0; x < dw; ++x) {
          const double x_lo = x * scale_x;
          const double x_hi = std::min((x + 1) * scale_x, static_cast<double>(sw));
          std::fill(acc.begin(), acc.end(), 0.0);
          double total = 0.0;
          for (int sy = static_cast<int>(y_lo); sy < sh && sy < y_hi; ++sy) {
            const double wy = std::min<double>(y_hi, sy + 1) - std::max<double>(y_lo, sy);
            if (wy <= 1e-12) continue;
            for (int sx = static_cast<int>(x_lo); sx < sw && sx < x_hi; ++sx) {
              const double wx = std::min<double>(x_hi, sx + 1) - std::max<double>(x_lo, sx);
              if (wx <= 1e-12) continue;
              total += wy * wx;
              for (int c = 0; c < ch; ++c) acc[c] += wy * wx * image(sy, sx, c);
            }
          }
          for (int c = 0; c < ch; ++c) out.set(y, x, c, acc[c] / total);
        }
      }
      break;
    }
  }
  return out;
}

RasterImage resize(const RasterImage& image, Algorithm algorithm, Size destination) {
  if (destination == image.size()) return image;
  if (destination.height <= image.height() && destination.width <= image.width()) {
    return downscale(image, build_operator(algorithm, image.size(), destination));
  }
  if (destination.height >= image.height() && destination.width >= image.width()) {
    return upscale(image, algorithm, destination);
  }
  return resize_direct(image, algorithm, destination);
}

const std::vector<InputSizeProfile>& model_profiles() {
  static const std::vector<InputSizeProfile> profiles = {
      {"centernet", {{512, 512}}, Algorithm::bilinear},
      {"yolov3", {{320, 320}, {416, 416}, {608, 608}}, Algorithm::bilinear},
      {"yolov4", {{416, 416}, {512, 512}, {608, 608}}, Algorithm::bilinear},
      {"faster-rcnn", {{600, 600}}, Algorithm::bilinear},
  };
  return profiles;
}

const InputSizeProfile& find_profile(std::string_view model_name) {
  for (const auto& p : model_profiles()) {
    if (p.model_name == model_name) return p;
  }
  throw Error(ErrorCode::invalid_argument, "unknown model profile '" + std::string(model_name) + "'");
}

void validate(const InputSizeProfile& profile) {
  if (profile.input_sizes.empty()) {
    throw Error(ErrorCode::invalid_argument, profile.model_name + ": no input sizes");
  }
  for (const auto& s : profile.input_sizes) {
    if (s.height < 32 || s.width < 32) {
      throw Error(ErrorCode::invalid_argument,
                  profile.model_name + ": input size " + to_string(s) + " below 32 pixels");
    }
  }
}

void write_operator_dump(const ScalingOperator& op, std::ostream& out) {
  auto dump = [&out](const char* name, const CoefficientMatrix& m) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << ' ' << m.nonzeros() << '\n';
    char buf[64];
    for (int r = 0; r < m.rows(); ++r) {
      for (const auto& e : m.row(r)) {
        std::snprintf(buf, sizeof buf, "%.17g", e.weight);
        out << r << ' ' << e.col << ' ' << buf << '\n';
      }
    }
  };
  out << "scalecamo-operator 1\n";
  out << "algorithm " << to_string(op.algorithm()) << '\n';
  out << "source " << op.source().height << ' ' << op.source().width << '\n';
  out << "destination " << op.destination().height << ' ' << op.destination().width << '\n';
  dump("row_matrix", op.row_matrix());
  dump("col_matrix", op.col_matrix());
}

}  // namespace scalecamo
