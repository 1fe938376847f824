#include "scalecamo/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "scalecamo/error.hpp"
#include "scalecamo/metrics.hpp"
#include "scalecamo/parallel.hpp"
#include "scalecamo/scale_ops.hpp"

namespace scalecamo {

std::string_view to_string(FilterKind kind) noexcept {
  switch (kind) {
    case FilterKind::minimum: return "minimum";
    case FilterKind::maximum: return "maximum";
    case FilterKind::box: break;
  }
  return "box";
}

FilterKind parse_filter_kind(std::string_view text) {
  for (auto k : {FilterKind::minimum, FilterKind::maximum, FilterKind::box}) {
    if (text == to_string(k)) return k;
  }
  throw Error(ErrorCode::parse_failure, "unknown filter kind: " + std::string(text));
}

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::scaling: return "Scaling";
    case Method::filtering: return "Filtering";
    case Method::steganalysis: break;
  }
  return "Steganalysis";
}

std::string_view to_string(Metric metric) noexcept {
  switch (metric) {
    case Metric::mse: return "MSE";
    case Metric::ssim: return "SSIM";
    case Metric::csp: break;
  }
  return "CSP";
}

void validate(const DetectionConfig& c) {
  for (double t : {c.scaling_mse_threshold, c.scaling_mse_alternate, c.filtering_mse_threshold,
                   c.csp_threshold}) {
    if (!(t > 0.0)) throw Error(ErrorCode::invalid_argument, "thresholds must be positive");
  }
  for (double t : {c.scaling_ssim_threshold, c.filtering_ssim_threshold}) {
    if (!(t > 0.0 && t <= 1.0)) {
      throw Error(ErrorCode::invalid_argument, "SSIM thresholds must lie in (0, 1]");
    }
  }
  if (c.probe_downscale_size.height < 1 || c.probe_downscale_size.width < 1) {
    throw Error(ErrorCode::invalid_argument, "probe size must be positive");
  }
  if (c.filter_window < 2) throw Error(ErrorCode::invalid_argument, "filter window must be >= 2");
  if (!(c.csp_band > 0.0 && c.csp_band <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "csp_band must lie in (0, 1]");
  }
}

SimilarityPair scaling_test(const RasterImage& image, const DetectionConfig& config) {
  const Size probe = config.probe_downscale_size;
  if (image.height() < probe.height || image.width() < probe.width) {
    throw Error(ErrorCode::image_too_small, "image " + to_string(image.size()) +
                                                " is smaller than the probe size " +
                                                to_string(probe));
  }
  const auto op = build_operator(Algorithm::bilinear, image.size(), probe);
  const RasterImage back = upscale(downscale(image, op), Algorithm::bilinear, image.size());
  return {mean_squared_error(image, back), structural_similarity(image, back)};
}

SimilarityPair filtering_test(const RasterImage& image, const DetectionConfig& config) {
  const int k = config.filter_window;
  if (k < 2) throw Error(ErrorCode::invalid_argument, "filter window must be >= 2");
  if (image.height() < k || image.width() < k) {
    throw Error(ErrorCode::image_too_small, "image " + to_string(image.size()) +
                                                " is smaller than the filter window");
  }
  std::vector<Plane> planes;
  for (int c = 0; c < image.channels(); ++c) {
    Plane p = image.plane(c);
    Plane out(p.rows, p.cols);
    const cv::Mat src(p.rows, p.cols, CV_64F, p.values.data());
    cv::Mat dst(out.rows, out.cols, CV_64F, out.values.data());
    const cv::Mat kernel = cv::Mat::ones(k, k, CV_8U);
    switch (config.filter_kind) {
      case FilterKind::minimum:
        cv::erode(src, dst, kernel, {-1, -1}, 1, cv::BORDER_REPLICATE);
        break;
      case FilterKind::maximum:
        cv::dilate(src, dst, kernel, {-1, -1}, 1, cv::BORDER_REPLICATE);
        break;
      case FilterKind::box:
        cv::blur(src, dst, {k, k}, {-1, -1}, cv::BORDER_REPLICATE);
        break;
    }
    planes.push_back(std::move(out));
  }
  const RasterImage filtered = RasterImage::from_planes(planes);
  return {mean_squared_error(image, filtered), structural_similarity(image, filtered)};
}

int steganalysis_test(const RasterImage& image, const DetectionConfig& config) {
  Plane gray = image.grayscale().plane(0);
  const int h = gray.rows, w = gray.cols;
  const cv::Mat src(h, w, CV_64F, gray.values.data());
  cv::Mat spectrum;
  cv::dft(src, spectrum, cv::DFT_COMPLEX_OUTPUT);
  std::vector<cv::Mat> parts;
  cv::split(spectrum, parts);
  cv::Mat magnitude;
  cv::magnitude(parts[0], parts[1], magnitude);

  // Centered log-magnitude: DC lands on (h/2, w/2).
  cv::Mat centered(h, w, CV_64F);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = magnitude.at<double>((y - h / 2 + h) % h, (x - w / 2 + w) % w);
      centered.at<double>(y, x) = std::log1p(m);
    }
  }
  cv::Scalar mean, stddev;
  cv::meanStdDev(centered, mean, stddev);
  const double level = mean[0] + config.csp_sigma * stddev[0];

  const int hy = std::max(1, static_cast<int>(config.csp_band * h / 2.0));
  const int hx = std::max(1, static_cast<int>(config.csp_band * w / 2.0));
  const int y0 = std::max(0, h / 2 - hy), y1 = std::min(h, h / 2 + hy + 1);
  const int x0 = std::max(0, w / 2 - hx), x1 = std::min(w, w / 2 + hx + 1);
  cv::Mat band(y1 - y0, x1 - x0, CV_8U);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) band.at<std::uint8_t>(y - y0, x - x0) = centered.at<double>(y, x) > level ? 255 : 0;
  }
  cv::Mat labels;
  return cv::connectedComponents(band, labels, 8, CV_32S) - 1;
}

bool flags_attack(const DetectionVerdict& v, const ThresholdRule& r) {
  switch (r.method) {
    case Method::scaling:
      return r.metric == Metric::ssim ? v.scaling_ssim < r.threshold : v.scaling_mse > r.threshold;
    case Method::filtering:
      return r.metric == Metric::ssim ? v.filtering_ssim < r.threshold
                                      : v.filtering_mse > r.threshold;
    case Method::steganalysis: break;
  }
  return v.csp_count > r.threshold;
}

DetectionVerdict inspect(const RasterImage& image, const DetectionConfig& config) {
  DetectionVerdict v;
  const auto s = scaling_test(image, config);
  const auto f = filtering_test(image, config);
  v.scaling_mse = s.mse;
  v.scaling_ssim = s.ssim;
  v.filtering_mse = f.mse;
  v.filtering_ssim = f.ssim;
  v.csp_count = steganalysis_test(image, config);
  v.scaling_mse_flag = flags_attack(v, {Method::scaling, Metric::mse, config.scaling_mse_threshold});
  v.scaling_ssim_flag = flags_attack(v, {Method::scaling, Metric::ssim, config.scaling_ssim_threshold});
  v.filtering_mse_flag =
      flags_attack(v, {Method::filtering, Metric::mse, config.filtering_mse_threshold});
  v.filtering_ssim_flag =
      flags_attack(v, {Method::filtering, Metric::ssim, config.filtering_ssim_threshold});
  v.csp_flag = flags_attack(v, {Method::steganalysis, Metric::csp, config.csp_threshold});
  return v;
}

std::vector<ThresholdRule> report_rules(const DetectionConfig& c) {
  return {{Method::scaling, Metric::mse, c.scaling_mse_threshold},
          {Method::scaling, Metric::mse, c.scaling_mse_alternate},
          {Method::scaling, Metric::ssim, c.scaling_ssim_threshold},
          {Method::filtering, Metric::mse, c.filtering_mse_threshold},
          {Method::filtering, Metric::ssim, c.filtering_ssim_threshold},
          {Method::steganalysis, Metric::csp, c.csp_threshold}};
}

ReportRow evaluate_rule(const ThresholdRule& rule, const std::vector<DetectionVerdict>& benign,
                        const std::vector<DetectionVerdict>& attacks) {
  if (benign.empty() || attacks.empty()) {
    throw Error(ErrorCode::empty_corpus, "both the benign and the attack list must be non-empty");
  }
  ReportRow row{rule, 0.0, 0.0, attacks.size(), benign.size()};
  std::size_t missed = 0, rejected = 0;
  for (const auto& v : attacks) missed += flags_attack(v, rule) ? 0 : 1;
  for (const auto& v : benign) rejected += flags_attack(v, rule) ? 1 : 0;
  row.far = static_cast<double>(missed) / static_cast<double>(attacks.size());
  row.frr = static_cast<double>(rejected) / static_cast<double>(benign.size());
  return row;
}

CorpusReport evaluate_corpus(const std::vector<RasterImage>& benign,
                             const std::vector<RasterImage>& attacks,
                             const DetectionConfig& config, int threads) {
  if (benign.empty() || attacks.empty()) {
    throw Error(ErrorCode::empty_corpus, "both the benign and the attack list must be non-empty");
  }
  validate(config);
  CorpusReport report;
  report.benign.resize(benign.size());
  report.attacks.resize(attacks.size());
  parallel_for(benign.size() + attacks.size(), threads, [&](std::size_t i) {
    if (i < benign.size()) {
      report.benign[i] = inspect(benign[i], config);
    } else {
      report.attacks[i - benign.size()] = inspect(attacks[i - benign.size()], config);
    }
  });
  for (const auto& rule : report_rules(config)) {
    report.rows.push_back(evaluate_rule(rule, report.benign, report.attacks));
  }
  return report;
}

void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& out) {
  out << "method,metric,threshold,far,frr,attacks,benign\n";
  for (const auto& r : rows) {
    char line[256];
    std::snprintf(line, sizeof line, "%s,%s,%.10g,%.6f,%.6f,%zu,%zu\n",
                  std::string(to_string(r.rule.method)).c_str(),
                  std::string(to_string(r.rule.metric)).c_str(), r.rule.threshold, r.far, r.frr,
                  r.attacks, r.benign);
    out << line;
  }
}

std::string report_json(const std::vector<ReportRow>& rows) {
  auto j = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    j.push_back({{"method", std::string(to_string(r.rule.method))},
                 {"metric", std::string(to_string(r.rule.metric))},
                 {"threshold", r.rule.threshold},
                 {"far", r.far},
                 {"frr", r.frr},
                 {"attacks", r.attacks},
                 {"benign", r.benign}});
  }
  return j.dump(2);
}

std::vector<CorpusEntry> read_corpus_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot read " + path.string());
  std::vector<CorpusEntry> entries;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& item : j.at("images")) {
      std::filesystem::path p = item.at("path").get<std::string>();
      if (p.is_relative()) p = path.parent_path() / p;
      const auto label = item.at("label").get<std::string>();
      if (label != "attack" && label != "benign") {
        throw Error(ErrorCode::parse_failure, "label must be attack or benign, got " + label);
      }
      entries.push_back({p, label == "attack"});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_failure, path.string() + ": " + e.what());
  }
  return entries;
}

void write_corpus_manifest(const std::vector<CorpusEntry>& entries,
                           const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  auto& list = j["images"] = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    list.push_back({{"path", e.path.generic_string()},
                    {"label", e.attack ? "attack" : "benign"}});
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace scalecamo
