#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "scalecamo/raster_image.hpp"

namespace scalecamo {

enum class FilterKind { minimum, maximum, box };

std::string_view to_string(FilterKind kind) noexcept;
FilterKind parse_filter_kind(std::string_view text);

struct DetectionConfig {
  double scaling_mse_threshold = 1714.96;
  double scaling_mse_alternate = 3500.0;
  double scaling_ssim_threshold = 0.61;
  double filtering_mse_threshold = 5682.79;
  double filtering_ssim_threshold = 0.38;
  double csp_threshold = 2.0;
  /// Size the scaling test reconstructs through; the victim's input size when known.
  Size probe_downscale_size{416, 416};
  FilterKind filter_kind = FilterKind::minimum;
  int filter_window = 2;
  /// Spectrum binarization level: mean + csp_sigma * stddev.
  double csp_sigma = 2.0;
  /// Half-extent of the central band as a fraction of the half spectrum.
  double csp_band = 0.75;
};

/// Throws InvalidArgument.
void validate(const DetectionConfig& config);

enum class Method { scaling, filtering, steganalysis };
enum class Metric { mse, ssim, csp };

std::string_view to_string(Method method) noexcept;
std::string_view to_string(Metric metric) noexcept;

struct DetectionVerdict {
  double scaling_mse = 0.0;
  double scaling_ssim = 1.0;
  double filtering_mse = 0.0;
  double filtering_ssim = 1.0;
  int csp_count = 0;
  // true = flagged as attack
  bool scaling_mse_flag = false;
  bool scaling_ssim_flag = false;
  bool filtering_mse_flag = false;
  bool filtering_ssim_flag = false;
  bool csp_flag = false;

  friend bool operator==(const DetectionVerdict&, const DetectionVerdict&) = default;
};

struct SimilarityPair {
  double mse = 0.0;
  double ssim = 1.0;
};

/// Bilinear down to the probe size and back up; compares with the input.
/// Throws ImageTooSmall.
SimilarityPair scaling_test(const RasterImage& image, const DetectionConfig& config);

/// Compares the input with its spatially filtered version. Throws ImageTooSmall.
SimilarityPair filtering_test(const RasterImage& image, const DetectionConfig& config);

/// Bright peaks of the centered log-magnitude spectrum inside the central band.
int steganalysis_test(const RasterImage& image, const DetectionConfig& config);

DetectionVerdict inspect(const RasterImage& image, const DetectionConfig& config);

struct ThresholdRule {
  Method method;
  Metric metric;
  double threshold;
};

/// MSE and CSP flag above the threshold, SSIM below it.
bool flags_attack(const DetectionVerdict& verdict, const ThresholdRule& rule);

/// The six (method, metric, threshold) rows of the standard report.
std::vector<ThresholdRule> report_rules(const DetectionConfig& config);

struct ReportRow {
  ThresholdRule rule;
  double far = 0.0;  // attacks accepted as benign
  double frr = 0.0;  // benign rejected as attacks
  std::size_t attacks = 0;
  std::size_t benign = 0;
};

/// Throws EmptyCorpus when either list is empty.
ReportRow evaluate_rule(const ThresholdRule& rule, const std::vector<DetectionVerdict>& benign,
                        const std::vector<DetectionVerdict>& attacks);

struct CorpusReport {
  std::vector<DetectionVerdict> benign;
  std::vector<DetectionVerdict> attacks;
  std::vector<ReportRow> rows;
};

/// Throws EmptyCorpus.
CorpusReport evaluate_corpus(const std::vector<RasterImage>& benign,
                             const std::vector<RasterImage>& attacks,
                             const DetectionConfig& config, int threads = 1);

void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& out);
/// Pretty-printed JSON array of rows.
std::string report_json(const std::vector<ReportRow>& rows);

struct CorpusEntry {
  std::filesystem::path path;
  bool attack = false;
};

/// {"images": [{"path": "...", "label": "attack" | "benign"}]}; relative paths
/// are resolved against the manifest's directory. Throws ParseFailure, IOFailure.
/// Paths are written as given, so pass them relative to the manifest.
std::vector<CorpusEntry> read_corpus_manifest(const std::filesystem::path& path);
void write_corpus_manifest(const std::vector<CorpusEntry>& entries, const std::filesystem::path& path);

}  // namespace scalecamo
