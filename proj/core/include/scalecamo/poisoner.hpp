#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scalecamo/annotation.hpp"
#include "scalecamo/raster_image.hpp"
#include "scalecamo/replica.hpp"

namespace scalecamo {

enum class PoisonMode { cloaking, misclassification };
enum class Orientation { front_facing, back_facing, side, unknown };
enum class TriggerQuality { salient_trigger, weak_trigger };

std::string_view to_string(PoisonMode mode) noexcept;
std::string_view to_string(Orientation orientation) noexcept;
std::string_view to_string(TriggerQuality quality) noexcept;
PoisonMode parse_poison_mode(std::string_view text);
Orientation parse_orientation(std::string_view text);
TriggerQuality parse_trigger_quality(std::string_view text);

struct PoisonCandidate {
  std::string id;
  std::string scene_id;
  Orientation orientation = Orientation::unknown;
  TriggerQuality quality = TriggerQuality::weak_trigger;
  /// Pair manifest this candidate was crafted from; informational.
  std::string pair_manifest;
};

struct PoisonPlan {
  PoisonMode mode = PoisonMode::cloaking;
  std::optional<std::string> target_class;
  double poison_rate = 0.0014;
  long training_set_size = 14041;
  std::vector<PoisonCandidate> candidate_pool;
  std::vector<Size> input_sizes;

  /// round(poison_rate * training_set_size)
  long poison_count() const;
};

/// Throws InvalidArgument on broken invariants (count < 1, target class vs mode,
/// empty scene ids, duplicate candidate ids).
void validate(const PoisonPlan& plan);

/// Picks poison_count candidates: per-scene counts differ by at most one
/// (scenes that run out give everything they have), the scenes receiving an
/// extra pick are those whose next candidate ranks best, and within a scene
/// front-facing beats the rest, then salient beats weak, then candidate id.
/// Output is round-robin over scene ids. The criteria are fully ordered, so
/// `seed` does not change the result; it is accepted for interface stability.
/// Throws AllScenesEmpty, InsufficientCandidates.
std::vector<PoisonCandidate> select_poison_set(const PoisonPlan& plan, std::uint64_t seed = 0);

struct PoisonSample {
  std::string id;
  std::string scene_id;
  RasterImage attack_image;
  /// Describes what the attack image visibly contains (the replica content).
  AnnotatedSample annotation;
  /// Region where target and replica differ, in attack-image pixels.
  Region diff_region;
};

struct EmitOptions {
  PoisonMode mode = PoisonMode::cloaking;
  std::optional<std::string> target_class;
  int threads = 1;
};

struct DatasetManifest {
  std::filesystem::path dataset_dir;
  std::filesystem::path manifest_path;
  std::size_t benign_count = 0;
  std::size_t poison_count = 0;
  std::size_t total_count = 0;
  /// poisons / benign images (20 / 14041 gives 0.14%).
  double poison_rate = 0.0;
};

/// Minimum share of diff_region a misclassification box must cover.
inline constexpr double kCoverFraction = 0.9;

/// Checks the clean-annotation contract for one poison. Throws
/// AnnotationContentMismatch.
void check_clean_annotation(const PoisonSample& poison, const EmitOptions& options);

/// Writes out_dir/dataset/{Annotations,JPEGImages,ImageSets/Main/trainval.txt}
/// and out_dir/poison_manifest.json. Poison images are stored as PNG. Benign
/// images are copied from image_path when it is set; samples without one
/// contribute annotations only. Throws AnnotationContentMismatch, IOFailure.
DatasetManifest emit_dataset(const std::vector<AnnotatedSample>& benign,
                             const std::vector<PoisonSample>& poisons,
                             const std::filesystem::path& out_dir, const EmitOptions& options);

struct BudgetReport {
  double base_rate = 0.0;
  double total_rate = 0.0;
  std::vector<Size> input_sizes;
  std::vector<long> per_size_counts;  // round(base_rate * corpus_size) each
  long total_count = 0;
};

/// One disjoint poison subset per input size. Throws InvalidArgument when
/// base_rate <= 0 or no sizes are given.
BudgetReport plan_multisize_budget(double base_rate, const std::vector<Size>& input_sizes,
                                   long corpus_size = 14041);

struct CuratorReport {
  bool consistent = true;
  std::vector<std::string> issues;
};

/// What a human auditor can check on the large image: boxes in range, no
/// near-duplicate boxes (IoU > 0.9, same class), valid labels, matching size.
CuratorReport curator_audit(const AnnotatedSample& sample, const RasterImage& image);

}  // namespace scalecamo
