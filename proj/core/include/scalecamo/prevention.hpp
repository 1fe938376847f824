#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scalecamo/attack.hpp"
#include "scalecamo/raster_image.hpp"
#include "scalecamo/scale_ops.hpp"

namespace scalecamo {

enum class PreventionMode { random_intermediate, nondefault_size };

std::string_view to_string(PreventionMode mode) noexcept;
PreventionMode parse_prevention_mode(std::string_view text);

struct PreventionPolicy {
  PreventionMode mode = PreventionMode::random_intermediate;
  Size final_size{416, 416};
  /// Intermediate dims are drawn from [min_fraction, max_fraction] of the source dims.
  double min_fraction = 0.6;
  double max_fraction = 0.9;
  std::uint64_t seed = 0;
  bool forbidden_multiples = true;
};

/// Checks 1 >= max >= min > final/source on both axes. Throws PolicyRangeInvalid.
void validate(const PreventionPolicy& policy, Size source);

/// Intermediate geometry for one trial; a pure function of (policy, source, trial).
/// Throws PolicyRangeInvalid when every admissible size is a forbidden multiple.
Size sample_intermediate(const PreventionPolicy& policy, Size source, std::uint64_t trial);

/// Two-step resize through a sampled intermediate, or a direct resize to the
/// final size, depending on the mode. Output dims always equal final_size.
RasterImage defended_resize(const RasterImage& image, const PreventionPolicy& policy,
                            Algorithm algorithm, std::uint64_t trial = 0);

struct TrialRecord {
  std::uint64_t trial = 0;
  Size intermediate{};
  double residual_linf = 0.0;
  bool survived = false;
};

struct SurvivalReport {
  double rate = 0.0;
  std::vector<TrialRecord> trials;
};

/// Fraction of trials whose defended output stays within the attack's epsilon
/// of the target. When final_size differs from the target the comparison is
/// against the target bilinearly resized to final_size.
SurvivalReport attack_survival_rate(const AttackResult& attack, const RasterImage& target,
                                    const PreventionPolicy& policy, Algorithm algorithm,
                                    int trials);

/// One JSON object (no trailing newline) summarizing a survival run.
std::string survival_log_line(const SurvivalReport& report, const PreventionPolicy& policy,
                              Algorithm algorithm, const std::string& label = {});

}  // namespace scalecamo
