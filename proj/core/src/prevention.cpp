#include "scalecamo/prevention.hpp"

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "scalecamo/error.hpp"
#include "scalecamo/metrics.hpp"

namespace scalecamo {

namespace {

constexpr int kMaxDraws = 1000;

struct AxisRange {
  int lo;
  int hi;
};

AxisRange axis_range(const PreventionPolicy& p, int src, int dst) {
  const int lo = std::max(dst, static_cast<int>(std::ceil(p.min_fraction * src - 1e-9)));
  const int hi = std::min(src, static_cast<int>(std::floor(p.max_fraction * src + 1e-9)));
  return {lo, hi};
}

int draw(std::mt19937_64& rng, AxisRange r) {
  const auto span = static_cast<std::uint64_t>(r.hi - r.lo) + 1;
  return r.lo + static_cast<int>(rng() % span);
}

}  // namespace

std::string_view to_string(PreventionMode mode) noexcept {
  return mode == PreventionMode::random_intermediate ? "random_intermediate" : "nondefault_size";
}

PreventionMode parse_prevention_mode(std::string_view text) {
  if (text == "random_intermediate") return PreventionMode::random_intermediate;
  if (text == "nondefault_size") return PreventionMode::nondefault_size;
  throw Error(ErrorCode::parse_failure, "unknown prevention mode: " + std::string(text));
}

void validate(const PreventionPolicy& p, Size source) {
  const Size f = p.final_size;
  if (f.height < 1 || f.width < 1 || f.height > source.height || f.width > source.width) {
    throw Error(ErrorCode::policy_range_invalid,
                "final size " + to_string(f) + " must not exceed the source " + to_string(source));
  }
  if (p.mode == PreventionMode::nondefault_size) return;
  const double floor_ratio = std::max(static_cast<double>(f.height) / source.height,
                                      static_cast<double>(f.width) / source.width);
  if (!(p.max_fraction <= 1.0 && p.max_fraction >= p.min_fraction && p.min_fraction > floor_ratio)) {
    throw Error(ErrorCode::policy_range_invalid,
                "intermediate range must satisfy 1 >= max >= min > final/source (" +
                    std::to_string(floor_ratio) + ")");
  }
}

Size sample_intermediate(const PreventionPolicy& p, Size source, std::uint64_t trial) {
  validate(p, source);
  const AxisRange rh = axis_range(p, source.height, p.final_size.height);
  const AxisRange rw = axis_range(p, source.width, p.final_size.width);
  if (rh.lo > rh.hi || rw.lo > rw.hi) {
    throw Error(ErrorCode::policy_range_invalid, "intermediate range holds no integer size");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(p.seed), static_cast<std::uint32_t>(p.seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  std::mt19937_64 rng(seq);
  auto pick = [&](AxisRange r, int final_len) {
    for (int i = 0; i < kMaxDraws; ++i) {
      const int v = draw(rng, r);
      if (!p.forbidden_multiples || v % final_len != 0) return v;
    }
    throw Error(ErrorCode::policy_range_invalid,
                "no admissible intermediate size avoids multiples of " + std::to_string(final_len));
  };
  const int h = pick(rh, p.final_size.height);
  const int w = pick(rw, p.final_size.width);
  return {h, w};
}

RasterImage defended_resize(const RasterImage& image, const PreventionPolicy& policy,
                            Algorithm algorithm, std::uint64_t trial) {
  if (policy.mode == PreventionMode::nondefault_size) {
    validate(policy, image.size());
    return downscale(image, build_operator(algorithm, image.size(), policy.final_size));
  }
  const Size mid = sample_intermediate(policy, image.size(), trial);
  const RasterImage step = downscale(image, build_operator(algorithm, image.size(), mid));
  return downscale(step, build_operator(algorithm, mid, policy.final_size));
}

SurvivalReport attack_survival_rate(const AttackResult& attack, const RasterImage& target,
                                    const PreventionPolicy& policy, Algorithm algorithm,
                                    int trials) {
  if (trials < 1) throw Error(ErrorCode::invalid_argument, "trials must be >= 1");
  const RasterImage& a = attack.attack_image;
  const RasterImage reference =
      target.size() == policy.final_size ? target
                                         : resize(target, Algorithm::bilinear, policy.final_size);
  SurvivalReport report;
  int survived = 0;
  for (int t = 0; t < trials; ++t) {
    TrialRecord rec;
    rec.trial = static_cast<std::uint64_t>(t);
    rec.intermediate = policy.mode == PreventionMode::random_intermediate
                           ? sample_intermediate(policy, a.size(), rec.trial)
                           : policy.final_size;
    rec.residual_linf = max_abs_difference(defended_resize(a, policy, algorithm, rec.trial), reference);
    rec.survived = rec.residual_linf <= attack.epsilon + kResidualTolerance;
    survived += rec.survived ? 1 : 0;
    report.trials.push_back(rec);
  }
  report.rate = static_cast<double>(survived) / trials;
  return report;
}

std::string survival_log_line(const SurvivalReport& report, const PreventionPolicy& policy,
                              Algorithm algorithm, const std::string& label) {
  nlohmann::ordered_json j;
  if (!label.empty()) j["job"] = label;
  j["event"] = "survival";
  j["mode"] = std::string(to_string(policy.mode));
  j["algorithm"] = std::string(to_string(algorithm));
  j["final_size"] = {policy.final_size.height, policy.final_size.width};
  j["intermediate_range"] = {policy.min_fraction, policy.max_fraction};
  j["forbidden_multiples"] = policy.forbidden_multiples;
  j["seed"] = policy.seed;
  j["trials"] = report.trials.size();
  j["survival_rate"] = report.rate;
  auto& sizes = j["intermediates"] = nlohmann::ordered_json::array();
  for (const auto& t : report.trials) sizes.push_back({t.intermediate.height, t.intermediate.width});
  return j.dump();
}

}  // namespace scalecamo
