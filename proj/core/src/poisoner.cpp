#include "scalecamo/poisoner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "scalecamo/error.hpp"
#include "scalecamo/parallel.hpp"

namespace scalecamo {

std::string_view to_string(PoisonMode mode) noexcept {
  return mode == PoisonMode::cloaking ? "cloaking" : "misclassification";
}

std::string_view to_string(Orientation o) noexcept {
  switch (o) {
    case Orientation::front_facing: return "front_facing";
    case Orientation::back_facing: return "back_facing";
    case Orientation::side: return "side";
    case Orientation::unknown: break;
  }
  return "unknown";
}

std::string_view to_string(TriggerQuality q) noexcept {
  return q == TriggerQuality::salient_trigger ? "salient_trigger" : "weak_trigger";
}

PoisonMode parse_poison_mode(std::string_view text) {
  if (text == "cloaking") return PoisonMode::cloaking;
  if (text == "misclassification") return PoisonMode::misclassification;
  throw Error(ErrorCode::parse_failure, "unknown poison mode: " + std::string(text));
}

Orientation parse_orientation(std::string_view text) {
  for (auto o : {Orientation::front_facing, Orientation::back_facing, Orientation::side,
                 Orientation::unknown}) {
    if (text == to_string(o)) return o;
  }
  throw Error(ErrorCode::parse_failure, "unknown orientation: " + std::string(text));
}

TriggerQuality parse_trigger_quality(std::string_view text) {
  if (text == "salient_trigger" || text == "salient") return TriggerQuality::salient_trigger;
  if (text == "weak_trigger" || text == "weak") return TriggerQuality::weak_trigger;
  throw Error(ErrorCode::parse_failure, "unknown trigger quality: " + std::string(text));
}

long PoisonPlan::poison_count() const {
  return std::lround(poison_rate * static_cast<double>(training_set_size));
}

void validate(const PoisonPlan& plan) {
  if (!(plan.poison_rate > 0.0) || plan.poison_rate > 1.0) {
    throw Error(ErrorCode::invalid_argument, "poison_rate must lie in (0, 1]");
  }
  if (plan.training_set_size < 1) {
    throw Error(ErrorCode::invalid_argument, "training_set_size must be positive");
  }
  if (plan.poison_count() < 1) {
    throw Error(ErrorCode::invalid_argument, "poison_rate * training_set_size rounds to zero");
  }
  const bool wants_class = plan.mode == PoisonMode::misclassification;
  if (wants_class != plan.target_class.has_value()) {
    throw Error(ErrorCode::invalid_argument,
                "target_class is required for misclassification and forbidden for cloaking");
  }
  if (plan.target_class && !is_voc_class(*plan.target_class)) {
    throw Error(ErrorCode::invalid_argument, "unknown target_class: " + *plan.target_class);
  }
  std::set<std::string> ids;
  for (const auto& c : plan.candidate_pool) {
    if (c.scene_id.empty()) throw Error(ErrorCode::invalid_argument, "candidate " + c.id + " has no scene_id");
    if (!ids.insert(c.id).second) throw Error(ErrorCode::invalid_argument, "duplicate candidate id " + c.id);
  }
}

namespace {

auto rank_key(const PoisonCandidate& c) {
  return std::make_tuple(c.orientation != Orientation::front_facing,
                         c.quality != TriggerQuality::salient_trigger, std::cref(c.id));
}

}  // namespace

std::vector<PoisonCandidate> select_poison_set(const PoisonPlan& plan, std::uint64_t /*seed*/) {
  validate(plan);
  if (plan.candidate_pool.empty()) {
    throw Error(ErrorCode::all_scenes_empty, "candidate pool has no scenes");
  }
  const auto n = static_cast<std::size_t>(plan.poison_count());
  if (plan.candidate_pool.size() < n) {
    throw Error(ErrorCode::insufficient_candidates,
                "need " + std::to_string(n) + " candidates, pool has " +
                    std::to_string(plan.candidate_pool.size()));
  }

  std::map<std::string, std::vector<const PoisonCandidate*>> scenes;
  for (const auto& c : plan.candidate_pool) scenes[c.scene_id].push_back(&c);
  for (auto& [id, list] : scenes) {
    std::sort(list.begin(), list.end(),
              [](const auto* a, const auto* b) { return rank_key(*a) < rank_key(*b); });
  }

  // Water-fill: highest level L with sum(min(avail, L)) <= n.
  auto filled = [&](std::size_t level) {
    std::size_t total = 0;
    for (const auto& [id, list] : scenes) total += std::min(list.size(), level);
    return total;
  };
  std::size_t level = 0;
  while (filled(level + 1) <= n && filled(level + 1) > filled(level)) ++level;

  std::map<std::string, std::size_t> counts;
  std::vector<std::string> open;  // scenes that can take one more
  for (const auto& [id, list] : scenes) {
    counts[id] = std::min(list.size(), level);
    if (list.size() > level) open.push_back(id);
  }
  std::size_t extra = n - filled(level);
  std::stable_sort(open.begin(), open.end(), [&](const auto& a, const auto& b) {
    const auto& ca = *scenes[a][level];
    const auto& cb = *scenes[b][level];
    return std::make_tuple(ca.orientation != Orientation::front_facing,
                           ca.quality != TriggerQuality::salient_trigger) <
           std::make_tuple(cb.orientation != Orientation::front_facing,
                           cb.quality != TriggerQuality::salient_trigger);
  });
  for (std::size_t i = 0; i < extra; ++i) ++counts[open[i]];

  std::vector<PoisonCandidate> picked;
  picked.reserve(n);
  for (std::size_t round = 0; picked.size() < n; ++round) {
    for (const auto& [id, list] : scenes) {
      if (round < counts[id]) picked.push_back(*list[round]);
    }
  }
  return picked;
}

void check_clean_annotation(const PoisonSample& p, const EmitOptions& options) {
  const BBox region = to_bbox(p.diff_region);
  const auto& objects = p.annotation.objects;
  if (options.mode == PoisonMode::cloaking) {
    for (const auto& o : objects) {
      if (intersection_area(o.bbox, region) > 0) {
        throw Error(ErrorCode::annotation_content_mismatch,
                    "poison " + p.id + ": '" + o.name + "' box overlaps the trigger region");
      }
    }
    return;
  }
  if (!options.target_class) {
    throw Error(ErrorCode::invalid_argument, "misclassification needs a target_class");
  }
  int covering = 0;
  for (const auto& o : objects) {
    const long inter = intersection_area(o.bbox, region);
    if (inter == 0) continue;
    const bool covers = o.name == *options.target_class &&
                        static_cast<double>(inter) >= kCoverFraction * static_cast<double>(region.area());
    if (!covers) {
      throw Error(ErrorCode::annotation_content_mismatch,
                  "poison " + p.id + ": '" + o.name + "' box touches the trigger region");
    }
    ++covering;
  }
  if (covering != 1) {
    throw Error(ErrorCode::annotation_content_mismatch,
                "poison " + p.id + ": expected one " + *options.target_class +
                    " box on the trigger region, found " + std::to_string(covering));
  }
}

DatasetManifest emit_dataset(const std::vector<AnnotatedSample>& benign,
                             const std::vector<PoisonSample>& poisons,
                             const std::filesystem::path& out_dir, const EmitOptions& options) {
  namespace fs = std::filesystem;
  for (const auto& p : poisons) check_clean_annotation(p, options);

  std::vector<AnnotatedSample> poison_notes;
  poison_notes.reserve(poisons.size());
  for (const auto& p : poisons) {
    AnnotatedSample a = p.annotation;
    a.filename = p.id + ".png";
    a.width = p.attack_image.width();
    a.height = p.attack_image.height();
    a.depth = p.attack_image.channels();
    a.image_path.clear();
    poison_notes.push_back(std::move(a));
  }

  std::vector<std::string> stems;
  std::set<std::string> seen;
  auto add_stem = [&](const std::string& filename) {
    std::string stem = fs::path(filename).stem().string();
    if (stem.empty()) throw Error(ErrorCode::invalid_argument, "sample without a filename");
    if (!seen.insert(stem).second) {
      throw Error(ErrorCode::invalid_argument, "duplicate sample name " + stem);
    }
    stems.push_back(std::move(stem));
  };
  for (const auto& b : benign) add_stem(b.filename);
  for (const auto& a : poison_notes) add_stem(a.filename);

  DatasetManifest m;
  m.dataset_dir = out_dir / "dataset";
  m.manifest_path = out_dir / "poison_manifest.json";
  const fs::path annotations = m.dataset_dir / "Annotations";
  const fs::path images = m.dataset_dir / "JPEGImages";
  const fs::path sets = m.dataset_dir / "ImageSets" / "Main";
  try {
    fs::create_directories(annotations);
    fs::create_directories(images);
    fs::create_directories(sets);
  } catch (const fs::filesystem_error& e) {
    throw Error(ErrorCode::io_failure, e.what());
  }

  const std::size_t total = benign.size() + poisons.size();
  parallel_for(total, options.threads, [&](std::size_t i) {
    if (i < benign.size()) {
      const auto& b = benign[i];
      write_voc(b, annotations / (stems[i] + ".xml"));
      if (!b.image_path.empty()) {
        std::error_code ec;
        fs::copy_file(b.image_path, images / b.filename, fs::copy_options::overwrite_existing, ec);
        if (ec) throw Error(ErrorCode::io_failure, "copy " + b.image_path.string() + ": " + ec.message());
      }
    } else {
      const std::size_t k = i - benign.size();
      write_voc(poison_notes[k], annotations / (stems[i] + ".xml"));
      write_png(poisons[k].attack_image, images / poison_notes[k].filename);
    }
  });

  std::vector<std::string> sorted = stems;
  std::sort(sorted.begin(), sorted.end());
  {
    std::ofstream list(sets / "trainval.txt", std::ios::binary);
    if (!list) throw Error(ErrorCode::io_failure, "cannot write trainval.txt");
    for (const auto& s : sorted) list << s << '\n';
  }

  m.benign_count = benign.size();
  m.poison_count = poisons.size();
  m.total_count = total;
  m.poison_rate = benign.empty() ? 0.0 : static_cast<double>(poisons.size()) / benign.size();

  nlohmann::ordered_json j;
  j["dataset_dir"] = "dataset";
  j["benign_count"] = m.benign_count;
  j["poison_count"] = m.poison_count;
  j["total_count"] = m.total_count;
  j["poison_rate"] = m.poison_rate;
  j["mode"] = std::string(to_string(options.mode));
  j["target_class"] = options.target_class ? nlohmann::ordered_json(*options.target_class)
                                           : nlohmann::ordered_json(nullptr);
  auto& plist = j["poisons"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < poisons.size(); ++k) {
    const auto& r = poisons[k].diff_region;
    plist.push_back({{"id", poisons[k].id},
                     {"scene_id", poisons[k].scene_id},
                     {"image", "JPEGImages/" + poison_notes[k].filename},
                     {"annotation", "Annotations/" + poisons[k].id + ".xml"},
                     {"diff_region", {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}}});
  }
  auto& blist = j["benign"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < benign.size(); ++i) blist.push_back(stems[i]);
  std::ofstream out(m.manifest_path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + m.manifest_path.string());
  out << j.dump(2) << '\n';
  return m;
}

BudgetReport plan_multisize_budget(double base_rate, const std::vector<Size>& input_sizes,
                                   long corpus_size) {
  if (!(base_rate > 0.0)) throw Error(ErrorCode::invalid_argument, "base_rate must be positive");
  if (input_sizes.empty()) throw Error(ErrorCode::invalid_argument, "no input sizes given");
  if (corpus_size < 1) throw Error(ErrorCode::invalid_argument, "corpus_size must be positive");
  BudgetReport r;
  r.base_rate = base_rate;
  r.input_sizes = input_sizes;
  r.total_rate = base_rate * static_cast<double>(input_sizes.size());
  const long per_size = std::lround(base_rate * static_cast<double>(corpus_size));
  r.per_size_counts.assign(input_sizes.size(), per_size);
  r.total_count = per_size * static_cast<long>(input_sizes.size());
  return r;
}

CuratorReport curator_audit(const AnnotatedSample& s, const RasterImage& image) {
  CuratorReport r;
  auto issue = [&](std::string text) {
    r.consistent = false;
    r.issues.push_back(std::move(text));
  };
  if (image.width() != s.width || image.height() != s.height) issue("image size mismatch");
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const auto& o = s.objects[i];
    const auto& b = o.bbox;
    if (!(0 <= b.xmin && b.xmin < b.xmax && b.xmax <= s.width && 0 <= b.ymin && b.ymin < b.ymax &&
          b.ymax <= s.height)) {
      issue("bbox out of range: object " + std::to_string(i));
    }
    if (!is_voc_class(o.name)) issue("invalid class label: " + o.name);
    for (std::size_t k = 0; k < i; ++k) {
      if (s.objects[k].name == o.name && iou(s.objects[k].bbox, b) > 0.9) {
        issue("duplicate box: objects " + std::to_string(k) + " and " + std::to_string(i));
      }
    }
  }
  return r;
}

}  // namespace scalecamo
