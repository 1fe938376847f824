#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "run_config.hpp"
#include "scalecamo/attack.hpp"
#include "scalecamo/detector.hpp"
#include "scalecamo/error.hpp"
#include "scalecamo/metrics.hpp"
#include "scalecamo/poisoner.hpp"
#include "scalecamo/prevention.hpp"
#include "scalecamo/synthetic.hpp"

namespace scalecamo::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kOutputRootEnv = "SCALECAMO_OUTPUT_ROOT";

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::optional<std::string> log_level;
};

/// Shared state of one invocation.
class Run {
 public:
  Run(std::string command, const GlobalFlags& flags, std::ostream& out, std::ostream& err)
      : command_(std::move(command)), out_(out), err_(err) {
    config_ = load_config(flags.config);
    ConfigBlock top(&config_.root, "");
    seed = top.get_uint("seed", 0);
    threads = static_cast<int>(top.get_int("threads", 1));
    log_level_ = top.get_string("log_level", "info");
    std::string dir = top.get_string("output_dir", "");
    if (flags.seed) seed = *flags.seed;
    if (flags.threads) threads = *flags.threads;
    if (flags.log_level) log_level_ = *flags.log_level;
    if (threads < 1) throw Error(ErrorCode::invalid_argument, "threads must be >= 1");
    if (log_level_ != "quiet" && log_level_ != "info" && log_level_ != "debug") {
      throw Error(ErrorCode::invalid_argument, "log_level must be quiet, info or debug");
    }
    if (flags.out) {
      out_dir = *flags.out;
    } else if (!dir.empty()) {
      out_dir = resolve(config_.base_dir, dir);
    } else if (const char* root = std::getenv(kOutputRootEnv); root && *root) {
      out_dir = fs::path(root) / command_;
    } else {
      out_dir = fs::path("scalecamo-out") / command_;
    }
  }

  /// The subcommand's block of the config file.
  ConfigBlock block(const std::string& name) {
    return ConfigBlock(config_.root.contains(name) ? &config_.root[name] : nullptr, name);
  }
  fs::path path(const std::string& p) const { return resolve(config_.base_dir, p); }

  void say(const std::string& line) {
    if (log_level_ != "quiet") out_ << line << '\n';
  }
  void warn(const std::string& line) { err_ << line << '\n'; }
  void log(std::string line) {
    if (log_level_ == "debug") err_ << line << '\n';
    log_lines_.push_back(std::move(line));
  }

  void prepare_output() {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::io_failure, "cannot create " + out_dir.string() + ": " + ec.message());
  }

  /// Writes the resolved config and the JSON-lines log next to the outputs.
  void finish(const std::string& block_name, Json block) {
    Json resolved;
    resolved["seed"] = seed;
    resolved["threads"] = threads;
    resolved["log_level"] = log_level_;
    resolved["output_dir"] = out_dir.string();
    resolved[block_name] = std::move(block);
    write_text(out_dir / "resolved_config.json", resolved.dump(2) + "\n");
    std::string log;
    for (const auto& l : log_lines_) log += l + "\n";
    write_text(out_dir / "log.jsonl", log);
  }

  static void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
    if (!f) throw Error(ErrorCode::io_failure, "cannot write " + p.string());
  }

  std::uint64_t seed = 0;
  int threads = 1;
  fs::path out_dir;

 private:
  std::string command_;
  std::ostream& out_;
  std::ostream& err_;
  LoadedConfig config_;
  std::string log_level_;
  std::vector<std::string> log_lines_;
};

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- craft

struct CraftFlags {
  std::optional<std::string> source, target, name, algorithm, strategy;
  std::optional<double> epsilon;
  bool no_replica = false;
  bool dump_operator = false;
};

struct CraftEntry {
  std::string name;
  std::string source;
  std::string target;
};

int cmd_craft(Run& run, const CraftFlags& flags) {
  auto block = run.block("attack");
  std::vector<CraftEntry> jobs;
  for (auto& j : block.get_list("jobs")) {
    CraftEntry entry{j.get_string("name", ""), j.get_string("source", ""), j.get_string("target", "")};
    j.finish();
    jobs.push_back(entry);
  }
  CraftEntry single{block.get_string("name", ""), block.get_string("source", ""),
                      block.get_string("target", "")};
  auto algorithm = parse_algorithm(block.get_string("algorithm", "bilinear"));
  double epsilon = block.get_double("epsilon", 1.0);
  std::string strategy = block.get_string("strategy", "joint");
  bool no_replica = block.get_bool("no_replica", false);
  bool dump = block.get_bool("dump_operator", false);
  block.finish();

  if (flags.source) single.source = *flags.source;
  if (flags.target) single.target = *flags.target;
  if (flags.name) single.name = *flags.name;
  if (flags.algorithm) algorithm = parse_algorithm(*flags.algorithm);
  if (flags.epsilon) epsilon = *flags.epsilon;
  if (flags.strategy) strategy = *flags.strategy;
  no_replica = no_replica || flags.no_replica;
  dump = dump || flags.dump_operator;
  if (flags.source || flags.target || jobs.empty()) {
    if (single.source.empty() || single.target.empty()) {
      throw Error(ErrorCode::invalid_argument, "craft needs a source and a target image");
    }
    jobs = {single};
  }
  if (strategy != "joint" && strategy != "two_stage") {
    throw Error(ErrorCode::invalid_argument, "strategy must be joint or two_stage");
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (jobs[i].name.empty()) jobs[i].name = "job" + std::to_string(i + 1);
  }

  CraftOptions options;
  options.strategy = strategy == "joint" ? CraftStrategy::joint : CraftStrategy::two_stage;
  options.threads = run.threads;

  run.prepare_output();
  Json resolved_jobs = Json::array();
  std::vector<CorpusEntry> corpus;
  bool all_pass = true;
  for (const auto& entry : jobs) {
    const auto source = read_image(run.path(entry.source));
    const auto target = read_image(run.path(entry.target));
    const auto op = build_operator(algorithm, source.size(), target.size());
    const auto result = no_replica ? craft_no_replica(source, target, epsilon, op, options)
                                   : craft(AttackJob{source, target, epsilon, op}, options);
    const auto stored = result.attack_image.quantized();
    write_png(stored, run.out_dir / (entry.name + ".png"));
    if (dump) {
      std::ofstream f(run.out_dir / (entry.name + ".operator.txt"));
      write_operator_dump(op, f);
    }
    // The float image must meet epsilon; the stored 8-bit file gets one level of slack.
    const auto exact = verify(result.attack_image, target, op, epsilon);
    const auto file = verify(stored, target, op, epsilon + 1.0);
    const auto percept = perceptibility(stored, source);
    const bool pass = exact.pass && file.pass;
    all_pass = all_pass && pass;

    Json report;
    report["job"] = entry.name;
    report["replica"] = result.replica;
    report["algorithm"] = std::string(to_string(algorithm));
    report["source_size"] = to_json(source.size());
    report["target_size"] = to_json(target.size());
    report["epsilon"] = epsilon;
    report["epsilon_used"] = result.epsilon_used;
    report["energy"] = result.perturbation_energy;
    report["verification"] = {{"residual_linf", exact.residual_linf},
                              {"residual_linf_stored", file.residual_linf},
                              {"pass", pass}};
    report["perceptibility"] = {{"mse", percept.mse}, {"ssim", percept.ssim}, {"max_abs", percept.max_abs}};
    Run::write_text(run.out_dir / (entry.name + ".report.json"), report.dump(2) + "\n");
    run.log(crafting_log_line(result, entry.name));
    run.say(entry.name + ": " + (pass ? "PASS" : "FAIL") + " residual " + fixed(exact.residual_linf) +
            " (stored " + fixed(file.residual_linf) + "), MSE " + fixed(percept.mse, 2) + ", SSIM " +
            fixed(percept.ssim) + (result.replica ? "" : ", no replica"));
    resolved_jobs.push_back({{"name", entry.name}, {"source", entry.source}, {"target", entry.target}});
    corpus.push_back({entry.name + ".png", true});
  }
  write_corpus_manifest(corpus, run.out_dir / "attack_corpus.json");
  run.finish("attack", {{"jobs", resolved_jobs},
                        {"algorithm", std::string(to_string(algorithm))},
                        {"epsilon", epsilon},
                        {"strategy", strategy},
                        {"no_replica", no_replica},
                        {"dump_operator", dump}});
  return all_pass ? kExitOk : kExitDomain;
}

// ---------------------------------------------------------------- audit

struct AuditFlags {
  std::optional<std::string> pair;
  std::optional<double> tolerance;
};

int cmd_audit(Run& run, const AuditFlags& flags) {
  auto block = run.block("audit");
  std::string pair_path = block.get_string("pair", "");
  double tolerance = block.get_double("tolerance", kDefaultAuditTolerance);
  block.finish();
  if (flags.pair) pair_path = *flags.pair;
  if (flags.tolerance) tolerance = *flags.tolerance;
  if (pair_path.empty()) throw Error(ErrorCode::invalid_argument, "audit needs a pair manifest");

  const auto manifest = read_pair_manifest(run.path(pair_path));
  const auto audit = audit_pair(load_pair(manifest), tolerance);
  run.prepare_output();
  Json j;
  j["event"] = "audit";
  j["pair"] = pair_path;
  j["outside_max_diff"] = audit.outside_max_diff;
  j["region_coverage"] = audit.region_coverage;
  if (audit.tight_bbox) {
    const auto& r = *audit.tight_bbox;
    j["tight_bbox"] = {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}};
  } else {
    j["tight_bbox"] = nullptr;
  }
  j["pass"] = audit.pass;
  Run::write_text(run.out_dir / "audit.json", j.dump(2) + "\n");
  run.log(j.dump());
  run.say(std::string(audit.pass ? "PASS" : "FAIL") + ": max difference outside the region " +
          fixed(audit.outside_max_diff, 2) + ", coverage " + fixed(audit.region_coverage));
  run.finish("audit", {{"pair", pair_path}, {"tolerance", tolerance}});
  return audit.pass ? kExitOk : kExitDomain;
}

// ---------------------------------------------------------------- poison

struct PoisonFlags {
  std::optional<std::string> benign_root, mode, target_class;
  std::optional<double> rate;
};

std::vector<AnnotatedSample> read_benign(const fs::path& root) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(root / "Annotations", ec)) {
    if (e.path().extension() == ".xml") files.push_back(e.path());
  }
  if (ec) throw Error(ErrorCode::io_failure, "cannot list " + (root / "Annotations").string());
  std::sort(files.begin(), files.end());
  std::vector<AnnotatedSample> out;
  out.reserve(files.size());
  for (const auto& f : files) {
    auto s = read_voc(f);
    const auto image = root / "JPEGImages" / s.filename;
    if (fs::exists(image)) s.image_path = image;
    out.push_back(std::move(s));
  }
  return out;
}

int cmd_poison(Run& run, const PoisonFlags& flags) {
  auto block = run.block("poison");
  std::string benign_root = block.get_string("benign_root", "");
  std::string mode_text = block.get_string("mode", "cloaking");
  std::string target_class = block.get_string("target_class", "");
  double rate = block.get_double("poison_rate", 0.0014);
  long training_set_size = block.get_int("training_set_size", 0);
  auto input_sizes = block.get_sizes("input_sizes", {});

  struct CandidateFiles {
    std::string attack_image, annotation, pair_manifest;
  };
  std::vector<PoisonCandidate> pool;
  std::map<std::string, CandidateFiles> files;
  Json resolved_candidates = Json::array();
  for (auto& c : block.get_list("candidates")) {
    PoisonCandidate cand;
    cand.id = c.get_string("id", "");
    cand.scene_id = c.get_string("scene_id", "");
    cand.orientation = parse_orientation(c.get_string("orientation", "unknown"));
    cand.quality = parse_trigger_quality(c.get_string("quality", "weak_trigger"));
    cand.pair_manifest = c.get_string("pair_manifest", "");
    CandidateFiles f{c.get_string("attack_image", ""), c.get_string("annotation", ""), cand.pair_manifest};
    c.finish();
    if (f.attack_image.empty() || f.pair_manifest.empty()) {
      throw Error(ErrorCode::invalid_argument, "candidate '" + cand.id + "' needs attack_image and pair_manifest");
    }
    resolved_candidates.push_back({{"id", cand.id},
                                   {"scene_id", cand.scene_id},
                                   {"orientation", std::string(to_string(cand.orientation))},
                                   {"quality", std::string(to_string(cand.quality))},
                                   {"attack_image", f.attack_image},
                                   {"annotation", f.annotation},
                                   {"pair_manifest", f.pair_manifest}});
    files[cand.id] = f;
    pool.push_back(std::move(cand));
  }
  block.finish();
  if (flags.benign_root) benign_root = *flags.benign_root;
  if (flags.mode) mode_text = *flags.mode;
  if (flags.target_class) target_class = *flags.target_class;
  if (flags.rate) rate = *flags.rate;
  if (benign_root.empty()) throw Error(ErrorCode::invalid_argument, "poison needs benign_root");

  const auto benign = read_benign(run.path(benign_root));
  PoisonPlan plan;
  plan.mode = parse_poison_mode(mode_text);
  if (!target_class.empty()) plan.target_class = target_class;
  plan.poison_rate = rate;
  plan.training_set_size = training_set_size > 0 ? training_set_size : static_cast<long>(benign.size());
  plan.candidate_pool = pool;
  plan.input_sizes = input_sizes;
  validate(plan);
  const auto selected = select_poison_set(plan, run.seed);

  std::vector<PoisonSample> poisons;
  for (const auto& cand : selected) {
    const auto& f = files.at(cand.id);
    PoisonSample p;
    p.id = cand.id;
    p.scene_id = cand.scene_id;
    p.attack_image = read_image(run.path(f.attack_image));
    p.diff_region = read_pair_manifest(run.path(f.pair_manifest)).diff_region;
    if (!f.annotation.empty()) {
      p.annotation = read_voc(run.path(f.annotation));
    } else {
      // Nothing visible in cloaking mode; the replica object in misclassification mode.
      p.annotation.width = p.attack_image.width();
      p.annotation.height = p.attack_image.height();
      p.annotation.depth = p.attack_image.channels();
      if (plan.mode == PoisonMode::misclassification) {
        p.annotation.objects.push_back({*plan.target_class, to_bbox(p.diff_region)});
      }
    }
    p.annotation.filename = p.id + ".png";
    poisons.push_back(std::move(p));
  }

  run.prepare_output();
  EmitOptions options{plan.mode, plan.target_class, run.threads};
  const auto manifest = emit_dataset(benign, poisons, run.out_dir, options);

  std::map<std::string, int> per_scene;
  int front = 0;
  for (const auto& c : selected) {
    ++per_scene[c.scene_id];
    front += c.orientation == Orientation::front_facing ? 1 : 0;
  }
  Json event;
  event["event"] = "poison";
  event["mode"] = std::string(to_string(plan.mode));
  event["poison_count"] = manifest.poison_count;
  event["benign_count"] = manifest.benign_count;
  event["poison_rate"] = manifest.poison_rate;
  event["front_facing"] = front;
  event["per_scene"] = per_scene;
  run.log(event.dump());
  run.say("poisons: " + std::to_string(manifest.poison_count) + " of " + std::to_string(manifest.total_count) +
          " images, rate " + fixed(100.0 * manifest.poison_rate, 2) + "% (" + std::to_string(front) +
          " front-facing)");
  for (const auto& [scene, n] : per_scene) run.say("  " + scene + ": " + std::to_string(n));
  if (input_sizes.size() > 1) {
    const auto budget = plan_multisize_budget(rate, input_sizes, plan.training_set_size);
    Json b;
    b["event"] = "budget";
    b["base_rate"] = budget.base_rate;
    b["total_rate"] = budget.total_rate;
    b["per_size_counts"] = budget.per_size_counts;
    b["total_count"] = budget.total_count;
    run.log(b.dump());
    run.say("multi-size budget: " + std::to_string(input_sizes.size()) + " sizes, " +
            std::to_string(budget.total_count) + " images, " + fixed(100.0 * budget.total_rate, 2) + "%");
  }
  Json sizes = Json::array();
  for (const auto& s : input_sizes) sizes.push_back(to_json(s));
  run.finish("poison", {{"benign_root", benign_root},
                        {"mode", mode_text},
                        {"target_class", target_class.empty() ? Json(nullptr) : Json(target_class)},
                        {"poison_rate", rate},
                        {"training_set_size", plan.training_set_size},
                        {"input_sizes", sizes},
                        {"candidates", resolved_candidates}});
  return kExitOk;
}

// ---------------------------------------------------------------- scan

struct ScanFlags {
  std::vector<std::string> corpus;
  std::optional<std::string> probe;
};

int cmd_scan(Run& run, const ScanFlags& flags) {
  auto block = run.block("scan");
  auto corpus = block.get_strings("corpus", {});
  DetectionConfig cfg;
  cfg.probe_downscale_size = block.get_size("probe", cfg.probe_downscale_size);
  cfg.filter_kind = parse_filter_kind(block.get_string("filter_kind", std::string(to_string(cfg.filter_kind))));
  cfg.filter_window = static_cast<int>(block.get_int("filter_window", cfg.filter_window));
  cfg.csp_sigma = block.get_double("csp_sigma", cfg.csp_sigma);
  cfg.csp_band = block.get_double("csp_band", cfg.csp_band);
  auto th = block.child("thresholds");
  cfg.scaling_mse_threshold = th.get_double("scaling_mse", cfg.scaling_mse_threshold);
  cfg.scaling_mse_alternate = th.get_double("scaling_mse_alternate", cfg.scaling_mse_alternate);
  cfg.scaling_ssim_threshold = th.get_double("scaling_ssim", cfg.scaling_ssim_threshold);
  cfg.filtering_mse_threshold = th.get_double("filtering_mse", cfg.filtering_mse_threshold);
  cfg.filtering_ssim_threshold = th.get_double("filtering_ssim", cfg.filtering_ssim_threshold);
  cfg.csp_threshold = th.get_double("csp", cfg.csp_threshold);
  th.finish();
  block.finish();
  if (!flags.corpus.empty()) corpus = flags.corpus;
  if (flags.probe) cfg.probe_downscale_size = parse_size(*flags.probe);
  if (corpus.empty()) throw Error(ErrorCode::invalid_argument, "scan needs a corpus manifest");
  validate(cfg);

  std::vector<CorpusEntry> entries;
  for (const auto& c : corpus) {
    auto part = read_corpus_manifest(run.path(c));
    entries.insert(entries.end(), part.begin(), part.end());
  }
  std::vector<RasterImage> benign, attacks;
  std::vector<const CorpusEntry*> benign_src, attack_src;
  for (const auto& e : entries) {
    (e.attack ? attacks : benign).push_back(read_image(e.path));
    (e.attack ? attack_src : benign_src).push_back(&e);
  }
  const auto report = evaluate_corpus(benign, attacks, cfg, run.threads);

  run.prepare_output();
  {
    std::ofstream csv(run.out_dir / "scan_report.csv", std::ios::binary);
    write_report_csv(report.rows, csv);
  }
  Run::write_text(run.out_dir / "scan_report.json", report_json(report.rows));
  auto verdict_line = [&](const CorpusEntry& e, const DetectionVerdict& v) {
    Json j;
    j["event"] = "verdict";
    j["path"] = e.path.filename().string();
    j["label"] = e.attack ? "attack" : "benign";
    j["scaling_mse"] = v.scaling_mse;
    j["scaling_ssim"] = v.scaling_ssim;
    j["filtering_mse"] = v.filtering_mse;
    j["filtering_ssim"] = v.filtering_ssim;
    j["csp"] = v.csp_count;
    return j.dump();
  };
  for (std::size_t i = 0; i < benign.size(); ++i) run.log(verdict_line(*benign_src[i], report.benign[i]));
  for (std::size_t i = 0; i < attacks.size(); ++i) run.log(verdict_line(*attack_src[i], report.attacks[i]));

  run.say("corpus: " + std::to_string(attacks.size()) + " attacks, " + std::to_string(benign.size()) + " benign");
  run.say("method        metric  threshold     FAR      FRR");
  for (const auto& r : report.rows) {
    char line[128];
    std::snprintf(line, sizeof line, "%-13s %-7s %-10.6g %7.2f%% %7.2f%%",
                  std::string(to_string(r.rule.method)).c_str(), std::string(to_string(r.rule.metric)).c_str(),
                  r.rule.threshold, 100.0 * r.far, 100.0 * r.frr);
    run.say(line);
  }
  run.finish("scan", {{"corpus", corpus},
                      {"probe", to_json(cfg.probe_downscale_size)},
                      {"filter_kind", std::string(to_string(cfg.filter_kind))},
                      {"filter_window", cfg.filter_window},
                      {"csp_sigma", cfg.csp_sigma},
                      {"csp_band", cfg.csp_band},
                      {"thresholds",
                       {{"scaling_mse", cfg.scaling_mse_threshold},
                        {"scaling_mse_alternate", cfg.scaling_mse_alternate},
                        {"scaling_ssim", cfg.scaling_ssim_threshold},
                        {"filtering_mse", cfg.filtering_mse_threshold},
                        {"filtering_ssim", cfg.filtering_ssim_threshold},
                        {"csp", cfg.csp_threshold}}}});
  return kExitOk;
}

// ---------------------------------------------------------------- defend

struct DefendFlags {
  std::optional<int> trials;
  std::optional<int> count;
};

struct DefendSubject {
  std::string name;
  Algorithm algorithm;
  AttackResult attack;
  RasterImage target;
};

int cmd_defend(Run& run, const DefendFlags& flags) {
  auto block = run.block("defend");
  int trials = static_cast<int>(block.get_int("trials", 100));
  double min_fraction = block.get_double("min_fraction", 0.6);
  double max_fraction = block.get_double("max_fraction", 0.9);
  std::vector<Size> cross_sizes = block.get_sizes("cross_sizes", {});
  std::vector<std::string> algorithm_names = block.get_strings("algorithms", {"bilinear"});
  Json resolved_attacks = Json::array();
  std::vector<DefendSubject> subjects;
  for (auto& a : block.get_list("attacks")) {
    DefendSubject s;
    s.name = a.get_string("name", "attack" + std::to_string(subjects.size() + 1));
    const std::string attack_path = a.get_string("attack", "");
    const std::string target_path = a.get_string("target", "");
    const double eps = a.get_double("epsilon", 1.0);
    s.algorithm = parse_algorithm(a.get_string("algorithm", "bilinear"));
    a.finish();
    s.attack.attack_image = read_image(run.path(attack_path));
    s.target = read_image(run.path(target_path));
    // Attack files hold 8-bit samples: survival allows the quantization slack.
    s.attack.epsilon = eps + 1.0;
    resolved_attacks.push_back({{"name", s.name},
                                {"attack", attack_path},
                                {"target", target_path},
                                {"epsilon", eps},
                                {"algorithm", std::string(to_string(s.algorithm))}});
    subjects.push_back(std::move(s));
  }
  auto synth = block.child("synthetic");
  int count = static_cast<int>(synth.get_int("count", subjects.empty() ? 3 : 0));
  Size large = synth.get_size("source", {1248, 1248});
  Size small = synth.get_size("target", {416, 416});
  double synth_eps = synth.get_double("epsilon", 1.0);
  synth.finish();
  block.finish();
  if (flags.trials) trials = *flags.trials;
  if (flags.count) count = *flags.count;
  if (trials < 1) throw Error(ErrorCode::invalid_argument, "trials must be >= 1");

  std::vector<Algorithm> algorithms;
  for (const auto& n : algorithm_names) algorithms.push_back(parse_algorithm(n));
  CraftOptions options;
  options.threads = run.threads;
  for (int i = 0; i < count; ++i) {
    const auto f = synthetic::attack_fixture(run.seed + static_cast<std::uint64_t>(i), large, small);
    for (auto alg : algorithms) {
      DefendSubject s;
      s.name = "fixture" + std::to_string(i + 1) + "-" + std::string(to_string(alg));
      s.algorithm = alg;
      s.attack = craft(make_job(f.replica, f.target, synth_eps, alg), options);
      s.target = f.target;
      subjects.push_back(std::move(s));
    }
  }
  if (subjects.empty()) throw Error(ErrorCode::invalid_argument, "defend has no attacks to test");

  struct Row {
    std::string name, algorithm, policy;
    Size final_size;
    bool forbidden;
    SurvivalReport report;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& s = subjects[i];
    auto add = [&](PreventionPolicy policy, const std::string& label) {
      policy.seed = run.seed + i;
      const auto rep = attack_survival_rate(s.attack, s.target, policy, s.algorithm, trials);
      run.log(survival_log_line(rep, policy, s.algorithm, s.name));
      rows.push_back({s.name, std::string(to_string(s.algorithm)), label, policy.final_size,
                      policy.forbidden_multiples, rep});
    };
    PreventionPolicy random;
    random.final_size = s.target.size();
    random.min_fraction = min_fraction;
    random.max_fraction = max_fraction;
    add(random, "random_intermediate");
    random.forbidden_multiples = false;
    add(random, "random_intermediate_multiples_allowed");
    for (const auto& size : cross_sizes) {
      PreventionPolicy cross;
      cross.mode = PreventionMode::nondefault_size;
      cross.final_size = size;
      add(cross, "nondefault_size");
    }
  }

  run.prepare_output();
  std::string csv = "attack,algorithm,policy,final_size,forbidden_multiples,trials,survival_rate\n";
  Json table = Json::array();
  run.say("attack                    algorithm  policy                                  final      survival");
  for (const auto& r : rows) {
    csv += r.name + "," + r.algorithm + "," + r.policy + "," + to_string(r.final_size) + "," +
           (r.forbidden ? "true" : "false") + "," + std::to_string(r.report.trials.size()) + "," +
           fixed(r.report.rate) + "\n";
    table.push_back({{"attack", r.name},
                     {"algorithm", r.algorithm},
                     {"policy", r.policy},
                     {"final_size", to_json(r.final_size)},
                     {"forbidden_multiples", r.forbidden},
                     {"trials", r.report.trials.size()},
                     {"survival_rate", r.report.rate}});
    char line[160];
    std::snprintf(line, sizeof line, "%-25s %-10s %-39s %-10s %6.2f%%", r.name.c_str(), r.algorithm.c_str(),
                  r.policy.c_str(), to_string(r.final_size).c_str(), 100.0 * r.report.rate);
    run.say(line);
  }
  Run::write_text(run.out_dir / "survival.csv", csv);
  Run::write_text(run.out_dir / "survival.json", table.dump(2) + "\n");
  Json sizes = Json::array();
  for (const auto& s : cross_sizes) sizes.push_back(to_json(s));
  run.finish("defend", {{"trials", trials},
                        {"min_fraction", min_fraction},
                        {"max_fraction", max_fraction},
                        {"cross_sizes", sizes},
                        {"algorithms", algorithm_names},
                        {"attacks", resolved_attacks},
                        {"synthetic", {{"count", count}, {"source", to_json(large)}, {"target", to_json(small)},
                                       {"epsilon", synth_eps}}}});
  return kExitOk;
}

// ---------------------------------------------------------------- fixtures

struct FixtureFlags {
  std::optional<int> count, benign;
  std::optional<std::string> large, small, overlay;
};

int cmd_fixtures(Run& run, const FixtureFlags& flags) {
  auto block = run.block("fixtures");
  int count = static_cast<int>(block.get_int("count", 4));
  int benign = static_cast<int>(block.get_int("benign", 0));
  Size large = block.get_size("source", {200, 200});
  Size small = block.get_size("target", {40, 40});
  std::string overlay = block.get_string("overlay", "none");
  block.finish();
  if (flags.count) count = *flags.count;
  if (flags.benign) benign = *flags.benign;
  if (flags.large) large = parse_size(*flags.large);
  if (flags.small) small = parse_size(*flags.small);
  if (flags.overlay) overlay = *flags.overlay;
  if (count < 1 || benign < 0) throw Error(ErrorCode::invalid_argument, "count must be >= 1, benign >= 0");
  if (overlay != "none" && overlay != "dining_table") {
    throw Error(ErrorCode::invalid_argument, "overlay must be none or dining_table");
  }
  const auto replica_overlay = overlay == "none" ? synthetic::Overlay::none : synthetic::Overlay::dining_table;

  run.prepare_output();
  Json jobs = Json::array();
  for (int i = 0; i < count; ++i) {
    const std::string name = "fixture" + std::to_string(i + 1);
    const auto f = synthetic::attack_fixture(run.seed + static_cast<std::uint64_t>(i), large, small, replica_overlay);
    write_png(f.replica, run.out_dir / (name + "_replica.png"));
    write_png(f.target, run.out_dir / (name + "_target.png"));
    write_png(f.target_large, run.out_dir / (name + "_target_large.png"));
    write_pair_manifest({name + "_target_large.png", name + "_replica.png", f.diff_region, PairMode::composited,
                         "trigger T-shirt"},
                        run.out_dir / (name + "_pair.json"));
    jobs.push_back({{"name", name}, {"source", name + "_replica.png"}, {"target", name + "_target.png"}});
  }
  std::vector<CorpusEntry> corpus;
  for (int i = 0; i < benign; ++i) {
    const std::string name = "benign" + std::to_string(i + 1) + ".png";
    write_png(synthetic::scene(run.seed + 100000 + static_cast<std::uint64_t>(i), large).quantized(),
              run.out_dir / name);
    corpus.push_back({name, false});
  }
  if (benign > 0) write_corpus_manifest(corpus, run.out_dir / "benign_corpus.json");
  // Ready-made craft config for the generated pairs.
  Json craft_config;
  craft_config["attack"] = {{"jobs", jobs}, {"algorithm", "bilinear"}, {"epsilon", 1.0}};
  Run::write_text(run.out_dir / "craft_config.json", craft_config.dump(2) + "\n");
  run.log(Json{{"event", "fixtures"}, {"count", count}, {"benign", benign}}.dump());
  run.say("wrote " + std::to_string(count) + " fixture pairs (" + to_string(large) + " -> " + to_string(small) +
          ") and " + std::to_string(benign) + " benign images to " + run.out_dir.string());
  run.finish("fixtures", {{"count", count},
                          {"benign", benign},
                          {"source", to_json(large)},
                          {"target", to_json(small)},
                          {"overlay", overlay}});
  return kExitOk;
}

// ---------------------------------------------------------------- operator

struct OperatorFlags {
  std::optional<std::string> algorithm, source, target;
};

int cmd_operator(Run& run, const OperatorFlags& flags) {
  auto block = run.block("operator");
  std::string algorithm = block.get_string("algorithm", "bilinear");
  Size source = block.get_size("source", {0, 0});
  Size target = block.get_size("target", {0, 0});
  block.finish();
  if (flags.algorithm) algorithm = *flags.algorithm;
  if (flags.source) source = parse_size(*flags.source);
  if (flags.target) target = parse_size(*flags.target);
  const auto op = build_operator(parse_algorithm(algorithm), source, target);
  run.prepare_output();
  const std::string name =
      "operator_" + std::string(to_string(op.algorithm())) + "_" + to_string(source) + "_" + to_string(target) + ".txt";
  std::ostringstream dump;
  write_operator_dump(op, dump);
  Run::write_text(run.out_dir / name, dump.str());
  run.say("wrote " + (run.out_dir / name).string() + " (" + std::to_string(op.row_matrix().nonzeros()) +
          " row and " + std::to_string(op.col_matrix().nonzeros()) + " column weights)");
  run.finish("operator", {{"algorithm", algorithm}, {"source", to_json(source)}, {"target", to_json(target)}});
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Image-scaling camouflage toolkit: craft, poison, scan and defend."};
  app.name("scalecamo");
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags global;
  app.add_option("--config", global.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", global.seed, "Seed for every randomized step");
  app.add_option("--threads", global.threads, "Worker threads");
  app.add_option("--out", global.out, "Output directory");
  app.add_option("--log-level", global.log_level, "quiet, info or debug");

  CraftFlags craft_flags;
  auto* craft_cmd = app.add_subcommand("craft", "Craft attack images from replica/target pairs");
  craft_cmd->add_option("--source", craft_flags.source, "Large source (replica) image");
  craft_cmd->add_option("--target", craft_flags.target, "Small target image");
  craft_cmd->add_option("--name", craft_flags.name, "Job name used for output files");
  craft_cmd->add_option("--algorithm", craft_flags.algorithm, "nearest, bilinear or area");
  craft_cmd->add_option("--epsilon", craft_flags.epsilon, "L-infinity bound on the downscaled residual");
  craft_cmd->add_option("--strategy", craft_flags.strategy, "joint or two_stage");
  craft_cmd->add_flag("--no-replica", craft_flags.no_replica, "Source is not a replica of the target scene");
  craft_cmd->add_flag("--dump-operator", craft_flags.dump_operator, "Also write the operator dump");

  AuditFlags audit_flags;
  auto* audit_cmd = app.add_subcommand("audit", "Check that a replica pair differs only in its region");
  audit_cmd->add_option("--pair", audit_flags.pair, "Pair manifest");
  audit_cmd->add_option("--tolerance", audit_flags.tolerance, "Allowed difference outside the region");

  PoisonFlags poison_flags;
  auto* poison_cmd = app.add_subcommand("poison", "Assemble a poisoned VOC dataset");
  poison_cmd->add_option("--benign-root", poison_flags.benign_root, "VOC root with Annotations/ and JPEGImages/");
  poison_cmd->add_option("--mode", poison_flags.mode, "cloaking or misclassification");
  poison_cmd->add_option("--target-class", poison_flags.target_class, "Class for misclassification");
  poison_cmd->add_option("--rate", poison_flags.rate, "Poison rate");

  ScanFlags scan_flags;
  auto* scan_cmd = app.add_subcommand("scan", "Run the detection tests over a labeled corpus");
  scan_cmd->add_option("--corpus", scan_flags.corpus, "Corpus manifest (repeatable)");
  scan_cmd->add_option("--probe", scan_flags.probe, "Probe size HxW for the scaling test");

  DefendFlags defend_flags;
  auto* defend_cmd = app.add_subcommand("defend", "Measure attack survival under prevention policies");
  defend_cmd->add_option("--trials", defend_flags.trials, "Trials per policy");
  defend_cmd->add_option("--count", defend_flags.count, "Synthetic fixtures to craft");

  FixtureFlags fixture_flags;
  auto* fixtures_cmd = app.add_subcommand("fixtures", "Generate synthetic replica/target fixtures");
  fixtures_cmd->add_option("--count", fixture_flags.count, "Number of pairs");
  fixtures_cmd->add_option("--benign", fixture_flags.benign, "Number of benign images");
  fixtures_cmd->add_option("--source", fixture_flags.large, "Large size HxW");
  fixtures_cmd->add_option("--target", fixture_flags.small, "Small size HxW");
  fixtures_cmd->add_option("--overlay", fixture_flags.overlay, "Replica content: none or dining_table");

  OperatorFlags operator_flags;
  auto* operator_cmd = app.add_subcommand("operator", "Dump the coefficient matrices of a resize");
  operator_cmd->add_option("--algorithm", operator_flags.algorithm, "nearest, bilinear or area");
  operator_cmd->add_option("--source", operator_flags.source, "Source size HxW");
  operator_cmd->add_option("--target", operator_flags.target, "Target size HxW");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    auto* sub = app.get_subcommands().front();
    Run run(sub->get_name(), global, out, err);
    if (sub == craft_cmd) return cmd_craft(run, craft_flags);
    if (sub == audit_cmd) return cmd_audit(run, audit_flags);
    if (sub == poison_cmd) return cmd_poison(run, poison_flags);
    if (sub == scan_cmd) return cmd_scan(run, scan_flags);
    if (sub == defend_cmd) return cmd_defend(run, defend_flags);
    if (sub == fixtures_cmd) return cmd_fixtures(run, fixture_flags);
    if (sub == operator_cmd) return cmd_operator(run, operator_flags);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return is_domain_failure(e.code()) ? kExitDomain : kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace scalecamo::cli
