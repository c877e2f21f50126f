// Copyright 2026 The leukmil Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "leukmil/cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "leukmil/baggen/pools.hpp"
#include "leukmil/cli/config.hpp"
#include "leukmil/cli/repro.hpp"
#include "leukmil/core/checkpoint.hpp"
#include "leukmil/core/error.hpp"
#include "leukmil/core/json_util.hpp"
#include "leukmil/core/log.hpp"
#include "leukmil/detect/average_precision.hpp"
#include "leukmil/detect/two_stage.hpp"
#include "leukmil/eval/bags.hpp"
#include "leukmil/eval/partition.hpp"

namespace leukmil::cli {

namespace {

const std::set<std::string> kSubcommands{"synth",   "train-detector", "detect",   "generate-epoch", "train",
                                         "predict", "evaluate",       "ablate",   "repro"};

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid JSON in '" + path.string() + "': " + e.what());
  }
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

void print_result(const nlohmann::json& j) { std::cout << j.dump() << std::endl; }

std::optional<std::filesystem::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

std::string safe_name(std::string s) {
  for (char& c : s) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return s;
}

// Options shared by several subcommands.
struct Common {
  std::uint64_t seed = 0;
  std::string weights_dir;
  bool quiet = false;
};

void add_common(CLI::App& app, Common& c) {
  app.add_option("--seed", c.seed, "top-level random seed");
  app.add_option("--weights-dir", c.weights_dir, "directory of exported backbone weights (default $LEUKMIL_WEIGHTS_DIR)");
  app.add_flag("--quiet", c.quiet, "only log warnings and errors");
}

// ---- synth
struct SynthArgs {
  std::string out, config;
  int n_all = 50, n_healthy = 50, images_min = 2, images_max = 4;
  double test_fraction = 0.3;
  bool no_pools = false;
};

int cmd_synth(const SynthArgs& a, const Common& c, RunConfig& rc) {
  synth::SynthConfig sc;
  if (!a.config.empty()) sc = synth::SynthConfig::from_json(read_json(a.config));
  synth::CorpusOptions opt{a.n_all, a.n_healthy, a.images_min, a.images_max, a.test_fraction};
  rc.options = {{"synth", sc.to_json()}, {"corpus", CorpusSpec{sc, opt}.to_json()}, {"seed", c.seed}};
  Rng rng = Rng(c.seed).derive(seed_offset::kSynth);
  const DatasetManifest m = synth::generate_corpus(sc, opt, a.out, rng);
  if (!a.no_pools) baggen::save_pools(baggen::pools_from_manifest(m, Split::kTrain, sc.crop_size), std::filesystem::path(a.out) / "pools");
  write_json({{"config_digest", rc.digest()}, {"config", rc.to_json()}}, std::filesystem::path(a.out) / "synth_config.json");
  print_result({{"event", "synth_done"}, {"images", m.records.size()}, {"patients", m.patients().size()},
                {"manifest", (std::filesystem::path(a.out) / "manifest.json").string()}, {"config_digest", rc.digest()}});
  return kExitOk;
}

// ---- train-detector
struct TrainDetectorArgs {
  std::string manifest, out, config, class_map = "blast_normal";
  int epochs = -1;
};

int cmd_train_detector(const TrainDetectorArgs& a, const Common& c, RunConfig& rc) {
  detect::DetectorTrainConfig cfg;
  if (!a.config.empty()) cfg = detect::DetectorTrainConfig::from_json(read_json(a.config));
  cfg.class_map = detect::parse_class_map(a.class_map);
  if (a.epochs >= 0) cfg.epochs = a.epochs;
  rc.options = {{"manifest", a.manifest}, {"detector", cfg.to_json()}, {"seed", c.seed}};
  const DatasetManifest m = load_manifest(a.manifest);
  Rng rng = Rng(c.seed).derive(seed_offset::kDetector);
  detect::TrainedDetector trained = detect::train_detector(m, cfg, rng);
  Checkpoint ckpt = trained.model.to_checkpoint();
  ckpt.config_digest = rc.digest();
  save_checkpoint(ckpt, a.out);
  nlohmann::json result = {{"event", "train_detector_done"}, {"summary", trained.summary.to_json()},
                           {"config_digest", rc.digest()}};
  if (!m.split(Split::kTest).empty()) result["test_map"] = detect::evaluate_map(trained.model, m, Split::kTest).to_json();
  write_json(result, std::filesystem::path(a.out).string() + ".report.json");
  print_result(result);
  return kExitOk;
}

// ---- detect
struct DetectArgs {
  std::string ckpt, manifest, out, split = "test", class_map = "blast_normal";
  bool oracle = false;
  double score_threshold = detect::kDefaultScoreThreshold;
  double nms_iou = detect::kDefaultNmsIou;
};

std::unique_ptr<detect::Detector> make_detector(const std::string& ckpt, bool oracle, const std::string& class_map,
                                                const DatasetManifest& m) {
  if (oracle == !ckpt.empty()) throw ConfigError("give exactly one of --ckpt or --oracle");
  if (oracle) return detect::oracle_detector(m, detect::parse_class_map(class_map));
  return detect::load_detector(ckpt);
}

int cmd_detect(const DetectArgs& a, const Common&, RunConfig& rc) {
  rc.options = {{"ckpt", a.ckpt}, {"oracle", a.oracle}, {"manifest", a.manifest}, {"split", a.split},
                {"class_map", a.class_map}, {"score_threshold", a.score_threshold}, {"nms_iou", a.nms_iou}};
  const DatasetManifest m = load_manifest(a.manifest);
  const auto detector = make_detector(a.ckpt, a.oracle, a.class_map, m);
  const std::optional<Split> split = a.split == "all" ? std::nullopt : std::optional(parse_split(a.split));
  nlohmann::json images = nlohmann::json::array();
  for (const auto& rec : m.records) {
    if (split && rec.split != *split) continue;
    const auto found = detect::detect_cells(*detector, m.load_image(rec), a.score_threshold, a.nms_iou);
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& b : found.boxes) boxes.push_back(box_to_json(b, true));
    images.push_back({{"image_id", found.image_id}, {"boxes", boxes}});
  }
  eval::BagOptions bo;
  bo.score_threshold = a.score_threshold;
  bo.nms_iou = a.nms_iou;
  const eval::BagSet set = eval::build_bags(m, split, *detector, bo);
  const std::filesystem::path out(a.out);
  for (const auto& bag : set.bags) eval::save_bag(bag, out / "bags" / safe_name(bag.patient_id));
  write_json({{"config_digest", rc.digest()}, {"detector", detector->kind()}, {"images", images}}, out / "detections.json");
  print_result({{"event", "detect_done"}, {"images", set.images}, {"detections", set.detections},
                {"bags", set.bags.size()}, {"config_digest", rc.digest()}});
  return kExitOk;
}

// ---- generate-epoch
struct EpochArgs {
  std::string pools, out;
  int length = baggen::kDefaultSequenceLength, count = 2048, cell_min = 5, cell_max = 15;
  double balance = 0.5;
};

int cmd_generate_epoch(const EpochArgs& a, const Common& c, RunConfig& rc) {
  rc.options = {{"pools", a.pools}, {"length", a.length}, {"count", a.count}, {"cell_range", {a.cell_min, a.cell_max}},
                {"balance", a.balance}, {"seed", c.seed}};
  const baggen::CellPools pools = baggen::load_pools(a.pools);
  Rng rng = Rng(c.seed).derive(seed_offset::kBaggen);
  const auto epoch = baggen::draw_epoch(pools.blast.size(), pools.normal.size(), a.length, a.count, a.balance,
                                        {a.cell_min, a.cell_max}, rng);
  nlohmann::json j = baggen::epoch_to_json(epoch, pools, a.pools);
  j["config_digest"] = rc.digest();
  write_json(j, a.out);
  print_result({{"event", "generate_epoch_done"}, {"sequences", epoch.size()}, {"config_digest", rc.digest()}});
  return kExitOk;
}

// ---- train
struct TrainArgs {
  int stage = 1, length = -1, epochs = -1;
  std::string pools, backbone = "toy_cnn", init, out, config;
  bool allow_random_init = false;
};

int cmd_train(const TrainArgs& a, const Common& c, RunConfig& rc) {
  model::TrainConfig cfg = a.stage == 2 ? model::TrainConfig::stage2() : model::TrainConfig::stage1();
  if (!a.config.empty()) {
    nlohmann::json j = read_json(a.config);
    j["stage"] = a.stage;
    cfg = model::TrainConfig::from_json(j);
  }
  cfg.stage = a.stage;
  if (a.length > 0) cfg.length = a.length;
  if (a.stage == 2 && a.length > 0 && cfg.cell_range.hi > a.length) cfg.cell_range = {std::min(cfg.cell_range.lo, a.length), a.length};
  if (a.epochs >= 0) cfg.epochs = a.epochs;
  cfg.allow_random_init = a.allow_random_init;
  cfg.validate();
  if (a.stage == 1 && !a.init.empty()) throw ConfigError("--init applies to stage 2 only");
  if (a.stage == 2 && a.init.empty() && !a.allow_random_init) {
    throw ConfigError("stage 2 needs --init <stage-1 checkpoint> (or --allow-random-init)");
  }
  rc.options = {{"pools", a.pools}, {"backbone", a.backbone}, {"init", a.init}, {"train", cfg.to_json()}, {"seed", c.seed}};
  const auto pools = baggen::load_pools(a.pools);
  const auto extractor = features::FeatureExtractor::create(a.backbone, optional_path(c.weights_dir));
  Rng rng = Rng(c.seed).derive(a.stage == 1 ? seed_offset::kStage1 : seed_offset::kStage2);
  model::TrainOutcome outcome;
  if (a.stage == 1) {
    outcome = model::train_stage1(pools, cfg, extractor, rng);
  } else {
    std::optional<Checkpoint> init;
    if (!a.init.empty()) init = load_checkpoint(a.init, extractor.digest());
    outcome = model::train_stage2(pools, cfg, init ? &*init : nullptr, extractor, rng);
  }
  outcome.checkpoint.config["run_config_digest"] = rc.digest();
  save_checkpoint(outcome.checkpoint, a.out);
  nlohmann::json result = {{"event", "train_done"}, {"stage", a.stage}, {"summary", outcome.summary()},
                           {"config_digest", rc.digest()}};
  write_json(result, a.out + ".report.json");
  print_result(result);
  return kExitOk;
}

model::PredictOptions predict_options(const std::string& packing, int length, const std::string& aggregation) {
  model::PredictOptions o;
  o.packing = baggen::parse_packing(packing);
  o.length = length;
  o.aggregation = model::parse_aggregation(aggregation);
  if (o.length < 1) throw ConfigError("--length must be >= 1");
  return o;
}

struct LoadedModel {
  features::FeatureExtractor extractor;
  model::AggregatorClassifier<float> model;
};

LoadedModel load_model(const std::string& path, const Common& c) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "aggregator") throw ConfigError("'" + path + "' is not an aggregator checkpoint");
  auto extractor = features::FeatureExtractor::create(ckpt.config.at("backbone").get<std::string>(),
                                                      optional_path(c.weights_dir));
  auto m = model::model_from_checkpoint(ckpt, extractor.digest());
  return {std::move(extractor), std::move(m)};
}

// ---- predict
struct PredictArgs {
  std::string ckpt, bag, json_out, packing = "chunk", aggregation = "max";
  int length = baggen::kDefaultSequenceLength;
};

int cmd_predict(const PredictArgs& a, const Common& c, RunConfig& rc) {
  rc.options = {{"ckpt", a.ckpt}, {"bag", a.bag}, {"packing", a.packing}, {"length", a.length}, {"aggregation", a.aggregation}};
  const auto opts = predict_options(a.packing, a.length, a.aggregation);
  const LoadedModel lm = load_model(a.ckpt, c);
  model::FeatureCache cache(lm.extractor);
  const PatientBag bag = eval::load_bag(a.bag);
  nlohmann::json result = model::predict_patient(lm.model, bag, cache, opts).to_json();
  result["config_digest"] = rc.digest();
  if (!a.json_out.empty()) write_json(result, a.json_out);
  print_result(result);
  return kExitOk;
}

// ---- evaluate
struct EvaluateArgs {
  std::string ckpt, manifest, split = "test", detector = "oracle", attack = "none", class_source = "gt", json_out,
              packing = "chunk", aggregation = "max";
  int partition_size = 0, length = baggen::kDefaultSequenceLength;
};

int cmd_evaluate(const EvaluateArgs& a, const Common& c, RunConfig& rc) {
  rc.options = {{"ckpt", a.ckpt}, {"manifest", a.manifest}, {"split", a.split}, {"detector", a.detector},
                {"attack", a.attack}, {"class_source", a.class_source},
                {"partition_size", a.partition_size}, {"packing", a.packing}, {"length", a.length},
                {"aggregation", a.aggregation}, {"seed", c.seed}};
  const auto opts = predict_options(a.packing, a.length, a.aggregation);
  const eval::AttackSpec spec{eval::parse_attack_mode(a.attack), eval::parse_class_source(a.class_source)};
  if (spec.source == eval::ClassSource::kModel) throw ConfigError("--class-source must be gt or detector");
  if (a.partition_size < 0) throw ConfigError("--partition-size must be >= 0");
  const DatasetManifest m = load_manifest(a.manifest);
  if (spec.mode != eval::AttackMode::kNone && spec.source == eval::ClassSource::kGroundTruth && !m.synthetic) {
    throw ConfigError("--class-source gt is only available on synthetic manifests");
  }
  const std::optional<Split> split = a.split == "all" ? std::nullopt : std::optional(parse_split(a.split));
  const auto detector = a.detector == "oracle" ? detect::oracle_detector(m, detect::ClassMap::kBlastNormal)
                                               : detect::load_detector(a.detector);
  eval::BagSet set = eval::build_bags(m, split, *detector);

  std::unique_ptr<eval::CellClassifier> classifier;
  if (spec.mode != eval::AttackMode::kNone) {
    if (spec.source == eval::ClassSource::kGroundTruth) {
      classifier = std::make_unique<eval::GroundTruthClassifier>();
    } else {
      // The detector that cropped the bags also supplies their classes.
      if (a.detector == "oracle") throw ConfigError("--class-source detector needs --detector <two-class checkpoint>");
      if (detector->class_map() != detect::ClassMap::kBlastNormal) {
        throw ConfigError("'" + a.detector + "' is a one-class detector; detector-sourced attacks need blast_normal");
      }
      classifier = std::make_unique<eval::DetectionLabelTable>(set.detector_labels);
    }
  }

  const LoadedModel lm = load_model(a.ckpt, c);
  model::FeatureCache cache(lm.extractor);
  std::vector<PatientBag> units = set.bags;
  if (a.partition_size > 0) {
    Rng rng = Rng(c.seed).derive(seed_offset::kEval);
    units = eval::partition_patients(set.bags, eval::PartitionSpec{a.partition_size}, rng);
    if (units.empty()) throw InvariantViolation("no patient has " + std::to_string(a.partition_size) + " cells");
  }
  std::vector<PatientBag> attacked;
  std::size_t emptied = 0;
  for (const auto& u : units) {
    auto r = eval::apply_attack(u, spec, classifier.get());
    emptied += r.emptied ? 1 : 0;
    attacked.push_back(std::move(r.bag));
  }
  const auto preds = eval::predict_bags(lm.model, attacked, cache, opts);
  MetricsReport rep = eval::patient_metrics(preds, attacked);
  nlohmann::json per = nlohmann::json::array();
  for (const auto& p : preds) per.push_back(p.to_json());
  rep.extra = {{"attack", a.attack}, {"class_source", a.class_source}, {"partition_size", a.partition_size},
               {"units", units.size()}, {"emptied", emptied}, {"recall_all", eval::optional_json(eval::recall_all(preds, attacked))},
               {"predictions", per}};
  rep = eval::named_report(rep, "evaluate", c.seed, rc.digest());
  if (!a.json_out.empty()) rep.save(a.json_out);
  nlohmann::json brief = rep.to_json();
  brief["extra"].erase("predictions");
  print_result(brief);
  return kExitOk;
}

// ---- ablate
struct AblateArgs {
  std::string grid, pools, manifest, sweep_manifest, out, ckpt;
};

int cmd_ablate(const AblateArgs& a, const Common& c, RunConfig& rc) {
  eval::AblationConfig cfg = a.grid.empty() ? eval::AblationConfig::desk() : eval::AblationConfig::from_json(read_json(a.grid));
  if (!c.weights_dir.empty()) cfg.weights_dir = c.weights_dir;
  rc.options = {{"grid", cfg.to_json()}, {"pools", a.pools}, {"manifest", a.manifest},
                {"sweep_manifest", a.sweep_manifest}, {"ckpt", a.ckpt}, {"seed", c.seed}};
  const auto pools = baggen::load_pools(a.pools);
  const DatasetManifest m = load_manifest(a.manifest);
  const auto oracle = detect::oracle_detector(m, detect::ClassMap::kBlastNormal);
  const eval::BagSet test = eval::build_bags(m, Split::kTest, *oracle);
  std::optional<eval::BagSet> sweep;
  if (!a.sweep_manifest.empty()) {
    const DatasetManifest sm = load_manifest(a.sweep_manifest);
    sweep = eval::build_bags(sm, std::nullopt, *detect::oracle_detector(sm, detect::ClassMap::kBlastNormal));
  }
  std::optional<LoadedModel> lm;
  if (!a.ckpt.empty()) lm = load_model(a.ckpt, c);
  eval::AblationInputs inputs;
  inputs.pools = &pools;
  inputs.test_bags = &test.bags;
  inputs.sweep_bags = sweep ? &sweep->bags : nullptr;
  if (lm) {
    inputs.sweep_model = &lm->model;
    inputs.extractor = &lm->extractor;
  }
  const eval::ReportBundle bundle = eval::run_ablations(cfg, inputs, c.seed);
  const std::string digest = bundle.write(a.out, rc.digest());
  print_result({{"event", "ablate_done"}, {"bundle_digest", digest}, {"config_digest", rc.digest()},
                {"summary", bundle.summary()}});
  return kExitOk;
}

// ---- repro
struct ReproArgs {
  std::string out = "repro_out", budget = "desk", config;
};

int cmd_repro(const ReproArgs& a, const Common& c, RunConfig& rc) {
  ReproConfig cfg = ReproConfig::for_budget(parse_budget(a.budget), c.seed);
  if (!c.weights_dir.empty()) cfg.weights_dir = c.weights_dir;
  rc.options = cfg.to_json();
  const ReproResult r = run_repro(cfg, a.out);
  print_result({{"event", "repro_done"}, {"config_digest", r.config_digest}, {"bundle_digest", r.bundle_digest},
                {"summary", r.summary}});
  return kExitOk;
}

void error_line(std::string_view event, const std::string& message) {
  std::cerr << nlohmann::json{{"level", "error"}, {"event", event}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int run(int argc, char** argv) {
  if (argc > 1 && argv[1][0] != '-' && !kSubcommands.count(argv[1])) {
    std::cerr << nlohmann::json{{"level", "error"}, {"event", "unknown_subcommand"}, {"subcommand", argv[1]},
                                {"message", std::string("unknown subcommand '") + argv[1] + "'"}}
                     .dump()
              << std::endl;
    return kExitUsage;
  }

  CLI::App app{"leukmil: multiple-instance leukemia screening from blood smear cells"};
  app.require_subcommand(1);
  Common common;
  RunConfig rc;

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "render a synthetic annotated smear corpus");
  synth->add_option("--out", synth_args.out, "output directory")->required();
  synth->add_option("--config", synth_args.config, "synth config JSON");
  synth->add_option("--n-all", synth_args.n_all, "ALL patients");
  synth->add_option("--n-healthy", synth_args.n_healthy, "HEALTHY patients");
  synth->add_option("--images-min", synth_args.images_min, "images per patient, lower bound");
  synth->add_option("--images-max", synth_args.images_max, "images per patient, upper bound");
  synth->add_option("--test-fraction", synth_args.test_fraction, "patient-level test share per class");
  synth->add_flag("--no-pools", synth_args.no_pools, "skip writing train-split cell pools");
  add_common(*synth, common);

  TrainDetectorArgs td_args;
  auto* td = app.add_subcommand("train-detector", "train the two-stage cell detector");
  td->add_option("--manifest", td_args.manifest)->required();
  td->add_option("--out", td_args.out, "checkpoint path")->required();
  td->add_option("--config", td_args.config, "detector training config JSON");
  td->add_option("--class-map", td_args.class_map, "cell | blast_normal");
  td->add_option("--epochs", td_args.epochs);
  add_common(*td, common);

  DetectArgs det_args;
  auto* det = app.add_subcommand("detect", "detect and crop cells into per-patient bags");
  det->add_option("--ckpt", det_args.ckpt, "detector checkpoint");
  det->add_flag("--oracle", det_args.oracle, "use the manifest annotations as detections");
  det->add_option("--class-map", det_args.class_map, "oracle class map: cell | blast_normal");
  det->add_option("--manifest", det_args.manifest)->required();
  det->add_option("--split", det_args.split, "train | test | all");
  det->add_option("--score-threshold", det_args.score_threshold);
  det->add_option("--nms-iou", det_args.nms_iou);
  det->add_option("--out", det_args.out)->required();
  add_common(*det, common);

  EpochArgs ep_args;
  auto* ep = app.add_subcommand("generate-epoch", "draw one epoch of labelled cell sequences");
  ep->add_option("--pools", ep_args.pools)->required();
  ep->add_option("--length", ep_args.length);
  ep->add_option("--count", ep_args.count);
  ep->add_option("--balance", ep_args.balance, "ALL share");
  ep->add_option("--cell-min", ep_args.cell_min);
  ep->add_option("--cell-max", ep_args.cell_max);
  ep->add_option("--out", ep_args.out)->required();
  add_common(*ep, common);

  TrainArgs tr_args;
  auto* tr = app.add_subcommand("train", "train the sequence aggregator (stage 1 or 2)");
  tr->add_option("--stage", tr_args.stage)->check(CLI::IsMember({1, 2}));
  tr->add_option("--pools", tr_args.pools)->required();
  tr->add_option("--backbone", tr_args.backbone);
  tr->add_option("--length", tr_args.length);
  tr->add_option("--epochs", tr_args.epochs);
  tr->add_option("--init", tr_args.init, "stage-1 checkpoint for stage 2");
  tr->add_option("--config", tr_args.config, "training config JSON");
  tr->add_flag("--allow-random-init", tr_args.allow_random_init, "permit stage 2 without a stage-1 checkpoint");
  tr->add_option("--out", tr_args.out)->required();
  add_common(*tr, common);

  PredictArgs pr_args;
  auto* pr = app.add_subcommand("predict", "diagnose one patient bag");
  pr->add_option("--ckpt", pr_args.ckpt)->required();
  pr->add_option("--bag", pr_args.bag, "bag directory written by detect")->required();
  pr->add_option("--packing", pr_args.packing, "chunk | single");
  pr->add_option("--length", pr_args.length);
  pr->add_option("--aggregation", pr_args.aggregation, "max | mean");
  pr->add_option("--json-out", pr_args.json_out);
  add_common(*pr, common);

  EvaluateArgs ev_args;
  auto* ev = app.add_subcommand("evaluate", "patient-level metrics, optionally partitioned and attacked");
  ev->add_option("--ckpt", ev_args.ckpt)->required();
  ev->add_option("--manifest", ev_args.manifest)->required();
  ev->add_option("--split", ev_args.split, "train | test | all");
  ev->add_option("--detector", ev_args.detector, "oracle or a detector checkpoint");
  ev->add_option("--partition-size", ev_args.partition_size, "cells per pseudo-patient; 0 keeps whole bags");
  ev->add_option("--attack", ev_args.attack, "none | remove-blast | remove-normal");
  ev->add_option("--class-source", ev_args.class_source, "gt | detector");
  ev->add_option("--packing", ev_args.packing);
  ev->add_option("--length", ev_args.length);
  ev->add_option("--aggregation", ev_args.aggregation);
  ev->add_option("--json-out", ev_args.json_out);
  add_common(*ev, common);

  AblateArgs ab_args;
  auto* ab = app.add_subcommand("ablate", "run the ablation grid");
  ab->add_option("--grid", ab_args.grid, "grid JSON");
  ab->add_option("--pools", ab_args.pools)->required();
  ab->add_option("--manifest", ab_args.manifest, "manifest whose test split is evaluated")->required();
  ab->add_option("--sweep-manifest", ab_args.sweep_manifest, "large-bag manifest for the group-size sweep");
  ab->add_option("--ckpt", ab_args.ckpt, "model for the group-size sweep");
  ab->add_option("--out", ab_args.out)->required();
  add_common(*ab, common);

  ReproArgs re_args;
  auto* re = app.add_subcommand("repro", "end-to-end reproduction with one seed");
  re->add_option("--out", re_args.out);
  re->add_option("--budget", re_args.budget, "desk | full");
  add_common(*re, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_line("usage_error", e.what());
    return kExitUsage;
  }
  if (common.quiet) log::set_level(log::Level::kWarn);

  try {
    if (synth->parsed()) { rc.subcommand = "synth"; return cmd_synth(synth_args, common, rc); }
    if (td->parsed()) { rc.subcommand = "train-detector"; return cmd_train_detector(td_args, common, rc); }
    if (det->parsed()) { rc.subcommand = "detect"; return cmd_detect(det_args, common, rc); }
    if (ep->parsed()) { rc.subcommand = "generate-epoch"; return cmd_generate_epoch(ep_args, common, rc); }
    if (tr->parsed()) { rc.subcommand = "train"; return cmd_train(tr_args, common, rc); }
    if (pr->parsed()) { rc.subcommand = "predict"; return cmd_predict(pr_args, common, rc); }
    if (ev->parsed()) { rc.subcommand = "evaluate"; return cmd_evaluate(ev_args, common, rc); }
    if (ab->parsed()) { rc.subcommand = "ablate"; return cmd_ablate(ab_args, common, rc); }
    if (re->parsed()) { rc.subcommand = "repro"; return cmd_repro(re_args, common, rc); }
  } catch (const ConfigError& e) {
    error_line("config_error", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    error_line("failed", e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    error_line("failed", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace leukmil::cli
