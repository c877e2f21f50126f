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

#include "leukmil/model/training.hpp"

#include <cmath>
#include <numeric>

#include "leukmil/core/digest.hpp"
#include "leukmil/core/json_util.hpp"
#include "leukmil/core/log.hpp"
#include "leukmil/core/metrics.hpp"
#include "leukmil/nn/adam.hpp"

namespace leukmil::model {

using baggen::SequenceRef;
using baggen::Source;

TrainConfig TrainConfig::stage1() {
  TrainConfig c;
  c.stage = 1;
  c.length = 1;
  c.cell_range = {1, 1};
  c.epochs = 12;
  return c;
}

TrainConfig TrainConfig::stage2() {
  TrainConfig c;
  c.stage = 2;
  c.length = baggen::kDefaultSequenceLength;
  c.cell_range = {5, 15};
  c.epochs = 8;
  return c;
}

void TrainConfig::validate() const {
  if (stage != 1 && stage != 2) throw ConfigError("training stage must be 1 or 2");
  if (stage == 1 && length != 1) throw ConfigError("stage 1 trains on length-1 sequences");
  if (length < 1) throw ConfigError("sequence length must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (stage == 2 && (sequences_per_epoch < 1 || validation_sequences < 1)) {
    throw ConfigError("stage 2 needs sequences_per_epoch and validation_sequences >= 1");
  }
  if (stage == 2 && (cell_range.lo < 1 || cell_range.lo > cell_range.hi || cell_range.hi > length)) {
    throw ConfigError("cell range must satisfy 1 <= lo <= hi <= length");
  }
  if (early_stop_metric != "macro_f1" && early_stop_metric != "accuracy") {
    throw ConfigError("early-stop metric must be macro_f1 or accuracy");
  }
  if (augment_variants < 1) throw ConfigError("augment_variants must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"stage", stage},
          {"length", length},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"weight_decay", weight_decay},
          {"grad_clip_norm", grad_clip_norm},
          {"sequences_per_epoch", sequences_per_epoch},
          {"validation_sequences", validation_sequences},
          {"balance", balance},
          {"cell_range", {cell_range.lo, cell_range.hi}},
          {"augmentation", augmentation.to_json()},
          {"augment_variants", augment_variants},
          {"holdout_fraction", holdout_fraction},
          {"activation", std::string(features::to_string(activation))},
          {"mask_skip", mask_skip},
          {"early_stop_metric", early_stop_metric},
          {"patience", patience},
          {"allow_random_init", allow_random_init}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c = j.value("stage", 1) == 2 ? stage2() : stage1();
  c.stage = j.value("stage", c.stage);
  c.length = j.value("length", c.length);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
  c.sequences_per_epoch = j.value("sequences_per_epoch", c.sequences_per_epoch);
  c.validation_sequences = j.value("validation_sequences", c.validation_sequences);
  c.balance = j.value("balance", c.balance);
  if (j.contains("cell_range")) {
    const auto r = j.at("cell_range").get<std::vector<int>>();
    if (r.size() != 2) throw ConfigError("cell_range must be [lo, hi]");
    c.cell_range = {r[0], r[1]};
  }
  if (j.contains("augmentation")) c.augmentation = baggen::AugmentationPolicy::from_json(j.at("augmentation"));
  c.augment_variants = j.value("augment_variants", c.augment_variants);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  if (j.contains("activation")) c.activation = features::parse_activation(j.at("activation").get<std::string>());
  c.mask_skip = j.value("mask_skip", c.mask_skip);
  c.early_stop_metric = j.value("early_stop_metric", c.early_stop_metric);
  c.patience = j.value("patience", c.patience);
  c.allow_random_init = j.value("allow_random_init", c.allow_random_init);
  c.validate();
  return c;
}

std::string TrainConfig::digest() const { return sha256_hex(canonical_dump(to_json())); }

nlohmann::json TrainOutcome::summary() const {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& e : history) {
    hist.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"val_accuracy", e.val_accuracy},
                    {"val_macro_f1", e.val_macro_f1 ? nlohmann::json(*e.val_macro_f1) : nlohmann::json()}});
  }
  return {{"best_epoch", best_epoch},
          {"val_accuracy", val_accuracy},
          {"val_macro_f1", val_macro_f1 ? nlohmann::json(*val_macro_f1) : nlohmann::json()},
          {"extractor_digest_before", extractor_digest_before},
          {"extractor_digest_after", extractor_digest_after},
          {"history", hist}};
}

SequenceBatch<float> assemble_batch(const std::vector<const SequenceRef*>& refs, const FeatureBank& bank,
                                    Rng* variant_rng) {
  SequenceBatch<float> batch;
  batch.batch = static_cast<int>(refs.size());
  batch.length = refs.front()->length();
  const std::size_t rows = static_cast<std::size_t>(batch.batch) * batch.length;
  batch.features = nn::Mat<float>::Zero(static_cast<Eigen::Index>(rows), bank.dim());
  batch.present.assign(rows, false);
  for (int t = 0; t < batch.length; ++t) {
    for (int b = 0; b < batch.batch; ++b) {
      if (refs[b]->length() != batch.length) throw InvariantViolation("batch sequences differ in length");
      const auto& e = refs[b]->entries[t];
      if (e.source == Source::kBlank) continue;
      const int variant =
          variant_rng ? static_cast<int>(variant_rng->uniform_int(0, bank.variants() - 1)) : 0;
      const auto row = bank.row(e.source, e.index, variant);
      const std::size_t r = static_cast<std::size_t>(t) * batch.batch + b;
      std::copy(row.begin(), row.end(), batch.features.row(static_cast<Eigen::Index>(r)).data());
      batch.present[r] = true;
    }
  }
  return batch;
}

Checkpoint make_checkpoint(const AggregatorClassifier<float>& model, int stage, const TrainConfig& config,
                           const features::FeatureExtractor& extractor) {
  Checkpoint ckpt;
  ckpt.kind = "aggregator";
  ckpt.stage = stage;
  ckpt.config_digest = config.digest();
  ckpt.extractor_digest = extractor.digest();
  ckpt.config = {{"model", model.config().to_json()}, {"train", config.to_json()}, {"backbone", extractor.name()}};
  model.store(ckpt.parameters);
  return ckpt;
}

AggregatorClassifier<float> model_from_checkpoint(const Checkpoint& ckpt,
                                                  const std::optional<std::string>& extractor_digest) {
  if (ckpt.kind != "aggregator") throw FormatError("checkpoint kind '" + ckpt.kind + "' is not an aggregator");
  if (extractor_digest && ckpt.extractor_digest != *extractor_digest) {
    throw DigestMismatch("checkpoint was trained against a different feature extractor");
  }
  Rng rng(0);
  AggregatorClassifier<float> model(ModelConfig::from_json(ckpt.config.at("model")), rng);
  model.load(ckpt.parameters);
  return model;
}

namespace {

struct Validation {
  double accuracy = 0.0;
  std::optional<double> macro_f1;
};

Validation validate_refs(const AggregatorClassifier<float>& model, const std::vector<SequenceRef>& refs,
                         const FeatureBank& bank, int batch_size) {
  std::vector<Diagnosis> predicted, actual;
  for (std::size_t start = 0; start < refs.size(); start += batch_size) {
    std::vector<const SequenceRef*> chunk;
    for (std::size_t i = start; i < std::min(refs.size(), start + batch_size); ++i) chunk.push_back(&refs[i]);
    const auto out = model.forward(assemble_batch(chunk, bank, nullptr));
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      predicted.push_back(out.probs(static_cast<Eigen::Index>(b), kAllIndex) > 0.5f ? Diagnosis::kAll
                                                                                     : Diagnosis::kHealthy);
      actual.push_back(chunk[b]->label);
    }
  }
  const MetricsReport m = compute_metrics(tally(predicted, actual));
  return {*m.accuracy, m.macro_f1};
}

double score_of(const Validation& v, const std::string& metric) {
  if (metric == "accuracy") return v.accuracy;
  return v.macro_f1.value_or(-1.0);
}

std::vector<SequenceRef> single_cell_refs(std::size_t n_blast, std::size_t n_normal) {
  std::vector<SequenceRef> refs;
  for (std::size_t i = 0; i < n_blast; ++i) {
    refs.push_back({{{Source::kBlast, static_cast<int>(i)}}, Diagnosis::kAll, 1, 0});
  }
  for (std::size_t i = 0; i < n_normal; ++i) {
    refs.push_back({{{Source::kNormal, static_cast<int>(i)}}, Diagnosis::kHealthy, 0, -1});
  }
  return refs;
}

// Shared loop. `draw_train` yields the references for one epoch.
template <typename DrawTrain>
TrainOutcome fit(AggregatorClassifier<float> model, const TrainConfig& config, const FeatureBank& train_bank,
                 const FeatureBank& val_bank, const std::vector<SequenceRef>& val_refs,
                 const features::FeatureExtractor& extractor, Rng& rng, DrawTrain&& draw_train) {
  TrainOutcome outcome;
  outcome.extractor_digest_before = train_bank.extractor_digest();
  Rng order_rng = rng.derive(11);
  Rng variant_rng = rng.derive(12);

  nn::AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  adam_config.weight_decay = config.weight_decay;
  adam_config.grad_clip_norm = config.grad_clip_norm;
  nn::Adam<float> adam(adam_config);
  for (auto* p : model.params()) {
    adam.add(std::span<float>(p->value.data(), static_cast<std::size_t>(p->value.size())),
             std::span<const float>(p->grad.data(), static_cast<std::size_t>(p->grad.size())));
  }

  auto snapshot = [&] {
    std::vector<nn::Mat<float>> values;
    for (const auto* p : std::as_const(model).params()) values.push_back(p->value);
    return values;
  };
  Validation best = validate_refs(model, val_refs, val_bank, config.batch_size);
  outcome.val_accuracy = best.accuracy;
  outcome.val_macro_f1 = best.macro_f1;
  std::vector<nn::Mat<float>> best_values = snapshot();
  int since_best = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<SequenceRef> refs = draw_train(epoch);
    std::vector<std::size_t> order(refs.size());
    std::iota(order.begin(), order.end(), 0);
    order_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<const SequenceRef*> chunk;
      std::vector<int> labels;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        chunk.push_back(&refs[order[i]]);
        labels.push_back(refs[order[i]].label == Diagnosis::kAll ? 1 : 0);
      }
      model.zero_grad();
      const float loss = model.loss_and_gradients(assemble_batch(chunk, train_bank, &variant_rng), labels);
      if (!std::isfinite(loss)) {
        throw NumericalError("stage-" + std::to_string(config.stage) + " loss diverged at epoch " +
                             std::to_string(epoch));
      }
      adam.step();
      loss_sum += loss;
      ++batches;
    }
    const Validation v = validate_refs(model, val_refs, val_bank, config.batch_size);
    EpochRecord rec{epoch, batches ? loss_sum / batches : 0.0, v.accuracy, v.macro_f1};
    outcome.history.push_back(rec);
    log::info("train_epoch", {{"stage", config.stage},
                              {"epoch", epoch},
                              {"loss", rec.train_loss},
                              {"val_accuracy", v.accuracy},
                              {"val_macro_f1", v.macro_f1 ? nlohmann::json(*v.macro_f1) : nlohmann::json()}});
    if (score_of(v, config.early_stop_metric) > score_of(best, config.early_stop_metric)) {
      best = v;
      best_values = snapshot();
      outcome.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  auto params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  outcome.val_accuracy = best.accuracy;
  outcome.val_macro_f1 = best.macro_f1;
  outcome.extractor_digest_after = extractor.digest();
  if (outcome.extractor_digest_after != outcome.extractor_digest_before) {
    throw InvariantViolation("frozen feature extractor changed during training");
  }
  outcome.checkpoint = make_checkpoint(model, config.stage, config, extractor);
  outcome.model = std::move(model);
  return outcome;
}

}  // namespace

TrainOutcome train_stage1(const baggen::CellPools& pools, const TrainConfig& config,
                          const features::FeatureExtractor& extractor, Rng& rng) {
  config.validate();
  if (config.stage != 1) throw ConfigError("train_stage1 needs a stage-1 config");
  if (pools.blast.empty() || pools.normal.empty()) throw InvariantViolation("both pools must be non-empty");
  Rng split_rng = rng.derive(1);
  Rng bank_rng = rng.derive(2);
  Rng init_rng = rng.derive(3);
  const auto [train_pools, val_pools] = baggen::split_pools(pools, config.holdout_fraction, split_rng);
  const FeatureBank train_bank =
      FeatureBank::build(extractor, train_pools, config.augmentation, config.augment_variants, bank_rng);
  const FeatureBank val_bank = FeatureBank::build(extractor, val_pools, baggen::AugmentationPolicy::none(), 1, bank_rng);
  const auto val_refs = single_cell_refs(val_pools.blast.size(), val_pools.normal.size());
  const auto train_refs = single_cell_refs(train_pools.blast.size(), train_pools.normal.size());

  ModelConfig mc{extractor.dim(), config.activation, config.mask_skip};
  AggregatorClassifier<float> model(mc, init_rng);
  return fit(std::move(model), config, train_bank, val_bank, val_refs, extractor, rng,
             [&](int) { return train_refs; });
}

TrainOutcome train_stage2(const baggen::CellPools& pools, const TrainConfig& config, const Checkpoint* init,
                          const features::FeatureExtractor& extractor, Rng& rng) {
  config.validate();
  if (config.stage != 2) throw ConfigError("train_stage2 needs a stage-2 config");
  if (pools.blast.empty() || pools.normal.empty()) throw InvariantViolation("both pools must be non-empty");
  Rng split_rng = rng.derive(1);
  Rng bank_rng = rng.derive(2);
  Rng init_rng = rng.derive(3);
  Rng val_rng = rng.derive(4);
  Rng epoch_rng = rng.derive(5);

  AggregatorClassifier<float> model;
  if (init != nullptr) {
    if (init->stage != 1) throw ConfigError("stage 2 must start from a stage-1 checkpoint");
    model = model_from_checkpoint(*init, extractor.digest());
    if (model.config().feature_dim != extractor.dim()) throw ConfigError("checkpoint feature size mismatch");
  } else if (config.allow_random_init) {
    model = AggregatorClassifier<float>(ModelConfig{extractor.dim(), config.activation, config.mask_skip}, init_rng);
  } else {
    throw ConfigError("stage 2 needs a stage-1 checkpoint (--init)");
  }

  const auto [train_pools, val_pools] = baggen::split_pools(pools, config.holdout_fraction, split_rng);
  const FeatureBank train_bank =
      FeatureBank::build(extractor, train_pools, config.augmentation, config.augment_variants, bank_rng);
  const FeatureBank val_bank = FeatureBank::build(extractor, val_pools, baggen::AugmentationPolicy::none(), 1, bank_rng);
  const auto val_refs = baggen::draw_epoch(val_pools.blast.size(), val_pools.normal.size(), config.length,
                                           config.validation_sequences, config.balance, config.cell_range, val_rng);
  return fit(std::move(model), config, train_bank, val_bank, val_refs, extractor, rng, [&](int) {
    return baggen::draw_epoch(train_pools.blast.size(), train_pools.normal.size(), config.length,
                              config.sequences_per_epoch, config.balance, config.cell_range, epoch_rng);
  });
}

}  // namespace leukmil::model
