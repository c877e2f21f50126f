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

#include "leukmil/synth/generator.hpp"

#include <cmath>
#include <cstdio>

#include "leukmil/core/error.hpp"
#include "leukmil/core/image_io.hpp"

namespace leukmil::synth {

namespace fs = std::filesystem;

int GeneratedPatient::blast_count() const {
  int n = 0;
  for (const auto& img : images) {
    for (const auto& c : img.cells) n += c.cell_class == CellClass::kBlast;
  }
  return n;
}

namespace {

std::string padded(const char* prefix, int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, value);
  return buf;
}

CellCrop crop_truth(const AnnotatedImage& image, const BoundingBox& box, int index, int crop_size) {
  CellCrop crop;
  crop.crop_id = image.image_id + "#" + std::to_string(index);
  crop.pixels = crop_resize_pad(image.pixels, static_cast<int>(box.x_min), static_cast<int>(box.y_min),
                                static_cast<int>(box.x_max), static_cast<int>(box.y_max), crop_size);
  crop.cell_class = box.cell_class;
  return crop;
}

}  // namespace

GeneratedPatient generate_patient(const SynthConfig& config, Diagnosis diagnosis, int n_images,
                                  const std::string& patient_id, Rng& rng) {
  config.validate();
  if (n_images < 1) throw ConfigError("generate_patient requires n_images >= 1");

  // Decide every cell class before rendering so the >= 1 blast rule can be
  // enforced without re-rendering.
  std::vector<std::vector<CellClass>> classes(n_images);
  int blasts = 0;
  for (auto& image_classes : classes) {
    const auto n_cells = static_cast<int>(rng.uniform_int(config.cells_min, config.cells_max));
    for (int k = 0; k < n_cells; ++k) {
      const bool blast = diagnosis == Diagnosis::kAll && rng.bernoulli(config.blast_fraction);
      image_classes.push_back(blast ? CellClass::kBlast : CellClass::kNormal);
      blasts += blast;
    }
  }
  if (diagnosis == Diagnosis::kAll && blasts == 0) {
    auto& image_classes = classes[static_cast<std::size_t>(rng.uniform_int(0, n_images - 1))];
    image_classes[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(image_classes.size()) - 1))] =
        CellClass::kBlast;
  }

  GeneratedPatient patient;
  patient.bag.patient_id = patient_id;
  patient.bag.diagnosis = diagnosis;
  for (int i = 0; i < n_images; ++i) {
    GeneratedImage generated = render_image(config, classes[i], patient_id + "_" + padded("i", i, 2), rng);
    generated.image.patient_id = patient_id;
    generated.image.diagnosis = diagnosis;
    for (std::size_t k = 0; k < generated.image.boxes.size(); ++k) {
      patient.bag.cells.push_back(
          crop_truth(generated.image, generated.image.boxes[k], static_cast<int>(k), config.crop_size));
    }
    patient.images.push_back(std::move(generated));
  }
  return patient;
}

DatasetManifest generate_corpus(const SynthConfig& config, const CorpusOptions& options, const fs::path& out_dir,
                                Rng& rng) {
  config.validate();
  if (options.n_all + options.n_healthy < 1) throw ConfigError("corpus needs at least one patient");
  if (options.images_min < 1 || options.images_min > options.images_max) {
    throw ConfigError("images per patient range must satisfy 1 <= min <= max");
  }
  fs::create_directories(out_dir / "images");

  const int n_patients = options.n_all + options.n_healthy;
  std::vector<Diagnosis> diagnoses;
  for (int i = 0; i < options.n_all; ++i) diagnoses.push_back(Diagnosis::kAll);
  for (int i = 0; i < options.n_healthy; ++i) diagnoses.push_back(Diagnosis::kHealthy);

  // Stratified patient-level split: round(test_fraction * n) per class,
  // chosen uniformly within the class.
  std::vector<Split> splits(n_patients, Split::kTrain);
  Rng split_rng = rng.derive(0);
  for (Diagnosis d : {Diagnosis::kAll, Diagnosis::kHealthy}) {
    std::vector<int> members;
    for (int i = 0; i < n_patients; ++i) {
      if (diagnoses[i] == d) members.push_back(i);
    }
    split_rng.shuffle(std::span<int>(members));
    const auto n_test = static_cast<std::size_t>(std::lround(options.test_fraction * members.size()));
    for (std::size_t k = 0; k < n_test && k < members.size(); ++k) splits[members[k]] = Split::kTest;
  }

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.synthetic = true;
  for (int p = 0; p < n_patients; ++p) {
    Rng patient_rng = rng.derive(static_cast<std::uint64_t>(p) + 1);
    const auto n_images = static_cast<int>(patient_rng.uniform_int(options.images_min, options.images_max));
    const std::string patient_id = padded("P", p, 4);
    const GeneratedPatient patient = generate_patient(config, diagnoses[p], n_images, patient_id, patient_rng);
    for (const auto& generated : patient.images) {
      ManifestRecord rec;
      rec.image = "images/" + generated.image.image_id + ".png";
      rec.image_id = generated.image.image_id;
      rec.patient_id = patient_id;
      rec.split = splits[p];
      rec.diagnosis = diagnoses[p];
      rec.boxes = generated.image.boxes;
      write_png(generated.image.pixels, (out_dir / rec.image).string());
      manifest.records.push_back(std::move(rec));
    }
  }
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace leukmil::synth
