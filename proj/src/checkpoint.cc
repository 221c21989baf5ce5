/*
 * Copyright 2026 The Protoscope Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "protoscope/checkpoint.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "protoscope/error.h"

namespace protoscope {
namespace {

using nlohmann::json;

json ArchToJson(const BackboneArch& arch) {
  json layers = json::array();
  for (const ConvLayerSpec& l : arch.layers) {
    layers.push_back({{"kernel", l.kernel},
                      {"stride", l.stride},
                      {"out_channels", l.out_channels},
                      {"relu", l.relu}});
  }
  return {{"input_size", arch.input_size},
          {"input_channels", arch.input_channels},
          {"layers", layers}};
}

BackboneArch ArchFromJson(const json& j) {
  BackboneArch arch;
  arch.input_size = j.at("input_size").get<int>();
  arch.input_channels = j.at("input_channels").get<int>();
  for (const json& l : j.at("layers")) {
    arch.layers.push_back({l.at("kernel").get<int>(), l.at("stride").get<int>(),
                           l.at("out_channels").get<int>(),
                           l.at("relu").get<bool>()});
  }
  arch.Validate();
  return arch;
}

std::vector<double> FiniteRow(const json& row, std::size_t expected,
                              const char* what) {
  if (!row.is_array() || row.size() != expected) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + " row length");
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const json& v : row) {
    if (!v.is_number()) throw Error(ErrorCode::kMalformed, what);
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw Error(ErrorCode::kNonFinite, what);
    out.push_back(d);
  }
  return out;
}

}  // namespace

std::string SerializeCheckpoint(const Checkpoint& ckpt) {
  const PrototypeTree& tree = ckpt.tree;
  json j;
  j["format"] = "protoscope-checkpoint";
  j["version"] = kCheckpointVersion;
  j["depth"] = tree.depth();
  j["feature_dim"] = tree.feature_dim();
  j["num_classes"] = tree.num_classes();
  json protos = json::array();
  for (int n = 1; n <= tree.num_internal(); ++n) {
    const auto p = tree.prototype(n);
    protos.push_back(std::vector<double>(p.begin(), p.end()));
  }
  j["prototypes"] = protos;
  json logits = json::array();
  for (int l = 0; l < tree.num_leaves(); ++l) {
    const auto c = tree.leaf_logits(l);
    logits.push_back(std::vector<double>(c.begin(), c.end()));
  }
  j["leaf_logits"] = logits;

  json backbone;
  if (ckpt.backbone.kind == BackboneSpec::Kind::kSeeded) {
    backbone["kind"] = "seeded";
  } else {
    backbone["kind"] = "external";
    backbone["dir"] = ckpt.backbone.external_dir;
  }
  backbone["seed"] = ckpt.backbone.seed;
  backbone["arch"] = ArchToJson(ckpt.backbone.arch);
  j["backbone"] = backbone;
  j["normalization"] = {{"mean", ckpt.normalization.mean},
                        {"std", ckpt.normalization.std}};
  j["preset"] = ckpt.preset;

  json projection = nullptr;
  if (!tree.provenance().empty()) {
    projection = json::array();
    for (int n = 1; n <= tree.num_internal(); ++n) {
      const auto& p = tree.provenance()[n - 1];
      if (!p) {
        projection.push_back(nullptr);
        continue;
      }
      projection.push_back({{"node", n},
                            {"map_index", p->map_index},
                            {"source_id", p->source_id},
                            {"row", p->location.row},
                            {"col", p->location.col}});
    }
  }
  j["projection"] = projection;

  const TrainingProvenance& t = ckpt.training;
  json training;
  training["seed"] = t.seed;
  training["session"] = t.session ? json(*t.session) : json(nullptr);
  training["test_fraction"] = t.test_fraction;
  training["kfold"] = t.kfold ? json(*t.kfold) : json(nullptr);
  training["fold"] = t.fold ? json(*t.fold) : json(nullptr);
  training["roi"] = t.roi;
  j["training"] = training;
  return j.dump(2) + "\n";
}

Checkpoint DeserializeCheckpoint(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformed, e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != "protoscope-checkpoint") {
      throw Error(ErrorCode::kMalformed, "not a protoscope checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw Error(ErrorCode::kVersionMismatch,
                  "checkpoint version " + std::to_string(version));
    }
    const int depth = j.at("depth").get<int>();
    const int dim = j.at("feature_dim").get<int>();
    const int classes = j.at("num_classes").get<int>();
    Checkpoint ckpt;
    ckpt.tree = PrototypeTree(depth, dim, classes);
    PrototypeTree& tree = ckpt.tree;
    const json& protos = j.at("prototypes");
    const json& logits = j.at("leaf_logits");
    if (!protos.is_array() ||
        protos.size() != static_cast<std::size_t>(tree.num_internal()) ||
        !logits.is_array() ||
        logits.size() != static_cast<std::size_t>(tree.num_leaves())) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "array sizes disagree with depth " + std::to_string(depth));
    }
    for (int n = 1; n <= tree.num_internal(); ++n) {
      const std::vector<double> row =
          FiniteRow(protos[n - 1], dim, "prototype");
      std::copy(row.begin(), row.end(), tree.prototype(n).begin());
    }
    for (int l = 0; l < tree.num_leaves(); ++l) {
      const std::vector<double> row =
          FiniteRow(logits[l], classes, "leaf_logits");
      std::copy(row.begin(), row.end(), tree.leaf_logits(l).begin());
    }

    const json& backbone = j.at("backbone");
    const std::string kind = backbone.at("kind").get<std::string>();
    if (kind == "seeded") {
      ckpt.backbone.kind = BackboneSpec::Kind::kSeeded;
    } else if (kind == "external") {
      ckpt.backbone.kind = BackboneSpec::Kind::kExternal;
      ckpt.backbone.external_dir = backbone.at("dir").get<std::string>();
    } else {
      throw Error(ErrorCode::kMalformed, "backbone kind " + kind);
    }
    ckpt.backbone.seed = backbone.at("seed").get<std::uint64_t>();
    ckpt.backbone.arch = ArchFromJson(backbone.at("arch"));

    const json& norm = j.at("normalization");
    ckpt.normalization.mean = norm.at("mean").get<std::array<double, 3>>();
    ckpt.normalization.std = norm.at("std").get<std::array<double, 3>>();
    ckpt.preset = j.at("preset").get<int>();

    const json& projection = j.at("projection");
    if (!projection.is_null()) {
      if (!projection.is_array() ||
          projection.size() != static_cast<std::size_t>(tree.num_internal())) {
        throw Error(ErrorCode::kDimensionMismatch, "projection length");
      }
      for (int n = 1; n <= tree.num_internal(); ++n) {
        const json& p = projection[n - 1];
        if (p.is_null()) {
          tree.set_provenance(n, std::nullopt);
          continue;
        }
        if (p.at("node").get<int>() != n) {
          throw Error(ErrorCode::kMalformed, "projection node order");
        }
        Provenance prov;
        prov.map_index = p.at("map_index").get<std::size_t>();
        prov.source_id = p.at("source_id").get<std::string>();
        prov.location = {p.at("row").get<int>(), p.at("col").get<int>()};
        tree.set_provenance(n, std::move(prov));
      }
    }

    if (j.contains("training")) {
      const json& t = j.at("training");
      ckpt.training.seed = t.at("seed").get<std::uint64_t>();
      if (!t.at("session").is_null()) {
        ckpt.training.session = t.at("session").get<int>();
      }
      ckpt.training.test_fraction = t.at("test_fraction").get<double>();
      if (!t.at("kfold").is_null())
        ckpt.training.kfold = t.at("kfold").get<int>();
      if (!t.at("fold").is_null()) ckpt.training.fold = t.at("fold").get<int>();
      ckpt.training.roi = t.at("roi").get<std::string>();
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformed, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument) {
      throw Error(ErrorCode::kMalformed, e.what());
    }
    throw;
  }
}

void SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << SerializeCheckpoint(ckpt);
  if (!out) throw Error(ErrorCode::kIoError, path.string());
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableFile, path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return DeserializeCheckpoint(text.str());
}

void SaveTree(const PrototypeTree& tree, const std::filesystem::path& path) {
  Checkpoint ckpt;
  ckpt.tree = tree;
  SaveCheckpoint(ckpt, path);
}

PrototypeTree LoadTree(const std::filesystem::path& path) {
  return LoadCheckpoint(path).tree;
}

}  // namespace protoscope
