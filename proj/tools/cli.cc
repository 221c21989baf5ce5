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

#include "cli.h"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "protoscope/checkpoint.h"
#include "protoscope/error.h"
#include "protoscope/explain.h"
#include "protoscope/metrics.h"
#include "protoscope/roi.h"
#include "protoscope/split.h"
#include "protoscope/train.h"

namespace protoscope::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(Trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableFile, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, path.string());
}

// Mirror of a manifest-relative path below `root`.
fs::path MirrorPath(const fs::path& root, const std::string& relative,
                    const char* extension) {
  fs::path rel = fs::path(relative).relative_path();
  rel.replace_extension(extension);
  return root / rel;
}

int ParseClassLabel(const std::string& s) {
  for (int c = 0; c < 2; ++c) {
    if (s == kClassNames[c]) return c;
  }
  throw Error(ErrorCode::kMalformed, "unknown label '" + s + "'");
}

void CheckSession(int session) {
  if (session < 1 || session > 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown session " + std::to_string(session));
  }
}

std::uint64_t ParseSeed(const std::string& text, const char* what) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    if (!text.empty() && text[0] == '-') throw std::invalid_argument(text);
    v = std::stoull(text, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(what) + " must be an unsigned integer");
  }
  return v;
}

BackboneArch ArchFromConfig(const json& j) {
  BackboneArch arch;
  arch.input_size = j.at("input_size").get<int>();
  arch.input_channels = j.value("input_channels", 3);
  for (const json& l : j.at("layers")) {
    arch.layers.push_back({l.at("kernel").get<int>(), l.at("stride").get<int>(),
                           l.at("out_channels").get<int>(),
                           l.value("relu", true)});
  }
  arch.Validate();
  return arch;
}

// ROI image for one manifest row. Images where the ROI cannot be found are
// used whole, with a warning.
RasterImage LoadRoi(const Manifest& manifest, const ManifestRow& row,
                    RoiSource roi, std::ostream& err) {
  RasterImage img = LoadImage(manifest.Resolve(row.image_path));
  if (roi == RoiSource::kNone) return img;
  Mask mask;
  BoundingBox box;
  try {
    if (roi == RoiSource::kHeuristic) {
      SegmentationResult seg = SegmentForeground(img);
      mask = std::move(seg.mask);
      box = seg.bbox;
    } else {
      if (row.mask_path.empty()) {
        throw Error(ErrorCode::kInvalidArgument,
                    row.image_path + ": no mask_path in manifest");
      }
      mask = LoadMask(manifest.Resolve(row.mask_path), img);
      box = TightBoundingBox(mask);
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNoForeground) throw;
    err << "warning: " << row.image_path << ": " << e.what()
        << "; using the full image\n";
    return img;
  }
  return Crop(ApplyMask(img, mask), box.top, box.left, box.height, box.width);
}

// Feature source shared by train, eval, project and features.
struct Pipeline {
  RoiSource roi = RoiSource::kHeuristic;
  Normalization norm;
  std::shared_ptr<const FrozenBackbone> backbone;  // null when external
  fs::path external_dir;
  int input_size = 224;
};

Pipeline MakePipeline(const BackboneSpec& spec, const Normalization& norm,
                      RoiSource roi) {
  Pipeline p;
  p.roi = roi;
  p.norm = norm;
  if (spec.kind == BackboneSpec::Kind::kSeeded) {
    p.backbone = std::make_shared<const FrozenBackbone>(
        FrozenBackbone::Init(spec.seed, spec.arch));
    p.input_size = spec.arch.input_size;
  } else {
    p.external_dir = spec.external_dir;
  }
  return p;
}

struct DataSource {
  std::shared_ptr<std::vector<RasterImage>> rois;
  std::unique_ptr<SampleSet> set;
};

// Samples for manifest rows `rows`, keyed by manifest row index.
DataSource BuildData(const Manifest& manifest,
                     const std::vector<std::size_t>& rows, const Pipeline& pipe,
                     const AugmentPreset& preset, std::uint64_t seed,
                     std::ostream& err) {
  DataSource ds;
  std::vector<int> labels;
  std::vector<std::uint64_t> keys;
  for (std::size_t r : rows) {
    labels.push_back(manifest.rows[r].label);
    keys.push_back(r);
  }
  if (!pipe.backbone) {
    std::vector<FeatureMap> maps;
    for (std::size_t r : rows) {
      maps.push_back(LoadFeatureMap(
          MirrorPath(pipe.external_dir, manifest.rows[r].image_path, ".fmap")));
    }
    ds.set =
        std::make_unique<FeatureMapSet>(std::move(maps), std::move(labels));
    return ds;
  }
  ds.rois = std::make_shared<std::vector<RasterImage>>();
  for (std::size_t r : rows) {
    ds.rois->push_back(LoadRoi(manifest, manifest.rows[r], pipe.roi, err));
  }
  AugmentParams params;
  params.target_size = pipe.input_size;
  params.norm = pipe.norm;
  auto rois = ds.rois;
  ds.set = std::make_unique<ImageSampleSet>(
      [rois](std::size_t i) { return (*rois)[i]; }, std::move(labels),
      std::move(keys), pipe.backbone, preset, params, seed);
  return ds;
}

void CheckDepth(const PrototypeTree& tree, const SampleSet& set) {
  if (set.size() == 0) return;
  const FeatureMap fm = set.Features(0, 0, false);
  if (fm.depth() != tree.feature_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "checkpoint/backbone mismatch: backbone depth " +
                    std::to_string(fm.depth()) + ", tree expects " +
                    std::to_string(tree.feature_dim()));
  }
}

// Rows of the manifest selected by session (all rows when pooled).
std::vector<std::size_t> SessionRows(const Manifest& manifest,
                                     std::optional<int> session) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    if (!session || manifest.rows[i].session == *session) rows.push_back(i);
  }
  return rows;
}

SplitPlan PlanFor(const Manifest& manifest,
                  const std::vector<std::size_t>& rows,
                  std::optional<int> kfold, double test_fraction,
                  std::uint64_t seed) {
  std::vector<SplitSample> samples;
  for (std::size_t r : rows) {
    samples.push_back({manifest.rows[r].label, manifest.rows[r].session});
  }
  return kfold ? KFoldSplit(samples, *kfold, seed)
               : SplitTrainTest(samples, test_fraction, seed);
}

std::vector<std::size_t> Pick(const std::vector<std::size_t>& rows,
                              const std::vector<std::size_t>& positions) {
  std::vector<std::size_t> out;
  for (std::size_t p : positions) out.push_back(rows[p]);
  return out;
}

json MetricsJson(const ClassificationReport& r, std::optional<int> session,
                 double mean_loss) {
  json classes = json::object();
  for (int c = 0; c < r.num_classes; ++c) {
    const BinaryMetrics& m = r.per_class[c];
    classes[kClassNames[c]] = {{"accuracy", m.accuracy},
                               {"precision", m.precision},
                               {"recall", m.recall},
                               {"f1", m.f1},
                               {"degenerate", m.degenerate}};
  }
  return {{"session", session ? json(*session) : json(nullptr)},
          {"samples", r.samples},
          {"accuracy", r.accuracy},
          {"mean_loss", mean_loss},
          {"classes", classes},
          {"macro",
           {{"accuracy", r.accuracy},
            {"precision", r.macro.precision},
            {"recall", r.macro.recall},
            {"f1", r.macro.f1},
            {"degenerate", r.macro.degenerate}}},
          {"confusion",
           {{"positive", kClassNames[r.positive_class]},
            {"tp", r.confusion.tp},
            {"fp", r.confusion.fp},
            {"fn", r.confusion.fn},
            {"tn", r.confusion.tn}}}};
}

std::string TableRow(const ClassificationReport& r,
                     std::optional<int> session) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << (session ? "Session " + std::to_string(*session)
                 : std::string("Pooled"))
     << " (%)  Accuracy " << 100.0 * r.accuracy << "  F1 Score "
     << 100.0 * r.macro.f1 << "  (n=" << r.samples << ")";
  return os.str();
}

BackboneSpec SpecFromConfig(const RunConfig& cfg) {
  BackboneSpec spec;
  if (cfg.external_backbone()) {
    spec.kind = BackboneSpec::Kind::kExternal;
    spec.external_dir = cfg.backbone;
  } else {
    spec.seed = cfg.backbone_seed.value_or(cfg.seed);
    spec.arch = cfg.arch;
  }
  return spec;
}

struct FoldOutcome {
  ClassificationReport report;
};

FoldOutcome TrainOne(const SampleSet& all,
                     const std::vector<std::size_t>& train_pos,
                     const std::vector<std::size_t>& test_pos,
                     const RunConfig& cfg, std::optional<int> fold,
                     const fs::path& out_dir, std::ostream& out) {
  SubsetView train(all, train_pos);
  SubsetView test(all, test_pos);
  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.batch_size = cfg.batch_size;
  tc.epochs = cfg.epochs;
  tc.seed = cfg.seed;
  tc.depth = cfg.depth;
  tc.num_classes = 2;
  TrainResult result = TrainModel(train, test.size() > 0 ? &test : nullptr, tc,
                                  [&out](const EpochRecord& e) {
                                    out << "epoch " << e.epoch << " loss "
                                        << e.train_loss << " train_acc "
                                        << e.train_accuracy;
                                    if (e.test_accuracy)
                                      out << " test_acc " << *e.test_accuracy;
                                    out << "\n";
                                  });

  Checkpoint ckpt{
      result.tree, SpecFromConfig(cfg), cfg.normalization, cfg.preset.id, {}};
  ckpt.training.seed = cfg.seed;
  ckpt.training.session = cfg.pooled ? std::nullopt : cfg.session;
  ckpt.training.test_fraction = cfg.test_fraction;
  ckpt.training.kfold = cfg.kfold;
  ckpt.training.fold = fold;
  ckpt.training.roi = RoiSourceName(cfg.roi);

  fs::create_directories(out_dir);
  SaveCheckpoint(ckpt, out_dir / "checkpoint.json");
  std::ostringstream hist;
  WriteHistoryCsv(hist, result.history);
  WriteFile(out_dir / "history.csv", hist.str());

  FoldOutcome outcome;
  if (test.size() > 0) {
    EvaluationResult ev = EvaluateModel(result.tree, test);
    outcome.report = ev.report;
    WriteFile(
        out_dir / "metrics.json",
        MetricsJson(ev.report, ckpt.training.session, ev.mean_loss).dump(2) +
            "\n");
    out << TableRow(ev.report, ckpt.training.session) << "\n";
  }
  return outcome;
}

int CmdTrain(const fs::path& manifest_path, const RunConfig& cfg,
             std::ostream& out, std::ostream& err) {
  if (!cfg.pooled) {
    if (!cfg.session) {
      throw Error(ErrorCode::kInvalidArgument,
                  "--session is required unless --pooled is given");
    }
    CheckSession(*cfg.session);
  }
  if (cfg.external_backbone() && !cfg.preset.IsDeterministic()) {
    throw Error(ErrorCode::kInvalidArgument,
                "augmentation presets need the seeded backbone");
  }
  const Manifest manifest = LoadManifest(manifest_path);
  const std::vector<std::size_t> rows =
      SessionRows(manifest, cfg.pooled ? std::nullopt : cfg.session);
  for (int c = 0; c < 2; ++c) {
    bool any = false;
    for (std::size_t r : rows) any = any || manifest.rows[r].label == c;
    if (!any) {
      throw Error(
          ErrorCode::kInvalidArgument,
          std::string("empty class after filtering: ") + kClassNames[c]);
    }
  }
  const SplitPlan plan =
      PlanFor(manifest, rows, cfg.kfold, cfg.test_fraction, cfg.seed);
  for (const std::string& w : plan.warnings) err << "warning: " << w << "\n";

  const Pipeline pipe =
      MakePipeline(SpecFromConfig(cfg), cfg.normalization, cfg.roi);
  DataSource data = BuildData(manifest, rows, pipe, cfg.preset, cfg.seed, err);

  if (!cfg.kfold) {
    const auto train_pos = plan.Indices(kTrainGroup);
    const auto test_pos = plan.Indices(kTestGroup);
    out << "train " << train_pos.size() << " / test " << test_pos.size()
        << "\n";
    TrainOne(*data.set, train_pos, test_pos, cfg, std::nullopt, cfg.out, out);
    return kExitOk;
  }

  json folds = json::array();
  double acc_sum = 0.0, acc_sq = 0.0, f1_sum = 0.0, f1_sq = 0.0;
  for (int f = 0; f < *cfg.kfold; ++f) {
    const auto test_pos = plan.Indices(f);
    const auto train_pos = plan.IndicesExcept(f);
    out << "fold " << f << ": train " << train_pos.size() << " / test "
        << test_pos.size() << "\n";
    const FoldOutcome o =
        TrainOne(*data.set, train_pos, test_pos, cfg, f,
                 cfg.out / ("fold_" + std::to_string(f)), out);
    const double acc = o.report.accuracy;
    const double f1 = o.report.macro.f1;
    folds.push_back({{"fold", f},
                     {"samples", o.report.samples},
                     {"accuracy", acc},
                     {"macro_f1", f1}});
    acc_sum += acc;
    acc_sq += acc * acc;
    f1_sum += f1;
    f1_sq += f1 * f1;
  }
  const double k = *cfg.kfold;
  const auto sd = [k](double sum, double sq) {
    return std::sqrt(std::max(0.0, sq / k - (sum / k) * (sum / k)));
  };
  const json aggregate = {
      {"folds", folds},
      {"mean", {{"accuracy", acc_sum / k}, {"macro_f1", f1_sum / k}}},
      {"std",
       {{"accuracy", sd(acc_sum, acc_sq)}, {"macro_f1", sd(f1_sum, f1_sq)}}}};
  WriteFile(cfg.out / "aggregate.json", aggregate.dump(2) + "\n");
  out << std::fixed << std::setprecision(2) << "K-fold mean (%)  Accuracy "
      << 100.0 * acc_sum / k << "  F1 Score " << 100.0 * f1_sum / k << "\n";
  return kExitOk;
}

// Manifest rows a checkpoint was trained or tested on.
std::vector<std::size_t> CheckpointRows(const Manifest& manifest,
                                        const Checkpoint& ckpt,
                                        const std::string& subset, bool all,
                                        std::ostream& err) {
  const TrainingProvenance& t = ckpt.training;
  const std::vector<std::size_t> rows = SessionRows(manifest, t.session);
  if (all) return rows;
  const SplitPlan plan =
      PlanFor(manifest, rows, t.kfold, t.test_fraction, t.seed);
  for (const std::string& w : plan.warnings) err << "warning: " << w << "\n";
  const int test_group = t.kfold ? t.fold.value_or(0) : kTestGroup;
  if (subset == "test") return Pick(rows, plan.Indices(test_group));
  if (t.kfold) return Pick(rows, plan.IndicesExcept(test_group));
  return Pick(rows, plan.Indices(kTrainGroup));
}

BackboneSpec CheckpointBackbone(const Checkpoint& ckpt,
                                const std::optional<std::string>& override) {
  BackboneSpec spec = ckpt.backbone;
  if (override && spec.kind == BackboneSpec::Kind::kExternal) {
    spec.external_dir = *override;
  }
  return spec;
}

int CmdEval(const fs::path& ckpt_path, const fs::path& manifest_path,
            const std::string& subset, bool all,
            const std::optional<std::string>& backbone,
            const std::optional<std::string>& out_path, std::ostream& out,
            std::ostream& err) {
  const Checkpoint ckpt = LoadCheckpoint(ckpt_path);
  const Manifest manifest = LoadManifest(manifest_path);
  const auto rows = CheckpointRows(manifest, ckpt, subset, all, err);
  if (rows.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty " + subset + " set");
  }
  const Pipeline pipe =
      MakePipeline(CheckpointBackbone(ckpt, backbone), ckpt.normalization,
                   ParseRoiSource(ckpt.training.roi));
  DataSource data =
      BuildData(manifest, rows, pipe, PresetFromId(0), ckpt.training.seed, err);
  CheckDepth(ckpt.tree, *data.set);
  const EvaluationResult ev = EvaluateModel(ckpt.tree, *data.set);
  out << TableRow(ev.report, ckpt.training.session) << "\n";
  const std::string text =
      MetricsJson(ev.report, ckpt.training.session, ev.mean_loss).dump(2) +
      "\n";
  if (out_path) {
    WriteFile(*out_path, text);
  } else {
    out << text;
  }
  return kExitOk;
}

int CmdProject(const fs::path& ckpt_path, const fs::path& manifest_path,
               const std::optional<std::string>& backbone,
               const fs::path& out_path, std::ostream& out, std::ostream& err) {
  Checkpoint ckpt = LoadCheckpoint(ckpt_path);
  const Manifest manifest = LoadManifest(manifest_path);
  const auto rows = CheckpointRows(manifest, ckpt, "train", false, err);
  if (rows.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty training set");
  }
  const Pipeline pipe =
      MakePipeline(CheckpointBackbone(ckpt, backbone), ckpt.normalization,
                   ParseRoiSource(ckpt.training.roi));
  DataSource data =
      BuildData(manifest, rows, pipe, PresetFromId(0), ckpt.training.seed, err);
  CheckDepth(ckpt.tree, *data.set);
  std::vector<FeatureMap> maps;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    maps.push_back(data.set->Features(i, 0, false));
    ids.push_back(manifest.rows[rows[i]].image_path);
  }
  ckpt.tree = ProjectPrototypes(ckpt.tree, maps, ids);
  SaveCheckpoint(ckpt, out_path);
  for (std::size_t n = 0; n < ckpt.tree.provenance().size(); ++n) {
    const auto& p = ckpt.tree.provenance()[n];
    if (!p) continue;
    out << "node " << n + 1 << ": " << p->source_id << " (" << p->location.row
        << ", " << p->location.col << ")\n";
  }
  return kExitOk;
}

int CmdExplain(const fs::path& ckpt_path, const fs::path& image_path,
               const fs::path& out_dir, double threshold,
               const std::optional<std::string>& mask_path,
               const std::optional<std::string>& fmap_path, std::ostream& out,
               std::ostream& err) {
  const Checkpoint ckpt = LoadCheckpoint(ckpt_path);
  if (!fs::exists(image_path)) {
    throw Error(ErrorCode::kUnreadableFile,
                image_path.string() + ": no such file");
  }
  Manifest single;
  single.base_dir = image_path.parent_path();
  ManifestRow row;
  row.image_path = image_path.filename().string();
  if (mask_path) row.mask_path = fs::absolute(*mask_path).string();
  const RasterImage roi =
      LoadRoi(single, row, ParseRoiSource(ckpt.training.roi), err);

  FeatureMap fm(1, 1, 1);
  ReceptiveField rf;
  int input_size = 224;
  if (ckpt.backbone.kind == BackboneSpec::Kind::kSeeded) {
    const FrozenBackbone bb =
        FrozenBackbone::Init(ckpt.backbone.seed, ckpt.backbone.arch);
    input_size = bb.arch().input_size;
    fm = bb.Extract(BaseTransform(roi, input_size, ckpt.normalization));
    rf = ReceptiveField::ForArch(bb.arch());
  } else {
    if (!fmap_path) {
      throw Error(ErrorCode::kInvalidArgument,
                  "checkpoint uses external features; pass --fmap");
    }
    fm = LoadFeatureMap(*fmap_path);
    const int stride =
        std::max(1, input_size / std::max(fm.height(), fm.width()));
    rf = {stride, stride, input_size};
  }
  if (fm.depth() != ckpt.tree.feature_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "checkpoint/backbone mismatch: feature depth " +
                    std::to_string(fm.depth()) + ", tree expects " +
                    std::to_string(ckpt.tree.feature_dim()));
  }
  const RasterImage display =
      BaseTransform(roi, input_size, ckpt.normalization).Denormalize();
  const DecisionReport report = DecisionChain(ckpt.tree, fm, threshold);

  fs::create_directories(out_dir);
  SaveImage(display, out_dir / "input.png");
  json overlays = json::array();
  for (const DecisionStep& step : report.steps) {
    const PrototypeHeatmap hm = ComputePrototypeHeatmap(
        ckpt.tree, step.node, fm, rf, display.height(), display.width());
    const std::string name = "node_" + std::to_string(step.node) + ".png";
    SaveImage(RenderOverlay(display, hm), out_dir / name);
    overlays.push_back({{"node", step.node},
                        {"file", name},
                        {"box",
                         {{"top", hm.bbox.top},
                          {"left", hm.bbox.left},
                          {"height", hm.bbox.height},
                          {"width", hm.bbox.width}}}});
  }
  json j = json::parse(DecisionReportJson(report));
  j["image"] = image_path.filename().string();
  j["overlays"] = overlays;
  j["prediction"] = kClassNames[ArgMax(report.soft_distribution)];
  WriteFile(out_dir / "report.json", j.dump(2) + "\n");
  for (const DecisionStep& s : report.steps) {
    out << "node " << s.node << ": " << (s.present ? "Present" : "Absent")
        << " (similarity " << s.similarity << ")\n";
  }
  out << "prediction: " << j["prediction"].get<std::string>() << "\n";
  return kExitOk;
}

int CmdSegment(const fs::path& manifest_path, const fs::path& out_dir,
               std::ostream& out, std::ostream& err) {
  const Manifest manifest = LoadManifest(manifest_path);
  fs::create_directories(out_dir);
  std::ostringstream summary;
  summary << "image_path,status,top,left,height,width,foreground_fraction\n";
  int failed = 0;
  for (const ManifestRow& row : manifest.rows) {
    try {
      const RasterImage img = LoadImage(manifest.Resolve(row.image_path));
      const SegmentationResult seg = SegmentForeground(img);
      const fs::path mask_path = MirrorPath(out_dir, row.image_path, ".png");
      fs::create_directories(mask_path.parent_path());
      SaveMaskPng(seg.mask, mask_path);
      std::ostringstream frac;
      frac << std::setprecision(17) << seg.foreground_fraction;
      summary << row.image_path << ",ok," << seg.bbox.top << ","
              << seg.bbox.left << "," << seg.bbox.height << ","
              << seg.bbox.width << "," << frac.str() << "\n";
    } catch (const Error& e) {
      ++failed;
      const std::string status =
          e.code() == ErrorCode::kNoForeground ? "NoForeground" : "error";
      summary << row.image_path << "," << status << ",,,,,\n";
      err << "warning: " << row.image_path << ": " << e.what() << "\n";
    }
  }
  WriteFile(out_dir / "summary.csv", summary.str());
  out << manifest.rows.size() - failed << " of " << manifest.rows.size()
      << " images segmented\n";
  return failed == 0 ? kExitOk : kExitPartial;
}

int CmdFeatures(const fs::path& manifest_path, const RunConfig& cfg,
                std::ostream& out, std::ostream& err) {
  if (cfg.external_backbone()) {
    throw Error(ErrorCode::kInvalidArgument,
                "features needs the seeded backbone");
  }
  const Manifest manifest = LoadManifest(manifest_path);
  const Pipeline pipe =
      MakePipeline(SpecFromConfig(cfg), cfg.normalization, cfg.roi);
  int failed = 0;
  for (const ManifestRow& row : manifest.rows) {
    try {
      const RasterImage roi = LoadRoi(manifest, row, cfg.roi, err);
      const FeatureMap fm = pipe.backbone->Extract(
          BaseTransform(roi, pipe.input_size, pipe.norm));
      const fs::path path = MirrorPath(cfg.out, row.image_path, ".fmap");
      fs::create_directories(path.parent_path());
      SaveFeatureMap(fm, path);
    } catch (const Error& e) {
      ++failed;
      err << "warning: " << row.image_path << ": " << e.what() << "\n";
    }
  }
  out << manifest.rows.size() - failed << " of " << manifest.rows.size()
      << " feature maps written\n";
  return failed == 0 ? kExitOk : kExitPartial;
}

}  // namespace

Manifest ParseManifest(std::istream& in, const fs::path& base) {
  Manifest m;
  m.base_dir = base;
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kMalformed, "manifest: missing header");
  }
  const std::vector<std::string> header = SplitCsvLine(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!col.emplace(header[i], i).second) {
      throw Error(ErrorCode::kMalformed,
                  "manifest: duplicate column " + header[i]);
    }
  }
  for (const char* required : {"image_path", "label", "session"}) {
    if (!col.count(required)) {
      throw Error(ErrorCode::kMalformed,
                  std::string("manifest: missing column ") + required);
    }
  }
  const bool has_mask = col.count("mask_path") > 0;
  std::set<std::string> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const std::vector<std::string> cells = SplitCsvLine(line);
    const std::string where = "manifest line " + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw Error(
          ErrorCode::kMalformed,
          where + ": expected " + std::to_string(header.size()) + " fields");
    }
    ManifestRow row;
    row.image_path = cells[col["image_path"]];
    if (row.image_path.empty()) {
      throw Error(ErrorCode::kMalformed, where + ": empty image_path");
    }
    try {
      row.label = ParseClassLabel(cells[col["label"]]);
    } catch (const Error&) {
      throw Error(ErrorCode::kMalformed,
                  where + ": unknown label '" + cells[col["label"]] + "'");
    }
    const std::string& session = cells[col["session"]];
    if (session != "1" && session != "2" && session != "3") {
      throw Error(ErrorCode::kMalformed,
                  where + ": unknown session '" + session + "'");
    }
    row.session = session[0] - '0';
    if (has_mask) row.mask_path = cells[col["mask_path"]];
    if (!seen.insert(fs::path(row.image_path).lexically_normal().string())
             .second) {
      throw Error(ErrorCode::kMalformed,
                  where + ": duplicate image path " + row.image_path);
    }
    m.rows.push_back(std::move(row));
  }
  return m;
}

Manifest LoadManifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kUnreadableFile, path.string());
  Manifest m = ParseManifest(in, path.parent_path());
  for (const ManifestRow& row : m.rows) {
    if (!fs::exists(m.Resolve(row.image_path))) {
      throw Error(ErrorCode::kUnreadableFile,
                  row.image_path + ": no such file");
    }
    if (!row.mask_path.empty() && !fs::exists(m.Resolve(row.mask_path))) {
      throw Error(ErrorCode::kUnreadableFile, row.mask_path + ": no such file");
    }
  }
  return m;
}

const char* RoiSourceName(RoiSource roi) {
  switch (roi) {
    case RoiSource::kHeuristic:
      return "heuristic";
    case RoiSource::kMaskFiles:
      return "files";
    case RoiSource::kNone:
      return "none";
  }
  return "none";
}

RoiSource ParseRoiSource(const std::string& name) {
  if (name == "heuristic") return RoiSource::kHeuristic;
  if (name == "files") return RoiSource::kMaskFiles;
  if (name == "none") return RoiSource::kNone;
  throw Error(
      ErrorCode::kInvalidArgument,
      "unknown ROI source '" + name + "' (expected heuristic, files or none)");
}

RunConfig ResolveRunConfig(const FlagOverrides& flags,
                           const std::string& config_json,
                           const char* env_seed) {
  RunConfig cfg;
  if (env_seed != nullptr && *env_seed != '\0') {
    cfg.seed = ParseSeed(env_seed, "PROTOSCOPE_SEED");
  }
  if (!config_json.empty()) {
    json j;
    try {
      j = json::parse(config_json);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string("config: ") + e.what());
    }
    if (!j.is_object()) {
      throw Error(ErrorCode::kInvalidArgument, "config: expected an object");
    }
    static const std::set<std::string> kKeys = {
        "seed",          "session",    "pooled",        "preset",
        "kfold",         "threshold",  "test_fraction", "backbone",
        "backbone_seed", "input_size", "arch",          "normalization",
        "masks",         "out",        "learning_rate", "batch_size",
        "epochs",        "depth"};
    for (const auto& [key, value] : j.items()) {
      if (!kKeys.count(key)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "config: unknown key '" + key + "'");
      }
    }
    try {
      if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
      if (j.contains("session")) cfg.session = j["session"].get<int>();
      if (j.contains("pooled")) cfg.pooled = j["pooled"].get<bool>();
      if (j.contains("preset")) {
        cfg.preset =
            j["preset"].is_array()
                ? PresetFromOps(j["preset"].get<std::vector<std::string>>())
                : PresetFromId(j["preset"].get<int>());
      }
      if (j.contains("kfold")) cfg.kfold = j["kfold"].get<int>();
      if (j.contains("threshold")) cfg.threshold = j["threshold"].get<double>();
      if (j.contains("test_fraction")) {
        cfg.test_fraction = j["test_fraction"].get<double>();
      }
      if (j.contains("backbone")) {
        cfg.backbone = j["backbone"].get<std::string>();
      }
      if (j.contains("backbone_seed")) {
        cfg.backbone_seed = j["backbone_seed"].get<std::uint64_t>();
      }
      if (j.contains("input_size")) {
        cfg.arch = BackboneArch::Default(j["input_size"].get<int>());
      }
      if (j.contains("arch")) cfg.arch = ArchFromConfig(j["arch"]);
      if (j.contains("normalization")) {
        cfg.normalization.mean =
            j["normalization"].at("mean").get<std::array<double, 3>>();
        cfg.normalization.std =
            j["normalization"].at("std").get<std::array<double, 3>>();
      }
      if (j.contains("masks")) {
        cfg.roi = ParseRoiSource(j["masks"].get<std::string>());
      }
      if (j.contains("out")) cfg.out = j["out"].get<std::string>();
      if (j.contains("learning_rate")) {
        cfg.learning_rate = j["learning_rate"].get<double>();
      }
      if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
      if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
      if (j.contains("depth")) cfg.depth = j["depth"].get<int>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string("config: ") + e.what());
    }
  }
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.session) cfg.session = *flags.session;
  if (flags.pooled) cfg.pooled = true;
  if (flags.preset) cfg.preset = PresetFromId(*flags.preset);
  if (flags.kfold) cfg.kfold = *flags.kfold;
  if (flags.threshold) cfg.threshold = *flags.threshold;
  if (flags.backbone) cfg.backbone = *flags.backbone;
  if (flags.masks) cfg.roi = ParseRoiSource(*flags.masks);
  if (flags.out) cfg.out = *flags.out;

  if (cfg.kfold && *cfg.kfold < 2) {
    throw Error(ErrorCode::kInvalidArgument, "--kfold must be at least 2");
  }
  if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "threshold must lie in [0, 1]");
  }
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "test_fraction must lie in (0, 1)");
  }
  if (cfg.backbone.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty backbone");
  }
  if (cfg.session) CheckSession(*cfg.session);
  return cfg;
}

fs::path FmapRelativePath(const std::string& image_path) {
  return MirrorPath(fs::path(), image_path, ".fmap");
}

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Prototype decision trees for fish sex identification",
               "protoscope"};
  app.require_subcommand(1);

  FlagOverrides flags;
  std::string seed_text;
  std::string config_path;
  std::string manifest;
  std::string checkpoint;
  std::string image;
  std::string subset = "test";
  bool all = false;
  std::optional<std::string> mask_file;
  std::optional<std::string> fmap_file;

  const auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_text,
                    "Global seed (default: $PROTOSCOPE_SEED or 0)");
    cmd->add_option("--config", config_path, "JSON run configuration");
  };
  const auto add_out = [&](CLI::App* cmd, bool required) {
    cmd->add_option("--out", flags.out, "Output location")->required(required);
  };
  const auto add_masks = [&](CLI::App* cmd) {
    cmd->add_option("--masks", flags.masks,
                    "ROI source: heuristic, files or none");
  };
  const auto add_backbone = [&](CLI::App* cmd) {
    cmd->add_option("--backbone", flags.backbone,
                    "'seeded' or a directory of FMAP files");
  };

  CLI::App* segment = app.add_subcommand("segment", "Write foreground masks");
  segment->add_option("manifest", manifest)->required();
  add_out(segment, true);

  CLI::App* train = app.add_subcommand("train", "Train a prototype tree");
  train->add_option("manifest", manifest)->required();
  train->add_option("--session", flags.session, "Session 1, 2 or 3");
  train->add_flag("--pooled", flags.pooled, "Train across all sessions");
  train->add_option("--preset", flags.preset, "Augmentation preset 0-5");
  train->add_option("--kfold", flags.kfold, "Stratified K-fold instead of 8:2");
  add_seed(train);
  add_backbone(train);
  add_masks(train);
  add_out(train, false);

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("checkpoint", checkpoint)->required();
  eval->add_option("manifest", manifest)->required();
  eval->add_flag("--all", all, "Evaluate every row of the session");
  eval->add_option("--subset", subset, "test or train")
      ->check(CLI::IsMember({"test", "train"}));
  add_backbone(eval);
  add_out(eval, false);

  CLI::App* explain = app.add_subcommand("explain", "Explain one prediction");
  explain->add_option("checkpoint", checkpoint)->required();
  explain->add_option("image", image)->required();
  explain->add_option("--threshold", flags.threshold, "Present threshold");
  explain->add_option("--mask", mask_file, "Mask PNG for file-based ROIs");
  explain->add_option("--fmap", fmap_file, "FMAP for external backbones");
  add_out(explain, true);

  CLI::App* project = app.add_subcommand("project", "Project prototypes");
  project->add_option("checkpoint", checkpoint)->required();
  project->add_option("manifest", manifest)->required();
  add_backbone(project);
  add_out(project, true);

  CLI::App* features = app.add_subcommand("features", "Export FMAP files");
  features->add_option("manifest", manifest)->required();
  add_seed(features);
  add_masks(features);
  add_out(features, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!seed_text.empty()) flags.seed = ParseSeed(seed_text, "--seed");
    const std::string config_text =
        config_path.empty() ? std::string() : ReadFile(config_path);
    const RunConfig cfg =
        ResolveRunConfig(flags, config_text, std::getenv("PROTOSCOPE_SEED"));
    if (*segment) return CmdSegment(manifest, cfg.out, out, err);
    if (*train) return CmdTrain(manifest, cfg, out, err);
    if (*eval) {
      return CmdEval(checkpoint, manifest, subset, all, flags.backbone,
                     flags.out, out, err);
    }
    if (*explain) {
      return CmdExplain(checkpoint, image, cfg.out, cfg.threshold, mask_file,
                        fmap_file, out, err);
    }
    if (*project) {
      return CmdProject(checkpoint, manifest, flags.backbone, cfg.out, out,
                        err);
    }
    if (*features) return CmdFeatures(manifest, cfg, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace protoscope::cli
