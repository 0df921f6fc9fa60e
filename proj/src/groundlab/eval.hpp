#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "groundlab/acl.hpp"
#include "groundlab/data.hpp"
#include "groundlab/trainer.hpp"
#include "groundlab/world.hpp"

namespace groundlab {

// Evaluation-time model: plain forward for stage-1 checkpoints, residual
// combination for stage-2 checkpoints (with a flagged fallback when the
// stage-1 copy is missing).
struct EvalModel {
  Config cfg;
  ModelParams params;
  std::optional<ModelParams> stage1;
  std::optional<Vector> prior_text;
  bool residual = false;
  mutable bool fallback_used = false;

  ForwardTrace forward(const Matrix& regions, const Matrix& query_features) const;
};

EvalModel eval_model_from_state(const TrainState& state);
EvalModel eval_model_from_checkpoint(const Checkpoint& ckpt);

// Top-1 region per (object, frame).
struct GroundingPrediction {
  IntMatrix top_region;  // K x T
  Matrix scores;         // K x T, similarity of the selected region
};

GroundingPrediction ground(const EvalModel& model, const PairRecord& pair);

struct ClassCounts {
  std::int64_t box_correct = 0, box_total = 0;
  std::int64_t query_correct = 0, query_total = 0;
};

struct MetricReport {
  std::string variant;
  std::string split;
  double box_macro = 0.0, box_micro = 0.0;
  double query_macro = 0.0, query_micro = 0.0;
  std::map<int, ClassCounts> per_class;
  std::int64_t box_correct = 0, box_total = 0;
  std::int64_t query_correct = 0, query_total = 0;
  bool stage1_fallback = false;
};

using Predictor = std::function<IntMatrix(const PairRecord&)>;

// Box instance: every (record, object, frame) with ground truth; correct iff
// the predicted index is one of the true content regions. Query instance:
// (record, object); correct iff strictly more than half of its annotated
// frames are correct. Macro averages per-class ratios, micro pools counts.
MetricReport compute_metrics(const Predictor& predict, const Dataset& ds,
                             const std::string& variant_tag,
                             const std::string& split_tag, int threads = 1);

MetricReport evaluate_dataset(const EvalModel& model, const Dataset& ds,
                              const std::string& variant_tag,
                              const std::string& split_tag, int threads = 1);

// Benchmark diagnostic: grounds by raw-feature cosine against the true
// object prototypes, no learning involved.
MetricReport oracle_prototype_report(const WorldSpec& world, const Dataset& ds,
                                     const std::string& split_tag, int threads = 1);

// Rectangle IoU for externally annotated data; boxes are (x1, y1, x2, y2)
// with x2 > x1 and y2 > y1.
double rect_iou(double ax1, double ay1, double ax2, double ay2, double bx1,
                double by1, double bx2, double by2);

struct IeDiagnostic {
  double mean_content_ie = 0.0;
  double mean_style_ie = 0.0;
  std::int64_t n_interventions = 0;
};

// Interventional effects with oracle proxies: the true content regions of
// each described object versus equally many of the highest-scoring style
// regions, both replaced through the region bank.
IeDiagnostic ie_diagnostic(const EvalModel& model, const Dataset& ds,
                           const MemoryBanks& banks, int threads = 1);

// ---- report serialization ----

std::string metrics_to_csv(const std::vector<MetricReport>& reports);
std::string metrics_to_markdown(const std::vector<MetricReport>& reports);
std::string per_class_to_csv(const std::vector<MetricReport>& reports);
std::string ie_to_csv(const std::vector<std::pair<std::string, IeDiagnostic>>& rows);

}  // namespace groundlab
