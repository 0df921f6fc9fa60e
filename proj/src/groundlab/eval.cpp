#include "groundlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace groundlab {

ForwardTrace EvalModel::forward(const Matrix& regions, const Matrix& query_features) const {
  if (residual) {
    bool fb = false;
    ForwardTrace tr = residual_inference(
        stage1 ? *stage1 : params, stage1 ? &params : nullptr,
        prior_text ? &*prior_text : nullptr, regions, query_features, cfg, &fb);
    if (fb) fallback_used = true;
    return tr;
  }
  return forward_plain(params, regions, query_features, cfg);
}

EvalModel eval_model_from_state(const TrainState& state) {
  EvalModel m;
  m.cfg = state.cfg;
  m.params = state.params;
  m.stage1 = state.stage1_params;
  m.prior_text = state.prior_text;
  m.residual = state.stage == 2;
  return m;
}

EvalModel eval_model_from_checkpoint(const Checkpoint& ckpt) {
  return eval_model_from_state(state_from_checkpoint(ckpt));
}

GroundingPrediction ground(const EvalModel& model, const PairRecord& pair) {
  ForwardTrace tr = model.forward(pair.video.region_features, pair.query.object_features);
  GroundingPrediction pred;
  pred.top_region = tr.top_region;
  const int K = static_cast<int>(tr.top_region.rows());
  const int T = static_cast<int>(tr.top_region.cols());
  pred.scores.resize(K, T);
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t)
      pred.scores(k, t) =
          tr.similarity(k, t * model.cfg.regions + tr.top_region(k, t));
  return pred;
}

namespace {

void finalize_report(MetricReport& rep) {
  double macro_box = 0.0, macro_query = 0.0;
  int box_classes = 0, query_classes = 0;
  for (const auto& [cls, c] : rep.per_class) {
    if (c.box_total > 0) {
      macro_box += static_cast<double>(c.box_correct) / c.box_total;
      ++box_classes;
    }
    if (c.query_total > 0) {
      macro_query += static_cast<double>(c.query_correct) / c.query_total;
      ++query_classes;
    }
    rep.box_correct += c.box_correct;
    rep.box_total += c.box_total;
    rep.query_correct += c.query_correct;
    rep.query_total += c.query_total;
  }
  if (rep.box_total == 0)
    throw InvalidArgumentError("metrics: no annotated instances in dataset");
  rep.box_macro = macro_box / box_classes;
  rep.box_micro = static_cast<double>(rep.box_correct) / rep.box_total;
  rep.query_macro = query_classes ? macro_query / query_classes : 0.0;
  rep.query_micro = rep.query_total
                        ? static_cast<double>(rep.query_correct) / rep.query_total
                        : 0.0;
}

}  // namespace

MetricReport compute_metrics(const Predictor& predict, const Dataset& ds,
                             const std::string& variant_tag,
                             const std::string& split_tag, int threads) {
  struct RecordCounts {
    std::map<int, ClassCounts> per_class;
  };
  std::vector<RecordCounts> partial(ds.size());

  parallel_for(ds.size(), threads, [&](int i) {
    const PairRecord& rec = ds.records[i];
    if (!rec.video.latents) return;
    const auto& lat = *rec.video.latents;
    IntMatrix top = predict(rec);
    const int K = static_cast<int>(rec.query.object_ids.size());
    const int T = static_cast<int>(top.cols());

    // gt sets per (k, t)
    std::map<std::pair<int, int>, std::set<int>> gt;
    for (const auto& g : lat.gt_regions) gt[{g[1], g[0]}].insert(g[2]);

    for (int k = 0; k < K; ++k) {
      const int cls = rec.query.object_ids[k];
      int frames_annotated = 0, frames_correct = 0;
      for (int t = 0; t < T; ++t) {
        auto it = gt.find({k, t});
        if (it == gt.end()) continue;
        ++frames_annotated;
        auto& c = partial[i].per_class[cls];
        c.box_total += 1;
        if (it->second.count(top(k, t))) {
          c.box_correct += 1;
          ++frames_correct;
        }
      }
      if (frames_annotated > 0) {
        auto& c = partial[i].per_class[cls];
        c.query_total += 1;
        if (2 * frames_correct > frames_annotated) c.query_correct += 1;
      }
    }
  });

  MetricReport rep;
  rep.variant = variant_tag;
  rep.split = split_tag;
  for (const auto& pc : partial)
    for (const auto& [cls, c] : pc.per_class) {
      auto& agg = rep.per_class[cls];
      agg.box_correct += c.box_correct;
      agg.box_total += c.box_total;
      agg.query_correct += c.query_correct;
      agg.query_total += c.query_total;
    }
  finalize_report(rep);
  return rep;
}

MetricReport evaluate_dataset(const EvalModel& model, const Dataset& ds,
                              const std::string& variant_tag,
                              const std::string& split_tag, int threads) {
  MetricReport rep = compute_metrics(
      [&](const PairRecord& rec) { return ground(model, rec).top_region; }, ds,
      variant_tag, split_tag, threads);
  rep.stage1_fallback = model.fallback_used;
  return rep;
}

MetricReport oracle_prototype_report(const WorldSpec& world, const Dataset& ds,
                                     const std::string& split_tag, int threads) {
  const int N = static_cast<int>(ds.records.empty()
                                     ? 0
                                     : ds.records[0].video.region_features.rows());
  (void)N;
  return compute_metrics(
      [&](const PairRecord& rec) {
        const int K = static_cast<int>(rec.query.object_ids.size());
        const Matrix& feats = rec.video.region_features;
        const int rows = static_cast<int>(feats.rows());
        // infer regions per frame from the latents grid
        const int T = static_cast<int>(rec.video.latents->content_assignment.size());
        const int regions = rows / T;
        IntMatrix top(K, T);
        for (int k = 0; k < K; ++k) {
          Eigen::RowVectorXd proto =
              world.object_prototypes.row(rec.query.object_ids[k]);
          for (int t = 0; t < T; ++t) {
            int best = 0;
            double bv = -2.0;
            for (int n = 0; n < regions; ++n) {
              const auto row = feats.row(t * regions + n);
              double denom = row.norm() * proto.norm();
              double c = denom > 0 ? row.dot(proto) / denom : 0.0;
              if (c > bv) {
                bv = c;
                best = n;
              }
            }
            top(k, t) = best;
          }
        }
        return top;
      },
      ds, "oracle_prototype", split_tag, threads);
}

double rect_iou(double ax1, double ay1, double ax2, double ay2, double bx1,
                double by1, double bx2, double by2) {
  if (ax2 <= ax1 || ay2 <= ay1 || bx2 <= bx1 || by2 <= by1)
    throw InvalidArgumentError("rect_iou: degenerate box");
  const double ix = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double iy = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = ix * iy;
  const double uni = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter;
  return inter / uni;
}

IeDiagnostic ie_diagnostic(const EvalModel& model, const Dataset& ds,
                           const MemoryBanks& banks, int threads) {
  struct Partial {
    double content = 0.0, style = 0.0;
    std::int64_t n = 0;
  };
  std::vector<Partial> partial(ds.size());
  const Config& cfg = model.cfg;
  const int T = cfg.frames, N = cfg.regions;

  parallel_for(ds.size(), threads, [&](int i) {
    const PairRecord& rec = ds.records[i];
    if (!rec.video.latents) return;
    const auto& lat = *rec.video.latents;
    ForwardTrace clean = model.forward(rec.video.region_features,
                                       rec.query.object_features);
    const int K = static_cast<int>(rec.query.object_ids.size());
    for (int k = 0; k < K; ++k) {
      std::vector<int> content_rows;
      for (const auto& g : lat.gt_regions)
        if (g[1] == k) content_rows.push_back(g[0] * N + g[2]);
      std::vector<int> style_rows;
      for (int t = 0; t < T; ++t)
        for (int n = 0; n < N; ++n)
          if (lat.content_assignment[t][n] < 0) style_rows.push_back(t * N + n);
      const int count = static_cast<int>(
          std::min(content_rows.size(), style_rows.size()));
      if (count == 0) continue;

      auto by_score_desc = [&](std::vector<int>& rows) {
        std::stable_sort(rows.begin(), rows.end(), [&](int a, int b) {
          return clean.similarity(k, a) > clean.similarity(k, b);
        });
      };
      by_score_desc(content_rows);
      by_score_desc(style_rows);
      content_rows.resize(count);
      style_rows.resize(count);

      Matrix do_content = replace_rows_with_bank(rec.video.region_features,
                                                 content_rows, banks.region, nullptr);
      Matrix do_style = replace_rows_with_bank(rec.video.region_features, style_rows,
                                               banks.region, nullptr);
      double p_content =
          model.forward(do_content, rec.query.object_features).video_score;
      double p_style = model.forward(do_style, rec.query.object_features).video_score;
      partial[i].content += interventional_effect(clean.video_score, p_content);
      partial[i].style += interventional_effect(clean.video_score, p_style);
      partial[i].n += 1;
    }
  });

  IeDiagnostic out;
  double content = 0.0, style = 0.0;
  for (const auto& p : partial) {
    content += p.content;
    style += p.style;
    out.n_interventions += p.n;
  }
  if (out.n_interventions > 0) {
    out.mean_content_ie = content / static_cast<double>(out.n_interventions);
    out.mean_style_ie = style / static_cast<double>(out.n_interventions);
  }
  return out;
}

std::string metrics_to_csv(const std::vector<MetricReport>& reports) {
  std::ostringstream out;
  out << "variant,split,metric,value\n";
  for (const auto& r : reports) {
    auto row = [&](const char* metric, double v) {
      out << r.variant << "," << r.split << "," << metric << "," << format_g9(v)
          << "\n";
    };
    row("box_macro", r.box_macro);
    row("box_micro", r.box_micro);
    row("query_macro", r.query_macro);
    row("query_micro", r.query_micro);
    if (r.stage1_fallback) row("warning_stage1_fallback", 1.0);
  }
  return out.str();
}

std::string metrics_to_markdown(const std::vector<MetricReport>& reports) {
  std::ostringstream out;
  out << "| variant | split | box macro | box micro | query macro | query micro |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "| %s | %s | %.4f | %.4f | %.4f | %.4f |\n",
                  r.variant.c_str(), r.split.c_str(), r.box_macro, r.box_micro,
                  r.query_macro, r.query_micro);
    out << buf;
  }
  return out.str();
}

std::string per_class_to_csv(const std::vector<MetricReport>& reports) {
  std::ostringstream out;
  out << "variant,split,class_id,box_correct,box_total,query_correct,query_total\n";
  for (const auto& r : reports)
    for (const auto& [cls, c] : r.per_class)
      out << r.variant << "," << r.split << "," << cls << "," << c.box_correct << ","
          << c.box_total << "," << c.query_correct << "," << c.query_total << "\n";
  return out.str();
}

std::string ie_to_csv(const std::vector<std::pair<std::string, IeDiagnostic>>& rows) {
  std::ostringstream out;
  out << "tag,mean_content_ie,mean_style_ie,n_interventions\n";
  for (const auto& [tag, d] : rows)
    out << tag << "," << format_g9(d.mean_content_ie) << ","
        << format_g9(d.mean_style_ie) << "," << d.n_interventions << "\n";
  return out.str();
}

}  // namespace groundlab
