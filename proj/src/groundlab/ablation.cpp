#include "groundlab/ablation.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace groundlab {

AblationOutcome run_ablation(const Config& cfg, std::uint64_t seed,
                             const std::vector<Variant>& variants,
                             const AblationOptions& opts) {
  cfg.validate();
  RandomStream world_rng(seed, "world");
  WorldSpec world_iid = build_world(cfg, world_rng, WorldMode::kIid);
  WorldSpec world_ood = build_world(cfg, world_rng, WorldMode::kOod);

  Dataset train = generate_dataset(world_iid, cfg, opts.train_pairs,
                                   RandomStream(seed, "data.train"), "train",
                                   opts.threads);
  Dataset test = generate_dataset(world_iid, cfg, opts.eval_pairs,
                                  RandomStream(seed, "data.test"), "test",
                                  opts.threads);
  Dataset ood = generate_dataset(world_ood, cfg, opts.eval_pairs,
                                 RandomStream(seed, "data.ood"), "ood", opts.threads);

  AblationOutcome out;
  for (Variant variant : variants) {
    TrainOptions topts;
    topts.threads = opts.threads;
    TrainState state = train_variant(cfg, variant, train, world_iid.text_prototypes,
                                     seed, topts, nullptr);
    EvalModel model = eval_model_from_state(state);
    const std::string tag = variant_to_string(variant);
    try {
      out.reports.push_back(evaluate_dataset(model, test, tag, "test", opts.threads));
      out.reports.push_back(evaluate_dataset(model, ood, tag, "ood", opts.threads));
    } catch (const std::exception& e) {
      throw NumericError("ablation variant '" + tag + "' failed: " + e.what());
    }
    if (opts.with_ie && state.banks) {
      out.ie.emplace_back(tag + "/test",
                          ie_diagnostic(model, test, *state.banks, opts.threads));
      out.ie.emplace_back(tag + "/ood",
                          ie_diagnostic(model, ood, *state.banks, opts.threads));
    }
  }
  return out;
}

namespace {

struct MetricRow {
  const char* name;
  double MetricReport::*field;
};

constexpr MetricRow kMetricRows[] = {
    {"box_macro", &MetricReport::box_macro},
    {"box_micro", &MetricReport::box_micro},
    {"query_macro", &MetricReport::query_macro},
    {"query_micro", &MetricReport::query_micro},
};

}  // namespace

std::string ablation_per_seed_csv(const std::vector<SeedSummary>& seeds) {
  std::ostringstream out;
  out << "seed,variant,split,metric,value\n";
  for (const auto& s : seeds)
    for (const auto& r : s.outcome.reports)
      for (const auto& m : kMetricRows)
        out << s.seed << "," << r.variant << "," << r.split << "," << m.name << ","
            << format_g9(r.*(m.field)) << "\n";
  return out.str();
}

std::string ablation_summary_csv(const std::vector<SeedSummary>& seeds) {
  // (variant, split, metric) -> values across seeds
  std::map<std::string, std::vector<double>> cells;
  std::vector<std::string> order;
  for (const auto& s : seeds)
    for (const auto& r : s.outcome.reports)
      for (const auto& m : kMetricRows) {
        std::string key = r.variant + "," + r.split + "," + m.name;
        if (!cells.count(key)) order.push_back(key);
        cells[key].push_back(r.*(m.field));
      }
  std::ostringstream out;
  out << "variant,split,metric,mean,std,n_seeds\n";
  for (const auto& key : order) {
    const auto& v = cells[key];
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    out << key << "," << format_g9(mean) << "," << format_g9(sd) << "," << v.size()
        << "\n";
  }
  return out.str();
}

std::string ablation_summary_markdown(const std::vector<SeedSummary>& seeds) {
  std::map<std::string, std::map<std::string, std::pair<double, double>>> table;
  std::vector<std::string> row_order;
  for (const auto& s : seeds)
    for (const auto& r : s.outcome.reports) {
      std::string row = r.variant + " / " + r.split;
      if (!table.count(row)) row_order.push_back(row);
      for (const auto& m : kMetricRows) {
        auto& cell = table[row][m.name];
        cell.first += r.*(m.field);
        cell.second += 1.0;
      }
    }
  std::ostringstream out;
  out << "| variant / split | box macro | box micro | query macro | query micro |\n";
  out << "|---|---|---|---|---|\n";
  for (const auto& row : row_order) {
    out << "| " << row;
    for (const auto& m : kMetricRows) {
      auto& cell = table[row][m.name];
      char buf[32];
      std::snprintf(buf, sizeof(buf), " | %.4f", cell.first / cell.second);
      out << buf;
    }
    out << " |\n";
  }
  return out.str();
}

}  // namespace groundlab
