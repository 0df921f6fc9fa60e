#pragma once

#include <map>
#include <string>
#include <vector>

#include "groundlab/eval.hpp"

namespace groundlab {

struct AblationOptions {
  int train_pairs = 256;
  int eval_pairs = 128;
  int threads = 1;
  bool with_ie = false;  // oracle-proxy interventional effects for banked variants
};

struct AblationOutcome {
  std::vector<MetricReport> reports;  // variant-major, split in {test, ood}
  std::vector<std::pair<std::string, IeDiagnostic>> ie;  // "variant/split"
};

// One seed: build iid/ood worlds, generate train + both test sets, train
// every variant from the same data and initialization, evaluate on both
// splits. Deterministic given (cfg, seed).
AblationOutcome run_ablation(const Config& cfg, std::uint64_t seed,
                             const std::vector<Variant>& variants,
                             const AblationOptions& opts);

struct SeedSummary {
  std::uint64_t seed;
  AblationOutcome outcome;
};

std::string ablation_per_seed_csv(const std::vector<SeedSummary>& seeds);
// mean and sample standard deviation across seeds per (variant, split, metric)
std::string ablation_summary_csv(const std::vector<SeedSummary>& seeds);
std::string ablation_summary_markdown(const std::vector<SeedSummary>& seeds);

}  // namespace groundlab
