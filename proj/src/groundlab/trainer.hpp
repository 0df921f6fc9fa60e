#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "groundlab/acl.hpp"
#include "groundlab/bda.hpp"
#include "groundlab/checkpoint.hpp"
#include "groundlab/config.hpp"
#include "groundlab/data.hpp"
#include "groundlab/mil.hpp"
#include "groundlab/model.hpp"

namespace groundlab {

enum class Variant { kBaseline, kAclSpatial, kAclTemporal, kAcl, kBda, kFull };

Variant variant_from_string(const std::string& s);
std::string variant_to_string(Variant v);
const std::vector<Variant>& all_variants();

bool variant_uses_spatial_acl(Variant v);
bool variant_uses_temporal_acl(Variant v);
bool variant_two_stage(Variant v);  // backdoor-adjusted second stage

struct AdamState {
  std::vector<std::pair<std::string, Matrix>> m;  // first moments, registry order
  std::vector<std::pair<std::string, Matrix>> v;  // second moments
  std::int64_t t = 0;

  static AdamState like(const ModelParams& p);
};

struct TrainState {
  Config cfg;
  Variant variant = Variant::kBaseline;
  std::uint64_t seed = 0;
  int stage = 1;
  std::int64_t step = 0;  // global step counter across stages

  ModelParams params;
  std::optional<ModelParams> stage1_params;  // frozen at the stage boundary
  std::optional<MemoryBanks> banks;
  std::optional<Vector> prior;
  std::optional<Vector> prior_text;  // prior-weighted mean raw text prototype
  AdamState opt;

  bool uses_acl() const {
    return variant_uses_spatial_acl(variant) || variant_uses_temporal_acl(variant);
  }
};

struct StepPlan {
  std::vector<int> batch;                     // record indices
  std::vector<NegativeAssignment> negatives;  // per batch position
};

StepPlan plan_step(const Dataset& ds, const Config& cfg, std::uint64_t seed,
                   std::int64_t step);

struct LossResult {
  double loss = 0.0;
  ModelParams grads;            // zero-shaped unless want_grads
  AclAssignments assignments;   // bank assignments gathered this step
  std::vector<std::int32_t> signature;  // discrete choices, when requested
};

// Batch-mean loss of the state's current stage. Stage 2 runs every forward
// through the shared additive shift recomputed from the current text
// embedding, so its gradient includes that path. Gradients are reduced in
// batch order regardless of thread count.
LossResult compute_loss(const TrainState& state, const Dataset& ds,
                        const StepPlan& plan, bool want_grads, bool want_signature,
                        int threads);

struct TrainLogEntry {
  int stage;
  std::int64_t step;
  double loss;
};

struct TrainOptions {
  int threads = 1;
  int checkpoint_every = 0;   // 0 disables periodic checkpoints
  std::string out_dir;        // required when checkpoint_every > 0
};

// AdamW step (decoupled weight decay, constant learning rate).
void adamw_step(ModelParams& params, const ModelParams& grads, AdamState& opt,
                double lr, double weight_decay);

// Runs one stage: sample batch, compute loss/gradients, update parameters,
// then update banks. Aborts with NumericError (after dumping diagnostics
// into out_dir when set) if the loss or a gradient goes non-finite.
void run_training_stage(TrainState& state, const Dataset& ds, int steps,
                        const TrainOptions& opts, std::vector<TrainLogEntry>& log);

// Full schedule for a variant: stage 1, and for backdoor-adjusted variants a
// second stage initialized from the stage-1 parameters with fresh optimizer
// moments. text_prototypes supply the vocabulary-wide raw text features the
// shift is built from.
TrainState train_variant(const Config& cfg, Variant variant, const Dataset& train,
                         const Matrix& text_prototypes, std::uint64_t seed,
                         const TrainOptions& opts, std::vector<TrainLogEntry>* log);

Checkpoint state_to_checkpoint(const TrainState& state);
TrainState state_from_checkpoint(const Checkpoint& ckpt);

void save_loss_curve(const std::vector<TrainLogEntry>& log, const std::string& path);

// ---- gradient verification ----

struct GradCheckStageReport {
  std::int64_t coords_total = 0;
  std::int64_t coords_kink_excluded = 0;
  std::int64_t coords_checked = 0;
  std::int64_t coords_passed = 0;
  double max_rel_error = 0.0;
  double pass_fraction = 1.0;
};

struct GradCheckReport {
  GradCheckStageReport stage1;
  GradCheckStageReport stage2;
  std::string to_json() const;
};

// Central finite differences (h = 1e-5) against the analytic gradients on a
// freshly generated instance of `cfg`. Coordinates whose perturbation flips
// any recorded discrete selection are excluded as kinks, not failed.
GradCheckReport verify_gradients(const Config& cfg, std::uint64_t seed);

}  // namespace groundlab
