#pragma once

#include <string>
#include <vector>

#include "groundlab/ablation.hpp"
#include "groundlab/config.hpp"
#include "groundlab/trainer.hpp"

namespace groundlab {

// Command implementations behind the CLI and the C API. Every command is
// deterministic given its flags: rerunning with --force reproduces the
// output files byte for byte.

// Writes <split>.jsonl, world.json and manifest.json into out_dir.
void cmd_gen_data(const Config& cfg, const std::string& out_dir, int pairs,
                  const std::string& split, std::uint64_t seed, bool force,
                  int threads);

// Trains `variant` on out of data_dir/train.jsonl; writes checkpoint_final.bin,
// loss_curve.csv and manifest.json (plus periodic checkpoints when enabled).
void cmd_train(const Config& cfg, const std::string& data_dir,
               const std::string& variant, const std::string& out_dir,
               std::uint64_t seed, bool force, int threads, int checkpoint_every);

// Evaluates a checkpoint against every *.jsonl in data_dir; writes
// metrics.csv/.md, per_class.csv, ie_diagnostics.csv when applicable, and an
// SVG when plot is set.
void cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
              const std::string& out_dir, bool force, bool plot, int threads);

// Runs the ablation grid over `n_seeds` consecutive seeds starting at
// cfg.seed; writes per-seed and mean/std tables.
void cmd_ablate(const Config& cfg, const std::string& out_dir, int n_seeds,
                const std::vector<Variant>& variants, int train_pairs,
                int eval_pairs, bool with_ie, bool force, int threads);

// Gradient verification on the given config; returns the JSON report.
std::string cmd_verify_gradients(const Config& cfg, std::uint64_t seed);

}  // namespace groundlab
