// groundlab command-line tool. Links the C API only.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "groundlab/groundlab.h"

namespace {

// exit codes: 0 success, 2 usage error, 3 numeric abort, 1 anything else
int exit_code_for(grd_status s) {
  switch (s) {
    case GRD_OK: return 0;
    case GRD_ERR_INVALID_ARGUMENT: return 2;
    case GRD_ERR_NUMERIC: return 3;
    default: return 1;
  }
}

struct ConfigHandle {
  grd_config* cfg = nullptr;
  ~ConfigHandle() { grd_config_free(cfg); }
};

int load_config(const std::string& path, const std::string& preset, ConfigHandle& out) {
  grd_status s = path.empty() ? grd_config_preset(preset.c_str(), &out.cfg)
                              : grd_config_load(path.c_str(), &out.cfg);
  if (s != GRD_OK) {
    std::fprintf(stderr, "error: %s\n", grd_last_error());
    return exit_code_for(s);
  }
  return 0;
}

int finish(grd_status s, std::chrono::steady_clock::time_point start) {
  if (s != GRD_OK) {
    std::fprintf(stderr, "error: %s\n", grd_last_error());
    return exit_code_for(s);
  }
  auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
  std::printf("done in %.2fs\n", secs.count());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"groundlab: weakly-supervised grounding lab with causal interventions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(grd_version()));

  std::string config_path, preset = "desk";
  std::string out_dir, data_dir, split = "train", variant = "full", ckpt;
  std::string variants_csv;
  std::uint64_t seed = 7;
  bool have_seed_flag = false;
  long long pairs = 256, train_pairs = 256, eval_pairs = 128;
  int seeds = 5, threads = 0, checkpoint_every = 0;
  bool force = false, plot = false, with_ie = false;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config) {
      cmd->add_option("--config", config_path, "config JSON path");
      cmd->add_option("--preset", preset, "built-in preset when --config is absent")
          ->check(CLI::IsMember({"desk", "paper", "tiny"}))
          ->capture_default_str();
    }
    cmd->add_flag("--force", force, "overwrite non-empty output directories");
    cmd->add_option("--threads", threads,
                    "worker cap (0 = GROUND_LAB_THREADS or hardware)")
        ->capture_default_str();
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset split");
  add_common(gen, true);
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--pairs", pairs, "number of video-sentence pairs")
      ->capture_default_str();
  gen->add_option("--split", split, "split tag")
      ->check(CLI::IsMember({"train", "val", "test", "ood"}))
      ->capture_default_str();
  gen->add_option("--seed", seed, "generation seed")->capture_default_str();

  CLI::App* train = app.add_subcommand("train", "train a model variant");
  add_common(train, true);
  train->add_option("--data", data_dir, "directory with train.jsonl + world.json")
      ->required();
  train->add_option("--variant", variant, "model variant")
      ->check(CLI::IsMember(
          {"baseline", "acl_spatial", "acl_temporal", "acl", "bda", "full"}))
      ->capture_default_str();
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--seed", seed, "training seed (default: config seed)")
      ->each([&](const std::string&) { have_seed_flag = true; });
  train->add_option("--checkpoint-every", checkpoint_every,
                    "periodic checkpoint interval in steps (0 = off)")
      ->capture_default_str();

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, false);
  eval->add_option("--ckpt", ckpt, "checkpoint file")->required();
  eval->add_option("--data", data_dir, "directory with *.jsonl splits")->required();
  eval->add_option("--out", out_dir, "output directory")->required();
  eval->add_flag("--plot", plot, "emit eval.svg with loss/accuracy plots");

  CLI::App* ablate = app.add_subcommand("ablate", "run the ablation grid");
  add_common(ablate, true);
  ablate->add_option("--out", out_dir, "output directory")->required();
  ablate->add_option("--seeds", seeds, "number of consecutive seeds")
      ->capture_default_str();
  ablate->add_option("--variants", variants_csv,
                     "comma-separated variant list (default: all)");
  ablate->add_option("--train-pairs", train_pairs, "training pairs per seed")
      ->capture_default_str();
  ablate->add_option("--eval-pairs", eval_pairs, "eval pairs per split per seed")
      ->capture_default_str();
  ablate->add_flag("--with-ie", with_ie, "also compute interventional-effect tables");

  CLI::App* grads = app.add_subcommand("verify-grads",
                                       "finite-difference gradient verification");
  add_common(grads, true);
  grads->add_option("--seed", seed, "verification seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  auto start = std::chrono::steady_clock::now();

  if (gen->parsed()) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, preset, cfg)) return rc;
    return finish(grd_generate_dataset(cfg.cfg, out_dir.c_str(), pairs, split.c_str(),
                                       seed, force, threads),
                  start);
  }
  if (train->parsed()) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, preset, cfg)) return rc;
    std::uint64_t train_seed = seed;
    if (!have_seed_flag) {
      // default to the config's seed field
      char* json = nullptr;
      if (grd_config_to_json(cfg.cfg, &json) == GRD_OK && json) {
        const char* at = std::strstr(json, "\"seed\":");
        if (at) train_seed = std::strtoull(at + 7, nullptr, 10);
        grd_string_free(json);
      }
    }
    return finish(grd_train(cfg.cfg, data_dir.c_str(), variant.c_str(),
                            out_dir.c_str(), train_seed, force, threads,
                            checkpoint_every),
                  start);
  }
  if (eval->parsed()) {
    return finish(grd_evaluate(ckpt.c_str(), data_dir.c_str(), out_dir.c_str(), force,
                               plot, threads),
                  start);
  }
  if (ablate->parsed()) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, preset, cfg)) return rc;
    return finish(grd_ablate(cfg.cfg, out_dir.c_str(), seeds,
                             variants_csv.empty() ? nullptr : variants_csv.c_str(),
                             train_pairs, eval_pairs, with_ie, force, threads),
                  start);
  }
  if (grads->parsed()) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, preset, cfg)) return rc;
    char* report = nullptr;
    grd_status s = grd_verify_gradients(cfg.cfg, seed, &report);
    if (s == GRD_OK && report) {
      std::printf("%s\n", report);
      grd_string_free(report);
    }
    return finish(s, start);
  }
  return 2;
}
