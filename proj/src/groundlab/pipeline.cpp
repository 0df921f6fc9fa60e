#include "groundlab/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "groundlab/eval.hpp"
#include "groundlab/runio.hpp"
#include "groundlab/world.hpp"

namespace groundlab {

namespace fs = std::filesystem;

namespace {

void check_world_matches_config(const WorldSpec& world, const Config& cfg) {
  if (world.vocab_size != cfg.vocab_size ||
      world.object_prototypes.cols() != cfg.raw_region_dim ||
      world.text_prototypes.cols() != cfg.raw_text_dim)
    throw SchemaError("data directory world does not match the config shapes");
}

std::string dataset_object_frequency_json(const Dataset& ds, int vocab_size) {
  std::vector<double> counts(vocab_size, 0.0);
  double total = 0.0;
  for (const auto& rec : ds.records)
    for (int id : rec.query.object_ids) {
      counts[id] += 1.0;
      total += 1.0;
    }
  std::ostringstream out;
  out << "[";
  for (int i = 0; i < vocab_size; ++i) {
    if (i) out << ",";
    out << format_g9(total > 0 ? counts[i] / total : 0.0);
  }
  out << "]";
  return out.str();
}

// Minimal hand-rolled SVG: loss polyline(s) on the left, accuracy bars on
// the right. Deterministic output.
std::string make_eval_svg(const std::vector<TrainLogEntry>& curve,
                          const std::vector<MetricReport>& reports) {
  const int w = 900, h = 360, pad = 45;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  svg << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";

  const int plot_w = w / 2 - 2 * pad;
  if (!curve.empty()) {
    double lo = curve[0].loss, hi = curve[0].loss;
    for (const auto& e : curve) {
      lo = std::min(lo, e.loss);
      hi = std::max(hi, e.loss);
    }
    if (hi <= lo) hi = lo + 1.0;
    svg << "<text x=\"" << pad << "\" y=\"20\" font-size=\"13\">training loss</text>\n";
    svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < curve.size(); ++i) {
      double x = pad + plot_w * (curve.size() > 1
                                     ? static_cast<double>(i) / (curve.size() - 1)
                                     : 0.0);
      double y = (h - pad) - (h - 2.0 * pad) * (curve[i].loss - lo) / (hi - lo);
      svg << format_g9(x) << "," << format_g9(y) << " ";
    }
    svg << "\"/>\n";
  }

  if (!reports.empty()) {
    const int x0 = w / 2 + pad;
    const int bar_zone = w - pad - x0;
    const int n = static_cast<int>(reports.size());
    const double bw = std::min(40.0, bar_zone / (2.0 * n));
    svg << "<text x=\"" << x0 << "\" y=\"20\" font-size=\"13\">box micro-accuracy</text>\n";
    for (int i = 0; i < n; ++i) {
      double v = reports[i].box_micro;
      double bh = (h - 2.0 * pad) * v;
      double x = x0 + i * 2.0 * bw;
      svg << "<rect x=\"" << format_g9(x) << "\" y=\"" << format_g9(h - pad - bh)
          << "\" width=\"" << format_g9(bw) << "\" height=\"" << format_g9(bh)
          << "\" fill=\"#ff7f0e\"/>\n";
      svg << "<text x=\"" << format_g9(x) << "\" y=\"" << h - pad + 16
          << "\" font-size=\"11\">" << reports[i].split << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

void cmd_gen_data(const Config& cfg, const std::string& out_dir, int pairs,
                  const std::string& split, std::uint64_t seed, bool force,
                  int threads) {
  cfg.validate();
  if (split != "train" && split != "val" && split != "test" && split != "ood")
    throw InvalidArgumentError("gen-data: split must be one of train/val/test/ood");
  if (pairs < 1) throw InvalidArgumentError("gen-data: --pairs must be >= 1");
  threads = resolve_thread_count(threads);

  prepare_output_dir(out_dir, force);
  const WorldMode mode = split == "ood" ? WorldMode::kOod : WorldMode::kIid;
  WorldSpec world = build_world(cfg, RandomStream(seed, "world"), mode);
  Dataset ds = generate_dataset(world, cfg, pairs, RandomStream(seed, "data." + split),
                                split, threads);

  save_dataset(ds, cfg, out_dir + "/" + split + ".jsonl");
  // world manifest plus per-object frequencies for quick inspection
  std::ostringstream worldfile;
  worldfile << "{\"world\":" << world_to_json(world)
            << ",\"object_frequency\":" << dataset_object_frequency_json(ds, cfg.vocab_size)
            << "}\n";
  write_text_file(out_dir + "/world.json", worldfile.str());

  RunManifest manifest;
  manifest.command = "gen-data";
  manifest.config = cfg;
  manifest.seed = seed;
  manifest.outputs = {split + ".jsonl", "world.json"};
  write_run_manifest(manifest, out_dir);
}

namespace {

WorldSpec load_world_file(const std::string& dir) {
  // world.json wraps the world spec alongside summary stats
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(dir + "/world.json"));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("world.json: ") + e.what());
  }
  return world_from_json(j.at("world").dump());
}

}  // namespace

void cmd_train(const Config& cfg, const std::string& data_dir,
               const std::string& variant_name, const std::string& out_dir,
               std::uint64_t seed, bool force, int threads, int checkpoint_every) {
  cfg.validate();
  threads = resolve_thread_count(threads);
  Variant variant = variant_from_string(variant_name);

  Dataset train = load_dataset(data_dir + "/train.jsonl", cfg);
  WorldSpec world = load_world_file(data_dir);
  check_world_matches_config(world, cfg);

  prepare_output_dir(out_dir, force);
  TrainOptions opts;
  opts.threads = threads;
  opts.checkpoint_every = checkpoint_every;
  opts.out_dir = out_dir;

  std::vector<TrainLogEntry> log;
  TrainState state =
      train_variant(cfg, variant, train, world.text_prototypes, seed, opts, &log);

  save_checkpoint(state_to_checkpoint(state), out_dir + "/checkpoint_final.bin");
  save_loss_curve(log, out_dir + "/loss_curve.csv");

  RunManifest manifest;
  manifest.command = "train";
  manifest.config = cfg;
  manifest.seed = seed;
  manifest.inputs = {data_dir + "/train.jsonl"};
  manifest.outputs = {"checkpoint_final.bin", "loss_curve.csv"};
  write_run_manifest(manifest, out_dir);
}

void cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
              const std::string& out_dir, bool force, bool plot, int threads) {
  threads = resolve_thread_count(threads);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  TrainState state = state_from_checkpoint(ckpt);
  EvalModel model = eval_model_from_state(state);

  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(data_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("eval: no .jsonl datasets in " + data_dir);

  prepare_output_dir(out_dir, force);

  std::vector<MetricReport> reports;
  std::vector<std::pair<std::string, IeDiagnostic>> ie_rows;
  for (const auto& file : files) {
    Dataset ds = load_dataset(file, ckpt.config);
    std::string split = fs::path(file).stem().string();
    reports.push_back(
        evaluate_dataset(model, ds, ckpt.variant, split, threads));
    if (state.banks) {
      bool has_latents = !ds.records.empty() && ds.records[0].video.latents.has_value();
      if (has_latents)
        ie_rows.emplace_back(ckpt.variant + "/" + split,
                             ie_diagnostic(model, ds, *state.banks, threads));
    }
  }

  write_text_file(out_dir + "/metrics.csv", metrics_to_csv(reports));
  write_text_file(out_dir + "/metrics.md", metrics_to_markdown(reports));
  write_text_file(out_dir + "/per_class.csv", per_class_to_csv(reports));
  if (!ie_rows.empty())
    write_text_file(out_dir + "/ie_diagnostics.csv", ie_to_csv(ie_rows));

  std::vector<std::string> outputs = {"metrics.csv", "metrics.md", "per_class.csv"};
  if (!ie_rows.empty()) outputs.push_back("ie_diagnostics.csv");

  if (plot) {
    std::vector<TrainLogEntry> curve;
    fs::path curve_path = fs::path(ckpt_path).parent_path() / "loss_curve.csv";
    if (fs::exists(curve_path)) {
      std::istringstream in(read_text_file(curve_path.string()));
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        TrainLogEntry e{};
        if (std::sscanf(line.c_str(), "%d,%lld,%lf", &e.stage,
                        reinterpret_cast<long long*>(&e.step), &e.loss) == 3)
          curve.push_back(e);
      }
    }
    write_text_file(out_dir + "/eval.svg", make_eval_svg(curve, reports));
    outputs.push_back("eval.svg");
  }

  RunManifest manifest;
  manifest.command = "eval";
  manifest.config = ckpt.config;
  manifest.seed = ckpt.config.seed;
  manifest.inputs = {ckpt_path, data_dir};
  manifest.outputs = outputs;
  write_run_manifest(manifest, out_dir);
}

void cmd_ablate(const Config& cfg, const std::string& out_dir, int n_seeds,
                const std::vector<Variant>& variants, int train_pairs,
                int eval_pairs, bool with_ie, bool force, int threads) {
  cfg.validate();
  if (n_seeds < 1) throw InvalidArgumentError("ablate: --seeds must be >= 1");
  threads = resolve_thread_count(threads);
  prepare_output_dir(out_dir, force);

  AblationOptions opts;
  opts.train_pairs = train_pairs;
  opts.eval_pairs = eval_pairs;
  opts.threads = threads;
  opts.with_ie = with_ie;

  std::vector<SeedSummary> seeds;
  std::vector<std::pair<std::string, IeDiagnostic>> ie_rows;
  for (int i = 0; i < n_seeds; ++i) {
    std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
    SeedSummary s{seed, run_ablation(cfg, seed, variants, opts)};
    for (const auto& [tag, d] : s.outcome.ie)
      ie_rows.emplace_back("seed" + std::to_string(seed) + "/" + tag, d);
    seeds.push_back(std::move(s));
  }

  write_text_file(out_dir + "/ablation_per_seed.csv", ablation_per_seed_csv(seeds));
  write_text_file(out_dir + "/ablation_summary.csv", ablation_summary_csv(seeds));
  write_text_file(out_dir + "/ablation_summary.md", ablation_summary_markdown(seeds));
  if (!ie_rows.empty())
    write_text_file(out_dir + "/ie_diagnostics.csv", ie_to_csv(ie_rows));

  RunManifest manifest;
  manifest.command = "ablate";
  manifest.config = cfg;
  manifest.seed = cfg.seed;
  manifest.outputs = {"ablation_per_seed.csv", "ablation_summary.csv",
                      "ablation_summary.md"};
  if (!ie_rows.empty()) manifest.outputs.push_back("ie_diagnostics.csv");
  write_run_manifest(manifest, out_dir);
}

std::string cmd_verify_gradients(const Config& cfg, std::uint64_t seed) {
  return verify_gradients(cfg, seed).to_json();
}

}  // namespace groundlab
