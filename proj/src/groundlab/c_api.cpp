#include "groundlab/groundlab.h"

#include <cstring>
#include <sstream>
#include <string>

#include "groundlab/pipeline.hpp"
#include "groundlab/runio.hpp"

struct grd_config {
  groundlab::Config cfg;
};

namespace {

thread_local std::string g_last_error;

grd_status capture(const std::exception& e, grd_status code) {
  g_last_error = e.what();
  return code;
}

template <class Fn>
grd_status guarded(Fn&& fn) {
  try {
    fn();
    return GRD_OK;
  } catch (const groundlab::InvalidArgumentError& e) {
    return capture(e, GRD_ERR_INVALID_ARGUMENT);
  } catch (const groundlab::OverwriteRefusedError& e) {
    return capture(e, GRD_ERR_REFUSED);
  } catch (const groundlab::SchemaError& e) {
    return capture(e, GRD_ERR_SCHEMA);
  } catch (const groundlab::NumericError& e) {
    return capture(e, GRD_ERR_NUMERIC);
  } catch (const groundlab::IoError& e) {
    return capture(e, GRD_ERR_IO);
  } catch (const std::exception& e) {
    return capture(e, GRD_ERR_INTERNAL);
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<groundlab::Variant> parse_variants(const char* csv) {
  if (!csv || !*csv) return groundlab::all_variants();
  std::vector<groundlab::Variant> out;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ','))
    if (!tok.empty()) out.push_back(groundlab::variant_from_string(tok));
  if (out.empty()) return groundlab::all_variants();
  return out;
}

const groundlab::Config& need_config(const grd_config* cfg) {
  if (!cfg) throw groundlab::InvalidArgumentError("null config handle");
  return cfg->cfg;
}

const char* need_str(const char* s, const char* what) {
  if (!s) throw groundlab::InvalidArgumentError(std::string("null ") + what);
  return s;
}

}  // namespace

extern "C" {

const char* grd_version(void) { return groundlab::kArtifactVersion; }

const char* grd_last_error(void) { return g_last_error.c_str(); }

void grd_string_free(char* s) { delete[] s; }

grd_status grd_config_preset(const char* name, grd_config** out) {
  return guarded([&] {
    if (!out) throw groundlab::InvalidArgumentError("null output pointer");
    *out = new grd_config{groundlab::Config::preset(need_str(name, "preset name"))};
  });
}

grd_status grd_config_load(const char* path, grd_config** out) {
  return guarded([&] {
    if (!out) throw groundlab::InvalidArgumentError("null output pointer");
    *out = new grd_config{groundlab::Config::from_file(need_str(path, "config path"))};
  });
}

grd_status grd_config_to_json(const grd_config* cfg, char** json_out) {
  return guarded([&] {
    if (!json_out) throw groundlab::InvalidArgumentError("null output pointer");
    *json_out = dup_string(need_config(cfg).to_json());
  });
}

void grd_config_free(grd_config* cfg) { delete cfg; }

grd_status grd_generate_dataset(const grd_config* cfg, const char* out_dir,
                                long long pairs, const char* split, uint64_t seed,
                                int force, int threads) {
  return guarded([&] {
    groundlab::cmd_gen_data(need_config(cfg), need_str(out_dir, "output dir"),
                            static_cast<int>(pairs), need_str(split, "split"), seed,
                            force != 0, threads);
  });
}

grd_status grd_train(const grd_config* cfg, const char* data_dir, const char* variant,
                     const char* out_dir, uint64_t seed, int force, int threads,
                     int checkpoint_every) {
  return guarded([&] {
    groundlab::cmd_train(need_config(cfg), need_str(data_dir, "data dir"),
                         need_str(variant, "variant"), need_str(out_dir, "output dir"),
                         seed, force != 0, threads, checkpoint_every);
  });
}

grd_status grd_evaluate(const char* ckpt_path, const char* data_dir,
                        const char* out_dir, int force, int plot, int threads) {
  return guarded([&] {
    groundlab::cmd_eval(need_str(ckpt_path, "checkpoint path"),
                        need_str(data_dir, "data dir"), need_str(out_dir, "output dir"),
                        force != 0, plot != 0, threads);
  });
}

grd_status grd_ablate(const grd_config* cfg, const char* out_dir, int seeds,
                      const char* variants_csv, long long train_pairs,
                      long long eval_pairs, int with_ie, int force, int threads) {
  return guarded([&] {
    groundlab::cmd_ablate(need_config(cfg), need_str(out_dir, "output dir"), seeds,
                          parse_variants(variants_csv), static_cast<int>(train_pairs),
                          static_cast<int>(eval_pairs), with_ie != 0, force != 0,
                          threads);
  });
}

grd_status grd_verify_gradients(const grd_config* cfg, uint64_t seed,
                                char** report_json) {
  return guarded([&] {
    if (!report_json) throw groundlab::InvalidArgumentError("null output pointer");
    *report_json = dup_string(groundlab::cmd_verify_gradients(need_config(cfg), seed));
  });
}

}  // extern "C"
