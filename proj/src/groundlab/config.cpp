#include "groundlab/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace groundlab {
namespace {

using nlohmann::json;

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidArgumentError("config: " + msg);
}

std::uint64_t fnv1a_bytes(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace

void Config::validate() const {
  require(frames >= 1, "frames must be >= 1");
  require(regions >= 1, "regions must be >= 1");
  require(max_objects >= 1, "max_objects must be >= 1");
  require(raw_region_dim >= 1 && raw_text_dim >= 1 && embed_dim >= 1,
          "feature dims must be >= 1");
  require(content_regions >= 0 && content_regions <= regions / 2,
          "content_regions must lie in [0, regions/2]");
  require(content_frames >= 0 && content_frames <= frames / 2,
          "content_frames must lie in [0, frames/2]");
  require(region_bank_size >= 1 && frame_bank_size >= 1,
          "memory bank sizes must be >= 1");
  require(momentum > 0.0 && momentum < 1.0, "momentum must lie in (0,1)");
  require(loss_scale > 0.0, "loss_scale must be > 0");
  require(acl_loss_scale > 0.0, "acl_loss_scale must be > 0");
  require(learning_rate >= 0.0, "learning_rate must be >= 0");
  require(weight_decay >= 0.0, "weight_decay must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(steps_stage1 >= 0 && steps_stage2 >= 0, "step counts must be >= 0");
  require(vocab_size >= max_objects, "vocab_size must be >= max_objects");
  require(regions >= max_objects, "regions must be >= max_objects");
  require(n_contexts >= 1, "n_contexts must be >= 1");
  require(styles_per_context >= 1, "styles_per_context must be >= 1");
  require(views_per_object >= 1, "views_per_object must be >= 1");
  require(view_spread >= 0.0 && view_spread < 1.0, "view_spread must lie in [0,1)");
  require(noise_sigma >= 0.0, "noise_sigma must be >= 0");
  require(style_context_corr >= 0.0 && style_context_corr <= 1.0,
          "style_context_corr must lie in [0,1]");
  require(occupancy_rate > 0.0 && occupancy_rate <= 1.0,
          "occupancy_rate must lie in (0,1]");
  require(style_blend_iid >= 0.0 && style_blend_iid <= 1.0 &&
              style_blend_ood >= 0.0 && style_blend_ood <= 1.0,
          "style blends must lie in [0,1]");
  require(cooccur_skew >= 0.0 && cooccur_skew < 1.0,
          "cooccur_skew must lie in [0,1)");
}

// Field table keeps to_json/from_json in lockstep.
#define GROUNDLAB_CONFIG_FIELDS(X)   \
  X(frames)                          \
  X(regions)                         \
  X(max_objects)                     \
  X(raw_region_dim)                  \
  X(raw_text_dim)                    \
  X(embed_dim)                       \
  X(content_regions)                 \
  X(content_frames)                  \
  X(region_bank_size)                \
  X(frame_bank_size)                 \
  X(momentum)                        \
  X(loss_scale)                      \
  X(acl_loss_scale)                  \
  X(learning_rate)                   \
  X(weight_decay)                    \
  X(batch_size)                      \
  X(steps_stage1)                    \
  X(steps_stage2)                    \
  X(use_self_attention)              \
  X(seed)                            \
  X(vocab_size)                      \
  X(n_contexts)                      \
  X(styles_per_context)              \
  X(views_per_object)                \
  X(view_spread)                     \
  X(noise_sigma)                     \
  X(style_context_corr)              \
  X(occupancy_rate)                  \
  X(style_blend_iid)                 \
  X(style_blend_ood)                 \
  X(cooccur_skew)

std::string Config::to_json() const {
  std::ostringstream out;
  out << "{";
  bool first = true;
  auto emit_key = [&](const char* name) {
    if (!first) out << ",";
    first = false;
    out << "\"" << name << "\":";
  };
  auto put = [&](const char* name, auto value) {
    emit_key(name);
    using T = std::decay_t<decltype(value)>;
    if constexpr (std::is_same_v<T, bool>) {
      out << (value ? "true" : "false");
    } else if constexpr (std::is_floating_point_v<T>) {
      out << format_g17(value);
    } else {
      out << value;
    }
  };
#define X(field) put(#field, field);
  GROUNDLAB_CONFIG_FIELDS(X)
#undef X
  out << "}";
  return out.str();
}

Config Config::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("config: expected a JSON object");

  Config cfg;
  auto read = [&](const char* name, auto& field) {
    auto it = j.find(name);
    if (it == j.end()) return;  // missing keys keep their defaults
    using T = std::decay_t<decltype(field)>;
    try {
      field = it->get<T>();
    } catch (const json::exception&) {
      throw SchemaError(std::string("config: bad value for key '") + name + "'");
    }
  };
#define X(field) read(#field, cfg.field);
  GROUNDLAB_CONFIG_FIELDS(X)
#undef X

  static const char* known[] = {
#define X(field) #field,
      GROUNDLAB_CONFIG_FIELDS(X)
#undef X
  };
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw SchemaError("config: unknown key '" + it.key() + "'");
  }
  cfg.validate();
  return cfg;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

void Config::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("config: cannot write " + path);
  out << to_json() << "\n";
}

Config Config::preset(const std::string& name) {
  if (name == "desk") {
    Config c;  // defaults are the desk preset
    c.validate();
    return c;
  }
  if (name == "paper") {
    Config c;
    c.frames = 5;
    c.regions = 20;
    c.max_objects = 5;
    c.raw_region_dim = 4096;
    c.raw_text_dim = 300;
    c.embed_dim = 512;
    c.content_regions = 10;
    c.content_frames = 1;
    c.region_bank_size = 100;
    c.frame_bank_size = 1000;
    c.momentum = 0.9;
    c.loss_scale = 0.2;
    c.acl_loss_scale = 0.2;
    c.learning_rate = 1e-4;
    c.weight_decay = 1e-4;
    c.batch_size = 48;
    c.steps_stage1 = 3000;
    c.steps_stage2 = 3000;
    c.vocab_size = 67;
    c.n_contexts = 8;
    c.styles_per_context = 4;
    c.views_per_object = 4;
    c.validate();
    return c;
  }
  if (name == "tiny") {
    Config c;
    c.frames = 3;
    c.regions = 4;
    c.max_objects = 2;
    c.raw_region_dim = 6;
    c.raw_text_dim = 5;
    c.embed_dim = 8;
    c.content_regions = 2;
    c.content_frames = 1;
    c.region_bank_size = 8;
    c.frame_bank_size = 8;
    c.batch_size = 4;
    c.steps_stage1 = 20;
    c.steps_stage2 = 20;
    c.vocab_size = 6;
    c.n_contexts = 2;
    c.styles_per_context = 2;
    c.views_per_object = 2;
    c.noise_sigma = 0.4;
    c.validate();
    return c;
  }
  throw InvalidArgumentError("config: unknown preset '" + name + "'");
}

std::uint64_t Config::canonical_hash() const { return fnv1a_bytes(to_json()); }

bool Config::same_data_shape(const Config& other) const {
  return frames == other.frames && regions == other.regions &&
         max_objects == other.max_objects &&
         raw_region_dim == other.raw_region_dim &&
         raw_text_dim == other.raw_text_dim && vocab_size == other.vocab_size;
}

}  // namespace groundlab
