#pragma once

#include <cstdint>
#include <string>

#include "groundlab/common.hpp"

namespace groundlab {

// Experiment configuration. Model/optimizer knobs plus the generator
// parameters of the synthetic world. Serialized as a flat JSON object;
// unknown keys are rejected on load.
struct Config {
  // shapes
  int frames = 5;           // frames per segment
  int regions = 8;          // region proposals per frame
  int max_objects = 3;      // max described objects per sentence
  int raw_region_dim = 32;  // raw visual feature dim
  int raw_text_dim = 16;    // raw textual feature dim
  int embed_dim = 24;       // common embedding dim

  // contrastive intervention sizes and memory banks
  int content_regions = 4;   // top regions kept as content per frame-bag
  int content_frames = 1;    // top frames kept as content per video
  int region_bank_size = 32;
  int frame_bank_size = 64;
  double momentum = 0.9;       // memory-bank momentum factor
  double loss_scale = 0.2;     // log-loss scale of the ranking loss
  double acl_loss_scale = 0.05;  // log-loss scale of the contrastive term

  // optimizer
  double learning_rate = 3e-3;
  double weight_decay = 1e-4;
  int batch_size = 16;
  int steps_stage1 = 300;
  int steps_stage2 = 300;

  bool use_self_attention = true;
  std::uint64_t seed = 7;

  // synthetic-world generator
  int vocab_size = 12;
  int n_contexts = 4;
  int styles_per_context = 3;
  int views_per_object = 3;          // appearance modes per object class
  double view_spread = 0.5;          // how far view modes sit from the class axis
  double noise_sigma = 0.6;
  double style_context_corr = 0.8;   // P(style cluster drawn from own context)
  double occupancy_rate = 0.9;       // P(object present in a given frame)
  double style_blend_iid = 0.2;      // object-prototype blend in style clusters
  double style_blend_ood = 0.8;
  double cooccur_skew = 0.6;         // concentration of per-context subset menus

  // Throws InvalidArgumentError when any invariant is violated.
  void validate() const;

  std::string to_json() const;                   // canonical (ordered keys, %.17g floats)
  static Config from_json(const std::string&);   // rejects unknown keys
  static Config from_file(const std::string& path);
  void save(const std::string& path) const;

  // "desk", "paper", or "tiny"
  static Config preset(const std::string& name);

  std::uint64_t canonical_hash() const;

  bool same_data_shape(const Config& other) const;
};

}  // namespace groundlab
