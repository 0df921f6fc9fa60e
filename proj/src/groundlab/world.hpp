#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "groundlab/data.hpp"
#include "groundlab/rng.hpp"

namespace groundlab {

enum class WorldMode { kIid, kOod };

// Parameters of the synthetic generative process. Videos are caused by two
// latent factor groups: per-object content prototypes and per-context style
// clusters; the context simultaneously drives which objects co-occur and
// which styles appear, so it confounds the video/label association.
struct WorldSpec {
  WorldMode mode = WorldMode::kIid;
  int vocab_size = 0;
  int n_contexts = 0;
  std::vector<int> context_ids;  // global ids; disjoint between iid and ood

  Matrix object_prototypes;  // vocab x raw_region_dim, unit rows
  Matrix text_prototypes;    // vocab x raw_text_dim, unit rows

  // Appearance modes per object: views_per_object consecutive unit rows per
  // class, each partway between the class prototype and a random direction.
  // One textual prototype covers many visual modes.
  Matrix object_views;  // (vocab * views_per_object) x raw_region_dim
  int views_per_object = 1;

  // Global style-cluster table: rows grouped per context
  // (styles_per_context consecutive rows per context).
  Matrix style_prototypes;  // (n_contexts * styles_per_context) x raw_region_dim
  int styles_per_context = 0;

  // Per-context categorical distribution over object subsets.
  struct SubsetMenu {
    std::vector<std::vector<int>> subsets;  // each sorted, size in [1, max_objects]
    std::vector<double> probs;              // sums to 1
  };
  std::vector<SubsetMenu> cooccur;  // indexed by local context (0..n_contexts-1)

  double noise_sigma = 0.0;
  double style_context_corr = 0.0;
  double occupancy_rate = 1.0;
  double style_object_blend = 0.0;

  int global_style_id(int local_context, int cluster) const {
    return local_context * styles_per_context + cluster;
  }
  int view_row(int object, int view) const {
    return object * views_per_object + view;
  }
};

// Builds a world from the config. Both modes derive object/text prototypes
// from a mode-independent fork of `rng`, so iid and ood worlds built from
// equal streams share prototypes while contexts, co-occurrence menus and
// style clusters differ (and context ids are disjoint).
WorldSpec build_world(const Config& cfg, const RandomStream& rng, WorldMode mode);

// Samples the style cluster used for one style region slot: with probability
// style_context_corr a cluster of `local_context`, otherwise any cluster.
// Returns the global style id.
int sample_style_cluster(const WorldSpec& world, int local_context, RandomStream& rng);

// Draws one positive pair. The returned latents are also stored on the video.
std::tuple<VideoSegment, QuerySentence, GeneratorLatents> generate_pair(
    const WorldSpec& world, const Config& cfg, RandomStream& rng);

// Generates n_pairs records; record i derives its stream from (rng, i), so
// parallel and serial generation are bit-identical.
Dataset generate_dataset(const WorldSpec& world, const Config& cfg, int n_pairs,
                         const RandomStream& rng, const std::string& split,
                         int threads = 1);

// Marginal probability, over contexts and menu subsets, that objects a and b
// are described together (unordered, a != b), normalized to sum 1 over pairs.
Matrix configured_pair_cooccurrence(const WorldSpec& world);

// World manifest serialization (JSON, 9 significant digits).
std::string world_to_json(const WorldSpec& world);
WorldSpec world_from_json(const std::string& text);
void save_world(const WorldSpec& world, const std::string& path);
WorldSpec load_world(const std::string& path);

}  // namespace groundlab
