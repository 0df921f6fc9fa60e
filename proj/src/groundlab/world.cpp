#include "groundlab/world.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace groundlab {
namespace {

using nlohmann::json;

constexpr int kMenusPerContext = 4;

// Noise with expected norm `sigma` relative to unit prototypes, independent
// of the feature dimension.
void add_noise(Matrix& m, int row, double sigma, RandomStream& rng) {
  if (sigma == 0.0) return;
  const double scale = sigma / std::sqrt(static_cast<double>(m.cols()));
  for (int c = 0; c < m.cols(); ++c) m(row, c) += scale * rng.next_normal();
}

Eigen::RowVectorXd random_unit_row(int dim, RandomStream& rng) {
  Eigen::RowVectorXd v(dim);
  for (;;) {
    for (int c = 0; c < dim; ++c) v(c) = rng.next_normal();
    double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

std::vector<int> shuffled_indices(int n, RandomStream& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

void append_json_matrix(std::ostringstream& out, const Matrix& m) {
  out << "[";
  for (int r = 0; r < m.rows(); ++r) {
    if (r) out << ",";
    out << "[";
    for (int c = 0; c < m.cols(); ++c) {
      if (c) out << ",";
      out << format_g9(m(r, c));
    }
    out << "]";
  }
  out << "]";
}

Matrix json_to_matrix(const json& j) {
  int rows = static_cast<int>(j.size());
  int cols = rows ? static_cast<int>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

}  // namespace

WorldSpec build_world(const Config& cfg, const RandomStream& rng, WorldMode mode) {
  cfg.validate();
  if (cfg.vocab_size < cfg.max_objects)
    throw InvalidArgumentError("world: vocab_size smaller than max_objects");

  WorldSpec w;
  w.mode = mode;
  w.vocab_size = cfg.vocab_size;
  w.n_contexts = cfg.n_contexts;
  w.styles_per_context = cfg.styles_per_context;
  w.noise_sigma = cfg.noise_sigma;
  w.style_context_corr = cfg.style_context_corr;
  w.occupancy_rate = cfg.occupancy_rate;
  w.style_object_blend =
      mode == WorldMode::kIid ? cfg.style_blend_iid : cfg.style_blend_ood;

  // Prototypes are mode-independent so ood recognition stays possible.
  RandomStream protos = rng.fork("prototypes");
  w.object_prototypes.resize(cfg.vocab_size, cfg.raw_region_dim);
  for (int k = 0; k < cfg.vocab_size; ++k)
    w.object_prototypes.row(k) = random_unit_row(cfg.raw_region_dim, protos);
  w.text_prototypes.resize(cfg.vocab_size, cfg.raw_text_dim);
  for (int k = 0; k < cfg.vocab_size; ++k)
    w.text_prototypes.row(k) = random_unit_row(cfg.raw_text_dim, protos);
  w.views_per_object = cfg.views_per_object;
  w.object_views.resize(cfg.vocab_size * cfg.views_per_object, cfg.raw_region_dim);
  for (int k = 0; k < cfg.vocab_size; ++k)
    for (int v = 0; v < cfg.views_per_object; ++v) {
      Eigen::RowVectorXd g = random_unit_row(cfg.raw_region_dim, protos);
      Eigen::RowVectorXd view = (1.0 - cfg.view_spread) * w.object_prototypes.row(k) +
                                cfg.view_spread * g;
      w.object_views.row(w.view_row(k, v)) = view / view.norm();
    }
  for (int a = 0; a < cfg.vocab_size; ++a)
    for (int b = a + 1; b < cfg.vocab_size; ++b)
      if ((w.object_prototypes.row(a) - w.object_prototypes.row(b)).norm() < 1e-9)
        throw NumericError("world: duplicate object prototypes");

  const bool iid = mode == WorldMode::kIid;
  RandomStream ctx = rng.fork(iid ? "contexts.iid" : "contexts.ood");

  w.context_ids.resize(cfg.n_contexts);
  for (int z = 0; z < cfg.n_contexts; ++z)
    w.context_ids[z] = iid ? z : cfg.n_contexts + z;

  // Context object pools: a home partition of the vocabulary plus borrowed
  // extras. Ood worlds reshuffle, so the same objects appear in novel
  // combinations under novel contexts.
  std::vector<std::vector<int>> pools(cfg.n_contexts);
  {
    std::vector<int> order = shuffled_indices(cfg.vocab_size, ctx);
    for (int i = 0; i < cfg.vocab_size; ++i)
      pools[i % cfg.n_contexts].push_back(order[i]);
    const int borrow = 2;
    for (int z = 0; z < cfg.n_contexts; ++z) {
      for (int b = 0; b < borrow; ++b) {
        for (int tries = 0; tries < 16; ++tries) {
          int cand = static_cast<int>(ctx.next_below(cfg.vocab_size));
          if (std::find(pools[z].begin(), pools[z].end(), cand) == pools[z].end()) {
            pools[z].push_back(cand);
            break;
          }
        }
      }
      std::sort(pools[z].begin(), pools[z].end());
    }
  }

  // Subset menus with geometrically decaying probabilities; cooccur_skew
  // controls how hard the top menu dominates.
  w.cooccur.resize(cfg.n_contexts);
  for (int z = 0; z < cfg.n_contexts; ++z) {
    auto& menu = w.cooccur[z];
    for (int m = 0; m < kMenusPerContext; ++m) {
      int size = cfg.max_objects;
      if (ctx.next_double() > 0.7 && cfg.max_objects > 1)
        size = 1 + static_cast<int>(ctx.next_below(cfg.max_objects));
      size = std::min<int>(size, static_cast<int>(pools[z].size()));
      std::vector<int> pick = shuffled_indices(static_cast<int>(pools[z].size()), ctx);
      std::vector<int> subset;
      for (int i = 0; i < size; ++i) subset.push_back(pools[z][pick[i]]);
      std::sort(subset.begin(), subset.end());
      menu.subsets.push_back(std::move(subset));
    }
    double base = 1.0, total = 0.0;
    for (int m = 0; m < kMenusPerContext; ++m) {
      menu.probs.push_back(base);
      total += base;
      base *= (1.0 - cfg.cooccur_skew);
    }
    for (double& p : menu.probs) p /= total;
  }

  // Style clusters: a random direction blended toward the prototype of one
  // object from the context's pool. The blend couples backgrounds to the
  // objects they surround; stronger blends make scene clutter object-like.
  w.style_prototypes.resize(cfg.n_contexts * cfg.styles_per_context,
                            cfg.raw_region_dim);
  for (int z = 0; z < cfg.n_contexts; ++z) {
    for (int c = 0; c < cfg.styles_per_context; ++c) {
      int anchor = pools[z][ctx.next_below(pools[z].size())];
      Eigen::RowVectorXd g = random_unit_row(cfg.raw_region_dim, ctx);
      Eigen::RowVectorXd s = (1.0 - w.style_object_blend) * g +
                             w.style_object_blend * w.object_prototypes.row(anchor);
      double sn = s.norm();
      if (sn < 1e-12) s = g;
      else s /= sn;
      w.style_prototypes.row(w.global_style_id(z, c)) = s;
    }
  }
  return w;
}

int sample_style_cluster(const WorldSpec& world, int local_context, RandomStream& rng) {
  const int total = world.n_contexts * world.styles_per_context;
  if (rng.next_double() < world.style_context_corr)
    return world.global_style_id(
        local_context, static_cast<int>(rng.next_below(world.styles_per_context)));
  return static_cast<int>(rng.next_below(total));
}

std::tuple<VideoSegment, QuerySentence, GeneratorLatents> generate_pair(
    const WorldSpec& world, const Config& cfg, RandomStream& rng) {
  const int T = cfg.frames, N = cfg.regions;

  const int z = static_cast<int>(rng.next_below(world.n_contexts));
  const auto& menu = world.cooccur[z];
  double u = rng.next_double(), acc = 0.0;
  int pick = 0;
  for (size_t m = 0; m < menu.probs.size(); ++m) {
    acc += menu.probs[m];
    if (u < acc) {
      pick = static_cast<int>(m);
      break;
    }
  }
  const std::vector<int>& objects = menu.subsets[pick];
  const int K = static_cast<int>(objects.size());

  GeneratorLatents lat;
  lat.context_id = world.context_ids[z];
  lat.content_assignment.assign(T, std::vector<int>(N, 0));
  lat.object_frames.resize(K);

  // Occupancy pattern per object; resample until at least one frame sticks.
  for (int k = 0; k < K; ++k) {
    std::vector<int> frames;
    do {
      frames.clear();
      for (int t = 0; t < T; ++t)
        if (rng.next_double() < world.occupancy_rate) frames.push_back(t);
    } while (frames.empty());
    lat.object_frames[k] = std::move(frames);
  }

  VideoSegment video;
  video.region_features.resize(T * N, cfg.raw_region_dim);

  for (int t = 0; t < T; ++t) {
    std::vector<int> present;
    for (int k = 0; k < K; ++k)
      if (std::find(lat.object_frames[k].begin(), lat.object_frames[k].end(), t) !=
          lat.object_frames[k].end())
        present.push_back(k);

    std::vector<int> copies(present.size(), 0);
    int total = 0;
    for (size_t i = 0; i < present.size(); ++i) {
      copies[i] = 1 + static_cast<int>(rng.next_below(2));
      total += copies[i];
    }
    for (size_t i = present.size(); total > N && i-- > 0;) {
      if (copies[i] > 1) {
        --copies[i];
        --total;
      }
    }

    std::vector<int> slots = shuffled_indices(N, rng);
    int cursor = 0;
    for (size_t i = 0; i < present.size(); ++i) {
      const int k = present[i];
      for (int c = 0; c < copies[i]; ++c) {
        const int n = slots[cursor++];
        lat.content_assignment[t][n] = objects[k];
        lat.gt_regions.push_back({t, k, n});
        const int view = static_cast<int>(rng.next_below(world.views_per_object));
        video.region_features.row(t * N + n) =
            world.object_views.row(world.view_row(objects[k], view));
        add_noise(video.region_features, t * N + n, world.noise_sigma, rng);
      }
    }
    for (; cursor < N; ++cursor) {
      const int n = slots[cursor];
      const int style = sample_style_cluster(world, z, rng);
      lat.content_assignment[t][n] = -1 - style;
      video.region_features.row(t * N + n) = world.style_prototypes.row(style);
      add_noise(video.region_features, t * N + n, world.noise_sigma, rng);
    }
  }
  std::sort(lat.gt_regions.begin(), lat.gt_regions.end());

  QuerySentence query;
  query.object_ids = objects;
  query.object_features.resize(K, cfg.raw_text_dim);
  for (int k = 0; k < K; ++k) {
    query.object_features.row(k) = world.text_prototypes.row(objects[k]);
    add_noise(query.object_features, k, world.noise_sigma, rng);
  }

  video.latents = lat;
  return {std::move(video), std::move(query), std::move(lat)};
}

Dataset generate_dataset(const WorldSpec& world, const Config& cfg, int n_pairs,
                         const RandomStream& rng, const std::string& split,
                         int threads) {
  if (n_pairs < 1) throw InvalidArgumentError("generate_dataset: n_pairs must be >= 1");
  Dataset ds;
  ds.records.resize(n_pairs);
  parallel_for(n_pairs, threads, [&](int i) {
    RandomStream local = rng.fork(static_cast<std::uint64_t>(i));
    auto [video, query, lat] = generate_pair(world, cfg, local);
    video.id = i;
    query.id = i;
    ds.records[i] = PairRecord{std::move(video), std::move(query), split};
  });
  return ds;
}

Matrix configured_pair_cooccurrence(const WorldSpec& world) {
  Matrix m = Matrix::Zero(world.vocab_size, world.vocab_size);
  const double pz = 1.0 / world.n_contexts;
  double total = 0.0;
  for (const auto& menu : world.cooccur) {
    for (size_t s = 0; s < menu.subsets.size(); ++s) {
      const auto& sub = menu.subsets[s];
      for (size_t a = 0; a < sub.size(); ++a)
        for (size_t b = a + 1; b < sub.size(); ++b) {
          m(sub[a], sub[b]) += pz * menu.probs[s];
          m(sub[b], sub[a]) += pz * menu.probs[s];
          total += pz * menu.probs[s];
        }
    }
  }
  if (total > 0.0) m /= total;
  return m;
}

std::string world_to_json(const WorldSpec& world) {
  std::ostringstream out;
  out << "{\"mode\":\"" << (world.mode == WorldMode::kIid ? "iid" : "ood") << "\"";
  out << ",\"vocab_size\":" << world.vocab_size;
  out << ",\"n_contexts\":" << world.n_contexts;
  out << ",\"styles_per_context\":" << world.styles_per_context;
  out << ",\"noise_sigma\":" << format_g9(world.noise_sigma);
  out << ",\"style_context_corr\":" << format_g9(world.style_context_corr);
  out << ",\"occupancy_rate\":" << format_g9(world.occupancy_rate);
  out << ",\"style_object_blend\":" << format_g9(world.style_object_blend);
  out << ",\"context_ids\":[";
  for (size_t i = 0; i < world.context_ids.size(); ++i) {
    if (i) out << ",";
    out << world.context_ids[i];
  }
  out << "],\"views_per_object\":" << world.views_per_object;
  out << ",\"object_prototypes\":";
  append_json_matrix(out, world.object_prototypes);
  out << ",\"object_views\":";
  append_json_matrix(out, world.object_views);
  out << ",\"text_prototypes\":";
  append_json_matrix(out, world.text_prototypes);
  out << ",\"style_prototypes\":";
  append_json_matrix(out, world.style_prototypes);
  out << ",\"cooccur\":[";
  for (int z = 0; z < world.n_contexts; ++z) {
    if (z) out << ",";
    const auto& menu = world.cooccur[z];
    out << "{\"subsets\":[";
    for (size_t s = 0; s < menu.subsets.size(); ++s) {
      if (s) out << ",";
      out << "[";
      for (size_t i = 0; i < menu.subsets[s].size(); ++i) {
        if (i) out << ",";
        out << menu.subsets[s][i];
      }
      out << "]";
    }
    out << "],\"probs\":[";
    for (size_t s = 0; s < menu.probs.size(); ++s) {
      if (s) out << ",";
      out << format_g9(menu.probs[s]);
    }
    out << "]}";
  }
  out << "]}";
  return out.str();
}

WorldSpec world_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("world: malformed JSON: ") + e.what());
  }
  WorldSpec w;
  w.mode = j.at("mode").get<std::string>() == "iid" ? WorldMode::kIid : WorldMode::kOod;
  w.vocab_size = j.at("vocab_size").get<int>();
  w.n_contexts = j.at("n_contexts").get<int>();
  w.styles_per_context = j.at("styles_per_context").get<int>();
  w.noise_sigma = j.at("noise_sigma").get<double>();
  w.style_context_corr = j.at("style_context_corr").get<double>();
  w.occupancy_rate = j.at("occupancy_rate").get<double>();
  w.style_object_blend = j.at("style_object_blend").get<double>();
  w.context_ids = j.at("context_ids").get<std::vector<int>>();
  w.views_per_object = j.at("views_per_object").get<int>();
  w.object_prototypes = json_to_matrix(j.at("object_prototypes"));
  w.object_views = json_to_matrix(j.at("object_views"));
  w.text_prototypes = json_to_matrix(j.at("text_prototypes"));
  w.style_prototypes = json_to_matrix(j.at("style_prototypes"));
  for (const auto& mj : j.at("cooccur")) {
    WorldSpec::SubsetMenu menu;
    for (const auto& s : mj.at("subsets"))
      menu.subsets.push_back(s.get<std::vector<int>>());
    menu.probs = mj.at("probs").get<std::vector<double>>();
    w.cooccur.push_back(std::move(menu));
  }
  return w;
}

void save_world(const WorldSpec& world, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("world: cannot write " + path);
  out << world_to_json(world) << "\n";
}

WorldSpec load_world(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("world: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return world_from_json(buf.str());
}

}  // namespace groundlab
