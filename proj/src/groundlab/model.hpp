#pragma once

#include <optional>
#include <string>

#include "groundlab/autodiff.hpp"
#include "groundlab/common.hpp"
#include "groundlab/config.hpp"
#include "groundlab/rng.hpp"

namespace groundlab {

struct AttentionParams {
  Matrix wq, wk, wv;  // embed_dim x embed_dim
};

// All learnable state, 64-bit throughout. Biases are column matrices so the
// optimizer and checkpoint code can treat every parameter uniformly.
struct ModelParams {
  Matrix w_v;  // embed_dim x raw_region_dim
  Matrix b_v;  // embed_dim x 1
  Matrix w_q;  // embed_dim x raw_text_dim
  Matrix b_q;  // embed_dim x 1
  std::optional<AttentionParams> attn;
  Matrix mlp_w1;  // embed_dim x (2*embed_dim)
  Matrix mlp_b1;  // embed_dim x 1
  Matrix mlp_w2;  // 1 x embed_dim
  Matrix mlp_b2;  // 1 x 1
};

// Visits parameters in a fixed order with stable names ("params._").
template <class Params, class F>
void for_each_param(Params& p, F&& f) {
  f("params.visual.w", p.w_v);
  f("params.visual.b", p.b_v);
  f("params.text.w", p.w_q);
  f("params.text.b", p.b_q);
  if (p.attn) {
    f("params.attn.wq", p.attn->wq);
    f("params.attn.wk", p.attn->wk);
    f("params.attn.wv", p.attn->wv);
  }
  f("params.temporal.w1", p.mlp_w1);
  f("params.temporal.b1", p.mlp_b1);
  f("params.temporal.w2", p.mlp_w2);
  f("params.temporal.b2", p.mlp_b2);
}

// Symmetric uniform init with scale 1/sqrt(fan_in); biases zero.
ModelParams init_params(const Config& cfg, const RandomStream& rng);

// (1 + cosine)/2, clamped to the orthogonal value 0.5 for zero-norm inputs
// (logged once per process).
double similarity(const Vector& q, const Vector& e);

// Affine embedding, optional single-head self-attention within each
// frame-bag (residual add, scale 1/sqrt(d)), then the optional additive
// shift applied after attention.
Matrix embed_regions(const ModelParams& p, const Matrix& regions, const Config& cfg,
                     const Vector* shift = nullptr);
Matrix embed_query(const ModelParams& p, const Matrix& query_features);

struct SpatialGrounding {
  Matrix similarity;    // K x (T*N)
  Matrix frame_scores;  // K x T, max over regions
  IntMatrix top_region; // K x T, tie -> lowest index
};
SpatialGrounding spatial_grounding(const Matrix& query_emb, const Matrix& region_emb,
                                   const Config& cfg);

// Per object: concat(frame max-pool, query embedding) -> tanh MLP -> softmax
// over frames.
Matrix temporal_localization(const ModelParams& p, const Matrix& region_emb,
                             const Matrix& query_emb, const Config& cfg);

// p = (1/K) sum_k sum_t F(k,t) G(k,t); throws on zero objects.
double video_score(const Matrix& frame_scores, const Matrix& frame_weights);

struct ForwardTrace {
  Matrix region_emb;    // (T*N) x d
  Matrix query_emb;     // K x d
  Matrix similarity;    // K x (T*N)
  Matrix frame_scores;  // K x T
  IntMatrix top_region; // K x T
  Matrix frame_weights; // K x T
  double video_score = 0.0;
};

ForwardTrace forward_plain(const ModelParams& p, const Matrix& regions,
                           const Matrix& query_features, const Config& cfg,
                           const Vector* shift = nullptr);

// Forward from precomputed embeddings (residual inference feeds averaged
// embeddings through here).
ForwardTrace forward_from_embeddings(const ModelParams& mlp_params,
                                     const Matrix& region_emb, const Matrix& query_emb,
                                     const Config& cfg);

// ---- tape path (training) ----

struct ParamNodes {
  ad::Value w_v, b_v, w_q, b_q;
  std::optional<std::array<ad::Value, 3>> attn;  // wq, wk, wv
  ad::Value mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

ParamNodes make_param_nodes(ad::Tape& tape, const ModelParams& p);

// Reads gradients accumulated on the leaves back into a ModelParams-shaped
// container (zero for untouched leaves).
ModelParams collect_param_grads(const ParamNodes& nodes, const ModelParams& shape);

struct TapeForward {
  ad::Value region_emb;
  ad::Value query_emb;
  ad::Value similarity;
  ad::Value frame_scores;
  ad::Value frame_weights;
  ad::Value video_score;  // 1x1
};

TapeForward forward_tape(ad::Tape& tape, const ParamNodes& nodes, const Matrix& regions,
                         const Matrix& query_features, const Config& cfg,
                         const std::optional<ad::Value>& shift = std::nullopt);

}  // namespace groundlab
