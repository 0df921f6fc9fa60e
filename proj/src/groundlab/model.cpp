#include "groundlab/model.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>

namespace groundlab {
namespace {

Matrix uniform_matrix(int rows, int cols, double scale, RandomStream& rng) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = scale * (2.0 * rng.next_double() - 1.0);
  return m;
}

std::atomic<bool> g_zero_norm_logged{false};

void note_zero_norm() {
  if (!g_zero_norm_logged.exchange(true))
    std::fprintf(stderr,
                 "groundlab: zero-norm vector in similarity, scoring as 0.5\n");
}

}  // namespace

ModelParams init_params(const Config& cfg, const RandomStream& rng) {
  const int d = cfg.embed_dim;
  ModelParams p;
  auto init = [&](const char* name, Matrix& m, int rows, int cols, int fan_in) {
    RandomStream s = rng.fork(name);
    m = uniform_matrix(rows, cols, 1.0 / std::sqrt(static_cast<double>(fan_in)), s);
  };
  init("init.visual.w", p.w_v, d, cfg.raw_region_dim, cfg.raw_region_dim);
  p.b_v = Matrix::Zero(d, 1);
  init("init.text.w", p.w_q, d, cfg.raw_text_dim, cfg.raw_text_dim);
  p.b_q = Matrix::Zero(d, 1);
  if (cfg.use_self_attention) {
    AttentionParams a;
    init("init.attn.wq", a.wq, d, d, d);
    init("init.attn.wk", a.wk, d, d, d);
    init("init.attn.wv", a.wv, d, d, d);
    p.attn = std::move(a);
  }
  init("init.temporal.w1", p.mlp_w1, d, 2 * d, 2 * d);
  p.mlp_b1 = Matrix::Zero(d, 1);
  init("init.temporal.w2", p.mlp_w2, 1, d, d);
  p.mlp_b2 = Matrix::Zero(1, 1);
  return p;
}

double similarity(const Vector& q, const Vector& e) {
  double nq = q.norm(), ne = e.norm();
  if (nq <= 0.0 || ne <= 0.0) {
    note_zero_norm();
    return 0.5;
  }
  return 0.5 * (1.0 + q.dot(e) / (nq * ne));
}

Matrix embed_regions(const ModelParams& p, const Matrix& regions, const Config& cfg,
                     const Vector* shift) {
  const int T = cfg.frames, N = cfg.regions, d = cfg.embed_dim;
  if (regions.rows() != T * N || regions.cols() != cfg.raw_region_dim)
    throw InvalidArgumentError("embed_regions: region feature shape mismatch");
  Matrix e = regions * p.w_v.transpose();
  e.rowwise() += p.b_v.col(0).transpose();
  if (p.attn) {
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    for (int t = 0; t < T; ++t) {
      Matrix x = e.middleRows(t * N, N);
      Matrix q = x * p.attn->wq.transpose();
      Matrix k = x * p.attn->wk.transpose();
      Matrix v = x * p.attn->wv.transpose();
      Matrix logits = s * (q * k.transpose());
      for (int r = 0; r < N; ++r) {
        double m = logits.row(r).maxCoeff();
        Eigen::ArrayXd ex = (logits.row(r).array() - m).exp();
        logits.row(r) = (ex / ex.sum()).matrix();
      }
      e.middleRows(t * N, N) = x + logits * v;
    }
  }
  if (shift) {
    if (shift->size() != d)
      throw InvalidArgumentError("embed_regions: shift dim mismatch");
    e.rowwise() += shift->transpose();
  }
  return e;
}

Matrix embed_query(const ModelParams& p, const Matrix& query_features) {
  Matrix q = query_features * p.w_q.transpose();
  q.rowwise() += p.b_q.col(0).transpose();
  return q;
}

SpatialGrounding spatial_grounding(const Matrix& query_emb, const Matrix& region_emb,
                                   const Config& cfg) {
  const int T = cfg.frames, N = cfg.regions;
  const int K = static_cast<int>(query_emb.rows());
  SpatialGrounding out;
  out.similarity.resize(K, T * N);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < T * N; ++i)
      out.similarity(k, i) = similarity(query_emb.row(k), region_emb.row(i));
  out.frame_scores.resize(K, T);
  out.top_region.resize(K, T);
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t) {
      int best = 0;
      double bv = out.similarity(k, t * N);
      for (int n = 1; n < N; ++n)
        if (out.similarity(k, t * N + n) > bv) {
          bv = out.similarity(k, t * N + n);
          best = n;
        }
      out.frame_scores(k, t) = bv;
      out.top_region(k, t) = best;
    }
  return out;
}

Matrix temporal_localization(const ModelParams& p, const Matrix& region_emb,
                             const Matrix& query_emb, const Config& cfg) {
  const int T = cfg.frames, N = cfg.regions, d = cfg.embed_dim;
  const int K = static_cast<int>(query_emb.rows());
  Matrix pooled(T, d);
  for (int t = 0; t < T; ++t)
    pooled.row(t) = region_emb.middleRows(t * N, N).colwise().maxCoeff();

  const Matrix w1v = p.mlp_w1.leftCols(d);
  const Matrix w1q = p.mlp_w1.rightCols(d);
  Matrix logits(K, T);
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t) {
      Vector h = w1v * pooled.row(t).transpose() + w1q * query_emb.row(k).transpose() +
                 p.mlp_b1.col(0);
      logits(k, t) = (p.mlp_w2 * h.array().tanh().matrix())(0, 0) + p.mlp_b2(0, 0);
    }
  Matrix g(K, T);
  for (int k = 0; k < K; ++k) {
    double m = logits.row(k).maxCoeff();
    Eigen::ArrayXd ex = (logits.row(k).array() - m).exp();
    g.row(k) = (ex / ex.sum()).matrix();
  }
  return g;
}

double video_score(const Matrix& frame_scores, const Matrix& frame_weights) {
  const int K = static_cast<int>(frame_scores.rows());
  if (K == 0) throw InvalidArgumentError("video_score: no objects in query");
  return frame_scores.cwiseProduct(frame_weights).sum() / static_cast<double>(K);
}

ForwardTrace forward_from_embeddings(const ModelParams& mlp_params,
                                     const Matrix& region_emb, const Matrix& query_emb,
                                     const Config& cfg) {
  ForwardTrace tr;
  tr.region_emb = region_emb;
  tr.query_emb = query_emb;
  SpatialGrounding sg = spatial_grounding(query_emb, region_emb, cfg);
  tr.similarity = std::move(sg.similarity);
  tr.frame_scores = std::move(sg.frame_scores);
  tr.top_region = std::move(sg.top_region);
  tr.frame_weights = temporal_localization(mlp_params, region_emb, query_emb, cfg);
  tr.video_score = video_score(tr.frame_scores, tr.frame_weights);
  return tr;
}

ForwardTrace forward_plain(const ModelParams& p, const Matrix& regions,
                           const Matrix& query_features, const Config& cfg,
                           const Vector* shift) {
  Matrix e = embed_regions(p, regions, cfg, shift);
  Matrix q = embed_query(p, query_features);
  return forward_from_embeddings(p, e, q, cfg);
}

// ---- tape path ----

ParamNodes make_param_nodes(ad::Tape& tape, const ModelParams& p) {
  ParamNodes n{tape.leaf(p.w_v), tape.leaf(p.b_v), tape.leaf(p.w_q), tape.leaf(p.b_q),
               std::nullopt,
               tape.leaf(p.mlp_w1), tape.leaf(p.mlp_b1), tape.leaf(p.mlp_w2),
               tape.leaf(p.mlp_b2)};
  if (p.attn)
    n.attn = std::array<ad::Value, 3>{tape.leaf(p.attn->wq), tape.leaf(p.attn->wk),
                                      tape.leaf(p.attn->wv)};
  return n;
}

ModelParams collect_param_grads(const ParamNodes& nodes, const ModelParams& shape) {
  auto grad_of = [](const ad::Value& v) -> Matrix {
    if (v.node->grad.size() == 0)
      return Matrix::Zero(v.node->value.rows(), v.node->value.cols());
    return v.node->grad;
  };
  ModelParams g;
  g.w_v = grad_of(nodes.w_v);
  g.b_v = grad_of(nodes.b_v);
  g.w_q = grad_of(nodes.w_q);
  g.b_q = grad_of(nodes.b_q);
  if (shape.attn) {
    AttentionParams a;
    a.wq = grad_of((*nodes.attn)[0]);
    a.wk = grad_of((*nodes.attn)[1]);
    a.wv = grad_of((*nodes.attn)[2]);
    g.attn = std::move(a);
  }
  g.mlp_w1 = grad_of(nodes.mlp_w1);
  g.mlp_b1 = grad_of(nodes.mlp_b1);
  g.mlp_w2 = grad_of(nodes.mlp_w2);
  g.mlp_b2 = grad_of(nodes.mlp_b2);
  return g;
}

TapeForward forward_tape(ad::Tape& tape, const ParamNodes& nodes, const Matrix& regions,
                         const Matrix& query_features, const Config& cfg,
                         const std::optional<ad::Value>& shift) {
  using namespace ad;
  const int T = cfg.frames, N = cfg.regions, d = cfg.embed_dim;
  const int K = static_cast<int>(query_features.rows());
  if (K < 1) throw InvalidArgumentError("forward_tape: no objects in query");
  if (regions.rows() != T * N || regions.cols() != cfg.raw_region_dim)
    throw InvalidArgumentError("forward_tape: region feature shape mismatch");

  Value x = tape.constant(regions);
  Value e = add_rowvec(matmul_nt(x, nodes.w_v), transpose(nodes.b_v));
  if (nodes.attn) {
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<Value> frames;
    frames.reserve(T);
    for (int t = 0; t < T; ++t) {
      Value xt = block(e, t * N, 0, N, d);
      Value q = matmul_nt(xt, (*nodes.attn)[0]);
      Value k = matmul_nt(xt, (*nodes.attn)[1]);
      Value v = matmul_nt(xt, (*nodes.attn)[2]);
      Value attn = softmax_rows(scale(matmul_nt(q, k), s));
      frames.push_back(add(xt, matmul(attn, v)));
    }
    e = vstack(frames);
  }
  if (shift) e = add_rowvec(e, *shift);

  Value qf = tape.constant(query_features);
  Value q = add_rowvec(matmul_nt(qf, nodes.w_q), transpose(nodes.b_q));

  Value m = add_const(scale(cosine_rows(q, e), 0.5), 0.5);
  Value f = segment_colmax(m, T, N);

  Value pooled = maxpool_rows(e, T, N);
  Value w1v = block(nodes.mlp_w1, 0, 0, d, d);
  Value w1q = block(nodes.mlp_w1, 0, d, d, d);
  Value u = matmul_nt(pooled, w1v);  // T x d
  Value sq = matmul_nt(q, w1q);      // K x d
  Value b1row = transpose(nodes.mlp_b1);
  std::vector<Value> logit_rows;
  logit_rows.reserve(K);
  for (int k = 0; k < K; ++k) {
    Value pre = add_rowvec(add_rowvec(u, block(sq, k, 0, 1, d)), b1row);
    Value h = tanh_op(pre);                       // T x d
    Value lg = matmul_nt(h, nodes.mlp_w2);        // T x 1
    lg = add_rowvec(lg, nodes.mlp_b2);            // broadcast scalar
    logit_rows.push_back(transpose(lg));          // 1 x T
  }
  Value g = softmax_rows(vstack(logit_rows));
  Value p = scale(dot_all(f, g), 1.0 / static_cast<double>(K));

  return TapeForward{e, q, m, f, g, p};
}

}  // namespace groundlab
