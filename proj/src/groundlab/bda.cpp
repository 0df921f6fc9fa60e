#include "groundlab/bda.hpp"

namespace groundlab {

Vector estimate_prior(const Dataset& train, int vocab_size) {
  if (train.records.empty())
    throw InvalidArgumentError("estimate_prior: empty dataset");
  Vector counts = Vector::Zero(vocab_size);
  for (const auto& rec : train.records)
    for (int id : rec.query.object_ids) {
      if (id < 0 || id >= vocab_size)
        throw SchemaError("estimate_prior: object id outside vocabulary");
      counts(id) += 1.0;
    }
  double total = counts.sum();
  if (total <= 0.0) throw InvalidArgumentError("estimate_prior: no objects counted");
  return counts / total;
}

Vector prior_text_mean(const Vector& prior, const Matrix& text_prototypes) {
  if (prior.size() != text_prototypes.rows())
    throw InvalidArgumentError("prior_text_mean: prior/prototype size mismatch");
  return text_prototypes.transpose() * prior;
}

Vector confounder_shift(const ModelParams& p, const Vector& prior,
                        const Matrix& text_prototypes) {
  Vector xbar = prior_text_mean(prior, text_prototypes);
  return p.w_q * xbar + p.b_q.col(0);
}

ForwardTrace adjusted_forward(const ModelParams& p, const Matrix& regions,
                              const Matrix& query_features, const Config& cfg,
                              const Vector& shift) {
  return forward_plain(p, regions, query_features, cfg, &shift);
}

ForwardTrace residual_inference(const ModelParams& stage1, const ModelParams* stage2,
                                const Vector* prior_text_mean_vec,
                                const Matrix& regions, const Matrix& query_features,
                                const Config& cfg, bool* used_fallback) {
  if (used_fallback) *used_fallback = false;
  if (!stage2 || !prior_text_mean_vec) {
    if (used_fallback) *used_fallback = true;
    return forward_plain(stage1, regions, query_features, cfg);
  }
  Vector shift = stage2->w_q * (*prior_text_mean_vec) + stage2->b_q.col(0);
  Matrix e1 = embed_regions(stage1, regions, cfg);
  Matrix e2 = embed_regions(*stage2, regions, cfg, &shift);
  Matrix q1 = embed_query(stage1, query_features);
  Matrix q2 = embed_query(*stage2, query_features);
  Matrix e = 0.5 * (e1 + e2);
  Matrix q = 0.5 * (q1 + q2);
  return forward_from_embeddings(*stage2, e, q, cfg);
}

}  // namespace groundlab
