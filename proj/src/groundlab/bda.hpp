#pragma once

#include "groundlab/config.hpp"
#include "groundlab/data.hpp"
#include "groundlab/model.hpp"

namespace groundlab {

// Normalized object-occurrence counts over all training sentences. Unseen
// vocabulary ids keep probability 0. Throws on an empty dataset.
Vector estimate_prior(const Dataset& train, int vocab_size);

// Prior-weighted mean of the raw text prototypes. Because the text embedding
// is affine and the prior sums to 1, embedding this single vector equals the
// prior-weighted sum of per-object embeddings.
Vector prior_text_mean(const Vector& prior, const Matrix& text_prototypes);

// The shared additive shift: the stratified sum over objects of
// (region embedding + object embedding) weighted by the prior collapses to
// region embedding + this vector.
Vector confounder_shift(const ModelParams& p, const Vector& prior,
                        const Matrix& text_prototypes);

// Clean forward with the shift applied to region embeddings after attention.
ForwardTrace adjusted_forward(const ModelParams& p, const Matrix& regions,
                              const Matrix& query_features, const Config& cfg,
                              const Vector& shift);

// Test-phase combination: unshifted stage-1 embeddings averaged with shifted
// stage-2 embeddings (and query embeddings likewise); scores computed from
// the combined features with the stage-2 temporal head. A missing stage-2
// model falls back to the stage-1 forward and reports it.
ForwardTrace residual_inference(const ModelParams& stage1, const ModelParams* stage2,
                                const Vector* prior_text_mean_vec,
                                const Matrix& regions, const Matrix& query_features,
                                const Config& cfg, bool* used_fallback = nullptr);

}  // namespace groundlab
