#pragma once

#include <vector>

#include "groundlab/common.hpp"
#include "groundlab/rng.hpp"

namespace groundlab {

// log(1 + exp(x / eta)) via the stable max/log1p split.
double log_loss(double x, double eta);

struct TripletScores {
  double p_pos;        // matched pair
  double p_neg_video;  // mismatched video, same sentence
  double p_neg_query;  // same video, mismatched sentence
};

// Ranking loss over the triplet: the positive score is pushed above both
// mismatched scores.
double mil_ranking_loss(const TripletScores& s, double eta);

struct NegativeAssignment {
  int video_from = -1;  // batch index supplying the mismatched video
  int query_from = -1;  // batch index supplying the mismatched sentence
};

// In-batch negatives: independent uniform partners j != i and l != i. A
// partner whose object-id set equals item i's is resampled up to 10 times,
// then accepted (no deadlock when every item shares one set). Throws on
// batch size < 2.
std::vector<NegativeAssignment> sample_negatives(
    const std::vector<std::vector<int>>& object_sets, RandomStream& rng);

}  // namespace groundlab
