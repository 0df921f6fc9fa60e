#include "groundlab/mil.hpp"

#include <algorithm>
#include <cmath>

namespace groundlab {

double log_loss(double x, double eta) {
  if (eta <= 0.0) throw InvalidArgumentError("log_loss: eta must be > 0");
  double z = x / eta;
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double mil_ranking_loss(const TripletScores& s, double eta) {
  return log_loss(s.p_neg_video - s.p_pos, eta) +
         log_loss(s.p_neg_query - s.p_pos, eta);
}

std::vector<NegativeAssignment> sample_negatives(
    const std::vector<std::vector<int>>& object_sets, RandomStream& rng) {
  const int b = static_cast<int>(object_sets.size());
  if (b < 2) throw InvalidArgumentError("sample_negatives: batch size must be >= 2");

  auto same_set = [&](int a, int c) { return object_sets[a] == object_sets[c]; };
  auto draw_partner = [&](int i) {
    int partner = i;
    for (int attempt = 0; attempt < 1 + 10; ++attempt) {
      int r = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(b - 1)));
      partner = r >= i ? r + 1 : r;
      if (!same_set(i, partner)) break;
    }
    return partner;
  };

  std::vector<NegativeAssignment> out(b);
  for (int i = 0; i < b; ++i) {
    out[i].video_from = draw_partner(i);
    out[i].query_from = draw_partner(i);
  }
  return out;
}

}  // namespace groundlab
