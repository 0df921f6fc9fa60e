#include "groundlab/acl.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "groundlab/mil.hpp"

namespace groundlab {
namespace {

// Indices 0..n-1 sorted by descending score, ties to the lower index.
std::vector<int> rank_desc(const Eigen::RowVectorXd& scores) {
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return scores(a) > scores(b); });
  return idx;
}

double raw_cosine(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  double na = a.norm(), nb = b.norm();
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

Eigen::RowVectorXd maxpool_frame(const Matrix& regions, int frame, int regions_per_frame) {
  return regions.middleRows(frame * regions_per_frame, regions_per_frame)
      .colwise()
      .maxCoeff();
}

}  // namespace

ProxyPartition partition_proxies(const Matrix& similarity, const Matrix& frame_weights,
                                 const Config& cfg) {
  const int T = cfg.frames, N = cfg.regions;
  const int K = static_cast<int>(similarity.rows());
  if (similarity.cols() != T * N || frame_weights.rows() != K ||
      frame_weights.cols() != T)
    throw InvalidArgumentError("partition_proxies: trace shape mismatch");

  ProxyPartition part;
  part.region_content.assign(K, std::vector<std::vector<int>>(T));
  part.region_style.assign(K, std::vector<std::vector<int>>(T));
  part.frame_content.resize(K);
  part.frame_style.resize(K);

  for (int k = 0; k < K; ++k) {
    for (int t = 0; t < T; ++t) {
      std::vector<int> order = rank_desc(similarity.row(k).segment(t * N, N));
      part.region_content[k][t].assign(order.begin(), order.begin() + cfg.content_regions);
      part.region_style[k][t].assign(order.begin() + cfg.content_regions, order.end());
    }
    std::vector<int> order = rank_desc(frame_weights.row(k));
    part.frame_content[k].assign(order.begin(), order.begin() + cfg.content_frames);
    part.frame_style[k].assign(order.begin() + cfg.content_frames, order.end());
  }
  return part;
}

ProxyPartition partition_proxies(const ForwardTrace& trace, const Config& cfg) {
  return partition_proxies(trace.similarity, trace.frame_weights, cfg);
}

MemoryBanks init_banks(const Dataset& ds, const Config& cfg, const RandomStream& rng) {
  if (ds.records.empty()) throw InvalidArgumentError("init_banks: empty dataset");
  const int T = cfg.frames, N = cfg.regions;
  const std::uint64_t n_regions =
      static_cast<std::uint64_t>(ds.size()) * static_cast<std::uint64_t>(T * N);
  const std::uint64_t n_frames =
      static_cast<std::uint64_t>(ds.size()) * static_cast<std::uint64_t>(T);

  MemoryBanks banks;
  banks.region.momentum = cfg.momentum;
  banks.frame.momentum = cfg.momentum;
  banks.region.vectors.resize(cfg.region_bank_size, cfg.raw_region_dim);
  banks.frame.vectors.resize(cfg.frame_bank_size, cfg.raw_region_dim);

  RandomStream r = rng.fork("bank.region");
  for (int j = 0; j < cfg.region_bank_size; ++j) {
    std::uint64_t pick = r.next_below(n_regions);
    int rec = static_cast<int>(pick / static_cast<std::uint64_t>(T * N));
    int row = static_cast<int>(pick % static_cast<std::uint64_t>(T * N));
    banks.region.vectors.row(j) = ds.records[rec].video.region_features.row(row);
  }
  RandomStream f = rng.fork("bank.frame");
  for (int j = 0; j < cfg.frame_bank_size; ++j) {
    std::uint64_t pick = f.next_below(n_frames);
    int rec = static_cast<int>(pick / static_cast<std::uint64_t>(T));
    int frame = static_cast<int>(pick % static_cast<std::uint64_t>(T));
    banks.frame.vectors.row(j) =
        maxpool_frame(ds.records[rec].video.region_features, frame, N);
  }
  return banks;
}

int nearest_bank_vector(const MemoryBank& bank, const Eigen::RowVectorXd& raw) {
  int best = 0;
  double bv = raw_cosine(raw, bank.vectors.row(0));
  for (int j = 1; j < bank.vectors.rows(); ++j) {
    double c = raw_cosine(raw, bank.vectors.row(j));
    if (c > bv) {
      bv = c;
      best = j;
    }
  }
  return best;
}

ReplacementResult adversarial_replace(const Matrix& proxies, const MemoryBank& bank) {
  ReplacementResult out;
  out.features.resize(proxies.rows(), proxies.cols());
  out.assignment.resize(proxies.rows());
  for (int r = 0; r < proxies.rows(); ++r) {
    int j = nearest_bank_vector(bank, proxies.row(r));
    out.features.row(r) = bank.vectors.row(j);
    out.assignment[r] = j;
  }
  return out;
}

double interventional_effect(double p, double p_do) { return p - p_do; }

void AclAssignments::merge(const AclAssignments& other) {
  region.insert(region.end(), other.region.begin(), other.region.end());
  frame.insert(frame.end(), other.frame.begin(), other.frame.end());
}

Matrix replace_rows_with_bank(const Matrix& regions, const std::vector<int>& rows,
                              const MemoryBank& bank,
                              std::vector<std::pair<int, Vector>>* assignments) {
  Matrix out = regions;
  for (int row : rows) {
    int j = nearest_bank_vector(bank, regions.row(row));
    out.row(row) = bank.vectors.row(j);
    if (assignments)
      assignments->emplace_back(j, regions.row(row).transpose());
  }
  return out;
}

AclScores acl_forward_tape(ad::Tape& tape, const ParamNodes& nodes,
                           const Matrix& regions, const Matrix& query_features,
                           const Config& cfg, const ProxyPartition& partition,
                           const MemoryBanks& banks, const ad::Value& clean_score,
                           const std::optional<ad::Value>& shift, bool spatial,
                           bool temporal, AclAssignments* assignments) {
  const int T = cfg.frames, N = cfg.regions;
  const int K = static_cast<int>(partition.region_content.size());
  const int spatial_count = std::min(cfg.content_regions, N - cfg.content_regions);
  const int temporal_count = std::min(cfg.content_frames, T - cfg.content_frames);

  auto averaged_pass = [&](bool is_spatial, bool want_content) -> ad::Value {
    std::optional<ad::Value> acc;
    for (int k = 0; k < K; ++k) {
      std::vector<int> rows;
      AclAssignments local;
      if (is_spatial) {
        for (int t = 0; t < T; ++t) {
          const auto& ranked = want_content ? partition.region_content[k][t]
                                            : partition.region_style[k][t];
          for (int i = 0; i < spatial_count; ++i) rows.push_back(t * N + ranked[i]);
        }
      } else {
        const auto& ranked =
            want_content ? partition.frame_content[k] : partition.frame_style[k];
        for (int i = 0; i < temporal_count; ++i) {
          const int t = ranked[i];
          for (int n = 0; n < N; ++n) rows.push_back(t * N + n);
          // The frame bank models whole-frame statistics: the intervened
          // frame is matched to it by its max-pooled feature.
          Eigen::RowVectorXd pooled = maxpool_frame(regions, t, N);
          local.frame.emplace_back(nearest_bank_vector(banks.frame, pooled),
                                   pooled.transpose());
        }
      }
      Matrix intervened = replace_rows_with_bank(
          regions, rows, banks.region, assignments ? &local.region : nullptr);
      if (assignments) assignments->merge(local);
      ad::Value p_do =
          forward_tape(tape, nodes, intervened, query_features, cfg, shift).video_score;
      acc = acc ? ad::add(*acc, p_do) : p_do;
    }
    return ad::scale(*acc, 1.0 / static_cast<double>(K));
  };

  AclScores out{clean_score, clean_score, clean_score, clean_score};
  if (spatial && spatial_count > 0) {
    out.spatial_content = averaged_pass(true, true);
    out.spatial_style = averaged_pass(true, false);
  }
  if (temporal && temporal_count > 0) {
    out.temporal_content = averaged_pass(false, true);
    out.temporal_style = averaged_pass(false, false);
  }
  return out;
}

ad::Value acl_loss_tape(ad::Tape& tape, const ad::Value& clean_score,
                        const AclScores& scores, double eta, bool spatial,
                        bool temporal) {
  using namespace ad;
  std::optional<Value> loss;
  auto term = [&](const Value& content, const Value& style) {
    Value ie_content = sub(clean_score, content);
    Value ie_style = sub(clean_score, style);
    Value t = log_loss_op(sub(ie_style, ie_content), eta);
    loss = loss ? add(*loss, t) : t;
  };
  if (spatial) term(scores.spatial_content, scores.spatial_style);
  if (temporal) term(scores.temporal_content, scores.temporal_style);
  if (!loss) return tape.constant(Matrix::Zero(1, 1));
  return *loss;
}

double acl_loss(double clean_score, double p_spatial_content, double p_spatial_style,
                double p_temporal_content, double p_temporal_style, double eta) {
  double ie_sc = clean_score - p_spatial_content;
  double ie_ss = clean_score - p_spatial_style;
  double ie_tc = clean_score - p_temporal_content;
  double ie_ts = clean_score - p_temporal_style;
  return log_loss(ie_ss - ie_sc, eta) + log_loss(ie_ts - ie_tc, eta);
}

void update_banks(MemoryBanks& banks, const AclAssignments& assignments) {
  auto apply = [](MemoryBank& bank, const std::vector<std::pair<int, Vector>>& items) {
    std::map<int, std::pair<Vector, int>> sums;
    for (const auto& [j, original] : items) {
      auto it = sums.find(j);
      if (it == sums.end())
        sums.emplace(j, std::make_pair(original, 1));
      else {
        it->second.first += original;
        it->second.second += 1;
      }
    }
    for (const auto& [j, sum_count] : sums) {
      Vector mean = sum_count.first / static_cast<double>(sum_count.second);
      bank.vectors.row(j) = bank.momentum * bank.vectors.row(j) +
                            (1.0 - bank.momentum) * mean.transpose();
    }
  };
  apply(banks.region, assignments.region);
  apply(banks.frame, assignments.frame);
}

}  // namespace groundlab
