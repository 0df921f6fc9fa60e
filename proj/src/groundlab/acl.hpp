#pragma once

#include <utility>
#include <vector>

#include "groundlab/autodiff.hpp"
#include "groundlab/config.hpp"
#include "groundlab/data.hpp"
#include "groundlab/model.hpp"
#include "groundlab/rng.hpp"

namespace groundlab {

// Content/style split of region and frame indices per described object,
// ranked by the model's own scores. Content and style are disjoint and cover
// all indices; rankings are descending with ties to the lower index.
struct ProxyPartition {
  // [object][frame] region indices, content has content_regions entries.
  std::vector<std::vector<std::vector<int>>> region_content;
  std::vector<std::vector<std::vector<int>>> region_style;
  // [object] frame indices, content has content_frames entries.
  std::vector<std::vector<int>> frame_content;
  std::vector<std::vector<int>> frame_style;
};

ProxyPartition partition_proxies(const Matrix& similarity, const Matrix& frame_weights,
                                 const Config& cfg);
ProxyPartition partition_proxies(const ForwardTrace& trace, const Config& cfg);

struct MemoryBank {
  Matrix vectors;  // bank_size x raw_region_dim
  double momentum = 0.9;
};

struct MemoryBanks {
  MemoryBank region;
  MemoryBank frame;
};

// Region bank: raw regions sampled uniformly from the dataset (with
// replacement once the dataset is smaller than the bank). Frame bank: the
// per-coordinate max-pool over a uniformly sampled frame's regions.
MemoryBanks init_banks(const Dataset& ds, const Config& cfg, const RandomStream& rng);

// Most similar bank vector by raw-space cosine; ties to the lowest index.
int nearest_bank_vector(const MemoryBank& bank, const Eigen::RowVectorXd& raw);

struct ReplacementResult {
  Matrix features;             // proxies with each row replaced
  std::vector<int> assignment; // bank index per input row
};
ReplacementResult adversarial_replace(const Matrix& proxies, const MemoryBank& bank);

double interventional_effect(double p, double p_do);

// Original (pre-replacement) features grouped with the bank vector that
// replaced them; consumed by update_banks after the optimizer step.
struct AclAssignments {
  std::vector<std::pair<int, Vector>> region;  // (bank index, raw region)
  std::vector<std::pair<int, Vector>> frame;   // (bank index, max-pooled frame)

  void merge(const AclAssignments& other);
};

// Builds a copy of `regions` with the listed rows swapped for their nearest
// region-bank vectors, recording assignments when requested.
Matrix replace_rows_with_bank(const Matrix& regions, const std::vector<int>& rows,
                              const MemoryBank& bank,
                              std::vector<std::pair<int, Vector>>* assignments);

struct AclScores {
  ad::Value spatial_content;
  ad::Value spatial_style;
  ad::Value temporal_content;
  ad::Value temporal_style;
};

// Four interventions, each a full forward pass from the clean input with one
// proxy group replaced, computed per object and averaged. The paired content
// and style passes replace equally many elements (the smaller set's size).
// Disabled or empty passes score as the clean forward.
AclScores acl_forward_tape(ad::Tape& tape, const ParamNodes& nodes,
                           const Matrix& regions, const Matrix& query_features,
                           const Config& cfg, const ProxyPartition& partition,
                           const MemoryBanks& banks, const ad::Value& clean_score,
                           const std::optional<ad::Value>& shift, bool spatial,
                           bool temporal, AclAssignments* assignments);

// ell(IE_style - IE_content) summed over the enabled spatial/temporal terms.
ad::Value acl_loss_tape(ad::Tape& tape, const ad::Value& clean_score,
                        const AclScores& scores, double eta, bool spatial,
                        bool temporal);

// Plain mirror of the loss for oracle tests.
double acl_loss(double clean_score, double p_spatial_content, double p_spatial_style,
                double p_temporal_content, double p_temporal_style, double eta);

// Momentum update: every bank vector with at least one assignment moves
// toward the mean of its assigned originals; others are untouched.
void update_banks(MemoryBanks& banks, const AclAssignments& assignments);

}  // namespace groundlab
