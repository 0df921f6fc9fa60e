#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "groundlab/acl.hpp"
#include "groundlab/mil.hpp"
#include "groundlab/world.hpp"
#include "support/coverage.hpp"
#include "support/helpers.hpp"

using namespace groundlab;
using groundlab_test::max_abs_diff;
using groundlab_test::random_matrix;
using groundlab_test::same_matrix;

namespace {

struct AclFixture {
  Config cfg = Config::preset("tiny");
  WorldSpec world;
  Dataset ds;
  ModelParams params;

  explicit AclFixture(std::uint64_t seed) {
    RandomStream rng(seed, "aclfix");
    world = build_world(cfg, rng, WorldMode::kIid);
    ds = generate_dataset(world, cfg, 12, rng.fork("data"), "train");
    params = init_params(cfg, rng.fork("params"));
  }
};

}  // namespace

TEST_CASE("proxy partition keeps the top scores as content") {
  Config cfg = Config::preset("tiny");
  cfg.frames = 1;
  cfg.regions = 4;
  cfg.content_regions = 2;
  cfg.content_frames = 0;
  Matrix sim(1, 4), g(1, 1);
  sim << 0.9, 0.1, 0.8, 0.3;
  g << 1.0;
  ProxyPartition part = partition_proxies(sim, g, cfg);
  std::set<int> content(part.region_content[0][0].begin(),
                        part.region_content[0][0].end());
  std::set<int> style(part.region_style[0][0].begin(), part.region_style[0][0].end());
  CHECK(content == std::set<int>{0, 2});
  CHECK(style == std::set<int>{1, 3});

  sim << 0.5, 0.5, 0.5, 0.5;  // ties break toward low indices
  part = partition_proxies(sim, g, cfg);
  content = {part.region_content[0][0].begin(), part.region_content[0][0].end()};
  CHECK(content == std::set<int>{0, 1});
}

TRACED_TEST_CASE("F02", "proxy partition matches a sort oracle and covers all indices") {
  AclFixture f(3);
  RandomStream rng(40, "p");
  const int T = f.cfg.frames, N = f.cfg.regions;
  Matrix sim = random_matrix(2, T * N, rng).cwiseAbs();
  Matrix g = random_matrix(2, T, rng).cwiseAbs();
  ProxyPartition part = partition_proxies(sim, g, f.cfg);

  for (int k = 0; k < 2; ++k) {
    for (int t = 0; t < T; ++t) {
      // brute-force top-B by score
      std::vector<int> idx(N);
      for (int n = 0; n < N; ++n) idx[n] = n;
      std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return sim(k, t * N + a) > sim(k, t * N + b);
      });
      std::set<int> expect(idx.begin(), idx.begin() + f.cfg.content_regions);
      std::set<int> got(part.region_content[k][t].begin(),
                        part.region_content[k][t].end());
      CHECK(got == expect);
      // disjoint cover
      std::set<int> all(part.region_content[k][t].begin(),
                        part.region_content[k][t].end());
      for (int s : part.region_style[k][t]) CHECK(all.insert(s).second);
      CHECK(static_cast<int>(all.size()) == N);
    }
    std::set<int> frames(part.frame_content[k].begin(), part.frame_content[k].end());
    for (int s : part.frame_style[k]) CHECK(frames.insert(s).second);
    CHECK(static_cast<int>(frames.size()) == T);
  }
}

TEST_CASE("bank initialization samples real data") {
  AclFixture f(4);
  MemoryBanks banks = init_banks(f.ds, f.cfg, RandomStream(4, "banks"));
  CHECK(banks.region.vectors.rows() == f.cfg.region_bank_size);
  CHECK(banks.frame.vectors.rows() == f.cfg.frame_bank_size);

  // every region-bank vector equals some region in the data
  for (int j = 0; j < banks.region.vectors.rows(); ++j) {
    bool found = false;
    for (const auto& rec : f.ds.records)
      for (int r = 0; r < rec.video.region_features.rows() && !found; ++r)
        if ((banks.region.vectors.row(j) - rec.video.region_features.row(r)).norm() == 0.0)
          found = true;
    CHECK(found);
  }
  // every frame-bank vector is the max-pool of some frame
  const int N = f.cfg.regions;
  for (int j = 0; j < banks.frame.vectors.rows(); ++j) {
    bool found = false;
    for (const auto& rec : f.ds.records)
      for (int t = 0; t < f.cfg.frames && !found; ++t) {
        Eigen::RowVectorXd pooled =
            rec.video.region_features.middleRows(t * N, N).colwise().maxCoeff();
        if ((banks.frame.vectors.row(j) - pooled).norm() == 0.0) found = true;
      }
    CHECK(found);
  }

  MemoryBanks again = init_banks(f.ds, f.cfg, RandomStream(4, "banks"));
  CHECK(same_matrix(banks.region.vectors, again.region.vectors));
  CHECK(same_matrix(banks.frame.vectors, again.frame.vectors));
}

TRACED_TEST_CASE("F10", "adversarial replacement picks the most similar memory vector") {
  MemoryBank bank;
  bank.vectors.resize(2, 2);
  bank.vectors << 1, 0, 0, 1;
  Matrix proxies(1, 2);
  proxies << 0.9, 0.1;
  ReplacementResult r = adversarial_replace(proxies, bank);
  CHECK(r.assignment[0] == 0);
  CHECK(r.features(0, 0) == 1.0);
  CHECK(r.features(0, 1) == 0.0);

  proxies << 0.5, 0.5;  // equidistant -> lowest index
  r = adversarial_replace(proxies, bank);
  CHECK(r.assignment[0] == 0);

  // scan oracle on random banks
  RandomStream rng(6, "scan");
  MemoryBank big;
  big.vectors = random_matrix(16, 5, rng);
  Matrix probe = random_matrix(8, 5, rng);
  r = adversarial_replace(probe, big);
  for (int i = 0; i < 8; ++i) {
    int best = 0;
    double bv = -2.0;
    for (int j = 0; j < 16; ++j) {
      double c = probe.row(i).dot(big.vectors.row(j)) /
                 (probe.row(i).norm() * big.vectors.row(j).norm());
      if (c > bv) {
        bv = c;
        best = j;
      }
    }
    CHECK(r.assignment[i] == best);
  }
}

TRACED_TEST_CASE("F01", "interventional effect is the score drop") {
  CHECK(interventional_effect(0.8, 0.5) == doctest::Approx(0.3));
  CHECK(interventional_effect(0.4, 0.4) == 0.0);
}

TRACED_TEST_CASE("F11,F01", "intervened scores equal a from-scratch forward on intervened input") {
  AclFixture f(7);
  const PairRecord& rec = f.ds.records[0];
  MemoryBanks banks = init_banks(f.ds, f.cfg, RandomStream(7, "banks"));

  ad::Tape tape;
  ParamNodes nodes = make_param_nodes(tape, f.params);
  TapeForward clean = forward_tape(tape, nodes, rec.video.region_features,
                                   rec.query.object_features, f.cfg);
  ProxyPartition part =
      partition_proxies(clean.similarity.val(), clean.frame_weights.val(), f.cfg);
  AclAssignments assignments;
  AclScores scores = acl_forward_tape(tape, nodes, rec.video.region_features,
                                      rec.query.object_features, f.cfg, part, banks,
                                      clean.video_score, std::nullopt, true, true,
                                      &assignments);

  // recomputation oracle for the spatial-content pass (per object, averaged)
  const int K = static_cast<int>(rec.query.object_ids.size());
  const int N = f.cfg.regions;
  const int c_sp = std::min(f.cfg.content_regions, N - f.cfg.content_regions);
  double mean_p = 0.0;
  for (int k = 0; k < K; ++k) {
    std::vector<int> rows;
    for (int t = 0; t < f.cfg.frames; ++t)
      for (int i = 0; i < c_sp; ++i)
        rows.push_back(t * N + part.region_content[k][t][i]);
    Matrix intervened =
        replace_rows_with_bank(rec.video.region_features, rows, banks.region, nullptr);
    mean_p +=
        forward_plain(f.params, intervened, rec.query.object_features, f.cfg).video_score;
  }
  mean_p /= K;
  CHECK(scores.spatial_content.scalar() == doctest::Approx(mean_p).epsilon(1e-12));

  // temporal-style pass oracle
  const int c_tmp = std::min(f.cfg.content_frames, f.cfg.frames - f.cfg.content_frames);
  double mean_pt = 0.0;
  for (int k = 0; k < K; ++k) {
    std::vector<int> rows;
    for (int i = 0; i < c_tmp; ++i) {
      int t = part.frame_style[k][i];
      for (int n = 0; n < N; ++n) rows.push_back(t * N + n);
    }
    Matrix intervened =
        replace_rows_with_bank(rec.video.region_features, rows, banks.region, nullptr);
    mean_pt +=
        forward_plain(f.params, intervened, rec.query.object_features, f.cfg).video_score;
  }
  mean_pt /= K;
  CHECK(scores.temporal_style.scalar() == doctest::Approx(mean_pt).epsilon(1e-12));

  // the paired passes replaced equally many elements
  // spatial: c_sp per frame per object for content and style alike;
  // temporal: c_tmp full frames per object on both sides.
  CHECK(assignments.region.size() > 0);
  CHECK(assignments.frame.size() == static_cast<size_t>(2 * K * c_tmp));
}

TEST_CASE("self-replacement leaves the score unchanged") {
  AclFixture f(8);
  const PairRecord& rec = f.ds.records[1];
  // a bank holding exactly the video's regions replaces every row by itself
  MemoryBank self_bank;
  self_bank.vectors = rec.video.region_features;
  std::vector<int> rows{0, 1, 5};
  Matrix replaced = replace_rows_with_bank(rec.video.region_features, rows, self_bank,
                                           nullptr);
  CHECK(same_matrix(replaced, rec.video.region_features));
}

TEST_CASE("empty intervention sizes degrade to the clean score") {
  AclFixture f(9);
  f.cfg.content_regions = 0;
  f.cfg.content_frames = 0;
  const PairRecord& rec = f.ds.records[2];
  MemoryBanks banks = init_banks(f.ds, f.cfg, RandomStream(9, "banks"));

  ad::Tape tape;
  ParamNodes nodes = make_param_nodes(tape, f.params);
  TapeForward clean = forward_tape(tape, nodes, rec.video.region_features,
                                   rec.query.object_features, f.cfg);
  ProxyPartition part =
      partition_proxies(clean.similarity.val(), clean.frame_weights.val(), f.cfg);
  AclScores scores = acl_forward_tape(tape, nodes, rec.video.region_features,
                                      rec.query.object_features, f.cfg, part, banks,
                                      clean.video_score, std::nullopt, true, true,
                                      nullptr);
  CHECK(scores.spatial_content.scalar() == clean.video_score.scalar());
  CHECK(scores.spatial_style.scalar() == clean.video_score.scalar());
  CHECK(scores.temporal_content.scalar() == clean.video_score.scalar());
  CHECK(scores.temporal_style.scalar() == clean.video_score.scalar());
}

TRACED_TEST_CASE("F15,F03", "contrastive loss values") {
  const double eta = 0.2;
  // equal effects on both levels
  CHECK(acl_loss(0.6, 0.4, 0.4, 0.5, 0.5, eta) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  // content dominates by 10*eta on both levels
  double p = 0.9;
  double loss = acl_loss(p, p - 10.0 * eta - 0.0, p - 0.0, p - 10.0 * eta, p, eta);
  CHECK(loss == doctest::Approx(2.0 * log_loss(-10.0 * eta, eta)).epsilon(1e-9));
  CHECK(loss < 1e-4);

  // tape mirror equals the plain formula
  ad::Tape tape;
  auto scalar = [&](double v) { return tape.constant(Matrix::Constant(1, 1, v)); };
  AclScores s{scalar(0.42), scalar(0.63), scalar(0.55), scalar(0.38)};
  ad::Value l = acl_loss_tape(tape, scalar(0.8), s, eta, true, true);
  CHECK(l.scalar() ==
        doctest::Approx(acl_loss(0.8, 0.42, 0.63, 0.55, 0.38, eta)).epsilon(1e-12));
}

TRACED_TEST_CASE("F12,F13", "bank update averages originals and applies momentum") {
  MemoryBanks banks;
  banks.region.momentum = 0.9;
  banks.frame.momentum = 0.9;
  banks.region.vectors = Matrix::Ones(2, 2);
  banks.frame.vectors = Matrix::Ones(1, 2);

  AclAssignments a;
  Vector v1(2), v2(2);
  v1 << 1, 2;
  v2 << 3, 4;
  a.region.emplace_back(1, v1);
  a.region.emplace_back(1, v2);
  update_banks(banks, a);

  // untouched vector is bit-identical
  CHECK(banks.region.vectors(0, 0) == 1.0);
  CHECK(banks.region.vectors(0, 1) == 1.0);
  // assigned vector moved toward the mean (2,3)
  CHECK(banks.region.vectors(1, 0) == doctest::Approx(0.9 * 1.0 + 0.1 * 2.0));
  CHECK(banks.region.vectors(1, 1) == doctest::Approx(0.9 * 1.0 + 0.1 * 3.0));

  // momentum arithmetic is exact: 0.9*1.0 + 0.1*0.0 == 0.9
  MemoryBanks exact;
  exact.region.momentum = 0.9;
  exact.frame.momentum = 0.9;
  exact.region.vectors = Matrix::Ones(1, 1);
  exact.frame.vectors = Matrix::Ones(1, 1);
  AclAssignments zero;
  zero.region.emplace_back(0, Vector::Zero(1));
  update_banks(exact, zero);
  CHECK(exact.region.vectors(0, 0) == 0.9 * 1.0 + (1.0 - 0.9) * 0.0);

  // momentum 1 is a no-op
  MemoryBanks frozen;
  frozen.region.momentum = 1.0;
  frozen.frame.momentum = 1.0;
  frozen.region.vectors = Matrix::Constant(1, 2, 0.123456789);
  frozen.frame.vectors = Matrix::Constant(1, 2, 0.5);
  AclAssignments b;
  b.region.emplace_back(0, v1);
  update_banks(frozen, b);
  CHECK(frozen.region.vectors(0, 0) == 0.123456789);
  CHECK(frozen.region.vectors(0, 1) == 0.123456789);

  // no assignments leaves banks bit-identical
  RandomStream rng(77, "u");
  MemoryBanks untouched;
  untouched.region.momentum = 0.9;
  untouched.frame.momentum = 0.9;
  untouched.region.vectors = random_matrix(3, 2, rng);
  untouched.frame.vectors = untouched.region.vectors;
  Matrix before = untouched.region.vectors;
  update_banks(untouched, AclAssignments{});
  CHECK(same_matrix(untouched.region.vectors, before));
}
