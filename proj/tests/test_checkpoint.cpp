#include <doctest.h>

#include "groundlab/checkpoint.hpp"
#include "support/helpers.hpp"

using namespace groundlab;
using groundlab_test::read_bytes;
using groundlab_test::same_matrix;

TEST_CASE("checkpoints round-trip bit-exactly") {
  groundlab_test::TempDir tmp("ckpt");
  RandomStream rng(1, "ckpt");

  Checkpoint ckpt;
  ckpt.config = Config::preset("tiny");
  ckpt.stage = 2;
  ckpt.step = 123;
  ckpt.variant = "full";
  ckpt.add("params.visual.w", groundlab_test::random_matrix(8, 6, rng));
  ckpt.add("bank.region", groundlab_test::random_matrix(4, 6, rng));
  ckpt.add("bda.prior", groundlab_test::random_matrix(6, 1, rng).cwiseAbs());
  ckpt.add("opt.t", Matrix::Constant(1, 1, 41.0));

  save_checkpoint(ckpt, tmp.sub("a.bin"));
  Checkpoint back = load_checkpoint(tmp.sub("a.bin"));
  CHECK(back.stage == 2);
  CHECK(back.step == 123);
  CHECK(back.variant == "full");
  CHECK(back.config.to_json() == ckpt.config.to_json());
  REQUIRE(back.arrays.size() == ckpt.arrays.size());
  for (size_t i = 0; i < back.arrays.size(); ++i) {
    CHECK(back.arrays[i].first == ckpt.arrays[i].first);
    CHECK(same_matrix(back.arrays[i].second, ckpt.arrays[i].second));
  }

  save_checkpoint(back, tmp.sub("b.bin"));
  CHECK(read_bytes(tmp.sub("a.bin")) == read_bytes(tmp.sub("b.bin")));
}

TEST_CASE("corrupt checkpoints are rejected") {
  groundlab_test::TempDir tmp("ckpt_bad");
  CHECK_THROWS_AS(load_checkpoint(tmp.sub("missing.bin")), IoError);

  std::ofstream out(tmp.sub("junk.bin"), std::ios::binary);
  out << "not a checkpoint at all";
  out.close();
  CHECK_THROWS_AS(load_checkpoint(tmp.sub("junk.bin")), SchemaError);
}
