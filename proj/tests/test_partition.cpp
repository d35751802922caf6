#include <doctest.h>

#include <vector>

#include "kaap/partition.hpp"
#include "kaap/rng.hpp"

using namespace kaap;

TEST_CASE("balanced 1-D partitions") {
  SUBCASE("even division") {
    const PartitionScheme s = make_parts_1d(6, 3);
    REQUIRE(s.spans.size() == 3);
    CHECK(s.spans[0].begin == 0);
    CHECK(s.spans[0].end == 2);
    CHECK(s.spans[1].begin == 2);
    CHECK(s.spans[1].end == 4);
    CHECK(s.spans[2].begin == 4);
    CHECK(s.spans[2].end == 6);
  }

  SUBCASE("remainder goes to the leading parts") {
    const PartitionScheme s = make_parts_1d(7, 3);
    REQUIRE(s.spans.size() == 3);
    CHECK(s.spans[0].size() == 3);
    CHECK(s.spans[1].size() == 2);
    CHECK(s.spans[2].size() == 2);
  }

  SUBCASE("singletons") {
    const PartitionScheme s = make_parts_1d(5, 5);
    REQUIRE(s.spans.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(s.spans[i].begin == i);
      CHECK(s.spans[i].size() == 1);
    }
  }

  SUBCASE("rejects bad part counts") {
    CHECK_THROWS_AS(make_parts_1d(4, 5), ConfigError);
    CHECK_THROWS_AS(make_parts_1d(4, 1), ConfigError);
    CHECK_THROWS_AS(make_parts_1d(4, 0), ConfigError);
  }
}

TEST_CASE("balanced 2-D partitions") {
  SUBCASE("four 2x2 blocks") {
    const PartitionScheme s = make_parts_2d(4, 2);
    REQUIRE(s.blocks.size() == 4);
    for (const Block2D& b : s.blocks) {
      CHECK(b.rows.size() == 2);
      CHECK(b.cols.size() == 2);
    }
  }

  SUBCASE("128 split 7 ways: two of 19, five of 18 per axis") {
    const PartitionScheme s = make_parts_2d(128, 7);
    REQUIRE(s.blocks.size() == 49);
    std::vector<std::size_t> row_sizes;
    for (std::size_t i = 0; i < 7; ++i) row_sizes.push_back(s.blocks[i * 7].rows.size());
    CHECK(row_sizes == std::vector<std::size_t>{19, 19, 18, 18, 18, 18, 18});
  }

  SUBCASE("nine 1x1 blocks") {
    const PartitionScheme s = make_parts_2d(3, 3);
    REQUIRE(s.blocks.size() == 9);
    for (const Block2D& b : s.blocks) {
      CHECK(b.rows.size() == 1);
      CHECK(b.cols.size() == 1);
    }
  }
}

TEST_CASE("partition coverage, disjointness and balance over the full grid") {
  for (std::size_t l = 1; l <= 256; ++l) {
    for (std::size_t j = 2; j <= 10 && j <= l; ++j) {
      const PartitionScheme s = make_parts_1d(l, j);
      REQUIRE(s.spans.size() == j);
      std::size_t cursor = 0;
      std::size_t lo = l, hi = 0;
      for (const Span1D& span : s.spans) {
        REQUIRE(span.begin == cursor);  // contiguous => disjoint and covering
        cursor = span.end;
        lo = std::min(lo, span.size());
        hi = std::max(hi, span.size());
      }
      REQUIRE(cursor == l);
      REQUIRE(hi - lo <= 1);
    }
  }
}

TEST_CASE("determinism: identical inputs give identical schemes") {
  const PartitionScheme a = make_parts_1d(37, 6);
  const PartitionScheme b = make_parts_1d(37, 6);
  REQUIRE(a.spans.size() == b.spans.size());
  for (std::size_t i = 0; i < a.spans.size(); ++i) {
    CHECK(a.spans[i].begin == b.spans[i].begin);
    CHECK(a.spans[i].end == b.spans[i].end);
  }
}

TEST_CASE("keep-only and drop are complementary") {
  Rng rng(11);

  SUBCASE("2-D tensors with channels") {
    Tensor t = Tensor::zeros({6, 6, 2});
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    for (std::size_t j = 2; j <= 4; ++j) {
      for (const Block2D& block : make_parts_2d(6, j).blocks) {
        const Tensor keep = perturb(t, block, PerturbMode::keep_only);
        const Tensor drop = perturb(t, block, PerturbMode::drop);
        for (std::size_t i = 0; i < t.size(); ++i) {
          REQUIRE(keep.data[i] + drop.data[i] == t.data[i]);
        }
      }
    }
  }

  SUBCASE("token sequences") {
    TokenSeq tokens = {3, 1, 4, 1, 5, 9, 2, 6};
    for (const Span1D& span : make_parts_1d(tokens.size(), 3).spans) {
      const TokenSeq keep = perturb(tokens, span, PerturbMode::keep_only);
      const TokenSeq drop = perturb(tokens, span, PerturbMode::drop);
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        REQUIRE(keep[i] + drop[i] == tokens[i]);
      }
    }
  }
}

TEST_CASE("perturbation edge cases") {
  Tensor t = Tensor::full({4, 4, 1}, 0.5);
  const Block2D full{{0, 4}, {0, 4}};

  SUBCASE("drop of the full domain zeroes everything") {
    const Tensor dropped = perturb(t, full, PerturbMode::drop);
    CHECK(dropped.all_zero());
  }

  SUBCASE("keep-only on a zero input stays zero") {
    const Tensor z = Tensor::zeros({4, 4, 1});
    const Tensor kept = perturb(z, Block2D{{0, 2}, {0, 2}}, PerturbMode::keep_only);
    CHECK(kept.all_zero());
  }

  SUBCASE("out-of-bounds parts are rejected") {
    CHECK_THROWS_AS(perturb(t, Block2D{{0, 5}, {0, 4}}, PerturbMode::drop), ShapeError);
    TokenSeq tokens = {1, 2, 3};
    CHECK_THROWS_AS(perturb(tokens, Span1D{2, 4}, PerturbMode::drop), ShapeError);
  }
}
