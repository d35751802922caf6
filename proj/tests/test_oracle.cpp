#include <doctest.h>

#include <cmath>

#include "kaap/oracle.hpp"
#include "kaap/rng.hpp"

using namespace kaap;

TEST_CASE("exact Shapley on closed-form games") {
  SUBCASE("additive games return their per-player weights") {
    const std::vector<double> weights = {0.5, -1.25, 2.0, 0.125};
    const ShapleyResult r = exact_shapley(ValueFunction::additive(weights, 0.3));
    REQUIRE(r.per_player.size() == 4);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      CHECK(r.per_player[i] == doctest::Approx(weights[i]).epsilon(1e-12));
    }
  }

  SUBCASE("symmetric games split the surplus equally") {
    // v(S) depends only on |S|
    std::vector<double> table(8);
    for (std::uint32_t mask = 0; mask < 8; ++mask) {
      table[mask] = static_cast<double>(__builtin_popcount(mask)) * 0.7 - 0.1;
    }
    const ShapleyResult r = exact_shapley(ValueFunction(3, table));
    const double share = (r.grand_value - r.empty_value) / 3.0;
    for (double phi : r.per_player) CHECK(phi == doctest::Approx(share).epsilon(1e-12));
  }

  SUBCASE("3-player majority game gives one third each") {
    const ShapleyResult r = exact_shapley(ValueFunction::majority3());
    for (double phi : r.per_player) CHECK(phi == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }

  SUBCASE("player bound") {
    CHECK_THROWS_AS(ValueFunction(17, std::vector<double>(1u << 17, 0.0)), ConfigError);
  }
}

TEST_CASE("Shapley axioms on random games") {
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(5);  // 2..6 players
    const ValueFunction game = ValueFunction::random(rng, n);
    const ShapleyResult r = exact_shapley(game);

    // efficiency
    double sum = 0.0;
    for (double phi : r.per_player) sum += phi;
    REQUIRE(std::fabs(sum - (r.grand_value - r.empty_value)) < 1e-9);

    // additivity: phi(g1 + g2) == phi(g1) + phi(g2)
    const ValueFunction other = ValueFunction::random(rng, n);
    std::vector<double> combined(game.table.size());
    for (std::size_t i = 0; i < combined.size(); ++i) combined[i] = game.table[i] + other.table[i];
    const ShapleyResult r2 = exact_shapley(other);
    const ShapleyResult r12 = exact_shapley(ValueFunction(n, combined));
    for (std::size_t i = 0; i < n; ++i) {
      REQUIRE(std::fabs(r12.per_player[i] - (r.per_player[i] + r2.per_player[i])) < 1e-9);
    }
  }
}

TEST_CASE("null players get exactly zero") {
  // v ignores player 0: duplicate the sub-table so adding player 0 never
  // changes the value.
  Rng rng(7);
  std::vector<double> base(1u << 3);
  for (double& v : base) v = rng.uniform(-2.0, 2.0);
  std::vector<double> table(1u << 4);
  for (std::uint32_t mask = 0; mask < 16; ++mask) {
    table[mask] = base[mask >> 1];  // value depends on players 1..3 only
  }
  const ShapleyResult r = exact_shapley(ValueFunction(4, table));
  CHECK(r.per_player[0] == 0.0);
}

TEST_CASE("symmetric players get equal attributions") {
  // v depends on players 0 and 1 only through how many of them are present.
  Rng rng(8);
  std::vector<double> by_count(3 * 4);  // count of {0,1} in 0..2, players {2,3} mask in 0..3
  for (double& v : by_count) v = rng.uniform(-1.0, 1.0);
  std::vector<double> table(1u << 4);
  for (std::uint32_t mask = 0; mask < 16; ++mask) {
    const int count01 = static_cast<int>(mask & 1u) + static_cast<int>((mask >> 1) & 1u);
    const std::uint32_t rest = mask >> 2;
    table[mask] = by_count[count01 * 4 + rest];
  }
  const ShapleyResult r = exact_shapley(ValueFunction(4, table));
  CHECK(r.per_player[0] == doctest::Approx(r.per_player[1]).epsilon(1e-12));
}

TEST_CASE("1000 random 2-player games: kp(k=2) equals Shapley below 1e-12") {
  Rng rng(4242);
  double max_diff = 0.0;
  for (int g = 0; g < 1000; ++g) {
    const ValueFunction game = ValueFunction::random(rng, 2);
    const ShapleyResult exact = exact_shapley(game);
    for (std::size_t player = 0; player < 2; ++player) {
      const std::uint32_t bit = 1u << player;
      const double kp =
          kp_value(game.value(bit) - game.value(0), game.value(3) - game.value(3u ^ bit), 2);
      max_diff = std::max(max_diff, std::fabs(kp - exact.per_player[player]));
    }
  }
  CHECK(max_diff < 1e-12);
}

TEST_CASE("3-player kp is an approximation: the gap distribution is recorded") {
  Rng rng(5150);
  double gap_max = 0.0, gap_sum = 0.0;
  const int games = 500;
  for (int g = 0; g < games; ++g) {
    const ValueFunction game = ValueFunction::random(rng, 3);
    const ShapleyResult exact = exact_shapley(game);
    for (std::size_t player = 0; player < 3; ++player) {
      const std::uint32_t bit = 1u << player;
      const double kp =
          kp_value(game.value(bit) - game.value(0), game.value(7) - game.value(7u ^ bit), 3);
      const double gap = std::fabs(kp - exact.per_player[player]);
      gap_max = std::max(gap_max, gap);
      gap_sum += gap;
    }
  }
  const double gap_mean = gap_sum / (3.0 * games);
  CHECK(std::isfinite(gap_mean));
  // The approximation genuinely differs from exact Shapley for n=3.
  CHECK(gap_max > 1e-6);
  MESSAGE("kp(k=3) vs Shapley gap: mean=", gap_mean, " max=", gap_max);
}

TEST_CASE("reference map edge cases") {
  SUBCASE("constant model yields a zero map") {
    const InputSpec spec = desk_input_spec();
    const ConstantModel model(ClassProbs::uniform(), spec);
    EngineOptions opts;
    opts.k_max = 3;
    const AttributionMap map = reference_kaap(model, ones_sample(spec), Modality::image, opts);
    CHECK_FALSE(map.normalized);
    for (double v : map.values) CHECK(v == 0.0);
  }

  SUBCASE("degenerate 1x1 image clamps k") {
    const InputSpec spec{{1, 1, 1}, {8, 8}, 6};
    const ConstantModel model(ClassProbs::uniform(), spec);
    EngineOptions opts;
    opts.k_max = 2;
    const AttributionMap map = reference_kaap(model, ones_sample(spec), Modality::image, opts);
    CHECK(map.k_clamped);
    CHECK(map.k_used == 1);
  }

  SUBCASE("domains beyond 32 per axis are refused") {
    const InputSpec spec{{64, 64, 1}, {8, 8}, 6};
    const ConstantModel model(ClassProbs::uniform(), spec);
    EngineOptions opts;
    opts.k_max = 3;
    CHECK_THROWS_AS(reference_kaap(model, ones_sample(spec), Modality::image, opts), ConfigError);
  }
}

TEST_CASE("reference modality importance") {
  const InputSpec spec = desk_input_spec();

  SUBCASE("matches the engine on 100 random toy models") {
    Rng rng(31337);
    for (int trial = 0; trial < 100; ++trial) {
      AdditiveModel::Config cfg;
      auto rand_probs = [&rng]() {
        ClassProbs p;
        for (std::size_t c = 0; c < kNumClasses; ++c) p[c] = rng.uniform(-1.0, 1.0);
        return p;
      };
      cfg.bias = rand_probs();
      cfg.image_dir = rand_probs();
      cfg.speech_dir = rand_probs();
      cfg.text_dir = rand_probs();
      cfg.image_weights = Tensor::zeros(spec.image_shape);
      cfg.speech_weights = Tensor::zeros(spec.speech_shape);
      cfg.text_weights = Tensor::zeros({spec.text_len});
      for (double& v : cfg.image_weights.data) v = rng.uniform(-0.2, 0.2);
      for (double& v : cfg.speech_weights.data) v = rng.uniform(-0.2, 0.2);
      for (double& v : cfg.text_weights.data) v = rng.uniform(-0.2, 0.2);
      cfg.softmax = trial % 2 == 0;
      const AdditiveModel model(std::move(cfg));

      MultimodalSample sample;
      sample.image = Tensor::zeros(spec.image_shape);
      sample.speech = Tensor::zeros(spec.speech_shape);
      for (double& v : sample.image.data) v = rng.uniform(0.0, 1.0);
      for (double& v : sample.speech.data) v = rng.uniform(0.0, 1.0);
      sample.text.assign(spec.text_len, 0);
      for (auto& t : sample.text) t = 1 + static_cast<std::uint32_t>(rng.below(15));

      const ModalityImportance engine = modality_importance(model, sample);
      const ModalityImportance reference = reference_modality_importance(model, sample);
      REQUIRE(std::fabs(engine.image - reference.image) < 1e-12);
      REQUIRE(std::fabs(engine.speech - reference.speech) < 1e-12);
      REQUIRE(std::fabs(engine.text - reference.text) < 1e-12);
      REQUIRE(engine.target_class == reference.target_class);
    }
  }

  SUBCASE("constant model gives zeros") {
    const ConstantModel model(ClassProbs::uniform(), spec);
    const ModalityImportance r = reference_modality_importance(model, ones_sample(spec));
    CHECK(r.image == 0.0);
    CHECK(r.speech == 0.0);
    CHECK(r.text == 0.0);
  }

  SUBCASE("table games give kp(k=3) per player") {
    Rng rng(99);
    const ValueFunction game = ValueFunction::random(rng, 3);
    const TableGameModel model(game, spec);
    const MultimodalSample sample = ones_sample(spec);
    const ModalityImportance r = reference_modality_importance(model, sample, 0);
    // player order: image=0, speech=1, text=2
    const double expect_image =
        kp_value(game.value(1) - game.value(0), game.value(7) - game.value(6), 3);
    const double expect_speech =
        kp_value(game.value(2) - game.value(0), game.value(7) - game.value(5), 3);
    const double expect_text =
        kp_value(game.value(4) - game.value(0), game.value(7) - game.value(3), 3);
    CHECK(r.image == doctest::Approx(expect_image).epsilon(1e-12));
    CHECK(r.speech == doctest::Approx(expect_speech).epsilon(1e-12));
    CHECK(r.text == doctest::Approx(expect_text).epsilon(1e-12));

    // majority game: kp gives zero for every player while Shapley gives 1/3
    const TableGameModel majority(ValueFunction::majority3(), spec);
    const ModalityImportance m = reference_modality_importance(majority, sample, 0);
    CHECK(m.image == 0.0);
    CHECK(m.speech == 0.0);
    CHECK(m.text == 0.0);
  }
}

TEST_CASE("shapley result efficiency invariant") {
  Rng rng(1);
  const ValueFunction game = ValueFunction::random(rng, 5);
  const ShapleyResult r = exact_shapley(game);
  double sum = 0.0;
  for (double phi : r.per_player) sum += phi;
  CHECK(std::fabs(sum - (game.grand_value() - game.empty_value())) < 1e-9);
}
