#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kaap/kselect.hpp"
#include "kaap/rng.hpp"
#include "kaap/serialize.hpp"

using namespace kaap;

namespace {

AttributionMap make_text_map(std::vector<double> values) {
  AttributionMap map;
  map.domain = AttributionMap::Domain::text;
  map.shape = {values.size()};
  map.values = std::move(values);
  return map;
}

AdditiveModel random_image_model(std::uint64_t seed, const InputSpec& spec) {
  Rng rng(seed);
  AdditiveModel::Config cfg;
  cfg.image_weights = Tensor::zeros(spec.image_shape);
  for (double& v : cfg.image_weights.data) v = rng.uniform(-0.5, 0.5);
  cfg.speech_weights = Tensor::zeros(spec.speech_shape);
  cfg.text_weights = Tensor::zeros({spec.text_len});
  cfg.image_dir = ClassProbs{{1.0, -0.5, 0.25, 0.0}};
  cfg.speech_dir = ClassProbs{};
  cfg.text_dir = ClassProbs{};
  cfg.softmax = false;
  return AdditiveModel(std::move(cfg));
}

}  // namespace

TEST_CASE("dice coefficient") {
  SUBCASE("identical maps are completely similar") {
    const AttributionMap a = make_text_map({0.4, 0.1, 0.3, 0.2});
    CHECK(dice(a, a, 0.25) == 1.0);
    CHECK(dice(a, a, 0.5) == 1.0);
    CHECK(dice(a, a, 1.0) == 1.0);
  }

  SUBCASE("disjoint top supports are completely dissimilar") {
    const AttributionMap a = make_text_map({1.0, 0.9, 0.1, 0.0});
    const AttributionMap b = make_text_map({0.0, 0.1, 0.9, 1.0});
    CHECK(dice(a, b, 0.5) == 0.0);
  }

  SUBCASE("four elements at quarter fraction keep one element each") {
    const AttributionMap a = make_text_map({0.7, 0.1, 0.1, 0.1});
    const AttributionMap b = make_text_map({0.9, 0.05, 0.03, 0.02});
    CHECK(dice(a, b, 0.25) == 1.0);  // masks {0} and {0}
  }

  SUBCASE("symmetry") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> va(12), vb(12);
      for (double& v : va) v = rng.uniform(-1.0, 1.0);
      for (double& v : vb) v = rng.uniform(-1.0, 1.0);
      const AttributionMap a = make_text_map(va);
      const AttributionMap b = make_text_map(vb);
      REQUIRE(dice(a, b, 0.25) == dice(b, a, 0.25));
    }
  }

  SUBCASE("empty masks count as similar") {
    const AttributionMap a = make_text_map({1.0, 0.5});
    const AttributionMap b = make_text_map({0.5, 1.0});
    CHECK(dice(a, b, 0.25) == 1.0);  // floor(0.25 * 2) = 0 selected elements
  }

  SUBCASE("ties break toward the lowest index") {
    const AttributionMap a = make_text_map({0.5, 0.5, 0.5, 0.1});
    const AttributionMap b = make_text_map({0.5, 0.1, 0.1, 0.1});
    CHECK(dice(a, b, 0.25) == 1.0);  // both masks pick index 0
  }

  SUBCASE("errors") {
    const AttributionMap a = make_text_map({1.0, 0.0});
    const AttributionMap b = make_text_map({1.0, 0.0, 0.0});
    CHECK_THROWS_AS(dice(a, b, 0.25), ShapeError);
    CHECK_THROWS_AS(dice(a, a, 0.0), ConfigError);
    CHECK_THROWS_AS(dice(a, a, 1.5), ConfigError);
  }
}

TEST_CASE("select_k") {
  const InputSpec spec = desk_input_spec(8, 1, 8, 6);

  SUBCASE("identical maps for every k select the first candidate") {
    // A constant model produces the all-zero map at every k.
    const ConstantModel model(ClassProbs::uniform(), spec);
    const std::vector<MultimodalSample> samples = {ones_sample(spec)};
    SelectKOptions opts;
    opts.k_max = 6;
    const DiceCurve curve = select_k(model, samples, Modality::image, opts);
    CHECK(curve.selected_k == 3);
    CHECK(curve.converged);
    REQUIRE(curve.points.size() == 4);  // k = 3..6
    for (const auto& [k, value] : curve.points) CHECK(value == 1.0);
  }

  SUBCASE("selected k stays within [2, k_max] and the run is deterministic") {
    const AdditiveModel model = random_image_model(42, spec);
    std::vector<MultimodalSample> samples;
    Rng rng(43);
    for (int i = 0; i < 2; ++i) {
      MultimodalSample s = ones_sample(spec);
      for (double& v : s.image.data) v = rng.uniform(0.0, 1.0);
      samples.push_back(std::move(s));
    }
    SelectKOptions opts;
    opts.k_max = 8;
    const DiceCurve a = select_k(model, samples, Modality::image, opts);
    const DiceCurve b = select_k(model, samples, Modality::image, opts);
    CHECK(a.selected_k >= 2);
    CHECK(a.selected_k <= 8);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
      CHECK(a.points[i].second == b.points[i].second);
    }
    CHECK(a.selected_k == b.selected_k);
  }

  SUBCASE("unreachable threshold falls back to k_max with a warning flag") {
    // Deterministic pseudo-random scorer: every distinct perturbed input gets
    // an unrelated score, so adjacent-k maps share almost no structure and
    // the dice curve stays far below 1.
    struct HashModel : Predictor {
      InputSpec spec;
      explicit HashModel(InputSpec s) : spec(std::move(s)) {}
      ClassProbs predict(const MultimodalSample& s) const override {
        spec.check(s);
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&h](std::uint64_t x) {
          h ^= x;
          h *= 1099511628211ull;
        };
        for (double v : s.image.data) mix(static_cast<std::uint64_t>(v * (1ull << 40)));
        for (double v : s.speech.data) mix(static_cast<std::uint64_t>(v * (1ull << 40)));
        for (std::uint32_t t : s.text) mix(t + 1);
        const double score = static_cast<double>(h >> 11) * 0x1.0p-53;
        return ClassProbs{{score, score, score, score}};
      }
      bool probability_output() const override { return false; }
      InputSpec input_spec() const override { return spec; }
    };

    const HashModel model(spec);
    std::vector<MultimodalSample> samples;
    Rng rng(71);
    MultimodalSample s = ones_sample(spec);
    for (double& v : s.image.data) v = rng.uniform(0.0, 1.0);
    samples.push_back(std::move(s));
    SelectKOptions opts;
    opts.k_max = 6;
    opts.threshold = 1.0;
    opts.q = 0.25;
    opts.target = 0;
    const DiceCurve curve = select_k(model, samples, Modality::image, opts);
    CHECK_FALSE(curve.converged);
    CHECK(curve.selected_k == opts.k_max);
    for (const auto& [k, value] : curve.points) CHECK(value < 1.0);
  }

  SUBCASE("validation") {
    const ConstantModel model(ClassProbs::uniform(), spec);
    SelectKOptions opts;
    CHECK_THROWS_AS(select_k(model, {}, Modality::image, opts), ConfigError);
    opts.k_max = 2;
    const std::vector<MultimodalSample> samples = {ones_sample(spec)};
    CHECK_THROWS_AS(select_k(model, samples, Modality::image, opts), ConfigError);
  }
}

TEST_CASE("dice curve CSV format") {
  DiceCurve curve;
  curve.modality = Modality::text;
  curve.points = {{3, 0.5}, {4, 0.9609375}, {5, 1.0}};
  curve.selected_k = 5;
  curve.converged = true;
  std::ostringstream os;
  write_dice_curve_csv(os, curve);
  CHECK(os.str() ==
        "modality,k,dice,selected\n"
        "text,3,0.5,0\n"
        "text,4,0.9609375,0\n"
        "text,5,1,1\n");
}
