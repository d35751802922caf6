#include <doctest.h>

#include <cmath>
#include <limits>

#include "kaap/predictor.hpp"
#include "kaap/rng.hpp"

using namespace kaap;

namespace {

AdditiveModel::Config make_additive_config(const InputSpec& spec, const ClassProbs& bias,
                                           const ClassProbs& a_img, const ClassProbs& a_sp,
                                           const ClassProbs& a_txt, bool softmax) {
  // Unit-mean feature maps so a ones-sample activates each modality with 1.0.
  AdditiveModel::Config cfg;
  cfg.bias = bias;
  cfg.image_weights =
      Tensor::full(spec.image_shape, 1.0 / static_cast<double>(Tensor::element_count(spec.image_shape)));
  cfg.speech_weights = Tensor::full(
      spec.speech_shape, 1.0 / static_cast<double>(Tensor::element_count(spec.speech_shape)));
  cfg.text_weights = Tensor::full({spec.text_len}, 1.0 / static_cast<double>(spec.text_len));
  cfg.image_dir = a_img;
  cfg.speech_dir = a_sp;
  cfg.text_dir = a_txt;
  cfg.softmax = softmax;
  return cfg;
}

ClassProbs softmax_by_hand(const ClassProbs& scores) {
  double mx = scores[0];
  for (std::size_t c = 1; c < kNumClasses; ++c) mx = std::max(mx, scores[c]);
  double denom = 0.0;
  ClassProbs out;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out[c] = std::exp(scores[c] - mx);
    denom += out[c];
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) out[c] /= denom;
  return out;
}

}  // namespace

TEST_CASE("constant stub returns uniform probabilities for any sample") {
  const InputSpec spec = desk_input_spec();
  const ConstantModel model(ClassProbs::uniform(), spec);
  const ClassProbs p = model.predict(ones_sample(spec));
  for (std::size_t c = 0; c < kNumClasses; ++c) CHECK(p[c] == 0.25);
  CHECK(model.probability_output());
}

TEST_CASE("additive model matches the hand-computed forward pass") {
  const InputSpec spec = desk_input_spec();
  const ClassProbs bias{{0.1, -0.2, 0.05, 0.0}};
  const ClassProbs a_img{{0.4, 0.1, -0.3, 0.2}};
  const ClassProbs a_sp{{-0.1, 0.3, 0.2, 0.1}};
  const ClassProbs a_txt{{0.2, 0.2, 0.1, -0.4}};
  const AdditiveModel model(make_additive_config(spec, bias, a_img, a_sp, a_txt, true));

  const MultimodalSample sample = ones_sample(spec);
  ClassProbs expected_scores;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    expected_scores[c] = bias[c] + a_img[c] + a_sp[c] + a_txt[c];
  }
  const ClassProbs expected = softmax_by_hand(expected_scores);
  const ClassProbs got = model.predict(sample);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    CHECK(got[c] == doctest::Approx(expected[c]).epsilon(1e-12));
  }
}

TEST_CASE("masked prediction") {
  const InputSpec spec = desk_input_spec();
  const ClassProbs bias{{0.1, -0.2, 0.05, 0.0}};
  const ClassProbs a_img{{0.4, 0.1, -0.3, 0.2}};
  const ClassProbs a_sp{{-0.1, 0.3, 0.2, 0.1}};
  const ClassProbs a_txt{{0.2, 0.2, 0.1, -0.4}};
  const AdditiveModel model(make_additive_config(spec, bias, a_img, a_sp, a_txt, true));
  const MultimodalSample sample = ones_sample(spec);

  SUBCASE("all-include mask equals predict exactly") {
    const ClassProbs direct = model.predict(sample);
    const ClassProbs masked = predict_masked(model, sample, ModalityMask::all_included());
    for (std::size_t c = 0; c < kNumClasses; ++c) CHECK(masked[c] == direct[c]);
  }

  SUBCASE("all-exclude mask gives the baseline output") {
    const ClassProbs baseline = model.predict(zeroed_like(sample));
    const ClassProbs masked = predict_masked(model, sample, ModalityMask::all_excluded());
    for (std::size_t c = 0; c < kNumClasses; ++c) CHECK(masked[c] == baseline[c]);
  }

  SUBCASE("image-only mask equals softmax(bias + image contribution)") {
    ClassProbs scores;
    for (std::size_t c = 0; c < kNumClasses; ++c) scores[c] = bias[c] + a_img[c];
    const ClassProbs expected = softmax_by_hand(scores);
    const ClassProbs masked = predict_masked(model, sample, ModalityMask::only(Modality::image));
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      CHECK(masked[c] == doctest::Approx(expected[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("additive model with equal directions is symmetric under modality permutation") {
  const InputSpec spec{{4, 4, 1}, {4, 4}, 16};
  const ClassProbs shared{{0.3, -0.1, 0.2, 0.1}};
  const AdditiveModel model(
      make_additive_config(spec, ClassProbs{}, shared, shared, shared, true));

  MultimodalSample s = ones_sample(spec);
  // image fully on, speech off
  MultimodalSample a = s;
  a.speech = Tensor::zeros(spec.speech_shape);
  // speech fully on, image off
  MultimodalSample b = s;
  b.image = Tensor::zeros(spec.image_shape);

  const ClassProbs pa = model.predict(a);
  const ClassProbs pb = model.predict(b);
  for (std::size_t c = 0; c < kNumClasses; ++c) CHECK(pa[c] == pb[c]);
}

TEST_CASE("table-game model reproduces the game table over all eight masks") {
  const InputSpec spec = desk_input_spec();
  const TableGameModel model(ValueFunction::majority3(), spec);
  const MultimodalSample sample = ones_sample(spec);

  for (unsigned mask_bits = 0; mask_bits < 8; ++mask_bits) {
    ModalityMask mask;
    mask.image = (mask_bits & 1u) != 0;
    mask.speech = (mask_bits & 2u) != 0;
    mask.text = (mask_bits & 4u) != 0;
    const double expected = model.game().value(mask_bits);
    const ClassProbs p = predict_masked(model, sample, mask);
    for (std::size_t c = 0; c < kNumClasses; ++c) CHECK(p[c] == expected);
  }
  CHECK_FALSE(model.probability_output());
}

TEST_CASE("predictions are deterministic") {
  const InputSpec spec = desk_input_spec();
  Rng rng(5);
  AdditiveModel::Config cfg = make_additive_config(
      spec, ClassProbs{{0.1, 0.2, 0.3, 0.4}}, ClassProbs{{1, 2, 3, 4}},
      ClassProbs{{4, 3, 2, 1}}, ClassProbs{{0.5, 0.5, 0.5, 0.5}}, true);
  for (double& v : cfg.image_weights.data) v = rng.uniform(-1.0, 1.0);
  const AdditiveModel model(std::move(cfg));

  MultimodalSample sample = ones_sample(spec);
  for (double& v : sample.image.data) v = rng.uniform(0.0, 1.0);
  const ClassProbs a = model.predict(sample);
  const ClassProbs b = model.predict(sample);
  for (std::size_t c = 0; c < kNumClasses; ++c) CHECK(a[c] == b[c]);
}

TEST_CASE("probability-mode outputs sum to one over 10000 random inputs") {
  const InputSpec spec = desk_input_spec();
  const AdditiveModel model(make_additive_config(spec, ClassProbs{{0.1, -0.4, 0.3, 0.2}},
                                                 ClassProbs{{1, -1, 2, 0.5}},
                                                 ClassProbs{{-2, 1, 0.5, 1}},
                                                 ClassProbs{{0.3, 0.3, -0.6, 0.1}}, true));
  Rng rng(99);
  for (int i = 0; i < 10000; ++i) {
    MultimodalSample s;
    s.image = Tensor::zeros(spec.image_shape);
    s.speech = Tensor::zeros(spec.speech_shape);
    for (double& v : s.image.data) v = rng.uniform(0.0, 1.0);
    for (double& v : s.speech.data) v = rng.uniform(0.0, 1.0);
    s.text.resize(spec.text_len);
    for (auto& t : s.text) t = static_cast<std::uint32_t>(rng.below(16));
    const ClassProbs p = model.predict(s);
    REQUIRE(std::fabs(p.sum() - 1.0) <= 1e-9);
    for (std::size_t c = 0; c < kNumClasses; ++c) REQUIRE(p[c] >= 0.0);
  }
}

TEST_CASE("input validation") {
  const InputSpec spec = desk_input_spec();
  const ConstantModel model(ClassProbs::uniform(), spec);

  SUBCASE("shape mismatch is rejected") {
    MultimodalSample bad = ones_sample(desk_input_spec(4, 1, 8, 6));
    CHECK_THROWS_AS(model.predict(bad), ShapeError);
  }

  SUBCASE("non-finite sample entries are rejected") {
    MultimodalSample bad = ones_sample(spec);
    bad.image.data[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(model.predict(bad), NumericError);
  }

  SUBCASE("non-finite model output is a numeric error") {
    AdditiveModel::Config cfg = make_additive_config(
        spec, ClassProbs{}, ClassProbs{{1, 0, 0, 0}}, ClassProbs{}, ClassProbs{}, false);
    cfg.image_weights.data[0] = std::numeric_limits<double>::infinity();
    const AdditiveModel bad(std::move(cfg));
    CHECK_THROWS_AS(bad.predict(ones_sample(spec)), NumericError);
  }
}
