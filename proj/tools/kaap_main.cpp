// Command-line surface for the toolkit.
//
//   kaap predict    score a sample with a model, optionally masking modalities
//   kaap explain    attribution report + heatmaps for one sample
//   kaap validate   oracle suites: Shapley equivalence, additive efficiency,
//                   differential map check, KP-vs-Shapley gap distribution
//   kaap train      train a fusion topology on the synthetic dataset
//   kaap selectk    dice-based granularity selection curve
//   kaap labelfuse  probability averaging, labeling and threshold filtering
//
// Exit codes: 0 success, 1 validation breach, 2 parse/config error,
// 3 shape mismatch, 4 numeric error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "kaap/engine.hpp"
#include "kaap/errors.hpp"
#include "kaap/fusion.hpp"
#include "kaap/kselect.hpp"
#include "kaap/labelfuse.hpp"
#include "kaap/model_io.hpp"
#include "kaap/oracle.hpp"
#include "kaap/serialize.hpp"
#include "kaap/synthetic.hpp"

namespace fs = std::filesystem;
using namespace kaap;

namespace {

constexpr int kExitBreach = 1;
constexpr int kExitParse = 2;
constexpr int kExitShape = 3;
constexpr int kExitNumeric = 4;

std::unique_ptr<Predictor> load_model_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open model file: " + path);
  return load_model(is);
}

MultimodalSample load_sample_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open sample file: " + path);
  return read_sample_json(is);
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open output file: " + path.string());
  return os;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model_path;
  std::string input_path;
  bool mask_image = false;
  bool mask_speech = false;
  bool mask_text = false;
};

int run_predict(const PredictArgs& args) {
  const auto model = load_model_file(args.model_path);
  const MultimodalSample sample = load_sample_file(args.input_path);
  ModalityMask mask;
  mask.image = !args.mask_image;
  mask.speech = !args.mask_speech;
  mask.text = !args.mask_text;
  const ClassProbs probs = predict_masked(*model, sample, mask);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::cout << emotion_name(static_cast<int>(c)) << "," << fmt_double(probs[c]) << "\n";
  }
  std::cout << "predicted," << emotion_name(probs.argmax()) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

struct ExplainArgs {
  std::string model_path;
  std::string input_path;
  std::string out_dir;
  std::size_t k_image = default_k(Modality::image);
  std::size_t k_speech = default_k(Modality::speech);
  std::size_t k_text = default_k(Modality::text);
  int target = -1;  // -1: use the predicted class
  std::size_t threads = 0;
  std::uint64_t seed = 0;  // reserved; explain itself is deterministic
};

int run_explain(const ExplainArgs& args) {
  const auto model = load_model_file(args.model_path);
  const MultimodalSample sample = load_sample_file(args.input_path);

  const std::size_t threads =
      args.threads > 0 ? args.threads : std::max(1u, std::thread::hardware_concurrency());

  std::optional<int> target_override;
  if (args.target != -1) target_override = args.target;  // validated by select_target
  const int target = select_target(model->predict(sample), target_override);

  AttributionReport report;
  report.target_class = target;
  report.importance = modality_importance(*model, sample, target);

  EngineOptions opts;
  opts.target = target;
  opts.threads = threads;

  opts.k_max = args.k_image;
  report.image_map = kaap_map(*model, sample, Modality::image, opts);
  opts.k_max = args.k_speech;
  report.speech_map = kaap_map(*model, sample, Modality::speech, opts);
  opts.k_max = args.k_text;
  report.text_map = kaap_map(*model, sample, Modality::text, opts);

  for (const AttributionMap* m : {&report.image_map, &report.speech_map, &report.text_map}) {
    if (m->k_clamped) {
      std::cerr << "warning: k clamped to " << m->k_used << " by the domain size\n";
    }
  }

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  {
    std::ofstream os = open_output(dir / "report.json");
    write_attribution_report(os, report);
  }
  {
    std::ofstream os = open_output(dir / "image_map.pgm");
    write_pgm(os, report.image_map.shape[1], report.image_map.shape[0], report.image_map.values);
  }
  {
    // one-row strip over the time axis
    std::ofstream os = open_output(dir / "speech_map.pgm");
    write_pgm(os, report.speech_map.values.size(), 1, report.speech_map.values);
  }
  {
    std::ofstream os = open_output(dir / "text_map.csv");
    write_text_map_csv(os, sample.text, report.text_map);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

struct ValidateArgs {
  std::uint64_t seed = 42;
  std::string out_path;
  bool corrupt_kp = false;  // negative control: breaks the kp weights
};

double corrupted_kp_value(double mc_single, double mc_full, std::size_t k) {
  const double w = 1.0 / static_cast<double>(k) + 0.05;
  return w * mc_single + (1.0 - w) * mc_full;
}

struct SuiteOutcome {
  bool passed = true;
  std::ostringstream failures;
};

AdditiveModel::Config random_additive_config(Rng& rng, const InputSpec& spec, bool softmax) {
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
  cfg.softmax = softmax;
  return cfg;
}

MultimodalSample random_sample(Rng& rng, const InputSpec& spec, std::uint32_t vocab = 16) {
  MultimodalSample s;
  s.image = Tensor::zeros(spec.image_shape);
  s.speech = Tensor::zeros(spec.speech_shape);
  for (double& v : s.image.data) v = rng.uniform(0.0, 1.0);
  for (double& v : s.speech.data) v = rng.uniform(0.0, 1.0);
  s.text.resize(spec.text_len);
  for (auto& t : s.text) t = 1 + static_cast<std::uint32_t>(rng.below(vocab - 1));
  return s;
}

int run_validate(const ValidateArgs& args) {
  auto kp_fn = args.corrupt_kp ? corrupted_kp_value
                               : static_cast<double (*)(double, double, std::size_t)>(kp_value);

  // Suite 1: 2-player KP equals exact Shapley.
  double shapley_max_diff = 0.0;
  SuiteOutcome s1;
  {
    Rng rng(args.seed);
    for (int game_idx = 0; game_idx < 1000; ++game_idx) {
      const ValueFunction game = ValueFunction::random(rng, 2);
      const ShapleyResult exact = exact_shapley(game);
      for (std::size_t player = 0; player < 2; ++player) {
        const std::uint32_t bit = 1u << player;
        const std::uint32_t other = 3u ^ bit;
        const double kp = kp_fn(game.value(bit) - game.value(0),
                                game.value(3) - game.value(other), 2);
        const double diff = std::fabs(kp - exact.per_player[player]);
        shapley_max_diff = std::max(shapley_max_diff, diff);
        if (diff >= 1e-12 && s1.passed) {
          s1.passed = false;
          s1.failures << "game " << game_idx << " player " << player << ": kp=" << fmt_double(kp)
                      << " shapley=" << fmt_double(exact.per_player[player]);
        }
      }
    }
  }

  // Suite 2: additive efficiency.
  double additive_max_err = 0.0;
  SuiteOutcome s2;
  {
    Rng rng(args.seed + 1);
    const InputSpec spec = desk_input_spec();
    for (int idx = 0; idx < 100; ++idx) {
      const AdditiveModel model(random_additive_config(rng, spec, false));
      const MultimodalSample sample = random_sample(rng, spec);
      const ClassProbs p_f = model.predict(sample);
      const int target = p_f.argmax();
      const ModalityImportance imp = modality_importance(model, sample, target);
      const double p_b = predict_masked(model, sample, ModalityMask::all_excluded())[target];

      double sum = 0.0;
      for (Modality m : {Modality::image, Modality::speech, Modality::text}) {
        const double truth = model.contribution(m, sample)[target];
        const double err = std::fabs(imp.get(m) - truth);
        additive_max_err = std::max(additive_max_err, err);
        if (err >= 1e-9 && s2.passed) {
          s2.passed = false;
          s2.failures << "model " << idx << " " << modality_name(m)
                      << ": importance=" << fmt_double(imp.get(m)) << " truth=" << fmt_double(truth);
        }
        sum += imp.get(m);
      }
      const double eff = std::fabs(sum - (p_f[target] - p_b));
      additive_max_err = std::max(additive_max_err, eff);
      if (eff >= 1e-9 && s2.passed) {
        s2.passed = false;
        s2.failures << "model " << idx << ": sum=" << fmt_double(sum)
                    << " p_f-p_b=" << fmt_double(p_f[target] - p_b);
      }
    }
  }

  // Suite 3: optimized maps equal the straight-line reference.
  double differential_max_diff = 0.0;
  std::vector<double> per_instance_diff;
  SuiteOutcome s3;
  {
    Rng rng(args.seed + 2);
    const InputSpec spec = desk_input_spec(8, 1, 8, 6);
    for (int idx = 0; idx < 50; ++idx) {
      std::unique_ptr<Predictor> model;
      switch (idx % 3) {
        case 0: model = std::make_unique<AdditiveModel>(random_additive_config(rng, spec, false)); break;
        case 1: model = std::make_unique<AdditiveModel>(random_additive_config(rng, spec, true)); break;
        default: {
          FusionConfig fc;
          fc.seed = rng.next_u64();
          fc.embed_dim = 4;
          fc.image_h = fc.image_w = 8;
          fc.image_c = 1;
          fc.speech_f = fc.speech_t = 8;
          fc.text_len = 6;
          fc.vocab = 16;
          model = std::make_unique<FusionPredictor>(std::make_shared<FusionTopology>(fc));
          break;
        }
      }
      const MultimodalSample sample = random_sample(rng, spec);
      const Modality modality =
          idx % 3 == 0 ? Modality::image : (idx % 3 == 1 ? Modality::speech : Modality::text);
      EngineOptions opts;
      opts.k_max = 2 + static_cast<std::size_t>(rng.below(4));  // 2..5
      opts.threads = 1 + static_cast<std::size_t>(idx % 4);
      const AttributionMap fast = kaap_map(*model, sample, modality, opts);
      opts.threads = 1;
      const AttributionMap slow = reference_kaap(*model, sample, modality, opts);
      double max_diff = 0.0;
      for (std::size_t i = 0; i < fast.values.size(); ++i) {
        max_diff = std::max(max_diff, std::fabs(fast.values[i] - slow.values[i]));
      }
      per_instance_diff.push_back(max_diff);
      differential_max_diff = std::max(differential_max_diff, max_diff);
      if (max_diff >= 1e-12 && s3.passed) {
        s3.passed = false;
        s3.failures << "instance " << idx << " (" << modality_name(modality)
                    << ", k=" << opts.k_max << "): max diff " << fmt_double(max_diff);
      }
    }
  }

  // Gap distribution: 3-player KP vs exact Shapley (recorded, not asserted).
  double gap_max = 0.0, gap_mean = 0.0;
  std::vector<std::size_t> gap_histogram(10, 0);
  {
    Rng rng(args.seed + 3);
    const int games = 1000;
    std::vector<double> gaps;
    gaps.reserve(games * 3);
    for (int g = 0; g < games; ++g) {
      const ValueFunction game = ValueFunction::random(rng, 3);
      const ShapleyResult exact = exact_shapley(game);
      for (std::size_t player = 0; player < 3; ++player) {
        const std::uint32_t bit = 1u << player;
        const std::uint32_t rest = 7u ^ bit;
        const double kp =
            kp_value(game.value(bit) - game.value(0), game.value(7) - game.value(rest), 3);
        gaps.push_back(std::fabs(kp - exact.per_player[player]));
      }
    }
    for (double g : gaps) {
      gap_max = std::max(gap_max, g);
      gap_mean += g;
    }
    gap_mean /= static_cast<double>(gaps.size());
    for (double g : gaps) {
      std::size_t bucket = gap_max > 0.0
                               ? std::min<std::size_t>(9, static_cast<std::size_t>(10.0 * g / gap_max))
                               : 0;
      gap_histogram[bucket] += 1;
    }
  }

  const bool all_passed = s1.passed && s2.passed && s3.passed;

  std::ostringstream report;
  {
    JsonWriter w(report);
    w.begin_object();
    w.key("seed").value(static_cast<std::size_t>(args.seed));
    w.key("shapley_2p").begin_object();
    w.key("games").value(1000);
    w.key("max_abs_diff").value(shapley_max_diff);
    w.key("tolerance").value(1e-12);
    w.key("passed").value(s1.passed);
    w.end_object();
    w.key("additive_efficiency").begin_object();
    w.key("models").value(100);
    w.key("max_abs_err").value(additive_max_err);
    w.key("tolerance").value(1e-9);
    w.key("passed").value(s2.passed);
    w.end_object();
    w.key("differential_kaap").begin_object();
    w.key("instances").value(50);
    w.key("max_abs_diff").value(differential_max_diff);
    w.key("per_instance_max_abs_diff").number_array(per_instance_diff);
    w.key("tolerance").value(1e-12);
    w.key("passed").value(s3.passed);
    w.end_object();
    w.key("kp_vs_shapley_gap").begin_object();
    w.key("players").value(3);
    w.key("games").value(1000);
    w.key("mean").value(gap_mean);
    w.key("max").value(gap_max);
    w.key("histogram").number_array(gap_histogram);
    w.end_object();
    w.key("passed").value(all_passed);
    w.end_object();
  }
  report << "\n";

  if (!args.out_path.empty()) {
    std::ofstream os = open_output(args.out_path);
    os << report.str();
  } else {
    std::cout << report.str();
  }

  if (!all_passed) {
    for (const SuiteOutcome* s : {&s1, &s2, &s3}) {
      if (!s->passed) std::cerr << "validation breach: " << s->failures.str() << "\n";
    }
    return kExitBreach;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string out_dir;
  std::string variant = "vista";
  std::uint64_t seed = 7;
  std::size_t samples = 500;
  std::size_t epochs = 50;
  double lr = 1e-4;
  std::size_t batch_size = 64;
  std::size_t patience = 5;
  double val_fraction = 0.2;
  std::size_t embed_dim = 8;
  std::size_t image_side = 8;
  std::size_t image_channels = 1;
  std::size_t speech_side = 8;
  std::size_t text_len = 6;
  std::size_t vocab = 32;
};

int run_train(const TrainArgs& args) {
  FusionConfig fc;
  fc.variant = parse_variant(args.variant);
  fc.seed = args.seed;
  fc.embed_dim = args.embed_dim;
  fc.image_h = fc.image_w = args.image_side;
  fc.image_c = args.image_channels;
  fc.speech_f = fc.speech_t = args.speech_side;
  fc.text_len = args.text_len;
  fc.vocab = args.vocab;
  FusionTopology net(fc);

  SyntheticConfig sc;
  sc.seed = args.seed;
  sc.count = args.samples;
  sc.image_h = sc.image_w = args.image_side;
  sc.image_c = args.image_channels;
  sc.speech_f = sc.speech_t = args.speech_side;
  sc.text_len = args.text_len;
  sc.vocab = args.vocab;
  const std::vector<MultimodalSample> dataset = make_synthetic_dataset(sc);

  TrainOptions opts;
  opts.epochs = args.epochs;
  opts.lr = args.lr;
  opts.batch_size = args.batch_size;
  opts.patience = args.patience;
  opts.validation_fraction = args.val_fraction;
  opts.shuffle_seed = args.seed;
  const TrainReport report = train(net, dataset, opts);

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  {
    std::ofstream os = open_output(dir / "checkpoint.json");
    save_fusion_topology(os, net);
  }
  {
    std::ofstream os = open_output(dir / "report.jsonl");
    write_train_report_jsonl(os, report);
  }
  if (!report.epochs.empty()) {
    const EpochRecord& last = report.epochs.back();
    std::cout << "epochs," << report.epochs.size() << "\n";
    std::cout << "train_accuracy," << fmt_double(last.train_accuracy) << "\n";
    std::cout << "val_accuracy," << fmt_double(last.val_accuracy) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// selectk
// ---------------------------------------------------------------------------

struct SelectKArgs {
  std::string model_path;
  std::vector<std::string> input_paths;
  std::string modality = "image";
  std::string out_path;
  std::size_t k_max = 10;
  double threshold = 0.95;
  double q = 0.25;
  std::size_t threads = 0;
};

int run_selectk(const SelectKArgs& args) {
  const auto model = load_model_file(args.model_path);
  std::vector<MultimodalSample> samples;
  samples.reserve(args.input_paths.size());
  for (const std::string& path : args.input_paths) samples.push_back(load_sample_file(path));

  SelectKOptions opts;
  opts.k_max = args.k_max;
  opts.threshold = args.threshold;
  opts.q = args.q;
  opts.threads =
      args.threads > 0 ? args.threads : std::max(1u, std::thread::hardware_concurrency());

  const DiceCurve curve = select_k(*model, samples, modality_from_string(args.modality), opts);
  if (!curve.converged) {
    std::cerr << "warning: dice never reached " << fmt_double(args.threshold)
              << "; selected k_max = " << curve.selected_k << "\n";
  }
  if (!args.out_path.empty()) {
    std::ofstream os = open_output(args.out_path);
    write_dice_curve_csv(os, curve);
  } else {
    write_dice_curve_csv(std::cout, curve);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// labelfuse
// ---------------------------------------------------------------------------

struct LabelFuseArgs {
  std::string input_path;
  std::string out_path;
  double tau = 0.55;
  std::string sweep;  // comma-separated taus
  std::string sweep_out;
};

int run_labelfuse(const LabelFuseArgs& args) {
  std::ifstream is(args.input_path);
  if (!is) throw ParseError("cannot open records CSV: " + args.input_path);
  const std::vector<ModalityProbRecord> records = read_prob_records_csv(is);

  std::vector<FusedLabel> fused;
  fused.reserve(records.size());
  for (const ModalityProbRecord& rec : records) fused.push_back(fuse_label(rec));

  const FilterResult filtered = threshold_filter(fused, args.tau);

  if (!args.out_path.empty()) {
    std::ofstream os = open_output(args.out_path);
    write_fused_labels_csv(os, records, fused, filtered.kept_flags);
  } else {
    write_fused_labels_csv(std::cout, records, fused, filtered.kept_flags);
  }

  for (int c = 0; c < static_cast<int>(kNumClasses); ++c) {
    const ClassFilterStats& stats = filtered.per_class[c];
    if (stats.empty) {
      std::cerr << "note: class " << emotion_name(c) << " absent, skipped\n";
    }
  }

  if (!args.sweep.empty()) {
    std::vector<double> taus;
    std::istringstream ss(args.sweep);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        taus.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ParseError("bad sweep threshold: '" + tok + "'");
      }
    }
    const std::vector<SweepRow> rows = threshold_sweep(fused, taus);
    if (!args.sweep_out.empty()) {
      std::ofstream os = open_output(args.sweep_out);
      write_threshold_sweep_csv(os, rows);
    } else {
      write_threshold_sweep_csv(std::cout, rows);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal attribution toolkit: KP-value attribution maps, "
               "modality importance, and a desk-scale hybrid-fusion classifier"};
  app.require_subcommand(1);

  PredictArgs predict_args;
  CLI::App* predict_cmd = app.add_subcommand("predict", "Score a sample with a model");
  predict_cmd->add_option("--model", predict_args.model_path, "Model JSON file")->required();
  predict_cmd->add_option("--input", predict_args.input_path, "Sample JSON file")->required();
  predict_cmd->add_flag("--mask-image", predict_args.mask_image, "Zero the image modality");
  predict_cmd->add_flag("--mask-speech", predict_args.mask_speech, "Zero the speech modality");
  predict_cmd->add_flag("--mask-text", predict_args.mask_text, "Zero the text modality");

  ExplainArgs explain_args;
  CLI::App* explain_cmd =
      app.add_subcommand("explain", "Write an attribution report with heatmaps");
  explain_cmd->add_option("--model", explain_args.model_path, "Model JSON file")->required();
  explain_cmd->add_option("--input", explain_args.input_path, "Sample JSON file")->required();
  explain_cmd->add_option("--out", explain_args.out_dir, "Output directory")->required();
  explain_cmd->add_option("--k-image", explain_args.k_image, "Image granularity ceiling (default 7)");
  explain_cmd->add_option("--k-speech", explain_args.k_speech, "Speech granularity ceiling (default 7)");
  explain_cmd->add_option("--k-text", explain_args.k_text, "Text granularity ceiling (default 5)");
  explain_cmd->add_option("--target", explain_args.target, "Target class override (0..3)");
  explain_cmd->add_option("--threads", explain_args.threads, "Worker threads (default: logical cores)");
  explain_cmd->add_option("--seed", explain_args.seed, "Run seed (explain is deterministic)");

  ValidateArgs validate_args;
  CLI::App* validate_cmd = app.add_subcommand("validate", "Run the oracle validation suites");
  validate_cmd->add_option("--seed", validate_args.seed, "Suite seed (default 42)");
  validate_cmd->add_option("--out", validate_args.out_path, "Report JSON path (default stdout)");
  validate_cmd->add_flag("--corrupt-kp", validate_args.corrupt_kp,
                         "Negative control: corrupt the kp weights and expect a breach");

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a fusion topology on synthetic data");
  train_cmd->add_option("--out", train_args.out_dir, "Output directory")->required();
  train_cmd->add_option("--variant", train_args.variant, "vista or baseline#2..#6");
  train_cmd->add_option("--seed", train_args.seed, "Seed for init, data and shuffling");
  train_cmd->add_option("--samples", train_args.samples, "Synthetic dataset size");
  train_cmd->add_option("--epochs", train_args.epochs, "Epoch budget");
  train_cmd->add_option("--lr", train_args.lr, "Learning rate (default 1e-4)");
  train_cmd->add_option("--batch", train_args.batch_size, "Batch size (default 64)");
  train_cmd->add_option("--patience", train_args.patience, "Early-stop patience (default 5)");
  train_cmd->add_option("--val-fraction", train_args.val_fraction, "Validation split fraction");
  train_cmd->add_option("--embed-dim", train_args.embed_dim, "Embedding width D");
  train_cmd->add_option("--image-side", train_args.image_side, "Image side length");
  train_cmd->add_option("--image-channels", train_args.image_channels, "Image channels");
  train_cmd->add_option("--speech-side", train_args.speech_side, "Spectrogram side length");
  train_cmd->add_option("--text-len", train_args.text_len, "Token sequence length");
  train_cmd->add_option("--vocab", train_args.vocab, "Vocabulary size");

  SelectKArgs selectk_args;
  CLI::App* selectk_cmd = app.add_subcommand("selectk", "Granularity selection via dice curves");
  selectk_cmd->add_option("--model", selectk_args.model_path, "Model JSON file")->required();
  selectk_cmd->add_option("--input", selectk_args.input_paths, "Sample JSON file (repeatable)")
      ->required();
  selectk_cmd->add_option("--modality", selectk_args.modality, "image, speech or text")->required();
  selectk_cmd->add_option("--k-max", selectk_args.k_max, "Largest granularity (default 10)");
  selectk_cmd->add_option("--threshold", selectk_args.threshold, "Convergence threshold (default 0.95)");
  selectk_cmd->add_option("--q", selectk_args.q, "Top fraction for binarization (default 0.25)");
  selectk_cmd->add_option("--out", selectk_args.out_path, "Curve CSV path (default stdout)");
  selectk_cmd->add_option("--threads", selectk_args.threads, "Worker threads");

  LabelFuseArgs labelfuse_args;
  CLI::App* labelfuse_cmd =
      app.add_subcommand("labelfuse", "Average modality probabilities and filter by confidence");
  labelfuse_cmd->add_option("--input", labelfuse_args.input_path, "Records CSV")->required();
  labelfuse_cmd->add_option("--out", labelfuse_args.out_path, "Output CSV (default stdout)");
  labelfuse_cmd->add_option("--tau", labelfuse_args.tau, "Confidence threshold (default 0.55)");
  labelfuse_cmd->add_option("--sweep", labelfuse_args.sweep, "Comma-separated taus for the sweep report");
  labelfuse_cmd->add_option("--sweep-out", labelfuse_args.sweep_out, "Sweep CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  try {
    if (*predict_cmd) return run_predict(predict_args);
    if (*explain_cmd) return run_explain(explain_args);
    if (*validate_cmd) return run_validate(validate_args);
    if (*train_cmd) return run_train(train_args);
    if (*selectk_cmd) return run_selectk(selectk_args);
    if (*labelfuse_cmd) return run_labelfuse(labelfuse_args);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitShape;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
