#include "pvst/evaluation.hpp"
#include "pvst/gradient_suite.hpp"
#include "pvst/rng.hpp"
#include "pvst/training.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <optional>

namespace {

using namespace pvst;

struct GenDataOpts {
  std::string out;
  std::uint64_t seed = 7;
  int per_class = 0;
  int points = 2048;
  std::string split = "train";
  int jobs = 1;
};

int cmd_gen_data(const GenDataOpts& o) {
  const DatasetManifest m =
      generate_dataset(o.out, o.seed, o.per_class, o.points, o.split, o.jobs);
  std::printf("wrote %zu clouds to %s (split=%s)\n", m.entries.size(), o.out.c_str(),
              m.split.c_str());
  return 0;
}

struct RenderOpts {
  std::string data;
  std::string out;
  int views = 8;
  int image_size = 128;
  std::uint64_t seed = 7;
  int jobs = 1;
};

int cmd_render_views(const RenderOpts& o) {
  const DatasetManifest m = load_manifest(o.data + "/manifest.tsv");
  const RenderCache cache =
      prepare_render_cache(m, o.data, o.out, o.views, o.image_size, o.seed, o.jobs);
  std::printf("rendered %zu targets to %s\n", cache.entries.size(), o.out.c_str());
  for (const auto& f : cache.failures)
    std::fprintf(stderr, "render failure: %s\n", f.c_str());
  return cache.failures.empty() ? 0 : 2;
}

struct PretrainOpts {
  std::string data, cache, out, resume;
  TrainConfig config;
};

int cmd_pretrain(const PretrainOpts& o) {
  const DatasetManifest manifest = load_manifest(o.data + "/manifest.tsv");
  const RenderCache cache = load_render_cache(o.cache);
  TrainConfig config = o.config;
  config.out_dir = o.out;

  std::optional<Checkpoint> resume;
  if (!o.resume.empty()) resume = load_checkpoint(o.resume);

  const TrainResult result = pretrain(
      manifest, o.data, cache, o.cache, config, resume ? &*resume : nullptr,
      [](int epoch, const EpochLoss& loss, double elapsed) {
        std::printf("epoch %d total=%.6f C_v=%.6f L_d=%.6f L_s=%.6f L_c=%.6f (%.1fs)\n",
                    epoch + 1, loss.total, loss.vis, loss.depth, loss.sil, loss.cont,
                    elapsed);
        std::fflush(stdout);
        return true;
      });
  std::printf("checkpoint: %s/checkpoint.pvst (epochs done: %ld)\n", o.out.c_str(),
              result.checkpoint.epochs_done);
  return 0;
}

struct ProbeOpts {
  std::string train_data, test_data, checkpoint, confusion_out;
  std::uint64_t seed = 0;
  int epochs = 500;
  double lr = 1e-2;
};

PretextParams params_for_eval(const std::string& checkpoint_path, std::uint64_t seed) {
  if (checkpoint_path.empty()) {
    // Baseline mode: randomly initialized backbone.
    return init_params(ModelDims{}, Rng::mix(seed, 0x62617365ULL));
  }
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  validate_architecture(ckpt, ckpt.params.dims);
  return ckpt.params;
}

int cmd_probe(const ProbeOpts& o) {
  const PretextParams params = params_for_eval(o.checkpoint, o.seed);
  const DatasetManifest train_m = load_manifest(o.train_data + "/manifest.tsv");
  const DatasetManifest test_m = load_manifest(o.test_data + "/manifest.tsv");
  const CodewordSet train = extract_codewords(train_m, o.train_data, params);
  const CodewordSet test = extract_codewords(test_m, o.test_data, params);

  ProbeConfig pc;
  pc.seed = o.seed;
  pc.epochs = o.epochs;
  pc.learning_rate = o.lr;
  const ProbeResult result = linear_probe(train.features, train.labels, test.features,
                                          test.labels, pc);

  std::printf("class accuracy:\n");
  for (Eigen::Index c = 0; c < result.per_class.size(); ++c)
    std::printf("  %-10s %.4f\n",
                shape_class_name(static_cast<ShapeClass>(c)).c_str(),
                result.per_class[c]);
  if (!o.confusion_out.empty()) {
    std::ofstream f(o.confusion_out);
    if (!f) throw IoError("probe: cannot open " + o.confusion_out);
    for (Eigen::Index r = 0; r < result.confusion.rows(); ++r) {
      for (Eigen::Index c = 0; c < result.confusion.cols(); ++c)
        f << (c ? "," : "") << result.confusion(r, c);
      f << "\n";
    }
  }
  std::printf("OAcc=%.4f\n", result.oacc);
  return 0;
}

struct VisEvalOpts {
  std::string data, cache, checkpoint;
  std::uint64_t seed = 0;
};

int cmd_visibility_eval(const VisEvalOpts& o) {
  const PretextParams params = params_for_eval(o.checkpoint, o.seed);
  const DatasetManifest manifest = load_manifest(o.data + "/manifest.tsv");
  const RenderCache cache = load_render_cache(o.cache);
  const auto points = visibility_accuracy(manifest, o.data, cache, o.cache, params);
  for (const auto& p : points) std::printf("thr=%.2f OAcc=%.4f\n", p.threshold, p.oacc);
  return 0;
}

struct GradcheckOpts {
  int seeds = 20;
  double tol = 1e-4;
  double step = 1e-6;
};

int cmd_gradcheck(const GradcheckOpts& o) {
  const SuiteReport report = run_gradient_suite(o.seeds, o.step, o.tol);
  for (const auto& e : report.entries)
    std::printf("%-26s max_rel_err=%.3e %s\n", e.name.c_str(), e.max_rel_err,
                e.pass ? "PASS" : "FAIL");
  std::printf("gradient suite: %s (%d seeds, %.1fs)\n",
              report.pass ? "PASS" : "FAIL", o.seeds, report.seconds);
  return report.pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"View-specific point-cloud-to-image translation pipeline"};
  app.require_subcommand(1);

  GenDataOpts gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a procedural shape dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Master RNG seed")->capture_default_str();
  gen_cmd->add_option("--per-class", gen.per_class, "Clouds per shape class")->required();
  gen_cmd->add_option("--points", gen.points, "Points per cloud")->capture_default_str();
  gen_cmd->add_option("--split", gen.split, "Split tag")->capture_default_str();
  gen_cmd->add_option("--jobs", gen.jobs, "Parallel workers")->capture_default_str();

  RenderOpts render;
  auto* render_cmd =
      app.add_subcommand("render-views", "Precompute ground-truth render targets");
  render_cmd->add_option("--data", render.data, "Dataset directory")->required();
  render_cmd->add_option("--out", render.out, "Cache directory")->required();
  render_cmd->add_option("--views", render.views, "Views per cloud")->capture_default_str();
  render_cmd->add_option("--image-size", render.image_size, "Image height/width")
      ->capture_default_str();
  render_cmd->add_option("--seed", render.seed, "Viewpoint seed")->capture_default_str();
  render_cmd->add_option("--jobs", render.jobs, "Parallel workers")->capture_default_str();

  PretrainOpts pre;
  std::string variant_name = "avs";
  auto* pre_cmd = app.add_subcommand("pretrain", "Run the pretext pre-training loop");
  pre_cmd->set_config("--config", "", "key=value config file (flags override)");
  pre_cmd->add_option("--data", pre.data, "Dataset directory")->required();
  pre_cmd->add_option("--cache", pre.cache, "Render cache directory")->required();
  pre_cmd->add_option("--out", pre.out, "Output directory")->required();
  pre_cmd->add_option("--epochs", pre.config.epochs, "Training epochs")
      ->capture_default_str();
  pre_cmd->add_option("--batch", pre.config.batch_size, "Clouds per step")
      ->capture_default_str();
  pre_cmd->add_option("--views", pre.config.views_per_cloud, "Views per cloud")
      ->capture_default_str();
  pre_cmd->add_option("--lr", pre.config.learning_rate, "Adam learning rate")
      ->capture_default_str();
  pre_cmd->add_option("--seed", pre.config.seed, "Master RNG seed")->capture_default_str();
  pre_cmd->add_option("--image-size", pre.config.image_size, "Translated image size")
      ->capture_default_str();
  pre_cmd->add_option("--variant", variant_name, "Pooling variant "
                      "(avs|avs-unsupervised|max|avg|gt-vis)")
      ->capture_default_str();
  pre_cmd->add_option("--w-vis", pre.config.weights.vis, "Visibility loss weight")
      ->capture_default_str();
  pre_cmd->add_option("--w-depth", pre.config.weights.depth, "Depth loss weight")
      ->capture_default_str();
  pre_cmd->add_option("--w-sil", pre.config.weights.sil, "Silhouette loss weight")
      ->capture_default_str();
  pre_cmd->add_option("--w-cont", pre.config.weights.cont, "Contour loss weight")
      ->capture_default_str();
  pre_cmd->add_option("--resume", pre.resume, "Checkpoint to resume from");

  ProbeOpts probe;
  auto* probe_cmd =
      app.add_subcommand("probe", "Frozen-backbone linear probe classification");
  probe_cmd->add_option("--train-data", probe.train_data, "Probe training dataset")
      ->required();
  probe_cmd->add_option("--test-data", probe.test_data, "Probe test dataset")->required();
  probe_cmd->add_option("--checkpoint", probe.checkpoint,
                        "Trained checkpoint (omit for random-init baseline)");
  probe_cmd->add_option("--seed", probe.seed, "Probe RNG seed")->capture_default_str();
  probe_cmd->add_option("--epochs", probe.epochs, "Probe training epochs")
      ->capture_default_str();
  probe_cmd->add_option("--lr", probe.lr, "Probe learning rate")->capture_default_str();
  probe_cmd->add_option("--confusion-out", probe.confusion_out,
                        "Write the confusion matrix CSV here");

  VisEvalOpts vis;
  auto* vis_cmd = app.add_subcommand("visibility-eval",
                                     "Visibility prediction accuracy per threshold");
  vis_cmd->add_option("--data", vis.data, "Dataset directory")->required();
  vis_cmd->add_option("--cache", vis.cache, "Render cache directory")->required();
  vis_cmd->add_option("--checkpoint", vis.checkpoint,
                      "Trained checkpoint (omit for random-init baseline)");
  vis_cmd->add_option("--seed", vis.seed, "Baseline init seed")->capture_default_str();

  GradcheckOpts grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  grad_cmd->add_option("--seeds", grad.seeds, "Number of random seeds")
      ->capture_default_str();
  grad_cmd->add_option("--tol", grad.tol, "Max relative error tolerance")
      ->capture_default_str();
  grad_cmd->add_option("--step", grad.step, "Finite-difference step")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen);
    if (render_cmd->parsed()) return cmd_render_views(render);
    if (pre_cmd->parsed()) {
      pre.config.variant = pooling_variant_from_name(variant_name);
      return cmd_pretrain(pre);
    }
    if (probe_cmd->parsed()) return cmd_probe(probe);
    if (vis_cmd->parsed()) return cmd_visibility_eval(vis);
    if (grad_cmd->parsed()) return cmd_gradcheck(grad);
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return 2;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 2;
  } catch (const EmptyCloudError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 64;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
