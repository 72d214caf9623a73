#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "migate/checks.hpp"
#include "migate/config.hpp"
#include "migate/eval.hpp"
#include "migate/io.hpp"
#include "migate/pipeline.hpp"
#include "migate/synth.hpp"

namespace fs = std::filesystem;
using namespace migate;

namespace {

// 0 success, 1 validation error, 2 numerical failure, 3 I/O error
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitIo = 3;

struct Common {
  std::string config_path;
  std::string precision = "f64";
  bool has_seed = false;
  uint64_t seed = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "run configuration file");
  cmd->add_option("--precision", c.precision, "numeric precision")
      ->check(CLI::IsMember({"f32", "f64"}));
  cmd->add_option("--seed", c.seed, "seed override")
      ->each([&c](const std::string&) { c.has_seed = true; });
}

Config load_config(const Common& c) {
  Config cfg = c.config_path.empty() ? Config::parse_string("", "<defaults>")
                                     : Config::parse_file(c.config_path);
  if (c.has_seed) {
    std::string s = std::to_string(c.seed);
    cfg.set("train", "seed", s);
    cfg.set("synthetic", "seed", s);
    cfg.set("eval", "seed", s);
  }
  return cfg;
}

void apply_precision(const Common& c) {
  set_precision(c.precision == "f32" ? Precision::f32 : Precision::f64);
}

int cmd_gen_data(const Common& common, const std::string& out_dir,
                 bool force) {
  Config cfg = load_config(common);
  SyntheticSpec spec = synth_spec_from_config(cfg);
  std::string root =
      out_dir.empty() ? cfg.get("paths", "dataset", "data") : out_dir;
  if (fs::exists(root) && !fs::is_empty(root) && !force) {
    std::cerr << "refusing to write into existing non-empty '" << root
              << "' (use --force)\n";
    return kExitValidation;
  }
  auto manifest = generate_pair_dataset(spec, root);
  std::cout << "wrote " << spec.identities << " identities x 2 cameras x "
            << spec.images_per_camera << " images ("
            << spec.identities * 2 * spec.images_per_camera << " files, "
            << manifest.size() << " glyph placements) to " << root << "\n";
  return 0;
}

int cmd_train(const Common& common, const std::string& data_dir,
              const std::string& context, const std::string& checkpoint_out,
              const std::string& log_out) {
  apply_precision(common);
  Config cfg = load_config(common);
  if (!context.empty()) cfg.set("context", "kind", context);
  ModelConfig model_cfg = model_config_from_config(cfg);
  TrainConfig train_cfg = train_config_from_config(cfg);

  std::string root =
      data_dir.empty() ? cfg.get("paths", "dataset", "data") : data_dir;
  Dataset all = load_dataset(root);
  SplitSet splits =
      split_dataset(root, all, train_cfg.train_frac, train_cfg.val_frac);
  std::cout << "dataset: " << all.samples.size() << " images ("
            << splits.train.samples.size() << " train, "
            << splits.val.samples.size() << " val, "
            << splits.test.samples.size() << " test)\n";

  ModelParams preview = ModelParams::init(model_cfg, train_cfg.seed);
  std::cout << preview.summary();

  std::string ckpt = checkpoint_out;
  if (ckpt.empty())
    ckpt = cfg.get("paths", "checkpoint",
                   "model_" + to_string(model_cfg.context) + ".mick");
  std::string log_path = log_out;
  if (log_path.empty())
    log_path = cfg.get("paths", "train_log",
                       "train_" + to_string(model_cfg.context) + ".log");

  std::ofstream log(log_path);
  if (!log) throw IoError("cannot open log '" + log_path + "'");
  struct Tee : std::ostream, std::streambuf {
    std::ostream &a, &b;
    Tee(std::ostream& a, std::ostream& b) : std::ostream(this), a(a), b(b) {}
    int overflow(int c) override {
      a.put(static_cast<char>(c));
      b.put(static_cast<char>(c));
      return c;
    }
  } tee(std::cout, log);

  TrainResult result =
      train(model_cfg, splits.train, splits.val, train_cfg, nullptr, &tee);
  save_checkpoint(ckpt, result.best, result.best_opt.velocity,
                  result.channel_mean);
  tee << "best epoch " << result.best_epoch << " val_loss " << result.best_val
      << "\ncheckpoint " << ckpt << "\n";
  if (result.diverged) {
    tee << "training diverged; checkpoint holds the last good state\n";
    return kExitNumerical;
  }
  return 0;
}

int cmd_eval(const Common& common, const std::string& checkpoint,
             const std::string& data_dir, int trials,
             const std::string& out_path) {
  apply_precision(common);
  Config cfg = load_config(common);
  ModelConfig model_cfg = model_config_from_config(cfg);
  ModelParams params = ModelParams::init(model_cfg, 0);
  std::vector<Tensor> opt_state;
  std::vector<double> channel_mean;
  load_checkpoint(checkpoint, params, opt_state, channel_mean);

  std::string root =
      data_dir.empty() ? cfg.get("paths", "dataset", "data") : data_dir;
  Dataset all = load_dataset(root);
  TrainConfig tc = train_config_from_config(cfg);
  SplitSet splits = split_dataset(root, all, tc.train_frac, tc.val_frac);
  const Dataset& test =
      splits.test.samples.empty() ? all : splits.test;

  uint64_t seed = cfg.get_u64("eval", "seed", 1);
  EvalReport report = evaluate_model(params, channel_mean, test, trials, seed);
  std::string table = cmc_table(report);
  std::string records = metrics_records(report);
  std::cout << table << records;
  std::string out =
      out_path.empty() ? cfg.get("paths", "metrics", "") : out_path;
  if (!out.empty()) {
    std::ofstream os(out);
    if (!os) throw IoError("cannot open metrics output '" + out + "'");
    os << table << records;
  }
  return 0;
}

int cmd_gradcheck(const Common& common) {
  apply_precision(common);
  uint64_t seed = common.has_seed ? common.seed : 1;
  double eps = 1e-6, tol = 1e-5;
  bool ok = true;
  auto modules = module_grad_checks(seed, eps, tol);
  for (const auto& m : modules) {
    ok = ok && m.report.pass;
    std::cout << (m.report.pass ? "pass" : "FAIL") << "  " << m.module
              << "  max_rel_err=" << m.report.max_rel_err << " ("
              << m.report.checked << " entries, worst " << m.report.worst.param
              << "[" << m.report.worst.index << "])\n";
  }
  auto composite = composite_grad_check(seed, eps, tol);
  ok = ok && composite.pass;
  std::cout << (composite.pass ? "pass" : "FAIL")
            << "  composite  max_rel_err=" << composite.max_rel_err << " ("
            << composite.checked << " entries, worst " << composite.worst.param
            << "[" << composite.worst.index << "])\n";
  return ok ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pairwise image matching with multiplicative-integration "
               "gating and spatially recurrent pooling"};
  app.require_subcommand(1);

  Common c_gen, c_train, c_eval, c_check;
  std::string out_dir, data_dir, context, checkpoint, ckpt_out, log_out,
      metrics_out;
  bool force = false;
  int trials = 10;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen, c_gen);
  gen->add_option("--out", out_dir, "dataset directory");
  gen->add_flag("--force", force, "overwrite an existing dataset directory");

  auto* tr = app.add_subcommand("train", "train a model");
  add_common(tr, c_train);
  tr->add_option("--data", data_dir, "dataset directory");
  tr->add_option("--context", context, "context model")
      ->check(CLI::IsMember({"irnn2", "spp", "global_avg", "stacked_conv"}));
  tr->add_option("--checkpoint", ckpt_out, "checkpoint output path");
  tr->add_option("--log", log_out, "metrics log output path");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(ev, c_eval);
  ev->add_option("checkpoint", checkpoint, "checkpoint path")->required();
  ev->add_option("--data", data_dir, "dataset directory");
  ev->add_option("--trials", trials, "number of probe/gallery trials");
  ev->add_option("--out", metrics_out, "metrics output file");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  add_common(gc, c_check);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(c_gen, out_dir, force);
    if (tr->parsed())
      return cmd_train(c_train, data_dir, context, ckpt_out, log_out);
    if (ev->parsed())
      return cmd_eval(c_eval, checkpoint, data_dir, trials, metrics_out);
    if (gc->parsed()) return cmd_gradcheck(c_check);
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DimensionError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
