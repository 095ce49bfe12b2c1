// Command line front end: train, infer, eval, params, gradcheck, synth.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cagnet/checkpoint.hpp"
#include "cagnet/config.hpp"
#include "cagnet/data.hpp"
#include "cagnet/gradcheck.hpp"
#include "cagnet/image.hpp"
#include "cagnet/metrics.hpp"
#include "cagnet/model.hpp"
#include "cagnet/ops.hpp"
#include "cagnet/trainer.hpp"

namespace fs = std::filesystem;
using namespace cagnet;

namespace {

// Mirrors every byte to stdout and to the log file, so the on-disk log is
// exactly what the run printed.
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int ch) override {
    if (ch == traits_type::eof()) return 0;
    const int ra = a_->sputc(static_cast<char>(ch));
    const int rb = b_->sputc(static_cast<char>(ch));
    return (ra == traits_type::eof() || rb == traits_type::eof())
               ? traits_type::eof()
               : ch;
  }
  int sync() override {
    const int ra = a_->pubsync();
    const int rb = b_->pubsync();
    return (ra == 0 && rb == 0) ? 0 : -1;
  }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

RunConfig config_from(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return load_config(path);
}

int cmd_train(const std::string& data_dir, const std::string& out_dir,
              const std::string& config_path, std::int64_t seed,
              int epochs) {
  RunConfig cfg = config_from(config_path);
  if (seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(seed);
  if (epochs > 0) cfg.train.epochs = epochs;

  const auto data = load_pairs(data_dir);
  std::cout << "loaded " << data.size() << " training pairs from "
            << data_dir << "\n";

  fs::create_directories(out_dir);
  std::ofstream log_file(out_dir + "/train.log", std::ios::binary);
  check(log_file.good(), "cannot open " + out_dir + "/train.log");
  TeeBuf tee(std::cout.rdbuf(), log_file.rdbuf());
  std::ostream log(&tee);

  Model model = Model::build(cfg.model, cfg.train.seed);
  const TrainResult res = train(model, data, cfg, out_dir, &log);
  if (res.aborted) {
    std::cerr << "training aborted on a non-finite loss\n";
    return 1;
  }
  std::cout << "checkpoint written to " << res.checkpoint_path << "\n";
  return 0;
}

Model model_from_checkpoint(const std::string& path, RunConfig* cfg_out) {
  const Checkpoint ck = load_checkpoint(path);
  const RunConfig cfg = parse_config(ck.config_text);
  Model model = Model::build(cfg.model, 0);
  for (const auto& name : model.params().names())
    model.params().at(name) = ck.params.at(name);
  for (const auto& name : model.buffers().names())
    model.buffers().at(name) = ck.buffers.at(name);
  if (cfg_out) *cfg_out = cfg;
  return model;
}

void infer_one(Model& model, int size, const std::string& in_path,
               const std::string& out_path) {
  const ImageU8 img = read_pnm(in_path);
  check(img.channels == 3, in_path + ": expected a colour image");
  const Tensor x = to_input_tensor(img, size);
  Tensor s = model.predict(x);
  s = resize_bilinear(s, img.h, img.w);
  write_pnm(tensor_to_image(s), out_path);
}

int cmd_infer(const std::string& ckpt, const std::string& in_path,
              const std::string& out_path) {
  RunConfig cfg;
  Model model = model_from_checkpoint(ckpt, &cfg);
  const int size = cfg.model.input_size;

  if (!fs::is_directory(in_path)) {
    if (const fs::path parent = fs::path(out_path).parent_path();
        !parent.empty())
      fs::create_directories(parent);
    infer_one(model, size, in_path, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
  }

  // Directory mode: every .ppm inside (dataset roots work too).
  fs::path src(in_path);
  if (fs::is_directory(src / "images")) src /= "images";
  std::vector<fs::path> inputs;
  for (const auto& e : fs::directory_iterator(src))
    if (e.is_regular_file() && e.path().extension() == ".ppm")
      inputs.push_back(e.path());
  std::sort(inputs.begin(), inputs.end());
  check(!inputs.empty(), "no .ppm images under " + src.string());

  fs::create_directories(out_path);
  for (const auto& p : inputs) {
    const std::string out =
        (fs::path(out_path) / p.stem()).string() + ".pgm";
    infer_one(model, size, p.string(), out);
  }
  std::cout << "wrote " << inputs.size() << " maps to " << out_path << "\n";
  return 0;
}

int cmd_eval(const std::string& pred, const std::string& gt,
             const std::string& report, std::string curve) {
  if (curve.empty()) curve = report + ".curve.csv";
  const EvalReport r = evaluate_dataset(pred, gt);
  write_report(r, report, curve);

  char line[128];
  std::snprintf(line, sizeof(line),
                "images %zu\nmae %.6f\navg_f %.6f\nweighted_f %.6f\n"
                "e_measure %.6f\nmax_f %.6f\n",
                r.images, r.mae, r.avg_f, r.weighted_f, r.e_measure, r.max_f);
  std::cout << line << "report: " << report << "\ncurve: " << curve << "\n";
  return 0;
}

int cmd_params(const std::string& config_path) {
  const RunConfig cfg = config_from(config_path);
  const Model model = Model::build(cfg.model, 1);

  std::printf("%-14s %12s %10s %8s %12s\n", "component", "weights", "biases",
              "norm", "total");
  for (const auto& [name, count] : model.param_table())
    std::printf("%-14s %12zu %10zu %8zu %12zu\n", name.c_str(), count.weights,
                count.biases, count.norm, count.total());
  return 0;
}

int cmd_gradcheck(const std::string& module, std::uint64_t seed) {
  auto cases = standard_grad_checks(seed);
  int ran = 0, failed = 0;
  for (const auto& c : cases) {
    if (!module.empty() && c.name.find(module) == std::string::npos) continue;
    ++ran;
    const GradCheckResult r = run_grad_check(c);
    std::printf("%-4s %-22s max_rel_err %.3e  tol %.0e  (%zu probes)\n",
                r.pass ? "ok" : "FAIL", r.name.c_str(), r.max_rel_err,
                r.tolerance, r.probes);
    if (!r.pass) ++failed;
  }
  if (ran == 0) {
    std::cerr << "no gradient check matches '" << module << "'\n";
    return 1;
  }
  std::printf("%d/%d passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"salient object detection with content-aware guidance"};
  app.require_subcommand(1);

  std::string data_dir, out_path, config_path, ckpt, in_path;
  std::string pred_dir, gt_dir, report_path, curve_path, module;
  std::int64_t seed_override = -1;
  int epochs_override = 0;
  std::uint64_t seed = 1;
  int count = 256, size = 64;

  auto* tr = app.add_subcommand("train", "fit a model on an image/mask set");
  tr->add_option("--data", data_dir, "dataset root (images/ + masks/)")
      ->required();
  tr->add_option("--out", out_path, "output directory")->required();
  tr->add_option("--config", config_path, "key=value configuration file");
  tr->add_option("--seed", seed_override, "override the training seed");
  tr->add_option("--epochs", epochs_override, "override the epoch budget");

  auto* in = app.add_subcommand("infer", "produce saliency maps");
  in->add_option("--ckpt", ckpt, "checkpoint file")->required();
  in->add_option("--in", in_path, "input image or directory")->required();
  in->add_option("--out", out_path, "output map or directory")->required();

  auto* ev = app.add_subcommand("eval", "score predictions against masks");
  ev->add_option("--pred", pred_dir, "directory of predicted .pgm maps")
      ->required();
  ev->add_option("--gt", gt_dir, "directory of ground-truth .pgm masks")
      ->required();
  ev->add_option("--report", report_path, "metrics report path")->required();
  ev->add_option("--curve", curve_path, "PR curve csv (default derived)");

  auto* pa = app.add_subcommand("params", "print the parameter budget");
  pa->add_option("--config", config_path, "key=value configuration file");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference audit");
  gc->add_option("--module", module, "only cases whose name contains this");
  gc->add_option("--seed", seed, "rng seed for the probe inputs");

  auto* sy = app.add_subcommand("synth", "generate a synthetic dataset");
  sy->add_option("--out", out_path, "dataset root to create")->required();
  sy->add_option("--n", count, "number of scenes");
  sy->add_option("--size", size, "square image extent");
  sy->add_option("--seed", seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (tr->parsed())
      return cmd_train(data_dir, out_path, config_path, seed_override,
                       epochs_override);
    if (in->parsed()) return cmd_infer(ckpt, in_path, out_path);
    if (ev->parsed())
      return cmd_eval(pred_dir, gt_dir, report_path, curve_path);
    if (pa->parsed()) return cmd_params(config_path);
    if (gc->parsed()) return cmd_gradcheck(module, seed);
    if (sy->parsed()) {
      synth_dataset(out_path, count, size, seed);
      std::cout << "wrote " << count << " scenes under " << out_path << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "cagnet: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
