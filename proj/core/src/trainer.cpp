#include "cagnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "cagnet/checkpoint.hpp"
#include "cagnet/loss.hpp"
#include "cagnet/metrics.hpp"

namespace cagnet {

double plateau_lr(const std::vector<double>& history, double lr0,
                  int patience, double factor) {
  check(patience >= 1, "plateau patience must be positive");
  if (history.empty()) return lr0;
  double best = history[0];
  int bad = 0, drops = 0;
  for (double h : history) {
    if (h < best) {
      best = h;
      bad = 0;
    } else if (++bad == patience) {
      ++drops;
      bad = 0;
    }
  }
  return lr0 * std::pow(factor, drops);
}

void sgd_step(ParamStore& params,
              const std::map<std::string, Tensor>& grads,
              ParamStore& velocity, double lr, double momentum) {
  for (const auto& [name, g] : grads)
    check(params.contains(name),
          "sgd_step: gradient for unknown parameter " + name);
  for (const auto& name : params.names()) {
    const auto it = grads.find(name);
    check(it != grads.end(), "sgd_step: no gradient for parameter " + name);
    check(velocity.contains(name),
          "sgd_step: no velocity slot for parameter " + name);
    Tensor& theta = params.at(name);
    Tensor& v = velocity.at(name);
    const Tensor& g = it->second;
    check(theta.same_shape(g) && theta.same_shape(v),
          "sgd_step: shape mismatch for parameter " + name);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = momentum * v[i] - lr * g[i];
      theta[i] += v[i];
    }
  }
}

TrainResult train(Model& model, const std::vector<SamplePair>& data,
                  const RunConfig& cfg, const std::string& out_dir,
                  std::ostream* log) {
  check(!data.empty(), "training needs at least one sample");
  const int size = cfg.model.input_size;
  const std::size_t n = data.size();
  const std::size_t batch =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.train.batch_size), n);

  std::filesystem::create_directories(out_dir);
  TrainResult res;
  res.checkpoint_path = out_dir + "/checkpoint.bin";

  ParamStore velocity;
  for (const auto& name : model.params().names())
    velocity.create(name, Tensor::zeros(model.params().at(name).shape()));

  // Without augmentation the resized tensors never change; cache them.
  std::vector<Tensor> fixed_x, fixed_g;
  if (!cfg.train.augment) {
    for (const auto& sp : data) {
      fixed_x.push_back(to_input_tensor(sp.image, size));
      fixed_g.push_back(to_target_tensor(sp.mask, size));
    }
  }

  const std::string config_text = serialize_config(cfg);
  const Rng master(cfg.train.seed);
  const std::size_t per_x = static_cast<std::size_t>(3) * size * size;
  const std::size_t per_g = static_cast<std::size_t>(size) * size;
  std::vector<double> history;

  auto emit = [&](const char* fmt_str, auto... args) {
    if (!log) return;
    char buf[192];
    std::snprintf(buf, sizeof buf, fmt_str, args...);
    *log << buf;
    log->flush();
  };

  // The initial state is the first "last good" checkpoint, so a run that
  // aborts straight away (or asks for zero epochs) still leaves a loadable
  // snapshot behind.
  {
    Checkpoint init;
    init.config_text = config_text;
    init.params = model.params();
    init.buffers = model.buffers();
    init.velocity = velocity;
    init.next_epoch = 0;
    init.rng_state = master.state();
    save_checkpoint(res.checkpoint_path, init);
  }

  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    const double lr =
        plateau_lr(history, cfg.train.lr0, cfg.train.patience,
                   cfg.train.factor);

    // Every epoch gets its own deterministic stream for the shuffle and
    // the per-sample augmentation draws.
    Rng ep_rng = master.split(static_cast<std::uint64_t>(epoch) + 1);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[ep_rng.below(i)]);

    double loss_sum = 0.0, mae_sum = 0.0;
    bool nonfinite = false;

    for (std::size_t b0 = 0; b0 < n && !nonfinite; b0 += batch) {
      const int bn = static_cast<int>(std::min(batch, n - b0));
      Tensor bx(Shape(bn, 3, size, size));
      Tensor bg(Shape(bn, 1, size, size));
      for (int j = 0; j < bn; ++j) {
        const std::size_t idx = order[b0 + j];
        Tensor x, g;
        if (cfg.train.augment) {
          Rng sample_rng = ep_rng.split(idx);
          const SamplePair sp = augment(data[idx], sample_rng);
          x = to_input_tensor(sp.image, size);
          g = to_target_tensor(sp.mask, size);
        } else {
          x = fixed_x[idx];
          g = fixed_g[idx];
        }
        std::copy_n(x.data(), per_x, bx.data() + j * per_x);
        std::copy_n(g.data(), per_g, bg.data() + j * per_g);
      }

      Tape tape;
      Forward f{tape, model.params(), &model.buffers(), /*training=*/true};
      const VarId out = model.forward(f, tape.leaf(std::move(bx)));
      if (!tape.value(out).all_finite()) {
        nonfinite = true;
        break;
      }
      const VarId gid = tape.leaf(bg);
      const VarId lid = cfg.model.loss == LossKind::designed
                            ? designed_loss(tape, out, gid, cfg.loss)
                            : cross_entropy_loss(tape, out, gid);
      const double lval = tape.value(lid)[0];
      if (!std::isfinite(lval)) {
        nonfinite = true;
        break;
      }
      loss_sum += lval * bn;
      mae_sum += mae(tape.value(out), bg) * bn;

      GradStore gs = tape.backward(lid);
      std::map<std::string, Tensor> grads;
      for (const auto& name : model.params().names()) {
        const auto bound = f.bound.find(name);
        check(bound != f.bound.end(),
              "parameter unused in forward pass: " + name);
        const Tensor* gp = gs.find(bound->second);
        check(gp != nullptr, "no gradient for parameter " + name);
        grads.emplace(name, *gp);
      }
      sgd_step(model.params(), grads, velocity, lr, cfg.train.momentum);
    }

    if (nonfinite) {
      // Do not overwrite the checkpoint: the last finite epoch stands.
      res.aborted = true;
      emit("epoch %d aborted: non-finite loss\n", epoch);
      break;
    }

    const double eloss = loss_sum / static_cast<double>(n);
    const double emae = mae_sum / static_cast<double>(n);
    history.push_back(eloss);
    res.logs.push_back(EpochLog{epoch, eloss, emae, lr});
    emit("epoch %d loss %.12g mae %.12g lr %.12g\n", epoch, eloss, emae, lr);

    Checkpoint ck;
    ck.config_text = config_text;
    ck.params = model.params();
    ck.buffers = model.buffers();
    ck.velocity = velocity;
    ck.next_epoch = epoch + 1;
    ck.rng_state = master.state();
    save_checkpoint(res.checkpoint_path, ck);

    if (cfg.train.target_mae > 0.0 && emae < cfg.train.target_mae) {
      res.reached_target = true;
      emit("target mae %.12g reached at epoch %d\n", cfg.train.target_mae,
           epoch);
      break;
    }
  }
  return res;
}

}  // namespace cagnet
