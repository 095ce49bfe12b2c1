#pragma once

#include <map>
#include <ostream>
#include <vector>

#include "cagnet/config.hpp"
#include "cagnet/data.hpp"
#include "cagnet/model.hpp"

namespace cagnet {

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double train_mae = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> logs;
  bool aborted = false;         // loss went non-finite; last good kept
  bool reached_target = false;  // target_mae hit before the epoch budget
  std::string checkpoint_path;
};

// Learning rate after the given loss history: lr0 * factor^k, where k
// counts completed runs of `patience` consecutive epochs that failed to
// strictly improve on the best loss seen so far (the first epoch seeds
// the best value).
double plateau_lr(const std::vector<double>& history, double lr0,
                  int patience, double factor);

// v <- momentum*v - lr*grad; theta <- theta + v. Every parameter must
// have a gradient and a velocity slot; a mismatch names the parameter.
void sgd_step(ParamStore& params,
              const std::map<std::string, Tensor>& grads,
              ParamStore& velocity, double lr, double momentum);

// Full loop: shuffled mini-batches, optional augmentation, the configured
// loss, the plateau schedule, and a checkpoint after every epoch (written
// atomically, so the previous one survives any crash). A non-finite loss
// aborts without touching the last good checkpoint. Runs are a pure
// function of (model seed, train seed, data) - logs and checkpoints
// included.
TrainResult train(Model& model, const std::vector<SamplePair>& data,
                  const RunConfig& cfg, const std::string& out_dir,
                  std::ostream* log = nullptr);

}  // namespace cagnet
