#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cagnet/params.hpp"

namespace cagnet {

// One finite-difference experiment: `build` assembles a scalar loss from
// the parameters in `params` (accessed through Forward::use, so the
// harness can perturb them one element at a time).
struct GradCheckCase {
  std::string name;
  std::function<VarId(Forward&)> build;
  std::shared_ptr<ParamStore> params = std::make_shared<ParamStore>();
  std::shared_ptr<ParamStore> buffers = std::make_shared<ParamStore>();
  bool training = true;
  double tolerance = 1e-4;
  int max_probes = 0;  // 0 probes every element
};

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::size_t probes = 0;
};

// Central differences with the given step against the recorded backward
// pass. The relative error is |a - n| / max(1e-3, |a| + |n|) - the floor
// keeps finite-difference noise on negligible gradients from dominating.
// A non-finite value on either side is an error naming the parameter.
GradCheckResult run_grad_check(const GradCheckCase& c, double step = 1e-6);

// The standard battery: every primitive op, every block, both losses, and
// a whole toy model (checked at a looser tolerance, sampled elements).
std::vector<GradCheckCase> standard_grad_checks(std::uint64_t seed);

}  // namespace cagnet
