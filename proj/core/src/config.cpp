#include "cagnet/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace cagnet {

namespace {

std::string trim(const std::string& s) {
  const auto from = s.find_first_not_of(" \t\r");
  if (from == std::string::npos) return "";
  const auto to = s.find_last_not_of(" \t\r");
  return s.substr(from, to - from + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& val) {
  throw std::invalid_argument("config: bad value for " + key + ": " + val);
}

double to_double(const std::string& key, const std::string& val) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(val, &used);
  } catch (const std::exception&) {
    bad_value(key, val);
  }
  if (used != val.size()) bad_value(key, val);
  return out;
}

int to_int(const std::string& key, const std::string& val) {
  std::size_t used = 0;
  long out = 0;
  try {
    out = std::stol(val, &used);
  } catch (const std::exception&) {
    bad_value(key, val);
  }
  if (used != val.size()) bad_value(key, val);
  return static_cast<int>(out);
}

std::uint64_t to_u64(const std::string& key, const std::string& val) {
  std::size_t used = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(val, &used);
  } catch (const std::exception&) {
    bad_value(key, val);
  }
  if (used != val.size()) bad_value(key, val);
  return out;
}

bool to_bool(const std::string& key, const std::string& val) {
  if (val == "true" || val == "1") return true;
  if (val == "false" || val == "0") return false;
  bad_value(key, val);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* backbone_name(BackboneKind k) {
  return k == BackboneKind::vgg16 ? "vgg16" : "toy";
}
const char* mfem_name(MfemVariant v) {
  switch (v) {
    case MfemVariant::gcn: return "gcn";
    case MfemVariant::dilated: return "dilated";
    case MfemVariant::trivial: return "trivial";
    case MfemVariant::conv1x1: return "conv1x1";
  }
  return "?";
}
const char* guide_name(GuideMode g) {
  switch (g) {
    case GuideMode::both: return "both";
    case GuideMode::hg_only: return "hg_only";
    case GuideMode::lg_only: return "lg_only";
    case GuideMode::none: return "none";
  }
  return "?";
}
const char* wiring_name(GuideWiring w) {
  return w == GuideWiring::top_down ? "top_down" : "independent_pairs";
}
const char* norm_name(NormMode n) {
  return n == NormMode::batch ? "batch" : "none";
}
const char* loss_name(LossKind l) {
  return l == LossKind::designed ? "designed" : "cross_entropy";
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  bool batch_size_set = false;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    check(eq != std::string::npos, "config: expected key=value, got: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "backbone") {
      if (val == "vgg16")
        cfg.model.backbone = BackboneKind::vgg16;
      else if (val == "toy")
        cfg.model.backbone = BackboneKind::toy;
      else
        bad_value(key, val);
    } else if (key == "toy_width") {
      cfg.model.toy_width = to_int(key, val);
    } else if (key == "nf") {
      cfg.model.nf = to_int(key, val);
    } else if (key == "mfem") {
      if (val == "gcn")
        cfg.model.mfem = MfemVariant::gcn;
      else if (val == "dilated")
        cfg.model.mfem = MfemVariant::dilated;
      else if (val == "trivial")
        cfg.model.mfem = MfemVariant::trivial;
      else if (val == "conv1x1")
        cfg.model.mfem = MfemVariant::conv1x1;
      else
        bad_value(key, val);
    } else if (key == "guide") {
      if (val == "both")
        cfg.model.guide = GuideMode::both;
      else if (val == "hg_only")
        cfg.model.guide = GuideMode::hg_only;
      else if (val == "lg_only")
        cfg.model.guide = GuideMode::lg_only;
      else if (val == "none")
        cfg.model.guide = GuideMode::none;
      else
        bad_value(key, val);
    } else if (key == "wiring") {
      if (val == "top_down")
        cfg.model.wiring = GuideWiring::top_down;
      else if (val == "independent_pairs")
        cfg.model.wiring = GuideWiring::independent_pairs;
      else
        bad_value(key, val);
    } else if (key == "use_rrm") {
      cfg.model.use_rrm = to_bool(key, val);
    } else if (key == "norm") {
      if (val == "batch")
        cfg.model.norm = NormMode::batch;
      else if (val == "none")
        cfg.model.norm = NormMode::none;
      else
        bad_value(key, val);
    } else if (key == "se_reduction") {
      cfg.model.se_reduction = to_int(key, val);
    } else if (key == "loss") {
      if (val == "designed")
        cfg.model.loss = LossKind::designed;
      else if (val == "cross_entropy")
        cfg.model.loss = LossKind::cross_entropy;
      else
        bad_value(key, val);
    } else if (key == "input_size") {
      cfg.model.input_size = to_int(key, val);
    } else if (key == "alpha1") {
      cfg.loss.alpha1 = to_double(key, val);
    } else if (key == "alpha2") {
      cfg.loss.alpha2 = to_double(key, val);
    } else if (key == "alpha3") {
      cfg.loss.alpha3 = to_double(key, val);
    } else if (key == "epsilon") {
      cfg.loss.epsilon = to_double(key, val);
    } else if (key == "lr0") {
      cfg.train.lr0 = to_double(key, val);
    } else if (key == "momentum") {
      cfg.train.momentum = to_double(key, val);
    } else if (key == "patience") {
      cfg.train.patience = to_int(key, val);
    } else if (key == "factor") {
      cfg.train.factor = to_double(key, val);
    } else if (key == "epochs") {
      cfg.train.epochs = to_int(key, val);
    } else if (key == "batch_size") {
      cfg.train.batch_size = to_int(key, val);
      batch_size_set = true;
    } else if (key == "seed") {
      cfg.train.seed = to_u64(key, val);
    } else if (key == "augment") {
      cfg.train.augment = to_bool(key, val);
    } else if (key == "target_mae") {
      cfg.train.target_mae = to_double(key, val);
    } else {
      throw std::invalid_argument("config: unknown key: " + key);
    }
  }
  if (!batch_size_set && cfg.model.norm == NormMode::none)
    cfg.train.batch_size = 1;
  check(cfg.model.input_size >= 32 && cfg.model.input_size % 32 == 0,
        "config: input_size must be a positive multiple of 32");
  check(cfg.train.batch_size >= 1, "config: batch_size must be positive");
  check(cfg.train.epochs >= 0, "config: epochs must not be negative");
  check(cfg.train.patience >= 1, "config: patience must be positive");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "backbone=" << backbone_name(cfg.model.backbone) << "\n"
      << "toy_width=" << cfg.model.toy_width << "\n"
      << "nf=" << cfg.model.nf << "\n"
      << "mfem=" << mfem_name(cfg.model.mfem) << "\n"
      << "guide=" << guide_name(cfg.model.guide) << "\n"
      << "wiring=" << wiring_name(cfg.model.wiring) << "\n"
      << "use_rrm=" << (cfg.model.use_rrm ? "true" : "false") << "\n"
      << "norm=" << norm_name(cfg.model.norm) << "\n"
      << "se_reduction=" << cfg.model.se_reduction << "\n"
      << "loss=" << loss_name(cfg.model.loss) << "\n"
      << "input_size=" << cfg.model.input_size << "\n"
      << "alpha1=" << fmt(cfg.loss.alpha1) << "\n"
      << "alpha2=" << fmt(cfg.loss.alpha2) << "\n"
      << "alpha3=" << fmt(cfg.loss.alpha3) << "\n"
      << "epsilon=" << fmt(cfg.loss.epsilon) << "\n"
      << "lr0=" << fmt(cfg.train.lr0) << "\n"
      << "momentum=" << fmt(cfg.train.momentum) << "\n"
      << "patience=" << cfg.train.patience << "\n"
      << "factor=" << fmt(cfg.train.factor) << "\n"
      << "epochs=" << cfg.train.epochs << "\n"
      << "batch_size=" << cfg.train.batch_size << "\n"
      << "seed=" << cfg.train.seed << "\n"
      << "augment=" << (cfg.train.augment ? "true" : "false") << "\n"
      << "target_mae=" << fmt(cfg.train.target_mae) << "\n";
  return out.str();
}

}  // namespace cagnet
