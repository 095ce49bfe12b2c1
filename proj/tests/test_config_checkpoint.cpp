#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "cagnet/checkpoint.hpp"
#include "cagnet/config.hpp"
#include "cagnet/rng.hpp"

using namespace cagnet;
namespace fs = std::filesystem;

TEST_CASE("config: defaults survive an empty document") {
  const RunConfig cfg = parse_config("# nothing but comments\n\n");
  CHECK(cfg.model.backbone == BackboneKind::vgg16);
  CHECK(cfg.model.nf == 8);
  CHECK(cfg.model.mfem == MfemVariant::gcn);
  CHECK(cfg.model.guide == GuideMode::both);
  CHECK(cfg.model.use_rrm);
  CHECK(cfg.model.input_size == 480);
  CHECK(cfg.train.lr0 == 8e-3);
  CHECK(cfg.train.momentum == 0.9);
  CHECK(cfg.train.patience == 10);
  CHECK(cfg.train.factor == 0.1);
  CHECK(cfg.train.batch_size == 4);
  CHECK(cfg.loss.alpha1 == 1.0);
  CHECK(cfg.loss.alpha2 == 0.5);
  CHECK(cfg.loss.alpha3 == 1.0);
}

TEST_CASE("config: canonical text round-trips exactly") {
  RunConfig cfg;
  cfg.model.backbone = BackboneKind::toy;
  cfg.model.toy_width = 24;
  cfg.model.nf = 4;
  cfg.model.mfem = MfemVariant::dilated;
  cfg.model.guide = GuideMode::lg_only;
  cfg.model.wiring = GuideWiring::independent_pairs;
  cfg.model.use_rrm = false;
  cfg.model.norm = NormMode::batch;
  cfg.model.se_reduction = 8;
  cfg.model.loss = LossKind::cross_entropy;
  cfg.model.input_size = 96;
  cfg.loss.alpha2 = 0.125;
  cfg.loss.epsilon = 3e-9;
  cfg.train.lr0 = 0.0123456789012345678;  // exercise full double precision
  cfg.train.patience = 3;
  cfg.train.epochs = 17;
  cfg.train.batch_size = 2;
  cfg.train.seed = 0xdeadbeefcafef00dULL;
  cfg.train.augment = false;
  cfg.train.target_mae = 0.07;

  const std::string text = serialize_config(cfg);
  const RunConfig back = parse_config(text);
  CHECK(serialize_config(back) == text);
  CHECK(back.model.backbone == BackboneKind::toy);
  CHECK(back.model.toy_width == 24);
  CHECK(back.model.wiring == GuideWiring::independent_pairs);
  CHECK(back.train.lr0 == cfg.train.lr0);
  CHECK(back.train.seed == cfg.train.seed);
  CHECK(back.loss.epsilon == cfg.loss.epsilon);
  CHECK(back.train.target_mae == cfg.train.target_mae);
}

TEST_CASE("config: parsing tolerates comments and blank space") {
  const RunConfig cfg = parse_config(
      "  nf = 6   # inline comment\n"
      "\n"
      "guide=hg_only\r\n"
      "lr0 = 1e-2\n");
  CHECK(cfg.model.nf == 6);
  CHECK(cfg.model.guide == GuideMode::hg_only);
  CHECK(cfg.train.lr0 == 0.01);
}

TEST_CASE("config: errors name the offending key") {
  CHECK_THROWS_WITH_AS(parse_config("wibble=3\n"),
                       doctest::Contains("unknown key: wibble"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("nf=three\n"),
                       doctest::Contains("bad value for nf"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("lr0=1e-3x\n"),
                       doctest::Contains("bad value for lr0"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("mfem=huge\n"),
                       doctest::Contains("bad value for mfem"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("augment=maybe\n"),
                       doctest::Contains("bad value for augment"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("just a line\n"),
                       doctest::Contains("expected key=value"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("input_size=100\n"),
                       doctest::Contains("multiple of 32"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("epochs=-1\n"),
                       doctest::Contains("epochs"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("batch_size=0\n"),
                       doctest::Contains("batch_size"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("patience=0\n"),
                       doctest::Contains("patience"), std::invalid_argument);
}

TEST_CASE("config: batch size falls back to 1 without normalisation") {
  CHECK(parse_config("norm=none\n").train.batch_size == 1);
  CHECK(parse_config("norm=none\nbatch_size=3\n").train.batch_size == 3);
  CHECK(parse_config("norm=batch\n").train.batch_size == 4);
}

TEST_CASE("config: load_config reads from disk") {
  const fs::path path = fs::temp_directory_path() / "cagnet_config_test.cfg";
  {
    std::ofstream out(path);
    out << "backbone=toy\ninput_size=64\n";
  }
  const RunConfig cfg = load_config(path.string());
  CHECK(cfg.model.backbone == BackboneKind::toy);
  CHECK(cfg.model.input_size == 64);
  fs::remove(path);
  CHECK_THROWS_WITH_AS(load_config(path.string()),
                       doctest::Contains("cannot open"),
                       std::invalid_argument);
}

namespace {

Checkpoint sample_checkpoint(std::uint64_t seed) {
  Rng rng(seed);
  Checkpoint ck;
  ck.config_text = serialize_config(RunConfig{});
  ck.next_epoch = 12;
  for (auto& s : ck.rng_state) s = rng.next_u64();

  auto fill = [&](ParamStore& ps, const std::string& name, const Shape& sh) {
    Tensor t(sh);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
    ps.create(name, std::move(t));
  };
  fill(ck.params, "layer.weight", Shape(4, 3, 3, 3));
  fill(ck.params, "layer.bias", Shape(1, 4, 1, 1));
  fill(ck.buffers, "norm.running_mean", Shape(1, 4, 1, 1));
  fill(ck.velocity, "layer.weight", Shape(4, 3, 3, 3));
  return ck;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("checkpoint: save and load round-trip bit for bit") {
  const fs::path root = fs::temp_directory_path() / "cagnet_ckpt_test";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path path = root / "model.bin";

  const Checkpoint ck = sample_checkpoint(31);
  save_checkpoint(path.string(), ck);
  CHECK(!fs::exists(path.string() + ".tmp"));  // temp file was renamed away

  const Checkpoint back = load_checkpoint(path.string());
  CHECK(back.config_text == ck.config_text);
  CHECK(back.next_epoch == ck.next_epoch);
  CHECK(back.rng_state == ck.rng_state);
  REQUIRE(back.params.names() == ck.params.names());
  for (const auto& name : ck.params.names()) {
    const Tensor& a = ck.params.at(name);
    const Tensor& b = back.params.at(name);
    REQUIRE(a.same_shape(b));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
  CHECK(back.buffers.names() == ck.buffers.names());
  CHECK(back.velocity.names() == ck.velocity.names());

  // Saving the same state twice produces identical bytes.
  const fs::path path2 = root / "model2.bin";
  save_checkpoint(path2.string(), ck);
  CHECK(slurp(path) == slurp(path2));
  fs::remove_all(root);
}

TEST_CASE("checkpoint: damaged files are rejected with a reason") {
  const fs::path root = fs::temp_directory_path() / "cagnet_ckpt_bad";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path path = root / "model.bin";
  save_checkpoint(path.string(), sample_checkpoint(32));

  const std::vector<char> good = slurp(path);

  // A foreign file is not a checkpoint.
  const fs::path alien = root / "alien.bin";
  {
    std::ofstream out(alien, std::ios::binary);
    out << "definitely not a checkpoint";
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(alien.string()),
                       doctest::Contains("not a checkpoint"),
                       std::invalid_argument);

  // A bumped version number is refused, not misread.
  std::vector<char> versioned = good;
  versioned[8] = 9;
  {
    std::ofstream out(path, std::ios::binary);
    out.write(versioned.data(), static_cast<std::streamsize>(versioned.size()));
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(path.string()),
                       doctest::Contains("unsupported checkpoint version 9"),
                       std::invalid_argument);

  // Truncation anywhere in the tail is caught by the reader.
  const fs::path cut = root / "cut.bin";
  {
    std::ofstream out(cut, std::ios::binary);
    out.write(good.data(), static_cast<std::streamsize>(good.size() / 2));
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(cut.string()),
                       doctest::Contains("truncated checkpoint"),
                       std::invalid_argument);

  CHECK_THROWS_WITH_AS(load_checkpoint((root / "missing.bin").string()),
                       doctest::Contains("cannot open"),
                       std::invalid_argument);
  fs::remove_all(root);
}

TEST_CASE("checkpoint: embedded config text stays parseable") {
  const Checkpoint ck = sample_checkpoint(33);
  const RunConfig cfg = parse_config(ck.config_text);
  CHECK(serialize_config(cfg) == ck.config_text);

  // Zero remaining epochs must stay loadable: resuming a finished run is
  // how inference gets at the weights.
  RunConfig done;
  done.train.epochs = 0;
  CHECK(parse_config(serialize_config(done)).train.epochs == 0);
}
