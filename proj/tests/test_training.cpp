#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "primelearn/checkpoint.hpp"
#include "primelearn/numtheory.hpp"
#include "primelearn/training.hpp"

using namespace primelearn;
using dataset::RangeSpec;
using encoding::EncodingShape;
using model::ModelConfig;
using model::ModelState;
using training::TrainConfig;

namespace {

TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.split.train = RangeSpec{0, 0, 600};
  cfg.split.test = RangeSpec{0, 600, 1200};
  cfg.split.shape = EncodingShape{12, 12, 12, 5};
  cfg.split.sample_fraction = 0.5;
  cfg.model_cfg.d_model = 8;
  cfg.model_cfg.n_res_blocks = 1;
  cfg.model_cfg.n_tx_layers = 1;
  cfg.model_cfg.n_heads = 2;
  cfg.model_cfg.ff_mult = 2;
  cfg.model_cfg.shape = cfg.split.shape;
  cfg.weights = {1.0, 10.0};
  cfg.lr0 = 0.01;
  cfg.patience = 3;
  cfg.batch_size = 8;
  cfg.epochs = 2;
  cfg.eval_every = 5;
  cfg.eval_subsample = 1.0;
  cfg.master_seed = 7;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("TrainConfig validation catches bad knobs") {
  TrainConfig cfg = toy_config();
  CHECK_NOTHROW(cfg.validate());
  SECTION("lr") {
    cfg.lr0 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SECTION("decay") {
    cfg.decay_factor = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SECTION("epochs") {
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SECTION("shape mismatch") {
    cfg.model_cfg.shape.l = 7;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
}

TEST_CASE("evaluate on an all-zero model predicts prime everywhere") {
  ModelConfig mc;
  mc.d_model = 8;
  mc.n_res_blocks = 1;
  mc.n_tx_layers = 1;
  mc.n_heads = 2;
  mc.ff_mult = 2;
  mc.shape = EncodingShape{12, 12, 12, 5};
  auto st = ModelState<float>::zeros(mc);

  RangeSpec range{0, 0, 30};
  dataset::LabelSource labels(0, 30);
  const auto result = training::evaluate(st, range, labels, 1.0);

  // Hand-computed confusion for [0, 30): 10 primes, 20 non-primes, and the
  // p >= 0.5 rule sends every token to the prime class at p = 0.5.
  CHECK(result.metrics.tp == 10);
  CHECK(result.metrics.fp == 20);
  CHECK(result.metrics.tn == 0);
  CHECK(result.metrics.fn == 0);
  CHECK(result.metrics.recall_prime == 1.0);
  CHECK(result.metrics.recall_nonprime == 0.0);
  CHECK_THAT(result.metrics.accuracy, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));
  CHECK(result.metrics.auc == 0.5);  // all scores tie

  // The false-positive set is exactly the non-primes of the range.
  REQUIRE(result.false_positives.size() == 20);
  for (std::uint64_t v : result.false_positives) CHECK_FALSE(numtheory::is_prime(v));
}

TEST_CASE("evaluate's false positives are always non-prime") {
  TrainConfig cfg = toy_config();
  auto st = ModelState<float>::init(cfg.model_cfg, 3);
  dataset::LabelSource labels(0, cfg.split.test.end);
  const auto result = training::evaluate(st, cfg.split.test, labels, 1.0);
  for (std::uint64_t v : result.false_positives) {
    CHECK_FALSE(numtheory::is_prime(v));
    CHECK(v >= cfg.split.test.abs_lo());
    CHECK(v < cfg.split.test.abs_hi());
  }
}

TEST_CASE("a toy run completes with a well-formed log and run directory") {
  TempDir dir("primelearn_toy_run");
  TrainConfig cfg = toy_config();
  const auto result = training::train_run(cfg, dir.path, "stub config\n", "deadbeef");

  REQUIRE_FALSE(result.log.records.empty());
  std::size_t prev_iter = 0;
  std::size_t full_count = 0;
  for (const auto& rec : result.log.records) {
    CHECK(rec.iteration > prev_iter);  // strictly increasing
    prev_iter = rec.iteration;
    if (rec.full_range) ++full_count;
    CHECK(analysis::is_defined(rec.metrics.recall_prime));
    CHECK(analysis::is_defined(rec.metrics.recall_nonprime));
  }
  CHECK(full_count == cfg.epochs);  // one full evaluation per epoch end

  CHECK(std::filesystem::exists(dir.path / "config.cfg"));
  CHECK(std::filesystem::exists(dir.path / "runlog.csv"));
  CHECK(std::filesystem::exists(dir.path / "final_metrics.csv"));
  CHECK(std::filesystem::exists(dir.path / "checkpoints" / "epoch_001" / "manifest.txt"));
  CHECK(std::filesystem::exists(dir.path / "checkpoints" / "epoch_002" / "params.bin"));
  CHECK(std::filesystem::exists(dir.path / "checkpoints" / "best" / "manifest.txt"));

  // One fp_*.txt per full evaluation.
  std::size_t fp_files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir.path))
    if (entry.path().filename().string().starts_with("fp_")) ++fp_files;
  CHECK(fp_files == cfg.epochs);

  const std::string log_text = slurp(dir.path / "runlog.csv");
  CHECK(log_text.starts_with("# config_hash=deadbeef\niteration,epoch,lr,loss"));
}

TEST_CASE("identical seeds replay to byte-identical run logs") {
  TempDir a("primelearn_det_a"), b("primelearn_det_b");
  TrainConfig cfg = toy_config();
  training::train_run(cfg, a.path, "c", "h");
  training::train_run(cfg, b.path, "c", "h");
  const std::string la = slurp(a.path / "runlog.csv");
  REQUIRE_FALSE(la.empty());
  CHECK(la == slurp(b.path / "runlog.csv"));

  TempDir c("primelearn_det_c");
  cfg.master_seed = 8;
  training::train_run(cfg, c.path, "c", "h");
  CHECK(la != slurp(c.path / "runlog.csv"));
}

TEST_CASE("checkpoints round-trip bit-exactly and evaluate identically") {
  TempDir dir("primelearn_ckpt");
  TrainConfig cfg = toy_config();
  auto st = ModelState<float>::init(cfg.model_cfg, 2024);

  checkpoint::CheckpointMeta meta;
  meta.seed = 2024;
  meta.iteration = 17;
  meta.loss = 1.25;
  meta.config_hash = "cafe";
  checkpoint::save_checkpoint(dir.path / "ck", st, meta);
  auto loaded = checkpoint::load_checkpoint(dir.path / "ck");

  CHECK(loaded.meta.iteration == 17);
  CHECK(loaded.meta.seed == 2024);
  CHECK(loaded.meta.config_hash == "cafe");
  REQUIRE(loaded.state.cfg == st.cfg);
  for (const auto& name : st.names())
    REQUIRE(loaded.state.param(name).data == st.param(name).data);  // bit-exact

  dataset::LabelSource labels(0, cfg.split.test.end);
  const auto before = training::evaluate(st, cfg.split.test, labels, 1.0);
  const auto after = training::evaluate(loaded.state, cfg.split.test, labels, 1.0);
  CHECK(before.metrics.tp == after.metrics.tp);
  CHECK(before.metrics.fp == after.metrics.fp);
  CHECK(before.metrics.auc == after.metrics.auc);
  CHECK(before.false_positives == after.false_positives);
}

TEST_CASE("a stalled monitored metric decays the learning rate on schedule") {
  TempDir dir("primelearn_decay");
  TrainConfig cfg = toy_config();
  cfg.lr0 = 1e-12;  // updates vanish in float32: metrics freeze
  cfg.patience = 1;
  cfg.epochs = 1;
  cfg.eval_every = 2;  // several evals within the epoch
  const auto result = training::train_run(cfg);

  REQUIRE(result.log.records.size() >= 4);
  // First eval improves on -inf; after that every eval triggers a decay.
  CHECK(result.log.records[0].lr == 1e-12);
  CHECK(result.log.records[1].lr == 1e-12);
  CHECK_THAT(result.log.records[2].lr, Catch::Matchers::WithinRel(0.5e-12, 1e-9));
  CHECK_THAT(result.log.records[3].lr, Catch::Matchers::WithinRel(0.25e-12, 1e-9));
}

TEST_CASE("numeric divergence aborts the run and leaves a marker") {
  TempDir dir("primelearn_abort");
  TrainConfig cfg = toy_config();
  cfg.lr0 = 1e40;  // first update overflows float32
  CHECK_THROWS_AS(training::train_run(cfg, dir.path, "c", "h"), nd::numeric_error);
  CHECK(std::filesystem::exists(dir.path / "aborted.txt"));
}

TEST_CASE("resampled and full-dataset runs both produce complete logs") {
  TrainConfig cfg = toy_config();
  cfg.epochs = 1;

  cfg.split.sample_fraction = 0.05;
  const auto sampled = training::train_run(cfg);
  cfg.split.sample_fraction = 1.0;
  const auto full = training::train_run(cfg);

  REQUIRE_FALSE(sampled.log.records.empty());
  REQUIRE_FALSE(full.log.records.empty());
  // 5% of 120 windows = 6; full uses all 120.
  CHECK(sampled.log.records.back().iteration == 1);   // 6 windows / batch 8
  CHECK(full.log.records.back().iteration == 15);     // 120 windows / batch 8
}

TEST_CASE("evaluate validates its subsample argument") {
  ModelConfig mc = toy_config().model_cfg;
  auto st = ModelState<float>::zeros(mc);
  dataset::LabelSource labels(0, 100);
  CHECK_THROWS_AS(training::evaluate(st, RangeSpec{0, 0, 100}, labels, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(training::evaluate(st, RangeSpec{0, 0, 100}, labels, 1.5),
                  std::invalid_argument);
}
