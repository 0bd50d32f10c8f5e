#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "primelearn/config.hpp"

using namespace primelearn;
using config::RunConfig;

TEST_CASE("an empty document yields the desk defaults") {
  const RunConfig cfg = config::parse_config("");
  CHECK(cfg.train_end == 100000);
  CHECK(cfg.test_start == 100000);
  CHECK(cfg.test_end == 300000);
  CHECK(cfg.shape_m == 70);
  CHECK(cfg.seq_len == 15);
  CHECK(cfg.w1 == 20.0);
  CHECK(cfg.lr0 == 0.01);
  CHECK(cfg.sample_fraction == 0.05);
  CHECK_NOTHROW(cfg.train().validate());
}

TEST_CASE("canonical text round-trips exactly and is idempotent") {
  RunConfig cfg;
  cfg.train_offset = 100000000;
  cfg.test_start = 1000000;
  cfg.test_end = 3000000;
  cfg.shape_m = 150;
  cfg.shape_n = 150;
  cfg.shape_o = 150;
  cfg.sample_fraction = 0.037;
  cfg.lr0 = 0.0123456789012345;
  cfg.master_seed = 99;
  // keep validation invariants sane for this test
  cfg.train_end = 1000000;

  const std::string text = config::canonical_text(cfg);
  const RunConfig parsed = config::parse_config(text);
  CHECK(parsed == cfg);
  CHECK(config::canonical_text(parsed) == text);
  CHECK(config::config_hash(parsed) == config::config_hash(cfg));
}

TEST_CASE("parser accepts comments and blank lines") {
  const std::string text =
      "# a comment\n"
      "\n"
      "  epochs = 4  \n"
      "w1 = 25\n";
  const RunConfig cfg = config::parse_config(text);
  CHECK(cfg.epochs == 4);
  CHECK(cfg.w1 == 25.0);
}

TEST_CASE("unknown keys are rejected by name") {
  try {
    config::parse_config("no_such_knob = 3\n");
    FAIL("expected config_error");
  } catch (const config::config_error& e) {
    CHECK(std::string(e.what()).find("no_such_knob") != std::string::npos);
  }
}

TEST_CASE("duplicate keys and malformed lines are rejected") {
  CHECK_THROWS_AS(config::parse_config("epochs = 1\nepochs = 2\n"), config::config_error);
  CHECK_THROWS_AS(config::parse_config("epochs\n"), config::config_error);
  CHECK_THROWS_AS(config::parse_config("epochs = \n"), config::config_error);
  CHECK_THROWS_AS(config::parse_config("epochs = twelve\n"), config::config_error);
  CHECK_THROWS_AS(config::parse_config("lr0 = fast\n"), config::config_error);
}

TEST_CASE("the test offset follows the train offset unless overridden") {
  const RunConfig follows = config::parse_config("train_offset = 100000000\n");
  CHECK(follows.test_offset == 100000000);

  const RunConfig overridden = config::parse_config(
      "train_offset = 2000000\ntest_offset = 0\n"
      "train_start = 0\ntrain_end = 100000\n"
      "test_start = 0\ntest_end = 200000\n"
      "shape_m = 130\nshape_n = 130\nshape_o = 130\n");
  CHECK(overridden.test_offset == 0);
  CHECK_NOTHROW(overridden.train().validate());  // reversed setup is legal
}

TEST_CASE("invalid knob values fail training validation") {
  RunConfig cfg = config::parse_config("sample_fraction = 0\n");
  CHECK_THROWS_AS(cfg.train().validate(), std::invalid_argument);
  cfg = config::parse_config("lr0 = -0.5\n");
  CHECK_THROWS_AS(cfg.train().validate(), std::invalid_argument);
  cfg = config::parse_config("train_start = 5\ntrain_end = 5\n");
  CHECK_THROWS_AS(cfg.train().validate(), std::invalid_argument);
  // Overlapping absolute ranges.
  cfg = config::parse_config("test_start = 99999\n");
  CHECK_THROWS_AS(cfg.train().validate(), std::invalid_argument);
}

TEST_CASE("the hash responds to any field change") {
  const RunConfig base;
  RunConfig changed = base;
  changed.master_seed = 2;
  CHECK(config::config_hash(base) != config::config_hash(changed));
  changed = base;
  changed.w1 = 21.0;
  CHECK(config::config_hash(base) != config::config_hash(changed));
}
