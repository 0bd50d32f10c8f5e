// primelearn command-line interface.
//
// Subcommands:
//   primes scan     bulk primality over a range, optional bitmap file
//   dataset stats   block-count CSVs, PNT curve, JS/Wasserstein summary
//   train           one training run (or --sweep over a config list)
//   eval            score a range with a checkpoint
//   analyze fp      false-positive factor structure and consistency
//   selftest        built-in correctness checks
//
// Exit codes: 0 success, 1 selftest/assertion failure, 2 usage/config error,
// 3 numeric divergence.

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "primelearn/analysis.hpp"
#include "primelearn/checkpoint.hpp"
#include "primelearn/config.hpp"
#include "primelearn/dataset.hpp"
#include "primelearn/encoding.hpp"
#include "primelearn/model.hpp"
#include "primelearn/numtheory.hpp"
#include "primelearn/training.hpp"

namespace fs = std::filesystem;
using namespace primelearn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSelftest = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

fs::path runs_root() {
  if (const char* env = std::getenv("PRIMELEARN_RUNS")) return fs::path(env);
  return fs::path("runs");
}

// ---------------------------------------------------------------------------
// primes scan

struct ScanArgs {
  std::uint64_t lo = 0, hi = 0, offset = 0;
  std::string out;
};

int run_scan(const ScanArgs& args) {
  const auto bitmap = numtheory::sieve_range(args.offset + args.lo, args.offset + args.hi);
  std::cout << bitmap.count() << "\n";
  if (!args.out.empty()) {
    numtheory::save_bitmap(args.out, bitmap, args.offset);
    std::cerr << "bitmap written to " << args.out << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// dataset stats

struct StatsArgs {
  std::string config;
  std::string out = "stats";
  std::uint64_t block_size = 1000;
};

void write_block_csv(const fs::path& path, const numtheory::BlockCounts& blocks,
                     const std::string& hash) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "# config_hash=" << hash << "\nblock_start,count\n";
  for (std::size_t i = 0; i < blocks.counts.size(); ++i)
    out << blocks.lo + i * blocks.block_size << ',' << blocks.counts[i] << "\n";
}

int run_stats(const StatsArgs& args) {
  const auto cfg = config::load_config(args.config);
  const auto hash = config::config_hash(cfg);
  const auto split = cfg.split();  // not validated for disjointness: stats may compare any pair
  split.train.validate();
  split.test.validate();

  if (split.train.span() % args.block_size != 0 || split.test.span() % args.block_size != 0)
    throw config::config_error("dataset stats: block size must divide both spans");

  fs::create_directories(args.out);
  const auto train_blocks =
      numtheory::prime_block_counts(split.train.abs_lo(), split.train.abs_hi(), args.block_size);
  const auto test_blocks =
      numtheory::prime_block_counts(split.test.abs_lo(), split.test.abs_hi(), args.block_size);
  write_block_csv(fs::path(args.out) / "train_blocks.csv", train_blocks, hash);
  write_block_csv(fs::path(args.out) / "test_blocks.csv", test_blocks, hash);

  // PNT density curve at block midpoints over both ranges.
  {
    std::map<std::uint64_t, double> curve;
    for (const auto* blocks : {&train_blocks, &test_blocks})
      for (std::size_t i = 0; i < blocks->counts.size(); ++i) {
        const std::uint64_t start = blocks->lo + i * blocks->block_size;
        const std::uint64_t mid = start + blocks->block_size / 2;
        if (mid >= 2) curve[start] = numtheory::pnt_expected_count(mid, blocks->block_size);
      }
    std::ofstream out(fs::path(args.out) / "pnt.csv", std::ios::trunc);
    out << "# config_hash=" << hash << "\nblock_start,expected_count\n";
    for (const auto& [start, expected] : curve) out << start << ',' << fmt_g(expected) << "\n";
  }

  const auto train_dist = analysis::CountDistribution::from_blocks(train_blocks);
  const auto test_dist = analysis::CountDistribution::from_blocks(test_blocks);
  const double w1 = analysis::wasserstein1(train_dist, test_dist);
  const double js2 = analysis::js_divergence(train_dist, test_dist);
  const double jsd = analysis::js_distance(train_dist, test_dist);
  const double mean_diff = train_dist.mean() - test_dist.mean();

  {
    std::ofstream out(fs::path(args.out) / "summary.csv", std::ios::trunc);
    out << "# config_hash=" << hash << "\nmetric,value\n";
    out << "wasserstein1," << fmt_g(w1) << "\n";
    out << "mean_count_difference," << fmt_g(mean_diff) << "\n";
    out << "js_divergence_base2," << fmt_g(js2) << "\n";
    out << "js_distance_base2," << fmt_g(jsd) << "\n";
  }
  std::cout << "wasserstein1 " << fmt_g(w1) << "\n"
            << "mean_count_difference " << fmt_g(mean_diff) << "\n"
            << "js_divergence_base2 " << fmt_g(js2) << "\n"
            << "js_distance_base2 " << fmt_g(jsd) << "\n"
            << "artifacts in " << args.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config;
  std::string sweep;
  std::string out;
  bool quiet = false;
};

void print_record(const training::EvalRecord& rec) {
  std::cout << "iter " << rec.iteration << " epoch " << rec.epoch << " lr " << fmt_g(rec.lr)
            << " loss " << fmt_g(rec.train_loss) << " | recall_p "
            << fmt_g(rec.metrics.recall_prime) << " recall_np "
            << fmt_g(rec.metrics.recall_nonprime) << " auc " << fmt_g(rec.metrics.auc)
            << (rec.full_range ? " [full]" : "") << "\n";
}

training::TrainResult run_one_training(const config::RunConfig& cfg, const fs::path& dir,
                                       bool quiet) {
  const auto train_cfg = cfg.train();
  train_cfg.validate();
  return training::train_run(train_cfg, dir, config::canonical_text(cfg),
                             config::config_hash(cfg),
                             quiet ? nullptr : std::function(print_record));
}

int run_train(const TrainArgs& args) {
  if (args.sweep.empty()) {
    const auto cfg = config::load_config(args.config);
    const fs::path dir =
        args.out.empty() ? runs_root() / ("run_" + config::config_hash(cfg)) : fs::path(args.out);
    const auto result = run_one_training(cfg, dir, args.quiet);
    const auto& final_rec = result.log.records.back();
    std::cout << "run directory: " << dir.string() << "\n"
              << "final recall_prime " << fmt_g(final_rec.metrics.recall_prime)
              << " recall_nonprime " << fmt_g(final_rec.metrics.recall_nonprime) << " auc "
              << fmt_g(final_rec.metrics.auc) << "\n";
    return kExitOk;
  }

  // Sweep: each non-comment line of the sweep file is a run config path,
  // resolved relative to the sweep file.
  std::ifstream sweep_in(args.sweep);
  if (!sweep_in) throw config::config_error("train: cannot open sweep file " + args.sweep);
  const fs::path sweep_base = fs::path(args.sweep).parent_path();
  const fs::path out_root = args.out.empty() ? runs_root() / "sweep" : fs::path(args.out);
  fs::create_directories(out_root);

  std::ofstream summary(out_root / "summary.csv", std::ios::trunc);
  summary << "cell,config_hash,iterations,recall_prime,recall_nonprime,precision_prime,"
             "precision_nonprime,accuracy,auc\n";

  std::string line;
  std::size_t cells = 0;
  while (std::getline(sweep_in, line)) {
    std::string trimmed = line;
    if (const auto b = trimmed.find_first_not_of(" \t\r"); b != std::string::npos)
      trimmed = trimmed.substr(b, trimmed.find_last_not_of(" \t\r") - b + 1);
    else
      continue;
    if (trimmed.empty() || trimmed[0] == '#') continue;
    fs::path cfg_path(trimmed);
    if (cfg_path.is_relative()) cfg_path = sweep_base / cfg_path;
    const auto cfg = config::load_config(cfg_path);
    const std::string cell = cfg_path.stem().string();
    std::cout << "=== sweep cell " << cell << " ===\n";
    const auto result = run_one_training(cfg, out_root / cell, args.quiet);
    const auto& m = result.log.records.back().metrics;
    summary << cell << ',' << config::config_hash(cfg) << ','
            << result.log.records.back().iteration << ',' << fmt_g(m.recall_prime) << ','
            << fmt_g(m.recall_nonprime) << ',' << fmt_g(m.precision_prime) << ','
            << fmt_g(m.precision_nonprime) << ',' << fmt_g(m.accuracy) << ','
            << fmt_g(m.auc) << "\n";
    summary.flush();
    ++cells;
  }
  if (cells == 0) throw config::config_error("train: sweep file lists no configs");
  std::cout << "sweep summary: " << (out_root / "summary.csv").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string checkpoint;
  std::uint64_t lo = 0, hi = 0, offset = 0;
  double threshold = 0.5;
  double subsample = 1.0;
  std::string out = ".";
};

int run_eval(const EvalArgs& args) {
  auto loaded = checkpoint::load_checkpoint(args.checkpoint);
  const dataset::RangeSpec range{args.offset, args.lo, args.hi};
  range.validate();
  dataset::LabelSource labels(args.offset, args.hi);
  const auto result =
      training::evaluate(loaded.state, range, labels, args.subsample, args.threshold);

  fs::create_directories(args.out);
  training::write_metrics_csv(fs::path(args.out) / "metrics.csv", result.metrics,
                              loaded.meta.config_hash);
  {
    const auto& m = result.metrics;
    nlohmann::json j;
    j["config_hash"] = loaded.meta.config_hash;
    j["checkpoint_iteration"] = loaded.meta.iteration;
    j["range"] = {{"offset", args.offset}, {"lo", args.lo}, {"hi", args.hi}};
    j["threshold"] = args.threshold;
    j["subsample"] = args.subsample;
    j["counts"] = {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
    j["precision_prime"] = m.precision_prime;
    j["recall_prime"] = m.recall_prime;
    j["f1_prime"] = m.f1_prime;
    j["precision_nonprime"] = m.precision_nonprime;
    j["recall_nonprime"] = m.recall_nonprime;
    j["f1_nonprime"] = m.f1_nonprime;
    j["accuracy"] = m.accuracy;
    j["auc"] = m.auc;
    std::ofstream out(fs::path(args.out) / "metrics.json", std::ios::trunc);
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(args.out) / "fp.txt", std::ios::trunc);
    out << "# config_hash=" << loaded.meta.config_hash << "\n";
    for (std::uint64_t v : result.false_positives) out << v << "\n";
  }
  std::cout << "recall_prime " << fmt_g(result.metrics.recall_prime) << "\n"
            << "recall_nonprime " << fmt_g(result.metrics.recall_nonprime) << "\n"
            << "accuracy " << fmt_g(result.metrics.accuracy) << "\n"
            << "auc " << fmt_g(result.metrics.auc) << "\n"
            << "artifacts in " << args.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// analyze fp

struct AnalyzeArgs {
  std::string run;
  std::string out;
};

std::vector<std::uint64_t> read_fp_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint64_t> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    values.push_back(std::stoull(line));
  }
  return values;
}

int run_analyze_fp(const AnalyzeArgs& args) {
  const fs::path run_dir(args.run);
  const auto cfg = config::load_config(run_dir / "config.cfg");
  const auto hash = config::config_hash(cfg);
  const fs::path out_dir = args.out.empty() ? run_dir / "analysis" : fs::path(args.out);
  fs::create_directories(out_dir);

  std::vector<fs::path> fp_files;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("fp_") && name.ends_with(".txt")) fp_files.push_back(entry.path());
  }
  if (fp_files.empty())
    throw config::config_error("analyze fp: no fp_*.txt files in " + run_dir.string());
  std::sort(fp_files.begin(), fp_files.end());

  const auto split = cfg.split();
  const auto latest = read_fp_file(fp_files.back());
  const auto by_omega = analysis::fpr_by_factor_count(latest, split.test);

  {
    std::ofstream out(out_dir / "fpr_by_omega.csv", std::ios::trunc);
    out << "# config_hash=" << hash << "\nomega,total,misclassified,fpr\n";
    for (const auto& [omega, bucket] : by_omega.buckets)
      out << omega << ',' << bucket.total << ',' << bucket.misclassified << ','
          << fmt_g(bucket.fpr) << "\n";
  }

  // Directional check over the semiprime-to-smooth trend.
  bool directional = true;
  for (int omega : {2, 3}) {
    const auto a = by_omega.buckets.find(omega);
    const auto b = by_omega.buckets.find(omega + 1);
    if (a == by_omega.buckets.end() || b == by_omega.buckets.end()) {
      directional = false;
      break;
    }
    directional = directional && a->second.fpr > b->second.fpr;
  }

  // Consistency across the last (up to) three full evaluations.
  analysis::ConsistencyReport consistency;
  std::size_t used_sets = 0;
  if (fp_files.size() >= 2) {
    std::vector<std::vector<std::uint64_t>> sets;
    const std::size_t take = std::min<std::size_t>(3, fp_files.size());
    for (std::size_t i = fp_files.size() - take; i < fp_files.size(); ++i)
      sets.push_back(read_fp_file(fp_files[i]));
    used_sets = sets.size();
    consistency = analysis::fp_consistency(sets);
  }
  {
    std::ofstream out(out_dir / "fp_consistency.csv", std::ios::trunc);
    out << "# config_hash=" << hash << "\nmetric,value\n";
    out << "evaluations_compared," << used_sets << "\n";
    out << "intersection_over_union," << fmt_g(consistency.intersection_over_union) << "\n";
    out << "mean_pairwise_jaccard," << fmt_g(consistency.mean_pairwise_jaccard) << "\n";
    if (used_sets >= 2) {
      char pct[32];
      std::snprintf(pct, sizeof(pct), "%.2f",
                    100.0 * consistency.intersection_over_union);
      out << "consistency_percent_iou," << pct << "\n";
    }
  }

  std::cout << "fpr by factor count (latest full evaluation):\n";
  for (const auto& [omega, bucket] : by_omega.buckets)
    std::cout << "  omega=" << omega << " total=" << bucket.total
              << " misclassified=" << bucket.misclassified << " fpr=" << fmt_g(bucket.fpr)
              << "\n";
  std::cout << "directional fpr(2)>fpr(3)>fpr(4): " << (directional ? "PASS" : "FAIL") << "\n";
  if (used_sets >= 2)
    std::cout << "fp consistency over last " << used_sets
              << " evals: iou=" << fmt_g(consistency.intersection_over_union)
              << " mean_jaccard=" << fmt_g(consistency.mean_pairwise_jaccard) << "\n";
  else
    std::cout << "fp consistency skipped: fewer than 2 full evaluations\n";
  std::cout << "artifacts in " << out_dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// selftest

int run_selftest() {
  int failures = 0;
  auto report = [&](const char* name, bool ok) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };

  {
    const encoding::EncodingShape shape{100, 100, 100, 15};
    bool ok = true;
    for (std::uint64_t s = 0; s < shape.capacity() && ok; ++s) {
      const auto code = encoding::encode_index(s, shape);
      ok = encoding::decode_index(code.m, code.n, code.o, shape) == s;
    }
    report("encoding bijection (exhaustive, M=N=O=100)", ok);
  }

  {
    model::ModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_res_blocks = 1;
    cfg.n_tx_layers = 1;
    cfg.n_heads = 2;
    cfg.ff_mult = 2;
    cfg.shape = encoding::EncodingShape{4, 4, 4, 4};
    auto st = model::ModelState<double>::init(cfg, 5);
    rng::Engine eng(2);
    for (const char* name : {"res0.w2", "tx0.wo", "tx0.ff2"})
      for (auto& v : st.param(name).data) v = 0.2 * rng::normal01(eng);
    std::vector<encoding::SparseCode> codes;
    for (std::uint64_t s = 0; s < 8; ++s) codes.push_back(encoding::encode_index(s, cfg.shape));
    const std::vector<std::uint8_t> labels = {0, 1, 1, 0, 1, 0, 0, 1};
    auto refs = st.param_refs();
    auto run = [&](bool with_grad) {
      nd::Tape<double> tape(with_grad);
      auto probs = model::forward_probabilities(tape, st, std::span(codes), 2);
      auto loss = tape.wce_loss(probs, labels, 1.0, 20.0);
      const double v = tape.value(loss).data[0];
      if (with_grad) tape.backward(loss);
      return v;
    };
    st.zero_grads();
    const double err =
        nd::gradcheck<double>(run, std::span<const nd::ParamRef<double>>(refs), 1e-3, 4, 7);
    report("gradient check (full model, finite differences)", err < 1e-2);

    nd::testhooks::negate_gelu_grad() = true;
    st.zero_grads();
    const double corrupted =
        nd::gradcheck<double>(run, std::span<const nd::ParamRef<double>>(refs), 1e-3, 4, 7);
    nd::testhooks::negate_gelu_grad() = false;
    report("gradient check detects an injected backward sign flip", corrupted > 1e-2);
  }

  {
    model::ModelConfig cfg;
    cfg.d_model = 16;
    cfg.shape = encoding::EncodingShape{16, 16, 16, 4};
    rng::Engine seeds(31337);
    double max_diff = 0;
    for (int trial = 0; trial < 10; ++trial) {
      auto st = model::ModelState<float>::init(cfg, seeds());
      rng::Engine eng(seeds());
      const auto code =
          encoding::encode_index(rng::uniform_below(eng, cfg.shape.capacity()), cfg.shape);
      const auto sparse = model::embed_sparse(code, st);
      for (std::size_t j = 0; j < cfg.d_model; ++j) {
        const double dense = static_cast<double>(st.param("embed_m")(code.m, j)) +
                             st.param("embed_n")(code.n, j) + st.param("embed_o")(code.o, j) +
                             st.param("embed_b").data[j];
        max_diff = std::max(max_diff, std::abs(dense - static_cast<double>(sparse[j])));
      }
    }
    report("sparse/dense front-end equivalence", max_diff < 1e-6);
  }

  {
    rng::Engine eng(404);
    bool ok = true;
    for (int trial = 0; trial < 20 && ok; ++trial) {
      const std::size_t n = 10 + rng::uniform_below(eng, 291);
      std::vector<double> scores(n);
      std::vector<std::uint8_t> truth(n);
      bool pos = false, neg = false;
      for (std::size_t i = 0; i < n; ++i) {
        scores[i] = static_cast<double>(rng::uniform_below(eng, 9)) / 8.0;
        truth[i] = rng::uniform_below(eng, 2) ? 1 : 0;
        (truth[i] ? pos : neg) = true;
      }
      if (!pos || !neg) continue;
      double wins = 0;
      std::uint64_t pairs = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!truth[i]) continue;
        for (std::size_t j = 0; j < n; ++j) {
          if (truth[j]) continue;
          ++pairs;
          wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
        }
      }
      ok = std::abs(analysis::roc_auc(scores, truth) - wins / static_cast<double>(pairs)) <
           1e-12;
    }
    report("AUC equals the pair-counting oracle", ok);
  }

  return failures == 0 ? kExitOk : kExitSelftest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prime/non-prime classification over sparse-encoded integer ranges"};
  app.require_subcommand(1);

  ScanArgs scan_args;
  auto* primes_cmd = app.add_subcommand("primes", "number-theory utilities");
  primes_cmd->require_subcommand(1);
  auto* scan_cmd = primes_cmd->add_subcommand("scan", "count primes in [offset+lo, offset+hi)");
  scan_cmd->add_option("--lo", scan_args.lo, "range start (offset-relative)")->required();
  scan_cmd->add_option("--hi", scan_args.hi, "range end, exclusive (offset-relative)")
      ->required();
  scan_cmd->add_option("--offset", scan_args.offset, "absolute offset added to lo/hi");
  scan_cmd->add_option("--out", scan_args.out, "write the primality bitmap to this file");

  StatsArgs stats_args;
  auto* dataset_cmd = app.add_subcommand("dataset", "dataset analyses");
  dataset_cmd->require_subcommand(1);
  auto* stats_cmd =
      dataset_cmd->add_subcommand("stats", "block counts, PNT curve, JS/Wasserstein summary");
  stats_cmd->add_option("--config", stats_args.config, "run configuration file")->required();
  stats_cmd->add_option("--out", stats_args.out, "output directory (default: stats)");
  stats_cmd->add_option("--block-size", stats_args.block_size, "sub-range size (default 1000)");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "run the training protocol");
  train_cmd->add_option("--config", train_args.config, "run configuration file");
  train_cmd->add_option("--sweep", train_args.sweep, "file listing one config path per line");
  train_cmd->add_option("--out", train_args.out, "run directory (default: runs/run_<hash>)");
  train_cmd->add_flag("--quiet", train_args.quiet, "suppress per-evaluation progress lines");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a range");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint directory")->required();
  eval_cmd->add_option("--lo", eval_args.lo, "range start (offset-relative)")->required();
  eval_cmd->add_option("--hi", eval_args.hi, "range end, exclusive")->required();
  eval_cmd->add_option("--offset", eval_args.offset, "absolute offset");
  eval_cmd->add_option("--threshold", eval_args.threshold, "prime decision threshold (0.5)");
  eval_cmd->add_option("--subsample", eval_args.subsample, "window subsample in (0,1]");
  eval_cmd->add_option("--out", eval_args.out, "output directory (default: .)");

  AnalyzeArgs analyze_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "post-hoc analyses");
  analyze_cmd->require_subcommand(1);
  auto* fp_cmd = analyze_cmd->add_subcommand("fp", "false-positive factor structure");
  fp_cmd->add_option("--run", analyze_args.run, "training run directory")->required();
  fp_cmd->add_option("--out", analyze_args.out, "output directory (default: <run>/analysis)");

  auto* selftest_cmd = app.add_subcommand("selftest", "run built-in correctness checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (scan_cmd->parsed()) return run_scan(scan_args);
    if (stats_cmd->parsed()) return run_stats(stats_args);
    if (train_cmd->parsed()) {
      if (train_args.config.empty() == train_args.sweep.empty())
        throw config::config_error("train: exactly one of --config / --sweep is required");
      return run_train(train_args);
    }
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (fp_cmd->parsed()) return run_analyze_fp(analyze_args);
    if (selftest_cmd->parsed()) return run_selftest();
    return kExitUsage;
  } catch (const nd::numeric_error& e) {
    std::cerr << "numeric divergence: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
