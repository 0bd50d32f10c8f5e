#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "primelearn/analysis.hpp"
#include "primelearn/checkpoint.hpp"
#include "primelearn/dataset.hpp"
#include "primelearn/model.hpp"
#include "primelearn/tape.hpp"

// The training loop: resampled epochs, SGD with recall-plateau learning-rate
// decay, periodic evaluation, and checkpointing. Every random draw derives
// from the master seed, so a (config, seed) pair replays bit-identically.

namespace primelearn::training {

struct TrainConfig {
  dataset::SplitConfig split;
  model::ModelConfig model_cfg;
  model::LossWeights weights;
  double lr0 = 0.01;
  double decay_factor = 0.5;
  std::size_t patience = 5;
  std::size_t batch_size = 1;
  std::size_t epochs = 4;
  std::size_t eval_every = 250;
  double eval_subsample = 0.1;
  std::uint64_t master_seed = 1;

  void validate() const {
    split.validate();
    model_cfg.validate();
    weights.validate();
    if (model_cfg.shape != split.shape)
      throw std::invalid_argument("TrainConfig: model and split shapes differ");
    if (!(lr0 > 0)) throw std::invalid_argument("TrainConfig: lr0 must be positive");
    if (!(decay_factor > 0.0) || !(decay_factor < 1.0))
      throw std::invalid_argument("TrainConfig: decay_factor must be in (0, 1)");
    if (epochs == 0) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (eval_every == 0) throw std::invalid_argument("TrainConfig: eval_every must be >= 1");
    if (patience == 0) throw std::invalid_argument("TrainConfig: patience must be >= 1");
    if (!(eval_subsample > 0.0) || eval_subsample > 1.0)
      throw std::invalid_argument("TrainConfig: eval_subsample must be in (0, 1]");
  }
};

struct EvalRecord {
  std::size_t iteration = 0;
  std::size_t epoch = 0;
  double lr = 0;
  double train_loss = 0;
  analysis::MetricsReport metrics;
  bool full_range = false;  // in-memory only; not a CSV column
};

struct RunLog {
  std::vector<EvalRecord> records;
};

struct EvalResult {
  analysis::MetricsReport metrics;
  std::vector<std::uint64_t> false_positives;  // sorted absolute values
};

namespace detail {

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

inline constexpr std::size_t kEvalChunkWindows = 64;

// Scores the range's windows (decision rule: p >= threshold => prime).
// subsample < 1 selects every round(1/subsample)-th window.
inline EvalResult evaluate(model::ModelState<float>& state, const dataset::RangeSpec& range,
                           dataset::LabelSource& labels, double subsample = 1.0,
                           double threshold = 0.5) {
  if (!(subsample > 0.0) || subsample > 1.0)
    throw std::invalid_argument("evaluate: subsample must be in (0, 1]");
  const std::size_t l = state.cfg.shape.l;
  const std::size_t total_windows = dataset::enumerate_windows(range, l);
  const std::size_t stride =
      subsample >= 1.0
          ? 1
          : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(1.0 / subsample)));

  std::vector<double> scores;
  std::vector<std::uint8_t> truth;
  std::uint64_t tp = 0, fp_count = 0, tn = 0, fn = 0;
  std::vector<std::uint64_t> false_positives;

  std::vector<encoding::SequenceSample> chunk;
  chunk.reserve(kEvalChunkWindows);
  std::vector<encoding::SparseCode> codes;

  auto flush = [&]() {
    if (chunk.empty()) return;
    codes.clear();
    for (const auto& sample : chunk)
      codes.insert(codes.end(), sample.codes.begin(), sample.codes.end());
    nd::Tape<float> tape(false);
    const auto probs = model::forward_probabilities(tape, state, std::span(codes), chunk.size());
    const auto& p = tape.value(probs);
    std::size_t at = 0;
    for (const auto& sample : chunk) {
      for (std::size_t i = 0; i < l; ++i, ++at) {
        const double prob = static_cast<double>(p.data[at]);
        const bool predicted_prime = prob >= threshold;
        const bool actual_prime = sample.labels[i] != 0;
        scores.push_back(prob);
        truth.push_back(actual_prime ? 1 : 0);
        if (actual_prime)
          predicted_prime ? ++tp : ++fn;
        else if (predicted_prime) {
          ++fp_count;
          false_positives.push_back(sample.values[i]);
        } else {
          ++tn;
        }
      }
    }
    chunk.clear();
  };

  for (std::size_t w = 0; w < total_windows; w += stride) {
    const std::uint64_t start_s = range.start + w * l;
    const std::uint64_t abs_lo = range.offset + start_s;
    const auto bitmap = labels.window_bitmap(abs_lo, abs_lo + l);
    chunk.push_back(encoding::encode_window(start_s, state.cfg.shape, range.offset, bitmap));
    if (chunk.size() == kEvalChunkWindows) flush();
  }
  flush();

  EvalResult result;
  result.metrics = analysis::MetricsReport::from_counts(tp, fp_count, tn, fn);
  result.metrics.auc = analysis::roc_auc(scores, truth);
  std::sort(false_positives.begin(), false_positives.end());
  result.false_positives = std::move(false_positives);
  return result;
}

struct TrainResult {
  model::ModelState<float> state;
  RunLog log;
};

inline constexpr const char* kRunLogHeader =
    "iteration,epoch,lr,loss,recall_prime,recall_nonprime,precision_prime,"
    "precision_nonprime,f1_prime,f1_nonprime,accuracy,auc";

inline void write_metrics_csv(const std::filesystem::path& path,
                              const analysis::MetricsReport& m, const std::string& config_hash) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path.string());
  out << "# config_hash=" << config_hash << "\n";
  out << "metric,value\n";
  out << "tp," << m.tp << "\nfp," << m.fp << "\ntn," << m.tn << "\nfn," << m.fn << "\n";
  out << "precision_prime," << detail::fmt_g(m.precision_prime) << "\n";
  out << "recall_prime," << detail::fmt_g(m.recall_prime) << "\n";
  out << "f1_prime," << detail::fmt_g(m.f1_prime) << "\n";
  out << "precision_nonprime," << detail::fmt_g(m.precision_nonprime) << "\n";
  out << "recall_nonprime," << detail::fmt_g(m.recall_nonprime) << "\n";
  out << "f1_nonprime," << detail::fmt_g(m.f1_nonprime) << "\n";
  out << "accuracy," << detail::fmt_g(m.accuracy) << "\n";
  out << "auc," << detail::fmt_g(m.auc) << "\n";
}

// Runs the full protocol. When run_dir is set, emits the run directory
// layout: config copy, runlog.csv, checkpoints/, one fp_*.txt per full
// evaluation, final_metrics.csv. Throws nd::numeric_error on divergence
// after writing an abort marker (checkpoints from finished epochs remain).
inline TrainResult train_run(const TrainConfig& cfg,
                             const std::optional<std::filesystem::path>& run_dir = std::nullopt,
                             const std::string& config_text = "",
                             const std::string& config_hash = "",
                             const std::function<void(const EvalRecord&)>& on_record = nullptr) {
  cfg.validate();

  model::ModelState<float> state =
      model::ModelState<float>::init(cfg.model_cfg, rng::mix_seed(cfg.master_seed, 0x1217));
  dataset::LabelSource train_labels(cfg.split.train.offset, cfg.split.train.end);
  dataset::LabelSource test_labels(cfg.split.test.offset, cfg.split.test.end);

  RunLog log;
  std::ofstream runlog_csv;
  if (run_dir) {
    std::filesystem::create_directories(*run_dir);
    std::ofstream cfg_out(*run_dir / "config.cfg", std::ios::trunc);
    cfg_out << config_text;
    runlog_csv.open(*run_dir / "runlog.csv", std::ios::trunc);
    if (!runlog_csv) throw std::runtime_error("train_run: cannot open runlog.csv");
    runlog_csv << "# config_hash=" << config_hash << "\n" << kRunLogHeader << "\n";
  }

  double lr = cfg.lr0;
  std::size_t iteration = 0;
  double best_monitored = -1.0;
  std::size_t evals_since_improvement = 0;
  double loss_accum = 0;
  std::size_t loss_batches = 0;
  double last_mean_loss = 0;

  auto save_state = [&](const std::string& name, double loss) {
    if (!run_dir) return;
    checkpoint::CheckpointMeta meta;
    meta.seed = cfg.master_seed;
    meta.iteration = iteration;
    meta.loss = loss;
    meta.config_hash = config_hash;
    checkpoint::save_checkpoint(*run_dir / "checkpoints" / name, state, meta);
  };

  analysis::MetricsReport last_full_metrics;
  auto append_record = [&](std::size_t epoch, bool full) {
    EvalResult eval =
        evaluate(state, cfg.split.test, test_labels, full ? 1.0 : cfg.eval_subsample);
    EvalRecord rec;
    rec.iteration = iteration;
    rec.epoch = epoch;
    rec.lr = lr;
    if (loss_batches > 0) last_mean_loss = loss_accum / static_cast<double>(loss_batches);
    rec.train_loss = last_mean_loss;
    loss_accum = 0;
    loss_batches = 0;
    rec.metrics = eval.metrics;
    rec.full_range = full;
    log.records.push_back(rec);
    if (full) last_full_metrics = eval.metrics;

    if (runlog_csv.is_open()) {
      const auto& m = rec.metrics;
      runlog_csv << rec.iteration << ',' << rec.epoch << ',' << detail::fmt_g(rec.lr) << ','
                 << detail::fmt_g(rec.train_loss) << ',' << detail::fmt_g(m.recall_prime) << ','
                 << detail::fmt_g(m.recall_nonprime) << ',' << detail::fmt_g(m.precision_prime)
                 << ',' << detail::fmt_g(m.precision_nonprime) << ','
                 << detail::fmt_g(m.f1_prime) << ',' << detail::fmt_g(m.f1_nonprime) << ','
                 << detail::fmt_g(m.accuracy) << ',' << detail::fmt_g(m.auc) << "\n";
      runlog_csv.flush();
    }
    if (run_dir && full) {
      char name[32];
      std::snprintf(name, sizeof(name), "fp_%08zu.txt", rec.iteration);
      std::ofstream fp_out(*run_dir / name, std::ios::trunc);
      fp_out << "# config_hash=" << config_hash << "\n";
      for (std::uint64_t v : eval.false_positives) fp_out << v << "\n";
    }
    if (on_record) on_record(rec);

    // Plateau decay on the mean of the two recalls.
    const auto& m = rec.metrics;
    double monitored = -1.0;
    if (analysis::is_defined(m.recall_prime) && analysis::is_defined(m.recall_nonprime))
      monitored = 0.5 * (m.recall_prime + m.recall_nonprime);
    if (monitored > best_monitored + 1e-12) {
      best_monitored = monitored;
      evals_since_improvement = 0;
      save_state("best", rec.train_loss);
    } else if (++evals_since_improvement >= cfg.patience) {
      lr *= cfg.decay_factor;
      evals_since_improvement = 0;
    }
  };

  try {
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
      const auto epoch_sample = dataset::sample_epoch(cfg.split, epoch, cfg.master_seed);
      dataset::BatchStream stream(cfg.split, epoch_sample, cfg.batch_size, train_labels);
      const std::size_t batches_in_epoch = stream.n_batches();
      std::size_t batch_index = 0;
      std::vector<encoding::SparseCode> codes;
      std::vector<std::uint8_t> labels;
      while (auto batch = stream.next()) {
        ++iteration;
        ++batch_index;
        codes.clear();
        labels.clear();
        for (const auto& sample : *batch) {
          codes.insert(codes.end(), sample.codes.begin(), sample.codes.end());
          labels.insert(labels.end(), sample.labels.begin(), sample.labels.end());
        }
        state.zero_grads();
        nd::Tape<float> tape(true);
        const auto probs =
            model::forward_probabilities(tape, state, std::span(codes), batch->size());
        const auto loss = tape.wce_loss(probs, labels, static_cast<float>(cfg.weights.w0),
                                        static_cast<float>(cfg.weights.w1));
        const double loss_value = static_cast<double>(tape.value(loss).data[0]);
        tape.backward(loss);
        state.apply_sgd(static_cast<float>(lr));
        loss_accum += loss_value;
        ++loss_batches;
        // Skip a cadence eval that would coincide with the epoch-end one;
        // RunLog iterations stay strictly increasing.
        if (iteration % cfg.eval_every == 0 && batch_index < batches_in_epoch)
          append_record(epoch, /*full=*/false);
      }
      append_record(epoch, /*full=*/true);
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03zu", epoch);
      save_state(name, last_mean_loss);
    }
  } catch (const nd::numeric_error&) {
    if (run_dir) {
      std::ofstream marker(*run_dir / "aborted.txt", std::ios::trunc);
      marker << "numeric divergence at iteration " << iteration
             << "; last good checkpoint retained\n";
    }
    throw;
  }

  if (run_dir) write_metrics_csv(*run_dir / "final_metrics.csv", last_full_metrics, config_hash);
  return TrainResult{std::move(state), std::move(log)};
}

}  // namespace primelearn::training
