// Minimal end-to-end walkthrough of the library: sieve labels, encode a
// window, train for a few resampled epochs on a small range, and inspect the
// false-positive structure of the final model.

#include <cstdio>
#include <span>

#include "primelearn/analysis.hpp"
#include "primelearn/dataset.hpp"
#include "primelearn/encoding.hpp"
#include "primelearn/model.hpp"
#include "primelearn/numtheory.hpp"
#include "primelearn/training.hpp"

using namespace primelearn;

int main() {
  // 1. Ground truth for a small range.
  const auto bitmap = numtheory::sieve_range(0, 100);
  std::printf("primes below 100: %llu\n",
              static_cast<unsigned long long>(bitmap.count()));

  // 2. Sparse codes for one window of 10 consecutive integers.
  const encoding::EncodingShape shape{20, 20, 20, 10};
  const auto window = encoding::encode_window(0, shape, 0, bitmap);
  std::printf("window codes (s -> m,n,o | label):\n");
  for (std::size_t i = 0; i < 4; ++i)
    std::printf("  %llu -> %u,%u,%u | %d\n",
                static_cast<unsigned long long>(window.codes[i].s), window.codes[i].m,
                window.codes[i].n, window.codes[i].o, static_cast<int>(window.labels[i]));

  // 3. A small training run: 0..6000 for training, 6000..12000 held out.
  training::TrainConfig cfg;
  cfg.split.train = dataset::RangeSpec{0, 0, 6000};
  cfg.split.test = dataset::RangeSpec{0, 6000, 12000};
  cfg.split.shape = encoding::EncodingShape{25, 25, 25, 10};
  cfg.split.sample_fraction = 0.25;
  cfg.model_cfg.d_model = 32;
  cfg.model_cfg.n_res_blocks = 1;
  cfg.model_cfg.n_tx_layers = 1;
  cfg.model_cfg.n_heads = 4;
  cfg.model_cfg.ff_mult = 2;
  cfg.model_cfg.shape = cfg.split.shape;
  cfg.weights = {1.0, 20.0};
  cfg.batch_size = 4;
  cfg.epochs = 3;
  cfg.eval_every = 100;
  cfg.eval_subsample = 1.0;
  cfg.master_seed = 42;

  std::printf("training on [0,6000), testing on [6000,12000)...\n");
  auto result = training::train_run(cfg, std::nullopt, "", "",
                                    [](const training::EvalRecord& rec) {
                                      std::printf("  iter %zu epoch %zu recall_p %.3f "
                                                  "recall_np %.3f auc %.3f%s\n",
                                                  rec.iteration, rec.epoch,
                                                  rec.metrics.recall_prime,
                                                  rec.metrics.recall_nonprime, rec.metrics.auc,
                                                  rec.full_range ? " [full]" : "");
                                    });

  // 4. Which composites does the final model mistake for primes?
  dataset::LabelSource labels(0, cfg.split.test.end);
  const auto eval = training::evaluate(result.state, cfg.split.test, labels);
  const auto by_omega = analysis::fpr_by_factor_count(eval.false_positives, cfg.split.test);
  std::printf("false-positive rate by number of prime factors:\n");
  for (const auto& [omega, bucket] : by_omega.buckets)
    if (omega >= 2 && omega <= 5)
      std::printf("  omega=%d: %.1f%% of %llu\n", omega, 100.0 * bucket.fpr,
                  static_cast<unsigned long long>(bucket.total));
  return 0;
}
