#ifndef METDET_TRAIN_HPP
#define METDET_TRAIN_HPP

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "metdet/corpus.hpp"
#include "metdet/eval.hpp"
#include "metdet/model.hpp"

namespace metdet {

// Training hyperparameters. File format: flat "key = value" lines with '#'
// comments; CLI flags override file values. The effective configuration is
// embedded in every checkpoint.
struct TrainConfig {
  int epochs = 3;
  double learning_rate = 3e-5;
  int warmup_epochs = 2;
  double dropout = 0.2;
  double class_weight = 3.0;            // 4.0 is the pruned-variant convention
  std::vector<int> seeds = {1, 2, 3, 4, 5};
  int batch_size = 32;
  int max_seq_len = kDefaultMaxSeqLen;
  int encoder_dim = 16;
  int hidden_dim = 0;                   // 0: same as encoder_dim
  bool share_def_encoders = false;
  double weight_decay = 0.01;
  double grad_clip = 0.0;               // 0: disabled
  std::string vocab_file;               // empty: build the vocab from the data

  static TrainConfig load(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  void validate() const;
  int resolved_hidden_dim() const { return hidden_dim > 0 ? hidden_dim : encoder_dim; }
  std::vector<std::pair<std::string, std::string>> to_kv() const;
};

// Class-weighted cross entropy over (literal, metaphor) logits.
inline double weighted_loss(const std::array<double, 2>& logits, int label,
                            double class_weight) {
  return weighted_cross_entropy(logits, label, class_weight);
}

// Linear ramp 0 -> peak over [0, warmup_steps], then linear decay peak -> 0
// over [warmup_steps, total_steps].
double lr_at(long step, long total_steps, long warmup_steps, double peak);

// Adaptive moment estimation with decoupled weight decay.
class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void register_parameters(const std::vector<std::vector<double>*>& params);
  void step(const std::vector<std::vector<double>*>& params,
            const std::vector<std::vector<double>*>& grads, double lr,
            double weight_decay);

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct TrainRun {
  int seed = 0;
  std::vector<double> per_epoch_loss;
  std::filesystem::path checkpoint_path;
  MetricsReport val_metrics;
};

// One seeded run: builds the vocabulary (from file or data), constructs the
// seeded toy encoder stack, precomputes views, trains the head with the
// class-weighted loss and the warmup/decay schedule, evaluates on the
// validation set and writes the checkpoint. Every random draw (init,
// shuffling, dropout) derives from `seed`.
TrainRun train_one(const TrainConfig& config,
                   const std::vector<AugmentedInstance>& train_data,
                   const std::vector<AugmentedInstance>& val_data, int seed,
                   const std::filesystem::path& checkpoint_path);

// Runs train_one per seed and aggregates the validation metrics (per-seed
// rows plus their means).
std::pair<std::vector<TrainRun>, MetricsReport> run_seeds(
    const TrainConfig& config, const std::vector<AugmentedInstance>& train_data,
    const std::vector<AugmentedInstance>& val_data,
    const std::filesystem::path& out_dir);

// Checkpoint-driven inference helpers.
std::vector<int> predict_all(const Checkpoint& ckpt,
                             const std::vector<AugmentedInstance>& data,
                             std::vector<double>* probabilities = nullptr);
MetricsReport evaluate_dataset(const Checkpoint& ckpt,
                               const std::vector<AugmentedInstance>& data,
                               bool by_pos = false);

}  // namespace metdet

#endif
