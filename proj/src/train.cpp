#include "metdet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "metdet/error.hpp"

namespace metdet {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

int parse_int(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw validation_error("BadConfigValue", "key '" + key + "' needs an integer, got '" +
                                                 value + "'");
  }
}

double parse_double(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw validation_error("BadConfigValue", "key '" + key + "' needs a number, got '" +
                                                 value + "'");
  }
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw validation_error("BadConfigValue",
                         "key '" + key + "' needs a boolean, got '" + value + "'");
}

std::vector<int> parse_seed_list(const std::string& value) {
  std::vector<int> seeds;
  std::string item;
  std::istringstream ss(value);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    seeds.push_back(parse_int(item, "seeds"));
  }
  if (seeds.empty())
    throw validation_error("BadConfigValue", "seeds list is empty");
  return seeds;
}

std::string format_double_cfg(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("FileOpen", "cannot open " + path.string());
  TrainConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw validation_error("BadConfigLine",
                             path.string() + ":" + std::to_string(line_no) +
                                 ": expected 'key = value'");
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  if (in.bad()) throw io_error("FileRead", "read failure on " + path.string());
  return config;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "epochs") epochs = parse_int(value, key);
  else if (key == "learning_rate") learning_rate = parse_double(value, key);
  else if (key == "warmup_epochs") warmup_epochs = parse_int(value, key);
  else if (key == "dropout") dropout = parse_double(value, key);
  else if (key == "class_weight") class_weight = parse_double(value, key);
  else if (key == "seeds") seeds = parse_seed_list(value);
  else if (key == "batch_size") batch_size = parse_int(value, key);
  else if (key == "max_seq_len") max_seq_len = parse_int(value, key);
  else if (key == "encoder_dim") encoder_dim = parse_int(value, key);
  else if (key == "hidden_dim") hidden_dim = parse_int(value, key);
  else if (key == "share_def_encoders") share_def_encoders = parse_bool(value, key);
  else if (key == "weight_decay") weight_decay = parse_double(value, key);
  else if (key == "grad_clip") grad_clip = parse_double(value, key);
  else if (key == "vocab") vocab_file = value;
  else
    throw validation_error("UnknownConfigKey", "unknown config key '" + key + "'");
}

void TrainConfig::validate() const {
  if (warmup_epochs < 0 || epochs < warmup_epochs)
    throw validation_error("BadConfigValue",
                           "epochs >= warmup_epochs >= 0 must hold");
  if (epochs < 1) throw validation_error("BadConfigValue", "epochs must be >= 1");
  if (!(learning_rate > 0.0))
    throw validation_error("BadConfigValue", "learning_rate must be positive");
  if (!(class_weight > 0.0))
    throw validation_error("BadConfigValue", "class_weight must be positive");
  if (batch_size < 1) throw validation_error("BadConfigValue", "batch_size must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw validation_error("BadConfigValue", "dropout must lie in [0, 1)");
  if (encoder_dim < 1)
    throw validation_error("BadConfigValue", "encoder_dim must be >= 1");
  if (max_seq_len < 8)
    throw validation_error("BadConfigValue", "max_seq_len must be >= 8");
  if (seeds.empty()) throw validation_error("BadConfigValue", "seeds must be non-empty");
  if (weight_decay < 0.0)
    throw validation_error("BadConfigValue", "weight_decay must be >= 0");
  if (grad_clip < 0.0)
    throw validation_error("BadConfigValue", "grad_clip must be >= 0");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_kv() const {
  std::string seed_list;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) seed_list += ',';
    seed_list += std::to_string(seeds[i]);
  }
  return {
      {"epochs", std::to_string(epochs)},
      {"learning_rate", format_double_cfg(learning_rate)},
      {"warmup_epochs", std::to_string(warmup_epochs)},
      {"dropout", format_double_cfg(dropout)},
      {"class_weight", format_double_cfg(class_weight)},
      {"seeds", seed_list},
      {"batch_size", std::to_string(batch_size)},
      {"max_seq_len", std::to_string(max_seq_len)},
      {"encoder_dim", std::to_string(encoder_dim)},
      {"hidden_dim", std::to_string(resolved_hidden_dim())},
      {"share_def_encoders", share_def_encoders ? "true" : "false"},
      {"weight_decay", format_double_cfg(weight_decay)},
      {"grad_clip", format_double_cfg(grad_clip)},
      {"vocab", vocab_file},
  };
}

double lr_at(long step, long total_steps, long warmup_steps, double peak) {
  if (step < 0 || total_steps < 0 || step > total_steps || warmup_steps < 0 ||
      warmup_steps > total_steps)
    throw validation_error("BadSchedule",
                           "need 0 <= step <= total_steps and 0 <= warmup <= total");
  if (total_steps == 0) return 0.0;
  if (warmup_steps > 0 && step <= warmup_steps)
    return peak * (static_cast<double>(step) / static_cast<double>(warmup_steps));
  if (step >= total_steps) return 0.0;
  return peak * (static_cast<double>(total_steps - step) /
                 static_cast<double>(total_steps - warmup_steps));
}

AdamW::AdamW(double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::register_parameters(const std::vector<std::vector<double>*>& params) {
  m_.clear();
  v_.clear();
  for (const auto* p : params) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
  t_ = 0;
}

void AdamW::step(const std::vector<std::vector<double>*>& params,
                 const std::vector<std::vector<double>*>& grads, double lr,
                 double weight_decay) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw validation_error("OptimizerState",
                           "parameter list does not match the registered state");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    const auto& g = *grads[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps_) + weight_decay * p[i]);
    }
  }
}

namespace {

std::vector<std::vector<double>*> gradient_tensors(HeadGradients& grads) {
  return grads.tensors();
}

std::vector<std::vector<double>*> parameter_tensors(ContrastHead& head) {
  std::vector<std::vector<double>*> out;
  for (auto& [name, tensor] : head.tensors()) out.push_back(tensor);
  return out;
}

void clip_gradients(HeadGradients& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (auto* t : grads.tensors())
    for (double x : *t) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) grads.scale(max_norm / norm);
}

MetricsReport metrics_for(const ContrastHead& head,
                          const std::vector<EncodedViews>& views,
                          const std::vector<AugmentedInstance>& data, bool by_pos) {
  std::vector<int> preds, labels;
  preds.reserve(views.size());
  labels.reserve(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    preds.push_back(head.predict(views[i]));
    labels.push_back(data[i].base.label);
  }
  MetricsReport report;
  const Prf overall = precision_recall_f1(confusion(preds, labels));
  report.precision = overall.precision;
  report.recall = overall.recall;
  report.f1 = overall.f1;
  if (by_pos) {
    std::vector<CorpusInstance> bases;
    bases.reserve(data.size());
    for (const auto& aug : data) bases.push_back(aug.base);
    report.per_pos = evaluate_by_pos(preds, bases);
  }
  return report;
}

}  // namespace

TrainRun train_one(const TrainConfig& config,
                   const std::vector<AugmentedInstance>& train_data,
                   const std::vector<AugmentedInstance>& val_data, int seed,
                   const std::filesystem::path& checkpoint_path) {
  config.validate();
  if (train_data.empty())
    throw validation_error("EmptyDataset", "training data is empty");
  if (val_data.empty())
    throw validation_error("EmptyDataset", "validation data is empty");

  const Vocab vocab = config.vocab_file.empty() ? Vocab::build_from(train_data)
                                                : Vocab::load(config.vocab_file);

  Rng master(static_cast<std::uint64_t>(seed));
  const std::uint64_t encoder_seed = master.next_u64();
  const std::uint64_t head_seed = master.next_u64();
  Rng shuffle_rng(master.next_u64());
  Rng dropout_rng(master.next_u64());

  const int d = config.encoder_dim;
  const int h = config.resolved_hidden_dim();

  auto sentence_enc =
      std::make_shared<ToyEncoder>(vocab.size(), d, config.max_seq_len, encoder_seed);
  auto sense_enc = std::make_shared<ToyEncoder>(vocab.size(), d, config.max_seq_len,
                                                encoder_seed + 1);
  auto basic_enc = config.share_def_encoders
                       ? sense_enc
                       : std::make_shared<ToyEncoder>(vocab.size(), d,
                                                      config.max_seq_len,
                                                      encoder_seed + 2);
  EncoderStack stack{sentence_enc, sense_enc, basic_enc};

  // Encoders stay frozen; views are computed once per instance.
  std::vector<EncodedViews> train_views, val_views;
  train_views.reserve(train_data.size());
  for (const auto& aug : train_data)
    train_views.push_back(encode_views(aug, stack, vocab, config.max_seq_len));
  val_views.reserve(val_data.size());
  for (const auto& aug : val_data)
    val_views.push_back(encode_views(aug, stack, vocab, config.max_seq_len));

  ContrastHead head(d, h, config.dropout, head_seed);
  AdamW optimizer;
  auto params = parameter_tensors(head);
  optimizer.register_parameters(params);

  const long steps_per_epoch =
      (static_cast<long>(train_data.size()) + config.batch_size - 1) /
      config.batch_size;
  const long total_steps = steps_per_epoch * config.epochs;
  const long warmup_steps = steps_per_epoch * config.warmup_epochs;

  TrainRun run;
  run.seed = seed;
  run.checkpoint_path = checkpoint_path;

  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), 0);

  long global_step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss_sum = 0.0;
    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + static_cast<std::size_t>(config.batch_size));
      const auto batch_n = static_cast<double>(batch_end - batch_start);

      HeadGradients grads = head.zero_gradients();
      double batch_loss = 0.0;
      for (std::size_t i = batch_start; i < batch_end; ++i) {
        const std::size_t idx = order[i];
        batch_loss += head.loss_and_accumulate(train_views[idx],
                                               train_data[idx].base.label,
                                               config.class_weight, grads, &dropout_rng);
      }
      batch_loss /= batch_n;
      grads.scale(1.0 / batch_n);
      if (!std::isfinite(batch_loss))
        throw numeric_error("NonFiniteLoss",
                            "non-finite loss in epoch " + std::to_string(epoch) +
                                ", batch " +
                                std::to_string(batch_start /
                                               static_cast<std::size_t>(config.batch_size)));
      clip_gradients(grads, config.grad_clip);

      const double lr = lr_at(global_step, total_steps, warmup_steps,
                              config.learning_rate);
      optimizer.step(params, gradient_tensors(grads), lr, config.weight_decay);
      ++global_step;
      epoch_loss_sum += batch_loss * batch_n;
    }
    run.per_epoch_loss.push_back(epoch_loss_sum /
                                 static_cast<double>(train_data.size()));
  }

  run.val_metrics = metrics_for(head, val_views, val_data, /*by_pos=*/true);

  Checkpoint ckpt;
  ckpt.config = config.to_kv();
  ckpt.config.emplace_back("seed", std::to_string(seed));
  ckpt.vocab = vocab;
  ckpt.dim = d;
  ckpt.hidden = h;
  ckpt.max_len = config.max_seq_len;
  ckpt.dropout = config.dropout;
  ckpt.shared_definition_encoders = config.share_def_encoders;
  ckpt.sentence_encoder = sentence_enc;
  ckpt.sense_encoder = sense_enc;
  ckpt.basic_encoder = basic_enc;
  ckpt.head = head;
  save_checkpoint(ckpt, checkpoint_path);
  return run;
}

std::pair<std::vector<TrainRun>, MetricsReport> run_seeds(
    const TrainConfig& config, const std::vector<AugmentedInstance>& train_data,
    const std::vector<AugmentedInstance>& val_data,
    const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  std::vector<TrainRun> runs;
  std::vector<SeedMetrics> per_seed;
  for (int seed : config.seeds) {
    const auto ckpt_path =
        out_dir / ("checkpoint_seed" + std::to_string(seed) + ".ckpt");
    runs.push_back(train_one(config, train_data, val_data, seed, ckpt_path));
    const auto& m = runs.back().val_metrics;
    per_seed.push_back(SeedMetrics{seed, m.precision, m.recall, m.f1});
  }
  return {std::move(runs), aggregate_seed_metrics(per_seed)};
}

std::vector<int> predict_all(const Checkpoint& ckpt,
                             const std::vector<AugmentedInstance>& data,
                             std::vector<double>* probabilities) {
  const EncoderStack stack = ckpt.stack();
  std::vector<int> preds;
  preds.reserve(data.size());
  if (probabilities) probabilities->clear();
  for (const auto& aug : data) {
    const EncodedViews views = encode_views(aug, stack, ckpt.vocab, ckpt.max_len);
    const double p = ckpt.head.p_metaphor(views);
    preds.push_back(p > 0.5 ? 1 : 0);
    if (probabilities) probabilities->push_back(p);
  }
  return preds;
}

MetricsReport evaluate_dataset(const Checkpoint& ckpt,
                               const std::vector<AugmentedInstance>& data,
                               bool by_pos) {
  const std::vector<int> preds = predict_all(ckpt, data);
  std::vector<int> labels;
  std::vector<CorpusInstance> bases;
  labels.reserve(data.size());
  for (const auto& aug : data) {
    labels.push_back(aug.base.label);
    bases.push_back(aug.base);
  }
  MetricsReport report;
  const Prf overall = precision_recall_f1(confusion(preds, labels));
  report.precision = overall.precision;
  report.recall = overall.recall;
  report.f1 = overall.f1;
  if (by_pos) report.per_pos = evaluate_by_pos(preds, bases);
  return report;
}

}  // namespace metdet
