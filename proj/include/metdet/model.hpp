#ifndef METDET_MODEL_HPP
#define METDET_MODEL_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metdet/encoding.hpp"
#include "metdet/rng.hpp"

namespace metdet {

// u.v / (|u||v|), clamped to [-1, 1]. Zero-norm inputs score 0 so degenerate
// fallback embeddings cannot poison downstream math with NaNs.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// [u ; v ; CosSim(u, v)] — the 2d+1 pre-activation input of the contrast layers.
std::vector<double> concat_with_cosine(std::span<const double> u,
                                       std::span<const double> v);

double gelu(double x);
double gelu_derivative(double x);

// P(. | logits) for the two-class case, numerically stable.
std::array<double, 2> softmax2(const std::array<double, 2>& logits);

// Class-weighted cross entropy with weights (1, class_weight):
//   loss = -w_label * log softmax(logits)[label]
double weighted_cross_entropy(const std::array<double, 2>& logits, int label,
                              double class_weight);

struct Linear {
  int in = 0, out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out

  void init(int in_dim, int out_dim, Rng& rng);
  std::vector<double> forward(std::span<const double> x) const;
};

enum class HelperKind { Sense, Basic };

// Gradient buffers matching the head's parameter tensors.
struct HeadGradients {
  std::vector<double> mip_w, mip_b;
  std::vector<double> helper1_w, helper1_b;
  std::vector<double> helper2_w, helper2_b;
  std::vector<double> classifier_w, classifier_b;

  std::vector<std::vector<double>*> tensors();
  void scale(double factor);
};

// Classification head: a contrast layer over the two definition embeddings
// (their concatenation plus cosine similarity), two helper layers relating
// the in-sentence target embedding to the per-definition target embeddings,
// and a binary classifier over the concatenated hidden vectors. Dropout is
// applied to the inputs of each layer during training only.
class ContrastHead {
 public:
  ContrastHead() = default;
  ContrastHead(int d, int h, double dropout_rate, std::uint64_t seed);

  int input_dim() const { return d_; }
  int hidden_dim() const { return h_; }
  double dropout_rate() const { return dropout_rate_; }

  std::vector<double> mip_forward(std::span<const double> h_c,
                                  std::span<const double> h_b) const;
  std::vector<double> helper_forward(std::span<const double> e_def,
                                     std::span<const double> e_t,
                                     HelperKind which) const;
  // (logit_literal, logit_metaphor)
  std::array<double, 2> classify(std::span<const double> h_mip,
                                 std::span<const double> h_1,
                                 std::span<const double> h_2) const;

  std::array<double, 2> logits(const EncodedViews& views) const;
  double p_metaphor(const EncodedViews& views) const;
  // 1 iff P(metaphor) > 0.5; the 0.5 tie predicts literal.
  int predict(const EncodedViews& views) const;

  // Weighted-CE loss for one instance, accumulating parameter gradients.
  // With a null rng the pass is deterministic and dropout is disabled
  // (evaluation mode); this is also the configuration gradient checks use.
  double loss_and_accumulate(const EncodedViews& views, int label,
                             double class_weight, HeadGradients& grads,
                             Rng* dropout_rng) const;

  HeadGradients zero_gradients() const;

  std::vector<std::pair<std::string, std::vector<double>*>> tensors();
  std::vector<std::pair<std::string, const std::vector<double>*>> tensors() const;

 private:
  std::vector<double> layer_input(std::span<const double> a,
                                  std::span<const double> b) const;

  int d_ = 0, h_ = 0;
  double dropout_rate_ = 0.0;
  Linear mip_, helper1_, helper2_, classifier_;
};

// ---------------------------------------------------------------------------
// Checkpoint: self-describing text container with the configuration block,
// the vocabulary, the three encoders (two when sense/basic share parameters)
// and the head tensors. Loading rejects any other format version.
// ---------------------------------------------------------------------------

inline constexpr const char* kCheckpointVersion = "metdet-checkpoint-v1";

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> config;
  Vocab vocab;
  int dim = 0;
  int hidden = 0;
  int max_len = kDefaultMaxSeqLen;
  double dropout = 0.0;
  bool shared_definition_encoders = false;
  std::shared_ptr<ToyEncoder> sentence_encoder;
  std::shared_ptr<ToyEncoder> sense_encoder;
  std::shared_ptr<ToyEncoder> basic_encoder;  // == sense_encoder when shared
  ContrastHead head;

  EncoderStack stack() const;
  std::string config_value(const std::string& key, const std::string& fallback = "") const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace metdet

#endif
