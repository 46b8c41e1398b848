#ifndef METDET_ENCODING_HPP
#define METDET_ENCODING_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "metdet/corpus.hpp"

namespace metdet {

inline constexpr int kDefaultMaxSeqLen = 150;

// Subword vocabulary with the reserved special tokens. Continuation pieces
// use the "##" prefix. File format: one token per line, line number = id.
class Vocab {
 public:
  static constexpr std::string_view kPad = "[PAD]";
  static constexpr std::string_view kUnk = "[UNK]";
  static constexpr std::string_view kCls = "[CLS]";
  static constexpr std::string_view kSep = "[SEP]";
  static constexpr std::string_view kTgt = "[TGT]";

  static Vocab load(const std::filesystem::path& path);
  static Vocab from_tokens(std::vector<std::string> tokens);

  // Deterministic vocabulary for a corpus: specials, POS-tag tokens, then the
  // sorted unique lowercased words of all sentences and definitions.
  static Vocab build_from(const std::vector<AugmentedInstance>& instances);

  void save(const std::filesystem::path& path) const;

  int id(const std::string& token) const;  // -1 when absent
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }

  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }
  int cls_id() const { return cls_; }
  int sep_id() const { return sep_; }
  int tgt_id() const { return tgt_; }

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int pad_ = -1, unk_ = -1, cls_ = -1, sep_ = -1, tgt_ = -1;
};

// Greedy longest-match subword segmentation of whitespace-level words.
// Words are lowercased before matching; a word with no full segmentation
// maps to a single [UNK] id. word_spans addresses whole input words as
// [begin, end) ranges over `ids`.
struct Tokenization {
  std::vector<int> ids;
  std::vector<std::pair<int, int>> word_spans;
};

Tokenization tokenize_words(const std::vector<std::string>& words, const Vocab& vocab);

// One assembled encoder input: ids plus the three extra-embedding channels.
struct EncoderInput {
  std::vector<int> token_ids;
  std::vector<std::uint8_t> target_mask;  // 1 on target-word subtokens
  std::vector<std::uint8_t> local_mask;   // 1 on local-context subtokens
  std::vector<std::uint8_t> pos_mask;     // 1 on the POS-tag token (sentence inputs)
  std::vector<int> separators;            // positions of the SEP tokens

  std::size_t size() const { return token_ids.size(); }
};

// Sentence layout: [CLS] sentence [SEP] POS [SEP]. The local context is the
// comma-delimited clause containing the target (clause boundaries are comma
// tokens or the sentence edges; a sentence without commas is one clause).
// Over-long sentences are truncated word-by-word from the right; if that
// would cut the target, SequenceTooLong is raised instead.
EncoderInput assemble_sentence_input(const CorpusInstance& instance, const Vocab& vocab,
                                     int max_len = kDefaultMaxSeqLen);

// Definition layout: [CLS] target [SEP] definition [SEP], the way a headword
// precedes its gloss in a dictionary. Over-long definitions are truncated
// from the right (at least one definition subtoken is kept).
EncoderInput assemble_definition_input(const std::string& target_word,
                                       const std::string& definition, const Vocab& vocab,
                                       int max_len = kDefaultMaxSeqLen);

// Contextual encoder contract: a deterministic map from an assembled input
// to one d-vector per position.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual int dim() const = 0;
  virtual std::vector<std::vector<double>> encode(const EncoderInput& input) const = 0;
};

// Small self-attention encoder with seeded parameters, used for desk-scale
// runs and tests. Token, position, and per-channel mask-bit embeddings are
// summed, then two residual attention + feed-forward layers run on top.
class ToyEncoder : public Encoder {
 public:
  ToyEncoder(int vocab_size, int dim, int max_len, std::uint64_t seed);

  int dim() const override { return dim_; }
  int vocab_size() const { return vocab_size_; }
  int max_len() const { return max_len_; }

  std::vector<std::vector<double>> encode(const EncoderInput& input) const override;

  // Named parameter tensors in a fixed order (checkpoint layout).
  std::vector<std::pair<std::string, std::vector<double>*>> tensors();
  std::vector<std::pair<std::string, const std::vector<double>*>> tensors() const;

 private:
  int vocab_size_, dim_, max_len_;
  std::vector<double> token_emb_;    // vocab_size x dim
  std::vector<double> pos_emb_;      // max_len x dim
  std::vector<double> channel_emb_;  // 3 channels x 2 bits x dim
  struct Layer {
    std::vector<double> wq, wk, wv, wo, wf1, wf2;  // each dim x dim
  };
  std::array<Layer, 2> layers_;
};

// The vectors the classification head consumes.
struct EncodedViews {
  std::vector<std::vector<double>> h_S;  // sentence encoding, one vector per position
  std::vector<double> e_t;   // target word within the sentence
  std::vector<double> h_c;   // sense-definition input, averaged over positions
  std::vector<double> h_b;   // basic-definition input, averaged over positions
  std::vector<double> e_tc;  // target word prepended to the sense definition
  std::vector<double> e_tb;  // target word prepended to the basic definition
};

// The three encoders of the pipeline. `sense` and `basic` may point to the
// same encoder (the shared-parameters configuration).
struct EncoderStack {
  std::shared_ptr<Encoder> sentence;
  std::shared_ptr<Encoder> sense;
  std::shared_ptr<Encoder> basic;

  bool shared_definition_encoders() const { return sense == basic; }
};

EncoderStack make_toy_stack(const Vocab& vocab, int dim, int max_len,
                            std::uint64_t seed, bool share_definition_encoders);

// Runs all three inputs through the stack and pools the views: e_t / e_tc /
// e_tb average the target-mask positions; h_c / h_b average every non-PAD
// position of their input.
EncodedViews encode_views(const AugmentedInstance& instance, const EncoderStack& stack,
                          const Vocab& vocab, int max_len = kDefaultMaxSeqLen);

}  // namespace metdet

#endif
