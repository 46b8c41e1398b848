#ifndef METDET_WSD_HPP
#define METDET_WSD_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "metdet/corpus.hpp"
#include "metdet/lexicon.hpp"

namespace metdet {

inline constexpr std::string_view kTargetMarker = "[TGT]";

// Sentence with the target word bracketed by two marker tokens.
struct MarkedSentence {
  std::vector<std::string> tokens;  // includes the two markers
  std::size_t target_begin = 0;     // index of the target word in `tokens`
  std::size_t target_end = 0;       // one past the target word

  const std::string& target_word() const { return tokens[target_begin]; }
  std::string text() const;  // space-joined, markers included
};

MarkedSentence mark_target(const CorpusInstance& instance);

// Inverse of mark_target: the token list with the two markers removed.
std::vector<std::string> strip_markers(const MarkedSentence& marked);

enum class ScorerMethod { OverlapScorer, EncoderScorer };

// Contextual-fit scorer for (sentence, gloss) pairs. The wire contract is a
// batch of text pairs in, one real per pair out; higher = better fit.
class GlossScorer {
 public:
  virtual ~GlossScorer() = default;
  virtual ScorerMethod method() const = 0;
  virtual std::vector<double> score_texts(
      const std::vector<std::pair<std::string, std::string>>& pairs) const = 0;

  double score_gloss(const MarkedSentence& marked, const GlossCandidate& candidate) const;
};

const std::set<std::string>& default_stopwords();

// Deterministic lexical-overlap scorer:
//   score = |content words shared by sentence and gloss| / |content words in gloss|
// Content words are whitespace tokens with edge punctuation stripped,
// lowercased, marker tokens removed, and stopwords dropped; both sides are
// compared as sets. A gloss with no content words scores 0.
class OverlapScorer : public GlossScorer {
 public:
  explicit OverlapScorer(std::set<std::string> stopwords = default_stopwords());
  ScorerMethod method() const override { return ScorerMethod::OverlapScorer; }
  std::vector<double> score_texts(
      const std::vector<std::pair<std::string, std::string>>& pairs) const override;

 private:
  std::set<std::string> stopwords_;
};

// Adapter for an external gloss-ranking encoder. Anything that maps a batch
// of (marked-sentence text, gloss text) pairs to reals can plug in here.
class EncoderScorerAdapter : public GlossScorer {
 public:
  using BatchFn = std::function<std::vector<double>(
      const std::vector<std::pair<std::string, std::string>>&)>;

  explicit EncoderScorerAdapter(BatchFn fn) : fn_(std::move(fn)) {}
  ScorerMethod method() const override { return ScorerMethod::EncoderScorer; }
  std::vector<double> score_texts(
      const std::vector<std::pair<std::string, std::string>>& pairs) const override {
    return fn_(pairs);
  }

 private:
  BatchFn fn_;
};

// Self-contained encoder-scorer implementation backed by seeded hashed token
// embeddings (cosine of mean-pooled text vectors). Deterministic; stands in
// for a pretrained ranking encoder behind the same adapter contract.
std::unique_ptr<GlossScorer> make_hashed_encoder_scorer(std::uint64_t seed = 17,
                                                        int dim = 64);

struct SenseSelection {
  std::optional<GlossCandidate> chosen;
  std::vector<std::pair<std::string, double>> scores;  // (sense_key, score)
  ScorerMethod method = ScorerMethod::OverlapScorer;
};

// Argmax over candidate scores; ties go to the lowest rank_in_inventory
// (the inventory's first-listed sense). Empty candidates -> chosen absent.
SenseSelection select_sense(const MarkedSentence& marked,
                            const std::vector<GlossCandidate>& candidates,
                            const GlossScorer& scorer);

// Full augmentation stage: mark, look up glosses for the normalized target,
// select a sense, look up the basic definition, apply fallbacks. One output
// per input, in input order.
std::vector<AugmentedInstance> augment_corpus(
    const std::vector<CorpusInstance>& instances, const LexiconSnapshot& lexicon,
    const GlossScorer& scorer);

}  // namespace metdet

#endif
