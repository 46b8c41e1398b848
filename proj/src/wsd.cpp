#include "metdet/wsd.hpp"

#include <cmath>
#include <cstring>

#include "metdet/error.hpp"

namespace metdet {

namespace {

bool is_edge_punct(char c) {
  return std::strchr(".,;:!?\"'()[]{}<>", c) != nullptr;
}

// Whitespace split with edge punctuation stripped and ASCII lowercasing.
std::vector<std::string> content_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t start = i;
    while (i < text.size() && text[i] != ' ') ++i;
    if (i == start) continue;
    std::size_t lo = start, hi = i;
    while (lo < hi && is_edge_punct(text[lo])) ++lo;
    while (hi > lo && is_edge_punct(text[hi - 1])) --hi;
    if (lo == hi) continue;
    std::string tok = text.substr(lo, hi - lo);
    for (char& c : tok)
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(std::move(tok));
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

class HashedEncoderScorer : public GlossScorer {
 public:
  HashedEncoderScorer(std::uint64_t seed, int dim) : seed_(seed), dim_(dim) {}

  ScorerMethod method() const override { return ScorerMethod::EncoderScorer; }

  std::vector<double> score_texts(
      const std::vector<std::pair<std::string, std::string>>& pairs) const override {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& [sentence, gloss] : pairs)
      out.push_back(cosine(embed(sentence), embed(gloss)));
    return out;
  }

 private:
  std::vector<double> embed(const std::string& text) const {
    std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
    std::size_t n = 0;
    for (const auto& tok : content_tokens(text)) {
      if (tok == "[tgt]") continue;
      std::uint64_t state = splitmix64(fnv1a(tok) ^ seed_);
      for (int k = 0; k < dim_; ++k) {
        state = splitmix64(state);
        // uniform in [-1, 1)
        v[static_cast<std::size_t>(k)] +=
            static_cast<double>(state >> 11) * 0x1p-52 - 1.0;
      }
      ++n;
    }
    if (n > 0)
      for (double& x : v) x /= static_cast<double>(n);
    return v;
  }

  static double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double aa = 0, bb = 0, ab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      aa += a[i] * a[i];
      bb += b[i] * b[i];
      ab += a[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / (std::sqrt(aa) * std::sqrt(bb));
  }

  std::uint64_t seed_;
  int dim_;
};

}  // namespace

std::string MarkedSentence::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

MarkedSentence mark_target(const CorpusInstance& instance) {
  if (instance.target_index >= instance.tokens.size())
    throw validation_error("BadTargetIndex",
                           "target_index out of range in '" + instance.sentence_id + "'");
  MarkedSentence marked;
  marked.tokens.reserve(instance.tokens.size() + 2);
  for (std::size_t i = 0; i < instance.tokens.size(); ++i) {
    if (i == instance.target_index) {
      marked.tokens.emplace_back(kTargetMarker);
      marked.target_begin = marked.tokens.size();
      marked.tokens.push_back(instance.tokens[i]);
      marked.target_end = marked.tokens.size();
      marked.tokens.emplace_back(kTargetMarker);
    } else {
      marked.tokens.push_back(instance.tokens[i]);
    }
  }
  return marked;
}

std::vector<std::string> strip_markers(const MarkedSentence& marked) {
  std::vector<std::string> out;
  out.reserve(marked.tokens.size() - 2);
  for (const auto& tok : marked.tokens)
    if (tok != kTargetMarker) out.push_back(tok);
  return out;
}

double GlossScorer::score_gloss(const MarkedSentence& marked,
                                const GlossCandidate& candidate) const {
  if (candidate.gloss.empty())
    throw validation_error("EmptyGloss", "cannot score an empty gloss");
  return score_texts({{marked.text(), candidate.gloss}}).front();
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {
      "a",     "an",    "the",   "and",   "or",    "but",   "if",    "then",
      "of",    "in",    "on",    "at",    "to",    "for",   "with",  "by",
      "from",  "as",    "is",    "are",   "was",   "were",  "be",    "been",
      "being", "it",    "its",   "this",  "that",  "these", "those", "he",
      "she",   "they",  "them",  "his",   "her",   "their", "you",   "your",
      "we",    "our",   "i",     "me",    "my",    "not",   "no",    "nor",
      "do",    "does",  "did",   "have",  "has",   "had",   "can",   "could",
      "will",  "would", "shall", "should", "may",  "might", "must",  "so",
      "than",  "too",   "very",  "just",  "also",  "into",  "over",  "under",
      "own",   "same",  "s",     "t",     "d",     "ll",    "m",     "re",
      "ve",    "y",     "up",    "down",  "out",   "off",   "again", "there",
      "here",  "when",  "where", "why",   "how",   "what",  "who",   "whom",
      "which", "while", "about", "all",   "any",   "both",  "each",  "few",
      "more",  "most",  "other", "some",  "such",  "only",  "now",   "o",
  };
  return words;
}

OverlapScorer::OverlapScorer(std::set<std::string> stopwords)
    : stopwords_(std::move(stopwords)) {}

std::vector<double> OverlapScorer::score_texts(
    const std::vector<std::pair<std::string, std::string>>& pairs) const {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [sentence, gloss] : pairs) {
    std::set<std::string> context;
    for (auto& tok : content_tokens(sentence)) {
      if (tok == "[tgt]") continue;
      const std::string lemma = normalize(tok, PosTag::Other);
      if (!stopwords_.count(lemma)) context.insert(lemma);
    }
    std::set<std::string> gloss_words;
    for (auto& tok : content_tokens(gloss)) {
      const std::string lemma = normalize(tok, PosTag::Other);
      if (!stopwords_.count(lemma)) gloss_words.insert(lemma);
    }
    if (gloss_words.empty()) {
      out.push_back(0.0);
      continue;
    }
    std::size_t shared = 0;
    for (const auto& w : gloss_words)
      if (context.count(w)) ++shared;
    out.push_back(static_cast<double>(shared) /
                  static_cast<double>(gloss_words.size()));
  }
  return out;
}

std::unique_ptr<GlossScorer> make_hashed_encoder_scorer(std::uint64_t seed, int dim) {
  return std::make_unique<HashedEncoderScorer>(seed, dim);
}

SenseSelection select_sense(const MarkedSentence& marked,
                            const std::vector<GlossCandidate>& candidates,
                            const GlossScorer& scorer) {
  SenseSelection sel;
  sel.method = scorer.method();
  if (candidates.empty()) return sel;

  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(candidates.size());
  const std::string sentence = marked.text();
  for (const auto& c : candidates) pairs.emplace_back(sentence, c.gloss);
  const std::vector<double> scores = scorer.score_texts(pairs);
  if (scores.size() != candidates.size())
    throw validation_error("ScorerBatchSize",
                           "scorer returned " + std::to_string(scores.size()) +
                               " scores for " + std::to_string(candidates.size()) +
                               " candidates");

  std::size_t best = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    sel.scores.emplace_back(candidates[i].sense_key, scores[i]);
    if (scores[i] > scores[best] ||
        (scores[i] == scores[best] &&
         candidates[i].rank_in_inventory < candidates[best].rank_in_inventory))
      best = i;
  }
  sel.chosen = candidates[best];
  return sel;
}

std::vector<AugmentedInstance> augment_corpus(
    const std::vector<CorpusInstance>& instances, const LexiconSnapshot& lexicon,
    const GlossScorer& scorer) {
  std::vector<AugmentedInstance> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    const MarkedSentence marked = mark_target(inst);
    const std::string lemma = normalize(inst.target_word(), inst.pos_tag);
    const auto& candidates = lexicon.lookup_glosses(lemma, inst.pos_tag);
    const SenseSelection sel = select_sense(marked, candidates, scorer);
    std::optional<std::string> sense;
    if (sel.chosen) sense = sel.chosen->gloss;
    out.push_back(apply_fallback(inst, std::move(sense),
                                 lexicon.lookup_basic_definition(lemma)));
  }
  return out;
}

}  // namespace metdet
