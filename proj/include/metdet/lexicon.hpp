#ifndef METDET_LEXICON_HPP
#define METDET_LEXICON_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metdet/corpus.hpp"

namespace metdet {

// One candidate dictionary sense of a (lemma, pos) pair.
struct GlossCandidate {
  std::string lemma;
  PosTag pos = PosTag::Other;
  std::string gloss;
  std::string sense_key;       // stable identifier, e.g. "plant.n.01"
  int rank_in_inventory = 0;   // 0 = first-listed sense

  bool operator==(const GlossCandidate&) const = default;
};

// Immutable offline snapshot of the lexical resources: a gloss inventory per
// (lemma, pos) and one basic definition per lemma (the first-listed sense of
// the basic-meaning dictionary).
//
// Snapshot file format (UTF-8, line oriented, '#' comment lines allowed):
//   G<TAB>lemma<TAB>pos<TAB>rank<TAB>sense_key<TAB>gloss
//   B<TAB>lemma<TAB>definition
// Duplicate (lemma, pos, rank) keys are rejected. Gloss lists are ordered by
// rank, i.e. by the source inventory's sense order.
class LexiconSnapshot {
 public:
  static LexiconSnapshot load(const std::filesystem::path& path);

  // Programmatic building, used by tests and fixtures. Rank defaults to the
  // next free slot for the (lemma, pos) pair.
  void add_gloss(std::string lemma, PosTag pos, std::string gloss,
                 std::string sense_key = "", int rank = -1);
  void add_basic(std::string lemma, std::string definition);

  // Ordered candidate list; empty means "no sense available" and triggers
  // the fallback substitution downstream.
  const std::vector<GlossCandidate>& lookup_glosses(const std::string& lemma,
                                                    PosTag pos) const;

  std::optional<std::string> lookup_basic_definition(const std::string& lemma) const;

  std::size_t gloss_entry_count() const { return entries_.size(); }
  std::size_t basic_definition_count() const { return basic_defs_.size(); }

 private:
  std::map<std::pair<std::string, PosTag>, std::vector<GlossCandidate>> entries_;
  std::map<std::string, std::string> basic_defs_;
};

// Deterministic rule-based lemmatization: lowercases and strips common
// inflectional suffixes by POS (plural -s/-es for nouns; -ing/-ed/-s for
// verbs), with a fixed exception table for irregular forms. Idempotent.
// Mis-stemmed rare forms simply miss the lexicon and fall back.
std::string normalize(std::string_view surface, PosTag pos);

}  // namespace metdet

#endif
