#ifndef METDET_CORPUS_HPP
#define METDET_CORPUS_HPP

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace metdet {

// Closed POS tag set. Anything else maps to Other on load (with a warning).
enum class PosTag { Verb, Noun, Adj, Adv, Other };

std::string_view to_string(PosTag tag);

// Parses a tag string; unknown tags yield Other. `known`, when non-null,
// reports whether the string was one of the closed-set names.
PosTag parse_pos_tag(std::string_view s, bool* known = nullptr);

// One labeled target word in a pre-tokenized sentence.
struct CorpusInstance {
  std::string sentence_id;
  std::vector<std::string> tokens;
  std::size_t target_index = 0;
  PosTag pos_tag = PosTag::Other;
  int label = 0;  // 1 = metaphorical, 0 = literal

  const std::string& target_word() const { return tokens[target_index]; }

  bool operator==(const CorpusInstance&) const = default;
};

enum class SenseSource { Selected, FallbackTargetWord };
enum class BasicSource { Dictionary, FallbackTargetWord };

std::string_view to_string(SenseSource s);
std::string_view to_string(BasicSource s);

// CorpusInstance plus the two definitions the classifier contrasts, with
// provenance flags recording whether each came from a lexicon lookup or the
// target-word fallback substitution.
struct AugmentedInstance {
  CorpusInstance base;
  std::string sense_definition;
  std::string basic_definition;
  SenseSource sense_source = SenseSource::FallbackTargetWord;
  BasicSource basic_source = BasicSource::FallbackTargetWord;

  bool operator==(const AugmentedInstance&) const = default;
};

// Naming convention for corpus variants; pruned variants carry a "(-)"
// suffix and train with a higher metaphor class weight by default.
struct DatasetVariant {
  std::string name;
  bool pruned = false;
  double class_weight = 3.0;
};

DatasetVariant make_variant(std::string base_name, bool pruned);
double default_class_weight(bool pruned);

// ---------------------------------------------------------------------------
// TSV persistence.
//
// Corpus schema (UTF-8, tab separated, one header row, leading '#' comment
// lines skipped):
//   sentence_id  tokens  target_index  pos_tag  label
// where tokens is the space-joined token list. Augmented files append:
//   sense_definition  sense_source  basic_definition  basic_source
// Tabs/newlines/backslashes inside fields are escaped (see tsv.hpp).
// ---------------------------------------------------------------------------

std::vector<CorpusInstance> load_corpus(const std::filesystem::path& path);

void write_corpus(const std::vector<CorpusInstance>& instances,
                  const std::filesystem::path& path,
                  const std::string& provenance = "");

std::vector<AugmentedInstance> read_augmented(const std::filesystem::path& path);

void write_augmented(const std::vector<AugmentedInstance>& instances,
                     const std::filesystem::path& path,
                     const std::string& provenance = "");

// Substitutes the target word for any missing definition so every instance
// stays processable. An engaged but empty optional counts as missing.
AugmentedInstance apply_fallback(CorpusInstance instance,
                                 std::optional<std::string> sense,
                                 std::optional<std::string> basic);

// Keeps exactly the instances whose sense came from a real lexicon selection,
// preserving order.
std::vector<AugmentedInstance> prune_missing_senses(
    const std::vector<AugmentedInstance>& instances);

}  // namespace metdet

#endif
