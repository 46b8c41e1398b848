#include "metdet/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <unordered_map>

#include "metdet/error.hpp"
#include "metdet/tsv.hpp"

namespace metdet {

namespace {

const std::vector<GlossCandidate> kNoGlosses;

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

// Irregular forms the suffix rules would get wrong. Keyed on the lowercased
// surface form; applies to every POS.
const std::unordered_map<std::string, std::string>& exception_table() {
  static const std::unordered_map<std::string, std::string> table = {
      {"men", "man"},       {"women", "woman"},   {"children", "child"},
      {"feet", "foot"},     {"teeth", "tooth"},   {"mice", "mouse"},
      {"geese", "goose"},   {"people", "person"}, {"leaves", "leaf"},
      {"lives", "life"},    {"is", "be"},         {"are", "be"},
      {"was", "be"},        {"were", "be"},       {"been", "be"},
      {"being", "be"},      {"am", "be"},         {"has", "have"},
      {"had", "have"},      {"having", "have"},   {"goes", "go"},
      {"went", "go"},       {"gone", "go"},       {"going", "go"},
      {"did", "do"},        {"done", "do"},       {"doing", "do"},
      {"does", "do"},       {"ran", "run"},       {"running", "run"},
      {"said", "say"},      {"saying", "say"},    {"made", "make"},
      {"making", "make"},   {"taking", "take"},   {"took", "take"},
      {"taken", "take"},    {"giving", "give"},   {"gave", "give"},
      {"given", "give"},    {"coming", "come"},   {"came", "come"},
      {"getting", "get"},   {"got", "get"},       {"gotten", "get"},
      {"putting", "put"},   {"sitting", "sit"},   {"sat", "sit"},
      {"used", "use"},      {"using", "use"},     {"fell", "fall"},
      {"fallen", "fall"},   {"saw", "see"},       {"seen", "see"},
      {"seeing", "see"},    {"heard", "hear"},    {"wrote", "write"},
      {"written", "write"}, {"writing", "write"}, {"poured", "pour"},
      {"pouring", "pour"},  {"series", "series"}, {"species", "species"},
  };
  return table;
}

std::string strip_noun_suffix(std::string s) {
  if (ends_with(s, "ies") && s.size() > 4) {
    s.replace(s.size() - 3, 3, "y");
  } else if ((ends_with(s, "ches") || ends_with(s, "shes") ||
              ends_with(s, "xes") || ends_with(s, "zes") ||
              ends_with(s, "sses")) &&
             s.size() > 4) {
    s.erase(s.size() - 2);
  } else if (ends_with(s, "s") && !ends_with(s, "ss") && !ends_with(s, "us") &&
             !ends_with(s, "is") && s.size() > 3) {
    s.pop_back();
  }
  return s;
}

std::string strip_verb_suffix(std::string s) {
  if (ends_with(s, "ing") && s.size() >= 6) {
    s.erase(s.size() - 3);
  } else if (ends_with(s, "ied") && s.size() > 4) {
    s.replace(s.size() - 3, 3, "y");
  } else if (ends_with(s, "ed") && s.size() >= 5) {
    s.erase(s.size() - 2);
  } else if (ends_with(s, "ies") && s.size() > 4) {
    s.replace(s.size() - 3, 3, "y");
  } else if (ends_with(s, "s") && !ends_with(s, "ss") && s.size() > 3) {
    s.pop_back();
  }
  return s;
}

}  // namespace

std::string normalize(std::string_view surface, PosTag pos) {
  std::string s = ascii_lower(surface);
  // Suffix stripping runs to a fixed point so that the result is a fixed
  // point itself (idempotence), e.g. verb "buildings" -> "building" -> "build".
  for (;;) {
    auto it = exception_table().find(s);
    if (it != exception_table().end()) {
      if (it->second == s) return s;
      s = it->second;
      continue;
    }
    std::string next;
    switch (pos) {
      case PosTag::Noun: next = strip_noun_suffix(s); break;
      case PosTag::Verb: next = strip_verb_suffix(s); break;
      default: return s;  // adjectives, adverbs, other: lowercase only
    }
    if (next == s) return s;
    s = std::move(next);
  }
}

LexiconSnapshot LexiconSnapshot::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("FileOpen", "cannot open " + path.string());

  LexiconSnapshot snap;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = tsv::split(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields[0] == "G") {
      if (fields.size() != 6)
        throw validation_error("BadSnapshotLine",
                               where + ": gloss lines take 6 columns");
      const std::string lemma = tsv::unescape(fields[1]);
      bool known = false;
      const PosTag pos = parse_pos_tag(tsv::unescape(fields[2]), &known);
      if (!known)
        throw validation_error("BadSnapshotLine",
                               where + ": unknown POS tag '" + fields[2] + "'");
      int rank = -1;
      const std::string rank_str = tsv::unescape(fields[3]);
      auto [ptr, ec] =
          std::from_chars(rank_str.data(), rank_str.data() + rank_str.size(), rank);
      if (ec != std::errc() || ptr != rank_str.data() + rank_str.size() || rank < 0)
        throw validation_error("BadSnapshotLine",
                               where + ": rank must be a non-negative integer");
      const std::string gloss = tsv::unescape(fields[5]);
      if (gloss.empty())
        throw validation_error("BadSnapshotLine", where + ": empty gloss");
      auto& list = snap.entries_[{lemma, pos}];
      for (const auto& existing : list)
        if (existing.rank_in_inventory == rank)
          throw validation_error(
              "DuplicateSense", where + ": duplicate rank " + std::to_string(rank) +
                                    " for (" + lemma + ", " +
                                    std::string(to_string(pos)) + ")");
      list.push_back(GlossCandidate{lemma, pos, gloss, tsv::unescape(fields[4]), rank});
    } else if (fields[0] == "B") {
      if (fields.size() != 3)
        throw validation_error("BadSnapshotLine",
                               where + ": basic-definition lines take 3 columns");
      const std::string lemma = tsv::unescape(fields[1]);
      const std::string def = tsv::unescape(fields[2]);
      if (def.empty())
        throw validation_error("BadSnapshotLine", where + ": empty basic definition");
      snap.basic_defs_[lemma] = def;
    } else {
      throw validation_error("BadSnapshotLine",
                             where + ": line must start with G or B");
    }
  }
  if (in.bad()) throw io_error("FileRead", "read failure on " + path.string());

  for (auto& [key, list] : snap.entries_)
    std::sort(list.begin(), list.end(),
              [](const GlossCandidate& a, const GlossCandidate& b) {
                return a.rank_in_inventory < b.rank_in_inventory;
              });
  return snap;
}

void LexiconSnapshot::add_gloss(std::string lemma, PosTag pos, std::string gloss,
                                std::string sense_key, int rank) {
  auto& list = entries_[{lemma, pos}];
  if (rank < 0) rank = list.empty() ? 0 : list.back().rank_in_inventory + 1;
  for (const auto& existing : list)
    if (existing.rank_in_inventory == rank)
      throw validation_error("DuplicateSense",
                             "duplicate rank " + std::to_string(rank) + " for (" +
                                 lemma + ", " + std::string(to_string(pos)) + ")");
  if (sense_key.empty())
    sense_key = lemma + "." + std::string(1, static_cast<char>(
                                 std::tolower(static_cast<unsigned char>(
                                     to_string(pos)[0])))) +
                "." + std::to_string(rank);
  list.push_back(GlossCandidate{std::move(lemma), pos, std::move(gloss),
                                std::move(sense_key), rank});
  std::sort(list.begin(), list.end(),
            [](const GlossCandidate& a, const GlossCandidate& b) {
              return a.rank_in_inventory < b.rank_in_inventory;
            });
}

void LexiconSnapshot::add_basic(std::string lemma, std::string definition) {
  basic_defs_[std::move(lemma)] = std::move(definition);
}

const std::vector<GlossCandidate>& LexiconSnapshot::lookup_glosses(
    const std::string& lemma, PosTag pos) const {
  auto it = entries_.find({lemma, pos});
  return it == entries_.end() ? kNoGlosses : it->second;
}

std::optional<std::string> LexiconSnapshot::lookup_basic_definition(
    const std::string& lemma) const {
  auto it = basic_defs_.find(lemma);
  if (it == basic_defs_.end()) return std::nullopt;
  return it->second;
}

}  // namespace metdet
