#include "metdet/corpus.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include "metdet/error.hpp"
#include "metdet/tsv.hpp"

namespace metdet {

namespace {

constexpr std::string_view kCorpusHeader =
    "sentence_id\ttokens\ttarget_index\tpos_tag\tlabel";
constexpr std::string_view kAugmentedHeader =
    "sentence_id\ttokens\ttarget_index\tpos_tag\tlabel\t"
    "sense_definition\tsense_source\tbasic_definition\tbasic_source";

std::string at_line(const std::filesystem::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no);
}

std::vector<std::string> split_words(std::string_view joined) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < joined.size()) {
    while (i < joined.size() && joined[i] == ' ') ++i;
    std::size_t start = i;
    while (i < joined.size() && joined[i] != ' ') ++i;
    if (i > start) words.emplace_back(joined.substr(start, i - start));
  }
  return words;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

// Reads all lines, strips a trailing '\r', skips leading '#' comment lines,
// and checks the header row. Returns data lines paired with line numbers.
std::vector<std::pair<std::size_t, std::string>> read_data_lines(
    const std::filesystem::path& path, std::string_view expected_header) {
  std::ifstream in(path);
  if (!in) throw io_error("FileOpen", "cannot open " + path.string());

  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      if (!line.empty() && line[0] == '#') continue;  // provenance comments
      if (line != expected_header) {
        throw validation_error(
            "MissingColumn", at_line(path, line_no) +
                                 ": header row does not match the expected "
                                 "schema: " +
                                 std::string(expected_header));
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    lines.emplace_back(line_no, line);
  }
  if (in.bad()) throw io_error("FileRead", "read failure on " + path.string());
  if (!header_seen)
    throw validation_error("MissingColumn",
                           path.string() + ": missing header row");
  return lines;
}

CorpusInstance parse_base_fields(const std::vector<std::string>& fields,
                                 const std::filesystem::path& path,
                                 std::size_t line_no) {
  CorpusInstance inst;
  inst.sentence_id = tsv::unescape(fields[0]);
  inst.tokens = split_words(tsv::unescape(fields[1]));
  for (auto& t : inst.tokens) t = tsv::unescape(t);

  const std::string idx_str = tsv::unescape(fields[2]);
  std::size_t idx = 0;
  auto [ptr, ec] = std::from_chars(idx_str.data(), idx_str.data() + idx_str.size(), idx);
  if (ec != std::errc() || ptr != idx_str.data() + idx_str.size())
    throw validation_error("BadTargetIndex",
                           at_line(path, line_no) +
                               ": target_index is not a non-negative integer: '" +
                               idx_str + "'");
  if (idx >= inst.tokens.size())
    throw validation_error(
        "BadTargetIndex", at_line(path, line_no) + ": target_index " +
                              std::to_string(idx) + " out of range for " +
                              std::to_string(inst.tokens.size()) + " tokens");
  inst.target_index = idx;

  bool known = false;
  inst.pos_tag = parse_pos_tag(tsv::unescape(fields[3]), &known);
  if (!known)
    std::cerr << "warning: " << at_line(path, line_no) << ": POS tag '"
              << tsv::unescape(fields[3]) << "' outside the closed set, using OTHER\n";

  const std::string label_str = tsv::unescape(fields[4]);
  if (label_str == "0")
    inst.label = 0;
  else if (label_str == "1")
    inst.label = 1;
  else
    throw validation_error("BadLabel", at_line(path, line_no) +
                                           ": label must be 0 or 1, got '" +
                                           label_str + "'");
  return inst;
}

void append_base_fields(std::vector<std::string>& fields,
                        const CorpusInstance& inst) {
  fields.push_back(tsv::escape(inst.sentence_id));
  std::vector<std::string> escaped_tokens;
  escaped_tokens.reserve(inst.tokens.size());
  for (const auto& t : inst.tokens) escaped_tokens.push_back(tsv::escape(t));
  fields.push_back(join_words(escaped_tokens));
  fields.push_back(std::to_string(inst.target_index));
  fields.push_back(std::string(to_string(inst.pos_tag)));
  fields.push_back(std::to_string(inst.label));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("FileOpen", "cannot write " + path.string());
  return out;
}

}  // namespace

std::string_view to_string(PosTag tag) {
  switch (tag) {
    case PosTag::Verb: return "VERB";
    case PosTag::Noun: return "NOUN";
    case PosTag::Adj: return "ADJ";
    case PosTag::Adv: return "ADV";
    case PosTag::Other: return "OTHER";
  }
  return "OTHER";
}

PosTag parse_pos_tag(std::string_view s, bool* known) {
  if (known) *known = true;
  if (s == "VERB") return PosTag::Verb;
  if (s == "NOUN") return PosTag::Noun;
  if (s == "ADJ") return PosTag::Adj;
  if (s == "ADV") return PosTag::Adv;
  if (s == "OTHER") return PosTag::Other;
  if (known) *known = false;
  return PosTag::Other;
}

std::string_view to_string(SenseSource s) {
  return s == SenseSource::Selected ? "SELECTED" : "FALLBACK_TARGET_WORD";
}

std::string_view to_string(BasicSource s) {
  return s == BasicSource::Dictionary ? "DICTIONARY" : "FALLBACK_TARGET_WORD";
}

DatasetVariant make_variant(std::string base_name, bool pruned) {
  DatasetVariant v;
  v.pruned = pruned;
  v.class_weight = default_class_weight(pruned);
  if (pruned && base_name.find("(-)") == std::string::npos)
    base_name += " (-)";
  v.name = std::move(base_name);
  return v;
}

double default_class_weight(bool pruned) { return pruned ? 4.0 : 3.0; }

std::vector<CorpusInstance> load_corpus(const std::filesystem::path& path) {
  std::vector<CorpusInstance> out;
  for (const auto& [line_no, line] : read_data_lines(path, kCorpusHeader)) {
    auto fields = tsv::split(line);
    if (fields.size() != 5)
      throw validation_error("MissingColumn",
                             at_line(path, line_no) + ": expected 5 columns, got " +
                                 std::to_string(fields.size()));
    out.push_back(parse_base_fields(fields, path, line_no));
  }
  return out;
}

void write_corpus(const std::vector<CorpusInstance>& instances,
                  const std::filesystem::path& path,
                  const std::string& provenance) {
  auto out = open_out(path);
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << kCorpusHeader << '\n';
  for (const auto& inst : instances) {
    std::vector<std::string> fields;
    append_base_fields(fields, inst);
    out << tsv::join(fields) << '\n';
  }
  if (!out) throw io_error("FileWrite", "write failure on " + path.string());
}

std::vector<AugmentedInstance> read_augmented(const std::filesystem::path& path) {
  std::vector<AugmentedInstance> out;
  for (const auto& [line_no, line] : read_data_lines(path, kAugmentedHeader)) {
    auto fields = tsv::split(line);
    if (fields.size() != 9)
      throw validation_error("MissingColumn",
                             at_line(path, line_no) + ": expected 9 columns, got " +
                                 std::to_string(fields.size()));
    AugmentedInstance aug;
    aug.base = parse_base_fields(fields, path, line_no);
    aug.sense_definition = tsv::unescape(fields[5]);
    const std::string ss = tsv::unescape(fields[6]);
    if (ss == "SELECTED")
      aug.sense_source = SenseSource::Selected;
    else if (ss == "FALLBACK_TARGET_WORD")
      aug.sense_source = SenseSource::FallbackTargetWord;
    else
      throw validation_error("BadProvenance",
                             at_line(path, line_no) + ": unknown sense_source '" + ss + "'");
    aug.basic_definition = tsv::unescape(fields[7]);
    const std::string bs = tsv::unescape(fields[8]);
    if (bs == "DICTIONARY")
      aug.basic_source = BasicSource::Dictionary;
    else if (bs == "FALLBACK_TARGET_WORD")
      aug.basic_source = BasicSource::FallbackTargetWord;
    else
      throw validation_error("BadProvenance",
                             at_line(path, line_no) + ": unknown basic_source '" + bs + "'");
    if (aug.sense_definition.empty() || aug.basic_definition.empty())
      throw validation_error("EmptyDefinition",
                             at_line(path, line_no) + ": definitions must be non-empty");
    out.push_back(std::move(aug));
  }
  return out;
}

void write_augmented(const std::vector<AugmentedInstance>& instances,
                     const std::filesystem::path& path,
                     const std::string& provenance) {
  auto out = open_out(path);
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << kAugmentedHeader << '\n';
  for (const auto& aug : instances) {
    std::vector<std::string> fields;
    append_base_fields(fields, aug.base);
    fields.push_back(tsv::escape(aug.sense_definition));
    fields.push_back(std::string(to_string(aug.sense_source)));
    fields.push_back(tsv::escape(aug.basic_definition));
    fields.push_back(std::string(to_string(aug.basic_source)));
    out << tsv::join(fields) << '\n';
  }
  if (!out) throw io_error("FileWrite", "write failure on " + path.string());
}

AugmentedInstance apply_fallback(CorpusInstance instance,
                                 std::optional<std::string> sense,
                                 std::optional<std::string> basic) {
  AugmentedInstance aug;
  const std::string target = instance.target_word();
  aug.base = std::move(instance);
  if (sense && !sense->empty()) {
    aug.sense_definition = std::move(*sense);
    aug.sense_source = SenseSource::Selected;
  } else {
    aug.sense_definition = target;
    aug.sense_source = SenseSource::FallbackTargetWord;
  }
  if (basic && !basic->empty()) {
    aug.basic_definition = std::move(*basic);
    aug.basic_source = BasicSource::Dictionary;
  } else {
    aug.basic_definition = target;
    aug.basic_source = BasicSource::FallbackTargetWord;
  }
  return aug;
}

std::vector<AugmentedInstance> prune_missing_senses(
    const std::vector<AugmentedInstance>& instances) {
  std::vector<AugmentedInstance> kept;
  for (const auto& aug : instances)
    if (aug.sense_source == SenseSource::Selected) kept.push_back(aug);
  return kept;
}

}  // namespace metdet
