#include "metdet/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "metdet/error.hpp"
#include "metdet/rng.hpp"

namespace metdet {

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::vector<std::string> whitespace_split(const std::string& text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n'))
      ++i;
    std::size_t start = i;
    while (i < text.size() && text[i] != ' ' && text[i] != '\t' && text[i] != '\n')
      ++i;
    if (i > start) words.push_back(text.substr(start, i - start));
  }
  return words;
}

void fill_normal(std::vector<double>& v, Rng& rng, double stddev) {
  for (double& x : v) x = rng.normal(0.0, stddev);
}

// y[n x d] = x[n x d] * w[d x d], row-major
std::vector<double> matmul_nd(const std::vector<double>& x, const std::vector<double>& w,
                              std::size_t n, std::size_t d) {
  std::vector<double> y(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double xij = x[i * d + j];
      if (xij == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) y[i * d + k] += xij * w[j * d + k];
    }
  return y;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocab
// ---------------------------------------------------------------------------

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  v.tokens_ = std::move(tokens);
  v.index_.reserve(v.tokens_.size());
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    auto [it, inserted] = v.index_.emplace(v.tokens_[i], static_cast<int>(i));
    if (!inserted)
      throw validation_error("DuplicateToken",
                             "duplicate vocab token '" + v.tokens_[i] + "'");
  }
  v.pad_ = v.id(std::string(kPad));
  v.unk_ = v.id(std::string(kUnk));
  v.cls_ = v.id(std::string(kCls));
  v.sep_ = v.id(std::string(kSep));
  v.tgt_ = v.id(std::string(kTgt));
  if (v.pad_ < 0 || v.unk_ < 0 || v.cls_ < 0 || v.sep_ < 0 || v.tgt_ < 0)
    throw validation_error("MissingSpecialToken",
                           "vocab must contain [PAD], [UNK], [CLS], [SEP], [TGT]");
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("FileOpen", "cannot open " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  if (in.bad()) throw io_error("FileRead", "read failure on " + path.string());
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return from_tokens(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw io_error("FileOpen", "cannot write " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) throw io_error("FileWrite", "write failure on " + path.string());
}

Vocab Vocab::build_from(const std::vector<AugmentedInstance>& instances) {
  std::set<std::string> words;
  for (const auto& aug : instances) {
    for (const auto& tok : aug.base.tokens) words.insert(ascii_lower(tok));
    for (const auto& w : whitespace_split(aug.sense_definition))
      words.insert(ascii_lower(w));
    for (const auto& w : whitespace_split(aug.basic_definition))
      words.insert(ascii_lower(w));
  }
  std::vector<std::string> tokens = {std::string(kPad), std::string(kUnk),
                                     std::string(kCls), std::string(kSep),
                                     std::string(kTgt)};
  for (PosTag tag : {PosTag::Verb, PosTag::Noun, PosTag::Adj, PosTag::Adv, PosTag::Other})
    tokens.emplace_back(to_string(tag));
  for (const auto& w : words) {
    if (std::find(tokens.begin(), tokens.end(), w) == tokens.end())
      tokens.push_back(w);
  }
  return from_tokens(std::move(tokens));
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

Tokenization tokenize_words(const std::vector<std::string>& words, const Vocab& vocab) {
  Tokenization out;
  for (const auto& raw : words) {
    const std::string word = ascii_lower(raw);
    const int begin = static_cast<int>(out.ids.size());
    std::vector<int> pieces;
    std::size_t pos = 0;
    bool ok = !word.empty();
    while (pos < word.size()) {
      int match = -1;
      std::size_t match_len = 0;
      for (std::size_t len = word.size() - pos; len >= 1; --len) {
        std::string cand = (pos == 0 ? "" : "##") + word.substr(pos, len);
        int id = vocab.id(cand);
        if (id >= 0) {
          match = id;
          match_len = len;
          break;
        }
      }
      if (match < 0) {
        ok = false;
        break;
      }
      pieces.push_back(match);
      pos += match_len;
    }
    if (ok) {
      out.ids.insert(out.ids.end(), pieces.begin(), pieces.end());
    } else {
      out.ids.push_back(vocab.unk_id());  // unknown span collapses to one UNK
    }
    out.word_spans.emplace_back(begin, static_cast<int>(out.ids.size()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Input assembly
// ---------------------------------------------------------------------------

EncoderInput assemble_sentence_input(const CorpusInstance& instance, const Vocab& vocab,
                                     int max_len) {
  if (instance.tokens.empty())
    throw validation_error("EmptySentence", "cannot assemble an empty sentence");
  if (instance.target_index >= instance.tokens.size())
    throw validation_error("BadTargetIndex", "target_index out of range");

  const Tokenization tok = tokenize_words(instance.tokens, vocab);
  const int frame = 4;  // [CLS], [SEP], POS, [SEP]
  const int budget = max_len - frame;
  if (budget < 1)
    throw validation_error("SequenceTooLong",
                           "max_len " + std::to_string(max_len) +
                               " leaves no room for sentence tokens");

  // Keep whole words from the left while they fit.
  std::size_t kept_words = instance.tokens.size();
  for (std::size_t w = 0; w < instance.tokens.size(); ++w) {
    if (tok.word_spans[w].second > budget) {
      kept_words = w;
      break;
    }
  }
  if (instance.target_index >= kept_words)
    throw validation_error(
        "SequenceTooLong",
        "sentence '" + instance.sentence_id +
            "' cannot be truncated without losing the target word");
  const int kept_subtokens = tok.word_spans[kept_words - 1].second;

  // Clause boundaries: nearest comma token on each side, or the sentence edge.
  std::size_t clause_lo = instance.target_index;
  while (clause_lo > 0 && instance.tokens[clause_lo - 1] != ",") --clause_lo;
  std::size_t clause_hi = instance.target_index + 1;
  while (clause_hi < instance.tokens.size() && instance.tokens[clause_hi] != ",")
    ++clause_hi;

  EncoderInput input;
  const std::size_t total = static_cast<std::size_t>(kept_subtokens) + frame;
  input.token_ids.reserve(total);
  input.token_ids.push_back(vocab.cls_id());
  input.token_ids.insert(input.token_ids.end(), tok.ids.begin(),
                         tok.ids.begin() + kept_subtokens);
  input.separators.push_back(static_cast<int>(input.token_ids.size()));
  input.token_ids.push_back(vocab.sep_id());
  const int pos_token_id = vocab.id(std::string(to_string(instance.pos_tag)));
  const int pos_position = static_cast<int>(input.token_ids.size());
  input.token_ids.push_back(pos_token_id >= 0 ? pos_token_id : vocab.unk_id());
  input.separators.push_back(static_cast<int>(input.token_ids.size()));
  input.token_ids.push_back(vocab.sep_id());

  input.target_mask.assign(input.token_ids.size(), 0);
  input.local_mask.assign(input.token_ids.size(), 0);
  input.pos_mask.assign(input.token_ids.size(), 0);

  auto mark_word = [&](std::size_t word, std::vector<std::uint8_t>& mask) {
    const auto [b, e] = tok.word_spans[word];
    for (int i = b; i < e && i < kept_subtokens; ++i)
      mask[static_cast<std::size_t>(i) + 1] = 1;  // +1 for [CLS]
  };
  mark_word(instance.target_index, input.target_mask);
  for (std::size_t w = clause_lo; w < clause_hi && w < kept_words; ++w)
    mark_word(w, input.local_mask);
  input.pos_mask[static_cast<std::size_t>(pos_position)] = 1;

  bool has_target = false;
  for (auto b : input.target_mask) has_target |= (b != 0);
  if (!has_target)
    throw validation_error("SequenceTooLong", "target mask is empty after assembly");
  return input;
}

EncoderInput assemble_definition_input(const std::string& target_word,
                                       const std::string& definition, const Vocab& vocab,
                                       int max_len) {
  if (target_word.empty() || definition.empty())
    throw validation_error("EmptyInput",
                           "definition inputs need a non-empty word and definition");

  const Tokenization target_tok = tokenize_words({target_word}, vocab);
  const Tokenization def_tok = tokenize_words(whitespace_split(definition), vocab);

  const int frame = 3;  // [CLS], [SEP], [SEP]
  const int target_len = static_cast<int>(target_tok.ids.size());
  const int budget = max_len - frame - target_len;
  if (budget < 1)
    throw validation_error("SequenceTooLong",
                           "target word '" + target_word +
                               "' leaves no room for the definition");
  const int def_len = std::min<int>(static_cast<int>(def_tok.ids.size()), budget);

  EncoderInput input;
  input.token_ids.push_back(vocab.cls_id());
  const int target_begin = static_cast<int>(input.token_ids.size());
  input.token_ids.insert(input.token_ids.end(), target_tok.ids.begin(),
                         target_tok.ids.end());
  input.separators.push_back(static_cast<int>(input.token_ids.size()));
  input.token_ids.push_back(vocab.sep_id());
  const int def_begin = static_cast<int>(input.token_ids.size());
  input.token_ids.insert(input.token_ids.end(), def_tok.ids.begin(),
                         def_tok.ids.begin() + def_len);
  input.separators.push_back(static_cast<int>(input.token_ids.size()));
  input.token_ids.push_back(vocab.sep_id());

  input.target_mask.assign(input.token_ids.size(), 0);
  input.local_mask.assign(input.token_ids.size(), 0);
  input.pos_mask.assign(input.token_ids.size(), 0);
  for (int i = 0; i < target_len; ++i)
    input.target_mask[static_cast<std::size_t>(target_begin + i)] = 1;
  for (int i = 0; i < def_len; ++i)
    input.local_mask[static_cast<std::size_t>(def_begin + i)] = 1;
  return input;
}

// ---------------------------------------------------------------------------
// ToyEncoder
// ---------------------------------------------------------------------------

ToyEncoder::ToyEncoder(int vocab_size, int dim, int max_len, std::uint64_t seed)
    : vocab_size_(vocab_size), dim_(dim), max_len_(max_len) {
  if (vocab_size <= 0 || dim <= 0 || max_len <= 0)
    throw validation_error("BadEncoderShape", "encoder dimensions must be positive");
  Rng rng(seed);
  const auto d = static_cast<std::size_t>(dim_);
  token_emb_.resize(static_cast<std::size_t>(vocab_size_) * d);
  pos_emb_.resize(static_cast<std::size_t>(max_len_) * d);
  channel_emb_.resize(3 * 2 * d);
  fill_normal(token_emb_, rng, 1.0);
  fill_normal(pos_emb_, rng, 0.1);
  fill_normal(channel_emb_, rng, 0.1);
  const double matrix_std = 1.0 / std::sqrt(static_cast<double>(dim_));
  for (auto& layer : layers_) {
    for (auto* w : {&layer.wq, &layer.wk, &layer.wv, &layer.wo, &layer.wf1, &layer.wf2}) {
      w->resize(d * d);
      fill_normal(*w, rng, matrix_std);
    }
  }
}

std::vector<std::vector<double>> ToyEncoder::encode(const EncoderInput& input) const {
  const std::size_t n = input.size();
  const auto d = static_cast<std::size_t>(dim_);
  if (n == 0) throw validation_error("EmptyInput", "cannot encode an empty sequence");
  if (n > static_cast<std::size_t>(max_len_))
    throw validation_error("SequenceTooLong",
                           "input length " + std::to_string(n) +
                               " exceeds encoder max_len " + std::to_string(max_len_));
  if (input.target_mask.size() != n || input.local_mask.size() != n ||
      input.pos_mask.size() != n)
    throw validation_error("MaskLengthMismatch", "masks must match the id sequence");

  std::vector<double> x(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    int id = input.token_ids[i];
    if (id < 0 || id >= vocab_size_)
      throw validation_error("BadTokenId", "token id out of range: " + std::to_string(id));
    const std::size_t masks[3] = {static_cast<std::size_t>(input.target_mask[i] ? 1 : 0),
                                  static_cast<std::size_t>(input.local_mask[i] ? 1 : 0),
                                  static_cast<std::size_t>(input.pos_mask[i] ? 1 : 0)};
    for (std::size_t k = 0; k < d; ++k) {
      double v = token_emb_[static_cast<std::size_t>(id) * d + k] + pos_emb_[i * d + k];
      for (std::size_t ch = 0; ch < 3; ++ch)
        v += channel_emb_[(ch * 2 + masks[ch]) * d + k];
      x[i * d + k] = v;
    }
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
  for (const auto& layer : layers_) {
    const auto q = matmul_nd(x, layer.wq, n, d);
    const auto kk = matmul_nd(x, layer.wk, n, d);
    const auto v = matmul_nd(x, layer.wv, n, d);

    std::vector<double> attn_out(n * d, 0.0);
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      double max_score = -1e300;
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < d; ++k) s += q[i * d + k] * kk[j * d + k];
        scores[j] = s * scale;
        max_score = std::max(max_score, scores[j]);
      }
      double z = 0;
      for (std::size_t j = 0; j < n; ++j) {
        scores[j] = std::exp(scores[j] - max_score);
        z += scores[j];
      }
      for (std::size_t j = 0; j < n; ++j) {
        const double w = scores[j] / z;
        for (std::size_t k = 0; k < d; ++k) attn_out[i * d + k] += w * v[j * d + k];
      }
    }
    const auto projected = matmul_nd(attn_out, layer.wo, n, d);
    for (std::size_t i = 0; i < n * d; ++i) x[i] += projected[i];

    auto hidden = matmul_nd(x, layer.wf1, n, d);
    for (double& h : hidden) h = std::tanh(h);
    const auto ffn = matmul_nd(hidden, layer.wf2, n, d);
    for (std::size_t i = 0; i < n * d; ++i) x[i] += ffn[i];
  }

  std::vector<std::vector<double>> out(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) out[i][k] = x[i * d + k];
  return out;
}

std::vector<std::pair<std::string, std::vector<double>*>> ToyEncoder::tensors() {
  std::vector<std::pair<std::string, std::vector<double>*>> out = {
      {"token_emb", &token_emb_}, {"pos_emb", &pos_emb_}, {"channel_emb", &channel_emb_}};
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    out.emplace_back(prefix + "wq", &layers_[l].wq);
    out.emplace_back(prefix + "wk", &layers_[l].wk);
    out.emplace_back(prefix + "wv", &layers_[l].wv);
    out.emplace_back(prefix + "wo", &layers_[l].wo);
    out.emplace_back(prefix + "wf1", &layers_[l].wf1);
    out.emplace_back(prefix + "wf2", &layers_[l].wf2);
  }
  return out;
}

std::vector<std::pair<std::string, const std::vector<double>*>> ToyEncoder::tensors()
    const {
  std::vector<std::pair<std::string, const std::vector<double>*>> out;
  for (auto& [name, tensor] : const_cast<ToyEncoder*>(this)->tensors())
    out.emplace_back(name, tensor);
  return out;
}

EncoderStack make_toy_stack(const Vocab& vocab, int dim, int max_len,
                            std::uint64_t seed, bool share_definition_encoders) {
  EncoderStack stack;
  stack.sentence = std::make_shared<ToyEncoder>(vocab.size(), dim, max_len, seed);
  stack.sense = std::make_shared<ToyEncoder>(vocab.size(), dim, max_len, seed + 1);
  stack.basic = share_definition_encoders
                    ? stack.sense
                    : std::make_shared<ToyEncoder>(vocab.size(), dim, max_len, seed + 2);
  return stack;
}

// ---------------------------------------------------------------------------
// View pooling
// ---------------------------------------------------------------------------

namespace {

std::vector<double> mean_at_mask(const std::vector<std::vector<double>>& seq,
                                 const std::vector<std::uint8_t>& mask) {
  std::vector<double> out(seq.empty() ? 0 : seq[0].size(), 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (!mask[i]) continue;
    ++count;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += seq[i][k];
  }
  if (count == 0)
    throw validation_error("EmptyMask", "cannot pool over an empty mask");
  for (double& x : out) x /= static_cast<double>(count);
  return out;
}

std::vector<double> mean_non_pad(const std::vector<std::vector<double>>& seq,
                                 const std::vector<int>& ids, int pad_id) {
  std::vector<double> out(seq.empty() ? 0 : seq[0].size(), 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (ids[i] == pad_id) continue;
    ++count;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += seq[i][k];
  }
  if (count == 0)
    throw validation_error("EmptyMask", "input is all padding");
  for (double& x : out) x /= static_cast<double>(count);
  return out;
}

void check_finite(const std::vector<double>& v, const char* name) {
  for (double x : v)
    if (!std::isfinite(x))
      throw numeric_error("NonFiniteEncoding",
                          std::string("non-finite value in ") + name);
}

}  // namespace

EncodedViews encode_views(const AugmentedInstance& instance, const EncoderStack& stack,
                          const Vocab& vocab, int max_len) {
  if (!stack.sentence || !stack.sense || !stack.basic)
    throw validation_error("MissingEncoder", "the encoder stack is incomplete");
  const int d = stack.sentence->dim();
  if (stack.sense->dim() != d || stack.basic->dim() != d)
    throw validation_error("DimensionMismatch",
                           "the three encoders disagree on the embedding dimension");

  const EncoderInput sentence_in = assemble_sentence_input(instance.base, vocab, max_len);
  const std::string& target = instance.base.target_word();
  const EncoderInput sense_in =
      assemble_definition_input(target, instance.sense_definition, vocab, max_len);
  const EncoderInput basic_in =
      assemble_definition_input(target, instance.basic_definition, vocab, max_len);

  EncodedViews views;
  views.h_S = stack.sentence->encode(sentence_in);
  if (views.h_S.size() != sentence_in.size())
    throw validation_error("EncoderContract",
                           "encoder output length differs from input length");
  views.e_t = mean_at_mask(views.h_S, sentence_in.target_mask);

  const auto sense_out = stack.sense->encode(sense_in);
  if (sense_out.size() != sense_in.size())
    throw validation_error("EncoderContract",
                           "encoder output length differs from input length");
  views.h_c = mean_non_pad(sense_out, sense_in.token_ids, vocab.pad_id());
  views.e_tc = mean_at_mask(sense_out, sense_in.target_mask);

  const auto basic_out = stack.basic->encode(basic_in);
  if (basic_out.size() != basic_in.size())
    throw validation_error("EncoderContract",
                           "encoder output length differs from input length");
  views.h_b = mean_non_pad(basic_out, basic_in.token_ids, vocab.pad_id());
  views.e_tb = mean_at_mask(basic_out, basic_in.target_mask);

  check_finite(views.e_t, "e_t");
  check_finite(views.h_c, "h_c");
  check_finite(views.h_b, "h_b");
  check_finite(views.e_tc, "e_tc");
  check_finite(views.e_tb, "e_tb");
  return views;
}

}  // namespace metdet
