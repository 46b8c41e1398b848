#include <doctest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "metdet/encoding.hpp"
#include "metdet/error.hpp"
#include "metdet/wsd.hpp"

using namespace metdet;
using namespace metdet::testing;

namespace {

Vocab tiny_vocab(std::vector<std::string> extra) {
  std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[TGT]",
                                     "VERB", "NOUN", "ADJ", "ADV", "OTHER"};
  tokens.insert(tokens.end(), extra.begin(), extra.end());
  return Vocab::from_tokens(std::move(tokens));
}

}  // namespace

TEST_CASE("tokenize_words handles whole words, subwords, and unknowns") {
  auto vocab = tiny_vocab({"kick", "##ed", "idea", "he", "the"});

  SUBCASE("in-vocab word is a single id") {
    auto tok = tokenize_words({"idea"}, vocab);
    REQUIRE(tok.ids.size() == 1);
    CHECK(tok.ids[0] == vocab.id("idea"));
    CHECK(tok.word_spans == std::vector<std::pair<int, int>>{{0, 1}});
  }
  SUBCASE("greedy longest match splits into pieces") {
    auto tok = tokenize_words({"kicked"}, vocab);
    REQUIRE(tok.ids.size() == 2);
    CHECK(tok.ids[0] == vocab.id("kick"));
    CHECK(tok.ids[1] == vocab.id("##ed"));
    CHECK(tok.word_spans == std::vector<std::pair<int, int>>{{0, 2}});
  }
  SUBCASE("words are lowercased before matching") {
    auto tok = tokenize_words({"Kicked"}, vocab);
    REQUIRE(tok.ids.size() == 2);
    CHECK(tok.ids[0] == vocab.id("kick"));
  }
  SUBCASE("unknown spans collapse to a single UNK") {
    auto tok = tokenize_words({"\xC2\xA7"}, vocab);
    REQUIRE(tok.ids.size() == 1);
    CHECK(tok.ids[0] == vocab.unk_id());
    auto tok2 = tokenize_words({"kickedzzz"}, vocab);
    REQUIRE(tok2.ids.size() == 1);
    CHECK(tok2.ids[0] == vocab.unk_id());
  }
}

TEST_CASE("sentence input layout: CLS words SEP POS SEP") {
  auto vocab = tiny_vocab({"he", "kicked", "the", "idea"});
  auto inst = make_instance("s1", {"He", "kicked", "the", "idea"}, 1, PosTag::Verb, 1);
  auto input = assemble_sentence_input(inst, vocab);

  REQUIRE(input.size() == 8);
  CHECK(input.token_ids[0] == vocab.cls_id());
  CHECK(input.token_ids[1] == vocab.id("he"));
  CHECK(input.token_ids[4] == vocab.id("idea"));
  CHECK(input.token_ids[5] == vocab.sep_id());
  CHECK(input.token_ids[6] == vocab.id("VERB"));
  CHECK(input.token_ids[7] == vocab.sep_id());
  CHECK(input.separators == std::vector<int>{5, 7});

  CHECK(input.pos_mask ==
        std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 1, 0});
  CHECK(input.target_mask ==
        std::vector<std::uint8_t>{0, 0, 1, 0, 0, 0, 0, 0});
  // No commas: the whole sentence is the local context.
  CHECK(input.local_mask ==
        std::vector<std::uint8_t>{0, 1, 1, 1, 1, 0, 0, 0});
}

TEST_CASE("local context covers the comma-delimited clause around the target") {
  const std::vector<std::string> words = {
      "Stars", "appear", ",",   "and",  "the",    "shadows", "are",
      "fallin'", ",",    "you", "can",  "hear",   "my",      "honey",
      "callin'"};
  std::vector<std::string> extra;
  for (const auto& w : words) {
    const std::string lower = normalize(w, PosTag::Other);
    if (std::find(extra.begin(), extra.end(), lower) == extra.end())
      extra.push_back(lower);
  }
  auto vocab = tiny_vocab(extra);

  auto inst = make_instance("honey", words, 13, PosTag::Noun, 1);
  auto input = assemble_sentence_input(inst, vocab);

  // Sentence words occupy positions 1..15; the clause after the second comma
  // ("you" .. "callin'", word indices 9..14) is the local context.
  for (std::size_t w = 0; w < words.size(); ++w) {
    const bool in_clause = w >= 9;
    CHECK(input.local_mask[w + 1] == (in_clause ? 1 : 0));
  }
  CHECK(input.target_mask[13 + 1] == 1);

  SUBCASE("target inside the middle clause") {
    auto mid = make_instance("shadows", words, 5, PosTag::Noun, 0);
    auto mid_input = assemble_sentence_input(mid, vocab);
    for (std::size_t w = 0; w < words.size(); ++w) {
      const bool in_clause = w >= 3 && w <= 7;  // between the two commas
      CHECK(mid_input.local_mask[w + 1] == (in_clause ? 1 : 0));
    }
  }
}

TEST_CASE("masks are length-aligned and pos/target masks never overlap") {
  auto lex = fixture_lexicon();
  auto vocab = tiny_vocab({"stars", "appear", "tonight", ",", "brightly"});
  std::mt19937_64 rng(3);
  for (int round = 0; round < 30; ++round) {
    std::vector<std::string> words;
    const int n = 1 + static_cast<int>(rng() % 8);
    const std::vector<std::string> pool = {"stars", "appear", "tonight", ",", "brightly",
                                           "unseen-word"};
    for (int i = 0; i < n; ++i) words.push_back(pool[rng() % pool.size()]);
    auto inst = make_instance("s", words, rng() % words.size(), PosTag::Noun, 0);
    auto input = assemble_sentence_input(inst, vocab);
    CHECK(input.target_mask.size() == input.size());
    CHECK(input.local_mask.size() == input.size());
    CHECK(input.pos_mask.size() == input.size());
    int target_bits = 0, pos_bits = 0;
    for (std::size_t i = 0; i < input.size(); ++i) {
      CHECK(input.pos_mask[i] * input.target_mask[i] == 0);
      target_bits += input.target_mask[i];
      pos_bits += input.pos_mask[i];
    }
    CHECK(target_bits >= 1);
    CHECK(pos_bits == 1);
  }
}

TEST_CASE("sentence truncation keeps the target or fails loudly") {
  auto vocab = tiny_vocab({"word", "target"});

  std::vector<std::string> words(30, "word");
  words[5] = "target";
  auto early = make_instance("s", words, 5, PosTag::Noun, 0);
  auto input = assemble_sentence_input(early, vocab, /*max_len=*/20);
  CHECK(input.size() == 20);
  CHECK(input.target_mask[6] == 1);
  CHECK(input.token_ids[17] == vocab.sep_id());  // frame survives truncation

  auto late = make_instance("s", words, 25, PosTag::Noun, 0);
  try {
    assemble_sentence_input(late, vocab, /*max_len=*/20);
    FAIL("expected SequenceTooLong");
  } catch (const error& e) {
    CHECK(e.code() == "SequenceTooLong");
  }
}

TEST_CASE("definition input layout: CLS word SEP definition SEP") {
  auto vocab = tiny_vocab({"plant", "an", "organism", "that", "grows"});

  SUBCASE("standard layout") {
    auto input = assemble_definition_input("plant", "an organism that grows", vocab);
    REQUIRE(input.size() == 8);
    CHECK(input.token_ids[0] == vocab.cls_id());
    CHECK(input.token_ids[1] == vocab.id("plant"));
    CHECK(input.token_ids[2] == vocab.sep_id());
    CHECK(input.token_ids[7] == vocab.sep_id());
    CHECK(input.target_mask ==
          std::vector<std::uint8_t>{0, 1, 0, 0, 0, 0, 0, 0});
    CHECK(input.local_mask ==
          std::vector<std::uint8_t>{0, 0, 0, 1, 1, 1, 1, 0});
    for (auto b : input.pos_mask) CHECK(b == 0);
    CHECK(input.separators == std::vector<int>{2, 7});
  }
  SUBCASE("fallback composition uses the word as its own definition") {
    auto input = assemble_definition_input("plant", "plant", vocab);
    REQUIRE(input.size() == 5);
    CHECK(input.token_ids[1] == vocab.id("plant"));
    CHECK(input.token_ids[3] == vocab.id("plant"));
  }
  SUBCASE("one-character word and one-word definition give five positions") {
    auto v2 = tiny_vocab({"a", "article"});
    auto input = assemble_definition_input("a", "article", v2);
    CHECK(input.size() == 5);
  }
  SUBCASE("long definitions are truncated from the right") {
    std::string definition = "grows";
    for (int i = 0; i < 40; ++i) definition += " grows";
    auto input = assemble_definition_input("plant", definition, vocab, /*max_len=*/12);
    CHECK(input.size() == 12);
    CHECK(input.token_ids.back() == vocab.sep_id());
  }
  SUBCASE("empty inputs are rejected") {
    CHECK_THROWS_AS(assemble_definition_input("", "def", vocab), error);
    CHECK_THROWS_AS(assemble_definition_input("plant", "", vocab), error);
  }
}

namespace {

// Position-indexed deterministic encoder: output at position i is
// [i, base - i], independent of ids and masks.
class PositionEncoder : public Encoder {
 public:
  explicit PositionEncoder(double base) : base_(base) {}
  int dim() const override { return 2; }
  std::vector<std::vector<double>> encode(const EncoderInput& input) const override {
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < input.size(); ++i)
      out.push_back({static_cast<double>(i), base_ - static_cast<double>(i)});
    return out;
  }

 private:
  double base_;
};

}  // namespace

TEST_CASE("encode_views pools means over masks and positions") {
  auto vocab = tiny_vocab({"plant", "grows", "big"});
  AugmentedInstance aug;
  aug.base = make_instance("s", {"plant", "grows"}, 0, PosTag::Noun, 0);
  aug.sense_definition = "grows big";
  aug.basic_definition = "grows";
  aug.sense_source = SenseSource::Selected;
  aug.basic_source = BasicSource::Dictionary;

  auto enc = std::make_shared<PositionEncoder>(10.0);
  EncoderStack stack{enc, enc, enc};
  auto views = encode_views(aug, stack, vocab);

  // Sentence input: [CLS] plant grows [SEP] NOUN [SEP] (6 positions).
  // Target "plant" sits at position 1 -> e_t = [1, 9].
  CHECK(views.h_S.size() == 6);
  CHECK(views.e_t == std::vector<double>{1.0, 9.0});

  // Sense input: [CLS] plant [SEP] grows big [SEP] (6 positions).
  // h_c = mean over positions 0..5 = [2.5, 7.5]; e_tc = position 1.
  CHECK(views.h_c == std::vector<double>{2.5, 7.5});
  CHECK(views.e_tc == std::vector<double>{1.0, 9.0});

  // Basic input: [CLS] plant [SEP] grows [SEP] (5 positions) -> mean [2, 8].
  CHECK(views.h_b == std::vector<double>{2.0, 8.0});
  CHECK(views.e_tb == std::vector<double>{1.0, 9.0});
}

TEST_CASE("averaging k identical vectors returns the vector exactly") {
  auto vocab = tiny_vocab({"word"});
  AugmentedInstance aug;
  aug.base = make_instance("s", {"word", "word", "word"}, 1, PosTag::Noun, 0);
  aug.sense_definition = "word word";
  aug.basic_definition = "word";

  // Constant encoder: every position maps to the same vector.
  class ConstEncoder : public Encoder {
   public:
    int dim() const override { return 3; }
    std::vector<std::vector<double>> encode(const EncoderInput& input) const override {
      return std::vector<std::vector<double>>(input.size(), {0.5, -1.25, 3.0});
    }
  };
  auto enc = std::make_shared<ConstEncoder>();
  EncoderStack stack{enc, enc, enc};
  auto views = encode_views(aug, stack, vocab);
  CHECK(views.h_c == std::vector<double>{0.5, -1.25, 3.0});
  CHECK(views.h_b == std::vector<double>{0.5, -1.25, 3.0});
  CHECK(views.e_t == std::vector<double>{0.5, -1.25, 3.0});
}

TEST_CASE("encode_views rejects encoders that disagree on the dimension") {
  auto vocab = tiny_vocab({"word"});
  AugmentedInstance aug;
  aug.base = make_instance("s", {"word"}, 0, PosTag::Noun, 0);
  aug.sense_definition = "word";
  aug.basic_definition = "word";

  auto enc2 = std::make_shared<PositionEncoder>(1.0);
  auto enc16 = std::make_shared<ToyEncoder>(vocab.size(), 16, 32, 1);
  EncoderStack stack{enc2, enc2, enc16};
  try {
    encode_views(aug, stack, vocab);
    FAIL("expected DimensionMismatch");
  } catch (const error& e) {
    CHECK(e.code() == "DimensionMismatch");
  }
}

TEST_CASE("toy encoder is deterministic and honors the mask channels") {
  auto vocab = tiny_vocab({"he", "kicked", "the", "idea"});
  auto inst = make_instance("s", {"He", "kicked", "the", "idea"}, 1, PosTag::Verb, 1);
  auto input = assemble_sentence_input(inst, vocab);

  ToyEncoder a(vocab.size(), 16, 32, 99);
  ToyEncoder b(vocab.size(), 16, 32, 99);
  ToyEncoder c(vocab.size(), 16, 32, 100);

  auto out_a = a.encode(input);
  CHECK(out_a.size() == input.size());
  for (const auto& v : out_a) {
    CHECK(v.size() == 16);
    for (double x : v) CHECK(std::isfinite(x));
  }
  CHECK(out_a == b.encode(input));
  CHECK(out_a != c.encode(input));

  // Flipping a local-context bit must change the encoding.
  auto flipped = input;
  flipped.local_mask[1] ^= 1;
  CHECK(a.encode(flipped) != out_a);

  // Length violations are rejected.
  ToyEncoder small(vocab.size(), 8, 4, 1);
  CHECK_THROWS_AS(small.encode(input), error);
}

TEST_CASE("vocab build, save, load round trip") {
  TempDir tmp;
  AugmentedInstance aug;
  aug.base = make_instance("s", {"He", "Kicked", "the", "idea"}, 1, PosTag::Verb, 1);
  aug.sense_definition = "strike with the foot";
  aug.basic_definition = "hit";
  auto vocab = Vocab::build_from({aug});

  CHECK(vocab.id("[CLS]") >= 0);
  CHECK(vocab.id("kicked") >= 0);  // lowercased
  CHECK(vocab.id("strike") >= 0);
  CHECK(vocab.id("VERB") >= 0);
  CHECK(vocab.id("Kicked") == -1);

  vocab.save(tmp.file("vocab.txt"));
  auto loaded = Vocab::load(tmp.file("vocab.txt"));
  CHECK(loaded.tokens() == vocab.tokens());
  CHECK(loaded.pad_id() == vocab.pad_id());

  SUBCASE("missing specials are rejected") {
    write_text(tmp.file("bad.txt"), "just\nwords\n");
    CHECK_THROWS_AS(Vocab::load(tmp.file("bad.txt")), error);
  }
}
