#ifndef METDET_TESTS_FIXTURES_HPP
#define METDET_TESTS_FIXTURES_HPP

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "metdet/corpus.hpp"
#include "metdet/lexicon.hpp"

namespace metdet::testing {

// Unique scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<unsigned> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    path = base / ("metdet_test_" + std::to_string(::getpid()) + "_" +
                   std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path file(const std::string& name) const { return path / name; }
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

inline CorpusInstance make_instance(std::string id, std::vector<std::string> tokens,
                                    std::size_t target, PosTag pos, int label) {
  CorpusInstance inst;
  inst.sentence_id = std::move(id);
  inst.tokens = std::move(tokens);
  inst.target_index = target;
  inst.pos_tag = pos;
  inst.label = label;
  return inst;
}

// Desk-scale sense inventory covering the words used throughout the tests.
inline LexiconSnapshot fixture_lexicon() {
  LexiconSnapshot lex;
  lex.add_gloss("plant", PosTag::Noun, "Buildings for carrying on industrial labor.",
                "plant.n.01", 0);
  lex.add_gloss("plant", PosTag::Noun,
                "(botany) a living organism lacking the power of locomotion.",
                "plant.n.02", 1);
  lex.add_gloss("plant", PosTag::Verb,
                "Put or set seeds, seedlings, or young plants into the ground.",
                "plant.v.01", 0);
  lex.add_gloss("honey", PosTag::Noun, "A sweet yellow liquid produced by bees.",
                "honey.n.01", 0);
  lex.add_gloss("honey", PosTag::Noun, "A beloved person; used as terms of endearment.",
                "honey.n.02", 1);
  lex.add_gloss("jump", PosTag::Verb, "Move forward by leaps and bounds.", "jump.v.01", 0);
  lex.add_gloss("jump", PosTag::Verb, "Enter eagerly into.", "jump.v.02", 1);
  lex.add_gloss("star", PosTag::Noun,
                "A celestial body visible at night as a point of light.", "star.n.01", 0);
  lex.add_gloss("star", PosTag::Noun, "A performer who receives top billing.",
                "star.n.02", 1);
  lex.add_gloss("kick", PosTag::Verb, "Strike sharply with the foot.", "kick.v.01", 0);
  lex.add_gloss("kick", PosTag::Verb, "Stop consuming or doing something habitual.",
                "kick.v.02", 1);

  lex.add_basic("plant",
                "An organism that is not an animal, especially an organism capable "
                "of photosynthesis.");
  lex.add_basic("honey",
                "A viscous, sweet fluid produced from plant nectar by bees.");
  lex.add_basic("jump",
                "To propel oneself rapidly upward, downward and/or in any horizontal "
                "direction with a sudden movement.");
  lex.add_basic("star", "A luminous celestial body seen as a point of light in the sky.");
  lex.add_basic("kick", "To strike or hit with the foot or feet.");
  return lex;
}

}  // namespace metdet::testing

#endif
