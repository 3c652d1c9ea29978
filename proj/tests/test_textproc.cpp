#include <string>
#include <vector>

#include "doctest.h"

#include "fse/textproc.hpp"
#include "test_support.hpp"

using namespace fse;

TEST_SUITE_BEGIN("textproc");

TEST_CASE("reserved ids and surface strings") {
  const auto& specials = special_tokens();
  REQUIRE(specials.size() == 5);
  CHECK(specials[Vocab::kPad] == "[PAD]");
  CHECK(specials[Vocab::kUnk] == "[UNK]");
  CHECK(specials[Vocab::kBos] == "[BOS]");
  CHECK(specials[Vocab::kEos] == "[EOS]");
  CHECK(specials[Vocab::kSep] == "[SEP]");
}

TEST_CASE("vocabulary orders words by frequency then spelling") {
  const std::vector<std::string> corpus = {"the cat sat", "the cat", "dog"};
  const Vocab vocab = build_vocab(corpus, 1);

  REQUIRE(vocab.size() == 9);  // 5 specials + cat, the, dog, sat
  CHECK(vocab.token_to_id.at("cat") == 5);  // freq 2, "cat" < "the"
  CHECK(vocab.token_to_id.at("the") == 6);
  CHECK(vocab.token_to_id.at("dog") == 7);  // freq 1, "dog" < "sat"
  CHECK(vocab.token_to_id.at("sat") == 8);
  CHECK(vocab.id_to_token[5] == "cat");
  CHECK(vocab.id_to_token[8] == "sat");
  CHECK(vocab.min_freq == 1);

  SUBCASE("document order does not matter") {
    const std::vector<std::string> shuffled = {"dog", "the cat", "the cat sat"};
    CHECK(build_vocab(shuffled, 1).id_to_token == vocab.id_to_token);
  }

  SUBCASE("min_freq prunes rare words") {
    const Vocab pruned = build_vocab(corpus, 2);
    CHECK(pruned.size() == 7);  // specials + cat, the
    CHECK(pruned.token_to_id.contains("cat"));
    CHECK_FALSE(pruned.token_to_id.contains("dog"));
  }

  SUBCASE("min_freq below one is rejected") {
    CHECK_THROWS_AS(build_vocab(corpus, 0), std::domain_error);
  }

  SUBCASE("empty corpus keeps only the specials") {
    const Vocab empty = build_vocab(std::vector<std::string>{}, 1);
    CHECK(empty.size() == 5);
  }
}

TEST_CASE("special surface strings never count as corpus words") {
  const std::vector<std::string> corpus = {"a [SEP] b [SEP] c", "[PAD] [UNK] [BOS] [EOS]"};
  const Vocab vocab = build_vocab(corpus, 1);
  CHECK(vocab.size() == 8);  // specials + a, b, c
  for (const auto& special : special_tokens()) {
    CHECK(vocab.token_to_id.at(special) < 5);
  }
}

TEST_CASE("lowercase flag folds corpus words when requested") {
  const std::vector<std::string> corpus = {"The THE the", "Cat"};

  const Vocab folded = build_vocab(corpus, 1, true);
  CHECK(folded.token_to_id.contains("the"));
  CHECK_FALSE(folded.token_to_id.contains("The"));
  CHECK(folded.lowercase);

  const Vocab exact = build_vocab(corpus, 1, false);
  CHECK(exact.token_to_id.contains("The"));
  CHECK(exact.token_to_id.contains("THE"));
  CHECK(exact.token_to_id.contains("the"));
  CHECK_FALSE(exact.lowercase);
}

TEST_CASE("encode maps words, specials, and unknowns") {
  const std::vector<std::string> corpus = {"no pleural effusion", "pleural effusion stable"};
  const Vocab vocab = build_vocab(corpus, 1);
  // freq: effusion 2, pleural 2, no 1, stable 1 -> ids 5..8

  const TokenSequence sequence = encode(vocab, "no pleural effusion [SEP] stable mystery");
  REQUIRE(sequence.size() == 6);
  CHECK(sequence.ids[0] == vocab.token_to_id.at("no"));
  CHECK(vocab.token_to_id.at("effusion") == 5);  // ties break lexicographically
  CHECK(vocab.token_to_id.at("pleural") == 6);
  CHECK(sequence.ids[1] == vocab.token_to_id.at("pleural"));
  CHECK(sequence.ids[2] == vocab.token_to_id.at("effusion"));
  CHECK(sequence.ids[3] == Vocab::kSep);
  CHECK(sequence.ids[4] == vocab.token_to_id.at("stable"));
  CHECK(sequence.ids[5] == Vocab::kUnk);

  SUBCASE("empty text encodes to nothing") {
    CHECK(encode(vocab, "").size() == 0);
    CHECK(encode(vocab, "   ").size() == 0);
  }

  SUBCASE("lowercase vocab folds query words but not specials") {
    const Vocab folded = build_vocab(std::vector<std::string>{"edema present"}, 1, true);
    const TokenSequence ids = encode(folded, "EDEMA [SEP]");
    REQUIRE(ids.size() == 2);
    CHECK(ids.ids[0] == folded.token_to_id.at("edema"));
    CHECK(ids.ids[1] == Vocab::kSep);
  }
}

TEST_CASE("decode renders ids, drops padding, and flags unknowns") {
  const Vocab vocab = build_vocab(std::vector<std::string>{"alpha beta"}, 1);
  const std::size_t alpha = vocab.token_to_id.at("alpha");
  const std::size_t beta = vocab.token_to_id.at("beta");

  CHECK(decode(vocab, {{alpha, beta}}) == "alpha beta");
  CHECK(decode(vocab, {{Vocab::kPad, alpha, Vocab::kPad, beta, Vocab::kPad}}) == "alpha beta");
  CHECK(decode(vocab, {{Vocab::kUnk, alpha}}) == "[UNK] alpha");
  CHECK(decode(vocab, {{Vocab::kBos, alpha, Vocab::kEos}}) == "[BOS] alpha [EOS]");
  CHECK(decode(vocab, {{}}).empty());
  CHECK_THROWS_AS(decode(vocab, {{vocab.size()}}), std::out_of_range);
}

TEST_CASE("encode and decode round trip in-vocabulary text") {
  const std::vector<std::string> corpus = {"no pleural effusion [SEP] stable lungs"};
  const Vocab vocab = build_vocab(corpus, 1);
  const std::string text = "no pleural effusion [SEP] stable lungs";
  CHECK(decode(vocab, encode(vocab, text)) == text);
}

TEST_CASE("vocabulary files round trip") {
  const auto dir = testing::scratch_dir("vocab");
  const std::vector<std::string> corpus = {"the cat sat", "the cat", "dog"};
  const Vocab vocab = build_vocab(corpus, 2);

  const auto path = dir / "vocab.json";
  save_vocab(vocab, path);
  const Vocab loaded = load_vocab(path);

  CHECK(loaded.token_to_id == vocab.token_to_id);
  CHECK(loaded.id_to_token == vocab.id_to_token);
  CHECK(loaded.min_freq == vocab.min_freq);

  SUBCASE("file is one JSON object with the two persisted fields") {
    const std::string raw = testing::read_file(path);
    CHECK(raw.find("\"min_freq\"") != std::string::npos);
    CHECK(raw.find("\"tokens\"") != std::string::npos);
    CHECK(raw.find("[PAD]") == std::string::npos);  // specials are implied
  }

  SUBCASE("unreadable and malformed files raise") {
    CHECK_THROWS_AS(load_vocab(dir / "missing.json"), std::runtime_error);
    testing::write_file(dir / "broken.json", "[1, 2, 3]");
    CHECK_THROWS_AS(load_vocab(dir / "broken.json"), std::runtime_error);
  }
}

TEST_SUITE_END();
