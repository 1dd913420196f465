#include <cmath>
#include <filesystem>
#include <fstream>

#include "convrank/errors.hpp"
#include "convrank/textproc.hpp"
#include "convrank/rng.hpp"
#include "doctest.h"

using namespace convrank;
using namespace convrank::text;

TEST_CASE("tokenize prefixes words with the agent") {
  Turn t{"user", "Hello!", 0.0};
  const auto tokens = tokenize(t, {});
  REQUIRE(tokens.size() == 1);
  CHECK(tokens[0] == "user|hello");
}

TEST_CASE("tokenize appends entity tokens after the word tokens") {
  // Hand-traced from the tokenization rules.
  Turn t{"newsbot", "Darth Vader returns", 0.0};
  const auto tokens = tokenize(t, {"darth_vader"});
  const std::vector<std::string> expected{"newsbot|darth", "newsbot|vader", "newsbot|returns",
                                          "ENT|darth_vader"};
  CHECK(tokens == expected);
}

TEST_CASE("tokenize caps word tokens at 30 before appending entities") {
  std::string long_text;
  for (int i = 0; i < 40; ++i) long_text += "word" + std::to_string(i) + " ";
  Turn t{"user", long_text, 0.0};
  const auto tokens = tokenize(t, {"some_entity"});
  CHECK(tokens.size() == kMaxUtteranceTokens + 1);
  CHECK(tokens.back() == "ENT|some_entity");
  CHECK(tokens[29] == "user|word29");
}

TEST_CASE("tokenize of empty user text yields nothing") {
  CHECK(tokenize(Turn{"user", "", 0.0}, {}).empty());
}

TEST_CASE("tokenize is idempotent on its normalized word stream") {
  // Re-tokenizing the normalized text reproduces the same words.
  const std::string text = "Mixed CASE, with punct!! and  spaces";
  const auto once = word_tokens(text);
  std::string joined;
  for (const auto& w : once) joined += w + " ";
  CHECK(word_tokens(joined) == once);
}

TEST_CASE("vocabulary keeps the most frequent tokens plus specials") {
  std::vector<std::pair<std::string, std::size_t>> counts;
  for (int i = 0; i < 10; ++i) counts.emplace_back("tok" + std::to_string(i), 5);
  const Vocabulary v = Vocabulary::build(counts, kDefaultVocabSize);
  CHECK(v.size() == 12);  // 10 tokens + pad + unk
  CHECK(v.encode("tok3") >= 2);
  CHECK(v.encode("missing") == Vocabulary::kUnkId);
  CHECK(v.decode(Vocabulary::kPadId) == "<pad>");
}

TEST_CASE("vocabulary tie at the cutoff keeps the lexicographically smaller token") {
  std::vector<std::pair<std::string, std::size_t>> counts{
      {"zed", 3}, {"apple", 3}, {"high", 10}};
  const Vocabulary v = Vocabulary::build(counts, 4);  // room for 2 tokens
  CHECK(v.contains("high"));
  CHECK(v.contains("apple"));
  CHECK_FALSE(v.contains("zed"));
}

TEST_CASE("vocabulary encode/decode is the identity on in-vocabulary tokens") {
  std::vector<std::pair<std::string, std::size_t>> counts{
      {"alpha", 3}, {"beta", 2}, {"gamma", 7}};
  const Vocabulary v = Vocabulary::build(counts, 100);
  for (const auto& tok : {"alpha", "beta", "gamma"}) CHECK(v.decode(v.encode(tok)) == tok);
}

TEST_CASE("corpus-level vocabulary unifies word-agent and entity tokens") {
  convrank::Corpus corpus;
  convrank::Dialogue d;
  d.id = "v";
  d.turns = {convrank::Turn{"user", "tell me about Star Wars", 1.0},
             convrank::Turn{"newsbot", "Star Wars is a saga", 2.0},
             convrank::Turn{"user", "cool", 3.0}};
  corpus.dialogues.push_back(d);
  const Vocabulary v = build_vocab(corpus, default_annotator(), 1000);
  CHECK(v.contains("user|tell"));
  CHECK(v.contains("newsbot|saga"));
  CHECK(v.contains("ENT|star_wars"));  // unified id space
  CHECK_THROWS_AS(build_vocab(convrank::Corpus{}, default_annotator(), 1000),
                  convrank::DataError);
}

TEST_CASE("vocabulary build on empty counts fails") {
  CHECK_THROWS_AS(Vocabulary::build({}, 100), DataError);
}

TEST_CASE("entities: capitalization heuristic") {
  const auto& stop = default_stopwords();
  const Gazetteer empty;
  const auto ents = extract_entities("I met Harry Potter yesterday", stop, empty);
  REQUIRE(ents.size() == 1);
  CHECK(ents[0] == "harry_potter");
  CHECK(extract_entities("hello there", stop, empty).empty());
}

TEST_CASE("entities: gazetteer matches lowercase mentions") {
  const auto& stop = default_stopwords();
  Gazetteer g(std::vector<std::string>{"star wars"});
  const auto ents = extract_entities("tell me about star wars", stop, g);
  REQUIRE(ents.size() == 1);
  CHECK(ents[0] == "star_wars");
}

TEST_CASE("entities contain no uppercase and no spaces") {
  const auto& stop = default_stopwords();
  const Gazetteer g(default_gazetteer_entries());
  for (const auto* s : {"The Grand Canyon Is Deep. I Saw It!", "MiXeD CaSe Words",
                        "star wars and Darth Vader"}) {
    for (const auto& e : extract_entities(s, stop, g)) {
      for (const char c : e) {
        CHECK_FALSE(std::isupper(static_cast<unsigned char>(c)));
        CHECK(c != ' ');
      }
    }
  }
}

TEST_CASE("sentiment: a canonical feedback phrase scores clearly positive") {
  const auto& lex = default_lexicon();
  CHECK(sentiment_score("great , thank you", lex) > 0.4);
}

TEST_CASE("sentiment: empty text scores zero") {
  CHECK(sentiment_score("", default_lexicon()) == 0.0);
}

TEST_CASE("sentiment: negation flips; value matches the rule-trace oracle") {
  const auto& lex = default_lexicon();
  const double pos = sentiment_score("good", lex);
  const double neg = sentiment_score("not good", lex);
  CHECK(pos > 0.0);
  CHECK(neg < 0.0);
  // Oracle: single flipped valence pushed through x / sqrt(x^2 + 15).
  const double v = lex.valence.at("good");
  const double expected = -v / std::sqrt(v * v + 15.0);
  CHECK(neg == doctest::Approx(expected).epsilon(1e-12));
  CHECK(pos == doctest::Approx(-expected).epsilon(1e-12));
}

TEST_CASE("sentiment: booster scales the following valence") {
  const auto& lex = default_lexicon();
  CHECK(sentiment_score("very good", lex) > sentiment_score("good", lex));
  CHECK(sentiment_score("slightly good", lex) < sentiment_score("good", lex));
}

TEST_CASE("sentiment: contraction negation") {
  const auto& lex = default_lexicon();
  CHECK(sentiment_score("isn't good", lex) < 0.0);
}

TEST_CASE("sentiment is bounded and monotone in a fixed positive term") {
  const auto& lex = default_lexicon();
  convrank::Rng rng(99);
  std::vector<std::string> words{"great", "bad", "not", "very", "table", "idea", "boring",
                                 "awesome", "hmm", "thanks"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string s;
    const int n = 1 + static_cast<int>(rng.bounded(12));
    for (int i = 0; i < n; ++i) s += words[rng.bounded(words.size())] + " ";
    const double score = sentiment_score(s, lex);
    CHECK(score >= -1.0);
    CHECK(score <= 1.0);
    // Appending "great" never decreases the score, absent negators in its
    // scope; the neutral padding keeps trailing modifiers out of range.
    CHECK(sentiment_score(s + " table chair lamp great", lex) >= score);
  }
}

TEST_CASE("feedback detector: whitelist, blacklist and sentiment routing") {
  const FeedbackDetector d = default_feedback_detector();
  CHECK(d.is_positive_feedback("that's pretty cool"));
  CHECK(d.is_positive_feedback("great, thank you"));
  CHECK_FALSE(d.is_positive_feedback("no"));
  CHECK_FALSE(d.is_positive_feedback("tell me about star wars"));
  CHECK(d.is_negative_feedback("that's boring"));
  CHECK_FALSE(d.is_negative_feedback("okay"));
}

TEST_CASE("lexicon TSV round trip") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "convrank_lex_test.tsv").string();
  {
    std::ofstream out(path);
    out << "# comment\n";
    out << "good\t0.7\n";
    out << "not\t0\tnegation\n";
    out << "very\t0.25\tbooster\n";
  }
  const SentimentLexicon lex = load_lexicon_tsv(path);
  CHECK(lex.valence.at("good") == doctest::Approx(0.7));
  CHECK(lex.negations.count("not") == 1);
  CHECK(lex.boosters.at("very") == doctest::Approx(0.25));
  std::filesystem::remove(path);
}
