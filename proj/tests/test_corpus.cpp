#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include "convrank/corpus.hpp"
#include "convrank/errors.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace convrank;
using testutil::corpus_of_lengths;
using testutil::make_dialogue;
using testutil::temp_path;

namespace {

// Independent oracle: nearest-rank percentile over an explicit list.
int oracle_p95(std::vector<int> lengths) {
  std::sort(lengths.begin(), lengths.end());
  const std::size_t rank =
      static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(lengths.size())));
  return lengths[rank - 1];
}

std::set<int> kept_lengths(const Corpus& c) {
  std::set<int> out;
  for (const auto& d : c.dialogues) out.insert(d.length());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

TEST_CASE("ingest parses the two-line fixture") {
  const std::string path = temp_path("convrank_ingest1.jsonl");
  {
    std::ofstream out(path);
    out << R"({"format_version":1,"type":"transcripts"})" << "\n";
    out << R"({"dialogue_id":"a","rating":4,"turns":[)"
        << R"({"agent":"user","text":"hi","timestamp":1.0},)"
        << R"({"agent":"bot1","text":"hello","timestamp":2.0},)"
        << R"({"agent":"user","text":"bye","timestamp":3.0},)"
        << R"({"agent":"bot1","text":"see you","timestamp":4.5}]})" << "\n";
    out << R"({"dialogue_id":"b","rating":null,"turns":[)"
        << R"({"agent":"user","text":"one","timestamp":1},)"
        << R"({"agent":"bot2","text":"two","timestamp":2},)"
        << R"({"agent":"user","text":"three","timestamp":3},)"
        << R"({"agent":"bot2","text":"four","timestamp":4},)"
        << R"({"agent":"user","text":"five","timestamp":5},)"
        << R"({"agent":"bot2","text":"six","timestamp":6}]})" << "\n";
  }
  const Corpus c = ingest_transcripts(path);
  REQUIRE(c.size() == 2);
  CHECK(c.dialogues[0].length() == 4);
  CHECK(c.dialogues[1].length() == 6);
  CHECK(c.dialogues[0].rating == 4);
  CHECK_FALSE(c.dialogues[1].rating.has_value());
  std::filesystem::remove(path);
}

TEST_CASE("ingest reports the line number of a record missing turns") {
  const std::string path = temp_path("convrank_ingest2.jsonl");
  {
    std::ofstream out(path);
    out << R"({"format_version":1})" << "\n";
    out << R"({"dialogue_id":"ok","turns":[{"agent":"user","text":"x","timestamp":1}]})" << "\n";
    out << R"({"dialogue_id":"broken"})" << "\n";
  }
  try {
    ingest_transcripts(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
    CHECK(std::string(e.what()).find("turns") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("ingest rejects duplicate dialogue ids") {
  const std::string path = temp_path("convrank_ingest3.jsonl");
  {
    std::ofstream out(path);
    out << R"({"format_version":1})" << "\n";
    for (int i = 0; i < 2; ++i)
      out << R"({"dialogue_id":"same","turns":[{"agent":"user","text":"x","timestamp":1}]})"
          << "\n";
  }
  CHECK_THROWS_AS(ingest_transcripts(path), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("ingest -> serialize -> ingest round-trips to an identical corpus") {
  Corpus c;
  c.dialogues.push_back(make_dialogue("d0", 5, 3));
  c.dialogues.push_back(make_dialogue("d1", 4));
  c.dialogues.push_back(make_dialogue("d2", 7, 5, "factbot"));
  c.dialogues[2].turns[1].text = "text with unicode éü and \"quotes\"";
  c.dialogues[2].turns[1].timestamp = 1005.1234567891234;

  const std::string p1 = temp_path("convrank_rt1.jsonl");
  const std::string p2 = temp_path("convrank_rt2.jsonl");
  write_transcripts(c, p1);
  const Corpus c2 = ingest_transcripts(p1);
  REQUIRE(c2.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c.dialogues[i] == c2.dialogues[i]);
  // And the serialized bytes are stable.
  write_transcripts(c2, p2);
  CHECK(testutil::slurp(p1) == testutil::slurp(p2));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

// ---------------------------------------------------------------------------
// Filtering
// ---------------------------------------------------------------------------

TEST_CASE("filter on lengths 1..100: strict removes >= p95, default removes > p95") {
  std::vector<int> lengths(100);
  for (int i = 0; i < 100; ++i) lengths[i] = i + 1;
  CHECK(oracle_p95(lengths) == 95);

  const Corpus corpus = corpus_of_lengths(lengths);
  FilterConfig strict;
  strict.percentile_strict = true;
  FilterReport report;
  const Corpus f_strict = filter_corpus(corpus, strict, &report);
  CHECK(report.length_cap == 95);
  CHECK(f_strict.size() == 92);  // keeps 3..94
  std::set<int> expected;
  for (int i = 3; i <= 94; ++i) expected.insert(i);
  CHECK(kept_lengths(f_strict) == expected);

  const Corpus f_default = filter_corpus(corpus, FilterConfig{});
  CHECK(f_default.size() == 93);  // keeps 3..95
}

TEST_CASE("constant-length corpus: default keeps all, the literal rule removes all") {
  const Corpus corpus = corpus_of_lengths(std::vector<int>(20, 5));
  FilterReport report;
  const Corpus kept = filter_corpus(corpus, FilterConfig{}, &report);
  CHECK(kept.size() == 20);
  CHECK(report.length_cap == 5);

  FilterConfig strict;
  strict.percentile_strict = true;
  const Corpus removed = filter_corpus(corpus, strict, &report);
  CHECK(removed.size() == 0);
  CHECK(report.removed_long == 20);
}

TEST_CASE("dialogues shorter than 3 turns are removed") {
  const Corpus corpus = corpus_of_lengths({2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  FilterReport report;
  const Corpus kept = filter_corpus(corpus, FilterConfig{}, &report);
  CHECK(report.removed_short == 1);
  for (const auto& d : kept.dialogues) CHECK(d.length() >= 3);
}

TEST_CASE("filter_corpus is idempotent") {
  std::vector<int> lengths(100);
  for (int i = 0; i < 100; ++i) lengths[i] = i + 1;
  const Corpus corpus = corpus_of_lengths(lengths);
  const Corpus once = filter_corpus(corpus, FilterConfig{});
  const Corpus twice = filter_corpus(once, FilterConfig{});
  REQUIRE(once.size() == twice.size());
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(once.dialogues[i] == twice.dialogues[i]);
}

TEST_CASE("blacklist strips turns and drops emptied dialogues") {
  Corpus corpus;
  corpus.dialogues.push_back(make_dialogue("social", 6, std::nullopt, "newsbot"));
  // A dialogue consisting solely of quizbot turns.
  Dialogue quiz;
  quiz.id = "quiz";
  for (int i = 0; i < 4; ++i)
    quiz.turns.push_back(Turn{"quizbot", "QUIZ question " + std::to_string(i), 100.0 + i});
  corpus.dialogues.push_back(quiz);
  // A mixed dialogue that shrinks below 3 turns.
  Dialogue mixed;
  mixed.id = "mixed";
  mixed.turns = {Turn{"user", "hi", 1.0}, Turn{"quizbot", "QUIZ", 2.0}, Turn{"quizbot", "QUIZ", 3.0},
                 Turn{"newsbot", "hello there", 4.0}};
  corpus.dialogues.push_back(mixed);

  FilterConfig config;
  config.bot_blacklist = {"quizbot"};
  FilterReport report;
  const Corpus kept = filter_corpus(corpus, config, &report);
  CHECK(report.removed_emptied == 1);
  CHECK(report.turns_removed == 6);
  CHECK(report.removed_short == 1);  // "mixed" shrank to 2 turns
  REQUIRE(kept.size() == 1);
  CHECK(kept.dialogues[0].id == "social");
}

TEST_CASE("filter of an empty corpus is an error") {
  CHECK_THROWS_AS(filter_corpus(Corpus{}, FilterConfig{}), DataError);
}

// ---------------------------------------------------------------------------
// Target normalization
// ---------------------------------------------------------------------------

TEST_CASE("rating targets map 1..5 onto {0, .25, .5, .75, 1}") {
  Corpus c;
  for (int r = 1; r <= 5; ++r)
    c.dialogues.push_back(make_dialogue("r" + std::to_string(r), 4, r));
  c.dialogues.push_back(make_dialogue("unrated", 4));
  const auto targets = normalize_targets(c, Signal::rating);
  CHECK(targets.size() == 5);  // only rated dialogues are mapped
  CHECK(targets.at("r1") == doctest::Approx(0.0));
  CHECK(targets.at("r2") == doctest::Approx(0.25));
  CHECK(targets.at("r3") == doctest::Approx(0.5));
  CHECK(targets.at("r4") == doctest::Approx(0.75));
  CHECK(targets.at("r5") == doctest::Approx(1.0));
  // rating 2 falls below the 0.3 negative threshold
  CHECK(targets.at("r2") < kNegativeThreshold);
}

TEST_CASE("length targets are min-max normalized over the corpus") {
  const Corpus c = corpus_of_lengths({3, 10, 17});
  const auto targets = normalize_targets(c, Signal::length);
  CHECK(targets.at("d0") == doctest::Approx(0.0));
  CHECK(targets.at("d1") == doctest::Approx(0.5));
  CHECK(targets.at("d2") == doctest::Approx(1.0));
}

TEST_CASE("degenerate length range is an error") {
  const Corpus c = corpus_of_lengths({5, 5, 5});
  CHECK_THROWS_AS(normalize_targets(c, Signal::length), DataError);
}

// ---------------------------------------------------------------------------
// Context construction
// ---------------------------------------------------------------------------

TEST_CASE("make_context keeps the 3 most recent turns per side in order") {
  Dialogue d = make_dialogue("ctx", 12);
  const text::Annotator annotator = text::default_annotator();
  const RankingContext ctx = make_context(d, 11, annotator);
  REQUIRE(ctx.turns.size() == 6);
  CHECK(ctx.turn_index == 11);
  // turns 5..10 of the dialogue, in original order
  for (std::size_t i = 0; i < 6; ++i) CHECK(ctx.turns[i].text == d.turns[5 + i].text);
  int users = 0;
  int systems = 0;
  for (const auto& t : ctx.turns) (t.is_user() ? users : systems)++;
  CHECK(users == 3);
  CHECK(systems == 3);
  CHECK(ctx.entities.size() == ctx.turns.size());
}

TEST_CASE("make_context at dialogue start is shorter") {
  Dialogue d = make_dialogue("ctx2", 6);
  const text::Annotator annotator = text::default_annotator();
  CHECK(make_context(d, 0, annotator).turns.empty());
  CHECK(make_context(d, 1, annotator).turns.size() == 1);
  CHECK(make_context(d, 3, annotator).turns.size() == 3);
}

// ---------------------------------------------------------------------------
// Dataset construction
// ---------------------------------------------------------------------------

namespace {

// 40 positive dialogues with 10 system turns each (supply 400) and 30
// negative with 10 each (supply 300), via the rating signal.
Corpus balanced_probe_corpus() {
  Corpus c;
  for (int i = 0; i < 40; ++i)
    c.dialogues.push_back(make_dialogue("pos" + std::to_string(i), 20, 5));
  for (int i = 0; i < 30; ++i)
    c.dialogues.push_back(make_dialogue("neg" + std::to_string(i), 20, 1));
  return c;
}

}  // namespace

TEST_CASE("build_dataset: feasible size returns an exactly balanced set") {
  const Corpus corpus = balanced_probe_corpus();
  const text::Annotator annotator = text::default_annotator();
  const Dataset ds = build_dataset(corpus, annotator, BuildConfig{Signal::rating, 500, 9});

  CHECK(ds.size() == 500);
  CHECK(ds.train.size() == 400);
  CHECK(ds.dev.size() == 50);
  CHECK(ds.test.size() == 50);

  std::size_t pos = 0;
  std::size_t neg = 0;
  auto count = [&](const std::vector<TrainingInstance>& v) {
    for (const auto& inst : v) (inst.polarity == Polarity::positive ? pos : neg)++;
  };
  count(ds.train);
  count(ds.dev);
  count(ds.test);
  CHECK(pos == 250);
  CHECK(neg == 250);
}

TEST_CASE("build_dataset: infeasible size reports the achievable maximum") {
  const Corpus corpus = balanced_probe_corpus();  // 400 pos / 300 neg supply
  const text::Annotator annotator = text::default_annotator();
  try {
    build_dataset(corpus, annotator, BuildConfig{Signal::rating, 700, 9});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("600") != std::string::npos);  // max balanced size
    CHECK(msg.find("300") != std::string::npos);  // per side
  }
}

TEST_CASE("build_dataset invariants: thresholds, balance, split hygiene") {
  const Corpus corpus = balanced_probe_corpus();
  const text::Annotator annotator = text::default_annotator();
  const Dataset ds = build_dataset(corpus, annotator, BuildConfig{Signal::rating, 600, 1});

  std::set<std::string> train_ids, dev_ids, test_ids;
  auto scan = [&](const std::vector<TrainingInstance>& v, std::set<std::string>& ids) {
    for (const auto& inst : v) {
      ids.insert(inst.source_dialogue);
      CHECK((inst.polarity == Polarity::positive) == (inst.target > kPositiveThreshold));
      CHECK((inst.polarity == Polarity::negative) == (inst.target < kNegativeThreshold));
      CHECK(inst.context.turns.size() <= 6);
    }
  };
  scan(ds.train, train_ids);
  scan(ds.dev, dev_ids);
  scan(ds.test, test_ids);

  for (const auto& id : train_ids) {
    CHECK(dev_ids.count(id) == 0);
    CHECK(test_ids.count(id) == 0);
  }
  for (const auto& id : dev_ids) CHECK(test_ids.count(id) == 0);
}

TEST_CASE("build_dataset: mid-band dialogues contribute nothing") {
  Corpus corpus = balanced_probe_corpus();
  corpus.dialogues.push_back(make_dialogue("mid", 20, 3));  // target 0.5
  const text::Annotator annotator = text::default_annotator();
  const Dataset ds = build_dataset(corpus, annotator, BuildConfig{Signal::rating, 500, 4});
  auto absent = [&](const std::vector<TrainingInstance>& v) {
    for (const auto& inst : v) CHECK(inst.source_dialogue != "mid");
  };
  absent(ds.train);
  absent(ds.dev);
  absent(ds.test);
}

TEST_CASE("build_dataset is deterministic under the seed") {
  const Corpus corpus = balanced_probe_corpus();
  const text::Annotator annotator = text::default_annotator();
  const Dataset a = build_dataset(corpus, annotator, BuildConfig{Signal::rating, 200, 7});
  const Dataset b = build_dataset(corpus, annotator, BuildConfig{Signal::rating, 200, 7});
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].source_dialogue == b.train[i].source_dialogue);
    CHECK(a.train[i].context.turn_index == b.train[i].context.turn_index);
  }
  const Dataset c = build_dataset(corpus, annotator, BuildConfig{Signal::rating, 200, 8});
  bool differs = false;
  for (std::size_t i = 0; i < a.train.size() && i < c.train.size(); ++i)
    differs |= a.train[i].source_dialogue != c.train[i].source_dialogue ||
               a.train[i].context.turn_index != c.train[i].context.turn_index;
  CHECK(differs);
}

TEST_CASE("build_dataset rejects odd sizes") {
  const Corpus corpus = balanced_probe_corpus();
  const text::Annotator annotator = text::default_annotator();
  CHECK_THROWS_AS(build_dataset(corpus, annotator, BuildConfig{Signal::rating, 501, 9}),
                  ConfigError);
}

TEST_CASE("dataset file round trip") {
  const Corpus corpus = balanced_probe_corpus();
  const text::Annotator annotator = text::default_annotator();
  const Dataset ds = build_dataset(corpus, annotator, BuildConfig{Signal::rating, 100, 3});
  const std::string path = temp_path("convrank_ds.jsonl");
  write_dataset(ds, path);
  const Dataset rt = read_dataset(path);
  REQUIRE(rt.train.size() == ds.train.size());
  REQUIRE(rt.dev.size() == ds.dev.size());
  REQUIRE(rt.test.size() == ds.test.size());
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    CHECK(rt.train[i].target == ds.train[i].target);
    CHECK(rt.train[i].source_dialogue == ds.train[i].source_dialogue);
    CHECK(rt.train[i].response.text == ds.train[i].response.text);
    CHECK(rt.train[i].context.turns.size() == ds.train[i].context.turns.size());
  }
  std::filesystem::remove(path);
}

// ---------------------------------------------------------------------------
// Feedback extraction
// ---------------------------------------------------------------------------

TEST_CASE("read_dataset rejects instances whose polarity contradicts the target") {
  const std::string path = temp_path("convrank_badpol.jsonl");
  {
    std::ofstream out(path);
    out << R"({"format_version":1,"type":"dataset"})" << "\n";
    out << R"({"split":"train","target":0.9,"polarity":"negative","source_dialogue":"x",)"
        << R"("context":{"turns":[],"entities":[],"turn_index":0},)"
        << R"("response":{"bot":"b","text":"t","entities":[],"sentiment":0.0}})" << "\n";
  }
  CHECK_THROWS_AS(read_dataset(path), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("extract_feedback_set emits one tuple per flagged turn with cross-dialogue negatives") {
  Corpus corpus;
  // Seven dialogues, each with exactly one positive feedback turn after a
  // system turn.
  for (int i = 0; i < 7; ++i) {
    Dialogue d;
    d.id = "fb" + std::to_string(i);
    d.turns = {Turn{"user", "tell me something", 1.0},
               Turn{"newsbot", "here is a fact about topic " + std::to_string(i), 2.0},
               Turn{"user", "that's pretty cool", 3.0},
               Turn{"newsbot", "more content " + std::to_string(i), 4.0}};
    corpus.dialogues.push_back(std::move(d));
  }
  const text::Annotator annotator = text::default_annotator();
  const text::FeedbackDetector detector = text::default_feedback_detector();
  FeedbackExtractionReport report;
  const auto tuples = extract_feedback_set(corpus, annotator, detector, 5, &report);

  CHECK(report.flagged_turns == 7);
  REQUIRE(tuples.size() == 7);
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    // good response is the system turn right before the feedback
    CHECK(tuples[i].good_response.text ==
          "here is a fact about topic " + std::to_string(i));
    // bad response comes from a different dialogue (exhaustive check)
    CHECK(tuples[i].bad_response.text.find("topic " + std::to_string(i)) == std::string::npos);
    CHECK(tuples[i].good_response.text != tuples[i].bad_response.text);
  }
}

TEST_CASE("feedback turn at dialogue start is skipped and counted") {
  Corpus corpus;
  Dialogue d;
  d.id = "startfb";
  d.turns = {Turn{"user", "that's pretty cool", 1.0},
             Turn{"newsbot", "some reply", 2.0},
             Turn{"user", "ok", 3.0}};
  corpus.dialogues.push_back(d);
  Dialogue other = make_dialogue("other", 4);
  corpus.dialogues.push_back(other);

  const text::Annotator annotator = text::default_annotator();
  const text::FeedbackDetector detector = text::default_feedback_detector();
  FeedbackExtractionReport report;
  const auto tuples = extract_feedback_set(corpus, annotator, detector, 5, &report);
  CHECK(report.flagged_turns == 1);
  CHECK(report.skipped_no_preceding_system == 1);
  CHECK(tuples.empty());
}

TEST_CASE("tuples file round trip") {
  Corpus corpus;
  for (int i = 0; i < 3; ++i) {
    Dialogue d;
    d.id = "t" + std::to_string(i);
    d.turns = {Turn{"user", "hello", 1.0}, Turn{"newsbot", "fact " + std::to_string(i), 2.0},
               Turn{"user", "that was interesting", 3.0}};
    corpus.dialogues.push_back(std::move(d));
  }
  const text::Annotator annotator = text::default_annotator();
  const text::FeedbackDetector detector = text::default_feedback_detector();
  const auto tuples = extract_feedback_set(corpus, annotator, detector, 5);
  REQUIRE(!tuples.empty());
  const std::string path = temp_path("convrank_tuples.jsonl");
  write_tuples(tuples, path);
  const auto rt = read_tuples(path);
  REQUIRE(rt.size() == tuples.size());
  for (std::size_t i = 0; i < rt.size(); ++i) {
    CHECK(rt[i].good_response.text == tuples[i].good_response.text);
    CHECK(rt[i].bad_response.text == tuples[i].bad_response.text);
    CHECK(rt[i].context.turn_index == tuples[i].context.turn_index);
  }
  std::filesystem::remove(path);
}
