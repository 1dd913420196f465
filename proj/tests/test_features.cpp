#include <cmath>
#include <unordered_set>

#include "convrank/errors.hpp"
#include "convrank/features.hpp"
#include "convrank/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace convrank;
using namespace convrank::feat;

namespace {

RankingContext context_of(const std::vector<std::string>& texts) {
  RankingContext ctx;
  const text::Annotator annotator = text::default_annotator();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    Turn t;
    t.agent = i % 2 == 0 ? "user" : "newsbot";
    t.text = texts[i];
    t.timestamp = 100.0 + 10.0 * static_cast<double>(i);
    ctx.entities.push_back(annotator.entities(t.text));
    ctx.turns.push_back(std::move(t));
  }
  ctx.turn_index = static_cast<int>(texts.size());
  return ctx;
}

Candidate candidate_of(const std::string& text_in, const std::string& bot = "newsbot") {
  const text::Annotator annotator = text::default_annotator();
  return annotator.make_candidate(Turn{bot, text_in, 0.0});
}

}  // namespace

// ---------------------------------------------------------------------------
// Flow features
// ---------------------------------------------------------------------------

TEST_CASE("flow: response identical to a dull phrase has dullness 1") {
  const TfidfWeights tfidf;
  const auto f = flow_features(context_of({"tell me something"}), candidate_of("i don't know"),
                               text::default_dull_phrases(), tfidf);
  CHECK(f.dullness == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("flow: response identical to the averaged context has coherence 1") {
  const TfidfWeights tfidf;
  const std::string line = "the space rocket reached the orbit";
  const auto f = flow_features(context_of({line, line}), candidate_of(line),
                               text::default_dull_phrases(), tfidf);
  CHECK(f.coherence == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("flow: repeating the last system turn verbatim gives zero information flow") {
  const TfidfWeights tfidf;
  RankingContext ctx = context_of({"what about space", "rockets orbit the planet"});
  const auto f = flow_features(ctx, candidate_of("rockets orbit the planet"),
                               text::default_dull_phrases(), tfidf);
  CHECK(f.information_flow == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("flow: empty response convention") {
  const TfidfWeights tfidf;
  const auto f = flow_features(context_of({"hello there"}), candidate_of(""),
                               text::default_dull_phrases(), tfidf);
  CHECK(f.dullness == 0.0);
  CHECK(f.coherence == 0.0);
  CHECK(f.information_flow == 1.0);
}

// ---------------------------------------------------------------------------
// Entity overlap
// ---------------------------------------------------------------------------

TEST_CASE("entity overlap: Jaccard identities and hand-computed values") {
  const std::unordered_set<std::string> a{"darth_vader", "star_wars"};
  CHECK(entity_overlap(a, a) == doctest::Approx(1.0));
  CHECK(entity_overlap(a, {"jedi", "lightsaber"}) == doctest::Approx(0.0));
  // Hand-computed: intersection {star_wars}, union of 3 distinct members.
  CHECK(entity_overlap(a, {"star_wars", "jedi"}) == doctest::Approx(1.0 / 3.0));
  // One shared member out of a 4-element union.
  CHECK(entity_overlap(a, {"star_wars", "jedi", "sith"}) == doctest::Approx(0.25));
  CHECK(entity_overlap({}, {}) == 0.0);
}

TEST_CASE("entity_np_set adds adjacent content-word bigrams") {
  const auto& stop = text::default_stopwords();
  const auto set = entity_np_set("the space rocket reached orbit", {"space_rocket"}, stop);
  CHECK(set.count("space_rocket") == 1);   // provided entity
  CHECK(set.count("space_rocket") > 0);
  CHECK(set.count("reached_orbit") == 1);  // content bigram
  CHECK(set.count("the_space") == 0);      // stopword blocks the bigram
}

// ---------------------------------------------------------------------------
// Topic model
// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> disjoint_corpus() {
  std::vector<std::vector<std::string>> docs;
  const std::vector<std::string> space{"rocket", "orbit", "galaxy", "planet", "astronaut",
                                       "comet", "nebula", "telescope", "launch", "crater"};
  const std::vector<std::string> music{"guitar", "melody", "concert", "album", "lyrics",
                                       "drummer", "piano", "chord", "festival", "tune"};
  Rng rng(5);
  for (int d = 0; d < 40; ++d) {
    const auto& pool = d % 2 == 0 ? space : music;
    std::vector<std::string> doc;
    for (int i = 0; i < 30; ++i) doc.push_back(pool[rng.bounded(pool.size())]);
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace

TEST_CASE("fit_topics separates two disjoint vocabularies") {
  LdaConfig config;
  config.num_topics = 2;
  config.iterations = 100;
  config.seed = 9;
  const TopicModel model = fit_topics(disjoint_corpus(), config);
  REQUIRE(model.trained);

  // Topic purity: each topic's top-10 words drawn from one group.
  const std::unordered_set<std::string> space{"rocket", "orbit", "galaxy", "planet", "astronaut",
                                              "comet", "nebula", "telescope", "launch", "crater"};
  for (int k = 0; k < 2; ++k) {
    std::vector<std::pair<double, std::string>> ranked;
    for (std::size_t v = 0; v < model.vocab_words.size(); ++v)
      ranked.emplace_back(model.phi(k, static_cast<Eigen::Index>(v)), model.vocab_words[v]);
    std::sort(ranked.rbegin(), ranked.rend());
    std::size_t in_space = 0;
    for (int i = 0; i < 10; ++i)
      if (space.count(ranked[static_cast<std::size_t>(i)].second) > 0) ++in_space;
    const double purity = std::max(in_space, 10 - in_space) / 10.0;
    CHECK(purity >= 0.9);
  }
}

TEST_CASE("phi rows are distributions even for a single one-word document") {
  LdaConfig config;
  config.num_topics = 2;
  config.iterations = 5;
  const TopicModel model = fit_topics({{"lonely"}}, config);
  for (int k = 0; k < 2; ++k)
    CHECK(model.phi.row(k).sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("fit_topics is deterministic under the seed") {
  LdaConfig config;
  config.num_topics = 3;
  config.iterations = 30;
  config.seed = 12;
  const TopicModel a = fit_topics(disjoint_corpus(), config);
  const TopicModel b = fit_topics(disjoint_corpus(), config);
  CHECK((a.phi - b.phi).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fit_topics rejects empty vocabularies and K < 2") {
  CHECK_THROWS_AS(fit_topics({}, LdaConfig{}), DataError);
  LdaConfig one;
  one.num_topics = 1;
  CHECK_THROWS_AS(fit_topics({{"word"}}, one), ConfigError);
}

TEST_CASE("jensen_shannon: identities and exact symmetry") {
  Eigen::VectorXd u = Eigen::VectorXd::Constant(4, 0.25);
  CHECK(jensen_shannon(u, u) == 0.0);

  Eigen::VectorXd p(4), q(4);
  p << 0.7, 0.1, 0.1, 0.1;
  q << 0.05, 0.05, 0.45, 0.45;
  CHECK(jensen_shannon(p, q) == jensen_shannon(q, p));  // bit-exact
  CHECK(jensen_shannon(p, q) > 0.0);
  CHECK(jensen_shannon(p, q) <= 1.0);

  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd e2 = Eigen::VectorXd::Zero(2);
  e1(0) = 1.0;
  e2(1) = 1.0;
  CHECK(jensen_shannon(e1, e2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("topic_divergence: identical texts diverge by zero, disjoint topics widely") {
  LdaConfig config;
  config.num_topics = 2;
  config.iterations = 100;
  config.seed = 9;
  const TopicModel model = fit_topics(disjoint_corpus(), config);
  const auto& stop = text::default_stopwords();

  const RankingContext space_ctx = context_of({"the rocket reached the orbit",
                                               "a galaxy of planets and comets"});
  const Candidate same = candidate_of("the rocket reached the orbit a galaxy of planets and comets");
  // Identical token streams infer identical mixtures (text-hash seeding).
  const RankingContext as_ctx = context_of({"the rocket reached the orbit a galaxy of planets and comets"});
  CHECK(topic_divergence(model, as_ctx, same, stop, 3) == doctest::Approx(0.0).epsilon(0.05));

  const Candidate music = candidate_of("a guitar melody at the concert with piano chords");
  CHECK(topic_divergence(model, space_ctx, music, stop, 3) >= 0.5);

  TopicModel untrained;
  CHECK_THROWS_AS(topic_divergence(untrained, space_ctx, music, stop, 3), DataError);
}

// ---------------------------------------------------------------------------
// Side features
// ---------------------------------------------------------------------------

TEST_CASE("side features: midnight clock, one-hot bot, neutral empty context") {
  SideFeatureConfig config;
  config.roster = {"newsbot", "quizbot", "persona"};
  const auto& lex = text::default_lexicon();

  RankingContext empty;
  empty.turn_index = 0;
  Candidate cand = candidate_of("some reply", "newsbot");
  const Eigen::VectorXd v = side_features(empty, cand, lex, config);
  REQUIRE(v.size() == static_cast<Eigen::Index>(side_feature_dim(config)));
  CHECK(v(0) == 0.0);                          // empty context sentiment
  CHECK(v(2) == doctest::Approx(0.0).epsilon(1e-12));  // sin at midnight
  CHECK(v(3) == doctest::Approx(1.0).epsilon(1e-12));  // cos at midnight
  CHECK(v(5) == 1.0);                          // newsbot one-hot
  CHECK(v(6) == 0.0);
  CHECK(v(7) == 0.0);

  // Exactly one 1 in the one-hot block; the clock point is on the unit circle.
  CHECK(v.segment(5, 3).sum() == 1.0);
  CHECK(v(2) * v(2) + v(3) * v(3) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("side features: unknown bot raises an error naming the bot") {
  SideFeatureConfig config;
  config.roster = {"newsbot"};
  RankingContext ctx;
  try {
    side_features(ctx, candidate_of("x", "ghostbot"), text::default_lexicon(), config);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("ghostbot") != std::string::npos);
  }
}

TEST_CASE("side features: context bot bag is normalized and order-insensitive") {
  SideFeatureConfig config;
  config.roster = {"newsbot", "persona"};
  RankingContext ctx = context_of({"hi", "reply one", "more", "reply two"});
  ctx.turns[1].agent = "newsbot";
  ctx.turns[3].agent = "persona";
  const Eigen::VectorXd v =
      side_features(ctx, candidate_of("resp", "newsbot"), text::default_lexicon(), config);
  const Eigen::Index bag = 5 + 2;
  CHECK(v(bag) == doctest::Approx(0.5));
  CHECK(v(bag + 1) == doctest::Approx(0.5));

  std::swap(ctx.turns[1], ctx.turns[3]);
  std::swap(ctx.entities[1], ctx.entities[3]);
  const Eigen::VectorXd w =
      side_features(ctx, candidate_of("resp", "newsbot"), text::default_lexicon(), config);
  CHECK((v - w).cwiseAbs().maxCoeff() == 0.0);
}

// ---------------------------------------------------------------------------
// Handcrafted feature vector
// ---------------------------------------------------------------------------

namespace {

HandcraftedResources tiny_resources() {
  HandcraftedResources res;
  res.dull_phrases = text::default_dull_phrases();
  res.stopwords = text::default_stopwords();
  LdaConfig config;
  config.num_topics = 2;
  config.iterations = 50;
  config.seed = 4;
  res.topics = fit_topics(disjoint_corpus(), config);
  res.seed = 4;
  return res;
}

}  // namespace

TEST_CASE("handcrafted vector: degenerate inputs give the component identities") {
  const HandcraftedResources res = tiny_resources();
  RankingContext empty;
  Candidate blank = candidate_of("");
  const Eigen::VectorXd f = handcrafted_feature_vector(empty, blank, res);
  REQUIRE(f.size() == kHandcraftedDim);
  CHECK(f(0) == 0.0);  // coherence
  CHECK(f(1) == 1.0);  // information flow
  CHECK(f(2) == 0.0);  // dullness
  CHECK(f(3) == 0.0);  // entity overlap
  CHECK(f(4) == doctest::Approx(0.0).epsilon(1e-12));  // uniform vs uniform mixtures
  CHECK(f(5) == 0.0);  // sentiment
}

TEST_CASE("handcrafted vector: dull vs entity-overlapping responses on a fixture") {
  const HandcraftedResources res = tiny_resources();
  RankingContext ctx = context_of({"tell me about Star Wars", "Star Wars is a space saga"});
  const Candidate dull = candidate_of("i don't know");
  const Candidate overlapping = candidate_of("Star Wars also has a famous rocket scene");
  const Eigen::VectorXd fd = handcrafted_feature_vector(ctx, dull, res);
  const Eigen::VectorXd fo = handcrafted_feature_vector(ctx, overlapping, res);
  CHECK(fd(2) > fo(2));  // dull one is duller
  CHECK(fd(3) < fo(3));  // and overlaps less
}

// ---------------------------------------------------------------------------
// Fuzzed bounds
// ---------------------------------------------------------------------------

TEST_CASE("flow, overlap, and divergence stay in [0,1] under fuzzing") {
  const HandcraftedResources res = tiny_resources();
  Rng rng(2718);
  const std::vector<std::string> words{"rocket",  "guitar", "the",   "Star",  "Wars", "don't",
                                       "know",    "famous", "hello", "a",     "I",    "orbit",
                                       "concert", "what",   "!",     "12345", "",     "melody"};
  auto random_text = [&] {
    std::string s;
    for (std::uint64_t i = 0; i <= rng.bounded(10); ++i) s += words[rng.bounded(words.size())] + " ";
    return s;
  };
  for (int trial = 0; trial < 150; ++trial) {
    std::vector<std::string> ctx_texts;
    for (std::uint64_t i = 0; i < rng.bounded(4); ++i) ctx_texts.push_back(random_text());
    const RankingContext ctx = context_of(ctx_texts);
    const Candidate cand = candidate_of(random_text());

    const FlowFeatures f = flow_features(ctx, cand, res.dull_phrases, res.tfidf);
    for (const double v : {f.coherence, f.information_flow, f.dullness}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    const auto a = entity_np_set(ctx_texts.empty() ? "" : ctx_texts[0], {}, res.stopwords);
    const auto b = entity_np_set(cand.text, cand.entities, res.stopwords);
    const double j = entity_overlap(a, b);
    CHECK(j >= 0.0);
    CHECK(j <= 1.0);
    const double d = topic_divergence(res.topics, ctx, cand, res.stopwords, trial);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
  }
}
