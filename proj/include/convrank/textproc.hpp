#ifndef CONVRANK_TEXTPROC_HPP
#define CONVRANK_TEXTPROC_HPP

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "convrank/types.hpp"

namespace convrank::text {

/// Word tokens per utterance are truncated to this length before entity
/// tokens are appended.
inline constexpr std::size_t kMaxUtteranceTokens = 30;

/// Default vocabulary capacity (includes the two special ids).
inline constexpr std::size_t kDefaultVocabSize = 60000;

// ---------------------------------------------------------------------------
// Surface tokenization
// ---------------------------------------------------------------------------

/// Lowercased alphanumeric word tokens. Splits on whitespace and punctuation;
/// apostrophes separate ("that's" -> "that", "s"). ASCII casing only.
std::vector<std::string> word_tokens(const std::string& text);

/// Word-agent tokens for one turn: each word prefixed with the (lowercased)
/// agent, e.g. `user|hello`, truncated to kMaxUtteranceTokens, then entity
/// tokens `ENT|<entity>` appended. Empty text yields only entity tokens.
std::vector<std::string> tokenize(const Turn& turn, const std::vector<std::string>& entities);

/// Normalized utterance key used for whitelist/blacklist phrase matching:
/// word tokens joined by single spaces.
std::string normalize_utterance(const std::string& text);

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

/// Unified token -> id map over word-agent tokens and entity tokens.
/// id 0 is padding, id 1 is the unknown token.
class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;

  Vocabulary();

  /// Most frequent tokens up to max_size - 2 plus the two special ids.
  /// Ties at the cutoff break lexicographically (smaller token kept).
  static Vocabulary build(const std::vector<std::pair<std::string, std::size_t>>& counts,
                          std::size_t max_size);

  int encode(const std::string& token) const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  const std::string& decode(int id) const;
  bool contains(const std::string& token) const { return token_to_id_.count(token) > 0; }

  std::size_t size() const { return id_to_token_.size(); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  /// Rebuild from an id-ordered token list (checkpoint loading).
  static Vocabulary from_tokens(const std::vector<std::string>& id_to_token);

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

// ---------------------------------------------------------------------------
// Named entities
// ---------------------------------------------------------------------------

/// Multi-word gazetteer matched case-insensitively over the token stream,
/// longest entry first.
class Gazetteer {
 public:
  Gazetteer() = default;
  explicit Gazetteer(const std::vector<std::string>& entries);

  void add(const std::string& entry);
  /// Matches as normalized entity strings (lowercase, underscores).
  std::vector<std::string> match(const std::vector<std::string>& words) const;
  bool empty() const { return entries_.empty(); }

 private:
  // token sequence -> normalized form, kept sorted by length descending
  std::vector<std::pair<std::vector<std::string>, std::string>> entries_;
};

/// Maximal runs of capitalized words (single-word runs that are stopwords are
/// dropped) plus gazetteer matches. Output is lowercased with spaces replaced
/// by underscores, deduplicated, in order of first occurrence.
std::vector<std::string> extract_entities(const std::string& text,
                                          const std::unordered_set<std::string>& stopwords,
                                          const Gazetteer& gazetteer);

// ---------------------------------------------------------------------------
// Sentiment
// ---------------------------------------------------------------------------

/// Valence lexicon with negation and booster rules. Valences are in [-1, 1];
/// boosters carry a relative strength of +-0.25.
struct SentimentLexicon {
  std::unordered_map<std::string, double> valence;
  std::unordered_set<std::string> negations;
  std::unordered_map<std::string, double> boosters;
};

/// Sum of token valences with negation flipping (scope: the next 3 tokens)
/// and booster scaling, squashed to [-1, 1] by x / sqrt(x^2 + 15).
double sentiment_score(const std::string& text, const SentimentLexicon& lexicon);

// ---------------------------------------------------------------------------
// Annotation plumbing
// ---------------------------------------------------------------------------

/// Bundles the text resources needed to turn raw turns into contexts and
/// candidates. All members are immutable after construction.
struct Annotator {
  std::unordered_set<std::string> stopwords;
  Gazetteer gazetteer;
  SentimentLexicon lexicon;

  std::vector<std::string> entities(const std::string& text) const {
    return extract_entities(text, stopwords, gazetteer);
  }
  double sentiment(const std::string& text) const { return sentiment_score(text, lexicon); }
  Candidate make_candidate(const Turn& turn) const;
};

/// Detects explicit user feedback: a whitelist and a blacklist of hand-picked
/// normalized phrases combined with the sentiment score.
struct FeedbackDetector {
  std::unordered_set<std::string> whitelist;       // normalized phrases
  std::unordered_set<std::string> blacklist;       // never feedback
  std::unordered_set<std::string> neg_whitelist;   // explicit negative phrases
  double threshold = 0.4;
  const SentimentLexicon* lexicon = nullptr;

  bool is_positive_feedback(const std::string& text) const;
  bool is_negative_feedback(const std::string& text) const;
};

// ---------------------------------------------------------------------------
// Bundled default resources (overridable from TSV / line files)
// ---------------------------------------------------------------------------

const SentimentLexicon& default_lexicon();
const std::unordered_set<std::string>& default_stopwords();
const std::vector<std::string>& default_dull_phrases();
const std::vector<std::string>& default_gazetteer_entries();
const std::vector<std::string>& default_feedback_whitelist();
const std::vector<std::string>& default_feedback_blacklist();
const std::vector<std::string>& default_negative_feedback_phrases();

Annotator default_annotator();
FeedbackDetector default_feedback_detector();

/// Vocabulary over every turn of the corpus: word-agent tokens plus entity
/// tokens share the same id space.
Vocabulary build_vocab(const Corpus& corpus, const Annotator& annotator, std::size_t max_size);

/// `term<TAB>valence` per line; lines starting with '#' are skipped.
/// Rows tagged `negation` / `booster` in a third column feed those sets.
SentimentLexicon load_lexicon_tsv(const std::string& path);
/// One entry per line.
std::vector<std::string> load_lines(const std::string& path);

}  // namespace convrank::text

#endif  // CONVRANK_TEXTPROC_HPP
