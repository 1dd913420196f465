#ifndef CONVRANK_TYPES_HPP
#define CONVRANK_TYPES_HPP

#include <optional>
#include <string>
#include <vector>

namespace convrank {

/// One utterance in a dialogue. `agent` is either the literal "user" or a
/// bot name from the ensemble roster. User turns may have empty text
/// (ASR dropouts); timestamps are seconds since epoch, non-decreasing
/// within a dialogue.
struct Turn {
  std::string agent;
  std::string text;
  double timestamp = 0.0;

  bool is_user() const { return agent == "user"; }
  bool is_system() const { return !is_user(); }
};

/// A conversation transcript with an optional end-of-dialogue rating in 1..5.
struct Dialogue {
  std::string id;
  std::vector<Turn> turns;
  std::optional<int> rating;

  int length() const { return static_cast<int>(turns.size()); }
};

struct Corpus {
  std::vector<Dialogue> dialogues;
  /// Set once the percentile-based outlier cut has been applied, so that
  /// re-filtering does not re-shrink an already trimmed length distribution.
  bool outlier_trimmed = false;

  std::size_t size() const { return dialogues.size(); }
  bool empty() const { return dialogues.empty(); }
};

/// The scoring window: up to the 3 most recent system and 3 most recent user
/// turns before the candidate position, interleaved in original dialogue
/// order, with per-turn named entities and the candidate's turn index.
struct RankingContext {
  std::vector<Turn> turns;                           // |turns| <= 6
  std::vector<std::vector<std::string>> entities;    // parallel to turns
  int turn_index = 0;                                // response position in its dialogue
};

/// A candidate response proposed by one bot of the ensemble.
struct Candidate {
  std::string bot;
  std::string text;
  std::vector<std::string> entities;
  double sentiment = 0.0;  // in [-1, 1]
};

enum class Polarity { positive, negative };

/// One supervised example: the context/response pair inherits the target of
/// the dialogue that contains it. polarity == positive iff target > 0.7,
/// negative iff target < 0.3.
struct TrainingInstance {
  RankingContext context;
  Candidate response;
  double target = 0.0;
  Polarity polarity = Polarity::negative;
  std::string source_dialogue;
};

struct Dataset {
  std::vector<TrainingInstance> train;
  std::vector<TrainingInstance> dev;
  std::vector<TrainingInstance> test;

  std::size_t size() const { return train.size() + dev.size() + test.size(); }
};

/// Evaluation unit: the system turn preceding an explicit positive-feedback
/// user turn, with its context, against a response sampled from another
/// dialogue.
struct FeedbackTuple {
  RankingContext context;
  Candidate good_response;
  Candidate bad_response;
};

enum class Signal { length, rating };

inline const char* to_string(Signal s) { return s == Signal::length ? "length" : "rating"; }
inline const char* to_string(Polarity p) { return p == Polarity::positive ? "positive" : "negative"; }

}  // namespace convrank

#endif  // CONVRANK_TYPES_HPP
