#ifndef CONVRANK_SYNTHGEN_HPP
#define CONVRANK_SYNTHGEN_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "convrank/textproc.hpp"
#include "convrank/types.hpp"

namespace convrank::synth {

/// Deterministic corpus generator. Each dialogue draws a latent quality q;
/// system turns are entity-continuous and informative with probability
/// q^good_exponent (else dull), dialogue length grows with q, explicit
/// positive feedback follows good turns, and ratings are a heavily noised
/// function of q so the rating/length correlation stays weak.
struct GeneratorConfig {
  std::size_t n_dialogues = 50000;
  std::uint64_t seed = 7;

  std::vector<std::string> roster = {"newsbot", "factbot", "chatbot", "persona"};

  // quality draw: u-shaped around 0.5; smaller shape pushes mass outward
  double quality_shape = 0.5;
  // good-response probability: min(good_prob_cap, q^good_exponent); the cap
  // keeps even top dialogues mixing in filler turns
  double good_exponent = 4.0;
  double good_prob_cap = 0.35;
  // a bad system turn is informative-but-off-topic at this rate, else dull
  double offtopic_rate = 0.1;

  // length = base + round(gain * q) + U{-noise..noise}
  int length_base = 4;
  int length_gain = 40;
  int length_noise = 1;

  double rated_fraction = 0.5;
  double rating_noise = 0.85;  // rating = round(1 + 4((1-noise) q + noise u))

  double positive_feedback_prob = 0.55;  // after a good system turn
  double negative_feedback_prob = 0.25;  // after a dull system turn
  double entity_continue_prob = 0.7;     // good turn keeps the active entity

  /// Non-social quiz turns, emitted under a dedicated "quizbot" agent.
  double quizbot_rate = 0.0;

  void validate() const;  // throws ConfigError
};

Corpus generate_corpus(const GeneratorConfig& config);

/// Reserves a seeded dialogue subset and extracts its feedback tuples for
/// evaluation; the returned training corpus never contains them.
std::pair<Corpus, std::vector<FeedbackTuple>> plant_eval_split(
    const Corpus& corpus, double fraction, const text::Annotator& annotator,
    const text::FeedbackDetector& detector, std::uint64_t seed);

/// Plain-text `key = value` generator configuration.
GeneratorConfig config_from_kv_file(const std::string& path);

}  // namespace convrank::synth

#endif  // CONVRANK_SYNTHGEN_HPP
