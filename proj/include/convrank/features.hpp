#ifndef CONVRANK_FEATURES_HPP
#define CONVRANK_FEATURES_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "convrank/textproc.hpp"
#include "convrank/types.hpp"

namespace convrank::feat {

// ---------------------------------------------------------------------------
// tf-idf and flow features
// ---------------------------------------------------------------------------

/// Document-frequency weights for the tf-idf cosine features. When a term is
/// unseen (or the table is empty), idf defaults to 1 so the features degrade
/// to plain tf cosine.
struct TfidfWeights {
  std::unordered_map<std::string, double> idf;

  double weight(const std::string& term) const {
    auto it = idf.find(term);
    return it == idf.end() ? 1.0 : it->second;
  }
  /// Smoothed idf over per-turn documents: ln((1+N)/(1+df)) + 1.
  static TfidfWeights fit(const Corpus& corpus);
};

struct FlowFeatures {
  double coherence = 0.0;         // context/response tf-idf cosine
  double information_flow = 0.0;  // 1 - cosine(last system turn, response)
  double dullness = 0.0;          // max cosine against the dull-phrase list
};

/// All three values clamped to [0, 1]. An empty response yields
/// dullness 0, coherence 0, information_flow 1.
FlowFeatures flow_features(const RankingContext& context, const Candidate& response,
                           const std::vector<std::string>& dull_phrases,
                           const TfidfWeights& tfidf);

/// Jaccard overlap of two entity/noun-phrase sets; empty-union convention 0.
double entity_overlap(const std::unordered_set<std::string>& context_set,
                      const std::unordered_set<std::string>& response_set);

/// Entity heuristic output plus adjacent content-word bigrams, the noun
/// phrase approximation used for the overlap feature.
std::unordered_set<std::string> entity_np_set(const std::string& text,
                                              const std::vector<std::string>& entities,
                                              const std::unordered_set<std::string>& stopwords);

// ---------------------------------------------------------------------------
// Topic model (collapsed Gibbs LDA)
// ---------------------------------------------------------------------------

struct TopicModel {
  int num_topics = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<std::string> vocab_words;            // index -> word
  std::unordered_map<std::string, int> vocab;      // word -> index
  Eigen::MatrixXd phi;                             // K x V, rows sum to 1
  bool trained = false;
};

struct LdaConfig {
  int num_topics = 20;
  int iterations = 200;
  double alpha = 0.0;  // 0 means 50/K
  double beta = 0.01;
  std::uint64_t seed = 42;
};

/// Documents are token lists with stopwords already removed.
TopicModel fit_topics(const std::vector<std::vector<std::string>>& documents,
                      const LdaConfig& config);

inline constexpr int kInferenceSweeps = 20;
/// Weak symmetric prior for mixture inference over short texts.
inline constexpr double kInferenceAlpha = 0.1;

/// Fixed-phi Gibbs mixture inference (kInferenceSweeps sweeps). The chain
/// seed is mixed with a hash of the token list, so identical texts get
/// identical mixtures and divergence is exactly symmetric.
Eigen::VectorXd infer_mixture(const TopicModel& model, const std::vector<std::string>& tokens,
                              std::uint64_t seed);

/// Jensen-Shannon divergence in bits, in [0, 1] for distributions.
double jensen_shannon(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

/// JSD between the inferred mixtures of the concatenated context and the
/// response. Throws DataError on an untrained model.
double topic_divergence(const TopicModel& model, const RankingContext& context,
                        const Candidate& response,
                        const std::unordered_set<std::string>& stopwords, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Side features f(C, r)
// ---------------------------------------------------------------------------

struct SideFeatureConfig {
  std::vector<std::string> roster;   // ensemble bot names, fixed order
  double turn_index_cap = 12.0;      // turn_index_norm = min(1, index / cap)
};

/// Layout: [context_sentiment, response_sentiment, time_sin, time_cos,
/// turn_index_norm, bot_onehot(|roster|), context_bot_bag(|roster|)].
/// Permutation-invariant in the context turns: the sentiment mean is
/// accumulated in sorted order and the clock features use the maximum
/// context timestamp.
Eigen::VectorXd side_features(const RankingContext& context, const Candidate& response,
                              const text::SentimentLexicon& lexicon,
                              const SideFeatureConfig& config);

inline std::size_t side_feature_dim(const SideFeatureConfig& config) {
  return 5 + 2 * config.roster.size();
}

// ---------------------------------------------------------------------------
// Handcrafted feature vector
// ---------------------------------------------------------------------------

inline constexpr int kHandcraftedDim = 6;

/// Everything the handcrafted ranker needs at scoring time.
struct HandcraftedResources {
  std::vector<std::string> dull_phrases;
  std::unordered_set<std::string> stopwords;
  TfidfWeights tfidf;
  TopicModel topics;
  std::uint64_t seed = 42;
};

/// [coherence, information_flow, dullness, entity_overlap, topic_divergence,
/// response_sentiment] in that fixed order.
Eigen::VectorXd handcrafted_feature_vector(const RankingContext& context,
                                           const Candidate& response,
                                           const HandcraftedResources& res);

/// Dialogue-level LDA documents: concatenated turn texts, stopwords removed.
std::vector<std::vector<std::string>> lda_documents(const Corpus& corpus,
                                                    const std::unordered_set<std::string>& stopwords,
                                                    std::size_t max_documents = 0,
                                                    std::uint64_t seed = 42);

}  // namespace convrank::feat

#endif  // CONVRANK_FEATURES_HPP
