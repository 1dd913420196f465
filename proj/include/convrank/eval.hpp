#ifndef CONVRANK_EVAL_HPP
#define CONVRANK_EVAL_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "convrank/corpus.hpp"
#include "convrank/errors.hpp"
#include "convrank/rankers.hpp"
#include "convrank/types.hpp"

namespace convrank::eval {

// ---------------------------------------------------------------------------
// Precision and pairwise evaluation
// ---------------------------------------------------------------------------

using RelevancePredicate = std::function<bool(const RankingContext&, const Candidate&)>;

/// Fraction of the top-k ranked candidates satisfying the predicate.
/// Throws ConfigError when k < 1 or k exceeds the candidate count.
double precision_at_k(const RankingContext& context,
                      const std::vector<rank::ScoredCandidate>& ranked,
                      const RelevancePredicate& relevant, std::size_t k);

struct EvalReport {
  double p_at_1 = 0.0;
  std::size_t n_tuples = 0;
  std::vector<double> margins;  // score(good) - score(bad) per tuple
  double mean_margin = 0.0;
  double ci95_halfwidth = 0.0;  // normal-approximation binomial interval
};

/// Pairwise precision@1: counts strict score(good) > score(bad); ties count
/// as incorrect. Throws DataError on an empty tuple list.
EvalReport pairwise_eval(const rank::Ranker& ranker, const std::vector<FeedbackTuple>& tuples);

/// MSE of ranker scores against the instance targets of a test split.
double testset_loss(const rank::Ranker& ranker, const std::vector<TrainingInstance>& test);

// ---------------------------------------------------------------------------
// Correlation study
// ---------------------------------------------------------------------------

/// Pearson product-moment coefficient. Throws DataError on length mismatch,
/// fewer than 2 points, or zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct CorrelationReport {
  // Rating rows are restricted to rated dialogues and are absent when fewer
  // than 2 dialogues are rated or a variance degenerates.
  std::optional<double> rating_length;
  std::optional<double> rating_pos_feedback;
  std::optional<double> rating_neg_feedback;
  std::optional<double> length_pos_feedback;
  std::optional<double> length_neg_feedback;
  std::size_t n_dialogues = 0;
  std::size_t n_rated = 0;
};

/// Per dialogue: (rating when present, length, #positive-feedback turns,
/// #negative-feedback turns), then the five pairwise coefficients.
CorrelationReport correlation_study(const Corpus& corpus,
                                    const text::FeedbackDetector& detector);

// ---------------------------------------------------------------------------
// Learning curve
// ---------------------------------------------------------------------------

struct LearningCurvePoint {
  std::string ranker;
  std::size_t size = 0;
  double p_at_1 = 0.0;
};

struct LearningCurveConfig {
  std::vector<std::size_t> sizes;       // strictly increasing
  std::vector<std::string> rankers;     // of: neural, linear, dual_encoder, handcrafted, random
  std::uint64_t seed = 42;
  rank::NeuralConfig neural;
  rank::LinearConfig linear;
  rank::DualEncoderConfig dual;
  rank::HandcraftedConfig handcrafted;
};

/// For each size, builds a length-signal dataset from the (filtered) corpus,
/// trains each requested ranker, and evaluates pairwise P@1 on the fixed
/// held-out feedback tuples.
std::vector<LearningCurvePoint> learning_curve(const Corpus& corpus,
                                               const std::vector<FeedbackTuple>& heldout,
                                               const text::Annotator& annotator,
                                               const LearningCurveConfig& config);

/// Columns: ranker, size, p_at_1.
void write_learning_curve_tsv(const std::vector<LearningCurvePoint>& points,
                              const std::string& path);

// ---------------------------------------------------------------------------
// Random baseline
// ---------------------------------------------------------------------------

/// Deterministic uniform scorer: the score is a seeded hash of the tuple
/// content, so evaluation is reproducible without mutable state.
class RandomScorer final : public rank::Ranker {
 public:
  explicit RandomScorer(std::uint64_t seed) : seed_(seed) {}
  double score(const RankingContext& context, const Candidate& candidate) const override;
  std::string kind() const override { return "random"; }
  void save(const std::string&) const override {
    throw ConfigError("the random baseline has no checkpoint form");
  }

 private:
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

void write_eval_report_tsv(const EvalReport& report, std::optional<double> test_loss,
                           const std::string& path);
void write_eval_report_json(const EvalReport& report, std::optional<double> test_loss,
                            const std::string& path);
void write_correlation_tsv(const CorrelationReport& report, const std::string& path);
void write_correlation_json(const CorrelationReport& report, const std::string& path);

}  // namespace convrank::eval

#endif  // CONVRANK_EVAL_HPP
