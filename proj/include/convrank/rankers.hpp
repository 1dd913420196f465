#ifndef CONVRANK_RANKERS_HPP
#define CONVRANK_RANKERS_HPP

#include <memory>
#include <string>
#include <vector>

#include "convrank/features.hpp"
#include "convrank/nn.hpp"
#include "convrank/textproc.hpp"
#include "convrank/types.hpp"

namespace convrank::rank {

// ---------------------------------------------------------------------------
// Common interface
// ---------------------------------------------------------------------------

/// A trained scoring model. Scores are deterministic at inference and lie
/// in [0, 1]. Trained rankers are immutable and safe for concurrent scoring.
struct Ranker {
  virtual ~Ranker() = default;
  virtual double score(const RankingContext& context, const Candidate& candidate) const = 0;
  virtual std::string kind() const = 0;
  virtual void save(const std::string& path) const = 0;
};

/// Loads any ranker checkpoint, dispatching on its `kind` field.
std::unique_ptr<Ranker> load_ranker(const std::string& path);

struct ScoredCandidate {
  Candidate candidate;
  double score = 0.0;
  std::size_t input_index = 0;
};

/// Stable sort by descending score; ties keep input order.
/// Throws DataError on an empty candidate list.
std::vector<ScoredCandidate> rank_candidates(const Ranker& ranker, const RankingContext& context,
                                             const std::vector<Candidate>& candidates);

struct EpochStats {
  double train_loss = 0.0;
  double dev_loss = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // 1-based
  double best_dev_loss = 0.0;
};

// ---------------------------------------------------------------------------
// Neural ranker
// ---------------------------------------------------------------------------

struct NeuralConfig {
  std::size_t vocab_size = text::kDefaultVocabSize;
  int embedding_dim = 256;
  int hidden_dim = 128;                     // shared GRU encoder size
  int sem_dim = 128;                        // first predictor layer on Enc
  std::vector<int> predictor_layers = {128};
  double learning_rate = 0.01;
  int batch_size = 8;
  double dropout = 0.4;                     // on the encoder output, training only
  int max_epochs = 20;
  int patience = 3;
  std::uint64_t seed = 42;
  feat::SideFeatureConfig side;
  /// Embedded in the model for context-sentiment side features at score time.
  text::SentimentLexicon lexicon = text::default_lexicon();
};

class NeuralRanker final : public Ranker {
 public:
  double score(const RankingContext& context, const Candidate& candidate) const override;
  std::string kind() const override { return "neural"; }
  void save(const std::string& path) const override;
  static NeuralRanker from_checkpoint(const nn::Checkpoint& ckpt);

  /// Scoring core on pre-encoded inputs. Context sequences are encoded with
  /// the shared GRU, their vectors summed in the given order, concatenated
  /// with the encoded response, passed through the Sem layer and the
  /// predictor. Throws DataError on a side-feature dimension mismatch.
  double score_encoded(const std::vector<std::vector<int>>& context_seqs,
                       const std::vector<int>& response_seq, const nn::Vec& side) const;

  /// Canonical per-turn id sequences: tokenized, encoded, then sorted
  /// lexicographically so the turn-vector sum is bit-stable under
  /// context permutation.
  std::vector<std::vector<int>> encode_context(const RankingContext& context) const;
  std::vector<int> encode_response(const Candidate& candidate) const;

  text::Vocabulary vocab;
  nn::Mat embedding;  // E x V
  nn::GruParams encoder;
  nn::DenseLayer sem;
  nn::MlpParams predictor;
  feat::SideFeatureConfig side;
  text::SentimentLexicon lexicon;
  NeuralConfig config;
};

/// One pre-encoded training example for the batch forward/backward pass.
struct NeuralBatchItem {
  std::vector<std::vector<int>> context;  // canonical per-turn id sequences
  std::vector<int> response;
  nn::Vec side;
  double target = 0.0;
};

struct NeuralGradients {
  nn::Mat embedding;
  nn::GruParams encoder;
  nn::DenseLayer sem;
  nn::MlpParams predictor;

  static NeuralGradients zeros_like(const NeuralRanker& model);
  void set_zero();
};

struct NeuralBackwardOptions {
  /// Per-item inverted dropout masks over the 2H encoder output; null means
  /// no dropout (inference convention and the gradient-check path).
  const std::vector<nn::Vec>* dropout_masks = nullptr;
  /// Scales on the upstream gradient entering each encoder branch. The
  /// backward pass is linear in them, so (1,0) + (0,1) recovers (1,1).
  double context_branch_scale = 1.0;
  double response_branch_scale = 1.0;
};

/// Batch-mean MSE forward pass plus exact analytic gradients for every
/// parameter, the embedding table included. Context-turn and response
/// gradients both accumulate into the shared encoder. Returns the batch loss.
double neural_forward_backward(const NeuralRanker& model,
                               const std::vector<NeuralBatchItem>& batch, NeuralGradients& grads,
                               const NeuralBackwardOptions& options = {});

NeuralRanker train_neural(const Dataset& dataset, const NeuralConfig& config,
                          TrainReport* report = nullptr);

struct GridEntry {
  int hidden_dim = 0;
  std::vector<int> predictor_layers;
  double dev_loss = 0.0;
};

/// The grid: GRU sizes {64, 128, 256} x predictor layouts {[128], [128, 64],
/// [128, 32, 32]}, selected by dev loss. Sizes can be overridden for
/// desk-scale runs.
NeuralRanker train_neural_grid(const Dataset& dataset, const NeuralConfig& base,
                               std::vector<GridEntry>* grid_report = nullptr,
                               TrainReport* best_report = nullptr,
                               const std::vector<int>& gru_sizes = {64, 128, 256},
                               const std::vector<std::vector<int>>& layouts = {{128},
                                                                               {128, 64},
                                                                               {128, 32, 32}});

// ---------------------------------------------------------------------------
// Hashed linear ranker
// ---------------------------------------------------------------------------

struct LinearConfig {
  int hash_bits = 18;
  double learning_rate = 0.1;
  int passes = 1;
  std::uint64_t seed = 42;
};

class LinearRanker final : public Ranker {
 public:
  double score(const RankingContext& context, const Candidate& candidate) const override;
  std::string kind() const override { return "linear"; }
  void save(const std::string& path) const override;
  static LinearRanker from_checkpoint(const nn::Checkpoint& ckpt);

  /// Hashed sparse features: context/response bags of 1..3-grams, position
  /// tagged unigrams (first 5 positions each side), flow features, the bot
  /// name, and the pairwise interactions (context unigram x response
  /// unigram, bot x response n-gram). Signed-hash trick on the top bit.
  std::vector<std::pair<std::uint64_t, double>> features(const RankingContext& context,
                                                         const Candidate& candidate) const;

  double raw_score(const RankingContext& context, const Candidate& candidate) const;

  Eigen::VectorXd weights;  // 2^hash_bits
  double bias = 0.0;
  int hash_bits = 18;
  std::vector<std::string> dull_phrases;  // tf-cosine flow features
};

LinearRanker train_linear(const Dataset& dataset, const LinearConfig& config);

// ---------------------------------------------------------------------------
// Handcrafted ranker
// ---------------------------------------------------------------------------

/// Default coefficient vector over [coherence, information_flow, dullness,
/// entity_overlap, topic_divergence, response_sentiment].
Eigen::VectorXd default_handcrafted_coefficients();

struct HandcraftedConfig {
  Eigen::VectorXd coefficients = default_handcrafted_coefficients();
  feat::LdaConfig lda;
  std::size_t lda_max_documents = 4000;  // fit on a sample for speed; 0 = all
  std::uint64_t seed = 42;
};

class HandcraftedRanker final : public Ranker {
 public:
  double score(const RankingContext& context, const Candidate& candidate) const override;
  std::string kind() const override { return "handcrafted"; }
  void save(const std::string& path) const override;
  static HandcraftedRanker from_checkpoint(const nn::Checkpoint& ckpt);

  Eigen::VectorXd coefficients;  // 6
  feat::HandcraftedResources resources;
};

/// Fits the LDA topics and idf table on the corpus; coefficients are the
/// manually set defaults unless overridden.
HandcraftedRanker make_handcrafted(const Corpus& corpus, const HandcraftedConfig& config);

// ---------------------------------------------------------------------------
// Dual-encoder ranker
// ---------------------------------------------------------------------------

struct DualEncoderConfig {
  std::size_t vocab_size = text::kDefaultVocabSize;
  int embedding_dim = 128;
  int hidden_dim = 256;
  std::vector<int> predictor_layers = {128};
  double learning_rate = 0.01;
  int batch_size = 8;
  int max_epochs = 20;
  int patience = 3;
  std::uint64_t seed = 42;
};

/// Context is the last user turn only; plain word tokens, no entity tokens,
/// no side features.
class DualEncoderRanker final : public Ranker {
 public:
  double score(const RankingContext& context, const Candidate& candidate) const override;
  std::string kind() const override { return "dual_encoder"; }
  void save(const std::string& path) const override;
  static DualEncoderRanker from_checkpoint(const nn::Checkpoint& ckpt);

  double score_encoded(const std::vector<int>& context_seq,
                       const std::vector<int>& response_seq) const;
  std::vector<int> encode_last_user_turn(const RankingContext& context) const;
  std::vector<int> encode_text(const std::string& text_in) const;

  text::Vocabulary vocab;
  nn::Mat embedding;  // shared by both encoders
  nn::LstmParams context_encoder;
  nn::LstmParams response_encoder;
  nn::MlpParams predictor;
  DualEncoderConfig config;
};

DualEncoderRanker train_dual_encoder(const Dataset& dataset, const DualEncoderConfig& config,
                                     TrainReport* report = nullptr);

}  // namespace convrank::rank

#endif  // CONVRANK_RANKERS_HPP
