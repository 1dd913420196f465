#ifndef CONVRANK_NN_HPP
#define CONVRANK_NN_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "convrank/rng.hpp"
#include "json.hpp"

namespace convrank::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec sigmoid(const Vec& v) { return v.unaryExpr([](double x) { return sigmoid(x); }); }

/// Scaled uniform init: U(-s, s) with s = sqrt(6 / (fan_in + fan_out)).
/// Fill order is fixed (column-major) so results are seed-reproducible.
void glorot_fill(Mat& m, Rng& rng);

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

struct GruParams {
  Mat Wz, Wr, Wh;  // H x I
  Mat Uz, Ur, Uh;  // H x H
  Vec bz, br, bh;  // H

  Eigen::Index input_size() const { return Wz.cols(); }
  Eigen::Index hidden_size() const { return Wz.rows(); }

  static GruParams zeros(Eigen::Index input, Eigen::Index hidden);
  static GruParams init(Eigen::Index input, Eigen::Index hidden, Rng& rng);
  void set_zero();
};

/// z = sigma(Wz x + Uz h + bz); r = sigma(Wr x + Ur h + br);
/// hcand = tanh(Wh x + Uh (r .* h) + bh); h' = (1 - z) .* h + z .* hcand.
Vec gru_step(const GruParams& p, const Vec& x, const Vec& h);

struct GruSequenceCache {
  std::vector<int> ids;
  std::vector<Vec> h;      // h[0] = 0 .. h[T]
  std::vector<Vec> z, r, hcand;
};

/// Folds gru_step over the embedded token ids (embedding is E x V, one
/// column per token). Empty sequence returns the zero vector.
/// Throws DataError when an id is outside the embedding table.
Vec gru_encode(const GruParams& p, const Mat& embedding, const std::vector<int>& ids,
               GruSequenceCache* cache = nullptr);

/// Backpropagates d(loss)/d(h_T) through the unrolled sequence, accumulating
/// into the parameter and embedding gradients.
void gru_backward(const GruParams& p, const Mat& embedding, const GruSequenceCache& cache,
                  const Vec& dh_final, GruParams& grads, Mat& embedding_grads);

// ---------------------------------------------------------------------------
// LSTM (dual-encoder baseline)
// ---------------------------------------------------------------------------

struct LstmParams {
  Mat Wi, Wf, Wo, Wg;  // H x I
  Mat Ui, Uf, Uo, Ug;  // H x H
  Vec bi, bf, bo, bg;  // H

  Eigen::Index input_size() const { return Wi.cols(); }
  Eigen::Index hidden_size() const { return Wi.rows(); }

  static LstmParams zeros(Eigen::Index input, Eigen::Index hidden);
  static LstmParams init(Eigen::Index input, Eigen::Index hidden, Rng& rng);
  void set_zero();
};

/// i/f/o = sigma(W x + U h + b); g = tanh(Wg x + Ug h + bg);
/// c' = f .* c + i .* g; h' = o .* tanh(c').
Vec lstm_step(const LstmParams& p, const Vec& x, const Vec& h, const Vec& c, Vec* c_out);

struct LstmSequenceCache {
  std::vector<int> ids;
  std::vector<Vec> h, c;   // h[0] = c[0] = 0
  std::vector<Vec> i, f, o, g;
};

Vec lstm_encode(const LstmParams& p, const Mat& embedding, const std::vector<int>& ids,
                LstmSequenceCache* cache = nullptr);

void lstm_backward(const LstmParams& p, const Mat& embedding, const LstmSequenceCache& cache,
                   const Vec& dh_final, LstmParams& grads, Mat& embedding_grads);

// ---------------------------------------------------------------------------
// Feed-forward predictor
// ---------------------------------------------------------------------------

struct DenseLayer {
  Mat M;
  Vec b;
  static DenseLayer zeros(Eigen::Index out, Eigen::Index in);
  static DenseLayer init(Eigen::Index out, Eigen::Index in, Rng& rng);
};

/// ReLU hidden layers followed by a scalar sigmoid output layer.
struct MlpParams {
  std::vector<DenseLayer> hidden;
  DenseLayer out;  // 1 x n

  Eigen::Index input_size() const {
    return hidden.empty() ? out.M.cols() : hidden.front().M.cols();
  }
  static MlpParams init(Eigen::Index input, const std::vector<int>& hidden_sizes, Rng& rng);
  void set_zero();
};

struct MlpCache {
  Vec input;
  std::vector<Vec> pre;   // pre-activation per hidden layer
  std::vector<Vec> post;  // ReLU output per hidden layer
  double logit = 0.0;
  double prob = 0.0;
};

/// Returns the sigmoid output in (0, 1). Throws DataError on shape mismatch.
double mlp_forward(const MlpParams& p, const Vec& x, MlpCache* cache = nullptr);

/// dprob is d(loss)/d(output). Returns d(loss)/d(input).
Vec mlp_backward(const MlpParams& p, const MlpCache& cache, double dprob, MlpParams& grads);

// ---------------------------------------------------------------------------
// Loss and optimizer
// ---------------------------------------------------------------------------

/// Mean of squared differences; throws DataError on empty or mismatched input.
double mse_loss(const std::vector<double>& predictions, const std::vector<double>& targets);

/// A named window onto one parameter tensor's storage.
struct ParamView {
  std::string name;
  double* data = nullptr;
  Eigen::Index size = 0;
};

std::vector<ParamView> param_views(const std::string& prefix, GruParams& p);
std::vector<ParamView> param_views(const std::string& prefix, LstmParams& p);
std::vector<ParamView> param_views(const std::string& prefix, MlpParams& p);
std::vector<ParamView> param_views(const std::string& prefix, DenseLayer& p);
std::vector<ParamView> param_views(const std::string& prefix, Mat& m);
std::vector<ParamView> param_views(const std::string& prefix, Vec& v);
void append_views(std::vector<ParamView>& dst, std::vector<ParamView> src);

/// Per-parameter squared-gradient accumulators for Adagrad.
struct AdagradState {
  double learning_rate = 0.01;
  double epsilon = 1e-8;
  std::vector<Eigen::ArrayXd> accumulators;

  void init(const std::vector<ParamView>& params);
};

/// G += g^2; theta -= lr * g / (sqrt(G) + eps), entrywise.
/// Throws DataError on a non-finite gradient.
void adagrad_update(const std::vector<ParamView>& params, const std::vector<ParamView>& grads,
                    AdagradState& state);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'C', 'V', 'R', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Self-describing model file: magic, version, a length-prefixed UTF-8 JSON
/// block (hyperparameters, vocabulary, kind), then named float32
/// little-endian arrays.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  nlohmann::json meta;
  std::vector<std::pair<std::string, std::vector<float>>> arrays;

  const std::vector<float>& array(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// float32 packing helpers. snap_f32 rounds a double tensor through float so
// that in-memory scores match scores after a checkpoint round trip bit for
// bit.
std::vector<float> to_f32(const double* data, Eigen::Index n);
void from_f32(const std::vector<float>& src, double* data, Eigen::Index n);
void snap_f32(const std::vector<ParamView>& params);

}  // namespace convrank::nn

#endif  // CONVRANK_NN_HPP
