#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "convrank/errors.hpp"
#include "convrank/rankers.hpp"

namespace convrank::rank {

using nn::Mat;
using nn::Vec;

namespace {

// ---------------------------------------------------------------------------
// Shared training plumbing
// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, std::size_t>> count_tokens(
    const std::vector<TrainingInstance>& instances, bool word_agent_tokens) {
  std::unordered_map<std::string, std::size_t> counts;
  auto add_turn = [&](const Turn& turn, const std::vector<std::string>& ents) {
    if (word_agent_tokens) {
      for (const auto& tok : text::tokenize(turn, ents)) ++counts[tok];
    } else {
      std::vector<std::string> words = text::word_tokens(turn.text);
      if (words.size() > text::kMaxUtteranceTokens) words.resize(text::kMaxUtteranceTokens);
      for (const auto& w : words) ++counts[w];
    }
  };
  static const std::vector<std::string> kNone;
  for (const auto& inst : instances) {
    for (std::size_t i = 0; i < inst.context.turns.size(); ++i)
      add_turn(inst.context.turns[i],
               i < inst.context.entities.size() ? inst.context.entities[i] : kNone);
    add_turn(Turn{inst.response.bot, inst.response.text, 0.0}, inst.response.entities);
  }
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end());
  return out;
}

void mark_touched(const std::vector<int>& ids, std::vector<char>& touched,
                  std::vector<int>& touched_list) {
  for (const int id : ids)
    if (!touched[static_cast<std::size_t>(id)]) {
      touched[static_cast<std::size_t>(id)] = 1;
      touched_list.push_back(id);
    }
}

// Adagrad over the embedding columns that actually received gradient.
// Identical to the dense update because untouched columns have zero gradient.
struct SparseEmbeddingAdagrad {
  Mat accum;
  double learning_rate = 0.01;
  double epsilon = 1e-8;

  void init(Eigen::Index rows, Eigen::Index cols, double lr) {
    accum = Mat::Zero(rows, cols);
    learning_rate = lr;
  }
  void update(Mat& embedding, Mat& grads, std::vector<char>& touched,
              std::vector<int>& touched_list) {
    for (const int id : touched_list) {
      auto g = grads.col(id);
      if (!g.array().isFinite().all())
        throw DataError("adagrad_update: non-finite gradient in embedding column " +
                        std::to_string(id));
      accum.col(id).array() += g.array().square();
      embedding.col(id).array() -=
          learning_rate * g.array() / (accum.col(id).array().sqrt() + epsilon);
      g.setZero();
      touched[static_cast<std::size_t>(id)] = 0;
    }
    touched_list.clear();
  }
};

struct EarlyStopper {
  int patience = 3;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int since_best = 0;

  bool observe(int epoch, double dev_loss) {
    if (dev_loss < best) {
      best = dev_loss;
      best_epoch = epoch;
      since_best = 0;
      return true;
    }
    ++since_best;
    return false;
  }
  bool should_stop() const { return since_best >= patience; }
};

void check_finite_loss(double loss, int epoch, std::size_t batch_start) {
  if (!std::isfinite(loss))
    throw DataError("training aborted: non-finite loss at epoch " + std::to_string(epoch) +
                    ", batch offset " + std::to_string(batch_start));
}

}  // namespace

// ---------------------------------------------------------------------------
// Neural forward/backward
// ---------------------------------------------------------------------------

NeuralGradients NeuralGradients::zeros_like(const NeuralRanker& model) {
  NeuralGradients g;
  g.embedding = Mat::Zero(model.embedding.rows(), model.embedding.cols());
  g.encoder = nn::GruParams::zeros(model.encoder.input_size(), model.encoder.hidden_size());
  g.sem = nn::DenseLayer::zeros(model.sem.M.rows(), model.sem.M.cols());
  g.predictor = model.predictor;
  g.predictor.set_zero();
  return g;
}

void NeuralGradients::set_zero() {
  embedding.setZero();
  encoder.set_zero();
  sem.M.setZero();
  sem.b.setZero();
  predictor.set_zero();
}

double neural_forward_backward(const NeuralRanker& model,
                               const std::vector<NeuralBatchItem>& batch, NeuralGradients& grads,
                               const NeuralBackwardOptions& options) {
  if (batch.empty()) throw DataError("neural_forward_backward: empty batch");
  const Eigen::Index H = model.encoder.hidden_size();
  const Eigen::Index S = model.sem.M.rows();
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  struct ItemCache {
    std::vector<nn::GruSequenceCache> ctx;
    nn::GruSequenceCache resp;
    Vec enc;      // post-dropout
    Vec sem_pre;
    nn::MlpCache mlp;
  };
  std::vector<ItemCache> caches(batch.size());

  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const NeuralBatchItem& item = batch[b];
    ItemCache& c = caches[b];
    c.ctx.resize(item.context.size());
    Vec ctx_sum = Vec::Zero(H);
    for (std::size_t t = 0; t < item.context.size(); ++t)
      ctx_sum += nn::gru_encode(model.encoder, model.embedding, item.context[t], &c.ctx[t]);
    const Vec resp = nn::gru_encode(model.encoder, model.embedding, item.response, &c.resp);

    c.enc.resize(2 * H);
    c.enc << ctx_sum, resp;
    if (options.dropout_masks != nullptr)
      c.enc = c.enc.cwiseProduct((*options.dropout_masks)[b]);

    c.sem_pre = model.sem.M * c.enc + model.sem.b;
    if (S + item.side.size() != model.predictor.input_size())
      throw DataError("neural_forward_backward: side-feature dimension mismatch");
    Vec pin(S + item.side.size());
    pin << c.sem_pre.cwiseMax(0.0), item.side;
    const double prob = nn::mlp_forward(model.predictor, pin, &c.mlp);
    const double diff = prob - item.target;
    loss += diff * diff;
  }
  loss *= inv_b;

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const NeuralBatchItem& item = batch[b];
    ItemCache& c = caches[b];
    const double dprob = 2.0 * (c.mlp.prob - item.target) * inv_b;
    const Vec dpin = nn::mlp_backward(model.predictor, c.mlp, dprob, grads.predictor);
    const Vec dsem_pre = dpin.head(S).cwiseProduct(
        c.sem_pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    grads.sem.M.noalias() += dsem_pre * c.enc.transpose();
    grads.sem.b += dsem_pre;

    Vec denc = model.sem.M.transpose() * dsem_pre;
    if (options.dropout_masks != nullptr)
      denc = denc.cwiseProduct((*options.dropout_masks)[b]);

    const Vec dctx = denc.head(H) * options.context_branch_scale;
    const Vec dresp = denc.tail(H) * options.response_branch_scale;
    if (options.context_branch_scale != 0.0)
      for (std::size_t t = 0; t < item.context.size(); ++t)
        nn::gru_backward(model.encoder, model.embedding, c.ctx[t], dctx, grads.encoder,
                         grads.embedding);
    if (options.response_branch_scale != 0.0)
      nn::gru_backward(model.encoder, model.embedding, c.resp, dresp, grads.encoder,
                       grads.embedding);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Neural trainer
// ---------------------------------------------------------------------------

namespace {

std::vector<NeuralBatchItem> encode_neural(const std::vector<TrainingInstance>& instances,
                                           const NeuralRanker& model) {
  std::vector<NeuralBatchItem> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    NeuralBatchItem e;
    e.context = model.encode_context(inst.context);
    e.response = model.encode_response(inst.response);
    e.side = feat::side_features(inst.context, inst.response, model.lexicon, model.side);
    e.target = inst.target;
    out.push_back(std::move(e));
  }
  return out;
}

double neural_dev_loss(const NeuralRanker& model, const std::vector<NeuralBatchItem>& dev) {
  std::vector<double> preds;
  std::vector<double> targets;
  preds.reserve(dev.size());
  targets.reserve(dev.size());
  for (const auto& e : dev) {
    preds.push_back(model.score_encoded(e.context, e.response, e.side));
    targets.push_back(e.target);
  }
  return nn::mse_loss(preds, targets);
}

struct NeuralParamSnapshot {
  Mat embedding;
  nn::GruParams encoder;
  nn::DenseLayer sem;
  nn::MlpParams predictor;

  static NeuralParamSnapshot take(const NeuralRanker& m) {
    return {m.embedding, m.encoder, m.sem, m.predictor};
  }
  void restore(NeuralRanker& m) const {
    m.embedding = embedding;
    m.encoder = encoder;
    m.sem = sem;
    m.predictor = predictor;
  }
};

}  // namespace

NeuralRanker train_neural(const Dataset& dataset, const NeuralConfig& config, TrainReport* report) {
  if (dataset.train.empty()) throw DataError("train_neural: empty training split");
  if (config.side.roster.empty())
    throw ConfigError("train_neural: side-feature roster must not be empty");

  NeuralRanker model;
  model.config = config;
  model.side = config.side;
  model.lexicon = config.lexicon;
  model.vocab = text::Vocabulary::build(count_tokens(dataset.train, /*word_agent_tokens=*/true),
                                        config.vocab_size);

  const auto E = static_cast<Eigen::Index>(config.embedding_dim);
  const auto H = static_cast<Eigen::Index>(config.hidden_dim);
  const auto S = static_cast<Eigen::Index>(config.sem_dim);
  const auto V = static_cast<Eigen::Index>(model.vocab.size());
  const auto side_dim = static_cast<Eigen::Index>(feat::side_feature_dim(config.side));

  Rng init_rng(mix_seeds(config.seed, 0x4e55));
  model.embedding = Mat::Zero(E, V);
  nn::glorot_fill(model.embedding, init_rng);
  model.encoder = nn::GruParams::init(E, H, init_rng);
  model.sem = nn::DenseLayer::init(S, 2 * H, init_rng);
  model.predictor = nn::MlpParams::init(S + side_dim, config.predictor_layers, init_rng);

  const std::vector<NeuralBatchItem> train = encode_neural(dataset.train, model);
  const std::vector<NeuralBatchItem> dev = encode_neural(dataset.dev, model);

  NeuralGradients grads = NeuralGradients::zeros_like(model);

  // Dense parameters go through the generic Adagrad; the embedding table is
  // updated column-sparsely.
  std::vector<nn::ParamView> params = nn::param_views("encoder", model.encoder);
  nn::append_views(params, nn::param_views("sem", model.sem));
  nn::append_views(params, nn::param_views("predictor", model.predictor));
  std::vector<nn::ParamView> grad_views = nn::param_views("encoder", grads.encoder);
  nn::append_views(grad_views, nn::param_views("sem", grads.sem));
  nn::append_views(grad_views, nn::param_views("predictor", grads.predictor));

  nn::AdagradState opt;
  opt.learning_rate = config.learning_rate;
  opt.init(params);
  SparseEmbeddingAdagrad emb_opt;
  emb_opt.init(E, V, config.learning_rate);
  std::vector<char> touched(static_cast<std::size_t>(V), 0);
  std::vector<int> touched_list;

  Rng order_rng(mix_seeds(config.seed, 0x04d3));
  Rng dropout_rng(mix_seeds(config.seed, 0xd400));
  const double keep = 1.0 - config.dropout;

  EarlyStopper stopper{config.patience};
  NeuralParamSnapshot best = NeuralParamSnapshot::take(model);
  TrainReport rep;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch_size = static_cast<std::size_t>(std::max(1, config.batch_size));

  std::vector<NeuralBatchItem> batch;
  std::vector<Vec> masks;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;

    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t bn = std::min(batch_size, order.size() - start);
      batch.clear();
      for (std::size_t b = 0; b < bn; ++b) batch.push_back(train[order[start + b]]);

      NeuralBackwardOptions options;
      if (config.dropout > 0.0) {
        masks.resize(bn);
        for (std::size_t b = 0; b < bn; ++b) {
          masks[b].resize(2 * H);
          for (Eigen::Index i = 0; i < 2 * H; ++i)
            masks[b](i) = dropout_rng.next_double() < keep ? 1.0 / keep : 0.0;
        }
        options.dropout_masks = &masks;
      }

      const double batch_loss = neural_forward_backward(model, batch, grads, options);
      check_finite_loss(batch_loss, epoch, start);
      loss_sum += batch_loss;
      ++n_batches;

      for (const auto& item : batch) {
        for (const auto& seq : item.context) mark_touched(seq, touched, touched_list);
        mark_touched(item.response, touched, touched_list);
      }
      nn::adagrad_update(params, grad_views, opt);
      emb_opt.update(model.embedding, grads.embedding, touched, touched_list);
      grads.encoder.set_zero();
      grads.sem.M.setZero();
      grads.sem.b.setZero();
      grads.predictor.set_zero();
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, n_batches));
    stats.dev_loss = dev.empty() ? stats.train_loss : neural_dev_loss(model, dev);
    rep.epochs.push_back(stats);
    if (stopper.observe(epoch, stats.dev_loss)) best = NeuralParamSnapshot::take(model);
    if (stopper.should_stop()) break;
  }

  best.restore(model);
  rep.best_epoch = stopper.best_epoch;
  rep.best_dev_loss = stopper.best;
  if (report != nullptr) *report = rep;

  std::vector<nn::ParamView> all = nn::param_views("embedding", model.embedding);
  nn::append_views(all, nn::param_views("encoder", model.encoder));
  nn::append_views(all, nn::param_views("sem", model.sem));
  nn::append_views(all, nn::param_views("predictor", model.predictor));
  nn::snap_f32(all);
  return model;
}

NeuralRanker train_neural_grid(const Dataset& dataset, const NeuralConfig& base,
                               std::vector<GridEntry>* grid_report, TrainReport* best_report,
                               const std::vector<int>& gru_sizes,
                               const std::vector<std::vector<int>>& layouts) {
  std::unique_ptr<NeuralRanker> best_model;
  TrainReport best_rep;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<GridEntry> entries;

  for (const int hidden : gru_sizes) {
    for (const auto& layout : layouts) {
      NeuralConfig config = base;
      config.hidden_dim = hidden;
      config.predictor_layers = layout;
      TrainReport rep;
      NeuralRanker model = train_neural(dataset, config, &rep);
      entries.push_back({hidden, layout, rep.best_dev_loss});
      if (rep.best_dev_loss < best_loss) {
        best_loss = rep.best_dev_loss;
        best_rep = rep;
        best_model = std::make_unique<NeuralRanker>(std::move(model));
      }
    }
  }
  if (grid_report != nullptr) *grid_report = entries;
  if (best_report != nullptr) *best_report = best_rep;
  return std::move(*best_model);
}

// ---------------------------------------------------------------------------
// Linear trainer
// ---------------------------------------------------------------------------

LinearRanker train_linear(const Dataset& dataset, const LinearConfig& config) {
  if (dataset.train.empty()) throw DataError("train_linear: empty training split");
  LinearRanker model;
  model.hash_bits = config.hash_bits;
  model.weights = Eigen::VectorXd::Zero(Eigen::Index{1} << config.hash_bits);
  model.bias = 0.0;
  model.dull_phrases = text::default_dull_phrases();

  const std::uint64_t mask = (std::uint64_t{1} << config.hash_bits) - 1;
  // Squared-loss SGD with adaptive per-coordinate steps (the default update
  // family of hashed linear learners; plain SGD needs per-corpus learning
  // rate tuning to stay stable against dense feature rows).
  Eigen::VectorXd accum = Eigen::VectorXd::Zero(model.weights.size());
  double bias_accum = 0.0;
  constexpr double kEps = 1e-8;
  // Fixed data order: a duplicated instance behaves exactly like an extra
  // pass over the single instance.
  for (int pass = 0; pass < config.passes; ++pass) {
    for (const auto& inst : dataset.train) {
      const auto feats = model.features(inst.context, inst.response);
      double pred = model.bias;
      for (const auto& [h, v] : feats)
        pred +=
            model.weights(static_cast<Eigen::Index>(h & mask)) * ((h >> 63) != 0 ? -1.0 : 1.0) * v;
      const double err = pred - inst.target;
      for (const auto& [h, v] : feats) {
        const auto idx = static_cast<Eigen::Index>(h & mask);
        const double g = err * ((h >> 63) != 0 ? -1.0 : 1.0) * v;
        accum(idx) += g * g;
        model.weights(idx) -= config.learning_rate * g / (std::sqrt(accum(idx)) + kEps);
      }
      bias_accum += err * err;
      model.bias -= config.learning_rate * err / (std::sqrt(bias_accum) + kEps);
    }
  }

  std::vector<nn::ParamView> views = nn::param_views("weights", model.weights);
  nn::snap_f32(views);
  model.bias = static_cast<double>(static_cast<float>(model.bias));
  return model;
}

// ---------------------------------------------------------------------------
// Dual-encoder trainer
// ---------------------------------------------------------------------------

namespace {

struct EncodedDual {
  std::vector<int> ctx;
  std::vector<int> resp;
  double target = 0.0;
};

double dual_dev_loss(const DualEncoderRanker& model, const std::vector<EncodedDual>& dev) {
  std::vector<double> preds;
  std::vector<double> targets;
  for (const auto& e : dev) {
    preds.push_back(model.score_encoded(e.ctx, e.resp));
    targets.push_back(e.target);
  }
  return nn::mse_loss(preds, targets);
}

}  // namespace

DualEncoderRanker train_dual_encoder(const Dataset& dataset, const DualEncoderConfig& config,
                                     TrainReport* report) {
  if (dataset.train.empty()) throw DataError("train_dual_encoder: empty training split");

  DualEncoderRanker model;
  model.config = config;
  model.vocab = text::Vocabulary::build(count_tokens(dataset.train, /*word_agent_tokens=*/false),
                                        config.vocab_size);

  const auto E = static_cast<Eigen::Index>(config.embedding_dim);
  const auto H = static_cast<Eigen::Index>(config.hidden_dim);
  const auto V = static_cast<Eigen::Index>(model.vocab.size());

  Rng init_rng(mix_seeds(config.seed, 0xd0a1));
  model.embedding = Mat::Zero(E, V);
  nn::glorot_fill(model.embedding, init_rng);
  model.context_encoder = nn::LstmParams::init(E, H, init_rng);
  model.response_encoder = nn::LstmParams::init(E, H, init_rng);
  model.predictor = nn::MlpParams::init(2 * H, config.predictor_layers, init_rng);

  auto encode_all = [&](const std::vector<TrainingInstance>& instances) {
    std::vector<EncodedDual> out;
    out.reserve(instances.size());
    for (const auto& inst : instances)
      out.push_back({model.encode_last_user_turn(inst.context),
                     model.encode_text(inst.response.text), inst.target});
    return out;
  };
  const std::vector<EncodedDual> train = encode_all(dataset.train);
  const std::vector<EncodedDual> dev = encode_all(dataset.dev);

  nn::LstmParams ctx_grads = nn::LstmParams::zeros(E, H);
  nn::LstmParams resp_grads = nn::LstmParams::zeros(E, H);
  nn::MlpParams pred_grads = model.predictor;
  pred_grads.set_zero();
  Mat emb_grads = Mat::Zero(E, V);

  std::vector<nn::ParamView> params = nn::param_views("context_encoder", model.context_encoder);
  nn::append_views(params, nn::param_views("response_encoder", model.response_encoder));
  nn::append_views(params, nn::param_views("predictor", model.predictor));
  std::vector<nn::ParamView> grad_views = nn::param_views("context_encoder", ctx_grads);
  nn::append_views(grad_views, nn::param_views("response_encoder", resp_grads));
  nn::append_views(grad_views, nn::param_views("predictor", pred_grads));

  nn::AdagradState opt;
  opt.learning_rate = config.learning_rate;
  opt.init(params);
  SparseEmbeddingAdagrad emb_opt;
  emb_opt.init(E, V, config.learning_rate);
  std::vector<char> touched(static_cast<std::size_t>(V), 0);
  std::vector<int> touched_list;

  Rng order_rng(mix_seeds(config.seed, 0xd0a2));
  EarlyStopper stopper{config.patience};
  DualEncoderRanker best = model;
  TrainReport rep;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch_size = static_cast<std::size_t>(std::max(1, config.batch_size));
  std::vector<nn::LstmSequenceCache> ctx_caches(batch_size), resp_caches(batch_size);
  std::vector<nn::MlpCache> mlp_caches(batch_size);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;

    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t bn = std::min(batch_size, order.size() - start);
      double batch_loss = 0.0;
      for (std::size_t b = 0; b < bn; ++b) {
        const EncodedDual& e = train[order[start + b]];
        const Vec h_ctx =
            nn::lstm_encode(model.context_encoder, model.embedding, e.ctx, &ctx_caches[b]);
        const Vec h_resp =
            nn::lstm_encode(model.response_encoder, model.embedding, e.resp, &resp_caches[b]);
        Vec pin(2 * H);
        pin << h_ctx, h_resp;
        const double prob = nn::mlp_forward(model.predictor, pin, &mlp_caches[b]);
        const double diff = prob - e.target;
        batch_loss += diff * diff;
      }
      batch_loss /= static_cast<double>(bn);
      check_finite_loss(batch_loss, epoch, start);
      loss_sum += batch_loss;
      ++n_batches;

      for (std::size_t b = 0; b < bn; ++b) {
        const EncodedDual& e = train[order[start + b]];
        const double dprob = 2.0 * (mlp_caches[b].prob - e.target) / static_cast<double>(bn);
        const Vec dpin = nn::mlp_backward(model.predictor, mlp_caches[b], dprob, pred_grads);
        nn::lstm_backward(model.context_encoder, model.embedding, ctx_caches[b], dpin.head(H),
                          ctx_grads, emb_grads);
        nn::lstm_backward(model.response_encoder, model.embedding, resp_caches[b], dpin.tail(H),
                          resp_grads, emb_grads);
        mark_touched(e.ctx, touched, touched_list);
        mark_touched(e.resp, touched, touched_list);
      }
      nn::adagrad_update(params, grad_views, opt);
      emb_opt.update(model.embedding, emb_grads, touched, touched_list);
      ctx_grads.set_zero();
      resp_grads.set_zero();
      pred_grads.set_zero();
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, n_batches));
    stats.dev_loss = dev.empty() ? stats.train_loss : dual_dev_loss(model, dev);
    rep.epochs.push_back(stats);
    if (stopper.observe(epoch, stats.dev_loss)) best = model;
    if (stopper.should_stop()) break;
  }

  model = std::move(best);
  rep.best_epoch = stopper.best_epoch;
  rep.best_dev_loss = stopper.best;
  if (report != nullptr) *report = rep;

  std::vector<nn::ParamView> all = nn::param_views("embedding", model.embedding);
  nn::append_views(all, nn::param_views("context_encoder", model.context_encoder));
  nn::append_views(all, nn::param_views("response_encoder", model.response_encoder));
  nn::append_views(all, nn::param_views("predictor", model.predictor));
  nn::snap_f32(all);
  return model;
}

}  // namespace convrank::rank
