#include "convrank/nn.hpp"

#include <cmath>

#include "convrank/errors.hpp"

namespace convrank::nn {

void glorot_fill(Mat& m, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  double* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = (2.0 * rng.next_double() - 1.0) * s;
}

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

GruParams GruParams::zeros(Eigen::Index input, Eigen::Index hidden) {
  GruParams p;
  p.Wz = Mat::Zero(hidden, input);
  p.Wr = Mat::Zero(hidden, input);
  p.Wh = Mat::Zero(hidden, input);
  p.Uz = Mat::Zero(hidden, hidden);
  p.Ur = Mat::Zero(hidden, hidden);
  p.Uh = Mat::Zero(hidden, hidden);
  p.bz = Vec::Zero(hidden);
  p.br = Vec::Zero(hidden);
  p.bh = Vec::Zero(hidden);
  return p;
}

GruParams GruParams::init(Eigen::Index input, Eigen::Index hidden, Rng& rng) {
  GruParams p = zeros(input, hidden);
  glorot_fill(p.Wz, rng);
  glorot_fill(p.Wr, rng);
  glorot_fill(p.Wh, rng);
  glorot_fill(p.Uz, rng);
  glorot_fill(p.Ur, rng);
  glorot_fill(p.Uh, rng);
  return p;
}

void GruParams::set_zero() {
  Wz.setZero();
  Wr.setZero();
  Wh.setZero();
  Uz.setZero();
  Ur.setZero();
  Uh.setZero();
  bz.setZero();
  br.setZero();
  bh.setZero();
}

Vec gru_step(const GruParams& p, const Vec& x, const Vec& h) {
  if (x.size() != p.input_size() || h.size() != p.hidden_size())
    throw DataError("gru_step: shape mismatch");
  const Vec z = sigmoid(p.Wz * x + p.Uz * h + p.bz);
  const Vec r = sigmoid(p.Wr * x + p.Ur * h + p.br);
  const Vec hcand = (p.Wh * x + p.Uh * r.cwiseProduct(h) + p.bh).array().tanh();
  return (Vec::Ones(h.size()) - z).cwiseProduct(h) + z.cwiseProduct(hcand);
}

Vec gru_encode(const GruParams& p, const Mat& embedding, const std::vector<int>& ids,
               GruSequenceCache* cache) {
  const Eigen::Index H = p.hidden_size();
  Vec h = Vec::Zero(H);
  if (cache != nullptr) {
    cache->ids = ids;
    cache->h.assign(1, h);
    cache->z.clear();
    cache->r.clear();
    cache->hcand.clear();
  }
  for (const int id : ids) {
    if (id < 0 || id >= embedding.cols())
      throw DataError("gru_encode: token id out of range: " + std::to_string(id));
    const Vec x = embedding.col(id);
    const Vec z = sigmoid(p.Wz * x + p.Uz * h + p.bz);
    const Vec r = sigmoid(p.Wr * x + p.Ur * h + p.br);
    const Vec hcand = (p.Wh * x + p.Uh * r.cwiseProduct(h) + p.bh).array().tanh();
    h = (Vec::Ones(H) - z).cwiseProduct(h) + z.cwiseProduct(hcand);
    if (cache != nullptr) {
      cache->z.push_back(z);
      cache->r.push_back(r);
      cache->hcand.push_back(hcand);
      cache->h.push_back(h);
    }
  }
  return h;
}

void gru_backward(const GruParams& p, const Mat& embedding, const GruSequenceCache& cache,
                  const Vec& dh_final, GruParams& grads, Mat& embedding_grads) {
  Vec dh = dh_final;
  const std::size_t T = cache.ids.size();
  for (std::size_t t = T; t-- > 0;) {
    const Vec& h_prev = cache.h[t];
    const Vec& z = cache.z[t];
    const Vec& r = cache.r[t];
    const Vec& hc = cache.hcand[t];
    const Vec x = embedding.col(cache.ids[t]);

    const Vec dz = dh.cwiseProduct(hc - h_prev);
    const Vec dhc = dh.cwiseProduct(z);
    Vec dh_prev = dh.cwiseProduct(Vec::Ones(z.size()) - z);

    const Vec da_c = dhc.cwiseProduct(Vec::Ones(hc.size()) - hc.cwiseProduct(hc));
    grads.Wh.noalias() += da_c * x.transpose();
    grads.Uh.noalias() += da_c * r.cwiseProduct(h_prev).transpose();
    grads.bh += da_c;
    const Vec drh = p.Uh.transpose() * da_c;
    const Vec dr = drh.cwiseProduct(h_prev);
    dh_prev += drh.cwiseProduct(r);

    const Vec da_r = dr.cwiseProduct(r).cwiseProduct(Vec::Ones(r.size()) - r);
    grads.Wr.noalias() += da_r * x.transpose();
    grads.Ur.noalias() += da_r * h_prev.transpose();
    grads.br += da_r;
    dh_prev += p.Ur.transpose() * da_r;

    const Vec da_z = dz.cwiseProduct(z).cwiseProduct(Vec::Ones(z.size()) - z);
    grads.Wz.noalias() += da_z * x.transpose();
    grads.Uz.noalias() += da_z * h_prev.transpose();
    grads.bz += da_z;
    dh_prev += p.Uz.transpose() * da_z;

    embedding_grads.col(cache.ids[t]) +=
        p.Wz.transpose() * da_z + p.Wr.transpose() * da_r + p.Wh.transpose() * da_c;
    dh = std::move(dh_prev);
  }
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

LstmParams LstmParams::zeros(Eigen::Index input, Eigen::Index hidden) {
  LstmParams p;
  p.Wi = Mat::Zero(hidden, input);
  p.Wf = Mat::Zero(hidden, input);
  p.Wo = Mat::Zero(hidden, input);
  p.Wg = Mat::Zero(hidden, input);
  p.Ui = Mat::Zero(hidden, hidden);
  p.Uf = Mat::Zero(hidden, hidden);
  p.Uo = Mat::Zero(hidden, hidden);
  p.Ug = Mat::Zero(hidden, hidden);
  p.bi = Vec::Zero(hidden);
  p.bf = Vec::Zero(hidden);
  p.bo = Vec::Zero(hidden);
  p.bg = Vec::Zero(hidden);
  return p;
}

LstmParams LstmParams::init(Eigen::Index input, Eigen::Index hidden, Rng& rng) {
  LstmParams p = zeros(input, hidden);
  glorot_fill(p.Wi, rng);
  glorot_fill(p.Wf, rng);
  glorot_fill(p.Wo, rng);
  glorot_fill(p.Wg, rng);
  glorot_fill(p.Ui, rng);
  glorot_fill(p.Uf, rng);
  glorot_fill(p.Uo, rng);
  glorot_fill(p.Ug, rng);
  return p;
}

void LstmParams::set_zero() {
  Wi.setZero();
  Wf.setZero();
  Wo.setZero();
  Wg.setZero();
  Ui.setZero();
  Uf.setZero();
  Uo.setZero();
  Ug.setZero();
  bi.setZero();
  bf.setZero();
  bo.setZero();
  bg.setZero();
}

Vec lstm_step(const LstmParams& p, const Vec& x, const Vec& h, const Vec& c, Vec* c_out) {
  if (x.size() != p.input_size() || h.size() != p.hidden_size() || c.size() != p.hidden_size())
    throw DataError("lstm_step: shape mismatch");
  const Vec i = sigmoid(p.Wi * x + p.Ui * h + p.bi);
  const Vec f = sigmoid(p.Wf * x + p.Uf * h + p.bf);
  const Vec o = sigmoid(p.Wo * x + p.Uo * h + p.bo);
  const Vec g = (p.Wg * x + p.Ug * h + p.bg).array().tanh();
  const Vec c_new = f.cwiseProduct(c) + i.cwiseProduct(g);
  if (c_out != nullptr) *c_out = c_new;
  return o.cwiseProduct(c_new.array().tanh().matrix());
}

Vec lstm_encode(const LstmParams& p, const Mat& embedding, const std::vector<int>& ids,
                LstmSequenceCache* cache) {
  const Eigen::Index H = p.hidden_size();
  Vec h = Vec::Zero(H);
  Vec c = Vec::Zero(H);
  if (cache != nullptr) {
    cache->ids = ids;
    cache->h.assign(1, h);
    cache->c.assign(1, c);
    cache->i.clear();
    cache->f.clear();
    cache->o.clear();
    cache->g.clear();
  }
  for (const int id : ids) {
    if (id < 0 || id >= embedding.cols())
      throw DataError("lstm_encode: token id out of range: " + std::to_string(id));
    const Vec x = embedding.col(id);
    const Vec i = sigmoid(p.Wi * x + p.Ui * h + p.bi);
    const Vec f = sigmoid(p.Wf * x + p.Uf * h + p.bf);
    const Vec o = sigmoid(p.Wo * x + p.Uo * h + p.bo);
    const Vec g = (p.Wg * x + p.Ug * h + p.bg).array().tanh();
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    h = o.cwiseProduct(c.array().tanh().matrix());
    if (cache != nullptr) {
      cache->i.push_back(i);
      cache->f.push_back(f);
      cache->o.push_back(o);
      cache->g.push_back(g);
      cache->c.push_back(c);
      cache->h.push_back(h);
    }
  }
  return h;
}

void lstm_backward(const LstmParams& p, const Mat& embedding, const LstmSequenceCache& cache,
                   const Vec& dh_final, LstmParams& grads, Mat& embedding_grads) {
  const std::size_t T = cache.ids.size();
  Vec dh = dh_final;
  Vec dc = Vec::Zero(dh.size());
  for (std::size_t t = T; t-- > 0;) {
    const Vec& h_prev = cache.h[t];
    const Vec& c_prev = cache.c[t];
    const Vec& c_new = cache.c[t + 1];
    const Vec& i = cache.i[t];
    const Vec& f = cache.f[t];
    const Vec& o = cache.o[t];
    const Vec& g = cache.g[t];
    const Vec x = embedding.col(cache.ids[t]);

    const Vec tanh_c = c_new.array().tanh();
    const Vec do_ = dh.cwiseProduct(tanh_c);
    dc += dh.cwiseProduct(o).cwiseProduct(Vec::Ones(dh.size()) - tanh_c.cwiseProduct(tanh_c));

    const Vec df = dc.cwiseProduct(c_prev);
    const Vec di = dc.cwiseProduct(g);
    const Vec dg = dc.cwiseProduct(i);
    Vec dc_prev = dc.cwiseProduct(f);

    const Vec da_i = di.cwiseProduct(i).cwiseProduct(Vec::Ones(i.size()) - i);
    const Vec da_f = df.cwiseProduct(f).cwiseProduct(Vec::Ones(f.size()) - f);
    const Vec da_o = do_.cwiseProduct(o).cwiseProduct(Vec::Ones(o.size()) - o);
    const Vec da_g = dg.cwiseProduct(Vec::Ones(g.size()) - g.cwiseProduct(g));

    grads.Wi.noalias() += da_i * x.transpose();
    grads.Wf.noalias() += da_f * x.transpose();
    grads.Wo.noalias() += da_o * x.transpose();
    grads.Wg.noalias() += da_g * x.transpose();
    grads.Ui.noalias() += da_i * h_prev.transpose();
    grads.Uf.noalias() += da_f * h_prev.transpose();
    grads.Uo.noalias() += da_o * h_prev.transpose();
    grads.Ug.noalias() += da_g * h_prev.transpose();
    grads.bi += da_i;
    grads.bf += da_f;
    grads.bo += da_o;
    grads.bg += da_g;

    embedding_grads.col(cache.ids[t]) += p.Wi.transpose() * da_i + p.Wf.transpose() * da_f +
                                         p.Wo.transpose() * da_o + p.Wg.transpose() * da_g;
    dh = p.Ui.transpose() * da_i + p.Uf.transpose() * da_f + p.Uo.transpose() * da_o +
         p.Ug.transpose() * da_g;
    dc = std::move(dc_prev);
  }
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

DenseLayer DenseLayer::zeros(Eigen::Index out, Eigen::Index in) {
  return DenseLayer{Mat::Zero(out, in), Vec::Zero(out)};
}

DenseLayer DenseLayer::init(Eigen::Index out, Eigen::Index in, Rng& rng) {
  DenseLayer l = zeros(out, in);
  glorot_fill(l.M, rng);
  return l;
}

MlpParams MlpParams::init(Eigen::Index input, const std::vector<int>& hidden_sizes, Rng& rng) {
  MlpParams p;
  Eigen::Index in = input;
  for (const int h : hidden_sizes) {
    p.hidden.push_back(DenseLayer::init(h, in, rng));
    in = h;
  }
  p.out = DenseLayer::init(1, in, rng);
  return p;
}

void MlpParams::set_zero() {
  for (auto& l : hidden) {
    l.M.setZero();
    l.b.setZero();
  }
  out.M.setZero();
  out.b.setZero();
}

double mlp_forward(const MlpParams& p, const Vec& x, MlpCache* cache) {
  if (x.size() != p.input_size()) throw DataError("mlp_forward: input size mismatch");
  if (cache != nullptr) {
    cache->input = x;
    cache->pre.clear();
    cache->post.clear();
  }
  Vec cur = x;
  for (const auto& layer : p.hidden) {
    Vec pre = layer.M * cur + layer.b;
    Vec post = pre.cwiseMax(0.0);
    if (cache != nullptr) {
      cache->pre.push_back(pre);
      cache->post.push_back(post);
    }
    cur = std::move(post);
  }
  const double logit = (p.out.M * cur + p.out.b)(0);
  const double prob = sigmoid(logit);
  if (cache != nullptr) {
    cache->logit = logit;
    cache->prob = prob;
  }
  return prob;
}

Vec mlp_backward(const MlpParams& p, const MlpCache& cache, double dprob, MlpParams& grads) {
  const double dlogit = dprob * cache.prob * (1.0 - cache.prob);
  const Vec& last = cache.post.empty() ? cache.input : cache.post.back();
  grads.out.M.noalias() += dlogit * last.transpose();
  grads.out.b(0) += dlogit;
  Vec dcur = p.out.M.transpose() * dlogit;

  for (std::size_t l = p.hidden.size(); l-- > 0;) {
    const Vec relu_mask =
        cache.pre[l].unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    const Vec dpre = dcur.cwiseProduct(relu_mask);
    const Vec& below = l == 0 ? cache.input : cache.post[l - 1];
    grads.hidden[l].M.noalias() += dpre * below.transpose();
    grads.hidden[l].b += dpre;
    dcur = p.hidden[l].M.transpose() * dpre;
  }
  return dcur;
}

// ---------------------------------------------------------------------------
// Loss / optimizer
// ---------------------------------------------------------------------------

double mse_loss(const std::vector<double>& predictions, const std::vector<double>& targets) {
  if (predictions.empty()) throw DataError("mse_loss: empty input");
  if (predictions.size() != targets.size()) throw DataError("mse_loss: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    sum += d * d;
  }
  return sum / static_cast<double>(predictions.size());
}

std::vector<ParamView> param_views(const std::string& prefix, Mat& m) {
  return {{prefix, m.data(), m.size()}};
}

std::vector<ParamView> param_views(const std::string& prefix, Vec& v) {
  return {{prefix, v.data(), v.size()}};
}

std::vector<ParamView> param_views(const std::string& prefix, GruParams& p) {
  return {{prefix + ".Wz", p.Wz.data(), p.Wz.size()}, {prefix + ".Wr", p.Wr.data(), p.Wr.size()},
          {prefix + ".Wh", p.Wh.data(), p.Wh.size()}, {prefix + ".Uz", p.Uz.data(), p.Uz.size()},
          {prefix + ".Ur", p.Ur.data(), p.Ur.size()}, {prefix + ".Uh", p.Uh.data(), p.Uh.size()},
          {prefix + ".bz", p.bz.data(), p.bz.size()}, {prefix + ".br", p.br.data(), p.br.size()},
          {prefix + ".bh", p.bh.data(), p.bh.size()}};
}

std::vector<ParamView> param_views(const std::string& prefix, LstmParams& p) {
  return {{prefix + ".Wi", p.Wi.data(), p.Wi.size()}, {prefix + ".Wf", p.Wf.data(), p.Wf.size()},
          {prefix + ".Wo", p.Wo.data(), p.Wo.size()}, {prefix + ".Wg", p.Wg.data(), p.Wg.size()},
          {prefix + ".Ui", p.Ui.data(), p.Ui.size()}, {prefix + ".Uf", p.Uf.data(), p.Uf.size()},
          {prefix + ".Uo", p.Uo.data(), p.Uo.size()}, {prefix + ".Ug", p.Ug.data(), p.Ug.size()},
          {prefix + ".bi", p.bi.data(), p.bi.size()}, {prefix + ".bf", p.bf.data(), p.bf.size()},
          {prefix + ".bo", p.bo.data(), p.bo.size()}, {prefix + ".bg", p.bg.data(), p.bg.size()}};
}

std::vector<ParamView> param_views(const std::string& prefix, DenseLayer& p) {
  return {{prefix + ".M", p.M.data(), p.M.size()}, {prefix + ".b", p.b.data(), p.b.size()}};
}

std::vector<ParamView> param_views(const std::string& prefix, MlpParams& p) {
  std::vector<ParamView> out;
  for (std::size_t i = 0; i < p.hidden.size(); ++i)
    append_views(out, param_views(prefix + ".hidden" + std::to_string(i), p.hidden[i]));
  append_views(out, param_views(prefix + ".out", p.out));
  return out;
}

void append_views(std::vector<ParamView>& dst, std::vector<ParamView> src) {
  for (auto& v : src) dst.push_back(std::move(v));
}

void AdagradState::init(const std::vector<ParamView>& params) {
  accumulators.clear();
  accumulators.reserve(params.size());
  for (const auto& p : params) accumulators.emplace_back(Eigen::ArrayXd::Zero(p.size));
}

void adagrad_update(const std::vector<ParamView>& params, const std::vector<ParamView>& grads,
                    AdagradState& state) {
  if (params.size() != grads.size() || params.size() != state.accumulators.size())
    throw DataError("adagrad_update: parameter/gradient/state mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size != grads[i].size)
      throw DataError("adagrad_update: shape mismatch at " + params[i].name);
    Eigen::Map<Eigen::ArrayXd> theta(params[i].data, params[i].size);
    Eigen::Map<const Eigen::ArrayXd> g(grads[i].data, grads[i].size);
    if (!g.isFinite().all())
      throw DataError("adagrad_update: non-finite gradient in " + params[i].name);
    Eigen::ArrayXd& acc = state.accumulators[i];
    acc += g.square();
    theta -= state.learning_rate * g / (acc.sqrt() + state.epsilon);
  }
}

}  // namespace convrank::nn
