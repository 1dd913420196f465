#include "convrank/features.hpp"

#include <algorithm>
#include <cmath>

#include "convrank/errors.hpp"
#include "convrank/rng.hpp"

namespace convrank::feat {

namespace {

using SparseVec = std::unordered_map<std::string, double>;

SparseVec tf_vector(const std::vector<std::string>& tokens, const TfidfWeights& tfidf) {
  SparseVec v;
  for (const auto& t : tokens) v[t] += 1.0;
  for (auto& [term, value] : v) value *= tfidf.weight(term);
  return v;
}

double cosine(const SparseVec& a, const SparseVec& b) {
  if (a.empty() || b.empty()) return 0.0;
  const SparseVec& small = a.size() <= b.size() ? a : b;
  const SparseVec& large = a.size() <= b.size() ? b : a;
  double dot = 0.0;
  for (const auto& [term, value] : small) {
    auto it = large.find(term);
    if (it != large.end()) dot += value * it->second;
  }
  if (dot == 0.0) return 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (const auto& [term, value] : a) na += value * value;
  for (const auto& [term, value] : b) nb += value * value;
  return dot / std::sqrt(na * nb);
}

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

std::uint64_t token_hash(const std::vector<std::string>& tokens) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tokens) {
    h = fnv1a64(t.data(), t.size(), h);
    h = fnv1a64("\x1f", 1, h);
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// tf-idf / flow features
// ---------------------------------------------------------------------------

TfidfWeights TfidfWeights::fit(const Corpus& corpus) {
  std::unordered_map<std::string, std::size_t> df;
  std::size_t n_docs = 0;
  for (const auto& d : corpus.dialogues) {
    for (const auto& turn : d.turns) {
      ++n_docs;
      std::unordered_set<std::string> seen;
      for (const auto& w : text::word_tokens(turn.text))
        if (seen.insert(w).second) ++df[w];
    }
  }
  TfidfWeights w;
  for (const auto& [term, count] : df)
    w.idf.emplace(term, std::log((1.0 + static_cast<double>(n_docs)) /
                                 (1.0 + static_cast<double>(count))) +
                            1.0);
  return w;
}

FlowFeatures flow_features(const RankingContext& context, const Candidate& response,
                           const std::vector<std::string>& dull_phrases,
                           const TfidfWeights& tfidf) {
  FlowFeatures f;
  const std::vector<std::string> resp_tokens = text::word_tokens(response.text);
  if (resp_tokens.empty()) {
    f.dullness = 0.0;
    f.coherence = 0.0;
    f.information_flow = 1.0;
    return f;
  }
  const SparseVec resp = tf_vector(resp_tokens, tfidf);

  double dull = 0.0;
  for (const auto& phrase : dull_phrases)
    dull = std::max(dull, cosine(resp, tf_vector(text::word_tokens(phrase), tfidf)));
  f.dullness = clamp01(dull);

  // Mean of the context turn vectors against the response.
  SparseVec ctx_sum;
  std::size_t n_ctx = 0;
  for (const auto& turn : context.turns) {
    const auto tokens = text::word_tokens(turn.text);
    if (tokens.empty()) continue;
    ++n_ctx;
    for (const auto& [term, value] : tf_vector(tokens, tfidf)) ctx_sum[term] += value;
  }
  if (n_ctx > 0) {
    for (auto& [term, value] : ctx_sum) value /= static_cast<double>(n_ctx);
    f.coherence = clamp01(cosine(ctx_sum, resp));
  }

  const Turn* last_system = nullptr;
  for (const auto& turn : context.turns)
    if (turn.is_system()) last_system = &turn;
  if (last_system != nullptr) {
    f.information_flow =
        clamp01(1.0 - cosine(tf_vector(text::word_tokens(last_system->text), tfidf), resp));
  } else {
    f.information_flow = 1.0;
  }
  return f;
}

double entity_overlap(const std::unordered_set<std::string>& context_set,
                      const std::unordered_set<std::string>& response_set) {
  if (context_set.empty() && response_set.empty()) return 0.0;
  std::size_t intersection = 0;
  const auto& small = context_set.size() <= response_set.size() ? context_set : response_set;
  const auto& large = context_set.size() <= response_set.size() ? response_set : context_set;
  for (const auto& e : small)
    if (large.count(e) > 0) ++intersection;
  const std::size_t uni = context_set.size() + response_set.size() - intersection;
  return static_cast<double>(intersection) / static_cast<double>(uni);
}

std::unordered_set<std::string> entity_np_set(const std::string& text_in,
                                              const std::vector<std::string>& entities,
                                              const std::unordered_set<std::string>& stopwords) {
  std::unordered_set<std::string> out(entities.begin(), entities.end());
  // Adjacent content-word bigrams approximate noun phrases.
  const std::vector<std::string> words = text::word_tokens(text_in);
  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    if (stopwords.count(words[i]) > 0 || stopwords.count(words[i + 1]) > 0) continue;
    out.insert(words[i] + "_" + words[i + 1]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// LDA
// ---------------------------------------------------------------------------

TopicModel fit_topics(const std::vector<std::vector<std::string>>& documents,
                      const LdaConfig& config) {
  if (config.num_topics < 2) throw ConfigError("fit_topics: need at least 2 topics");
  const int K = config.num_topics;
  const double alpha = config.alpha > 0.0 ? config.alpha : 50.0 / K;
  const double beta = config.beta;

  TopicModel model;
  model.num_topics = K;
  model.alpha = alpha;
  model.beta = beta;

  // Build the vocabulary over the supplied (already stopword-free) documents.
  for (const auto& doc : documents)
    for (const auto& w : doc)
      if (model.vocab.emplace(w, static_cast<int>(model.vocab_words.size())).second)
        model.vocab_words.push_back(w);
  if (model.vocab_words.empty())
    throw DataError("fit_topics: vocabulary is empty after stopword removal");
  const int V = static_cast<int>(model.vocab_words.size());

  // Flattened corpus.
  std::vector<int> word_of;
  std::vector<int> doc_of;
  for (std::size_t d = 0; d < documents.size(); ++d)
    for (const auto& w : documents[d]) {
      word_of.push_back(model.vocab.at(w));
      doc_of.push_back(static_cast<int>(d));
    }
  const std::size_t n_tokens = word_of.size();

  Eigen::MatrixXd n_kw = Eigen::MatrixXd::Zero(K, V);
  Eigen::MatrixXd n_dk = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(documents.size()), K);
  Eigen::VectorXd n_k = Eigen::VectorXd::Zero(K);

  Rng rng(mix_seeds(config.seed, 0x1da));
  std::vector<int> z(n_tokens);
  for (std::size_t i = 0; i < n_tokens; ++i) {
    z[i] = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(K)));
    n_kw(z[i], word_of[i]) += 1.0;
    n_dk(doc_of[i], z[i]) += 1.0;
    n_k(z[i]) += 1.0;
  }

  std::vector<double> weights(static_cast<std::size_t>(K));
  for (int sweep = 0; sweep < config.iterations; ++sweep) {
    for (std::size_t i = 0; i < n_tokens; ++i) {
      const int w = word_of[i];
      const int d = doc_of[i];
      const int old_k = z[i];
      n_kw(old_k, w) -= 1.0;
      n_dk(d, old_k) -= 1.0;
      n_k(old_k) -= 1.0;

      double total = 0.0;
      for (int k = 0; k < K; ++k) {
        const double p =
            (n_dk(d, k) + alpha) * (n_kw(k, w) + beta) / (n_k(k) + beta * V);
        total += p;
        weights[static_cast<std::size_t>(k)] = total;
      }
      const double u = rng.next_double() * total;
      int new_k = K - 1;
      for (int k = 0; k < K; ++k)
        if (u < weights[static_cast<std::size_t>(k)]) {
          new_k = k;
          break;
        }
      z[i] = new_k;
      n_kw(new_k, w) += 1.0;
      n_dk(d, new_k) += 1.0;
      n_k(new_k) += 1.0;
    }
  }

  model.phi.resize(K, V);
  for (int k = 0; k < K; ++k) {
    const double denom = n_k(k) + beta * V;
    for (int v = 0; v < V; ++v) model.phi(k, v) = (n_kw(k, v) + beta) / denom;
    model.phi.row(k) /= model.phi.row(k).sum();
  }
  model.trained = true;
  return model;
}

Eigen::VectorXd infer_mixture(const TopicModel& model, const std::vector<std::string>& tokens,
                              std::uint64_t seed) {
  if (!model.trained) throw DataError("topic inference on an untrained model");
  const int K = model.num_topics;

  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = model.vocab.find(t);
    if (it != model.vocab.end()) ids.push_back(it->second);
  }
  if (ids.empty()) return Eigen::VectorXd::Constant(K, 1.0 / K);

  Rng rng(mix_seeds(seed, token_hash(tokens)));
  Eigen::VectorXd n_k = Eigen::VectorXd::Zero(K);
  std::vector<int> z(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    z[i] = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(K)));
    n_k(z[i]) += 1.0;
  }

  // The fitting prior (50/K) would drown the counts of a short utterance and
  // collapse every mixture toward uniform, so inference runs under a weak
  // symmetric prior.
  const double alpha = kInferenceAlpha;
  std::vector<double> weights(static_cast<std::size_t>(K));
  for (int sweep = 0; sweep < kInferenceSweeps; ++sweep) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      n_k(z[i]) -= 1.0;
      double total = 0.0;
      for (int k = 0; k < K; ++k) {
        total += model.phi(k, ids[i]) * (n_k(k) + alpha);
        weights[static_cast<std::size_t>(k)] = total;
      }
      const double u = rng.next_double() * total;
      int new_k = K - 1;
      for (int k = 0; k < K; ++k)
        if (u < weights[static_cast<std::size_t>(k)]) {
          new_k = k;
          break;
        }
      z[i] = new_k;
      n_k(new_k) += 1.0;
    }
  }

  const double denom = static_cast<double>(ids.size()) + K * alpha;
  Eigen::VectorXd theta(K);
  for (int k = 0; k < K; ++k) theta(k) = (n_k(k) + alpha) / denom;
  return theta;
}

double jensen_shannon(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw ConfigError("jensen_shannon: dimension mismatch");
  double div = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p(i) + q(i));
    if (p(i) > 0.0) div += 0.5 * p(i) * std::log2(p(i) / m);
    if (q(i) > 0.0) div += 0.5 * q(i) * std::log2(q(i) / m);
  }
  return std::max(0.0, div);
}

double topic_divergence(const TopicModel& model, const RankingContext& context,
                        const Candidate& response,
                        const std::unordered_set<std::string>& stopwords, std::uint64_t seed) {
  if (!model.trained) throw DataError("topic_divergence: untrained model");
  std::vector<std::string> ctx_tokens;
  for (const auto& turn : context.turns)
    for (const auto& w : text::word_tokens(turn.text))
      if (stopwords.count(w) == 0) ctx_tokens.push_back(w);
  std::vector<std::string> resp_tokens;
  for (const auto& w : text::word_tokens(response.text))
    if (stopwords.count(w) == 0) resp_tokens.push_back(w);

  const Eigen::VectorXd theta_ctx = infer_mixture(model, ctx_tokens, seed);
  const Eigen::VectorXd theta_resp = infer_mixture(model, resp_tokens, seed);
  return jensen_shannon(theta_ctx, theta_resp);
}

// ---------------------------------------------------------------------------
// Side features
// ---------------------------------------------------------------------------

Eigen::VectorXd side_features(const RankingContext& context, const Candidate& response,
                              const text::SentimentLexicon& lexicon,
                              const SideFeatureConfig& config) {
  const std::size_t R = config.roster.size();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(side_feature_dim(config)));

  // Context sentiment: mean over turns, accumulated in sorted order so the
  // result is bit-stable under context permutation.
  if (!context.turns.empty()) {
    std::vector<double> sentiments;
    sentiments.reserve(context.turns.size());
    for (const auto& turn : context.turns)
      sentiments.push_back(text::sentiment_score(turn.text, lexicon));
    std::sort(sentiments.begin(), sentiments.end());
    double sum = 0.0;
    for (const double s : sentiments) sum += s;
    v(0) = sum / static_cast<double>(sentiments.size());
  }
  v(1) = response.sentiment;

  // Clock features from the latest context timestamp (max, not last, so a
  // permuted context scores identically).
  double ts = 0.0;
  for (const auto& turn : context.turns) ts = std::max(ts, turn.timestamp);
  const double day_fraction = std::fmod(ts, 86400.0) / 86400.0;
  v(2) = std::sin(2.0 * M_PI * day_fraction);
  v(3) = std::cos(2.0 * M_PI * day_fraction);

  v(4) = std::min(1.0, static_cast<double>(context.turn_index) / config.turn_index_cap);

  auto roster_index = [&](const std::string& bot) -> std::size_t {
    for (std::size_t i = 0; i < R; ++i)
      if (config.roster[i] == bot) return i;
    throw DataError("side_features: unknown bot '" + bot + "' not in roster");
  };
  v(5 + static_cast<Eigen::Index>(roster_index(response.bot))) = 1.0;

  std::size_t counted = 0;
  for (const auto& turn : context.turns) {
    if (!turn.is_system()) continue;
    v(5 + static_cast<Eigen::Index>(R + roster_index(turn.agent))) += 1.0;
    ++counted;
  }
  if (counted > 0) v.segment(5 + static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(R)) /=
      static_cast<double>(counted);
  return v;
}

// ---------------------------------------------------------------------------
// Handcrafted vector
// ---------------------------------------------------------------------------

Eigen::VectorXd handcrafted_feature_vector(const RankingContext& context,
                                           const Candidate& response,
                                           const HandcraftedResources& res) {
  const FlowFeatures flow = flow_features(context, response, res.dull_phrases, res.tfidf);

  std::unordered_set<std::string> ctx_set;
  for (std::size_t i = 0; i < context.turns.size(); ++i) {
    const auto& ents = i < context.entities.size() ? context.entities[i] : std::vector<std::string>{};
    for (const auto& e : entity_np_set(context.turns[i].text, ents, res.stopwords)) ctx_set.insert(e);
  }
  const auto resp_set = entity_np_set(response.text, response.entities, res.stopwords);

  Eigen::VectorXd f(kHandcraftedDim);
  f(0) = flow.coherence;
  f(1) = flow.information_flow;
  f(2) = flow.dullness;
  f(3) = entity_overlap(ctx_set, resp_set);
  f(4) = topic_divergence(res.topics, context, response, res.stopwords, res.seed);
  f(5) = response.sentiment;
  return f;
}

std::vector<std::vector<std::string>> lda_documents(const Corpus& corpus,
                                                    const std::unordered_set<std::string>& stopwords,
                                                    std::size_t max_documents, std::uint64_t seed) {
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (max_documents > 0 && max_documents < order.size()) {
    Rng rng(mix_seeds(seed, 0xd0c5));
    rng.shuffle(order);
    order.resize(max_documents);
    std::sort(order.begin(), order.end());
  }

  std::vector<std::vector<std::string>> docs;
  docs.reserve(order.size());
  for (const std::size_t i : order) {
    std::vector<std::string> doc;
    for (const auto& turn : corpus.dialogues[i].turns)
      for (const auto& w : text::word_tokens(turn.text))
        if (stopwords.count(w) == 0) doc.push_back(w);
    if (!doc.empty()) docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace convrank::feat
