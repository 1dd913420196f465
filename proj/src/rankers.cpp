#include "convrank/rankers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "convrank/errors.hpp"

namespace convrank::rank {

using nlohmann::json;
using nn::Mat;
using nn::Vec;

// ---------------------------------------------------------------------------
// Common
// ---------------------------------------------------------------------------

std::vector<ScoredCandidate> rank_candidates(const Ranker& ranker, const RankingContext& context,
                                             const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw DataError("rank: empty candidate list");
  std::vector<ScoredCandidate> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    out.push_back({candidates[i], ranker.score(context, candidates[i]), i});
  std::stable_sort(out.begin(), out.end(),
                   [](const ScoredCandidate& a, const ScoredCandidate& b) { return a.score > b.score; });
  return out;
}

namespace {

json lexicon_to_json(const text::SentimentLexicon& lex) {
  json valence = json::object();
  for (const auto& [term, v] : lex.valence) valence[term] = v;
  json boosters = json::object();
  for (const auto& [term, v] : lex.boosters) boosters[term] = v;
  std::vector<std::string> negations(lex.negations.begin(), lex.negations.end());
  std::sort(negations.begin(), negations.end());
  return json{{"valence", std::move(valence)},
              {"negations", std::move(negations)},
              {"boosters", std::move(boosters)}};
}

text::SentimentLexicon lexicon_from_json(const json& j) {
  text::SentimentLexicon lex;
  for (const auto& [term, v] : j.at("valence").items()) lex.valence.emplace(term, v.get<double>());
  for (const auto& [term, v] : j.at("boosters").items()) lex.boosters.emplace(term, v.get<double>());
  for (const auto& n : j.at("negations")) lex.negations.insert(n.get<std::string>());
  return lex;
}

void add_arrays(nn::Checkpoint& ckpt, const std::vector<nn::ParamView>& views) {
  for (const auto& v : views) ckpt.arrays.emplace_back(v.name, nn::to_f32(v.data, v.size));
}

void load_arrays(const nn::Checkpoint& ckpt, const std::vector<nn::ParamView>& views) {
  for (const auto& v : views) nn::from_f32(ckpt.array(v.name), v.data, v.size);
}

std::vector<std::string> sorted_vector(const std::unordered_set<std::string>& s) {
  std::vector<std::string> out(s.begin(), s.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Neural ranker
// ---------------------------------------------------------------------------

std::vector<std::vector<int>> NeuralRanker::encode_context(const RankingContext& context) const {
  std::vector<std::vector<int>> seqs;
  seqs.reserve(context.turns.size());
  static const std::vector<std::string> kNoEntities;
  for (std::size_t i = 0; i < context.turns.size(); ++i) {
    const auto& ents = i < context.entities.size() ? context.entities[i] : kNoEntities;
    seqs.push_back(vocab.encode(text::tokenize(context.turns[i], ents)));
  }
  // Canonical accumulation order: the turn-vector sum must not depend on how
  // the caller ordered the context.
  std::sort(seqs.begin(), seqs.end());
  return seqs;
}

std::vector<int> NeuralRanker::encode_response(const Candidate& candidate) const {
  Turn turn{candidate.bot, candidate.text, 0.0};
  return vocab.encode(text::tokenize(turn, candidate.entities));
}

double NeuralRanker::score_encoded(const std::vector<std::vector<int>>& context_seqs,
                                   const std::vector<int>& response_seq, const Vec& side) const {
  const Eigen::Index H = encoder.hidden_size();
  Vec ctx_sum = Vec::Zero(H);
  for (const auto& seq : context_seqs) ctx_sum += nn::gru_encode(encoder, embedding, seq);
  const Vec resp = nn::gru_encode(encoder, embedding, response_seq);

  Vec enc(2 * H);
  enc << ctx_sum, resp;
  const Vec sem_post = (sem.M * enc + sem.b).cwiseMax(0.0);

  if (sem_post.size() + side.size() != predictor.input_size())
    throw DataError("neural_score: side-feature dimension mismatch (got " +
                    std::to_string(side.size()) + ", predictor expects " +
                    std::to_string(predictor.input_size() - sem_post.size()) + ")");
  Vec pin(sem_post.size() + side.size());
  pin << sem_post, side;
  return nn::mlp_forward(predictor, pin);
}

double NeuralRanker::score(const RankingContext& context, const Candidate& candidate) const {
  const Vec side = feat::side_features(context, candidate, lexicon, this->side);
  return score_encoded(encode_context(context), encode_response(candidate), side);
}

void NeuralRanker::save(const std::string& path) const {
  nn::Checkpoint ckpt;
  ckpt.meta = json{{"kind", kind()},
                   {"embedding_dim", embedding.rows()},
                   {"hidden_dim", encoder.hidden_size()},
                   {"sem_dim", sem.M.rows()},
                   {"predictor_layers", config.predictor_layers},
                   {"vocab", vocab.tokens()},
                   {"roster", side.roster},
                   {"turn_index_cap", side.turn_index_cap},
                   {"lexicon", lexicon_to_json(lexicon)}};
  auto* self = const_cast<NeuralRanker*>(this);  // read-only views for serialization
  std::vector<nn::ParamView> views = nn::param_views("embedding", self->embedding);
  nn::append_views(views, nn::param_views("encoder", self->encoder));
  nn::append_views(views, nn::param_views("sem", self->sem));
  nn::append_views(views, nn::param_views("predictor", self->predictor));
  add_arrays(ckpt, views);
  nn::save_checkpoint(ckpt, path);
}

NeuralRanker NeuralRanker::from_checkpoint(const nn::Checkpoint& ckpt) {
  const json& meta = ckpt.meta;
  NeuralRanker r;
  const auto E = meta.at("embedding_dim").get<Eigen::Index>();
  const auto H = meta.at("hidden_dim").get<Eigen::Index>();
  const auto S = meta.at("sem_dim").get<Eigen::Index>();
  r.config.embedding_dim = static_cast<int>(E);
  r.config.hidden_dim = static_cast<int>(H);
  r.config.sem_dim = static_cast<int>(S);
  r.config.predictor_layers = meta.at("predictor_layers").get<std::vector<int>>();
  r.vocab = text::Vocabulary::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
  r.side.roster = meta.at("roster").get<std::vector<std::string>>();
  r.side.turn_index_cap = meta.at("turn_index_cap").get<double>();
  r.lexicon = lexicon_from_json(meta.at("lexicon"));
  r.config.side = r.side;

  const auto V = static_cast<Eigen::Index>(r.vocab.size());
  r.embedding = Mat::Zero(E, V);
  r.encoder = nn::GruParams::zeros(E, H);
  r.sem = nn::DenseLayer::zeros(S, 2 * H);
  const auto pin = S + static_cast<Eigen::Index>(feat::side_feature_dim(r.side));
  Rng dummy(0);
  r.predictor = nn::MlpParams::init(pin, r.config.predictor_layers, dummy);

  std::vector<nn::ParamView> views = nn::param_views("embedding", r.embedding);
  nn::append_views(views, nn::param_views("encoder", r.encoder));
  nn::append_views(views, nn::param_views("sem", r.sem));
  nn::append_views(views, nn::param_views("predictor", r.predictor));
  load_arrays(ckpt, views);
  return r;
}

// ---------------------------------------------------------------------------
// Linear ranker
// ---------------------------------------------------------------------------

namespace {

std::uint64_t hash_feature(const char* ns, const std::string& s) {
  std::uint64_t h = fnv1a64(ns, std::strlen(ns));
  h = fnv1a64("\x1f", 1, h);
  return fnv1a64(s.data(), s.size(), h);
}

std::uint64_t hash_pair(std::uint64_t a, std::uint64_t b) {
  return mix_seeds(a, b) | 1;  // keep nonzero
}

double hash_sign(std::uint64_t h) { return (h >> 63) != 0 ? -1.0 : 1.0; }

void emit_ngrams(const std::vector<std::string>& words, const char* ns1, const char* ns2,
                 const char* ns3, std::vector<std::pair<std::uint64_t, double>>& out) {
  for (std::size_t i = 0; i < words.size(); ++i) {
    out.emplace_back(hash_feature(ns1, words[i]), 1.0);
    if (i + 1 < words.size())
      out.emplace_back(hash_feature(ns2, words[i] + "_" + words[i + 1]), 1.0);
    if (i + 2 < words.size())
      out.emplace_back(hash_feature(ns3, words[i] + "_" + words[i + 1] + "_" + words[i + 2]), 1.0);
  }
}

std::vector<std::string> capped_words(const std::string& s) {
  std::vector<std::string> w = text::word_tokens(s);
  if (w.size() > text::kMaxUtteranceTokens) w.resize(text::kMaxUtteranceTokens);
  return w;
}

}  // namespace

std::vector<std::pair<std::uint64_t, double>> LinearRanker::features(
    const RankingContext& context, const Candidate& candidate) const {
  std::vector<std::pair<std::uint64_t, double>> out;

  // Context n-grams come from the preceding 3 utterances.
  const std::size_t from = context.turns.size() > 3 ? context.turns.size() - 3 : 0;
  std::vector<std::string> ctx_flat;
  for (std::size_t i = from; i < context.turns.size(); ++i) {
    const auto words = capped_words(context.turns[i].text);
    emit_ngrams(words, "c1", "c2", "c3", out);
    ctx_flat.insert(ctx_flat.end(), words.begin(), words.end());
  }
  const std::vector<std::string> resp_words = capped_words(candidate.text);
  emit_ngrams(resp_words, "r1", "r2", "r3", out);

  // Position-specific unigrams, first 5 positions on each side.
  for (std::size_t i = 0; i < ctx_flat.size() && i < 5; ++i)
    out.emplace_back(hash_feature("cp", std::to_string(i) + "|" + ctx_flat[i]), 1.0);
  for (std::size_t i = 0; i < resp_words.size() && i < 5; ++i)
    out.emplace_back(hash_feature("rp", std::to_string(i) + "|" + resp_words[i]), 1.0);

  // Dialogue flow features (tf cosine; no fitted idf table at this level).
  const feat::FlowFeatures flow =
      feat::flow_features(context, candidate, dull_phrases, feat::TfidfWeights{});
  out.emplace_back(hash_feature("flow", "coherence"), flow.coherence);
  out.emplace_back(hash_feature("flow", "information_flow"), flow.information_flow);
  out.emplace_back(hash_feature("flow", "dullness"), flow.dullness);

  const std::uint64_t bot_hash = hash_feature("bot", candidate.bot);
  out.emplace_back(bot_hash, 1.0);

  // Pairwise interactions: context unigram x response unigram, and
  // bot x response n-gram.
  // Pairwise interactions, kept narrow and down-weighted: the full context x
  // response cross product buries single-pass training in one-off pair
  // features.
  constexpr double kInteractionWeight = 0.25;
  const Turn* last_user = nullptr;
  for (const auto& turn : context.turns)
    if (turn.is_user()) last_user = &turn;
  if (last_user != nullptr) {
    for (const auto& cw : capped_words(last_user->text)) {
      const std::uint64_t ch = hash_feature("qc", cw);
      for (const auto& rw : resp_words)
        out.emplace_back(hash_pair(ch, hash_feature("q1", rw)), kInteractionWeight);
    }
  }
  for (std::size_t i = 0; i < resp_words.size(); ++i) {
    out.emplace_back(hash_pair(bot_hash, hash_feature("q1", resp_words[i])), kInteractionWeight);
    if (i + 1 < resp_words.size())
      out.emplace_back(
          hash_pair(bot_hash, hash_feature("q2", resp_words[i] + "_" + resp_words[i + 1])),
          kInteractionWeight);
  }
  return out;
}

double LinearRanker::raw_score(const RankingContext& context, const Candidate& candidate) const {
  const std::uint64_t mask = (std::uint64_t{1} << hash_bits) - 1;
  double sum = bias;
  for (const auto& [h, v] : features(context, candidate))
    sum += weights(static_cast<Eigen::Index>(h & mask)) * hash_sign(h) * v;
  return sum;
}

double LinearRanker::score(const RankingContext& context, const Candidate& candidate) const {
  return std::min(1.0, std::max(0.0, raw_score(context, candidate)));
}

void LinearRanker::save(const std::string& path) const {
  nn::Checkpoint ckpt;
  ckpt.meta = json{{"kind", kind()}, {"hash_bits", hash_bits}, {"dull_phrases", dull_phrases}};
  ckpt.arrays.emplace_back("weights", nn::to_f32(weights.data(), weights.size()));
  ckpt.arrays.emplace_back("bias", std::vector<float>{static_cast<float>(bias)});
  nn::save_checkpoint(ckpt, path);
}

LinearRanker LinearRanker::from_checkpoint(const nn::Checkpoint& ckpt) {
  LinearRanker r;
  r.hash_bits = ckpt.meta.at("hash_bits").get<int>();
  r.dull_phrases = ckpt.meta.at("dull_phrases").get<std::vector<std::string>>();
  r.weights = Eigen::VectorXd::Zero(Eigen::Index{1} << r.hash_bits);
  nn::from_f32(ckpt.array("weights"), r.weights.data(), r.weights.size());
  r.bias = static_cast<double>(ckpt.array("bias").at(0));
  return r;
}

// ---------------------------------------------------------------------------
// Handcrafted ranker
// ---------------------------------------------------------------------------

Eigen::VectorXd default_handcrafted_coefficients() {
  Eigen::VectorXd c(feat::kHandcraftedDim);
  // coherence, information_flow, dullness, entity_overlap, topic_divergence,
  // response_sentiment
  c << 1.0, 0.5, -1.5, 1.0, -0.5, 0.5;
  return c;
}

double HandcraftedRanker::score(const RankingContext& context, const Candidate& candidate) const {
  const Eigen::VectorXd f = feat::handcrafted_feature_vector(context, candidate, resources);
  return nn::sigmoid(coefficients.dot(f));
}

void HandcraftedRanker::save(const std::string& path) const {
  nn::Checkpoint ckpt;
  std::vector<std::string> idf_terms;
  idf_terms.reserve(resources.tfidf.idf.size());
  for (const auto& [term, value] : resources.tfidf.idf) idf_terms.push_back(term);
  std::sort(idf_terms.begin(), idf_terms.end());
  std::vector<float> idf_values;
  idf_values.reserve(idf_terms.size());
  for (const auto& term : idf_terms)
    idf_values.push_back(static_cast<float>(resources.tfidf.idf.at(term)));

  ckpt.meta = json{{"kind", kind()},
                   {"dull_phrases", resources.dull_phrases},
                   {"stopwords", sorted_vector(resources.stopwords)},
                   {"idf_terms", idf_terms},
                   {"seed", resources.seed},
                   {"topics", json{{"num_topics", resources.topics.num_topics},
                                   {"alpha", resources.topics.alpha},
                                   {"beta", resources.topics.beta},
                                   {"vocab", resources.topics.vocab_words}}}};
  ckpt.arrays.emplace_back("coefficients", nn::to_f32(coefficients.data(), coefficients.size()));
  ckpt.arrays.emplace_back("phi",
                           nn::to_f32(resources.topics.phi.data(), resources.topics.phi.size()));
  ckpt.arrays.emplace_back("idf_values", std::move(idf_values));
  nn::save_checkpoint(ckpt, path);
}

HandcraftedRanker HandcraftedRanker::from_checkpoint(const nn::Checkpoint& ckpt) {
  HandcraftedRanker r;
  const json& meta = ckpt.meta;
  r.resources.dull_phrases = meta.at("dull_phrases").get<std::vector<std::string>>();
  for (const auto& s : meta.at("stopwords")) r.resources.stopwords.insert(s.get<std::string>());
  r.resources.seed = meta.at("seed").get<std::uint64_t>();

  const json& topics = meta.at("topics");
  feat::TopicModel& tm = r.resources.topics;
  tm.num_topics = topics.at("num_topics").get<int>();
  tm.alpha = topics.at("alpha").get<double>();
  tm.beta = topics.at("beta").get<double>();
  tm.vocab_words = topics.at("vocab").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < tm.vocab_words.size(); ++i)
    tm.vocab.emplace(tm.vocab_words[i], static_cast<int>(i));
  tm.phi = Mat::Zero(tm.num_topics, static_cast<Eigen::Index>(tm.vocab_words.size()));
  nn::from_f32(ckpt.array("phi"), tm.phi.data(), tm.phi.size());
  tm.trained = true;

  const auto idf_terms = meta.at("idf_terms").get<std::vector<std::string>>();
  const auto& idf_values = ckpt.array("idf_values");
  if (idf_terms.size() != idf_values.size())
    throw CheckpointError("handcrafted checkpoint: idf terms/values size mismatch");
  for (std::size_t i = 0; i < idf_terms.size(); ++i)
    r.resources.tfidf.idf.emplace(idf_terms[i], static_cast<double>(idf_values[i]));

  r.coefficients = Eigen::VectorXd::Zero(feat::kHandcraftedDim);
  nn::from_f32(ckpt.array("coefficients"), r.coefficients.data(), r.coefficients.size());
  return r;
}

HandcraftedRanker make_handcrafted(const Corpus& corpus, const HandcraftedConfig& config) {
  HandcraftedRanker r;
  if (config.coefficients.size() != feat::kHandcraftedDim)
    throw ConfigError("handcrafted ranker needs exactly 6 coefficients");
  r.coefficients = config.coefficients;
  r.resources.dull_phrases = text::default_dull_phrases();
  r.resources.stopwords = text::default_stopwords();
  r.resources.tfidf = feat::TfidfWeights::fit(corpus);
  r.resources.seed = config.seed;
  const auto docs =
      feat::lda_documents(corpus, r.resources.stopwords, config.lda_max_documents, config.seed);
  r.resources.topics = feat::fit_topics(docs, config.lda);

  // Snap to f32 so scores survive a checkpoint round trip bit for bit.
  std::vector<nn::ParamView> views = nn::param_views("coefficients", r.coefficients);
  nn::append_views(views, nn::param_views("phi", r.resources.topics.phi));
  nn::snap_f32(views);
  for (auto& [term, value] : r.resources.tfidf.idf)
    value = static_cast<double>(static_cast<float>(value));
  return r;
}

// ---------------------------------------------------------------------------
// Dual-encoder ranker
// ---------------------------------------------------------------------------

std::vector<int> DualEncoderRanker::encode_text(const std::string& text_in) const {
  std::vector<std::string> words = text::word_tokens(text_in);
  if (words.size() > text::kMaxUtteranceTokens) words.resize(text::kMaxUtteranceTokens);
  return vocab.encode(words);
}

std::vector<int> DualEncoderRanker::encode_last_user_turn(const RankingContext& context) const {
  for (std::size_t i = context.turns.size(); i-- > 0;)
    if (context.turns[i].is_user()) return encode_text(context.turns[i].text);
  return {};
}

double DualEncoderRanker::score_encoded(const std::vector<int>& context_seq,
                                        const std::vector<int>& response_seq) const {
  const Vec h_ctx = nn::lstm_encode(context_encoder, embedding, context_seq);
  const Vec h_resp = nn::lstm_encode(response_encoder, embedding, response_seq);
  Vec pin(h_ctx.size() + h_resp.size());
  pin << h_ctx, h_resp;
  return nn::mlp_forward(predictor, pin);
}

double DualEncoderRanker::score(const RankingContext& context, const Candidate& candidate) const {
  return score_encoded(encode_last_user_turn(context), encode_text(candidate.text));
}

void DualEncoderRanker::save(const std::string& path) const {
  nn::Checkpoint ckpt;
  ckpt.meta = json{{"kind", kind()},
                   {"embedding_dim", embedding.rows()},
                   {"hidden_dim", context_encoder.hidden_size()},
                   {"predictor_layers", config.predictor_layers},
                   {"vocab", vocab.tokens()}};
  auto* self = const_cast<DualEncoderRanker*>(this);
  std::vector<nn::ParamView> views = nn::param_views("embedding", self->embedding);
  nn::append_views(views, nn::param_views("context_encoder", self->context_encoder));
  nn::append_views(views, nn::param_views("response_encoder", self->response_encoder));
  nn::append_views(views, nn::param_views("predictor", self->predictor));
  add_arrays(ckpt, views);
  nn::save_checkpoint(ckpt, path);
}

DualEncoderRanker DualEncoderRanker::from_checkpoint(const nn::Checkpoint& ckpt) {
  DualEncoderRanker r;
  const json& meta = ckpt.meta;
  const auto E = meta.at("embedding_dim").get<Eigen::Index>();
  const auto H = meta.at("hidden_dim").get<Eigen::Index>();
  r.config.embedding_dim = static_cast<int>(E);
  r.config.hidden_dim = static_cast<int>(H);
  r.config.predictor_layers = meta.at("predictor_layers").get<std::vector<int>>();
  r.vocab = text::Vocabulary::from_tokens(meta.at("vocab").get<std::vector<std::string>>());

  r.embedding = Mat::Zero(E, static_cast<Eigen::Index>(r.vocab.size()));
  r.context_encoder = nn::LstmParams::zeros(E, H);
  r.response_encoder = nn::LstmParams::zeros(E, H);
  Rng dummy(0);
  r.predictor = nn::MlpParams::init(2 * H, r.config.predictor_layers, dummy);

  std::vector<nn::ParamView> views = nn::param_views("embedding", r.embedding);
  nn::append_views(views, nn::param_views("context_encoder", r.context_encoder));
  nn::append_views(views, nn::param_views("response_encoder", r.response_encoder));
  nn::append_views(views, nn::param_views("predictor", r.predictor));
  load_arrays(ckpt, views);
  return r;
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

std::unique_ptr<Ranker> load_ranker(const std::string& path) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(path);
  if (!ckpt.meta.contains("kind")) throw CheckpointError("checkpoint meta lacks a kind field");
  const std::string kind = ckpt.meta.at("kind").get<std::string>();
  if (kind == "neural")
    return std::make_unique<NeuralRanker>(NeuralRanker::from_checkpoint(ckpt));
  if (kind == "linear")
    return std::make_unique<LinearRanker>(LinearRanker::from_checkpoint(ckpt));
  if (kind == "handcrafted")
    return std::make_unique<HandcraftedRanker>(HandcraftedRanker::from_checkpoint(ckpt));
  if (kind == "dual_encoder")
    return std::make_unique<DualEncoderRanker>(DualEncoderRanker::from_checkpoint(ckpt));
  throw CheckpointError("unknown ranker kind: " + kind);
}

}  // namespace convrank::rank
