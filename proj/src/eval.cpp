#include "convrank/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "convrank/errors.hpp"
#include "convrank/rng.hpp"
#include "json.hpp"

namespace convrank::eval {

using nlohmann::json;

double precision_at_k(const RankingContext& context,
                      const std::vector<rank::ScoredCandidate>& ranked,
                      const RelevancePredicate& relevant, std::size_t k) {
  if (k < 1) throw ConfigError("precision_at_k: k must be at least 1");
  if (k > ranked.size())
    throw ConfigError("precision_at_k: k=" + std::to_string(k) + " exceeds " +
                      std::to_string(ranked.size()) + " candidates");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i)
    if (relevant(context, ranked[i].candidate)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(k);
}

EvalReport pairwise_eval(const rank::Ranker& ranker, const std::vector<FeedbackTuple>& tuples) {
  if (tuples.empty()) throw DataError("pairwise_eval: no tuples");
  EvalReport report;
  report.n_tuples = tuples.size();
  report.margins.reserve(tuples.size());
  std::size_t correct = 0;
  double margin_sum = 0.0;
  for (const auto& t : tuples) {
    const double good = ranker.score(t.context, t.good_response);
    const double bad = ranker.score(t.context, t.bad_response);
    if (good > bad) ++correct;  // ties count as incorrect
    report.margins.push_back(good - bad);
    margin_sum += good - bad;
  }
  report.p_at_1 = static_cast<double>(correct) / static_cast<double>(tuples.size());
  report.mean_margin = margin_sum / static_cast<double>(tuples.size());
  report.ci95_halfwidth = 1.96 * std::sqrt(report.p_at_1 * (1.0 - report.p_at_1) /
                                           static_cast<double>(tuples.size()));
  return report;
}

double testset_loss(const rank::Ranker& ranker, const std::vector<TrainingInstance>& test) {
  std::vector<double> preds;
  std::vector<double> targets;
  preds.reserve(test.size());
  targets.reserve(test.size());
  for (const auto& inst : test) {
    preds.push_back(ranker.score(inst.context, inst.response));
    targets.push_back(inst.target);
  }
  return nn::mse_loss(preds, targets);
}

// ---------------------------------------------------------------------------
// Correlations
// ---------------------------------------------------------------------------

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DataError("pearson: length mismatch");
  if (x.size() < 2) throw DataError("pearson: need at least 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw DataError("pearson: undefined correlation, zero variance");
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::optional<double> try_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  try {
    return pearson(x, y);
  } catch (const DataError&) {
    return std::nullopt;
  }
}

}  // namespace

CorrelationReport correlation_study(const Corpus& corpus,
                                    const text::FeedbackDetector& detector) {
  std::vector<double> length_all, pos_all, neg_all;
  std::vector<double> rating_r, length_r, pos_r, neg_r;

  for (const auto& d : corpus.dialogues) {
    double pos = 0.0;
    double neg = 0.0;
    for (const auto& turn : d.turns) {
      if (!turn.is_user()) continue;
      if (detector.is_positive_feedback(turn.text)) ++pos;
      if (detector.is_negative_feedback(turn.text)) ++neg;
    }
    const double len = static_cast<double>(d.length());
    length_all.push_back(len);
    pos_all.push_back(pos);
    neg_all.push_back(neg);
    if (d.rating) {
      rating_r.push_back(static_cast<double>(*d.rating));
      length_r.push_back(len);
      pos_r.push_back(pos);
      neg_r.push_back(neg);
    }
  }

  CorrelationReport report;
  report.n_dialogues = corpus.size();
  report.n_rated = rating_r.size();
  if (rating_r.size() >= 2) {
    report.rating_length = try_pearson(rating_r, length_r);
    report.rating_pos_feedback = try_pearson(rating_r, pos_r);
    report.rating_neg_feedback = try_pearson(rating_r, neg_r);
  }
  report.length_pos_feedback = try_pearson(length_all, pos_all);
  report.length_neg_feedback = try_pearson(length_all, neg_all);
  return report;
}

// ---------------------------------------------------------------------------
// Learning curve
// ---------------------------------------------------------------------------

std::vector<LearningCurvePoint> learning_curve(const Corpus& corpus,
                                               const std::vector<FeedbackTuple>& heldout,
                                               const text::Annotator& annotator,
                                               const LearningCurveConfig& config) {
  if (config.sizes.empty()) throw ConfigError("learning_curve: no sizes given");
  for (std::size_t i = 1; i < config.sizes.size(); ++i)
    if (config.sizes[i] <= config.sizes[i - 1])
      throw ConfigError("learning_curve: sizes must be strictly increasing");
  if (heldout.empty()) throw DataError("learning_curve: empty held-out tuple set");

  std::vector<LearningCurvePoint> points;
  for (const std::size_t size : config.sizes) {
    BuildConfig build;
    build.signal = Signal::length;
    build.size = size;
    build.seed = mix_seeds(config.seed, size);
    const Dataset ds = build_dataset(corpus, annotator, build);

    for (const auto& kind : config.rankers) {
      std::unique_ptr<rank::Ranker> ranker;
      if (kind == "neural") {
        rank::NeuralConfig c = config.neural;
        c.seed = config.seed;
        ranker = std::make_unique<rank::NeuralRanker>(rank::train_neural(ds, c));
      } else if (kind == "linear") {
        rank::LinearConfig c = config.linear;
        c.seed = config.seed;
        ranker = std::make_unique<rank::LinearRanker>(rank::train_linear(ds, c));
      } else if (kind == "dual_encoder") {
        rank::DualEncoderConfig c = config.dual;
        c.seed = config.seed;
        ranker = std::make_unique<rank::DualEncoderRanker>(rank::train_dual_encoder(ds, c));
      } else if (kind == "handcrafted") {
        ranker = std::make_unique<rank::HandcraftedRanker>(
            rank::make_handcrafted(corpus, config.handcrafted));
      } else if (kind == "random") {
        ranker = std::make_unique<RandomScorer>(config.seed);
      } else {
        throw ConfigError("learning_curve: unknown ranker kind " + kind);
      }
      points.push_back({kind, size, pairwise_eval(*ranker, heldout).p_at_1});
    }
  }
  return points;
}

void write_learning_curve_tsv(const std::vector<LearningCurvePoint>& points,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write learning-curve file: " + path);
  out << "ranker\tsize\tp_at_1\n";
  char buf[64];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%.6f", p.p_at_1);
    out << p.ranker << "\t" << p.size << "\t" << buf << "\n";
  }
}

// ---------------------------------------------------------------------------
// Random baseline
// ---------------------------------------------------------------------------

double RandomScorer::score(const RankingContext& context, const Candidate& candidate) const {
  std::uint64_t h = fnv1a64(&seed_, sizeof(seed_));
  for (const auto& turn : context.turns) {
    h = fnv1a64(turn.agent.data(), turn.agent.size(), h);
    h = fnv1a64(turn.text.data(), turn.text.size(), h);
    h = fnv1a64(&turn.timestamp, sizeof(turn.timestamp), h);
  }
  h = fnv1a64(candidate.bot.data(), candidate.bot.size(), h);
  h = fnv1a64(candidate.text.data(), candidate.text.size(), h);
  std::uint64_t x = h;
  return static_cast<double>(Rng::splitmix64(x) >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : "nan"; }

}  // namespace

void write_eval_report_tsv(const EvalReport& report, std::optional<double> test_loss,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report: " + path);
  out << "metric\tvalue\n";
  out << "p_at_1\t" << fmt(report.p_at_1) << "\n";
  out << "n_tuples\t" << report.n_tuples << "\n";
  out << "mean_margin\t" << fmt(report.mean_margin) << "\n";
  out << "p_at_1_ci95\t" << fmt(report.ci95_halfwidth) << "\n";
  if (test_loss) out << "test_loss\t" << fmt(*test_loss) << "\n";
}

void write_eval_report_json(const EvalReport& report, std::optional<double> test_loss,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report: " + path);
  json j{{"p_at_1", report.p_at_1},
         {"n_tuples", report.n_tuples},
         {"mean_margin", report.mean_margin},
         {"p_at_1_ci95", report.ci95_halfwidth}};
  if (test_loss) j["test_loss"] = *test_loss;
  out << j.dump() << "\n";
}

void write_correlation_tsv(const CorrelationReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report: " + path);
  out << "pair\tcoefficient\tn\n";
  out << "rating/length\t" << fmt_opt(report.rating_length) << "\t" << report.n_rated << "\n";
  out << "rating/positive_feedback\t" << fmt_opt(report.rating_pos_feedback) << "\t"
      << report.n_rated << "\n";
  out << "rating/negative_feedback\t" << fmt_opt(report.rating_neg_feedback) << "\t"
      << report.n_rated << "\n";
  out << "length/positive_feedback\t" << fmt_opt(report.length_pos_feedback) << "\t"
      << report.n_dialogues << "\n";
  out << "length/negative_feedback\t" << fmt_opt(report.length_neg_feedback) << "\t"
      << report.n_dialogues << "\n";
}

void write_correlation_json(const CorrelationReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report: " + path);
  auto field = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j{{"rating_length", field(report.rating_length)},
         {"rating_positive_feedback", field(report.rating_pos_feedback)},
         {"rating_negative_feedback", field(report.rating_neg_feedback)},
         {"length_positive_feedback", field(report.length_pos_feedback)},
         {"length_negative_feedback", field(report.length_neg_feedback)},
         {"n_dialogues", report.n_dialogues},
         {"n_rated", report.n_rated}};
  out << j.dump() << "\n";
}

}  // namespace convrank::eval
