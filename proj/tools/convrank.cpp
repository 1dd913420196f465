// convrank command-line interface: synthesize corpora, build datasets, train
// and evaluate rankers, run the correlation study and learning curves, and
// rank candidate responses interactively.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "convrank/corpus.hpp"
#include "convrank/errors.hpp"
#include "convrank/eval.hpp"
#include "convrank/rankers.hpp"
#include "convrank/synthgen.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace convrank;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

Signal parse_signal(const std::string& s) {
  if (s == "length") return Signal::length;
  if (s == "rating") return Signal::rating;
  throw ConfigError("unknown signal: " + s + " (expected length or rating)");
}

/// Distinct system agents across contexts and responses, sorted.
std::vector<std::string> roster_from_dataset(const Dataset& ds) {
  std::set<std::string> bots;
  auto scan = [&](const std::vector<TrainingInstance>& v) {
    for (const auto& inst : v) {
      bots.insert(inst.response.bot);
      for (const auto& turn : inst.context.turns)
        if (turn.is_system()) bots.insert(turn.agent);
    }
  };
  scan(ds.train);
  scan(ds.dev);
  scan(ds.test);
  return {bots.begin(), bots.end()};
}

struct ResourceFlags {
  std::string lexicon;
  std::string gazetteer;
  std::string stopwords;
  std::string dull_phrases;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--lexicon", lexicon, "Sentiment lexicon TSV (term<TAB>valence)");
    cmd->add_option("--gazetteer", gazetteer, "Gazetteer line file (one entity per line)");
    cmd->add_option("--stopwords", stopwords, "Stopword line file");
    cmd->add_option("--dull-phrases", dull_phrases, "Dull-phrase line file");
  }

  text::Annotator annotator() const {
    text::Annotator a = text::default_annotator();
    if (!lexicon.empty()) a.lexicon = text::load_lexicon_tsv(lexicon);
    if (!gazetteer.empty()) a.gazetteer = text::Gazetteer(text::load_lines(gazetteer));
    if (!stopwords.empty()) {
      a.stopwords.clear();
      for (const auto& w : text::load_lines(stopwords)) a.stopwords.insert(w);
    }
    return a;
  }

  std::vector<std::string> dull_list() const {
    return dull_phrases.empty() ? text::default_dull_phrases() : text::load_lines(dull_phrases);
  }
};

struct HyperFlags {
  std::string config_path;
  int embedding = 0;
  int hidden = 0;
  int sem = 0;
  std::string layers;
  double lr = 0.0;
  int batch = 0;
  double dropout = -1.0;
  int epochs = 0;
  int patience = 0;
  std::size_t vocab_size = 0;
  std::string roster;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "key = value file of these hyperparameters (flags override it)");
    cmd->add_option("--embedding", embedding, "Embedding dimension");
    cmd->add_option("--hidden", hidden, "Recurrent hidden size");
    cmd->add_option("--sem", sem, "Sem layer size (neural ranker)");
    cmd->add_option("--layers", layers, "Predictor hidden layers, e.g. 128,64");
    cmd->add_option("--lr", lr, "Learning rate");
    cmd->add_option("--batch", batch, "Batch size");
    cmd->add_option("--dropout", dropout, "Dropout on encoder outputs");
    cmd->add_option("--epochs", epochs, "Maximum training epochs");
    cmd->add_option("--patience", patience, "Early-stopping patience");
    cmd->add_option("--vocab-size", vocab_size, "Vocabulary capacity");
    cmd->add_option("--roster", roster, "Comma-separated bot roster override");
  }

  // Config-file values load first; explicit flags then take precedence
  // because they overwrite the same fields.
  HyperFlags with_file_defaults() const {
    if (config_path.empty()) return *this;
    HyperFlags merged = *this;
    std::ifstream in(config_path);
    if (!in) throw DataError("cannot open hyperparameter config: " + config_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      try {
        if (key == "embedding" && merged.embedding == 0) merged.embedding = std::stoi(value);
        else if (key == "hidden" && merged.hidden == 0) merged.hidden = std::stoi(value);
        else if (key == "sem" && merged.sem == 0) merged.sem = std::stoi(value);
        else if (key == "layers" && merged.layers.empty()) merged.layers = value;
        else if (key == "lr" && merged.lr == 0.0) merged.lr = std::stod(value);
        else if (key == "batch" && merged.batch == 0) merged.batch = std::stoi(value);
        else if (key == "dropout" && merged.dropout < 0.0) merged.dropout = std::stod(value);
        else if (key == "epochs" && merged.epochs == 0) merged.epochs = std::stoi(value);
        else if (key == "patience" && merged.patience == 0) merged.patience = std::stoi(value);
        else if (key == "vocab_size" && merged.vocab_size == 0)
          merged.vocab_size = std::stoull(value);
        else if (key == "roster" && merged.roster.empty()) merged.roster = value;
        else if (merged.known_key(key)) continue;  // flag already set
        else throw ParseError("unknown hyperparameter key: " + key, line_no);
      } catch (const std::invalid_argument&) {
        throw ParseError("bad value for " + key, line_no);
      }
    }
    return merged;
  }

  static bool known_key(const std::string& key) {
    for (const char* k : {"embedding", "hidden", "sem", "layers", "lr", "batch", "dropout",
                          "epochs", "patience", "vocab_size", "roster"})
      if (key == k) return true;
    return false;
  }

  void apply(rank::NeuralConfig& c) const {
    if (embedding > 0) c.embedding_dim = embedding;
    if (hidden > 0) c.hidden_dim = hidden;
    if (sem > 0) c.sem_dim = sem;
    if (!layers.empty()) {
      c.predictor_layers.clear();
      for (const auto& l : split_csv(layers)) c.predictor_layers.push_back(std::stoi(l));
    }
    if (lr > 0.0) c.learning_rate = lr;
    if (batch > 0) c.batch_size = batch;
    if (dropout >= 0.0) c.dropout = dropout;
    if (epochs > 0) c.max_epochs = epochs;
    if (patience > 0) c.patience = patience;
    if (vocab_size > 0) c.vocab_size = vocab_size;
    if (!roster.empty()) c.side.roster = split_csv(roster);
  }

  void apply(rank::DualEncoderConfig& c) const {
    if (embedding > 0) c.embedding_dim = embedding;
    if (hidden > 0) c.hidden_dim = hidden;
    if (!layers.empty()) {
      c.predictor_layers.clear();
      for (const auto& l : split_csv(layers)) c.predictor_layers.push_back(std::stoi(l));
    }
    if (lr > 0.0) c.learning_rate = lr;
    if (batch > 0) c.batch_size = batch;
    if (epochs > 0) c.max_epochs = epochs;
    if (patience > 0) c.patience = patience;
    if (vocab_size > 0) c.vocab_size = vocab_size;
  }
};

std::string dataset_path(const std::string& data, Signal signal) {
  if (fs::is_directory(data)) return (fs::path(data) / (std::string(to_string(signal)) + ".jsonl")).string();
  return data;
}

void write_training_log(const rank::TrainReport& report, const std::string& model_path) {
  std::ofstream out(model_path + ".training.tsv");
  out << "epoch\ttrain_loss\tdev_loss\n";
  for (std::size_t i = 0; i < report.epochs.size(); ++i)
    out << (i + 1) << "\t" << fmt(report.epochs[i].train_loss) << "\t"
        << fmt(report.epochs[i].dev_loss) << "\n";
  out << "# best_epoch\t" << report.best_epoch << "\tbest_dev_loss\t" << fmt(report.best_dev_loss)
      << "\n";
}

// ---------------------------------------------------------------------------
// Command bodies
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::size_t n = 0;
  std::uint64_t seed = 7;
  std::string out;
  std::string config_path;
  double eval_fraction = 0.0;
  std::string eval_out;
  double quizbot_rate = -1.0;
  ResourceFlags resources;
};

int cmd_synth(const SynthArgs& a) {
  synth::GeneratorConfig config;
  if (!a.config_path.empty()) config = synth::config_from_kv_file(a.config_path);
  if (a.n > 0) config.n_dialogues = a.n;
  config.seed = a.seed;
  if (a.quizbot_rate >= 0.0) config.quizbot_rate = a.quizbot_rate;

  Corpus corpus = generate_corpus(config);
  if (a.eval_fraction > 0.0) {
    if (a.eval_out.empty()) throw ConfigError("--eval-fraction requires --eval-out");
    const text::Annotator annotator = a.resources.annotator();
    text::FeedbackDetector detector = text::default_feedback_detector();
    detector.lexicon = &annotator.lexicon;
    auto [train, tuples] =
        synth::plant_eval_split(corpus, a.eval_fraction, annotator, detector, a.seed);
    write_transcripts(train, a.out);
    write_tuples(tuples, a.eval_out);
    std::cout << "dialogues\t" << train.size() << "\neval_tuples\t" << tuples.size() << "\n";
  } else {
    write_transcripts(corpus, a.out);
    std::cout << "dialogues\t" << corpus.size() << "\n";
  }
  return kExitOk;
}

struct IngestArgs {
  std::string in;
  std::string out;
};

int cmd_ingest(const IngestArgs& a) {
  const Corpus corpus = ingest_transcripts(a.in);
  std::size_t turns = 0;
  std::size_t rated = 0;
  for (const auto& d : corpus.dialogues) {
    turns += d.turns.size();
    if (d.rating) ++rated;
  }
  std::cout << "dialogues\t" << corpus.size() << "\nturns\t" << turns << "\nrated\t" << rated
            << "\n";
  if (!a.out.empty()) write_transcripts(corpus, a.out);
  return kExitOk;
}

struct FilterArgs {
  std::string in;
  std::string out;
  std::string blacklist;
  bool strict = false;
};

int cmd_filter(const FilterArgs& a) {
  const Corpus corpus = ingest_transcripts(a.in);
  FilterConfig config;
  config.percentile_strict = a.strict;
  for (const auto& bot : split_csv(a.blacklist)) config.bot_blacklist.insert(bot);
  FilterReport report;
  const Corpus filtered = filter_corpus(corpus, config, &report);
  write_transcripts(filtered, a.out);
  std::cout << "input_dialogues\t" << report.input_dialogues << "\n"
            << "kept_dialogues\t" << report.kept_dialogues << "\n"
            << "removed_short\t" << report.removed_short << "\n"
            << "removed_long\t" << report.removed_long << "\n"
            << "removed_emptied\t" << report.removed_emptied << "\n"
            << "turns_removed\t" << report.turns_removed << "\n"
            << "length_cap\t" << report.length_cap << "\n"
            << "fraction_removed\t" << fmt(report.fraction_removed) << "\n";
  return kExitOk;
}

struct BuildArgs {
  std::string corpus;
  std::string signal = "length";
  std::size_t size = 0;
  std::uint64_t seed = 42;
  std::string out_dir;
  bool no_filter = false;
  ResourceFlags resources;
};

int cmd_build(const BuildArgs& a) {
  Corpus corpus = ingest_transcripts(a.corpus);
  if (!a.no_filter) corpus = filter_corpus(corpus, FilterConfig{});
  const text::Annotator annotator = a.resources.annotator();
  fs::create_directories(a.out_dir);

  std::vector<Signal> signals;
  if (a.signal == "both")
    signals = {Signal::length, Signal::rating};
  else
    signals = {parse_signal(a.signal)};

  for (const Signal signal : signals) {
    BuildConfig config{signal, a.size, a.seed};
    const Dataset ds = build_dataset(corpus, annotator, config);
    const std::string path =
        (fs::path(a.out_dir) / (std::string(to_string(signal)) + ".jsonl")).string();
    write_dataset(ds, path);
    std::cout << to_string(signal) << "\ttrain=" << ds.train.size() << "\tdev=" << ds.dev.size()
              << "\ttest=" << ds.test.size() << "\t" << path << "\n";
  }
  return kExitOk;
}

struct TrainArgs {
  ResourceFlags resources;
  std::string data;
  std::string corpus;
  std::string signal = "length";
  std::string ranker = "neural";
  std::string out;
  std::uint64_t seed = 42;
  bool grid = false;
  HyperFlags hyper;
  int hash_bits = 0;
  int passes = 0;
  std::string coeffs;
  int lda_topics = 0;
  int lda_iters = 0;
  std::size_t lda_docs = 0;
};

int cmd_train(const TrainArgs& a) {
  if (a.ranker == "handcrafted") {
    if (a.corpus.empty())
      throw ConfigError("train --ranker handcrafted needs --corpus (it fits topics and idf)");
    Corpus corpus = ingest_transcripts(a.corpus);
    rank::HandcraftedConfig config;
    config.seed = a.seed;
    config.lda.seed = a.seed;
    if (a.lda_topics > 0) config.lda.num_topics = a.lda_topics;
    if (a.lda_iters > 0) config.lda.iterations = a.lda_iters;
    if (a.lda_docs > 0) config.lda_max_documents = a.lda_docs;
    if (!a.coeffs.empty()) {
      const auto parts = split_csv(a.coeffs);
      if (parts.size() != feat::kHandcraftedDim)
        throw ConfigError("--coeffs needs exactly 6 comma-separated values");
      for (std::size_t i = 0; i < parts.size(); ++i)
        config.coefficients(static_cast<Eigen::Index>(i)) = std::stod(parts[i]);
    }
    const rank::HandcraftedRanker model = rank::make_handcrafted(corpus, config);
    model.save(a.out);
    std::cout << "saved\t" << a.out << "\n";
    return kExitOk;
  }

  if (a.data.empty()) throw ConfigError("train needs --data");
  const Dataset ds = read_dataset(dataset_path(a.data, parse_signal(a.signal)));
  rank::TrainReport report;

  if (a.ranker == "neural") {
    rank::NeuralConfig config;
    config.seed = a.seed;
    config.side.roster = roster_from_dataset(ds);
    config.lexicon = a.resources.annotator().lexicon;
    a.hyper.with_file_defaults().apply(config);
    rank::NeuralRanker model =
        a.grid ? rank::train_neural_grid(ds, config, nullptr, &report)
               : rank::train_neural(ds, config, &report);
    model.save(a.out);
    write_training_log(report, a.out);
  } else if (a.ranker == "linear") {
    rank::LinearConfig config;
    config.seed = a.seed;
    if (a.hash_bits > 0) config.hash_bits = a.hash_bits;
    if (a.passes > 0) config.passes = a.passes;
    if (a.hyper.lr > 0.0) config.learning_rate = a.hyper.lr;
    const rank::LinearRanker model = rank::train_linear(ds, config);
    model.save(a.out);
  } else if (a.ranker == "dual_encoder") {
    rank::DualEncoderConfig config;
    config.seed = a.seed;
    a.hyper.with_file_defaults().apply(config);
    const rank::DualEncoderRanker model = rank::train_dual_encoder(ds, config, &report);
    model.save(a.out);
    write_training_log(report, a.out);
  } else {
    throw ConfigError("unknown ranker kind: " + a.ranker);
  }
  std::cout << "saved\t" << a.out << "\n";
  if (!report.epochs.empty())
    std::cout << "best_epoch\t" << report.best_epoch << "\tbest_dev_loss\t"
              << fmt(report.best_dev_loss) << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string model;
  std::string ranker;  // "random" baseline
  std::string tuples;
  std::string test_data;
  std::string signal = "length";
  std::string out;
  std::string format = "tsv";
  std::uint64_t seed = 42;
};

int cmd_evaluate(const EvalArgs& a) {
  std::unique_ptr<rank::Ranker> ranker;
  if (a.ranker == "random")
    ranker = std::make_unique<eval::RandomScorer>(a.seed);
  else if (!a.model.empty())
    ranker = rank::load_ranker(a.model);
  else
    throw ConfigError("evaluate needs --model or --ranker random");

  const std::vector<FeedbackTuple> tuples = read_tuples(a.tuples);
  const eval::EvalReport report = eval::pairwise_eval(*ranker, tuples);
  std::optional<double> test_loss;
  if (!a.test_data.empty()) {
    const Dataset ds = read_dataset(dataset_path(a.test_data, parse_signal(a.signal)));
    test_loss = eval::testset_loss(*ranker, ds.test);
  }

  std::cout << "p_at_1\t" << fmt(report.p_at_1) << "\nn_tuples\t" << report.n_tuples
            << "\nmean_margin\t" << fmt(report.mean_margin) << "\n";
  if (test_loss) std::cout << "test_loss\t" << fmt(*test_loss) << "\n";
  if (!a.out.empty()) {
    if (a.format == "json")
      eval::write_eval_report_json(report, test_loss, a.out);
    else
      eval::write_eval_report_tsv(report, test_loss, a.out);
  }
  return kExitOk;
}

struct CorrelateArgs {
  std::string corpus;
  std::string out;
  std::string format = "tsv";
  ResourceFlags resources;
};

int cmd_correlate(const CorrelateArgs& a) {
  const Corpus corpus = ingest_transcripts(a.corpus);
  const text::Annotator annotator = a.resources.annotator();
  text::FeedbackDetector detector = text::default_feedback_detector();
  detector.lexicon = &annotator.lexicon;
  const eval::CorrelationReport report = eval::correlation_study(corpus, detector);

  auto show = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("nan"); };
  std::cout << "pair\tcoefficient\tn\n"
            << "rating/length\t" << show(report.rating_length) << "\t" << report.n_rated << "\n"
            << "rating/positive_feedback\t" << show(report.rating_pos_feedback) << "\t"
            << report.n_rated << "\n"
            << "rating/negative_feedback\t" << show(report.rating_neg_feedback) << "\t"
            << report.n_rated << "\n"
            << "length/positive_feedback\t" << show(report.length_pos_feedback) << "\t"
            << report.n_dialogues << "\n"
            << "length/negative_feedback\t" << show(report.length_neg_feedback) << "\t"
            << report.n_dialogues << "\n";
  if (!a.out.empty()) {
    if (a.format == "json")
      eval::write_correlation_json(report, a.out);
    else
      eval::write_correlation_tsv(report, a.out);
  }
  return kExitOk;
}

struct CurveArgs {
  std::string corpus;
  std::string sizes = "10000,20000,40000";
  std::string rankers = "neural,linear";
  double eval_fraction = 0.1;
  std::uint64_t seed = 42;
  std::string out;
  HyperFlags hyper;
  ResourceFlags resources;
};

int cmd_curve(const CurveArgs& a) {
  const Corpus raw = ingest_transcripts(a.corpus);
  const text::Annotator annotator = a.resources.annotator();
  text::FeedbackDetector detector = text::default_feedback_detector();
  detector.lexicon = &annotator.lexicon;
  auto [train_corpus, tuples] =
      synth::plant_eval_split(raw, a.eval_fraction, annotator, detector, a.seed);
  const Corpus filtered = filter_corpus(train_corpus, FilterConfig{});

  eval::LearningCurveConfig config;
  config.seed = a.seed;
  for (const auto& s : split_csv(a.sizes)) config.sizes.push_back(std::stoull(s));
  config.rankers = split_csv(a.rankers);
  const HyperFlags hyper = a.hyper.with_file_defaults();
  hyper.apply(config.neural);
  hyper.apply(config.dual);
  if (config.neural.side.roster.empty()) {
    std::set<std::string> bots;
    for (const auto& d : filtered.dialogues)
      for (const auto& t : d.turns)
        if (t.is_system()) bots.insert(t.agent);
    config.neural.side.roster.assign(bots.begin(), bots.end());
  }

  const auto points = eval::learning_curve(filtered, tuples, annotator, config);
  std::cout << "ranker\tsize\tp_at_1\n";
  for (const auto& p : points)
    std::cout << p.ranker << "\t" << p.size << "\t" << fmt(p.p_at_1) << "\n";
  if (!a.out.empty()) eval::write_learning_curve_tsv(points, a.out);
  return kExitOk;
}

struct RankArgs {
  std::string model;
  std::string in;  // empty = stdin
  ResourceFlags resources;
};

int cmd_rank(const RankArgs& a) {
  const std::unique_ptr<rank::Ranker> ranker = rank::load_ranker(a.model);

  std::string payload;
  if (a.in.empty()) {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    payload = ss.str();
  } else {
    std::ifstream in(a.in);
    if (!in) throw DataError("cannot open rank input: " + a.in);
    std::ostringstream ss;
    ss << in.rdbuf();
    payload = ss.str();
  }

  const nlohmann::json j = nlohmann::json::parse(payload, nullptr, false);
  if (j.is_discarded()) throw DataError("rank input is not valid JSON");
  const text::Annotator annotator = a.resources.annotator();

  RankingContext context;
  if (j.contains("context")) {
    for (const auto& tj : j.at("context")) {
      Turn t;
      t.agent = tj.at("agent").get<std::string>();
      t.text = tj.at("text").get<std::string>();
      t.timestamp = tj.value("timestamp", 0.0);
      context.entities.push_back(annotator.entities(t.text));
      context.turns.push_back(std::move(t));
    }
    if (context.turns.size() > 6) {
      context.turns.erase(context.turns.begin(),
                          context.turns.end() - 6);
      context.entities.erase(context.entities.begin(), context.entities.end() - 6);
    }
    context.turn_index = static_cast<int>(j.value("turn_index", static_cast<int>(context.turns.size())));
  }

  std::vector<Candidate> candidates;
  for (const auto& cj : j.at("candidates")) {
    Turn t;
    t.agent = cj.at("bot").get<std::string>();
    t.text = cj.at("text").get<std::string>();
    candidates.push_back(annotator.make_candidate(t));
  }

  const auto ranked = rank_candidates(*ranker, context, candidates);
  std::cout << "rank\tscore\tbot\ttext\n";
  for (std::size_t i = 0; i < ranked.size(); ++i)
    std::cout << (i + 1) << "\t" << fmt(ranked[i].score) << "\t" << ranked[i].candidate.bot << "\t"
              << ranked[i].candidate.text << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"convrank: learning-to-rank toolkit for ensemble dialogue systems"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dialogue corpus");
  synth_cmd->add_option("--n", synth_args.n, "Number of dialogues");
  synth_cmd->add_option("--seed", synth_args.seed, "Random seed");
  synth_cmd->add_option("--out", synth_args.out, "Output transcript file")->required();
  synth_cmd->add_option("--config", synth_args.config_path, "Generator key=value config file");
  synth_cmd->add_option("--eval-fraction", synth_args.eval_fraction,
                        "Reserve this dialogue fraction for evaluation tuples");
  synth_cmd->add_option("--eval-out", synth_args.eval_out, "Held-out feedback tuples file");
  synth_cmd->add_option("--quizbot-rate", synth_args.quizbot_rate,
                        "Rate of non-social quiz turns");
  synth_args.resources.add_to(synth_cmd);

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate transcripts and report statistics");
  ingest_cmd->add_option("--in", ingest_args.in, "Transcript file")->required();
  ingest_cmd->add_option("--out", ingest_args.out, "Re-serialized canonical output");

  FilterArgs filter_args;
  auto* filter_cmd = app.add_subcommand("filter", "Remove outliers and non-social turns");
  filter_cmd->add_option("--in", filter_args.in, "Transcript file")->required();
  filter_cmd->add_option("--out", filter_args.out, "Filtered transcript file")->required();
  filter_cmd->add_option("--blacklist", filter_args.blacklist,
                         "Comma-separated non-social bot names");
  filter_cmd->add_flag("--strict", filter_args.strict,
                       "Remove length >= p95 instead of length > p95");

  BuildArgs build_args;
  auto* build_cmd = app.add_subcommand("build-datasets", "Build supervised datasets");
  build_cmd->add_option("--corpus", build_args.corpus, "Transcript file")->required();
  build_cmd->add_option("--signal", build_args.signal, "length, rating, or both");
  build_cmd->add_option("--size", build_args.size, "Total instances per dataset")->required();
  build_cmd->add_option("--seed", build_args.seed, "Random seed");
  build_cmd->add_option("--out-dir", build_args.out_dir, "Output directory")->required();
  build_cmd->add_flag("--no-filter", build_args.no_filter,
                      "Skip the default outlier filter (corpus already filtered)");
  build_args.resources.add_to(build_cmd);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a ranker");
  train_cmd->add_option("--data", train_args.data, "Dataset file or build-datasets directory");
  train_cmd->add_option("--corpus", train_args.corpus, "Corpus file (handcrafted ranker)");
  train_cmd->add_option("--signal", train_args.signal, "length or rating");
  train_cmd->add_option("--ranker", train_args.ranker,
                        "neural, linear, dual_encoder, or handcrafted");
  train_cmd->add_option("--out", train_args.out, "Checkpoint path")->required();
  train_cmd->add_option("--seed", train_args.seed, "Random seed");
  train_cmd->add_flag("--grid", train_args.grid,
                      "Grid-search GRU size x predictor layout, select by dev loss");
  train_args.hyper.add_to(train_cmd);
  train_cmd->add_option("--hash-bits", train_args.hash_bits, "Linear ranker hash bits");
  train_cmd->add_option("--passes", train_args.passes, "Linear ranker passes");
  train_cmd->add_option("--coeffs", train_args.coeffs, "Handcrafted coefficients (6 values)");
  train_cmd->add_option("--lda-topics", train_args.lda_topics, "Topic count");
  train_cmd->add_option("--lda-iters", train_args.lda_iters, "Gibbs sweeps");
  train_cmd->add_option("--lda-docs", train_args.lda_docs, "Max documents for topic fitting");
  train_args.resources.add_to(train_cmd);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Pairwise evaluation on feedback tuples");
  eval_cmd->add_option("--model", eval_args.model, "Ranker checkpoint");
  eval_cmd->add_option("--ranker", eval_args.ranker, "Built-in baseline: random");
  eval_cmd->add_option("--tuples", eval_args.tuples, "Feedback tuples file")->required();
  eval_cmd->add_option("--test", eval_args.test_data, "Dataset whose test split gives the loss");
  eval_cmd->add_option("--signal", eval_args.signal, "Signal for --test when it is a directory");
  eval_cmd->add_option("--out", eval_args.out, "Report file");
  eval_cmd->add_option("--format", eval_args.format, "tsv or json");
  eval_cmd->add_option("--seed", eval_args.seed, "Seed for the random baseline");

  CorrelateArgs corr_args;
  auto* corr_cmd = app.add_subcommand("correlate", "Correlation study over a corpus");
  corr_cmd->add_option("corpus", corr_args.corpus, "Transcript file")->required();
  corr_cmd->add_option("--out", corr_args.out, "Report file");
  corr_cmd->add_option("--format", corr_args.format, "tsv or json");
  corr_args.resources.add_to(corr_cmd);

  CurveArgs curve_args;
  auto* curve_cmd = app.add_subcommand("learning-curve", "Trainset-size sweep");
  curve_cmd->add_option("--corpus", curve_args.corpus, "Transcript file")->required();
  curve_cmd->add_option("--sizes", curve_args.sizes, "Comma-separated dataset sizes");
  curve_cmd->add_option("--rankers", curve_args.rankers, "Comma-separated ranker kinds");
  curve_cmd->add_option("--eval-fraction", curve_args.eval_fraction,
                        "Dialogue fraction reserved for evaluation");
  curve_cmd->add_option("--seed", curve_args.seed, "Random seed");
  curve_cmd->add_option("--out", curve_args.out, "TSV output path");
  curve_args.hyper.add_to(curve_cmd);
  curve_args.resources.add_to(curve_cmd);

  RankArgs rank_args;
  auto* rank_cmd = app.add_subcommand("rank", "Score candidates for one context record");
  rank_cmd->add_option("--model", rank_args.model, "Ranker checkpoint")->required();
  rank_cmd->add_option("--in", rank_args.in, "JSON record file (default: stdin)");
  rank_args.resources.add_to(rank_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // exits 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth_args);
    if (ingest_cmd->parsed()) return cmd_ingest(ingest_args);
    if (filter_cmd->parsed()) return cmd_filter(filter_args);
    if (build_cmd->parsed()) return cmd_build(build_args);
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_args);
    if (corr_cmd->parsed()) return cmd_correlate(corr_args);
    if (curve_cmd->parsed()) return cmd_curve(curve_args);
    if (rank_cmd->parsed()) return cmd_rank(rank_args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
