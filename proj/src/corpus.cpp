#include "convrank/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "convrank/errors.hpp"
#include "convrank/rng.hpp"
#include "json.hpp"

namespace convrank {

using nlohmann::json;

namespace {

json turn_to_json(const Turn& t) {
  return json{{"agent", t.agent}, {"text", t.text}, {"timestamp", t.timestamp}};
}

Turn turn_from_json(const json& j, std::size_t line_no) {
  if (!j.is_object() || !j.contains("agent") || !j.contains("text") || !j.contains("timestamp"))
    throw ParseError("turn record must have agent, text, timestamp", line_no);
  Turn t;
  t.agent = j.at("agent").get<std::string>();
  t.text = j.at("text").get<std::string>();
  t.timestamp = j.at("timestamp").get<double>();
  if (t.agent.empty()) throw ParseError("turn has empty agent", line_no);
  if (t.timestamp < 0.0) throw ParseError("turn has negative timestamp", line_no);
  if (t.text.empty() && t.is_system()) throw ParseError("system turn has empty text", line_no);
  return t;
}

json context_to_json(const RankingContext& c) {
  json turns = json::array();
  for (const auto& t : c.turns) turns.push_back(turn_to_json(t));
  return json{{"turns", std::move(turns)}, {"entities", c.entities}, {"turn_index", c.turn_index}};
}

RankingContext context_from_json(const json& j, std::size_t line_no) {
  RankingContext c;
  for (const auto& t : j.at("turns")) c.turns.push_back(turn_from_json(t, line_no));
  c.entities = j.at("entities").get<std::vector<std::vector<std::string>>>();
  c.turn_index = j.at("turn_index").get<int>();
  if (c.turns.size() > 6) throw ParseError("context has more than 6 turns", line_no);
  if (c.entities.size() != c.turns.size())
    throw ParseError("context entities not parallel to turns", line_no);
  return c;
}

json candidate_to_json(const Candidate& c) {
  return json{{"bot", c.bot}, {"text", c.text}, {"entities", c.entities}, {"sentiment", c.sentiment}};
}

Candidate candidate_from_json(const json& j, std::size_t line_no) {
  Candidate c;
  c.bot = j.at("bot").get<std::string>();
  c.text = j.at("text").get<std::string>();
  c.entities = j.at("entities").get<std::vector<std::string>>();
  c.sentiment = j.at("sentiment").get<double>();
  if (c.sentiment < -1.0 || c.sentiment > 1.0)
    throw ParseError("candidate sentiment outside [-1,1]", line_no);
  return c;
}

json parse_line(const std::string& line, std::size_t line_no) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) throw ParseError("invalid JSON", line_no);
  return j;
}

void check_header(const json& j, const char* expected_type, std::size_t line_no) {
  if (!j.is_object() || !j.contains("format_version"))
    throw ParseError("missing format_version header", line_no);
  const int version = j.at("format_version").get<int>();
  if (version != kTranscriptFormatVersion)
    throw ParseError("unsupported format_version " + std::to_string(version), line_no);
  if (j.contains("type") && j.at("type").get<std::string>() != expected_type)
    throw ParseError(std::string("expected a ") + expected_type + " file", line_no);
}

}  // namespace

bool operator==(const Turn& a, const Turn& b) {
  return a.agent == b.agent && a.text == b.text && a.timestamp == b.timestamp;
}

bool operator==(const Dialogue& a, const Dialogue& b) {
  return a.id == b.id && a.rating == b.rating && a.turns == b.turns;
}

// ---------------------------------------------------------------------------
// Transcript IO
// ---------------------------------------------------------------------------

Corpus ingest_transcripts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open transcript file: " + path);

  Corpus corpus;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, line_no);
    if (!header_seen) {
      check_header(j, "transcripts", line_no);
      header_seen = true;
      continue;
    }
    if (!j.is_object() || !j.contains("dialogue_id"))
      throw ParseError("dialogue record missing dialogue_id", line_no);
    if (!j.contains("turns")) throw ParseError("dialogue record missing turns", line_no);

    Dialogue d;
    d.id = j.at("dialogue_id").get<std::string>();
    if (!seen_ids.insert(d.id).second) throw DataError("duplicate dialogue id: " + d.id);

    if (j.contains("rating") && !j.at("rating").is_null()) {
      const int r = j.at("rating").get<int>();
      if (r < 1 || r > 5) throw ParseError("rating outside 1..5", line_no);
      d.rating = r;
    }
    double prev_ts = 0.0;
    for (const auto& tj : j.at("turns")) {
      Turn t = turn_from_json(tj, line_no);
      if (!d.turns.empty() && t.timestamp < prev_ts)
        throw ParseError("timestamps must be non-decreasing within a dialogue", line_no);
      prev_ts = t.timestamp;
      d.turns.push_back(std::move(t));
    }
    corpus.dialogues.push_back(std::move(d));
  }
  if (!header_seen) throw DataError("transcript file has no header line: " + path);
  return corpus;
}

void write_transcripts(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write transcript file: " + path);
  out << json{{"format_version", kTranscriptFormatVersion}, {"type", "transcripts"}}.dump() << "\n";
  for (const auto& d : corpus.dialogues) {
    json turns = json::array();
    for (const auto& t : d.turns) turns.push_back(turn_to_json(t));
    json j{{"dialogue_id", d.id},
           {"rating", d.rating ? json(*d.rating) : json(nullptr)},
           {"turns", std::move(turns)}};
    out << j.dump() << "\n";
  }
}

// ---------------------------------------------------------------------------
// Filtering
// ---------------------------------------------------------------------------

int nearest_rank_percentile(std::vector<int> values, double p) {
  if (values.empty()) throw DataError("percentile of an empty list");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n));
  if (rank < 1) rank = 1;
  if (rank > values.size()) rank = values.size();
  return values[rank - 1];
}

Corpus filter_corpus(const Corpus& corpus, const FilterConfig& config, FilterReport* report) {
  if (corpus.empty()) throw DataError("filter_corpus: empty corpus");

  FilterReport r;
  r.input_dialogues = corpus.size();

  // Strip non-social system turns first; length rules apply to what remains.
  std::vector<Dialogue> stripped;
  stripped.reserve(corpus.size());
  for (const auto& d : corpus.dialogues) {
    Dialogue kept;
    kept.id = d.id;
    kept.rating = d.rating;
    for (const auto& t : d.turns) {
      if (t.is_system() && config.bot_blacklist.count(t.agent) > 0) {
        ++r.turns_removed;
      } else {
        kept.turns.push_back(t);
      }
    }
    if (kept.turns.empty()) {
      ++r.removed_emptied;
      continue;
    }
    stripped.push_back(std::move(kept));
  }
  if (stripped.empty()) throw DataError("filter_corpus: blacklist removed every dialogue");

  std::vector<int> lengths;
  lengths.reserve(stripped.size());
  for (const auto& d : stripped) lengths.push_back(d.length());
  const int p95 = nearest_rank_percentile(lengths, 0.95);
  r.length_cap = p95;

  Corpus out;
  out.outlier_trimmed = true;
  for (auto& d : stripped) {
    const int len = d.length();
    if (len < 3) {
      ++r.removed_short;
      continue;
    }
    if (!corpus.outlier_trimmed) {
      const bool outlier = config.percentile_strict ? len >= p95 : len > p95;
      if (outlier) {
        ++r.removed_long;
        continue;
      }
    }
    out.dialogues.push_back(std::move(d));
  }

  r.kept_dialogues = out.size();
  r.fraction_removed =
      static_cast<double>(r.input_dialogues - r.kept_dialogues) / static_cast<double>(r.input_dialogues);
  if (report != nullptr) *report = r;
  return out;
}

// ---------------------------------------------------------------------------
// Target normalization
// ---------------------------------------------------------------------------

std::unordered_map<std::string, double> normalize_targets(const Corpus& corpus, Signal signal) {
  std::unordered_map<std::string, double> targets;
  if (signal == Signal::rating) {
    for (const auto& d : corpus.dialogues)
      if (d.rating) targets.emplace(d.id, (static_cast<double>(*d.rating) - 1.0) / 4.0);
    return targets;
  }
  if (corpus.empty()) throw DataError("normalize_targets: empty corpus");
  int lo = corpus.dialogues.front().length();
  int hi = lo;
  for (const auto& d : corpus.dialogues) {
    lo = std::min(lo, d.length());
    hi = std::max(hi, d.length());
  }
  if (lo == hi)
    throw DataError("normalize_targets: degenerate corpus, all dialogues have length " +
                    std::to_string(lo));
  const double span = static_cast<double>(hi - lo);
  for (const auto& d : corpus.dialogues)
    targets.emplace(d.id, static_cast<double>(d.length() - lo) / span);
  return targets;
}

// ---------------------------------------------------------------------------
// Context construction
// ---------------------------------------------------------------------------

RankingContext make_context(const Dialogue& dialogue, std::size_t response_index,
                            const text::Annotator& annotator) {
  RankingContext ctx;
  ctx.turn_index = static_cast<int>(response_index);

  // Walk backwards collecting up to 3 system and 3 user turns.
  std::vector<std::size_t> picked;
  int want_system = 3;
  int want_user = 3;
  for (std::size_t i = response_index; i-- > 0;) {
    const Turn& t = dialogue.turns[i];
    if (t.is_user()) {
      if (want_user == 0) continue;
      --want_user;
    } else {
      if (want_system == 0) continue;
      --want_system;
    }
    picked.push_back(i);
    if (want_system == 0 && want_user == 0) break;
  }
  std::reverse(picked.begin(), picked.end());

  for (const std::size_t i : picked) {
    const Turn& t = dialogue.turns[i];
    ctx.turns.push_back(t);
    ctx.entities.push_back(annotator.entities(t.text));
  }
  return ctx;
}

// ---------------------------------------------------------------------------
// Dataset construction
// ---------------------------------------------------------------------------

namespace {

struct EligibleDialogue {
  std::size_t dialogue_index = 0;
  double target = 0.0;
  std::vector<std::size_t> response_indices;  // system turns
};

struct InstanceRef {
  std::size_t dialogue_index;
  std::size_t turn_index;
  double target;
};

// Assigns whole dialogues to the train/dev/test pools in shuffled order until
// each pool's instance supply covers its quota.
std::array<std::vector<const EligibleDialogue*>, 3> assign_pools(
    std::vector<const EligibleDialogue*>& shuffled, const std::array<std::size_t, 3>& quotas,
    const char* polarity_name) {
  std::array<std::vector<const EligibleDialogue*>, 3> pools;
  std::size_t split = 0;
  std::size_t pool_supply = 0;
  for (const auto* d : shuffled) {
    while (split < 3 && pool_supply >= quotas[split]) {
      pool_supply = 0;
      ++split;
    }
    if (split == 3) break;
    pools[split].push_back(d);
    pool_supply += d->response_indices.size();
  }
  while (split < 3 && pool_supply >= quotas[split]) {
    pool_supply = 0;
    ++split;
  }
  if (split < 3)
    throw DataError(std::string("build_dataset: not enough ") + polarity_name +
                    " dialogues to fill the 8:1:1 split");
  return pools;
}

// Samples `quota` instances from the pool without replacement.
std::vector<InstanceRef> sample_pool(const std::vector<const EligibleDialogue*>& pool,
                                     std::size_t quota, Rng& rng) {
  std::vector<InstanceRef> all;
  for (const auto* d : pool)
    for (const std::size_t t : d->response_indices)
      all.push_back({d->dialogue_index, t, d->target});
  if (all.size() < quota) throw DataError("build_dataset: split pool smaller than its quota");
  // Partial Fisher-Yates: only the first `quota` slots matter.
  for (std::size_t i = 0; i < quota; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.bounded(all.size() - i));
    std::swap(all[i], all[j]);
  }
  all.resize(quota);
  return all;
}

}  // namespace

Dataset build_dataset(const Corpus& corpus, const text::Annotator& annotator,
                      const BuildConfig& config) {
  if (config.size == 0) throw ConfigError("build_dataset: size must be positive");
  if (config.size % 2 != 0)
    throw ConfigError("build_dataset: size must be even for an exact 50/50 balance");

  const auto targets = normalize_targets(corpus, config.signal);

  std::vector<EligibleDialogue> positives;
  std::vector<EligibleDialogue> negatives;
  std::size_t pos_supply = 0;
  std::size_t neg_supply = 0;
  for (std::size_t di = 0; di < corpus.dialogues.size(); ++di) {
    const Dialogue& d = corpus.dialogues[di];
    const auto it = targets.find(d.id);
    if (it == targets.end()) continue;
    const double target = it->second;
    const bool pos = target > kPositiveThreshold;
    const bool neg = target < kNegativeThreshold;
    if (!pos && !neg) continue;

    EligibleDialogue e;
    e.dialogue_index = di;
    e.target = target;
    for (std::size_t t = 0; t < d.turns.size(); ++t)
      if (d.turns[t].is_system()) e.response_indices.push_back(t);
    if (e.response_indices.empty()) continue;

    if (pos) {
      pos_supply += e.response_indices.size();
      positives.push_back(std::move(e));
    } else {
      neg_supply += e.response_indices.size();
      negatives.push_back(std::move(e));
    }
  }

  const std::size_t half = config.size / 2;
  if (pos_supply < half || neg_supply < half) {
    const std::size_t max_balanced = 2 * std::min(pos_supply, neg_supply);
    throw DataError("build_dataset: requested " + std::to_string(config.size) +
                    " instances but max balanced size is " + std::to_string(max_balanced) +
                    " (" + std::to_string(std::min(pos_supply, neg_supply)) + " per side; " +
                    std::to_string(pos_supply) + " positive, " + std::to_string(neg_supply) +
                    " negative available)");
  }

  // 8:1:1 instance quotas, exact by construction.
  const auto train_total = static_cast<std::size_t>(std::lround(0.8 * static_cast<double>(config.size)));
  const auto dev_total = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(config.size)));
  const std::size_t test_total = config.size - train_total - dev_total;

  std::array<std::size_t, 3> pos_quota{};
  pos_quota[0] = train_total - train_total / 2;
  pos_quota[1] = dev_total / 2;
  pos_quota[2] = half - pos_quota[0] - pos_quota[1];
  if (pos_quota[2] > test_total)
    throw DataError("build_dataset: size too small for a balanced 8:1:1 split");
  std::array<std::size_t, 3> neg_quota{train_total - pos_quota[0], dev_total - pos_quota[1],
                                       test_total - pos_quota[2]};

  Rng rng(mix_seeds(config.seed, config.signal == Signal::length ? 1 : 2));

  auto shuffle_refs = [&rng](std::vector<EligibleDialogue>& v) {
    std::vector<const EligibleDialogue*> refs;
    refs.reserve(v.size());
    for (const auto& e : v) refs.push_back(&e);
    rng.shuffle(refs);
    return refs;
  };
  auto pos_refs = shuffle_refs(positives);
  auto neg_refs = shuffle_refs(negatives);
  const auto pos_pools = assign_pools(pos_refs, pos_quota, "positive");
  const auto neg_pools = assign_pools(neg_refs, neg_quota, "negative");

  Dataset ds;
  std::vector<TrainingInstance>* splits[3] = {&ds.train, &ds.dev, &ds.test};
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<InstanceRef> refs = sample_pool(pos_pools[s], pos_quota[s], rng);
    const std::vector<InstanceRef> neg = sample_pool(neg_pools[s], neg_quota[s], rng);
    refs.insert(refs.end(), neg.begin(), neg.end());
    // Deterministic output order regardless of sampling internals.
    std::stable_sort(refs.begin(), refs.end(), [&](const InstanceRef& a, const InstanceRef& b) {
      const std::string& ida = corpus.dialogues[a.dialogue_index].id;
      const std::string& idb = corpus.dialogues[b.dialogue_index].id;
      if (ida != idb) return ida < idb;
      return a.turn_index < b.turn_index;
    });
    splits[s]->reserve(refs.size());
    for (const auto& ref : refs) {
      const Dialogue& d = corpus.dialogues[ref.dialogue_index];
      TrainingInstance inst;
      inst.context = make_context(d, ref.turn_index, annotator);
      inst.response = annotator.make_candidate(d.turns[ref.turn_index]);
      inst.target = ref.target;
      inst.polarity = ref.target > kPositiveThreshold ? Polarity::positive : Polarity::negative;
      inst.source_dialogue = d.id;
      splits[s]->push_back(std::move(inst));
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Feedback extraction
// ---------------------------------------------------------------------------

std::vector<FeedbackTuple> extract_feedback_set(const Corpus& corpus,
                                                const text::Annotator& annotator,
                                                const text::FeedbackDetector& detector,
                                                std::uint64_t seed,
                                                FeedbackExtractionReport* report) {
  struct SystemTurnRef {
    std::size_t dialogue_index;
    std::size_t turn_index;
  };
  std::vector<SystemTurnRef> pool;
  for (std::size_t di = 0; di < corpus.dialogues.size(); ++di)
    for (std::size_t t = 0; t < corpus.dialogues[di].turns.size(); ++t)
      if (corpus.dialogues[di].turns[t].is_system()) pool.push_back({di, t});

  FeedbackExtractionReport rep;
  std::vector<FeedbackTuple> tuples;
  Rng rng(mix_seeds(seed, 0x0feedbac));

  for (std::size_t di = 0; di < corpus.dialogues.size(); ++di) {
    const Dialogue& d = corpus.dialogues[di];
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
      if (!d.turns[t].is_user() || !detector.is_positive_feedback(d.turns[t].text)) continue;
      ++rep.flagged_turns;
      if (t == 0 || !d.turns[t - 1].is_system()) {
        ++rep.skipped_no_preceding_system;
        continue;
      }
      FeedbackTuple tuple;
      tuple.context = make_context(d, t - 1, annotator);
      tuple.good_response = annotator.make_candidate(d.turns[t - 1]);

      // Uniform over system turns in other dialogues.
      SystemTurnRef bad{di, 0};
      bool found = false;
      for (int attempt = 0; attempt < 1000; ++attempt) {
        bad = pool[rng.bounded(pool.size())];
        if (bad.dialogue_index != di) {
          found = true;
          break;
        }
      }
      if (!found)
        throw DataError("extract_feedback_set: no system turns outside dialogue " + d.id +
                        " to sample a bad response from");
      tuple.bad_response =
          annotator.make_candidate(corpus.dialogues[bad.dialogue_index].turns[bad.turn_index]);
      tuples.push_back(std::move(tuple));
    }
  }
  rep.tuples = tuples.size();
  if (report != nullptr) *report = rep;
  return tuples;
}

// ---------------------------------------------------------------------------
// Dataset / tuple files
// ---------------------------------------------------------------------------

namespace {

json instance_to_json(const TrainingInstance& inst, const char* split) {
  return json{{"split", split},
              {"target", inst.target},
              {"polarity", to_string(inst.polarity)},
              {"source_dialogue", inst.source_dialogue},
              {"context", context_to_json(inst.context)},
              {"response", candidate_to_json(inst.response)}};
}

TrainingInstance instance_from_json(const json& j, std::size_t line_no) {
  TrainingInstance inst;
  inst.target = j.at("target").get<double>();
  if (inst.target < 0.0 || inst.target > 1.0) throw ParseError("target outside [0,1]", line_no);
  const std::string pol = j.at("polarity").get<std::string>();
  if (pol != "positive" && pol != "negative") throw ParseError("unknown polarity: " + pol, line_no);
  inst.polarity = pol == "positive" ? Polarity::positive : Polarity::negative;
  const bool consistent = inst.polarity == Polarity::positive
                              ? inst.target > kPositiveThreshold
                              : inst.target < kNegativeThreshold;
  if (!consistent) throw ParseError("polarity inconsistent with the target thresholds", line_no);
  inst.source_dialogue = j.at("source_dialogue").get<std::string>();
  inst.context = context_from_json(j.at("context"), line_no);
  inst.response = candidate_from_json(j.at("response"), line_no);
  return inst;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file: " + path);
  out << json{{"format_version", kDatasetFormatVersion}, {"type", "dataset"}}.dump() << "\n";
  for (const auto& inst : ds.train) out << instance_to_json(inst, "train").dump() << "\n";
  for (const auto& inst : ds.dev) out << instance_to_json(inst, "dev").dump() << "\n";
  for (const auto& inst : ds.test) out << instance_to_json(inst, "test").dump() << "\n";
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, line_no);
    if (!header_seen) {
      check_header(j, "dataset", line_no);
      header_seen = true;
      continue;
    }
    const std::string split = j.at("split").get<std::string>();
    TrainingInstance inst = instance_from_json(j, line_no);
    if (split == "train")
      ds.train.push_back(std::move(inst));
    else if (split == "dev")
      ds.dev.push_back(std::move(inst));
    else if (split == "test")
      ds.test.push_back(std::move(inst));
    else
      throw ParseError("unknown split: " + split, line_no);
  }
  if (!header_seen) throw DataError("dataset file has no header line: " + path);
  return ds;
}

void write_tuples(const std::vector<FeedbackTuple>& tuples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write tuples file: " + path);
  out << json{{"format_version", kDatasetFormatVersion}, {"type", "tuples"}}.dump() << "\n";
  for (const auto& t : tuples) {
    json j{{"context", context_to_json(t.context)},
           {"good_response", candidate_to_json(t.good_response)},
           {"bad_response", candidate_to_json(t.bad_response)}};
    out << j.dump() << "\n";
  }
}

std::vector<FeedbackTuple> read_tuples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open tuples file: " + path);
  std::vector<FeedbackTuple> tuples;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, line_no);
    if (!header_seen) {
      check_header(j, "tuples", line_no);
      header_seen = true;
      continue;
    }
    FeedbackTuple t;
    t.context = context_from_json(j.at("context"), line_no);
    t.good_response = candidate_from_json(j.at("good_response"), line_no);
    t.bad_response = candidate_from_json(j.at("bad_response"), line_no);
    tuples.push_back(std::move(t));
  }
  if (!header_seen) throw DataError("tuples file has no header line: " + path);
  return tuples;
}

}  // namespace convrank
