#include "convrank/textproc.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "convrank/errors.hpp"

namespace convrank::text {

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

char lower(unsigned char c) { return static_cast<char>(std::tolower(c)); }

// Raw words with original casing, used by the entity heuristic. Records
// whether each word starts a sentence (text start or after . ! ?).
struct RawWord {
  std::string word;
  bool sentence_initial;
};

std::vector<RawWord> raw_words(const std::string& text) {
  std::vector<RawWord> out;
  std::string cur;
  bool at_sentence_start = true;
  bool pending_start = true;
  for (unsigned char c : text) {
    if (is_word_char(c)) {
      if (cur.empty()) at_sentence_start = pending_start;
      cur.push_back(static_cast<char>(c));
    } else {
      if (!cur.empty()) {
        out.push_back({cur, at_sentence_start});
        cur.clear();
        pending_start = false;
      }
      if (c == '.' || c == '!' || c == '?') pending_start = true;
    }
  }
  if (!cur.empty()) out.push_back({cur, at_sentence_start});
  return out;
}

bool is_capitalized(const std::string& w) {
  return !w.empty() && std::isupper(static_cast<unsigned char>(w[0])) != 0;
}

std::string to_lower_copy(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) out.push_back(lower(c));
  return out;
}

}  // namespace

std::vector<std::string> word_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (is_word_char(c)) {
      cur.push_back(lower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string normalize_utterance(const std::string& text) {
  std::string out;
  for (const auto& w : word_tokens(text)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::vector<std::string> tokenize(const Turn& turn, const std::vector<std::string>& entities) {
  const std::string agent = to_lower_copy(turn.agent);
  std::vector<std::string> words = word_tokens(turn.text);
  if (words.size() > kMaxUtteranceTokens) words.resize(kMaxUtteranceTokens);

  std::vector<std::string> out;
  out.reserve(words.size() + entities.size());
  for (const auto& w : words) out.push_back(agent + "|" + w);
  for (const auto& e : entities) out.push_back("ENT|" + e);
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() {
  id_to_token_ = {"<pad>", "<unk>"};
  token_to_id_ = {{"<pad>", kPadId}, {"<unk>", kUnkId}};
}

Vocabulary Vocabulary::build(const std::vector<std::pair<std::string, std::size_t>>& counts,
                             std::size_t max_size) {
  if (counts.empty()) throw DataError("build_vocab: empty token counts");
  if (max_size < 3) throw ConfigError("build_vocab: max_size must leave room beyond the special ids");

  std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  const std::size_t capacity = max_size - 2;
  for (std::size_t i = 0; i < sorted.size() && i < capacity; ++i) {
    const int id = static_cast<int>(v.id_to_token_.size());
    v.token_to_id_.emplace(sorted[i].first, id);
    v.id_to_token_.push_back(sorted[i].first);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& id_to_token) {
  if (id_to_token.size() < 2 || id_to_token[0] != "<pad>" || id_to_token[1] != "<unk>")
    throw DataError("vocabulary token list must start with <pad>, <unk>");
  Vocabulary v;
  v.id_to_token_ = id_to_token;
  v.token_to_id_.clear();
  for (std::size_t i = 0; i < id_to_token.size(); ++i)
    v.token_to_id_.emplace(id_to_token[i], static_cast<int>(i));
  return v;
}

int Vocabulary::encode(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(encode(t));
  return ids;
}

const std::string& Vocabulary::decode(int id) const {
  if (id < 0 || id >= static_cast<int>(id_to_token_.size()))
    throw DataError("vocabulary id out of range: " + std::to_string(id));
  return id_to_token_[static_cast<std::size_t>(id)];
}

// ---------------------------------------------------------------------------
// Entities
// ---------------------------------------------------------------------------

Gazetteer::Gazetteer(const std::vector<std::string>& entries) {
  for (const auto& e : entries) add(e);
}

void Gazetteer::add(const std::string& entry) {
  std::vector<std::string> words = word_tokens(entry);
  if (words.empty()) return;
  std::string normalized;
  for (const auto& w : words) {
    if (!normalized.empty()) normalized.push_back('_');
    normalized += w;
  }
  entries_.emplace_back(std::move(words), std::move(normalized));
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
}

std::vector<std::string> Gazetteer::match(const std::vector<std::string>& words) const {
  std::vector<std::string> out;
  if (entries_.empty() || words.empty()) return out;
  std::vector<bool> used(words.size(), false);
  for (const auto& [seq, normalized] : entries_) {
    if (seq.size() > words.size()) continue;
    for (std::size_t i = 0; i + seq.size() <= words.size(); ++i) {
      bool hit = true;
      for (std::size_t j = 0; j < seq.size(); ++j) {
        if (used[i + j] || words[i + j] != seq[j]) {
          hit = false;
          break;
        }
      }
      if (hit) {
        out.push_back(normalized);
        for (std::size_t j = 0; j < seq.size(); ++j) used[i + j] = true;
      }
    }
  }
  return out;
}

std::vector<std::string> extract_entities(const std::string& text,
                                          const std::unordered_set<std::string>& stopwords,
                                          const Gazetteer& gazetteer) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  auto emit = [&](const std::string& e) {
    if (seen.insert(e).second) out.push_back(e);
  };

  const std::vector<RawWord> words = raw_words(text);
  std::size_t i = 0;
  while (i < words.size()) {
    if (!is_capitalized(words[i].word)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < words.size() && is_capitalized(words[j].word)) ++j;
    const std::size_t run = j - i;
    std::string entity;
    for (std::size_t k = i; k < j; ++k) {
      if (!entity.empty()) entity.push_back('_');
      entity += to_lower_copy(words[k].word);
    }
    // Single capitalized stopwords ("I", sentence-initial "The") are casing
    // artifacts, not entities.
    const bool stopword_single = run == 1 && stopwords.count(to_lower_copy(words[i].word)) > 0;
    if (!stopword_single) emit(entity);
    i = j;
  }

  std::vector<std::string> lowered;
  lowered.reserve(words.size());
  for (const auto& w : words) lowered.push_back(to_lower_copy(w.word));
  for (const auto& g : gazetteer.match(lowered)) emit(g);
  return out;
}

// ---------------------------------------------------------------------------
// Sentiment
// ---------------------------------------------------------------------------

namespace {

constexpr double kSquashAlpha = 15.0;
constexpr int kModifierScope = 3;

// Sentiment-only preprocessing: map "n't" contractions onto an explicit
// "not" so the tokenizer's apostrophe split does not eat negations.
std::string expand_contractions(const std::string& text) {
  std::string lowered = to_lower_copy(text);
  std::string out;
  out.reserve(lowered.size());
  for (std::size_t i = 0; i < lowered.size(); ++i) {
    if (i + 2 < lowered.size() && lowered[i] == 'n' && lowered[i + 1] == '\'' &&
        lowered[i + 2] == 't' &&
        (i + 3 == lowered.size() || !is_word_char(static_cast<unsigned char>(lowered[i + 3])))) {
      out += " not";
      i += 2;
    } else {
      out.push_back(lowered[i]);
    }
  }
  return out;
}

}  // namespace

double sentiment_score(const std::string& text, const SentimentLexicon& lexicon) {
  const std::vector<std::string> tokens = word_tokens(expand_contractions(text));
  double sum = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = lexicon.valence.find(tokens[i]);
    if (it == lexicon.valence.end()) continue;
    double v = it->second;
    // Look back over the modifier scope for boosters and negations.
    const std::size_t back = i >= static_cast<std::size_t>(kModifierScope) ? i - kModifierScope : 0;
    for (std::size_t j = i; j > back; --j) {
      const std::string& prev = tokens[j - 1];
      auto b = lexicon.boosters.find(prev);
      if (b != lexicon.boosters.end()) v *= 1.0 + b->second;
      if (lexicon.negations.count(prev) > 0) v = -v;
    }
    sum += v;
  }
  if (sum == 0.0) return 0.0;
  return sum / std::sqrt(sum * sum + kSquashAlpha);
}

// ---------------------------------------------------------------------------
// Annotator / feedback detection
// ---------------------------------------------------------------------------

Candidate Annotator::make_candidate(const Turn& turn) const {
  Candidate c;
  c.bot = turn.agent;
  c.text = turn.text;
  c.entities = entities(turn.text);
  c.sentiment = sentiment(turn.text);
  return c;
}

bool FeedbackDetector::is_positive_feedback(const std::string& text) const {
  const std::string key = normalize_utterance(text);
  if (key.empty() || blacklist.count(key) > 0) return false;
  if (whitelist.count(key) > 0) return true;
  if (lexicon == nullptr) return false;
  return sentiment_score(text, *lexicon) > threshold;
}

bool FeedbackDetector::is_negative_feedback(const std::string& text) const {
  const std::string key = normalize_utterance(text);
  if (key.empty()) return false;
  if (neg_whitelist.count(key) > 0) return true;
  if (lexicon == nullptr) return false;
  return sentiment_score(text, *lexicon) < -threshold;
}

Vocabulary build_vocab(const Corpus& corpus, const Annotator& annotator, std::size_t max_size) {
  if (corpus.empty()) throw DataError("build_vocab: empty corpus");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& d : corpus.dialogues)
    for (const auto& turn : d.turns)
      for (const auto& tok : tokenize(turn, annotator.entities(turn.text))) ++counts[tok];
  std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  return Vocabulary::build(sorted, max_size);
}

// ---------------------------------------------------------------------------
// Resource loading
// ---------------------------------------------------------------------------

SentimentLexicon load_lexicon_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file: " + path);
  SentimentLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string term, value, tag;
    std::getline(ss, term, '\t');
    std::getline(ss, value, '\t');
    std::getline(ss, tag, '\t');
    if (term.empty()) throw ParseError("lexicon row missing term", line_no);
    if (tag == "negation") {
      lex.negations.insert(term);
      continue;
    }
    double v = 0.0;
    try {
      v = std::stod(value);
    } catch (const std::exception&) {
      throw ParseError("lexicon row has non-numeric valence", line_no);
    }
    if (tag == "booster") {
      lex.boosters.emplace(term, v);
    } else {
      if (v < -1.0 || v > 1.0) throw ParseError("lexicon valence outside [-1,1]", line_no);
      lex.valence.emplace(term, v);
    }
  }
  return lex;
}

std::vector<std::string> load_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open list file: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.push_back(line);
  }
  return out;
}

}  // namespace convrank::text
