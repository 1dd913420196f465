#include "convrank/textproc.hpp"

// Bundled text resources. These stand in for the external sentiment / NER /
// phrase-list tools the live system called out to; each one can be replaced
// at startup by a TSV or line file via configuration.

namespace convrank::text {

const SentimentLexicon& default_lexicon() {
  static const SentimentLexicon lex = [] {
    SentimentLexicon l;
    l.valence = {
        {"great", 1.0},     {"awesome", 1.0},    {"excellent", 1.0},  {"fantastic", 1.0},
        {"amazing", 0.95},  {"wonderful", 0.95}, {"perfect", 0.95},   {"brilliant", 0.9},
        {"fascinating", 0.9}, {"love", 0.9},     {"loved", 0.9},      {"thank", 0.9},
        {"thanks", 0.9},    {"delightful", 0.9}, {"interesting", 0.85}, {"enjoyed", 0.85},
        {"cool", 0.8},      {"fun", 0.8},        {"funny", 0.8},      {"best", 0.8},
        {"yay", 0.8},       {"enjoy", 0.8},      {"wow", 0.7},        {"nice", 0.7},
        {"good", 0.7},      {"happy", 0.7},      {"clever", 0.7},     {"neat", 0.65},
        {"sweet", 0.6},     {"glad", 0.6},       {"smart", 0.6},      {"haha", 0.6},
        {"super", 0.6},     {"liked", 0.5},      {"lol", 0.5},        {"like", 0.4},
        {"okay", 0.1},      {"ok", 0.1},
        {"bad", -0.7},      {"boring", -0.85},   {"terrible", -0.95}, {"awful", -0.95},
        {"horrible", -0.95},{"hate", -0.9},      {"hated", -0.9},     {"worst", -0.9},
        {"stupid", -0.8},   {"annoying", -0.8},  {"sucks", -0.8},     {"useless", -0.8},
        {"dumb", -0.7},     {"lame", -0.7},      {"rubbish", -0.7},   {"angry", -0.7},
        {"ugh", -0.6},      {"sad", -0.6},       {"creepy", -0.6},    {"wrong", -0.5},
        {"confusing", -0.5},{"poor", -0.5},      {"nonsense", -0.6},  {"weird", -0.3},
    };
    l.negations = {"not", "no", "never", "neither", "nor", "cannot", "nothing", "nobody"};
    l.boosters = {
        {"very", 0.25},      {"really", 0.25},   {"so", 0.25},     {"extremely", 0.25},
        {"incredibly", 0.25},{"totally", 0.25},  {"absolutely", 0.25}, {"pretty", 0.25},
        {"slightly", -0.25}, {"somewhat", -0.25},{"kinda", -0.25}, {"barely", -0.25},
        {"hardly", -0.25},   {"bit", -0.25},
    };
    return l;
  }();
  return lex;
}

const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> words = {
      "i",    "me",    "my",   "we",    "our",  "you",  "your", "he",   "she",  "it",
      "its",  "they",  "them", "the",   "a",    "an",   "and",  "or",   "but",  "if",
      "of",   "at",    "by",   "for",   "with", "about","to",   "from", "in",   "on",
      "is",   "are",   "was",  "were",  "be",   "been", "am",   "do",   "does", "did",
      "have", "has",   "had",  "will",  "would","can",  "could","should","shall","that",
      "this", "these", "those","what",  "which","who",  "when", "where","how",  "why",
      "so",   "then",  "there","here",  "as",   "not",  "no",   "yes",  "up",   "down",
      "let",  "lets",  "s",    "t",     "re",   "d",    "ll",   "m",    "ve",
  };
  return words;
}

const std::vector<std::string>& default_dull_phrases() {
  static const std::vector<std::string> phrases = {
      "i don't know",
      "i don't know what to say",
      "i'm not sure",
      "i am not sure",
      "let me think",
      "hmm okay",
      "i see",
      "sure",
      "maybe",
      "okay",
      "that is a thing",
      "let's talk about something else",
      "let's change the topic",
      "what do you want to talk about",
      "can you say that again",
      "i did not get that",
      "tell me something",
      "go on",
  };
  return phrases;
}

const std::vector<std::string>& default_gazetteer_entries() {
  static const std::vector<std::string> entries = {
      "star wars",      "darth vader",     "harry potter",   "taylor swift",
      "michael jordan", "serena williams", "mount everest",  "amazon river",
      "new york",       "san francisco",   "black hole",     "milky way",
      "solar system",   "jurassic park",   "sherlock holmes","game of thrones",
      "the beatles",    "mona lisa",       "leonardo da vinci", "isaac newton",
      "marie curie",    "albert einstein", "grand canyon",   "great wall",
      "pacific ocean",  "roman empire",    "world cup",      "super bowl",
      "video games",    "machine learning",
  };
  return entries;
}

const std::vector<std::string>& default_feedback_whitelist() {
  // Normalized forms (lowercase, punctuation stripped).
  static const std::vector<std::string> phrases = {
      "that s pretty cool",
      "great thank you",
      "great thanks",
      "gee thanks",
      "that was interesting",
      "that s interesting",
      "how interesting",
      "interesting fact",
      "you re funny",
      "funny bot you re funny",
      "that was funny",
      "wow that s cool",
      "that s cool",
      "that s awesome",
      "that s amazing",
      "that s neat",
      "that was fun",
      "cool fact",
      "i love that",
      "love it",
      "nice one",
      "good one",
      "awesome thanks",
      "pretty cool",
      "wow interesting",
  };
  return phrases;
}

const std::vector<std::string>& default_feedback_blacklist() {
  static const std::vector<std::string> phrases = {
      "no", "stop", "shut up", "goodbye", "good bye", "bye", "no thanks", "not really",
      "nothing", "whatever",
  };
  return phrases;
}

const std::vector<std::string>& default_negative_feedback_phrases() {
  static const std::vector<std::string> phrases = {
      "that s boring",
      "this is boring",
      "you re boring",
      "that s stupid",
      "you re not making sense",
      "that makes no sense",
      "stop it",
      "that was terrible",
      "i hate this",
      "you re wrong",
      "that s annoying",
  };
  return phrases;
}

Annotator default_annotator() {
  Annotator a;
  a.stopwords = default_stopwords();
  a.gazetteer = Gazetteer(default_gazetteer_entries());
  a.lexicon = default_lexicon();
  return a;
}

FeedbackDetector default_feedback_detector() {
  FeedbackDetector d;
  for (const auto& p : default_feedback_whitelist()) d.whitelist.insert(normalize_utterance(p));
  for (const auto& p : default_feedback_blacklist()) d.blacklist.insert(normalize_utterance(p));
  for (const auto& p : default_negative_feedback_phrases())
    d.neg_whitelist.insert(normalize_utterance(p));
  d.lexicon = &default_lexicon();
  return d;
}

}  // namespace convrank::text
