#include "convrank/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "convrank/corpus.hpp"
#include "convrank/errors.hpp"
#include "convrank/rng.hpp"

namespace convrank::synth {

namespace {

struct Topic {
  const char* name;
  std::vector<const char*> entities;  // Title Case surface forms
  std::vector<const char*> words;
};

const std::vector<Topic>& topic_inventory() {
  static const std::vector<Topic> topics = {
      {"movies",
       {"Star Wars", "Jurassic Park", "Darth Vader", "Indiana Jones", "Toy Story", "The Matrix"},
       {"film", "director", "sequel", "scene", "actor", "trailer", "cinema", "script", "plot",
        "premiere", "blockbuster", "audience"}},
      {"books",
       {"Harry Potter", "Sherlock Holmes", "Moby Dick", "Don Quixote", "War And Peace"},
       {"novel", "author", "chapter", "library", "paperback", "plot", "reader", "series",
        "publisher", "story", "character", "bestseller"}},
      {"music",
       {"The Beatles", "Taylor Swift", "Elvis Presley", "Mozart", "Queen Band"},
       {"album", "song", "concert", "guitar", "melody", "lyrics", "tour", "drummer", "chart",
        "studio", "piano", "festival"}},
      {"space",
       {"Black Hole", "Milky Way", "Mars Rover", "Hubble Telescope", "Solar System", "Apollo Mission"},
       {"orbit", "galaxy", "rocket", "planet", "astronaut", "telescope", "gravity", "launch",
        "comet", "nebula", "satellite", "crater"}},
      {"sports",
       {"Michael Jordan", "Serena Williams", "World Cup", "Super Bowl", "Tour De France"},
       {"match", "season", "coach", "stadium", "record", "league", "trophy", "referee", "goal",
        "championship", "athlete", "training"}},
      {"science",
       {"Isaac Newton", "Marie Curie", "Albert Einstein", "Charles Darwin", "Nikola Tesla"},
       {"theory", "experiment", "laboratory", "discovery", "physics", "chemistry", "equation",
        "hypothesis", "research", "microscope", "element", "particle"}},
      {"travel",
       {"Grand Canyon", "Mount Everest", "Great Wall", "Eiffel Tower", "Machu Picchu"},
       {"journey", "flight", "passport", "hotel", "landmark", "tourist", "valley", "summit",
        "itinerary", "luggage", "guide", "border"}},
      {"history",
       {"Roman Empire", "French Revolution", "Silk Road", "Cold War", "Ancient Egypt"},
       {"emperor", "century", "dynasty", "battle", "treaty", "empire", "archive", "ruins",
        "kingdom", "revolt", "artifact", "chronicle"}},
      {"food",
       {"Neapolitan Pizza", "Sushi Masters", "French Bakery", "Taco Festival", "Chocolate Factory"},
       {"recipe", "kitchen", "flavor", "ingredient", "dessert", "restaurant", "spice", "oven",
        "chef", "menu", "sauce", "harvest"}},
      {"nature",
       {"Amazon River", "Pacific Ocean", "Sahara Desert", "Coral Reef", "Redwood Forest"},
       {"river", "forest", "climate", "species", "habitat", "wildlife", "ecosystem", "canyon",
        "glacier", "volcano", "meadow", "current"}},
      {"technology",
       {"Machine Learning", "Quantum Computer", "Electric Car", "Smart Home", "Neural Network"},
       {"software", "hardware", "robot", "sensor", "battery", "processor", "network", "gadget",
        "algorithm", "startup", "prototype", "upgrade"}},
      {"animals",
       {"Blue Whale", "Snow Leopard", "Honey Badger", "Emperor Penguin", "Giant Panda"},
       {"predator", "jungle", "migration", "mammal", "feather", "burrow", "herd", "nocturnal",
        "cub", "whisker", "paw", "roar"}},
      {"games",
       {"Video Games", "Chess Masters", "Monopoly Board", "Tetris World", "Arcade Classic"},
       {"player", "level", "console", "puzzle", "strategy", "quest", "score", "dice", "board",
        "tournament", "avatar", "controller"}},
      {"weather",
       {"Hurricane Season", "Polar Vortex", "El Nino", "Monsoon Rains", "Heat Wave"},
       {"forecast", "storm", "thunder", "rainfall", "breeze", "humidity", "blizzard", "drought",
        "sunshine", "lightning", "front", "barometer"}},
      {"art",
       {"Mona Lisa", "Leonardo Da Vinci", "Starry Night", "Sistine Chapel", "Vincent Van Gogh"},
       {"painting", "canvas", "gallery", "sculpture", "portrait", "museum", "sketch", "palette",
        "exhibit", "fresco", "brush", "masterpiece"}},
      {"health",
       {"Marathon Training", "Yoga Retreat", "Sleep Science", "Mediterranean Diet", "Gym Culture"},
       {"exercise", "nutrition", "vitamin", "muscle", "stamina", "wellness", "posture", "routine",
        "recovery", "hydration", "stretch", "heartbeat"}},
  };
  return topics;
}

const std::vector<const char*>& fact_fragments() {
  static const std::vector<const char*> facts = {
      "is famous for", "was inspired by", "has a long history with", "is closely related to",
      "recently made news about", "is often compared with", "holds a record for",
  };
  return facts;
}

const std::vector<const char*>& generator_dull_phrases() {
  // Neutral-sentiment subset; the feature-side dull list is a superset.
  static const std::vector<const char*> dull = {
      "i don't know",
      "let me think",
      "hmm okay",
      "i see",
      "let's talk about something else",
      "what do you want to talk about",
      "can you say that again",
      "maybe",
      "i am not sure",
      "that is a thing",
  };
  return dull;
}

const std::vector<const char*>& positive_feedback_pool() {
  // Every entry is detected by the default feedback detector (whitelist or
  // sentiment route); a unit test pins that.
  static const std::vector<const char*> pool = {
      "that's pretty cool",
      "great, thank you",
      "great thanks",
      "gee thanks",
      "that was interesting",
      "that's interesting",
      "interesting fact",
      "you're funny",
      "that was fun",
      "that's awesome",
      "that's amazing",
      "wow that's cool",
      "i love that",
      "love it",
      "nice one",
      "good one",
      "awesome thanks",
      "this is really great fun",
  };
  return pool;
}

const std::vector<const char*>& negative_feedback_pool() {
  static const std::vector<const char*> pool = {
      "that's boring",
      "this is boring",
      "stop it",
      "that was terrible",
      "i hate this",
      "you're wrong",
      "that makes no sense",
  };
  return pool;
}

const std::vector<const char*>& user_fillers() {
  static const std::vector<const char*> fillers = {
      "yeah", "okay", "go on", "hmm", "tell me more", "what else", "alright", "sure go ahead",
  };
  return fillers;
}

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct DialogueState {
  const Topic* topic = nullptr;
  std::string active_entity;  // Title Case
  double quality = 0.0;
};

std::string pick(Rng& rng, const std::vector<const char*>& pool) {
  return pool[rng.bounded(pool.size())];
}

std::string informative_text(Rng& rng, const Topic& topic, const std::string& e) {
  const std::string fact = pick(rng, fact_fragments());
  const std::string w1 = topic.words[rng.bounded(topic.words.size())];
  const std::string w2 = topic.words[rng.bounded(topic.words.size())];

  switch (rng.bounded(4)) {
    case 0:
      return "Oh, speaking of " + e + ", I read a great piece: " + e + " " + fact + " the " + w1 +
             ". Shall I say more about the " + w2 + "?";
    case 1:
      return "Here is a fun fact about " + e + ": it " + fact + " a famous " + w1 + ".";
    case 2:
      return "Did you know that " + e + " " + fact + " the " + w1 + "? Such a cool " + w2 + ".";
    default:
      return e + " is fascinating, it " + fact + " the " + w1 + ". Want to hear about the " + w2 +
             "?";
  }
}

std::string good_system_text(Rng& rng, DialogueState& st, const GeneratorConfig& cfg) {
  const Topic& topic = *st.topic;
  if (st.active_entity.empty() || !rng.flip(cfg.entity_continue_prob))
    st.active_entity = topic.entities[rng.bounded(topic.entities.size())];
  return informative_text(rng, topic, st.active_entity);
}

// Informative in form but about an unrelated topic; the coherence failure
// mode of a bad ensemble pick.
std::string offtopic_system_text(Rng& rng, const std::vector<Topic>& topics,
                                 const DialogueState& st) {
  std::size_t other = rng.bounded(topics.size());
  while (&topics[other] == st.topic) other = rng.bounded(topics.size());
  const Topic& topic = topics[other];
  const std::string e = topic.entities[rng.bounded(topic.entities.size())];
  return informative_text(rng, topic, e);
}

std::string dull_system_text(Rng& rng) { return pick(rng, generator_dull_phrases()); }

std::string quiz_system_text(Rng& rng, const DialogueState& st) {
  const Topic& topic = *st.topic;
  return "QUIZ round " + std::to_string(1 + rng.bounded(9)) + ": name a " +
         topic.words[rng.bounded(topic.words.size())] + " for ten points";
}

std::string normal_user_text(Rng& rng, DialogueState& st) {
  const Topic& topic = *st.topic;
  switch (rng.bounded(5)) {
    case 0: {
      const std::string e = topic.entities[rng.bounded(topic.entities.size())];
      st.active_entity = e;
      return "tell me about " + lowercase(e);
    }
    case 1:
      return "what about the " + std::string(topic.words[rng.bounded(topic.words.size())]);
    case 2:
      return "do you know anything about " +
             std::string(topic.words[rng.bounded(topic.words.size())]) + "s";
    default:
      return pick(rng, user_fillers());
  }
}

std::string opener_text(Rng& rng, DialogueState& st) {
  const Topic& topic = *st.topic;
  switch (rng.bounded(3)) {
    case 0: {
      const std::string e = topic.entities[rng.bounded(topic.entities.size())];
      st.active_entity = e;
      return "let's talk about " + lowercase(e);
    }
    case 1:
      return "hi, can we chat about " + std::string(topic.name) + "?";
    default:
      return "hello there";
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  if (n_dialogues < 10) throw ConfigError("generator: n_dialogues must be at least 10");
  if (roster.empty()) throw ConfigError("generator: empty bot roster");
  if (length_base - length_noise < 3)
    throw ConfigError("generator: length model can produce dialogues shorter than 3 turns");
  if (length_gain < 1) throw ConfigError("generator: length_gain must be positive");
  for (const double p : {rated_fraction, rating_noise, positive_feedback_prob,
                         negative_feedback_prob, entity_continue_prob, quizbot_rate,
                         good_prob_cap, offtopic_rate})
    if (p < 0.0 || p > 1.0) throw ConfigError("generator: probabilities must lie in [0,1]");
  if (quality_shape <= 0.0 || good_exponent <= 0.0)
    throw ConfigError("generator: shape parameters must be positive");
}

Corpus generate_corpus(const GeneratorConfig& config) {
  config.validate();
  Rng master(mix_seeds(config.seed, 0x5348));

  Corpus corpus;
  corpus.dialogues.reserve(config.n_dialogues);
  const auto& topics = topic_inventory();

  for (std::size_t idx = 0; idx < config.n_dialogues; ++idx) {
    Rng rng = master.fork(idx);
    Dialogue d;
    char id_buf[16];
    std::snprintf(id_buf, sizeof(id_buf), "d%06zu", idx);
    d.id = id_buf;

    DialogueState st;
    st.topic = &topics[rng.bounded(topics.size())];

    // U-shaped quality: extremes are common, the middle is thinner.
    const double u = rng.next_double();
    const double centered = 2.0 * u - 1.0;
    st.quality = 0.5 * (1.0 + std::copysign(std::pow(std::abs(centered), config.quality_shape),
                                            centered));
    const double p_good =
        std::min(config.good_prob_cap, std::pow(st.quality, config.good_exponent));

    const int length = std::max(3, config.length_base +
                                       static_cast<int>(std::lround(config.length_gain * st.quality)) +
                                       static_cast<int>(rng.range(-config.length_noise,
                                                                  config.length_noise)));

    double ts = 1.6e9 + static_cast<double>(rng.bounded(86400L * 365));
    bool last_system_good = false;
    bool last_system_dull = false;
    for (int t = 0; t < length; ++t) {
      Turn turn;
      turn.timestamp = ts;
      ts += 3.0 + static_cast<double>(rng.bounded(9));
      if (t % 2 == 0) {
        // User side.
        turn.agent = "user";
        if (t == 0) {
          turn.text = opener_text(rng, st);
        } else if (last_system_good && rng.flip(config.positive_feedback_prob)) {
          turn.text = pick(rng, positive_feedback_pool());
        } else if (last_system_dull && rng.flip(config.negative_feedback_prob)) {
          turn.text = pick(rng, negative_feedback_pool());
        } else {
          turn.text = normal_user_text(rng, st);
        }
      } else {
        last_system_good = false;
        last_system_dull = false;
        if (config.quizbot_rate > 0.0 && rng.flip(config.quizbot_rate)) {
          turn.agent = "quizbot";
          turn.text = quiz_system_text(rng, st);
        } else {
          turn.agent = config.roster[rng.bounded(config.roster.size())];
          if (rng.flip(p_good)) {
            turn.text = good_system_text(rng, st, config);
            last_system_good = true;
          } else if (rng.flip(config.offtopic_rate)) {
            turn.text = offtopic_system_text(rng, topics, st);
            last_system_dull = true;
          } else {
            turn.text = dull_system_text(rng);
            last_system_dull = true;
          }
        }
      }
      d.turns.push_back(std::move(turn));
    }

    if (rng.flip(config.rated_fraction)) {
      const double mix =
          (1.0 - config.rating_noise) * st.quality + config.rating_noise * rng.next_double();
      const int rating = std::clamp(1 + static_cast<int>(std::lround(4.0 * mix)), 1, 5);
      d.rating = rating;
    }
    corpus.dialogues.push_back(std::move(d));
  }
  return corpus;
}

std::pair<Corpus, std::vector<FeedbackTuple>> plant_eval_split(
    const Corpus& corpus, double fraction, const text::Annotator& annotator,
    const text::FeedbackDetector& detector, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0)
    throw ConfigError("plant_eval_split: fraction must lie strictly inside (0,1)");
  if (corpus.empty()) throw DataError("plant_eval_split: empty corpus");

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix_seeds(seed, 0x5e7a));
  rng.shuffle(order);

  const auto n_reserve =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * corpus.size())));
  std::vector<std::size_t> reserve_idx(order.begin(), order.begin() + n_reserve);
  std::vector<std::size_t> train_idx(order.begin() + n_reserve, order.end());
  std::sort(reserve_idx.begin(), reserve_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  if (train_idx.empty()) throw DataError("plant_eval_split: training side is empty");

  Corpus reserve;
  reserve.outlier_trimmed = corpus.outlier_trimmed;
  for (const std::size_t i : reserve_idx) reserve.dialogues.push_back(corpus.dialogues[i]);
  Corpus train;
  train.outlier_trimmed = corpus.outlier_trimmed;
  for (const std::size_t i : train_idx) train.dialogues.push_back(corpus.dialogues[i]);

  std::vector<FeedbackTuple> tuples = extract_feedback_set(reserve, annotator, detector, seed);
  if (tuples.empty())
    throw DataError("plant_eval_split: the reserved dialogues contain no feedback turns");

  // The training side must still be able to supply balanced instances.
  try {
    const Corpus filtered = filter_corpus(train, FilterConfig{});
    BuildConfig probe;
    probe.signal = Signal::length;
    probe.size = 2;
    probe.seed = seed;
    (void)build_dataset(filtered, annotator, probe);
  } catch (const Error& e) {
    throw DataError(std::string("plant_eval_split: training side lacks eligible pairs (") +
                    e.what() + ")");
  }
  return {std::move(train), std::move(tuples)};
}

GeneratorConfig config_from_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open generator config: " + path);
  GeneratorConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw ParseError("generator config line is not key = value", line_no);
      continue;
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "n_dialogues")
        config.n_dialogues = std::stoull(value);
      else if (key == "seed")
        config.seed = std::stoull(value);
      else if (key == "roster") {
        config.roster.clear();
        std::istringstream ss(value);
        std::string bot;
        while (std::getline(ss, bot, ','))
          if (!(bot = trim(bot)).empty()) config.roster.push_back(bot);
      } else if (key == "quality_shape")
        config.quality_shape = std::stod(value);
      else if (key == "good_exponent")
        config.good_exponent = std::stod(value);
      else if (key == "good_prob_cap")
        config.good_prob_cap = std::stod(value);
      else if (key == "offtopic_rate")
        config.offtopic_rate = std::stod(value);
      else if (key == "length_base")
        config.length_base = std::stoi(value);
      else if (key == "length_gain")
        config.length_gain = std::stoi(value);
      else if (key == "length_noise")
        config.length_noise = std::stoi(value);
      else if (key == "rated_fraction")
        config.rated_fraction = std::stod(value);
      else if (key == "rating_noise")
        config.rating_noise = std::stod(value);
      else if (key == "positive_feedback_prob")
        config.positive_feedback_prob = std::stod(value);
      else if (key == "negative_feedback_prob")
        config.negative_feedback_prob = std::stod(value);
      else if (key == "entity_continue_prob")
        config.entity_continue_prob = std::stod(value);
      else if (key == "quizbot_rate")
        config.quizbot_rate = std::stod(value);
      else
        throw ParseError("unknown generator config key: " + key, line_no);
    } catch (const std::invalid_argument&) {
      throw ParseError("bad value for " + key, line_no);
    } catch (const std::out_of_range&) {
      throw ParseError("value out of range for " + key, line_no);
    }
  }
  return config;
}

}  // namespace convrank::synth
