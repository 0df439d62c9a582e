#include "codekc/config.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <variant>

#include "codekc/errors.hpp"
#include "codekc/rng.hpp"

namespace codekc {

namespace {

using Value = std::variant<std::int64_t, double, bool, std::string, std::vector<double>>;

struct RawConfig {
  std::map<std::string, std::map<std::string, Value>> sections;
  std::set<std::string> consumed;  // "section.key"
};

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

Value parse_scalar(const std::string& text, int line_no) {
  if (text.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty value");
  if (text == "true") return true;
  if (text == "false") return false;
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"')
      throw ConfigError("config line " + std::to_string(line_no) + ": unterminated string");
    return text.substr(1, text.size() - 2);
  }
  bool is_float = text.find_first_of(".eE") != std::string::npos;
  try {
    std::size_t used = 0;
    if (is_float) {
      double d = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return d;
    }
    std::int64_t i = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config line " + std::to_string(line_no) + ": bad value '" + text + "'");
  }
}

Value parse_value(const std::string& text, int line_no) {
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']')
      throw ConfigError("config line " + std::to_string(line_no) + ": unterminated array");
    std::vector<double> values;
    std::string body = text.substr(1, text.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::string v = trim(item);
      if (v.empty()) continue;
      Value s = parse_scalar(v, line_no);
      if (std::holds_alternative<double>(s))
        values.push_back(std::get<double>(s));
      else if (std::holds_alternative<std::int64_t>(s))
        values.push_back(static_cast<double>(std::get<std::int64_t>(s)));
      else
        throw ConfigError("config line " + std::to_string(line_no) + ": arrays hold numbers only");
    }
    return values;
  }
  return parse_scalar(text, line_no);
}

RawConfig parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  RawConfig raw;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Strip comments outside strings.
    bool in_string = false;
    std::string stripped;
    for (char c : line) {
      if (c == '"') in_string = !in_string;
      if (c == '#' && !in_string) break;
      stripped += c;
    }
    std::string t = trim(stripped);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
      section = trim(t.substr(1, t.size() - 2));
      raw.sections[section];
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (section.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": key outside any [section]");
    if (raw.sections[section].count(key))
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    raw.sections[section][key] = parse_value(value, line_no);
  }
  return raw;
}

class Reader {
 public:
  explicit Reader(RawConfig& raw) : raw_(raw) {}

  template <class T, class Setter>
  void get(const std::string& section, const std::string& key, Setter&& set) {
    auto s = raw_.sections.find(section);
    if (s == raw_.sections.end()) return;
    auto k = s->second.find(key);
    if (k == s->second.end()) return;
    raw_.consumed.insert(section + "." + key);
    if constexpr (std::is_same_v<T, std::int64_t> || std::is_same_v<T, double>) {
      // Accept ints where floats are expected.
      if (std::holds_alternative<std::int64_t>(k->second)) {
        set(static_cast<T>(std::get<std::int64_t>(k->second)));
        return;
      }
    }
    if (!std::holds_alternative<T>(k->second))
      throw ConfigError("config key " + section + "." + key + " has the wrong type");
    set(std::get<T>(k->second));
  }

  void check_all_consumed() const {
    for (const auto& [section, keys] : raw_.sections)
      for (const auto& [key, value] : keys)
        if (!raw_.consumed.count(section + "." + key))
          throw ConfigError("unknown config key: " + section + "." + key);
  }

 private:
  RawConfig& raw_;
};

std::vector<std::vector<int>> parse_layout(const std::string& text) {
  std::vector<std::vector<int>> layout;
  std::stringstream problems(text);
  std::string problem;
  while (std::getline(problems, problem, ';')) {
    std::vector<int> ids;
    std::stringstream items(problem);
    std::string item;
    while (std::getline(items, item, ',')) {
      std::string v = trim(item);
      if (v.empty()) continue;
      try {
        ids.push_back(std::stoi(v));
      } catch (const std::exception&) {
        throw ConfigError("synth.layout: bad pattern id '" + v + "'");
      }
    }
    if (!ids.empty()) layout.push_back(std::move(ids));
  }
  return layout;
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  RawConfig raw = parse_file(path);
  Reader r(raw);
  PipelineConfig c;

  r.get<std::string>("paths", "workdir", [&](auto v) { c.workdir = v; });
  r.get<std::string>("paths", "corpus", [&](auto v) { c.corpus_path = v; });

  r.get<std::int64_t>("synth", "students", [&](auto v) { c.synth.students = static_cast<int>(v); });
  r.get<std::int64_t>("synth", "problems", [&](auto v) { c.synth.problems = static_cast<int>(v); });
  r.get<std::int64_t>("synth", "patterns_per_problem",
                      [&](auto v) { c.synth.patterns_per_problem = static_cast<int>(v); });
  r.get<std::int64_t>("synth", "max_attempts", [&](auto v) { c.synth.max_attempts = static_cast<int>(v); });
  r.get<double>("synth", "retry_decay", [&](auto v) { c.synth.retry_decay = v; });
  r.get<std::int64_t>("synth", "seed", [&](auto v) { c.synth.seed = static_cast<std::uint64_t>(v); });
  std::vector<double> pattern_a, pattern_b;
  r.get<std::vector<double>>("synth", "pattern_a", [&](auto v) { pattern_a = v; });
  r.get<std::vector<double>>("synth", "pattern_b", [&](auto v) { pattern_b = v; });
  if (pattern_a.size() != pattern_b.size())
    throw ConfigError("synth.pattern_a and synth.pattern_b must have equal length");
  if (!pattern_a.empty()) {
    c.synth.patterns.clear();
    for (std::size_t i = 0; i < pattern_a.size(); ++i)
      c.synth.patterns.push_back({pattern_a[i], pattern_b[i]});
  }
  r.get<std::string>("synth", "layout", [&](auto v) { c.synth.layout = parse_layout(v); });

  r.get<double>("corpus", "anomaly_early_fail_min", [&](auto v) { c.anomaly.early_fail_min = v; });
  r.get<double>("corpus", "anomaly_late_success_min", [&](auto v) { c.anomaly.late_success_min = v; });
  r.get<std::int64_t>("corpus", "anomaly_min_attempts",
                      [&](auto v) { c.anomaly.min_attempts = static_cast<int>(v); });

  r.get<double>("split", "train_frac", [&](auto v) { c.split.train_frac = v; });
  r.get<double>("split", "val_frac", [&](auto v) { c.split.val_frac = v; });
  r.get<double>("split", "test_frac", [&](auto v) { c.split.test_frac = v; });
  r.get<std::string>("split", "mode", [&](auto v) {
    if (v == "submission-stratified")
      c.split.mode = corpus::SplitMode::SubmissionStratified;
    else if (v == "student-level")
      c.split.mode = corpus::SplitMode::StudentLevel;
    else
      throw ConfigError("split.mode must be 'submission-stratified' or 'student-level'");
  });
  r.get<std::int64_t>("split", "seed", [&](auto v) { c.split.seed = static_cast<std::uint64_t>(v); });

  r.get<std::int64_t>("pattern", "max_nodes", [&](auto v) { c.max_nodes = static_cast<std::size_t>(v); });
  r.get<std::int64_t>("pattern", "max_subtrees",
                      [&](auto v) { c.max_subtrees = static_cast<std::size_t>(v); });

  r.get<std::int64_t>("sann", "embed_dim", [&](auto v) { c.sann.embed_dim = static_cast<int>(v); });
  r.get<double>("sann", "entropy_weight", [&](auto v) { c.sann.entropy_weight = v; });
  r.get<double>("sann", "attention_threshold", [&](auto v) { c.sann.attention_threshold = v; });
  r.get<double>("sann", "learning_rate", [&](auto v) { c.sann.learning_rate = v; });
  r.get<std::int64_t>("sann", "epochs", [&](auto v) { c.sann.epochs = static_cast<int>(v); });
  r.get<std::int64_t>("sann", "patience", [&](auto v) { c.sann.patience = static_cast<int>(v); });
  r.get<std::int64_t>("sann", "batch_size", [&](auto v) { c.sann.batch_size = static_cast<int>(v); });
  r.get<std::int64_t>("sann", "seed", [&](auto v) { c.sann.seed = static_cast<std::uint64_t>(v); });

  r.get<std::int64_t>("vae", "node_embed_dim", [&](auto v) { c.vae.node_embed_dim = static_cast<int>(v); });
  r.get<std::int64_t>("vae", "node_hidden", [&](auto v) { c.vae.node_hidden = static_cast<int>(v); });
  r.get<std::int64_t>("vae", "subtree_embed_dim",
                      [&](auto v) { c.vae.subtree_embed_dim = static_cast<int>(v); });
  r.get<std::int64_t>("vae", "combiner_dim", [&](auto v) { c.vae.combiner_dim = static_cast<int>(v); });
  r.get<std::int64_t>("vae", "seq_hidden", [&](auto v) { c.vae.seq_hidden = static_cast<int>(v); });
  r.get<std::int64_t>("vae", "latent_dim", [&](auto v) { c.vae.latent_dim = static_cast<int>(v); });
  r.get<double>("vae", "beta", [&](auto v) { c.vae.beta = v; });
  r.get<double>("vae", "dropout", [&](auto v) { c.vae.dropout = v; });
  r.get<double>("vae", "learning_rate", [&](auto v) { c.vae.learning_rate = v; });
  r.get<std::int64_t>("vae", "epochs", [&](auto v) { c.vae.epochs = static_cast<int>(v); });
  r.get<std::int64_t>("vae", "patience", [&](auto v) { c.vae.patience = static_cast<int>(v); });
  r.get<std::int64_t>("vae", "batch_size", [&](auto v) { c.vae.batch_size = static_cast<int>(v); });
  r.get<double>("vae", "train_frac", [&](auto v) { c.vae.train_frac = v; });
  r.get<double>("vae", "val_frac", [&](auto v) { c.vae.val_frac = v; });
  r.get<double>("vae", "test_frac", [&](auto v) { c.vae.test_frac = v; });
  r.get<std::int64_t>("vae", "seed", [&](auto v) { c.vae.seed = static_cast<std::uint64_t>(v); });

  r.get<std::int64_t>("kc", "k", [&](auto v) { c.kc_k = static_cast<int>(v); });
  r.get<std::int64_t>("kc", "k_candidates_min",
                      [&](auto v) { c.kc_candidates_min = static_cast<int>(v); });
  r.get<std::int64_t>("kc", "k_candidates_max",
                      [&](auto v) { c.kc_candidates_max = static_cast<int>(v); });
  r.get<std::int64_t>("kc", "seed", [&](auto v) { c.kc_seed = static_cast<std::uint64_t>(v); });
  r.get<bool>("kc", "direct_assignment", [&](auto v) { c.kc_direct_assignment = v; });

  r.get<std::int64_t>("curves", "min_points", [&](auto v) { c.curves.min_points = static_cast<int>(v); });
  r.get<std::int64_t>("curves", "min_students",
                      [&](auto v) { c.curves.min_students = static_cast<int>(v); });
  r.get<double>("curves", "slope_eps", [&](auto v) { c.curves.slope_eps = v; });
  r.get<double>("curves", "high_err", [&](auto v) { c.curves.high_err = v; });
  r.get<bool>("curves", "svg", [&](auto v) { c.curves_svg = v; });

  r.get<double>("afm", "l2", [&](auto v) { c.afm.l2 = v; });
  r.get<std::int64_t>("afm", "max_iter", [&](auto v) { c.afm.max_iter = static_cast<int>(v); });
  r.get<double>("afm", "tol", [&](auto v) { c.afm.tol = v; });

  r.get<std::int64_t>("dkt", "hidden", [&](auto v) { c.dkt.hidden = static_cast<int>(v); });
  r.get<double>("dkt", "dropout", [&](auto v) { c.dkt.dropout = v; });
  r.get<double>("dkt", "learning_rate", [&](auto v) { c.dkt.learning_rate = v; });
  r.get<std::int64_t>("dkt", "epochs", [&](auto v) { c.dkt.epochs = static_cast<int>(v); });
  r.get<std::int64_t>("dkt", "patience", [&](auto v) { c.dkt.patience = static_cast<int>(v); });
  r.get<std::int64_t>("dkt", "batch_size", [&](auto v) { c.dkt.batch_size = static_cast<int>(v); });
  r.get<std::int64_t>("dkt", "seed", [&](auto v) { c.dkt.seed = static_cast<std::uint64_t>(v); });
  r.get<double>("dkt", "train_frac", [&](auto v) { c.dkt_train_frac = v; });
  r.get<double>("dkt", "val_frac", [&](auto v) { c.dkt_val_frac = v; });
  r.get<double>("dkt", "test_frac", [&](auto v) { c.dkt_test_frac = v; });
  r.get<std::int64_t>("dkt", "split_seed", [&](auto v) { c.dkt_split_seed = static_cast<std::uint64_t>(v); });

  r.check_all_consumed();
  return c;
}

void PipelineConfig::apply_master_seed(std::uint64_t seed) {
  synth.seed = fnv1a64("synth", seed);
  split.seed = fnv1a64("split", seed);
  sann.seed = fnv1a64("sann", seed);
  vae.seed = fnv1a64("vae", seed);
  kc_seed = fnv1a64("kc", seed);
  dkt.seed = fnv1a64("dkt", seed);
  dkt_split_seed = fnv1a64("dkt-split", seed);
}

}  // namespace codekc
