#include "dc/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "dc/error.hpp"

namespace dc {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string bad_value(std::string_view key, std::string_view value, const char* what) {
  return "key '" + std::string(key) + "': '" + std::string(value) + "' is not " + what;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(bad_value(key, v, "a non-negative integer"));
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) throw ConfigError(bad_value(key, v, "a number"));
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError(bad_value(key, v, "a boolean (true/false)"));
}

std::vector<std::size_t> parse_sizes(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  if (trim(v).empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = v.find(',', pos);
    out.push_back(parse_u64(key, trim(v.substr(pos, comma - pos))));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

// Shortest text that parses back to the same double.
std::string fmt_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Key {
  std::string name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Key size_key(std::string name, T TrainConfig::*field) {
  return {name,
          [name, field](RunConfig& c, std::string_view v) {
            c.train.*field = static_cast<T>(parse_u64(name, v));
          },
          [field](const RunConfig& c) { return std::to_string(c.train.*field); }};
}

Key double_key(std::string name, double TrainConfig::*field) {
  return {name, [name, field](RunConfig& c, std::string_view v) { c.train.*field = parse_double(name, v); },
          [field](const RunConfig& c) { return fmt_double(c.train.*field); }};
}

Key bool_key(std::string name, bool TrainConfig::*field) {
  return {name, [name, field](RunConfig& c, std::string_view v) { c.train.*field = parse_bool(name, v); },
          [field](const RunConfig& c) { return fmt_bool(c.train.*field); }};
}

Key sgd_double_key(std::string name, double SgdConfig::*field) {
  return {name,
          [name, field](RunConfig& c, std::string_view v) { c.train.sgd.*field = parse_double(name, v); },
          [field](const RunConfig& c) { return fmt_double(c.train.sgd.*field); }};
}

Key path_key(std::string name, std::filesystem::path RunConfig::*field) {
  return {name, [field](RunConfig& c, std::string_view v) { c.*field = std::string(v); },
          [field](const RunConfig& c) { return (c.*field).string(); }};
}

Key opt_path_key(std::string name, std::optional<std::filesystem::path> RunConfig::*field) {
  return {name,
          [field](RunConfig& c, std::string_view v) {
            if (v.empty())
              (c.*field).reset();
            else
              c.*field = std::string(v);
          },
          [field](const RunConfig& c) { return c.*field ? (c.*field)->string() : std::string(); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> t;
    t.push_back(path_key("dataset", &RunConfig::dataset));
    t.push_back(opt_path_key("truth", &RunConfig::truth));
    t.push_back(path_key("out_dir", &RunConfig::out_dir));
    t.push_back(opt_path_key("warm_start", &RunConfig::warm_start));
    t.push_back(size_key("seed", &TrainConfig::seed));
    t.push_back(size_key("m", &TrainConfig::m));
    t.push_back(size_key("k", &TrainConfig::k));
    t.push_back(size_key("reassign_period", &TrainConfig::reassign_period));
    t.push_back(size_key("epochs", &TrainConfig::epochs));
    t.push_back(size_key("num_worker_groups", &TrainConfig::num_worker_groups));
    t.push_back(sgd_double_key("lr", &SgdConfig::learning_rate));
    t.push_back(sgd_double_key("momentum", &SgdConfig::momentum));
    t.push_back(sgd_double_key("weight_decay", &SgdConfig::weight_decay));
    t.push_back(sgd_double_key("dropout", &SgdConfig::dropout_rate));
    t.push_back({"batch_size",
                 [](RunConfig& c, std::string_view v) { c.train.sgd.batch_size = parse_u64("batch_size", v); },
                 [](const RunConfig& c) { return std::to_string(c.train.sgd.batch_size); }});
    t.push_back(bool_key("whitening", &TrainConfig::whitening));
    t.push_back(size_key("whitening_dim", &TrainConfig::whitening_dim));
    t.push_back(double_key("whitening_epsilon", &TrainConfig::whitening_epsilon));
    t.push_back(bool_key("refit_whitening", &TrainConfig::refit_whitening));
    t.push_back(bool_key("sobel", &TrainConfig::sobel));
    t.push_back(bool_key("augment", &TrainConfig::augment));
    t.push_back({"hidden",
                 [](RunConfig& c, std::string_view v) { c.train.hidden = parse_sizes("hidden", v); },
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.train.hidden.size(); ++i)
                     s += (i ? "," : "") + std::to_string(c.train.hidden[i]);
                   return s;
                 }});
    t.push_back(size_key("feature_dim", &TrainConfig::feature_dim));
    t.push_back(size_key("kmeans_iters", &TrainConfig::kmeans_iters));
    t.push_back(double_key("kmeans_tolerance", &TrainConfig::kmeans_tolerance));
    t.push_back(size_key("kmeans_shards", &TrainConfig::kmeans_shards));
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& k : keys()) n.push_back(k.name);
    return n;
  }();
  return names;
}

void set_config_key(RunConfig& cfg, std::string_view key, std::string_view value) {
  if (key.starts_with("run.")) {
    cfg.run_keys[std::string(key)] = std::string(value);
    return;
  }
  for (const auto& k : keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + std::string(key) + "'");
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    try {
      if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'");
      const auto key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError("empty key");
      set_config_key(cfg, key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(cfg) + "\n";
  for (const auto& [key, value] : cfg.run_keys) out += key + " = " + value + "\n";
  return out;
}

}  // namespace dc
