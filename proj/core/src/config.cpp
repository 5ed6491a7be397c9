#include "gradfilter/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "gradfilter/errors.hpp"

namespace gradfilter {

namespace {

struct Default {
  const char* key;
  const char* value;
};

// clang-format off
constexpr Default kDefaults[] = {
    {"command", "train"},
    {"out", "out"},
    {"seed", "1"},
    // data
    {"data", "synthetic"},
    {"images", ""},
    {"labels", ""},
    {"classes", "10"},
    {"per_class", "200"},
    {"channels", "1"},
    {"height", "16"},
    {"width", "16"},
    {"noise", "0.25"},
    {"val_fraction", "0.2"},
    {"split_shards", "0"},
    {"pretrain_epochs", "0"},
    // model and training
    {"mode", "vanilla"},
    {"r", "2"},
    {"layers", "2"},
    {"partial_patch", "true_mean"},
    {"epochs", "10"},
    {"batch_size", "32"},
    {"lr", "0.05"},
    {"momentum", "0.9"},
    {"weight_decay", "0.0001"},
    {"clip", "2.0"},
    {"warmup_epochs", "0"},
    {"checkpoint", ""},
    // cost sweep
    {"cx", "192"},
    {"cy", "64"},
    {"hy", "120"},
    {"wy", "160"},
    {"kh", "3"},
    {"kw", "3"},
    {"hx", "0"},
    {"wx", "0"},
    {"r_list", "1,2,4,8,16,32,64,120,160"},
    // single-patch SNR trials
    {"trials", "1000"},
    {"patch", "8"},
    {"kernel", "3"},
    {"edge_trials", "true"},
    // snr probe
    {"snr_r_list", "1,2,4"},
    {"probe_batch", "32"},
};
// clang-format on

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw ConfigError("config: '" + key + "' = '" + text + "' is not a valid number");
  }
  return v;
}

}  // namespace

ExperimentCfg::ExperimentCfg() {
  for (const Default& d : kDefaults) values_.emplace(d.key, d.value);
}

bool ExperimentCfg::known(const std::string& key) {
  return std::any_of(std::begin(kDefaults), std::end(kDefaults),
                     [&](const Default& d) { return key == d.key; });
}

ExperimentCfg ExperimentCfg::from_text(std::string_view text) {
  ExperimentCfg cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    cfg.set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
  }
  return cfg;
}

ExperimentCfg ExperimentCfg::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

void ExperimentCfg::set(const std::string& key, const std::string& value) {
  if (!known(key)) throw ConfigError("config: unknown key '" + key + "'");
  values_[key] = value;
}

void ExperimentCfg::set_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& ExperimentCfg::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: unknown key '" + key + "'");
  return it->second;
}

std::int64_t ExperimentCfg::integer(const std::string& key) const {
  return parse_number<std::int64_t>(key, str(key));
}

std::uint64_t ExperimentCfg::count(const std::string& key) const {
  const std::int64_t v = integer(key);
  if (v < 0) throw ConfigError("config: '" + key + "' must be >= 0");
  return static_cast<std::uint64_t>(v);
}

double ExperimentCfg::real(const std::string& key) const {
  return parse_number<double>(key, str(key));
}

bool ExperimentCfg::flag(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: '" + key + "' = '" + v + "' is not a boolean");
}

std::vector<std::uint64_t> ExperimentCfg::count_list(const std::string& key) const {
  std::vector<std::uint64_t> out;
  std::istringstream in(str(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) continue;
    const auto v = parse_number<std::int64_t>(key, t);
    if (v < 0) throw ConfigError("config: '" + key + "' entries must be >= 0");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  if (out.empty()) throw ConfigError("config: '" + key + "' is empty");
  return out;
}

std::string ExperimentCfg::resolved() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

}  // namespace gradfilter
