#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gradfilter {

/// Flat key = value experiment configuration. Every known key has a default;
/// unknown keys are rejected. Values are kept as text and converted on use.
class ExperimentCfg {
 public:
  ExperimentCfg();

  /// Parses `key = value` lines; `#` starts a comment. Throws ConfigError.
  static ExperimentCfg from_file(const std::filesystem::path& path);
  static ExperimentCfg from_text(std::string_view text);

  void set(const std::string& key, const std::string& value);
  /// Applies a `key=value` override.
  void set_override(std::string_view assignment);

  [[nodiscard]] const std::string& str(const std::string& key) const;
  [[nodiscard]] std::int64_t integer(const std::string& key) const;
  [[nodiscard]] std::uint64_t count(const std::string& key) const;  ///< non-negative integer
  [[nodiscard]] double real(const std::string& key) const;
  [[nodiscard]] bool flag(const std::string& key) const;
  [[nodiscard]] std::vector<std::uint64_t> count_list(const std::string& key) const;

  /// Every effective key = value, sorted by key, one per line.
  [[nodiscard]] std::string resolved() const;

  [[nodiscard]] static bool known(const std::string& key);

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace gradfilter
