#ifndef TMSPIN_RUN_CONFIG_HPP
#define TMSPIN_RUN_CONFIG_HPP

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tmspin::cli {

/// Bad configuration; maps to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` file. Every lookup records the effective value so the
/// set of keys read by a command can be written back as a re-runnable manifest.
class RunConfig {
 public:
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  double number(const std::string& key, double fallback);
  long long integer(const std::string& key, long long fallback);
  bool flag(const std::string& key, bool fallback);
  std::string text(const std::string& key, const std::string& fallback);
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback);

  /// Throws ConfigError naming the first key no lookup asked for.
  void reject_unknown() const;

  const std::vector<std::pair<std::string, std::string>>& effective() const { return effective_; }

 private:
  const std::string* raw(const std::string& key);
  void record(const std::string& key, const std::string& value);

  std::map<std::string, std::string> values_;
  std::map<std::string, bool> used_;
  std::vector<std::pair<std::string, std::string>> effective_;
};

std::string format_list(const std::vector<double>& v);

}  // namespace tmspin::cli

#endif
