#include "run_config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tmspin/protocols.hpp"

namespace tmspin::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double to_double(const std::string& key, const std::string& s) {
  const std::string t = trim(s);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE)
    throw ConfigError("key '" + key + "': expected a number, got '" + s + "'");
  return v;
}

}  // namespace

std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(n) + ": empty key");
    if (c.has(key)) throw ConfigError("line " + std::to_string(n) + ": key '" + key + "' given twice");
    c.set(key, trim(line.substr(eq + 1)));
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
  used_.emplace(key, false);
}

const std::string* RunConfig::raw(const std::string& key) {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_[key] = true;
  return &it->second;
}

void RunConfig::record(const std::string& key, const std::string& value) {
  for (auto& e : effective_)
    if (e.first == key) {
      e.second = value;
      return;
    }
  effective_.emplace_back(key, value);
}

double RunConfig::number(const std::string& key, double fallback) {
  const std::string* r = raw(key);
  const double v = r ? to_double(key, *r) : fallback;
  record(key, format_double(v));
  return v;
}

long long RunConfig::integer(const std::string& key, long long fallback) {
  long long v = fallback;
  if (const std::string* r = raw(key)) {
    const std::string t = trim(*r);
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty())
      throw ConfigError("key '" + key + "': expected an integer, got '" + *r + "'");
  }
  record(key, std::to_string(v));
  return v;
}

bool RunConfig::flag(const std::string& key, bool fallback) {
  bool v = fallback;
  if (const std::string* r = raw(key)) {
    std::string t = trim(*r);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (t == "1" || t == "true" || t == "yes") v = true;
    else if (t == "0" || t == "false" || t == "no") v = false;
    else throw ConfigError("key '" + key + "': expected true/false, got '" + *r + "'");
  }
  record(key, v ? "true" : "false");
  return v;
}

std::string RunConfig::text(const std::string& key, const std::string& fallback) {
  const std::string* r = raw(key);
  std::string v = r ? trim(*r) : fallback;
  record(key, v);
  return v;
}

std::vector<double> RunConfig::numbers(const std::string& key, const std::vector<double>& fallback) {
  std::vector<double> v = fallback;
  if (const std::string* r = raw(key)) {
    v.clear();
    std::stringstream ss(*r);
    std::string item;
    while (std::getline(ss, item, ',')) v.push_back(to_double(key, item));
    if (v.empty()) throw ConfigError("key '" + key + "': empty list");
  }
  record(key, format_list(v));
  return v;
}

void RunConfig::reject_unknown() const {
  for (const auto& [k, used] : used_)
    if (!used) throw ConfigError("unknown configuration key '" + k + "'");
}

}  // namespace tmspin::cli
