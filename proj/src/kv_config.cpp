#include "dib/kv_config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

namespace dib {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

}  // namespace

KvConfig KvConfig::parse(std::istream& is) {
  KvConfig cfg;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    std::string body;
    bool quoted = false;
    for (char c : line) {
      if (c == '"') quoted = !quoted;
      if (c == '#' && !quoted) break;
      body += c;
    }
    body = trim(body);
    if (body.empty() || body.front() == '[') continue;
    auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(n) + ": expected key = value");
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(n) + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    cfg.values_[key] = value;
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  return parse(f);
}

std::string KvConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

std::string KvConfig::get(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

double KvConfig::get_double(const std::string& key) const {
  std::string v = get(key);
  char* end = nullptr;
  double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError("config key '" + key + "' is not a number: " + v);
  return d;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::size_t KvConfig::get_size(const std::string& key) const {
  get(key);
  return static_cast<std::size_t>(get_u64(key, 0));
}

std::size_t KvConfig::get_size(const std::string& key, std::size_t fallback) const {
  return has(key) ? get_size(key) : fallback;
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  std::string v = get(key);
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError("config key '" + key + "' is not a non-negative integer: " + v);
  return out;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  std::string v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "' is not a boolean: " + v);
}

void KvConfig::write(std::ostream& os) const {
  for (const auto& [k, v] : values_) {
    bool bare = is_number(v) || v == "true" || v == "false";
    os << k << " = " << (bare ? v : "\"" + v + "\"") << '\n';
  }
}

}  // namespace dib
