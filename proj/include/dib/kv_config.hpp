#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace dib {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` file. `#` starts a comment; values may be double-quoted.
class KvConfig {
 public:
  static KvConfig parse(std::istream& is);
  static KvConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  /// Strings are quoted, everything else written bare.
  void write(std::ostream& os) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace dib
