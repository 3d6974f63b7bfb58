#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nowcast::io {

/// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv(std::string_view line);

/// Shortest round-trippable decimal text for a double.
std::string format_real(double value);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, stable across platforms; used for config hashes.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

/// Flat `key = value` document: one pair per line, `#` starts a comment,
/// optional `[section]` headers are prefixed onto keys as `section.key`.
/// Values may be bare or double-quoted.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  double get_real(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_reals(const std::string& key, const std::vector<double>& fallback) const;

  /// Canonical text (sorted keys); hashing this identifies a configuration.
  std::string canonical() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace nowcast::io
