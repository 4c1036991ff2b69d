#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace intent::cfg {

// Plain-text "key = value" configuration. '#' starts a comment, blank lines
// are skipped, later keys override earlier ones.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in);
  static KeyValues parse_file(const std::string& path);
  static KeyValues parse_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& all() const { return values_; }

  std::string get_str(const std::string& key) const;  // ConfigError if absent
  std::string get_str(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<long> get_int_list(const std::string& key) const;      // comma-separated
  std::vector<double> get_double_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

 private:
  std::map<std::string, std::string> values_;
};

// Monospace table with left-aligned first column and right-aligned rest.
std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

std::string format_double(double v, int decimals = 4);

}  // namespace intent::cfg
