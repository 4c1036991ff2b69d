#include "intent/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "intent/errors.hpp"

namespace intent::cfg {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

KeyValues KeyValues::parse(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(trimmed.substr(0, eq));
    const std::string value = trim(trimmed.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    }
    kv.values_[key] = value;
  }
  return kv;
}

KeyValues KeyValues::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  return parse(in);
}

KeyValues KeyValues::parse_string(const std::string& text) {
  std::istringstream is(text);
  return parse(is);
}

std::string KeyValues::get_str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key: " + key);
  return it->second;
}

std::string KeyValues::get_str(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

namespace {

long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long out = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " is not an integer: " + v);
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(out)) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " is not a number: " + v);
  }
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> parts;
  std::istringstream is(v);
  std::string token;
  while (std::getline(is, token, ',')) {
    const auto b = token.find_first_not_of(" \t");
    const auto e = token.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    parts.push_back(token.substr(b, e - b + 1));
  }
  return parts;
}

}  // namespace

long KeyValues::get_int(const std::string& key) const { return to_int(key, get_str(key)); }

long KeyValues::get_int(const std::string& key, long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double KeyValues::get_double(const std::string& key) const {
  return to_double(key, get_str(key));
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  try {
    return std::stoull(get_str(key));
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " is not an unsigned integer");
  }
}

std::vector<long> KeyValues::get_int_list(const std::string& key) const {
  std::vector<long> out;
  for (const std::string& part : split_commas(get_str(key))) out.push_back(to_int(key, part));
  if (out.empty()) throw ConfigError("config key " + key + " is an empty list");
  return out;
}

std::vector<double> KeyValues::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& part : split_commas(get_str(key))) out.push_back(to_double(key, part));
  if (out.empty()) throw ConfigError("config key " + key + " is an empty list");
  return out;
}

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) {
      width[c] = std::max(width[c], row[c].size());
    }
  }

  std::ostringstream os;
  const auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string& cell = c < row.size() ? row[c] : "";
      if (c == 0) {
        os << cell << std::string(width[c] - cell.size(), ' ');
      } else {
        os << "  " << std::string(width[c] - cell.size(), ' ') << cell;
      }
    }
    os << '\n';
  };
  emit(header);
  std::size_t total = 0;
  for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c > 0 ? 2 : 0);
  os << std::string(total, '-') << '\n';
  for (const auto& row : rows) emit(row);
  return os.str();
}

std::string format_double(double v, int decimals) {
  if (std::isnan(v)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace intent::cfg
