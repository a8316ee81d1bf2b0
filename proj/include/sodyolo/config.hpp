#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sodyolo {

// Flat key=value settings with dotted keys (e.g. train.momentum=0.937).
// Blank lines and lines starting with '#' are ignored.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  // Later settings win.
  void merge(const KeyValueConfig& other);

  std::optional<std::string> raw(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<long long> get_int_list(const std::string& key,
                                      const std::vector<long long>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }
  std::string serialize() const;

 private:
  std::map<std::string, std::string> values_;
};

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace sodyolo
