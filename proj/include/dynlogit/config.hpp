#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dynlogit {

// Flat "key = value" text; '#' starts a comment. Later keys override earlier ones.
class Config {
 public:
  static Config parse(std::istream& in);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback = {}) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key, double fallback) const;
  // comma-separated list
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback = {}) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace dynlogit
