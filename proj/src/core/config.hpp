#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pmspde::config {

// Known keys in "section.name" form, their defaults and a one-line description.
struct KeyInfo {
  const char* key;
  const char* default_value;  // TOML literal, "" when unset
  const char* description;
};
const std::vector<KeyInfo>& known_keys();

// Flat TOML subset: [section] headers, key = value with strings, numbers,
// booleans and one-line arrays of numbers, # comments.
class Config {
 public:
  Config();  // all defaults
  static Config parse(const std::string& text, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  // `value` is a TOML literal; bare words are taken as strings.
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;  // set to a non-empty value
  const std::string& literal(const std::string& key) const { return raw(key); }

  std::string str(const std::string& key) const;
  double num(const std::string& key) const;
  long long integer(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;
  std::optional<double> optional_num(const std::string& key) const;
  // Relative paths resolve against the directory of the config file.
  std::filesystem::path path(const std::string& key) const;

  std::string to_toml() const;
  void save(const std::filesystem::path& path) const;

 private:
  const std::string& raw(const std::string& key) const;

  std::map<std::string, std::string> values_;  // key -> TOML literal
  std::filesystem::path base_dir_;
};

}  // namespace pmspde::config
