#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace noisecnn {

/// Flat "key = value" file with [section] headers. '#' and ';' start comments.
class IniFile {
 public:
  static IniFile parse(const std::string& text, const std::string& origin = "<string>");
  static IniFile load(const std::filesystem::path& path);

  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  bool has(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, std::string value);
  std::string str() const;

  /// Entries never read through get(), as "section.key".
  std::vector<std::string> unused() const;

 private:
  std::vector<std::string> section_order_;
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections_;
  mutable std::set<std::string> touched_;
};

}  // namespace noisecnn
