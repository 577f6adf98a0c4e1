#include "noisecnn/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace noisecnn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

IniFile IniFile::parse(const std::string& text, const std::string& origin) {
  IniFile ini;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": bad section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (ini.has(section, key)) {
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    ini.set(section, key, trim(line.substr(eq + 1)));
  }
  ini.touched_.clear();
  return ini;
}

IniFile IniFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::optional<std::string> IniFile::get(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  if (it == sections_.end()) return std::nullopt;
  for (const auto& [k, v] : it->second) {
    if (k == key) {
      touched_.insert(section + "." + key);
      return v;
    }
  }
  return std::nullopt;
}

bool IniFile::has(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  if (it == sections_.end()) return false;
  for (const auto& kv : it->second) {
    if (kv.first == key) return true;
  }
  return false;
}

void IniFile::set(const std::string& section, const std::string& key, std::string value) {
  auto [it, inserted] = sections_.try_emplace(section);
  if (inserted) section_order_.push_back(section);
  for (auto& kv : it->second) {
    if (kv.first == key) {
      kv.second = std::move(value);
      return;
    }
  }
  it->second.emplace_back(key, std::move(value));
}

std::string IniFile::str() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& s : section_order_) {
    if (!first) out << '\n';
    first = false;
    if (!s.empty()) out << '[' << s << "]\n";
    for (const auto& [k, v] : sections_.at(s)) out << k << " = " << v << '\n';
  }
  return out.str();
}

std::vector<std::string> IniFile::unused() const {
  std::vector<std::string> out;
  for (const auto& s : section_order_) {
    for (const auto& kv : sections_.at(s)) {
      const std::string name = s + "." + kv.first;
      if (!touched_.count(name)) out.push_back(name);
    }
  }
  return out;
}

}  // namespace noisecnn
