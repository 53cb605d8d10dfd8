#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace axygate {

struct ConfigError : std::runtime_error {
  int line;
  ConfigError(int lineNo, const std::string& msg)
      : std::runtime_error("config line " + std::to_string(lineNo) + ": " + msg),
        line(lineNo) {}
};

// Minimal sectioned key = value format: '#' comments, [section] headers,
// every key carries its unit suffix (hz, s, m, k, rad) by convention.
class ConfigDoc {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static ConfigDoc parse_string(const std::string& text) {
    ConfigDoc doc;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int lineNo = 0;
    while (std::getline(in, raw)) {
      ++lineNo;
      std::string line = strip(raw);
      if (line.empty() || line[0] == '#') continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError(lineNo, "malformed section header '" + line + "'");
        section = strip(line.substr(1, line.size() - 2));
        if (section.empty()) throw ConfigError(lineNo, "empty section name");
        doc.sectionOrder_.push_back(section);
        doc.sections_[section];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(lineNo, "expected 'key = value', got '" + line + "'");
      const std::string key = strip(line.substr(0, eq));
      const std::string value = strip(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(lineNo, "empty key");
      if (section.empty()) throw ConfigError(lineNo, "key '" + key + "' outside any section");
      auto& sec = doc.sections_[section];
      if (sec.count(key)) throw ConfigError(lineNo, "duplicate key '" + key + "'");
      sec[key] = Entry{value, lineNo};
      doc.keyOrder_[section].push_back(key);
    }
    return doc;
  }

  static ConfigDoc parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
  }

  bool has_section(const std::string& section) const { return sections_.count(section) > 0; }

  std::string get_string(const std::string& section, const std::string& key) const {
    const auto& e = entry(section, key);
    return e.value;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& dflt) const {
    return has(section, key) ? get_string(section, key) : dflt;
  }

  double get_double(const std::string& section, const std::string& key) const {
    const auto& e = entry(section, key);
    try {
      std::size_t pos = 0;
      const double v = std::stod(e.value, &pos);
      if (pos != e.value.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(e.line, "expected a number for '" + key + "', got '" + e.value + "'");
    }
  }

  double get_double(const std::string& section, const std::string& key, double dflt) const {
    return has(section, key) ? get_double(section, key) : dflt;
  }

  long get_int(const std::string& section, const std::string& key) const {
    const auto& e = entry(section, key);
    try {
      std::size_t pos = 0;
      const long v = std::stol(e.value, &pos);
      if (pos != e.value.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(e.line, "expected an integer for '" + key + "', got '" + e.value + "'");
    }
  }

  long get_int(const std::string& section, const std::string& key, long dflt) const {
    return has(section, key) ? get_int(section, key) : dflt;
  }

  bool get_bool(const std::string& section, const std::string& key, bool dflt) const {
    if (!has(section, key)) return dflt;
    const auto& e = entry(section, key);
    if (e.value == "true" || e.value == "1" || e.value == "on") return true;
    if (e.value == "false" || e.value == "0" || e.value == "off") return false;
    throw ConfigError(e.line, "expected a boolean for '" + key + "', got '" + e.value + "'");
  }

  std::vector<double> get_list(const std::string& section, const std::string& key) const {
    const auto& e = entry(section, key);
    std::vector<double> out;
    std::istringstream ss(e.value);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = strip(tok);
      if (tok.empty()) continue;
      try {
        out.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError(e.line, "bad list element '" + tok + "' for '" + key + "'");
      }
    }
    if (out.empty()) throw ConfigError(e.line, "empty list for '" + key + "'");
    return out;
  }

  std::vector<double> get_list(const std::string& section, const std::string& key,
                               std::vector<double> dflt) const {
    return has(section, key) ? get_list(section, key) : dflt;
  }

  // Canonical text form: sections and keys in first-seen order.
  std::string serialize() const {
    std::ostringstream out;
    for (const auto& sec : sectionOrder_) {
      out << "[" << sec << "]\n";
      const auto it = keyOrder_.find(sec);
      if (it != keyOrder_.end())
        for (const auto& key : it->second)
          out << key << " = " << sections_.at(sec).at(key).value << "\n";
      out << "\n";
    }
    return out.str();
  }

  bool same_content(const ConfigDoc& other) const {
    if (sections_.size() != other.sections_.size()) return false;
    for (const auto& [sec, kv] : sections_) {
      const auto o = other.sections_.find(sec);
      if (o == other.sections_.end() || o->second.size() != kv.size()) return false;
      for (const auto& [k, e] : kv) {
        const auto oe = o->second.find(k);
        if (oe == o->second.end() || oe->second.value != e.value) return false;
      }
    }
    return true;
  }

 private:
  static std::string strip(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  const Entry& entry(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end())
      throw ConfigError(0, "missing section [" + section + "]");
    const auto k = s->second.find(key);
    if (k == s->second.end())
      throw ConfigError(0, "missing key '" + key + "' in section [" + section + "]");
    return k->second;
  }

  std::map<std::string, std::map<std::string, Entry>> sections_;
  std::vector<std::string> sectionOrder_;
  std::map<std::string, std::vector<std::string>> keyOrder_;
};

} // namespace axygate
