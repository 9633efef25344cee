#include "nial/kv_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "nial/errors.hpp"

namespace nial {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

long long parse_int(const std::string& text, const std::string& what) {
  long long out = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc() || res.ptr != end || text.empty()) {
    throw ParseError(what + " is not an integer: '" + text + "'");
  }
  return out;
}

double parse_double(const std::string& text, const std::string& what) {
  double out = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc() || res.ptr != end || text.empty()) {
    throw ParseError(what + " is not a number: '" + text + "'");
  }
  return out;
}

KvConfig KvConfig::parse_text(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line_no) + " has no '=': '" + t + "'");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) {
      throw ParseError("config line " + std::to_string(line_no) + " has an empty key");
    }
    cfg.set(key, trim(t.substr(eq + 1)));
  }
  return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_text(text.str());
}

void KvConfig::set(const std::string& key, std::string value) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first == key) {
      entries_[i].second = std::move(value);
      return;
    }
  }
  entries_.emplace_back(key, std::move(value));
  read_.push_back(false);
}

const std::string* KvConfig::find(const std::string& key) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first == key) {
      read_[i] = true;
      return &entries_[i].second;
    }
  }
  return nullptr;
}

bool KvConfig::has(const std::string& key) const { return find(key) != nullptr; }

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

long long KvConfig::get_int(const std::string& key, long long fallback) const {
  const std::string* v = find(key);
  return v ? parse_int(*v, "config key '" + key + "'") : fallback;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const std::string* v = find(key);
  return v ? parse_double(*v, "config key '" + key + "'") : fallback;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw ParseError("config key '" + key + "' is not a bool: '" + *v + "'");
}

std::vector<std::string> KvConfig::unread_keys() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!read_[i]) out.push_back(entries_[i].first);
  }
  return out;
}

}  // namespace nial
