#pragma once

#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrmfg/core/error.hpp"

namespace lrmfg::io {

using nlohmann::json;

/// Invalid configuration. The message starts with "file:line:".
class ConfigError : public InvalidArgument {
public:
  using InvalidArgument::InvalidArgument;
};

/// Parsed JSON document plus the source line of every value, keyed by path
/// ("model.cost.theta", "model.m0[1]").
class JsonSource {
public:
  static JsonSource from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ":0: cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str(), path);
  }

  static JsonSource from_text(std::string text, std::string name = "<config>") {
    JsonSource s;
    s.name_ = std::move(name);
    try {
      s.root_ = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(s.name_ + ":" + std::to_string(line_at(text, e.byte)) + ": malformed JSON: " +
                        strip_prefix(e.what()));
    }
    s.index(text);
    return s;
  }

  const json& root() const noexcept { return root_; }
  const std::string& name() const noexcept { return name_; }

  /// Line of `path`, falling back to the closest enclosing value.
  std::size_t line_of(std::string path) const {
    while (true) {
      if (auto it = lines_.find(path); it != lines_.end()) return it->second;
      auto cut = path.find_last_of(".[");
      if (cut == std::string::npos) return lines_.empty() ? 0 : lines_.begin()->second;
      path.resize(cut);
    }
  }

private:
  static std::size_t line_at(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    std::size_t line = 1;
    for (std::size_t i = 0; i + 1 < byte; ++i)
      if (text[i] == '\n') ++line;
    return line;
  }

  static std::string strip_prefix(const std::string& what) {
    auto p = what.find("parse error");
    return p == std::string::npos ? what : what.substr(p);
  }

  // The text is already valid JSON, so the scanner only tracks structure.
  void index(const std::string& t) {
    std::size_t pos = 0, line = 1;
    auto skip_ws = [&] {
      while (pos < t.size() && std::isspace(static_cast<unsigned char>(t[pos]))) {
        if (t[pos] == '\n') ++line;
        ++pos;
      }
    };
    auto read_string = [&] {
      std::string out;
      ++pos;
      while (pos < t.size() && t[pos] != '"') {
        if (t[pos] == '\\') {
          out += t[pos++];
        }
        out += t[pos++];
      }
      ++pos;
      return out;
    };
    auto value = [&](auto&& self, const std::string& path) -> void {
      skip_ws();
      lines_.emplace(path, line);
      if (pos >= t.size()) return;
      char c = t[pos];
      if (c == '{') {
        ++pos;
        while (true) {
          skip_ws();
          if (t[pos] == '}') {
            ++pos;
            return;
          }
          if (t[pos] == ',') {
            ++pos;
            continue;
          }
          std::size_t key_line = line;
          std::string key = read_string();
          std::string child = path.empty() ? key : path + "." + key;
          lines_.emplace(child, key_line);
          skip_ws();
          ++pos;  // ':'
          self(self, child);
        }
      } else if (c == '[') {
        ++pos;
        for (std::size_t k = 0;;) {
          skip_ws();
          if (t[pos] == ']') {
            ++pos;
            return;
          }
          if (t[pos] == ',') {
            ++pos;
            continue;
          }
          self(self, path + "[" + std::to_string(k++) + "]");
        }
      } else if (c == '"') {
        read_string();
      } else {
        while (pos < t.size() && !std::isspace(static_cast<unsigned char>(t[pos])) && t[pos] != ',' &&
               t[pos] != '}' && t[pos] != ']')
          ++pos;
      }
    };
    value(value, "");
  }

  std::string name_;
  json root_;
  std::map<std::string, std::size_t> lines_;
};

/// Cursor into a JsonSource with schema helpers.
class Node {
public:
  Node(const JsonSource& src, const json& v, std::string path) : src_(&src), v_(&v), path_(std::move(path)) {}

  const json& raw() const noexcept { return *v_; }
  const JsonSource& source() const noexcept { return *src_; }
  const std::string& path() const noexcept { return path_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(src_->name() + ":" + std::to_string(src_->line_of(path_)) + ": " +
                      (path_.empty() ? std::string("<root>") : path_) + ": " + msg);
  }

  bool is_object() const { return v_->is_object(); }
  bool is_array() const { return v_->is_array(); }
  bool is_string() const { return v_->is_string(); }
  bool is_number() const { return v_->is_number(); }

  double number() const {
    if (!v_->is_number()) fail("expected a number");
    double d = v_->get<double>();
    if (!std::isfinite(d)) fail("expected a finite number");
    return d;
  }
  double positive() const {
    double d = number();
    if (!(d > 0.0)) fail("expected a positive number");
    return d;
  }
  std::size_t count(std::size_t min = 0) const {
    if (!v_->is_number_integer() || v_->get<long long>() < 0) fail("expected a nonnegative integer");
    auto n = v_->get<std::uint64_t>();
    if (n < min) fail("expected an integer >= " + std::to_string(min));
    return static_cast<std::size_t>(n);
  }
  std::uint64_t seed() const {
    if (!v_->is_number_integer() || v_->get<long long>() < 0) fail("expected a nonnegative integer seed");
    return v_->get<std::uint64_t>();
  }
  bool boolean() const {
    if (!v_->is_boolean()) fail("expected true or false");
    return v_->get<bool>();
  }
  std::string string() const {
    if (!v_->is_string()) fail("expected a string");
    return v_->get<std::string>();
  }
  template <class T>
  T choice(const std::vector<std::pair<std::string, T>>& options) const {
    auto s = string();
    for (const auto& [name, value] : options)
      if (name == s) return value;
    std::string names;
    for (const auto& o : options) names += (names.empty() ? "" : ", ") + o.first;
    fail("unknown value '" + s + "' (expected one of: " + names + ")");
  }

  std::size_t size() const {
    if (!v_->is_array()) fail("expected an array");
    return v_->size();
  }
  Node at(std::size_t k) const { return Node(*src_, (*v_)[k], path_ + "[" + std::to_string(k) + "]"); }

  std::vector<double> numbers() const {
    std::vector<double> out(size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = at(k).number();
    return out;
  }
  std::vector<std::size_t> counts(std::size_t min = 0) const {
    std::vector<std::size_t> out(size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = at(k).count(min);
    return out;
  }
  /// Rectangular array of arrays, flattened row-major.
  std::vector<double> square_matrix(std::size_t& n) const {
    n = size();
    if (n == 0) fail("expected a nonempty matrix");
    std::vector<double> out;
    out.reserve(n * n);
    for (std::size_t r = 0; r < n; ++r) {
      auto row = at(r).numbers();
      if (row.size() != n) at(r).fail("expected " + std::to_string(n) + " entries (square matrix)");
      out.insert(out.end(), row.begin(), row.end());
    }
    return out;
  }

private:
  const JsonSource* src_;
  const json* v_;
  std::string path_;
};

/// Object cursor that rejects keys nobody asked for.
class ObjectNode {
public:
  explicit ObjectNode(const Node& n) : node_(n) {
    if (!n.is_object()) n.fail("expected an object");
  }
  ObjectNode(const ObjectNode&) = delete;
  ObjectNode& operator=(const ObjectNode&) = delete;

  std::optional<Node> get(const std::string& key) {
    known_.insert(key);
    auto it = node_.raw().find(key);
    if (it == node_.raw().end()) return std::nullopt;
    return child(key, *it);
  }
  Node need(const std::string& key) {
    auto n = get(key);
    if (!n) node_.fail("missing required key '" + key + "'");
    return *n;
  }
  bool has(const std::string& key) const { return node_.raw().contains(key); }
  const Node& node() const noexcept { return node_; }

  /// Call after all get/need calls.
  void finish() const {
    for (auto it = node_.raw().begin(); it != node_.raw().end(); ++it)
      if (!known_.count(it.key())) child(it.key(), it.value()).fail("unknown key '" + it.key() + "'");
  }

private:
  Node child(const std::string& key, const json& v) const {
    return Node(node_.source(), v, node_.path().empty() ? key : node_.path() + "." + key);
  }
  Node node_;
  std::set<std::string> known_;
};

}  // namespace lrmfg::io
