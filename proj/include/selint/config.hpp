// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Minimal line-oriented configuration grammar shared by the profile and all
// plugin config files:
//
//   [section] or [section.sub.name]
//   key = scalar
//   key = "quoted string"
//   key = [ item item "quoted item" ]     (lists may span lines)
//   # comment
//
// Keys are unique per section; plugins reject keys they do not own.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "selint/errors.hpp"

namespace selint {

struct ConfigValue {
  enum class Kind { scalar, list };
  Kind kind = Kind::scalar;
  std::string scalar;
  std::vector<std::string> items;
  std::string file;
  std::size_t line = 0;

  bool operator==(const ConfigValue&) const = default;
};

class ConfigFile {
 public:
  using Section = std::map<std::string, ConfigValue>;

  bool has_section(const std::string& name) const {
    return sections_.count(name) != 0;
  }

  const Section* find_section(const std::string& name) const {
    auto it = sections_.find(name);
    return it == sections_.end() ? nullptr : &it->second;
  }

  std::vector<std::string> section_names() const {
    std::vector<std::string> names;
    names.reserve(sections_.size());
    for (const auto& [name, _] : sections_) names.push_back(name);
    return names;
  }

  // Sections named `prefix.NAME`, returned as the trailing NAME parts,
  // sorted. Deeper nesting is not matched.
  std::vector<std::string> subsections(const std::string& prefix) const {
    std::vector<std::string> names;
    std::string p = prefix + ".";
    for (const auto& [name, _] : sections_) {
      if (name.size() > p.size() && name.compare(0, p.size(), p) == 0 &&
          name.find('.', p.size()) == std::string::npos) {
        names.push_back(name.substr(p.size()));
      }
    }
    return names;
  }

  const ConfigValue* find(const std::string& section,
                          const std::string& key) const {
    const Section* s = find_section(section);
    if (!s) return nullptr;
    auto it = s->find(key);
    return it == s->end() ? nullptr : &it->second;
  }

  std::optional<std::string> scalar(const std::string& section,
                                    const std::string& key) const {
    const ConfigValue* v = find(section, key);
    if (!v) return std::nullopt;
    if (v->kind != ConfigValue::Kind::scalar) {
      throw ConfigError("expected a scalar, found a list", v->file,
                        section + "." + key);
    }
    return v->scalar;
  }

  std::string scalar_or(const std::string& section, const std::string& key,
                        std::string fallback) const {
    auto v = scalar(section, key);
    return v ? *v : std::move(fallback);
  }

  double number(const std::string& section, const std::string& key,
                double fallback) const {
    const ConfigValue* v = find(section, key);
    if (!v) return fallback;
    if (v->kind != ConfigValue::Kind::scalar) {
      throw ConfigError("expected a number, found a list", v->file,
                        section + "." + key);
    }
    try {
      std::size_t consumed = 0;
      double parsed = std::stod(v->scalar, &consumed);
      if (consumed != v->scalar.size()) throw std::invalid_argument("");
      return parsed;
    } catch (const std::exception&) {
      throw ConfigError("'" + v->scalar + "' is not a number", v->file,
                        section + "." + key);
    }
  }

  bool flag(const std::string& section, const std::string& key,
            bool fallback) const {
    const ConfigValue* v = find(section, key);
    if (!v) return fallback;
    if (v->kind == ConfigValue::Kind::scalar) {
      if (v->scalar == "true") return true;
      if (v->scalar == "false") return false;
    }
    throw ConfigError("expected true or false", v->file, section + "." + key);
  }

  std::vector<std::string> list(const std::string& section,
                                const std::string& key) const {
    const ConfigValue* v = find(section, key);
    if (!v) return {};
    if (v->kind != ConfigValue::Kind::list) {
      throw ConfigError("expected a list", v->file, section + "." + key);
    }
    return v->items;
  }

  // Programmatic override used by CLI flags; replaces any existing value.
  void set_scalar(const std::string& section, const std::string& key,
                  std::string value) {
    ConfigValue v;
    v.scalar = std::move(value);
    v.file = "<override>";
    sections_[section][key] = std::move(v);
  }

  // Plugins own their section schema: anything not in `allowed` is an error.
  void reject_unknown_keys(const std::string& section,
                           const std::set<std::string>& allowed) const {
    const Section* s = find_section(section);
    if (!s) return;
    for (const auto& [key, value] : *s) {
      if (!allowed.count(key)) {
        throw ConfigError("unknown key", value.file, section + "." + key);
      }
    }
  }

  // Parses `text` and merges it in. A key already present in the same
  // section from an earlier file is an error, naming both files.
  void parse(std::string_view text, const std::string& path) {
    std::size_t line_no = 0;
    std::size_t i = 0;
    std::string current;

    auto next_line = [&](std::string& out) {
      if (i >= text.size()) return false;
      std::size_t end = text.find('\n', i);
      if (end == std::string_view::npos) end = text.size();
      out.assign(text.substr(i, end - i));
      i = end + 1;
      ++line_no;
      return true;
    };

    std::string raw;
    while (next_line(raw)) {
      std::string_view line = trimmed(raw);
      if (line.empty() || line.front() == '#') continue;

      if (line.front() == '[') {
        if (line.back() != ']' || line.size() < 3) {
          throw ConfigError("malformed section header at line " +
                                std::to_string(line_no),
                            path);
        }
        current = std::string(trimmed(line.substr(1, line.size() - 2)));
        if (current.empty()) {
          throw ConfigError("empty section name at line " +
                                std::to_string(line_no),
                            path);
        }
        sections_[current];
        continue;
      }

      std::size_t eq = line.find('=');
      if (current.empty() || eq == std::string_view::npos) {
        throw ConfigError("expected 'key = value' at line " +
                              std::to_string(line_no),
                          path);
      }
      std::string key{trimmed(line.substr(0, eq))};
      if (key.empty()) {
        throw ConfigError("missing key at line " + std::to_string(line_no),
                          path);
      }

      ConfigValue value;
      value.file = path;
      value.line = line_no;
      std::string_view rest = trimmed(line.substr(eq + 1));
      if (!rest.empty() && rest.front() == '[') {
        value.kind = ConfigValue::Kind::list;
        std::string body{strip_comment(rest.substr(1))};
        bool closed = false;
        while (true) {
          std::size_t close = find_unquoted(body, ']');
          if (close != std::string::npos) {
            body = body.substr(0, close);
            closed = true;
            break;
          }
          std::string more;
          if (!next_line(more)) break;
          std::string_view t = strip_comment(trimmed(more));
          body += ' ';
          body += t;
        }
        if (!closed) {
          throw ConfigError("unterminated list starting at line " +
                                std::to_string(value.line),
                            path, current + "." + key);
        }
        value.items = split_items(body, path, current + "." + key);
      } else {
        value.kind = ConfigValue::Kind::scalar;
        value.scalar = parse_scalar(rest, path, current + "." + key);
      }

      auto [it, inserted] = sections_[current].emplace(key, std::move(value));
      if (!inserted) {
        throw ConfigError("duplicate key (already set in " + it->second.file +
                              ")",
                          path, current + "." + key);
      }
    }
  }

  bool operator==(const ConfigFile&) const = default;

 private:
  static std::string_view trimmed(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                          s.front() == '\r')) {
      s.remove_prefix(1);
    }
    while (!s.empty() &&
           (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
      s.remove_suffix(1);
    }
    return s;
  }

  static std::size_t find_unquoted(std::string_view s, char c) {
    bool quoted = false;
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s[k] == '"' && (k == 0 || s[k - 1] != '\\')) quoted = !quoted;
      else if (!quoted && s[k] == c) return k;
    }
    return std::string_view::npos;
  }

  // Drops an unquoted `#` and everything after it.
  static std::string_view strip_comment(std::string_view s) {
    std::size_t hash = find_unquoted(s, '#');
    return hash == std::string_view::npos ? s : trimmed(s.substr(0, hash));
  }

  static std::string unescape(std::string_view s, const std::string& path,
                              const std::string& key) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s[k] == '\\') {
        if (k + 1 >= s.size() || (s[k + 1] != '"' && s[k + 1] != '\\')) {
          throw ConfigError("bad escape in string", path, key);
        }
        out += s[++k];
        continue;
      }
      out += s[k];
    }
    return out;
  }

  static std::string parse_scalar(std::string_view rest,
                                  const std::string& path,
                                  const std::string& key) {
    if (rest.empty()) {
      throw ConfigError("missing value", path, key);
    }
    if (rest.front() == '"') {
      std::size_t k = 1;
      while (k < rest.size() && !(rest[k] == '"' && rest[k - 1] != '\\')) ++k;
      if (k >= rest.size()) {
        throw ConfigError("unterminated string", path, key);
      }
      std::string_view tail = trimmed(rest.substr(k + 1));
      if (!tail.empty() && tail.front() != '#') {
        throw ConfigError("trailing characters after string", path, key);
      }
      return unescape(rest.substr(1, k - 1), path, key);
    }
    std::size_t hash = rest.find('#');
    std::string_view bare =
        trimmed(hash == std::string_view::npos ? rest : rest.substr(0, hash));
    if (bare.empty()) {
      throw ConfigError("missing value", path, key);
    }
    if (bare.find(' ') != std::string_view::npos ||
        bare.find('\t') != std::string_view::npos) {
      throw ConfigError("unquoted value contains spaces", path, key);
    }
    return std::string(bare);
  }

  static std::vector<std::string> split_items(std::string_view body,
                                              const std::string& path,
                                              const std::string& key) {
    std::vector<std::string> items;
    std::size_t k = 0;
    while (k < body.size()) {
      char c = body[k];
      if (c == ' ' || c == '\t' || c == '\r') {
        ++k;
        continue;
      }
      if (c == '#') break;
      if (c == '"') {
        std::size_t end = k + 1;
        while (end < body.size() &&
               !(body[end] == '"' && body[end - 1] != '\\')) {
          ++end;
        }
        if (end >= body.size()) {
          throw ConfigError("unterminated string in list", path, key);
        }
        items.push_back(unescape(body.substr(k + 1, end - k - 1), path, key));
        k = end + 1;
        continue;
      }
      std::size_t end = k;
      while (end < body.size() && body[end] != ' ' && body[end] != '\t' &&
             body[end] != '\r' && body[end] != '"' && body[end] != '#') {
        ++end;
      }
      items.emplace_back(body.substr(k, end - k));
      k = end;
    }
    return items;
  }

  std::map<std::string, Section> sections_;
};

}  // namespace selint
