// Copyright (c) selint contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Statement-level scanning shared by the policy parser and the macro engine:
// splits raw file contents into located statements and tokenizes them.

#pragma once

#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "selint/errors.hpp"
#include "selint/model.hpp"

namespace selint {

// One source statement: either a `;`-terminated rule/declaration or a macro
// call `name(args)` whose trailing `;` is optional. `text` is the exact slice
// of the source; `location` is the line the statement starts on.
struct RawStatement {
  std::string text;
  SourceLocation location;

  bool operator==(const RawStatement&) const = default;
};

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' ||
         c == '\v';
}

inline bool is_identifier_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
}

// Removes `#` comments (to end of line). Applied before collapsing a
// statement for display.
inline std::string strip_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
      continue;
    }
    out += text[i++];
  }
  return out;
}

// Collapses runs of whitespace to single spaces and trims the ends, so a
// multi-line statement renders on one report line.
inline std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += c;
  }
  return out;
}

struct Token {
  std::string text;
  std::size_t line = 0;

  bool operator==(const Token&) const = default;
};

// Tokenizes one statement. Tokens are identifiers, `$k` placeholders, or the
// single characters { } : ; ( ) , ~ * -. Comments (`#` to end of line) are
// skipped. Anything else is an error.
inline std::vector<Token> tokenize(std::string_view text, const std::string& file,
                                   std::size_t start_line) {
  std::vector<Token> tokens;
  std::size_t line = start_line;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
      continue;
    }
    if (c == '{' || c == '}' || c == ':' || c == ';' || c == '(' || c == ')' ||
        c == ',' || c == '~' || c == '*') {
      tokens.push_back(Token{std::string(1, c), line});
      ++i;
      continue;
    }
    if (c == '$') {
      std::size_t j = i + 1;
      while (j < text.size() && is_identifier_char(text[j])) ++j;
      if (j == i + 1) throw ParseError("stray '$'", file, line);
      tokens.push_back(Token{std::string(text.substr(i, j - i)), line});
      i = j;
      continue;
    }
    if (is_identifier_char(c)) {
      std::size_t j = i;
      while (j < text.size() && is_identifier_char(text[j])) ++j;
      tokens.push_back(Token{std::string(text.substr(i, j - i)), line});
      i = j;
      continue;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", file,
                     line);
  }
  return tokens;
}

// Splits file contents into statements. A statement is normally terminated by
// `;`. A statement whose head is `identifier(` is a macro call: it ends at
// the balancing `)` (plus an optional trailing `;`). Inside a macro call,
// backquote quoting (` ... ') nests and hides parentheses and semicolons, so
// block arguments pass through intact. `#` comments are stripped outside
// quotes.
inline std::vector<RawStatement> split_statements(std::string_view content,
                                                  const std::string& file,
                                                  std::size_t first_line = 1) {
  std::vector<RawStatement> statements;
  std::size_t line = first_line;
  std::size_t i = 0;
  const std::size_t n = content.size();

  auto advance = [&](std::size_t& pos) {
    if (content[pos] == '\n') ++line;
    ++pos;
  };

  while (i < n) {
    if (is_space(content[i])) {
      advance(i);
      continue;
    }
    if (content[i] == '#') {
      while (i < n && content[i] != '\n') ++i;
      continue;
    }

    const std::size_t start = i;
    const std::size_t start_line_no = line;

    // Peek: identifier head directly followed by '(' means macro-call form.
    std::size_t head_end = i;
    while (head_end < n && is_identifier_char(content[head_end])) ++head_end;
    bool macro_call = head_end > i && head_end < n && content[head_end] == '(';

    if (macro_call) {
      std::size_t pos = head_end;
      int paren_depth = 0;
      int quote_depth = 0;
      for (; pos < n; advance(pos)) {
        char c = content[pos];
        if (c == '`') {
          ++quote_depth;
        } else if (c == '\'' && quote_depth > 0) {
          --quote_depth;
        } else if (quote_depth == 0) {
          if (c == '#') {
            while (pos + 1 < n && content[pos + 1] != '\n') ++pos;
          } else if (c == '(') {
            ++paren_depth;
          } else if (c == ')') {
            if (--paren_depth == 0) {
              advance(pos);
              break;
            }
          }
        }
      }
      if (paren_depth != 0 || quote_depth != 0) {
        throw ParseError("unterminated macro call", file, start_line_no);
      }
      // A trailing ';' belongs to the call.
      std::size_t after = pos;
      while (after < n && is_space(content[after]) && content[after] != '\n') {
        ++after;
      }
      if (after < n && content[after] == ';') {
        while (pos <= after) advance(pos);
      }
      statements.push_back(RawStatement{
          std::string(content.substr(start, pos - start)),
          SourceLocation{file, start_line_no}});
      i = pos;
      continue;
    }

    std::size_t pos = i;
    bool terminated = false;
    for (; pos < n; advance(pos)) {
      char c = content[pos];
      if (c == '#') {
        while (pos + 1 < n && content[pos + 1] != '\n') ++pos;
        continue;
      }
      if (c == ';') {
        advance(pos);
        terminated = true;
        break;
      }
    }
    if (!terminated) {
      throw ParseError("statement not terminated by ';'", file, start_line_no);
    }
    statements.push_back(RawStatement{
        std::string(content.substr(start, pos - start)),
        SourceLocation{file, start_line_no}});
    i = pos;
  }
  return statements;
}

}  // namespace selint
