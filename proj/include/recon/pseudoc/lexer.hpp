#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace recon::pseudoc {

enum class TokenKind {
  Identifier,
  Number,
  String,
  Char,
  Punct,
  Comment,
  Unknown,
  End,
};

struct Token {
  TokenKind kind = TokenKind::End;
  std::size_t begin = 0;  // byte offset into the source
  std::size_t end = 0;
  int line = 1;  // 1-based
  int column = 1;
  std::string_view text;
};

/// Splits decompiler pseudo code into tokens. Comments are kept as tokens so
/// callers can decide whether to skip them; whitespace is dropped. Never
/// throws: stray bytes become Unknown tokens. The last token is End.
std::vector<Token> lex(std::string_view source);

/// Line number (1-based) of a byte offset.
int line_of(std::string_view source, std::size_t offset);

}  // namespace recon::pseudoc
