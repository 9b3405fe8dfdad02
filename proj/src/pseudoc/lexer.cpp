#include "recon/pseudoc/lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace recon::pseudoc {

namespace {

bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

// Longest-match punctuators, longest first.
constexpr std::array<std::string_view, 48> kPuncts = {
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=",  "-=",  "*=",  "/=", "%=", "&=", "|=", "^=", "::", "{",  "}",  "(",  ")",  "[",
    "]",   ";",   ",",   ".",  "?",  ":",  "+",  "-",  "*",  "/",  "%",  "&",  "|",  "^",
    "!",   "~",   "<",   ">",  "=",  "@",
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      if (pos_ >= src_.size()) break;
      out.push_back(next());
    }
    Token end;
    end.kind = TokenKind::End;
    end.begin = end.end = src_.size();
    end.line = line_;
    end.column = col_;
    out.push_back(end);
    return out;
  }

 private:
  char peek(std::size_t off = 0) const {
    return pos_ + off < src_.size() ? src_[pos_ + off] : '\0';
  }

  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
  }

  Token next() {
    Token tok;
    tok.begin = pos_;
    tok.line = line_;
    tok.column = col_;
    char c = peek();
    if (c == '/' && peek(1) == '/') {
      tok.kind = TokenKind::Comment;
      while (pos_ < src_.size() && peek() != '\n') advance();
    } else if (c == '/' && peek(1) == '*') {
      tok.kind = TokenKind::Comment;
      advance(2);
      while (pos_ < src_.size() && !(peek() == '*' && peek(1) == '/')) advance();
      advance(2);
    } else if (c == '"' || ((c == 'L' || c == 'u' || c == 'U') && peek(1) == '"')) {
      tok.kind = TokenKind::String;
      if (c != '"') advance();
      quoted('"');
    } else if (c == '\'' || ((c == 'L' || c == 'u' || c == 'U') && peek(1) == '\'')) {
      tok.kind = TokenKind::Char;
      if (c != '\'') advance();
      quoted('\'');
    } else if (ident_start(c)) {
      tok.kind = TokenKind::Identifier;
      while (ident_char(peek())) advance();
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      tok.kind = TokenKind::Number;
      number();
    } else {
      tok.kind = TokenKind::Unknown;
      for (auto p : kPuncts) {
        if (src_.substr(pos_, p.size()) == p) {
          tok.kind = TokenKind::Punct;
          advance(p.size());
          break;
        }
      }
      if (tok.kind == TokenKind::Unknown) advance();
    }
    tok.end = pos_;
    tok.text = src_.substr(tok.begin, tok.end - tok.begin);
    return tok;
  }

  void quoted(char quote) {
    advance();  // opening quote
    while (pos_ < src_.size()) {
      char c = peek();
      if (c == '\\') {
        advance(2);
      } else if (c == quote) {
        advance();
        return;
      } else if (c == '\n') {
        return;  // unterminated; stop at end of line
      } else {
        advance();
      }
    }
  }

  void number() {
    if (peek() == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
      advance(2);
      while (std::isxdigit(static_cast<unsigned char>(peek()))) advance();
    } else {
      while (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.') advance();
      if ((peek() == 'e' || peek() == 'E') &&
          (std::isdigit(static_cast<unsigned char>(peek(1))) || peek(1) == '-' || peek(1) == '+')) {
        advance(2);
        while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
      }
    }
    // Suffixes: u, l, ll, uLL, i64, f ...
    while (ident_char(peek())) advance();
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace

std::vector<Token> lex(std::string_view source) { return Lexer(source).run(); }

int line_of(std::string_view source, std::size_t offset) {
  offset = std::min(offset, source.size());
  return 1 + static_cast<int>(std::count(source.begin(), source.begin() + offset, '\n'));
}

}  // namespace recon::pseudoc
