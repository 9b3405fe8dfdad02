#include <algorithm>
#include <optional>
#include <set>
#include <stdexcept>

#include "recon/error.hpp"
#include "recon/pseudoc/function.hpp"
#include "recon/pseudoc/identifier.hpp"
#include "recon/pseudoc/lexer.hpp"
#include "recon/pseudoc/types.hpp"

namespace recon::pseudoc {

int count_lines(std::string_view text) {
  if (text.empty()) return 1;
  int n = static_cast<int>(std::count(text.begin(), text.end(), '\n'));
  if (text.back() != '\n') ++n;
  return std::max(n, 1);
}

const VarDecl* PseudoFunction::find_var(std::string_view var) const {
  for (const auto& p : params) {
    if (p.name == var) return &p;
  }
  for (const auto& l : locals) {
    if (l.name == var) return &l;
  }
  return nullptr;
}

std::vector<std::string> PseudoFunction::lines() const {
  std::vector<std::string> out;
  std::string_view src = record.pseudocode;
  std::size_t start = 0;
  while (start <= src.size()) {
    auto nl = src.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < src.size()) out.emplace_back(src.substr(start));
      break;
    }
    out.emplace_back(src.substr(start, nl - start));
    start = nl + 1;
  }
  if (out.empty()) out.emplace_back();
  return out;
}

namespace {

// Recoverable syntax error inside one statement; the statement becomes Opaque.
struct SyntaxError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::set<std::string_view, std::less<>> kStatementKeywords = {
    "if", "else", "for", "while", "do", "switch", "case", "default",
    "return", "break", "continue", "goto",
};

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {
    for (const auto& t : lex(src)) {
      if (t.kind != TokenKind::Comment) toks_.push_back(t);
    }
    line_starts_.push_back(0);
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i] == '\n') line_starts_.push_back(i + 1);
    }
  }

  PseudoFunction parse(const FunctionRecord& record) {
    PseudoFunction fn;
    fn.record = record;
    fn.line_count = count_lines(src_);
    for (const auto& t : lex(src_)) {
      if (t.kind == TokenKind::String) fn.string_literals.push_back({t.line, std::string(t.text)});
    }

    fn.ast.kind = AstKind::FunctionDef;
    fn.ast.span = span_of(0, src_.size());
    fn.ast.text = std::string(src_);

    // The header runs up to the first '{' outside parentheses.
    std::size_t brace = npos_;
    int depth = 0;
    for (std::size_t i = 0; i < toks_.size() && toks_[i].kind != TokenKind::End; ++i) {
      const auto& t = toks_[i];
      if (is_punct(t, "(")) ++depth;
      if (is_punct(t, ")")) --depth;
      if (is_punct(t, "{") && depth <= 0) {
        brace = i;
        break;
      }
    }
    if (brace == npos_) {
      AstNode opaque = make(AstKind::Opaque, 0, src_.size());
      fn.ast.children.push_back(std::move(opaque));
      return fn;
    }

    AstNode header = parse_header(brace, fn);
    header.span = span_of(0, toks_[brace].begin);
    header.text = std::string(src_.substr(0, toks_[brace].begin));
    fn.ast.type_text = fn.return_type;
    fn.body_open_line = toks_[brace].line;
    fn.ast.children.push_back(std::move(header));

    pos_ = brace;
    AstNode body = parse_block();
    std::size_t body_end = toks_[pos_ - 1].end;
    if (toks_[pos_].kind == TokenKind::End) {
      // Absorb trailing whitespace so top-level spans tile the input.
      body_end = src_.size();
    }
    body.span = span_of(body.span.begin, body_end);
    body.text = std::string(src_.substr(body.span.begin, body_end - body.span.begin));
    fn.ast.children.push_back(std::move(body));
    if (toks_[pos_].kind != TokenKind::End) {
      fn.ast.children.push_back(make(AstKind::Opaque, body_end, src_.size()));
    }

    collect(fn);
    return fn;
  }

 private:
  static constexpr std::size_t npos_ = static_cast<std::size_t>(-1);

  // ---- token helpers -------------------------------------------------------

  const Token& peek(std::size_t off = 0) const {
    return toks_[std::min(pos_ + off, toks_.size() - 1)];
  }
  static bool is_punct(const Token& t, std::string_view p) {
    return t.kind == TokenKind::Punct && t.text == p;
  }
  static bool is_ident(const Token& t, std::string_view name) {
    return t.kind == TokenKind::Identifier && t.text == name;
  }
  bool at(std::string_view p) const { return is_punct(peek(), p); }
  bool at_end() const { return peek().kind == TokenKind::End; }
  const Token& take() {
    const Token& t = toks_[pos_];
    if (t.kind != TokenKind::End) ++pos_;
    return t;
  }
  void expect(std::string_view p) {
    if (!at(p)) throw SyntaxError("expected '" + std::string(p) + "'");
    ++pos_;
  }
  std::size_t last_end() const { return pos_ == 0 ? 0 : toks_[pos_ - 1].end; }

  std::pair<int, int> line_col(std::size_t offset) const {
    auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), offset);
    auto line = static_cast<int>(it - line_starts_.begin());
    return {line, static_cast<int>(offset - line_starts_[line - 1]) + 1};
  }

  SourceSpan span_of(std::size_t begin, std::size_t end) const {
    SourceSpan s;
    s.begin = begin;
    s.end = end;
    std::tie(s.line_begin, s.column_begin) = line_col(begin);
    std::tie(s.line_end, s.column_end) = line_col(end);
    return s;
  }

  AstNode make(AstKind kind, std::size_t begin, std::size_t end) const {
    AstNode n;
    n.kind = kind;
    n.span = span_of(begin, end);
    n.text = std::string(src_.substr(begin, end - begin));
    return n;
  }

  // ---- header --------------------------------------------------------------

  AstNode parse_header(std::size_t brace, PseudoFunction& fn) {
    AstNode header = make(AstKind::Decl, 0, toks_[brace].begin);
    header.op = "signature";
    // Parameter list: the last balanced (...) before the brace.
    std::size_t close = npos_;
    for (std::size_t i = brace; i-- > 0;) {
      if (is_punct(toks_[i], ")")) {
        close = i;
        break;
      }
    }
    if (close == npos_) return header;
    std::size_t open = npos_;
    int depth = 0;
    for (std::size_t i = close + 1; i-- > 0;) {
      if (is_punct(toks_[i], ")")) ++depth;
      if (is_punct(toks_[i], "(")) {
        if (--depth == 0) {
          open = i;
          break;
        }
      }
    }
    if (open == npos_ || open == 0) return header;

    // Name: identifiers (joined over '::') right before '(' , skipping @<reg>.
    std::size_t name_end = open;
    if (name_end >= 4 && is_punct(toks_[name_end - 1], ">") && is_punct(toks_[name_end - 3], "<") &&
        is_punct(toks_[name_end - 4], "@")) {
      name_end -= 4;
    }
    std::size_t name_begin = name_end;
    while (name_begin > 0 && toks_[name_begin - 1].kind == TokenKind::Identifier) {
      --name_begin;
      if (name_begin > 1 && is_punct(toks_[name_begin - 1], "::")) {
        --name_begin;
        continue;
      }
      break;
    }
    std::vector<std::string_view> ret;
    for (std::size_t i = 0; i < name_begin; ++i) {
      const auto& t = toks_[i];
      if (t.kind == TokenKind::Identifier && is_calling_convention(t.text)) continue;
      ret.push_back(t.text);
    }
    fn.return_type = format_type(ret);

    // Parameters split on top-level commas.
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    std::size_t start = open + 1;
    depth = 0;
    for (std::size_t i = open + 1; i < close; ++i) {
      if (is_punct(toks_[i], "(") || is_punct(toks_[i], "[") || is_punct(toks_[i], "<")) ++depth;
      if (is_punct(toks_[i], ")") || is_punct(toks_[i], "]") || is_punct(toks_[i], ">")) --depth;
      if (depth == 0 && is_punct(toks_[i], ",")) {
        ranges.emplace_back(start, i);
        start = i + 1;
      }
    }
    if (start < close) ranges.emplace_back(start, close);

    int position = 0;
    for (auto [b, e] : ranges) {
      auto decl = parse_param(b, e, position);
      if (!decl) continue;
      AstNode node = make(AstKind::Decl, toks_[b].begin, toks_[e - 1].end);
      node.type_text = decl->declared_type;
      node.children.push_back(make(AstKind::Identifier, decl->name_begin, decl->name_end));
      header.children.push_back(std::move(node));
      fn.params.push_back(std::move(*decl));
      ++position;
    }
    return header;
  }

  std::optional<VarDecl> parse_param(std::size_t b, std::size_t e, int position) {
    // Drop a usercall location suffix "@<ecx>".
    std::size_t end = e;
    for (std::size_t i = b; i + 1 < e; ++i) {
      if (is_punct(toks_[i], "@") && is_punct(toks_[i + 1], "<")) {
        end = i;
        break;
      }
    }
    if (end == b) return std::nullopt;
    if (end - b == 1 && (is_ident(toks_[b], "void") || is_punct(toks_[b], "..."))) {
      return std::nullopt;
    }
    // Function-pointer parameter: type (cc *name)(...)
    std::size_t name_idx = npos_;
    for (std::size_t i = b; i + 2 < end; ++i) {
      if (is_punct(toks_[i], "(")) {
        std::size_t j = i + 1;
        while (j < end && (toks_[j].kind == TokenKind::Identifier && is_calling_convention(toks_[j].text))) ++j;
        if (j < end && is_punct(toks_[j], "*")) {
          while (j < end && is_punct(toks_[j], "*")) ++j;
          if (j < end && toks_[j].kind == TokenKind::Identifier) name_idx = j;
        }
        break;
      }
    }
    if (name_idx == npos_) {
      // Last identifier that is not part of an array suffix.
      for (std::size_t i = end; i-- > b;) {
        if (is_punct(toks_[i], "]")) {
          while (i > b && !is_punct(toks_[i], "[")) --i;
          continue;
        }
        if (toks_[i].kind == TokenKind::Identifier) {
          name_idx = i;
          break;
        }
      }
    }
    if (name_idx == npos_) return std::nullopt;
    const auto& name_tok = toks_[name_idx];
    // An unnamed parameter ("int") leaves only a type word.
    if (name_idx == b && is_builtin_type_word(name_tok.text)) return std::nullopt;
    if (is_builtin_type_word(name_tok.text) || is_type_qualifier(name_tok.text)) return std::nullopt;

    std::vector<std::string_view> type_toks;
    for (std::size_t i = b; i < end; ++i) {
      if (i == name_idx) continue;
      type_toks.push_back(toks_[i].text);
    }
    VarDecl v;
    v.name = std::string(name_tok.text);
    v.declared_type = format_type(type_toks);
    v.kind = VarKind::Param;
    v.position = position;
    v.line = name_tok.line;
    v.type_begin = toks_[b].begin;
    v.type_end = toks_[end - 1].end;
    v.name_begin = name_tok.begin;
    v.name_end = name_tok.end;
    return v;
  }

  // ---- statements ----------------------------------------------------------

  AstNode parse_block() {
    const Token& open = peek();
    expect("{");
    AstNode block;
    block.kind = AstKind::Block;
    while (!at("}")) {
      if (at_end()) {
        throw ParseFailure(open.line, "unbalanced '{' never closed");
      }
      for (auto& stmt : parse_statement_recovering()) block.children.push_back(std::move(stmt));
    }
    ++pos_;  // '}'
    std::size_t end = last_end();
    AstNode out = make(AstKind::Block, open.begin, end);
    out.children = std::move(block.children);
    return out;
  }

  std::vector<AstNode> parse_statement_recovering() {
    std::size_t start = pos_;
    try {
      return parse_statement();
    } catch (const SyntaxError&) {
      pos_ = start;
      return {skip_opaque()};
    }
  }

  // Consumes one unparseable statement verbatim.
  AstNode skip_opaque() {
    std::size_t start = pos_;
    int depth = 0;
    while (true) {
      if (at_end()) {
        if (depth > 0 || pos_ == start) throw ParseFailure(peek().line, "unbalanced braces");
        break;
      }
      const Token& t = peek();
      if (depth == 0 && is_punct(t, "}")) {
        if (pos_ == start) ++pos_;  // stray '}' with nothing else
        break;
      }
      if (is_punct(t, "(") || is_punct(t, "[")) ++depth;
      if (is_punct(t, ")") || is_punct(t, "]")) depth = std::max(0, depth - 1);
      if (is_punct(t, "{")) {
        skip_balanced_braces();
        if (depth == 0) {
          if (at(";")) ++pos_;
          break;
        }
        continue;
      }
      ++pos_;
      if (depth == 0 && is_punct(t, ";")) break;
    }
    return make(AstKind::Opaque, toks_[start].begin, last_end());
  }

  void skip_balanced_braces() {
    const Token& open = peek();
    int depth = 0;
    do {
      if (at_end()) throw ParseFailure(open.line, "unbalanced '{' never closed");
      if (at("{")) ++depth;
      if (at("}")) --depth;
      ++pos_;
    } while (depth > 0);
  }

  std::vector<AstNode> parse_statement() {
    const Token& t = peek();
    if (is_punct(t, "{")) return {parse_block()};
    if (is_punct(t, ";")) {
      ++pos_;
      return {};
    }
    if (t.kind == TokenKind::Identifier) {
      auto kw = t.text;
      if (kw == "__asm" || kw == "asm" || kw == "__asm__") return {parse_asm()};
      if (kw == "if") return {parse_if()};
      if (kw == "switch") return {parse_switch()};
      if (kw == "for") return {parse_for()};
      if (kw == "while") return {parse_while()};
      if (kw == "do") return {parse_do()};
      if (kw == "return") return {parse_return()};
      if (kw == "break" || kw == "continue") {
        std::size_t b = take().begin;
        expect(";");
        AstNode n = make(AstKind::Break, b, last_end());
        n.op = std::string(kw);
        return {n};
      }
      if (kw == "goto") {
        std::size_t b = take().begin;
        if (peek().kind != TokenKind::Identifier) throw SyntaxError("goto without label");
        std::string label(take().text);
        expect(";");
        AstNode n = make(AstKind::Goto, b, last_end());
        n.type_text = label;
        return {n};
      }
      if (kw == "case") {
        std::size_t b = take().begin;
        AstNode value = parse_ternary();
        expect(":");
        AstNode n = make(AstKind::Label, b, last_end());
        n.op = "case";
        n.children.push_back(std::move(value));
        return {n};
      }
      if (kw == "default" && is_punct(peek(1), ":")) {
        std::size_t b = take().begin;
        ++pos_;
        AstNode n = make(AstKind::Label, b, last_end());
        n.op = "default";
        return {n};
      }
      if (is_punct(peek(1), ":") && !kStatementKeywords.count(kw)) {
        std::size_t b = take().begin;
        ++pos_;
        AstNode n = make(AstKind::Label, b, last_end());
        n.op = "label";
        n.type_text = std::string(kw);
        return {n};
      }
      if (looks_like_declaration()) return parse_declaration();
    }
    AstNode expr = parse_expression();
    expect(";");
    return {std::move(expr)};
  }

  AstNode parse_asm() {
    std::size_t b = take().begin;
    while (peek().kind == TokenKind::Identifier && (peek().text == "volatile" || peek().text == "__volatile__")) ++pos_;
    if (at("{")) {
      skip_balanced_braces();
    } else {
      int depth = 0;
      while (!at_end()) {
        if (at("(")) ++depth;
        if (at(")")) --depth;
        if (depth <= 0 && (at(";") || at("}"))) break;
        if (depth <= 0 && peek().line != toks_[pos_ - 1].line) break;
        ++pos_;
      }
      if (at(";")) ++pos_;
    }
    return make(AstKind::Opaque, b, last_end());
  }

  AstNode paren_condition() {
    expect("(");
    AstNode cond = parse_expression();
    expect(")");
    return cond;
  }

  AstNode sub_statement() {
    auto stmts = parse_statement_recovering();
    if (stmts.size() == 1) return std::move(stmts.front());
    std::size_t b = stmts.empty() ? last_end() : stmts.front().span.begin;
    AstNode block = make(AstKind::Block, b, last_end());
    block.children = std::move(stmts);
    return block;
  }

  AstNode parse_if() {
    std::size_t b = take().begin;
    AstNode n;
    n.children.push_back(paren_condition());
    n.children.push_back(sub_statement());
    if (is_ident(peek(), "else")) {
      ++pos_;
      n.children.push_back(sub_statement());
    }
    AstNode out = make(AstKind::If, b, last_end());
    out.op = "if";
    out.children = std::move(n.children);
    return out;
  }

  AstNode parse_switch() {
    std::size_t b = take().begin;
    AstNode cond = paren_condition();
    AstNode body = sub_statement();
    AstNode out = make(AstKind::If, b, last_end());
    out.op = "switch";
    out.children.push_back(std::move(cond));
    out.children.push_back(std::move(body));
    return out;
  }

  AstNode empty_at(std::size_t offset) const { return make(AstKind::Opaque, offset, offset); }

  AstNode parse_for() {
    std::size_t b = take().begin;
    expect("(");
    std::vector<AstNode> parts;
    if (at(";")) {
      parts.push_back(empty_at(peek().begin));
      ++pos_;
    } else if (looks_like_declaration()) {
      auto decls = parse_declaration();  // consumes ';'
      if (decls.size() == 1) {
        parts.push_back(std::move(decls.front()));
      } else {
        AstNode group = make(AstKind::Block, decls.front().span.begin, decls.back().span.end);
        group.children = std::move(decls);
        parts.push_back(std::move(group));
      }
    } else {
      parts.push_back(parse_expression());
      expect(";");
    }
    if (at(";")) {
      parts.push_back(empty_at(peek().begin));
    } else {
      parts.push_back(parse_expression());
    }
    expect(";");
    if (at(")")) {
      parts.push_back(empty_at(peek().begin));
    } else {
      parts.push_back(parse_expression());
    }
    expect(")");
    parts.push_back(sub_statement());
    AstNode out = make(AstKind::For, b, last_end());
    out.children = std::move(parts);
    return out;
  }

  AstNode parse_while() {
    std::size_t b = take().begin;
    AstNode cond = paren_condition();
    AstNode body = sub_statement();
    AstNode out = make(AstKind::While, b, last_end());
    out.op = "while";
    out.children.push_back(std::move(cond));
    out.children.push_back(std::move(body));
    return out;
  }

  AstNode parse_do() {
    std::size_t b = take().begin;
    AstNode body = sub_statement();
    if (!is_ident(peek(), "while")) throw SyntaxError("do without while");
    ++pos_;
    AstNode cond = paren_condition();
    expect(";");
    AstNode out = make(AstKind::While, b, last_end());
    out.op = "do";
    out.children.push_back(std::move(body));
    out.children.push_back(std::move(cond));
    return out;
  }

  AstNode parse_return() {
    std::size_t b = take().begin;
    AstNode out;
    if (!at(";")) out.children.push_back(parse_expression());
    expect(";");
    AstNode n = make(AstKind::Return, b, last_end());
    n.children = std::move(out.children);
    return n;
  }

  // ---- declarations --------------------------------------------------------

  bool looks_like_declaration() const {
    std::size_t i = pos_;
    while (toks_[i].kind == TokenKind::Identifier) {
      auto w = toks_[i].text;
      if (is_type_qualifier(w) || is_calling_convention(w)) {
        ++i;
        continue;
      }
      if (w == "struct" || w == "union" || w == "enum") return true;
      if (is_builtin_type_word(w)) {
        // "int(x)" style calls are not declarations.
        return !is_punct(toks_[i + 1], "(") || is_punct(toks_[i + 2], "*") ||
               (toks_[i + 2].kind == TokenKind::Identifier && is_calling_convention(toks_[i + 2].text));
      }
      break;
    }
    // typedef-name declarator: T x; T *x; T x[..]; T x = ...; T *x, ...
    if (toks_[i].kind != TokenKind::Identifier || kStatementKeywords.count(toks_[i].text)) return false;
    std::size_t j = i + 1;
    while (is_punct(toks_[j], "*")) ++j;
    while (toks_[j].kind == TokenKind::Identifier && is_type_qualifier(toks_[j].text)) ++j;
    if (toks_[j].kind != TokenKind::Identifier) return false;
    const Token& after = toks_[j + 1];
    if (is_punct(after, ";") || is_punct(after, "[") || is_punct(after, ",")) return true;
    return is_punct(after, "=");
  }

  std::vector<AstNode> parse_declaration() {
    std::size_t type_start = pos_;
    std::vector<std::string_view> base;
    bool have_base = false;
    while (peek().kind == TokenKind::Identifier) {
      auto w = peek().text;
      if (is_type_qualifier(w) || is_calling_convention(w)) {
        base.push_back(take().text);
        continue;
      }
      if (w == "struct" || w == "union" || w == "enum") {
        base.push_back(take().text);
        if (peek().kind == TokenKind::Identifier) base.push_back(take().text);
        if (at("{")) throw SyntaxError("inline aggregate definition");
        have_base = true;
        continue;
      }
      if (is_builtin_type_word(w)) {
        base.push_back(take().text);
        have_base = true;
        continue;
      }
      if (!have_base) {
        base.push_back(take().text);
        have_base = true;
        continue;
      }
      break;
    }
    if (!have_base) throw SyntaxError("declaration without type");

    std::vector<AstNode> out;
    bool first = true;
    while (true) {
      std::size_t decl_begin = first ? toks_[type_start].begin : peek().begin;
      std::vector<std::string_view> type_toks = base;
      const Token* name = nullptr;
      if (at("(")) {
        // Function pointer: (cc *name)(params)
        type_toks.push_back(take().text);
        while (peek().kind == TokenKind::Identifier && is_calling_convention(peek().text)) {
          type_toks.push_back(take().text);
        }
        while (at("*")) type_toks.push_back(take().text);
        if (peek().kind != TokenKind::Identifier) throw SyntaxError("bad function pointer declarator");
        name = &take();
        expect(")");
        type_toks.push_back(")");
        if (!at("(")) throw SyntaxError("bad function pointer declarator");
        int depth = 0;
        do {
          if (at_end()) throw SyntaxError("unterminated parameter list");
          if (at("(")) ++depth;
          if (at(")")) --depth;
          type_toks.push_back(take().text);
        } while (depth > 0);
      } else {
        while (at("*") ||
               (peek().kind == TokenKind::Identifier && is_type_qualifier(peek().text))) {
          type_toks.push_back(take().text);
        }
        if (peek().kind != TokenKind::Identifier) throw SyntaxError("declarator without name");
        name = &take();
        if (at("@") && is_punct(peek(1), "<")) {
          while (!at_end() && !at(">")) ++pos_;
          expect(">");
        }
        while (at("[")) {
          type_toks.push_back(take().text);
          while (!at("]")) {
            if (at_end() || at(";")) throw SyntaxError("unterminated array declarator");
            type_toks.push_back(take().text);
          }
          type_toks.push_back(take().text);
        }
      }
      AstNode decl;
      decl.kind = AstKind::Decl;
      decl.type_text = format_type(type_toks);
      decl.children.push_back(make(AstKind::Identifier, name->begin, name->end));
      if (at("=")) {
        ++pos_;
        if (at("{")) {
          std::size_t b = peek().begin;
          skip_balanced_braces();
          decl.children.push_back(make(AstKind::Opaque, b, last_end()));
        } else {
          decl.children.push_back(parse_assignment());
        }
      }
      AstNode node = make(AstKind::Decl, decl_begin, last_end());
      node.type_text = decl.type_text;
      node.children = std::move(decl.children);
      out.push_back(std::move(node));
      first = false;
      if (at(",")) {
        ++pos_;
        continue;
      }
      expect(";");
      break;
    }
    // A declarator sharing its base type with siblings cannot be retyped in
    // isolation by an overlay.
    if (out.size() > 1) {
      for (auto& d : out) d.op = "shared";
    }
    return out;
  }

  // ---- expressions ---------------------------------------------------------

  AstNode binary(AstKind kind, std::string op, AstNode lhs, AstNode rhs) const {
    AstNode n = make(kind, lhs.span.begin, rhs.span.end);
    n.op = std::move(op);
    n.children.push_back(std::move(lhs));
    n.children.push_back(std::move(rhs));
    return n;
  }

  AstNode parse_expression() {
    AstNode lhs = parse_assignment();
    while (at(",")) {
      ++pos_;
      AstNode rhs = parse_assignment();
      lhs = binary(AstKind::BinaryOp, ",", std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  static bool is_assign_op(const Token& t) {
    static const std::set<std::string_view, std::less<>> kOps = {
        "=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=",
    };
    return t.kind == TokenKind::Punct && kOps.count(t.text);
  }

  AstNode parse_assignment() {
    AstNode lhs = parse_ternary();
    if (is_assign_op(peek())) {
      std::string op(take().text);
      AstNode rhs = parse_assignment();
      return binary(AstKind::Assign, op, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  AstNode parse_ternary() {
    AstNode cond = parse_binary(0);
    if (!at("?")) return cond;
    ++pos_;
    AstNode yes = parse_expression();
    expect(":");
    AstNode no = parse_assignment();
    AstNode n = make(AstKind::BinaryOp, cond.span.begin, no.span.end);
    n.op = "?:";
    n.children.push_back(std::move(cond));
    n.children.push_back(std::move(yes));
    n.children.push_back(std::move(no));
    return n;
  }

  static int precedence(const Token& t) {
    if (t.kind != TokenKind::Punct) return -1;
    auto op = t.text;
    if (op == "||") return 1;
    if (op == "&&") return 2;
    if (op == "|") return 3;
    if (op == "^") return 4;
    if (op == "&") return 5;
    if (op == "==" || op == "!=") return 6;
    if (op == "<" || op == ">" || op == "<=" || op == ">=") return 7;
    if (op == "<<" || op == ">>") return 8;
    if (op == "+" || op == "-") return 9;
    if (op == "*" || op == "/" || op == "%") return 10;
    return -1;
  }

  AstNode parse_binary(int min_prec) {
    AstNode lhs = parse_unary();
    while (true) {
      int prec = precedence(peek());
      if (prec < 0 || prec < min_prec) break;
      std::string op(take().text);
      AstNode rhs = parse_binary(prec + 1);
      lhs = binary(AstKind::BinaryOp, op, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  // Is the parenthesised token run starting after '(' at `open` a type name?
  std::optional<std::size_t> cast_close(std::size_t open) const {
    std::size_t i = open + 1;
    const Token& first = toks_[i];
    if (first.kind != TokenKind::Identifier) return std::nullopt;
    bool typeish = is_builtin_type_word(first.text) || is_type_qualifier(first.text);
    if (!typeish) {
      auto w = first.text;
      bool typedef_like = w.size() > 2 && w.substr(w.size() - 2) == "_t";
      const Token& next = toks_[i + 1];
      if (!(typedef_like || is_punct(next, "*"))) return std::nullopt;
      if (!typedef_like) {
        // "(T *)" or "(T **)": only stars may follow the name.
        std::size_t j = i + 1;
        while (is_punct(toks_[j], "*")) ++j;
        if (!is_punct(toks_[j], ")")) return std::nullopt;
        return j;
      }
    }
    int depth = 1;
    for (std::size_t j = i; j < toks_.size(); ++j) {
      const Token& t = toks_[j];
      if (t.kind == TokenKind::End || is_punct(t, ";") || is_punct(t, "{")) return std::nullopt;
      if (is_punct(t, "(")) ++depth;
      if (is_punct(t, ")")) {
        if (--depth == 0) return j;
      }
      if (t.kind == TokenKind::Number || t.kind == TokenKind::String) {
        // Array extents inside casts are the only numbers allowed.
        if (!is_punct(toks_[j - 1], "[")) return std::nullopt;
      }
      if (t.kind == TokenKind::Punct && !(t.text == "*" || t.text == "(" || t.text == ")" ||
                                         t.text == "[" || t.text == "]" || t.text == "," ||
                                         t.text == "::" || t.text == "...")) {
        return std::nullopt;
      }
    }
    return std::nullopt;
  }

  AstNode parse_unary() {
    const Token& t = peek();
    if (t.kind == TokenKind::Punct) {
      auto op = t.text;
      if (op == "++" || op == "--") {
        std::size_t b = take().begin;
        AstNode operand = parse_unary();
        AstNode n = make(AstKind::UnaryOp, b, operand.span.end);
        n.op = std::string(op) + "x";
        n.children.push_back(std::move(operand));
        return n;
      }
      if (op == "*" || op == "&" || op == "-" || op == "+" || op == "!" || op == "~") {
        std::size_t b = take().begin;
        AstNode operand = parse_unary();
        AstNode n = make(AstKind::UnaryOp, b, operand.span.end);
        n.op = std::string(op);
        n.children.push_back(std::move(operand));
        return n;
      }
      if (op == "(") {
        if (auto close = cast_close(pos_)) {
          std::size_t b = t.begin;
          std::vector<std::string_view> type_toks;
          for (std::size_t i = pos_ + 1; i < *close; ++i) type_toks.push_back(toks_[i].text);
          pos_ = *close + 1;
          AstNode operand = parse_unary();
          AstNode n = make(AstKind::Cast, b, operand.span.end);
          n.type_text = format_type(type_toks);
          n.children.push_back(std::move(operand));
          return n;
        }
      }
    }
    if (is_ident(t, "sizeof")) {
      std::size_t b = take().begin;
      if (at("(")) {
        if (auto close = cast_close(pos_)) {
          std::vector<std::string_view> type_toks;
          for (std::size_t i = pos_ + 1; i < *close; ++i) type_toks.push_back(toks_[i].text);
          pos_ = *close + 1;
          AstNode n = make(AstKind::UnaryOp, b, last_end());
          n.op = "sizeof";
          n.type_text = format_type(type_toks);
          return n;
        }
      }
      AstNode operand = parse_unary();
      AstNode n = make(AstKind::UnaryOp, b, operand.span.end);
      n.op = "sizeof";
      n.children.push_back(std::move(operand));
      return n;
    }
    return parse_postfix(parse_primary());
  }

  AstNode parse_postfix(AstNode expr) {
    while (true) {
      if (at("(")) {
        ++pos_;
        AstNode call;
        call.children.push_back(std::move(expr));
        if (!at(")")) {
          call.children.push_back(parse_assignment());
          while (at(",")) {
            ++pos_;
            call.children.push_back(parse_assignment());
          }
        }
        expect(")");
        AstNode n = make(AstKind::Call, call.children.front().span.begin, last_end());
        n.children = std::move(call.children);
        expr = std::move(n);
      } else if (at("[")) {
        ++pos_;
        AstNode index = parse_expression();
        expect("]");
        AstNode n = make(AstKind::Index, expr.span.begin, last_end());
        n.children.push_back(std::move(expr));
        n.children.push_back(std::move(index));
        expr = std::move(n);
      } else if (at(".") || at("->")) {
        std::string op(take().text);
        if (peek().kind != TokenKind::Identifier) throw SyntaxError("member name expected");
        std::string member(take().text);
        AstNode n = make(AstKind::Member, expr.span.begin, last_end());
        n.op = op;
        n.type_text = member;
        n.children.push_back(std::move(expr));
        expr = std::move(n);
      } else if (at("++") || at("--")) {
        std::string op = "x" + std::string(take().text);
        AstNode n = make(AstKind::UnaryOp, expr.span.begin, last_end());
        n.op = op;
        n.children.push_back(std::move(expr));
        expr = std::move(n);
      } else {
        return expr;
      }
    }
  }

  AstNode parse_primary() {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::Identifier: {
        if (kStatementKeywords.count(t.text)) throw SyntaxError("keyword in expression");
        std::size_t b = take().begin;
        while (at("::") && peek(1).kind == TokenKind::Identifier) pos_ += 2;
        return make(AstKind::Identifier, b, last_end());
      }
      case TokenKind::Number: {
        ++pos_;
        AstNode n = make(AstKind::Literal, t.begin, t.end);
        n.op = "number";
        return n;
      }
      case TokenKind::String: {
        std::size_t b = take().begin;
        while (peek().kind == TokenKind::String) ++pos_;
        AstNode n = make(AstKind::Literal, b, last_end());
        n.op = "string";
        return n;
      }
      case TokenKind::Char: {
        ++pos_;
        AstNode n = make(AstKind::Literal, t.begin, t.end);
        n.op = "char";
        return n;
      }
      case TokenKind::Punct:
        if (t.text == "(") {
          std::size_t b = take().begin;
          AstNode inner = parse_expression();
          expect(")");
          // Keep the parentheses in the node's text.
          inner.span = span_of(b, last_end());
          inner.text = std::string(src_.substr(b, last_end() - b));
          return inner;
        }
        break;
      default:
        break;
    }
    throw SyntaxError("unexpected token '" + std::string(t.text) + "'");
  }

  // ---- symbol tables -------------------------------------------------------

  void collect(PseudoFunction& fn) {
    std::set<std::string> seen;
    for (const auto& p : fn.params) seen.insert(p.name);
    const AstNode& body = fn.ast.children[1];
    walk(body, [&](const AstNode& node) {
      if (node.kind == AstKind::Decl && !node.children.empty() &&
          node.children.front().kind == AstKind::Identifier) {
        const AstNode& id = node.children.front();
        if (seen.insert(id.text).second) {
          VarDecl v;
          v.name = id.text;
          v.declared_type = node.type_text;
          v.kind = VarKind::Local;
          v.position = -1;
          v.line = id.span.line_begin;
          v.type_begin = node.span.begin;
          v.type_end = id.span.end;
          v.name_begin = id.span.begin;
          v.name_end = id.span.end;
          v.owns_type = node.op != "shared";
          fn.locals.push_back(std::move(v));
        }
      }
      if (node.kind == AstKind::Call) {
        CallSite site;
        const AstNode& callee = node.children.front();
        if (callee.kind == AstKind::Identifier) site.callee_name = callee.text;
        site.args.assign(node.children.begin() + 1, node.children.end());
        site.line = node.span.line_begin;
        fn.call_sites.push_back(std::move(site));
      }
      return true;
    });
  }

  std::string_view src_;
  std::vector<Token> toks_;
  std::vector<std::size_t> line_starts_;
  std::size_t pos_ = 0;
};

}  // namespace

PseudoFunction parse_function(const FunctionRecord& record) {
  if (record.pseudocode.empty()) {
    throw Error(ErrorCode::InvalidArgument, "function '" + record.name + "' has no pseudocode");
  }
  return Parser(record.pseudocode).parse(record);
}

}  // namespace recon::pseudoc
