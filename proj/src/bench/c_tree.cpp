#include "c_tree.hpp"

#include <cctype>
#include <functional>
#include <set>

#include "recon/error.hpp"
#include "recon/pseudoc/function.hpp"
#include "recon/pseudoc/lexer.hpp"

namespace recon::bench::detail {

namespace {

using pseudoc::AstKind;
using pseudoc::AstNode;
using pseudoc::TokenKind;
using Words = std::set<std::string_view, std::less<>>;

const Words kLeafTypes = {
    "identifier", "number_literal", "primitive_type", "type_identifier", "field_identifier",
    "statement_identifier", "string_content", "escape_sequence", "character", "true", "false",
    "system_lib_string", "preproc_arg",
};
const Words kPrimitive = {
    "bool", "char", "int", "float", "double", "void", "size_t", "ssize_t", "ptrdiff_t",
    "intptr_t", "uintptr_t", "charptr_t", "nullptr_t", "max_align_t", "int8_t", "int16_t",
    "int32_t", "int64_t", "uint8_t", "uint16_t", "uint32_t", "uint64_t", "char8_t",
    "char16_t", "char32_t", "char64_t",
};
const Words kStorage = {
    "extern", "static", "auto", "register", "inline", "__inline", "__inline__",
    "__forceinline", "thread_local", "__thread",
};
const Words kQualifier = {
    "const", "constexpr", "volatile", "restrict", "__restrict__", "__restrict",
    "__extension__", "_Atomic", "_Noreturn", "noreturn",
};
const Words kCallModifier = {
    "__cdecl", "__clrcall", "__stdcall", "__fastcall", "__thiscall", "__vectorcall",
    "__usercall", "__userpurge", "__pascal",
};
const Words kSized = {"signed", "unsigned", "long", "short"};
const Words kKeywords = {
    "if", "else", "for", "while", "do", "switch", "case", "default", "return", "break",
    "continue", "goto", "sizeof", "struct", "union", "enum", "typedef",
};

CNode leaf(std::string type, std::string_view text, std::string field = {}) {
  CNode n;
  n.type = std::move(type);
  n.text = std::string(text);
  n.field = std::move(field);
  return n;
}

CNode make(std::string type, std::vector<CNode> kids = {}, std::string field = {}) {
  CNode n;
  n.type = std::move(type);
  n.kids = std::move(kids);
  n.field = std::move(field);
  return n;
}

CNode with_field(CNode n, std::string field) {
  n.field = std::move(field);
  return n;
}

struct Tok {
  TokenKind kind;
  std::string_view text;
};

// Tokens without comments or "@<reg>" location suffixes.
std::vector<Tok> tokens_of(std::string_view text) {
  std::vector<Tok> out;
  auto toks = pseudoc::lex(text);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (t.kind == TokenKind::End) break;
    if (t.kind == TokenKind::Comment) continue;
    if (t.kind == TokenKind::Punct && t.text == "@" && i + 1 < toks.size() && toks[i + 1].text == "<") {
      while (i < toks.size() && toks[i].kind != TokenKind::End && toks[i].text != ">") ++i;
      continue;
    }
    out.push_back({t.kind, t.text});
  }
  return out;
}

CNode string_literal(std::string_view tok) {
  CNode lit = make("string_literal");
  lit.text = std::string(tok);
  auto open = tok.find('"');
  if (open == std::string_view::npos) return lit;
  std::string_view body = tok.substr(open + 1);
  if (!body.empty() && body.back() == '"') body.remove_suffix(1);
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] == '\\' && i + 1 < body.size()) {
      std::size_t j = i + 2;
      char c = body[i + 1];
      auto hex = [](char h) { return std::isxdigit(static_cast<unsigned char>(h)) != 0; };
      if (c >= '0' && c <= '7') {
        while (j < body.size() && j < i + 4 && body[j] >= '0' && body[j] <= '7') ++j;
      } else if (c == 'x') {
        while (j < body.size() && hex(body[j])) ++j;
      } else if (c == 'u' || c == 'U') {
        std::size_t want = c == 'u' ? 4 : 8;
        while (j < body.size() && j < i + 2 + want && hex(body[j])) ++j;
      }
      lit.kids.push_back(leaf("escape_sequence", body.substr(i, j - i)));
      i = j;
    } else {
      std::size_t j = i;
      while (j < body.size() && body[j] != '\\') ++j;
      if (j == i) ++j;
      lit.kids.push_back(leaf("string_content", body.substr(i, j - i)));
      i = j;
    }
  }
  return lit;
}

CNode char_literal(std::string_view tok) {
  CNode lit = make("char_literal");
  auto open = tok.find('\'');
  if (open == std::string_view::npos) return lit;
  std::string_view body = tok.substr(open + 1);
  if (!body.empty() && body.back() == '\'') body.remove_suffix(1);
  for (std::size_t i = 0; i < body.size();) {
    if (body[i] == '\\' && i + 1 < body.size()) {
      std::size_t j = i + 2;
      if (body[i + 1] == 'x' || (body[i + 1] >= '0' && body[i + 1] <= '7')) {
        while (j < body.size() && std::isxdigit(static_cast<unsigned char>(body[j]))) ++j;
      }
      lit.kids.push_back(leaf("escape_sequence", body.substr(i, j - i)));
      i = j;
    } else {
      lit.kids.push_back(leaf("character", body.substr(i, 1)));
      ++i;
    }
  }
  return lit;
}

CNode word_leaf(std::string_view w) {
  if (w == "true" || w == "TRUE") return leaf("true", w);
  if (w == "false" || w == "FALSE") return leaf("false", w);
  if (w == "NULL" || w == "nullptr") return make("null");
  return leaf("identifier", w);
}

// Leaf for a lone token outside any parsed construct.
CNode token_leaf(const Tok& t) {
  switch (t.kind) {
    case TokenKind::Number: return leaf("number_literal", t.text);
    case TokenKind::String: return string_literal(t.text);
    case TokenKind::Char: return char_literal(t.text);
    case TokenKind::Identifier: return word_leaf(t.text);
    default: return {};
  }
}

CNode error_node(const std::vector<Tok>& toks, std::size_t b, std::size_t e) {
  CNode err = make("ERROR");
  for (std::size_t i = b; i < e; ++i) {
    if (toks[i].kind == TokenKind::Identifier && kKeywords.count(toks[i].text)) continue;
    CNode l = token_leaf(toks[i]);
    if (!l.type.empty()) err.kids.push_back(std::move(l));
  }
  return err;
}

std::size_t match_close(const std::vector<Tok>& t, std::size_t open, std::size_t end) {
  std::string_view o = t[open].text;
  std::string_view c = o == "(" ? ")" : o == "[" ? "]" : "}";
  int depth = 0;
  for (std::size_t i = open; i < end; ++i) {
    if (t[i].kind != TokenKind::Punct) continue;
    if (t[i].text == o) ++depth;
    if (t[i].text == c && --depth == 0) return i;
  }
  return end;
}

// Declaration specifiers and declarators over a token range.
class DeclParser {
 public:
  DeclParser(const std::vector<Tok>& toks, std::size_t begin, std::size_t end)
      : t_(toks), i_(begin), end_(end) {}

  std::size_t pos() const { return i_; }
  bool done() const { return i_ >= end_; }
  bool at(std::string_view p) const { return i_ < end_ && t_[i_].kind == TokenKind::Punct && t_[i_].text == p; }
  bool at_ident(std::size_t k) const { return k < end_ && t_[k].kind == TokenKind::Identifier; }
  std::string_view word(std::size_t k) const { return t_[k].text; }
  void skip() { ++i_; }

  // Storage classes, qualifiers and the base type. `abstract` means no
  // declarator name follows, so a word after "unsigned" is always a type.
  void specifiers(std::vector<CNode>& out, bool abstract) {
    bool have_type = false;
    while (at_ident(i_)) {
      auto w = word(i_);
      if (kStorage.count(w)) {
        out.push_back(make("storage_class_specifier"));
        ++i_;
        continue;
      }
      if (kQualifier.count(w)) {
        out.push_back(make("type_qualifier"));
        ++i_;
        continue;
      }
      if (have_type || kCallModifier.count(w)) break;
      if (w == "struct" || w == "union" || w == "enum") {
        CNode spec = make(std::string(w) + "_specifier", {}, "type");
        ++i_;
        if (at_ident(i_)) spec.kids.push_back(leaf("type_identifier", word(i_++), "name"));
        if (at("{")) {
          i_ = match_close(t_, i_, end_) + 1;
          spec.kids.push_back(make(w == "enum" ? "enumerator_list" : "field_declaration_list", {}, "body"));
        }
        out.push_back(std::move(spec));
        have_type = true;
        continue;
      }
      if (kSized.count(w)) {
        CNode spec = make("sized_type_specifier", {}, "type");
        while (at_ident(i_) && kSized.count(word(i_))) ++i_;
        if (at_ident(i_)) {
          auto next = word(i_);
          bool special = kQualifier.count(next) || kStorage.count(next) || kCallModifier.count(next);
          bool followed = at_ident(i_ + 1) ||
                          (i_ + 1 < end_ && t_[i_ + 1].kind == TokenKind::Punct && t_[i_ + 1].text == "*");
          if (!special && (kPrimitive.count(next) || abstract || followed)) {
            spec.kids.push_back(leaf(kPrimitive.count(next) ? "primitive_type" : "type_identifier", next, "type"));
            ++i_;
          }
        }
        out.push_back(std::move(spec));
        have_type = true;
        continue;
      }
      out.push_back(leaf(kPrimitive.count(w) ? "primitive_type" : "type_identifier", w, "type"));
      ++i_;
      have_type = true;
    }
  }

  // Declarator with generic kinds; finalize() picks named or abstract names.
  CNode declarator() {
    if (at("*")) {
      ++i_;
      CNode p = make("pointer");
      while (at_ident(i_) && (kQualifier.count(word(i_)) || kCallModifier.count(word(i_)))) {
        p.kids.push_back(make(kQualifier.count(word(i_)) ? "type_qualifier" : "ms_call_modifier"));
        ++i_;
      }
      CNode inner = declarator();
      if (!inner.type.empty()) p.kids.push_back(with_field(std::move(inner), "declarator"));
      return p;
    }
    CNode d;
    if (at("(") && nested_declarator()) {
      std::size_t close = match_close(t_, i_, end_);
      CNode paren = make("paren");
      DeclParser inner(t_, i_ + 1, close);
      while (inner.at_ident(inner.i_) && kCallModifier.count(inner.word(inner.i_))) {
        paren.kids.push_back(make("ms_call_modifier"));
        inner.skip();
      }
      CNode d2 = inner.declarator();
      if (!d2.type.empty()) paren.kids.push_back(std::move(d2));
      i_ = std::min(close + 1, end_);
      d = std::move(paren);
    } else if (at_ident(i_) && !kQualifier.count(word(i_))) {
      d = leaf("identifier", word(i_++));
    }
    while (true) {
      if (at("[")) {
        std::size_t close = match_close(t_, i_, end_);
        CNode arr = make("array");
        if (!d.type.empty()) arr.kids.push_back(with_field(std::move(d), "declarator"));
        if (close > i_ + 1) {
          CNode size = close == i_ + 2 ? token_leaf(t_[i_ + 1]) : error_node(t_, i_ + 1, close);
          if (!size.type.empty()) arr.kids.push_back(with_field(std::move(size), "size"));
        }
        i_ = std::min(close + 1, end_);
        d = std::move(arr);
      } else if (at("(")) {
        CNode fn = make("function");
        if (!d.type.empty()) fn.kids.push_back(with_field(std::move(d), "declarator"));
        fn.kids.push_back(with_field(parameter_list(), "parameters"));
        d = std::move(fn);
      } else {
        return d;
      }
    }
  }

  CNode parameter_list() {
    std::size_t close = match_close(t_, i_, end_);
    CNode list = make("parameter_list");
    std::size_t start = i_ + 1;
    int depth = 0;
    auto flush = [&](std::size_t b, std::size_t e) {
      if (b >= e) return;
      if (e == b + 1 && t_[b].text == "...") {
        list.kids.push_back(make("variadic_parameter"));
        return;
      }
      DeclParser p(t_, b, e);
      CNode decl = make("parameter_declaration");
      p.specifiers(decl.kids, false);
      CNode d = p.declarator();
      if (!d.type.empty()) {
        finalize(d);
        decl.kids.push_back(with_field(std::move(d), "declarator"));
      }
      list.kids.push_back(std::move(decl));
    };
    for (std::size_t k = i_ + 1; k < close; ++k) {
      if (t_[k].kind != TokenKind::Punct) continue;
      auto s = t_[k].text;
      if (s == "(" || s == "[") ++depth;
      if (s == ")" || s == "]") --depth;
      if (depth == 0 && s == ",") {
        flush(start, k);
        start = k + 1;
      }
    }
    flush(start, close);
    i_ = std::min(close + 1, end_);
    return list;
  }

  static bool named(const CNode& d) {
    if (d.type == "identifier") return true;
    for (const auto& k : d.kids) {
      if (k.field == "parameters" || k.field == "size") continue;
      if (named(k)) return true;
    }
    return false;
  }

  static void finalize(CNode& d) { finalize(d, named(d)); }

  static void finalize(CNode& d, bool is_named) {
    std::string prefix = is_named ? "" : "abstract_";
    if (d.type == "pointer") d.type = prefix + "pointer_declarator";
    else if (d.type == "array") d.type = prefix + "array_declarator";
    else if (d.type == "function") d.type = prefix + "function_declarator";
    else if (d.type == "paren") d.type = prefix + "parenthesized_declarator";
    else return;
    for (auto& k : d.kids) {
      if (k.field != "parameters" && k.field != "size") finalize(k, is_named);
    }
  }

 private:
  bool nested_declarator() const {
    if (i_ + 1 >= end_) return false;
    const auto& n = t_[i_ + 1];
    if (n.kind == TokenKind::Punct) return n.text == "*" || n.text == "(" || n.text == "^";
    return n.kind == TokenKind::Identifier && kCallModifier.count(n.text);
  }

  const std::vector<Tok>& t_;
  std::size_t i_;
  std::size_t end_;
};

CNode type_descriptor(const std::vector<Tok>& toks, std::size_t b, std::size_t e) {
  DeclParser p(toks, b, e);
  CNode td = make("type_descriptor");
  p.specifiers(td.kids, true);
  CNode d = p.declarator();
  if (!d.type.empty()) {
    DeclParser::finalize(d, false);
    td.kids.push_back(with_field(std::move(d), "declarator"));
  }
  return td;
}

CNode initializer_list(const std::vector<Tok>& toks, std::size_t open) {
  std::size_t close = match_close(toks, open, toks.size());
  CNode list = make("initializer_list");
  std::size_t start = open + 1;
  int depth = 0;
  auto flush = [&](std::size_t b, std::size_t e) {
    if (b >= e) return;
    if (toks[b].text == "{") {
      list.kids.push_back(initializer_list(toks, b));
    } else if (e == b + 1) {
      CNode l = token_leaf(toks[b]);
      if (!l.type.empty()) list.kids.push_back(std::move(l));
    } else {
      list.kids.push_back(error_node(toks, b, e));
    }
  };
  for (std::size_t k = open + 1; k < close; ++k) {
    auto s = toks[k].text;
    if (toks[k].kind != TokenKind::Punct) continue;
    if (s == "(" || s == "[" || s == "{") ++depth;
    if (s == ")" || s == "]" || s == "}") --depth;
    if (depth == 0 && s == ",") {
      flush(start, k);
      start = k + 1;
    }
  }
  flush(start, close);
  return list;
}

bool is_expression(AstKind k) {
  switch (k) {
    case AstKind::Assign:
    case AstKind::Call:
    case AstKind::BinaryOp:
    case AstKind::UnaryOp:
    case AstKind::Index:
    case AstKind::Member:
    case AstKind::Cast:
    case AstKind::Identifier:
    case AstKind::Literal:
      return true;
    default:
      return false;
  }
}

// Statements whose span stops before their terminating ';'.
bool owes_semicolon(const AstNode& n) { return is_expression(n.kind) || n.kind == AstKind::Decl; }

int count_semicolons(std::string_view text) {
  int n = 0;
  for (const auto& t : tokens_of(text)) {
    if (t.kind == TokenKind::Punct && t.text == ";") ++n;
  }
  return n;
}

class Converter {
 public:
  explicit Converter(std::string_view src) : src_(src) {}

  CNode function(const pseudoc::PseudoFunction& fn) {
    const AstNode& header = fn.ast.children[0];
    const AstNode& body = fn.ast.children[1];
    auto toks = tokens_of(header.text);
    DeclParser p(toks, 0, toks.size());
    CNode def = make("function_definition");
    p.specifiers(def.kids, false);
    while (p.at_ident(p.pos()) &&
           (kCallModifier.count(p.word(p.pos())) || p.at_ident(p.pos() + 1))) {
      def.kids.push_back(make("ms_call_modifier"));
      p.skip();
    }
    CNode d = p.declarator();
    if (!d.type.empty()) {
      DeclParser::finalize(d);
      def.kids.push_back(with_field(std::move(d), "declarator"));
    }
    def.kids.push_back(with_field(block(body), "body"));
    return def;
  }

  std::vector<CNode> block_items(const AstNode& block, std::size_t inner_begin, std::size_t inner_end) {
    struct Item {
      enum Kind { Stmt, Label, Case } kind;
      CNode node;
    };
    std::vector<Item> items;
    auto empties = [&](std::size_t b, std::size_t e, int owed) {
      if (e <= b) return;
      int extra = count_semicolons(src_.substr(b, e - b)) - owed;
      for (int k = 0; k < extra; ++k) items.push_back({Item::Stmt, make("expression_statement")});
    };
    std::size_t cursor = inner_begin;
    int owed = 0;
    const auto& kids = block.children;
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const AstNode& c = kids[i];
      empties(cursor, c.span.begin, owed);
      if (c.kind == AstKind::Decl) {
        std::size_t j = i + 1;
        while (j < kids.size() && kids[j].kind == AstKind::Decl && kids[j].op == "shared" &&
               c.op == "shared" && is_comma_gap(kids[j - 1].span.end, kids[j].span.begin)) {
          ++j;
        }
        items.push_back({Item::Stmt, declaration(kids, i, j)});
        cursor = kids[j - 1].span.end;
        owed = 1;
        i = j - 1;
        continue;
      }
      if (c.kind == AstKind::Label) {
        if (c.op == "label") {
          CNode lab = make("labeled_statement");
          lab.kids.push_back(leaf("statement_identifier", c.type_text, "label"));
          items.push_back({Item::Label, std::move(lab)});
        } else {
          CNode cs = make("case_statement");
          if (c.op == "case" && !c.children.empty()) cs.kids.push_back(with_field(expr(c.children[0]), "value"));
          items.push_back({Item::Case, std::move(cs)});
        }
      } else {
        items.push_back({Item::Stmt, stmt(c)});
      }
      cursor = c.span.end;
      owed = owes_semicolon(c) ? 1 : 0;
    }
    empties(cursor, inner_end, owed);

    // A label owns the statement after it; a case owns everything up to the
    // next case.
    std::vector<Item> folded;
    for (auto it = items.rbegin(); it != items.rend(); ++it) {
      if (it->kind == Item::Label) {
        CNode lab = std::move(it->node);
        if (!folded.empty() && folded.back().kind == Item::Stmt) {
          lab.kids.push_back(std::move(folded.back().node));
          folded.pop_back();
        }
        folded.push_back({Item::Stmt, std::move(lab)});
      } else {
        folded.push_back(std::move(*it));
      }
    }
    std::vector<CNode> out;
    CNode* open_case = nullptr;
    for (auto it = folded.rbegin(); it != folded.rend(); ++it) {
      if (it->kind == Item::Case) {
        out.push_back(std::move(it->node));
        open_case = &out.back();
      } else if (open_case) {
        open_case->kids.push_back(std::move(it->node));
      } else {
        out.push_back(std::move(it->node));
      }
    }
    return out;
  }

  CNode block(const AstNode& b) {
    std::string_view text = src_.substr(b.span.begin, b.span.end - b.span.begin);
    if (text.empty() || text.front() != '{') {
      // Unbraced group from a sub-statement: an empty statement or a run.
      if (b.children.empty()) return make("expression_statement");
      if (b.children.front().kind == AstKind::Decl) return declaration(b.children, 0, b.children.size());
      return stmt(b.children.front());
    }
    CNode cs = make("compound_statement");
    cs.kids = block_items(b, b.span.begin + 1, b.span.end > 0 ? b.span.end - 1 : b.span.end);
    return cs;
  }

  CNode stmt(const AstNode& n) {
    if (is_expression(n.kind)) return make("expression_statement", {expr(n)});
    switch (n.kind) {
      case AstKind::Block:
        return block(n);
      case AstKind::Decl:
        return declaration(std::vector<AstNode>{n}, 0, 1);
      case AstKind::If: {
        if (n.op == "switch") {
          return make("switch_statement", {with_field(condition(n.children[0]), "condition"),
                                           with_field(stmt(n.children[1]), "body")});
        }
        CNode s = make("if_statement", {with_field(condition(n.children[0]), "condition"),
                                        with_field(stmt(n.children[1]), "consequence")});
        if (n.children.size() > 2) {
          s.kids.push_back(make("else_clause", {stmt(n.children[2])}, "alternative"));
        }
        return s;
      }
      case AstKind::For: {
        CNode s = make("for_statement");
        static const char* kFields[] = {"initializer", "condition", "update"};
        for (int k = 0; k < 3 && k < static_cast<int>(n.children.size()); ++k) {
          const AstNode& part = n.children[k];
          if (part.kind == AstKind::Opaque && part.span.begin == part.span.end) continue;
          CNode c;
          if (part.kind == AstKind::Decl) {
            c = declaration(std::vector<AstNode>{part}, 0, 1);
          } else if (part.kind == AstKind::Block) {
            c = declaration(part.children, 0, part.children.size());
          } else {
            c = expr(part);
          }
          s.kids.push_back(with_field(std::move(c), kFields[k]));
        }
        if (n.children.size() > 3) s.kids.push_back(with_field(stmt(n.children[3]), "body"));
        return s;
      }
      case AstKind::While:
        if (n.op == "do") {
          return make("do_statement", {with_field(stmt(n.children[0]), "body"),
                                       with_field(condition(n.children[1]), "condition")});
        }
        return make("while_statement", {with_field(condition(n.children[0]), "condition"),
                                        with_field(stmt(n.children[1]), "body")});
      case AstKind::Return: {
        CNode s = make("return_statement");
        if (!n.children.empty()) s.kids.push_back(expr(n.children[0]));
        return s;
      }
      case AstKind::Break:
        return make(n.op == "continue" ? "continue_statement" : "break_statement");
      case AstKind::Goto:
        return make("goto_statement", {leaf("statement_identifier", n.type_text, "label")});
      case AstKind::Label: {
        if (n.op == "label") return make("labeled_statement", {leaf("statement_identifier", n.type_text, "label")});
        CNode cs = make("case_statement");
        if (n.op == "case" && !n.children.empty()) cs.kids.push_back(with_field(expr(n.children[0]), "value"));
        return cs;
      }
      default: {
        auto toks = tokens_of(n.text);
        return error_node(toks, 0, toks.size());
      }
    }
  }

  CNode condition(const AstNode& n) { return make("parenthesized_expression", {expr(n)}); }

  // Declarations kids[b, e) share one base type.
  CNode declaration(const std::vector<AstNode>& kids, std::size_t b, std::size_t e) {
    std::size_t begin = kids[b].span.begin;
    std::size_t end = kids[e - 1].span.end;
    auto toks = tokens_of(src_.substr(begin, end - begin));
    DeclParser p(toks, 0, toks.size());
    CNode decl = make("declaration");
    p.specifiers(decl.kids, false);
    for (std::size_t k = b; k < e && !p.done(); ++k) {
      CNode d = p.declarator();
      DeclParser::finalize(d);
      if (p.at("=")) {
        p.skip();
        CNode value;
        if (p.at("{")) {
          value = initializer_list(toks, p.pos());
        } else if (kids[k].children.size() > 1) {
          value = expr(kids[k].children[1]);
        }
        skip_to_comma(p, toks);
        CNode init = make("init_declarator", {with_field(std::move(d), "declarator")}, "declarator");
        if (!value.type.empty()) init.kids.push_back(with_field(std::move(value), "value"));
        decl.kids.push_back(std::move(init));
      } else {
        if (!d.type.empty()) decl.kids.push_back(with_field(std::move(d), "declarator"));
        skip_to_comma(p, toks);
      }
      if (p.at(",")) p.skip();
    }
    return decl;
  }

  CNode expr(const AstNode& n) {
    std::string_view text = src_.substr(n.span.begin, n.span.end - n.span.begin);
    auto toks = tokens_of(text);
    std::size_t lo = 0;
    std::size_t hi = toks.size();
    int wraps = 0;
    while (hi - lo >= 2 && toks[lo].text == "(" && toks[hi - 1].text == ")" &&
           match_close(toks, lo, hi) == hi - 1) {
      ++lo;
      --hi;
      ++wraps;
    }
    CNode out = bare_expr(n, toks, lo, hi);
    for (int k = 0; k < wraps; ++k) out = make("parenthesized_expression", {std::move(out)});
    return out;
  }

 private:
  bool is_comma_gap(std::size_t b, std::size_t e) const {
    if (e < b) return false;
    auto toks = tokens_of(src_.substr(b, e - b));
    return toks.size() == 1 && toks[0].text == ",";
  }

  static void skip_to_comma(DeclParser& p, const std::vector<Tok>& toks) {
    int depth = 0;
    while (!p.done()) {
      const auto& t = toks[p.pos()];
      if (t.kind == TokenKind::Punct) {
        if (t.text == "(" || t.text == "[" || t.text == "{") ++depth;
        if (t.text == ")" || t.text == "]" || t.text == "}") --depth;
        if (depth <= 0 && (t.text == "," || t.text == ";")) return;
      }
      p.skip();
    }
  }

  CNode bare_expr(const AstNode& n, const std::vector<Tok>& toks, std::size_t lo, std::size_t hi) {
    switch (n.kind) {
      case AstKind::Identifier:
        return word_leaf(lo < hi ? toks[lo].text : std::string_view(n.text));
      case AstKind::Literal: {
        if (n.op == "string") {
          std::vector<CNode> parts;
          for (std::size_t k = lo; k < hi; ++k) {
            if (toks[k].kind == TokenKind::String) parts.push_back(string_literal(toks[k].text));
          }
          if (parts.size() == 1) return std::move(parts.front());
          return make("concatenated_string", std::move(parts));
        }
        if (n.op == "char") return char_literal(lo < hi ? toks[lo].text : std::string_view(n.text));
        return leaf("number_literal", lo < hi ? toks[lo].text : std::string_view(n.text));
      }
      case AstKind::BinaryOp:
        if (n.op == "?:") {
          return make("conditional_expression", {with_field(expr(n.children[0]), "condition"),
                                                 with_field(expr(n.children[1]), "consequence"),
                                                 with_field(expr(n.children[2]), "alternative")});
        }
        return make(n.op == "," ? "comma_expression" : "binary_expression",
                    {with_field(expr(n.children[0]), "left"), with_field(expr(n.children[1]), "right")});
      case AstKind::Assign:
        return make("assignment_expression",
                    {with_field(expr(n.children[0]), "left"), with_field(expr(n.children[1]), "right")});
      case AstKind::UnaryOp: {
        const std::string& op = n.op;
        if (op == "sizeof") {
          if (n.children.empty()) {
            // sizeof(type): the type sits inside the parentheses after the keyword.
            std::size_t open = lo + 1;
            std::size_t close = open < hi ? match_close(toks, open, hi) : hi;
            return make("sizeof_expression", {with_field(type_descriptor(toks, open + 1, close), "type")});
          }
          return make("sizeof_expression", {with_field(expr(n.children[0]), "value")});
        }
        const AstNode& arg = n.children[0];
        if ((op == "-" || op == "+") && arg.kind == AstKind::Literal && arg.op == "number" &&
            arg.span.begin == n.span.begin + 1 && lo + 1 < hi && toks[lo + 1].kind == TokenKind::Number) {
          // A signed number is a single literal token.
          return leaf("number_literal", op + std::string(toks[lo + 1].text));
        }
        std::string type = (op == "*" || op == "&") ? "pointer_expression"
                           : (op.find("++") != std::string::npos || op.find("--") != std::string::npos)
                               ? "update_expression"
                               : "unary_expression";
        return make(type, {with_field(expr(n.children[0]), "argument")});
      }
      case AstKind::Cast: {
        std::size_t close = lo < hi ? match_close(toks, lo, hi) : hi;
        return make("cast_expression", {with_field(type_descriptor(toks, lo + 1, close), "type"),
                                        with_field(expr(n.children[0]), "value")});
      }
      case AstKind::Call: {
        CNode args = make("argument_list", {}, "arguments");
        for (std::size_t k = 1; k < n.children.size(); ++k) args.kids.push_back(expr(n.children[k]));
        return make("call_expression", {with_field(expr(n.children[0]), "function"), std::move(args)});
      }
      case AstKind::Index:
        return make("subscript_expression",
                    {with_field(expr(n.children[0]), "argument"), with_field(expr(n.children[1]), "index")});
      case AstKind::Member:
        return make("field_expression", {with_field(expr(n.children[0]), "argument"),
                                         leaf("field_identifier", n.type_text, "field")});
      default:
        return error_node(toks, lo, hi);
    }
  }

  std::string_view src_;
};

CNode fallback(std::string_view code) {
  auto toks = tokens_of(code);
  return make("translation_unit", {error_node(toks, 0, toks.size())});
}

// Top-level pieces: functions, ';'-terminated declarations and directives.
struct Chunk {
  std::size_t begin;
  std::size_t end;
  bool function;
  bool directive;
};

std::vector<Chunk> split_top_level(std::string_view code) {
  std::vector<Chunk> out;
  auto toks = pseudoc::lex(code);
  std::size_t i = 0;
  while (i < toks.size() && toks[i].kind != TokenKind::End) {
    if (toks[i].kind == TokenKind::Comment) {
      ++i;
      continue;
    }
    std::size_t begin = toks[i].begin;
    if (toks[i].text == "#") {
      std::size_t line_end = code.find('\n', begin);
      while (line_end != std::string_view::npos && line_end > 0 && code[line_end - 1] == '\\') {
        line_end = code.find('\n', line_end + 1);
      }
      if (line_end == std::string_view::npos) line_end = code.size();
      out.push_back({begin, line_end, false, true});
      while (i < toks.size() && toks[i].kind != TokenKind::End && toks[i].begin < line_end) ++i;
      continue;
    }
    int paren = 0;
    bool function = false;
    std::size_t end = code.size();
    const pseudoc::Token* prev = nullptr;
    for (; i < toks.size() && toks[i].kind != TokenKind::End; ++i) {
      const auto& t = toks[i];
      if (t.kind == TokenKind::Comment) continue;
      if (t.kind == TokenKind::Punct) {
        if (t.text == "(") ++paren;
        if (t.text == ")") --paren;
        if (t.text == ";" && paren <= 0) {
          end = t.end;
          ++i;
          break;
        }
        if (t.text == "{" && paren <= 0) {
          function = prev && prev->kind == TokenKind::Punct && prev->text == ")";
          int depth = 0;
          for (; i < toks.size() && toks[i].kind != TokenKind::End; ++i) {
            if (toks[i].text == "{") ++depth;
            if (toks[i].text == "}" && --depth == 0) break;
          }
          if (i < toks.size() && toks[i].kind != TokenKind::End) {
            end = toks[i].end;
            ++i;
          }
          if (!function) {
            // struct definition: runs on to its ';'
            while (i < toks.size() && toks[i].kind != TokenKind::End && toks[i].text != ";") ++i;
            if (i < toks.size() && toks[i].kind != TokenKind::End) end = toks[i++].end;
          }
          break;
        }
      }
      prev = &t;
    }
    if (i >= toks.size() || toks[i].kind == TokenKind::End) end = std::min(end, code.size());
    out.push_back({begin, end, function, false});
  }
  return out;
}

CNode directive(std::string_view line) {
  auto toks = tokens_of(line);
  if (toks.size() >= 2 && toks[1].text == "include") {
    CNode inc = make("preproc_include");
    if (toks.size() >= 3 && toks[2].kind == TokenKind::String) {
      inc.kids.push_back(with_field(string_literal(toks[2].text), "path"));
    } else {
      auto lt = line.find('<');
      auto gt = line.find('>');
      if (lt != std::string_view::npos && gt != std::string_view::npos && gt > lt) {
        inc.kids.push_back(leaf("system_lib_string", line.substr(lt, gt - lt + 1), "path"));
      }
    }
    return inc;
  }
  if (toks.size() >= 3 && toks[1].text == "define") {
    CNode def = make("preproc_def", {leaf("identifier", toks[2].text, "name")});
    if (toks.size() > 3) def.kids.push_back(leaf("preproc_arg", "", "value"));
    return def;
  }
  return error_node(toks, 0, toks.size());
}

}  // namespace

bool CNode::leaf() const { return kids.empty() && kLeafTypes.count(type) > 0; }

CNode c_tree(std::string_view code) {
  CNode root = make("translation_unit");
  for (const auto& chunk : split_top_level(code)) {
    std::string_view text = code.substr(chunk.begin, chunk.end - chunk.begin);
    if (chunk.directive) {
      root.kids.push_back(directive(text));
      continue;
    }
    pseudoc::FunctionRecord rec;
    rec.name = "f";
    try {
      if (chunk.function) {
        rec.pseudocode = std::string(text);
        auto fn = pseudoc::parse_function(rec);
        if (fn.ast.children.size() >= 2 && fn.ast.children[1].kind == AstKind::Block) {
          Converter conv(fn.source());
          root.kids.push_back(conv.function(fn));
          continue;
        }
      } else {
        // Declarations parse as the body of a dummy function.
        rec.pseudocode = "void f(){\n" + std::string(text) + "\n}";
        auto fn = pseudoc::parse_function(rec);
        if (fn.ast.children.size() >= 2 && fn.ast.children[1].kind == AstKind::Block) {
          Converter conv(fn.source());
          const AstNode& body = fn.ast.children[1];
          for (auto& n : conv.block_items(body, body.span.begin + 1, body.span.end - 1)) {
            root.kids.push_back(std::move(n));
          }
          continue;
        }
      }
    } catch (const Error&) {
    }
    auto toks = tokens_of(text);
    root.kids.push_back(error_node(toks, 0, toks.size()));
  }
  if (root.kids.empty() && !tokens_of(code).empty()) return fallback(code);
  return root;
}

std::string sexp(const CNode& node) {
  std::string out = "(" + node.type;
  for (const auto& k : node.kids) {
    out += ' ';
    if (!k.field.empty()) out += k.field + ": ";
    out += sexp(k);
  }
  out += ')';
  return out;
}

int number_tokens(CNode& root) {
  int next = 0;
  std::function<void(CNode&)> visit = [&](CNode& n) {
    if (n.token()) {
      n.idx = next++;
      return;
    }
    for (auto& k : n.kids) visit(k);
  };
  visit(root);
  return next;
}

}  // namespace recon::bench::detail
