#include "codekc/minilang.hpp"

#include <array>
#include <cctype>
#include <sstream>
#include <unordered_map>

#include "codekc/errors.hpp"

namespace codekc::minilang {

namespace {

constexpr std::array<std::pair<NodeKind, const char*>, 24> kKindNames = {{
    {NodeKind::MethodDecl, "MethodDecl"},
    {NodeKind::Param, "Param"},
    {NodeKind::Block, "Block"},
    {NodeKind::VarDecl, "VarDecl"},
    {NodeKind::Assign, "Assign"},
    {NodeKind::If, "If"},
    {NodeKind::While, "While"},
    {NodeKind::For, "For"},
    {NodeKind::Return, "Return"},
    {NodeKind::ExprStmt, "ExprStmt"},
    {NodeKind::Call, "Call"},
    {NodeKind::Index, "Index"},
    {NodeKind::Binary, "Binary"},
    {NodeKind::Unary, "Unary"},
    {NodeKind::Identifier, "Identifier"},
    {NodeKind::IntLit, "IntLit"},
    {NodeKind::StrLit, "StrLit"},
    {NodeKind::BoolLit, "BoolLit"},
    {NodeKind::ArrayType, "ArrayType"},
    {NodeKind::PrimType, "PrimType"},
    {NodeKind::CondExpr, "CondExpr"},
    {NodeKind::Break, "Break"},
    {NodeKind::Continue, "Continue"},
    {NodeKind::ArgList, "ArgList"},
}};

bool is_keyword(std::string_view s) {
  static const char* kw[] = {"int", "boolean", "String", "void", "if",    "else",    "while",
                             "for", "return",  "break",  "continue"};
  for (const char* k : kw)
    if (s == k) return true;
  return false;
}

bool is_type_keyword(std::string_view s) {
  return s == "int" || s == "boolean" || s == "String" || s == "void";
}

}  // namespace

const char* node_kind_name(NodeKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "?";
}

std::optional<NodeKind> node_kind_from_name(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (name == n) return k;
  return std::nullopt;
}

bool is_leaf_kind(NodeKind kind) {
  switch (kind) {
    case NodeKind::Identifier:
    case NodeKind::IntLit:
    case NodeKind::StrLit:
    case NodeKind::BoolLit:
    case NodeKind::PrimType:
    case NodeKind::Break:
    case NodeKind::Continue:
      return true;
    default:
      return false;
  }
}

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](char c) {
    if (c == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++i;
  };

  while (i < src.size()) {
    char c = src[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(c);
      continue;
    }
    // Comments
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') advance(src[i]);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      int start_line = line, start_col = col;
      advance('/');
      advance('*');
      bool closed = false;
      while (i < src.size()) {
        if (src[i] == '*' && i + 1 < src.size() && src[i + 1] == '/') {
          advance('*');
          advance('/');
          closed = true;
          break;
        }
        advance(src[i]);
      }
      if (!closed) throw SyntaxError("lex error: unterminated block comment", start_line, start_col);
      continue;
    }

    int tline = line, tcol = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string word;
      while (i < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_')) {
        word.push_back(src[i]);
        advance(src[i]);
      }
      TokenKind kind = TokenKind::Identifier;
      if (word == "true" || word == "false")
        kind = TokenKind::BoolLiteral;
      else if (is_keyword(word))
        kind = TokenKind::Keyword;
      out.push_back({kind, word, tline, tcol});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string digits;
      while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) {
        digits.push_back(src[i]);
        advance(src[i]);
      }
      out.push_back({TokenKind::IntLiteral, digits, tline, tcol});
      continue;
    }
    if (c == '"') {
      advance('"');
      std::string value;
      bool closed = false;
      while (i < src.size()) {
        char d = src[i];
        if (d == '"') {
          advance('"');
          closed = true;
          break;
        }
        if (d == '\n') break;  // strings do not span lines
        if (d == '\\') {
          if (i + 1 >= src.size()) break;
          char e = src[i + 1];
          if (e != '"' && e != '\\')
            throw SyntaxError(std::string("lex error: unknown escape '\\") + e + "'", line, col);
          advance('\\');
          value.push_back(e);
          advance(e);
          continue;
        }
        value.push_back(d);
        advance(d);
      }
      if (!closed) throw SyntaxError("lex error: unterminated string literal", tline, tcol);
      out.push_back({TokenKind::StringLiteral, value, tline, tcol});
      continue;
    }

    // Operators, longest match first.
    static const char* two_char[] = {"==", "!=", "<=", ">=", "&&", "||", "+=", "-="};
    bool matched = false;
    if (i + 1 < src.size()) {
      std::string pair{src[i], src[i + 1]};
      for (const char* op : two_char) {
        if (pair == op) {
          out.push_back({TokenKind::Operator, pair, tline, tcol});
          advance(src[i]);
          advance(src[i]);
          matched = true;
          break;
        }
      }
    }
    if (matched) continue;
    if (std::string_view("=<>+-*/%!?:").find(c) != std::string_view::npos) {
      out.push_back({TokenKind::Operator, std::string(1, c), tline, tcol});
      advance(c);
      continue;
    }
    if (std::string_view("(){}[],;").find(c) != std::string_view::npos) {
      out.push_back({TokenKind::Punct, std::string(1, c), tline, tcol});
      advance(c);
      continue;
    }
    throw SyntaxError(std::string("lex error: illegal character '") + c + "'", tline, tcol);
  }
  return out;
}

namespace {

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  AstNode parse_program() {
    if (at_end()) throw err("expected method declaration or '{'");
    if (check_punct("{")) {
      AstNode block = parse_block();
      expect_end();
      return block;
    }
    std::vector<AstNode> methods;
    while (!at_end()) methods.push_back(parse_method());
    if (methods.size() == 1) return std::move(methods.front());
    int line = methods.empty() ? 1 : methods.front().line;
    int col = methods.empty() ? 1 : methods.front().col;
    return AstNode{NodeKind::Block, "", std::move(methods), line, col};
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;

  bool at_end() const { return pos_ >= toks_.size(); }
  const Token& peek() const { return toks_[pos_]; }
  const Token& prev() const { return toks_[pos_ - 1]; }

  SyntaxError err(const std::string& what) const {
    if (at_end()) {
      int line = toks_.empty() ? 1 : toks_.back().line;
      int col = toks_.empty() ? 1 : toks_.back().col;
      return SyntaxError("parse error: " + what + ", found end of input", line, col);
    }
    const Token& t = peek();
    return SyntaxError("parse error: " + what + ", found '" + t.text + "'", t.line, t.col);
  }

  bool check_punct(std::string_view p) const {
    return !at_end() && peek().kind == TokenKind::Punct && peek().text == p;
  }
  bool check_op(std::string_view p) const {
    return !at_end() && peek().kind == TokenKind::Operator && peek().text == p;
  }
  bool check_keyword(std::string_view k) const {
    return !at_end() && peek().kind == TokenKind::Keyword && peek().text == k;
  }

  const Token& advance() { return toks_[pos_++]; }

  const Token& expect_punct(std::string_view p) {
    if (!check_punct(p)) throw err("expected '" + std::string(p) + "'");
    return advance();
  }
  const Token& expect_op(std::string_view p) {
    if (!check_op(p)) throw err("expected '" + std::string(p) + "'");
    return advance();
  }
  const Token& expect_keyword(std::string_view k) {
    if (!check_keyword(k)) throw err("expected '" + std::string(k) + "'");
    return advance();
  }
  const Token& expect_identifier() {
    if (at_end() || peek().kind != TokenKind::Identifier) throw err("expected identifier");
    return advance();
  }
  void expect_end() {
    if (!at_end()) throw err("expected end of input");
  }

  bool at_type() const {
    return !at_end() && peek().kind == TokenKind::Keyword && is_type_keyword(peek().text);
  }

  AstNode make(NodeKind kind, const Token& t, std::string text = "") {
    AstNode n;
    n.kind = kind;
    n.text = std::move(text);
    n.line = t.line;
    n.col = t.col;
    return n;
  }

  // type := ("int"|"boolean"|"String"|"void") ("[" "]")?
  AstNode parse_type() {
    if (!at_type()) throw err("expected type");
    const Token& t = advance();
    AstNode prim = make(NodeKind::PrimType, t, t.text);
    if (check_punct("[")) {
      advance();
      expect_punct("]");
      AstNode arr = make(NodeKind::ArrayType, t);
      arr.children.push_back(std::move(prim));
      return arr;
    }
    return prim;
  }

  // methodDecl := type IDENT "(" params? ")" block
  // Children are Param* then Block; the return type is consumed only.
  AstNode parse_method() {
    const Token& first = at_end() ? toks_.back() : peek();
    parse_type();
    const Token& name = expect_identifier();
    AstNode method = make(NodeKind::MethodDecl, first, name.text);
    expect_punct("(");
    if (!check_punct(")")) {
      method.children.push_back(parse_param());
      while (check_punct(",")) {
        advance();
        method.children.push_back(parse_param());
      }
    }
    expect_punct(")");
    method.children.push_back(parse_block());
    return method;
  }

  AstNode parse_param() {
    const Token& first = at_end() ? toks_.back() : peek();
    AstNode type = parse_type();
    const Token& name = expect_identifier();
    AstNode param = make(NodeKind::Param, first);
    param.children.push_back(std::move(type));
    param.children.push_back(make(NodeKind::Identifier, name, name.text));
    return param;
  }

  AstNode parse_block() {
    const Token& brace = expect_punct("{");
    AstNode block = make(NodeKind::Block, brace);
    while (!check_punct("}")) {
      if (at_end()) throw err("expected '}'");
      block.children.push_back(parse_stmt());
    }
    expect_punct("}");
    return block;
  }

  // Control-flow bodies are canonicalized to blocks.
  AstNode parse_body() {
    AstNode stmt = parse_stmt();
    if (stmt.kind == NodeKind::Block) return stmt;
    AstNode block{NodeKind::Block, "", {}, stmt.line, stmt.col};
    block.children.push_back(std::move(stmt));
    return block;
  }

  AstNode parse_stmt() {
    if (at_end()) throw err("expected statement");
    if (check_punct("{")) return parse_block();
    if (at_type()) return parse_var_decl();
    if (check_keyword("if")) return parse_if();
    if (check_keyword("while")) return parse_while();
    if (check_keyword("for")) return parse_for();
    if (check_keyword("return")) return parse_return();
    if (check_keyword("break")) {
      const Token& t = advance();
      expect_punct(";");
      return make(NodeKind::Break, t);
    }
    if (check_keyword("continue")) {
      const Token& t = advance();
      expect_punct(";");
      return make(NodeKind::Continue, t);
    }
    return parse_expr_stmt();
  }

  AstNode parse_var_decl() {
    const Token& first = peek();
    AstNode type = parse_type();
    const Token& name = expect_identifier();
    AstNode decl = make(NodeKind::VarDecl, first);
    decl.children.push_back(std::move(type));
    decl.children.push_back(make(NodeKind::Identifier, name, name.text));
    if (check_op("=")) {
      advance();
      decl.children.push_back(parse_expr());
    }
    expect_punct(";");
    return decl;
  }

  AstNode parse_if() {
    const Token& kw = expect_keyword("if");
    expect_punct("(");
    AstNode node = make(NodeKind::If, kw);
    node.children.push_back(parse_expr());
    expect_punct(")");
    node.children.push_back(parse_body());
    if (check_keyword("else")) {
      advance();
      node.children.push_back(parse_body());
    }
    return node;
  }

  AstNode parse_while() {
    const Token& kw = expect_keyword("while");
    expect_punct("(");
    AstNode node = make(NodeKind::While, kw);
    node.children.push_back(parse_expr());
    expect_punct(")");
    node.children.push_back(parse_body());
    return node;
  }

  // Children: [init?, cond, update?, body]. The condition is always present
  // (BoolLit true when the source omits it), which keeps child roles
  // recoverable: a statement-kind first child is the init, a second
  // expression before the body is the update.
  AstNode parse_for() {
    const Token& kw = expect_keyword("for");
    expect_punct("(");
    AstNode node = make(NodeKind::For, kw);
    if (check_punct(";")) {
      advance();
    } else if (at_type()) {
      node.children.push_back(parse_var_decl());
    } else {
      node.children.push_back(parse_expr_stmt());
    }
    if (check_punct(";")) {
      AstNode t = make(NodeKind::BoolLit, peek(), "true");
      node.children.push_back(std::move(t));
      advance();
    } else {
      node.children.push_back(parse_expr());
      expect_punct(";");
    }
    if (!check_punct(")")) node.children.push_back(parse_expr());
    expect_punct(")");
    node.children.push_back(parse_body());
    return node;
  }

  AstNode parse_return() {
    const Token& kw = expect_keyword("return");
    AstNode node = make(NodeKind::Return, kw);
    if (!check_punct(";")) node.children.push_back(parse_expr());
    expect_punct(";");
    return node;
  }

  AstNode parse_expr_stmt() {
    const Token& first = peek();
    AstNode node = make(NodeKind::ExprStmt, first);
    node.children.push_back(parse_expr());
    expect_punct(";");
    return node;
  }

  AstNode parse_expr() { return parse_assignment(); }

  // assignment := ternary (("="|"+="|"-=") assignment)?
  // Compound forms desugar: a += b  =>  a = a + b.
  AstNode parse_assignment() {
    AstNode lhs = parse_ternary();
    if (check_op("=") || check_op("+=") || check_op("-=")) {
      const Token& op = advance();
      AstNode rhs = parse_assignment();
      AstNode node{NodeKind::Assign, "", {}, lhs.line, lhs.col};
      if (op.text == "=") {
        node.children.push_back(std::move(lhs));
        node.children.push_back(std::move(rhs));
      } else {
        AstNode bin{NodeKind::Binary, op.text.substr(0, 1), {}, lhs.line, lhs.col};
        bin.children.push_back(lhs);
        bin.children.push_back(std::move(rhs));
        node.children.push_back(std::move(lhs));
        node.children.push_back(std::move(bin));
      }
      return node;
    }
    return lhs;
  }

  AstNode parse_ternary() {
    AstNode cond = parse_or();
    if (check_op("?")) {
      advance();
      AstNode then_e = parse_expr();
      expect_op(":");
      AstNode else_e = parse_ternary();
      AstNode node{NodeKind::CondExpr, "", {}, cond.line, cond.col};
      node.children.push_back(std::move(cond));
      node.children.push_back(std::move(then_e));
      node.children.push_back(std::move(else_e));
      return node;
    }
    return cond;
  }

  AstNode parse_binary_level(AstNode (Parser::*next)(), std::initializer_list<std::string_view> ops) {
    AstNode lhs = (this->*next)();
    for (;;) {
      bool hit = false;
      for (auto op : ops) {
        if (check_op(op)) {
          const Token& t = advance();
          AstNode rhs = (this->*next)();
          AstNode node{NodeKind::Binary, t.text, {}, lhs.line, lhs.col};
          node.children.push_back(std::move(lhs));
          node.children.push_back(std::move(rhs));
          lhs = std::move(node);
          hit = true;
          break;
        }
      }
      if (!hit) return lhs;
    }
  }

  AstNode parse_or() { return parse_binary_level(&Parser::parse_and, {"||"}); }
  AstNode parse_and() { return parse_binary_level(&Parser::parse_equality, {"&&"}); }
  AstNode parse_equality() { return parse_binary_level(&Parser::parse_relational, {"==", "!="}); }
  AstNode parse_relational() {
    return parse_binary_level(&Parser::parse_additive, {"<=", ">=", "<", ">"});
  }
  AstNode parse_additive() { return parse_binary_level(&Parser::parse_multiplicative, {"+", "-"}); }
  AstNode parse_multiplicative() { return parse_binary_level(&Parser::parse_unary, {"*", "/", "%"}); }

  AstNode parse_unary() {
    if (check_op("!") || check_op("-")) {
      const Token& t = advance();
      AstNode node = make(NodeKind::Unary, t, t.text);
      node.children.push_back(parse_unary());
      return node;
    }
    return parse_postfix();
  }

  // Calls and indexing are postfix on primary.
  AstNode parse_postfix() {
    AstNode expr = parse_primary();
    for (;;) {
      if (check_punct("(")) {
        advance();
        AstNode args{NodeKind::ArgList, "", {}, expr.line, expr.col};
        if (!check_punct(")")) {
          args.children.push_back(parse_expr());
          while (check_punct(",")) {
            advance();
            args.children.push_back(parse_expr());
          }
        }
        expect_punct(")");
        AstNode call{NodeKind::Call, "", {}, expr.line, expr.col};
        call.children.push_back(std::move(expr));
        call.children.push_back(std::move(args));
        expr = std::move(call);
      } else if (check_punct("[")) {
        advance();
        AstNode index_e = parse_expr();
        expect_punct("]");
        AstNode index{NodeKind::Index, "", {}, expr.line, expr.col};
        index.children.push_back(std::move(expr));
        index.children.push_back(std::move(index_e));
        expr = std::move(index);
      } else {
        return expr;
      }
    }
  }

  AstNode parse_primary() {
    if (at_end()) throw err("expected expression");
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::Identifier:
        advance();
        return make(NodeKind::Identifier, t, t.text);
      case TokenKind::IntLiteral:
        advance();
        return make(NodeKind::IntLit, t, t.text);
      case TokenKind::StringLiteral:
        advance();
        return make(NodeKind::StrLit, t, t.text);
      case TokenKind::BoolLiteral:
        advance();
        return make(NodeKind::BoolLit, t, t.text);
      default:
        break;
    }
    if (check_punct("(")) {
      advance();
      AstNode inner = parse_expr();
      expect_punct(")");
      return inner;
    }
    throw err("expected expression");
  }
};

// ---- Pretty printer ----

class Printer {
 public:
  std::string print(const AstNode& node) {
    if (node.kind == NodeKind::Block) {
      // Root block: several methods print without braces, statements with.
      bool all_methods = !node.children.empty();
      for (const AstNode& c : node.children) all_methods = all_methods && c.kind == NodeKind::MethodDecl;
      if (all_methods) {
        for (const AstNode& c : node.children) stmt(c);
        return std::move(out_);
      }
    }
    stmt(node);
    return std::move(out_);
  }

 private:
  std::string out_;
  int indent_ = 0;

  void line_start() { out_.append(static_cast<std::size_t>(indent_) * 2, ' '); }

  void stmt(const AstNode& n) {
    switch (n.kind) {
      case NodeKind::MethodDecl: {
        line_start();
        out_ += "void " + n.text + "(";
        for (std::size_t i = 0; i + 1 < n.children.size(); ++i) {
          if (i) out_ += ", ";
          expr(n.children[i]);
        }
        out_ += ") ";
        if (!n.children.empty())
          block_body(n.children.back());
        else
          out_ += "{\n}";
        out_ += "\n";
        return;
      }
      case NodeKind::Block:
        line_start();
        block_body(n);
        out_ += "\n";
        return;
      case NodeKind::VarDecl: {
        line_start();
        if (!n.children.empty()) expr(n.children[0]);
        out_ += " ";
        if (n.children.size() > 1) expr(n.children[1]);
        if (n.children.size() > 2) {
          out_ += " = ";
          expr(n.children[2]);
        }
        out_ += ";\n";
        return;
      }
      case NodeKind::If: {
        line_start();
        out_ += "if (";
        if (!n.children.empty()) expr(n.children[0]);
        out_ += ") ";
        if (n.children.size() > 1) block_body(n.children[1]);
        if (n.children.size() > 2) {
          out_ += " else ";
          block_body(n.children[2]);
        }
        out_ += "\n";
        return;
      }
      case NodeKind::While: {
        line_start();
        out_ += "while (";
        if (!n.children.empty()) expr(n.children[0]);
        out_ += ") ";
        if (n.children.size() > 1) block_body(n.children[1]);
        out_ += "\n";
        return;
      }
      case NodeKind::For:
        print_for(n);
        return;
      case NodeKind::Return:
        line_start();
        out_ += "return";
        if (!n.children.empty()) {
          out_ += " ";
          expr(n.children[0]);
        }
        out_ += ";\n";
        return;
      case NodeKind::Break:
        line_start();
        out_ += "break;\n";
        return;
      case NodeKind::Continue:
        line_start();
        out_ += "continue;\n";
        return;
      case NodeKind::ExprStmt:
        line_start();
        if (!n.children.empty()) expr(n.children[0]);
        out_ += ";\n";
        return;
      default:
        // Expression used in statement position (truncated trees).
        line_start();
        expr(n);
        out_ += ";\n";
        return;
    }
  }

  void block_body(const AstNode& n) {
    if (n.kind != NodeKind::Block) {
      // Non-canonical tree; print as a one-statement block.
      out_ += "{\n";
      ++indent_;
      stmt(n);
      --indent_;
      line_start();
      out_ += "}";
      return;
    }
    out_ += "{\n";
    ++indent_;
    for (const AstNode& c : n.children) stmt(c);
    --indent_;
    line_start();
    out_ += "}";
  }

  void print_for(const AstNode& n) {
    line_start();
    out_ += "for (";
    std::size_t idx = 0;
    bool has_init = idx < n.children.size() && (n.children[idx].kind == NodeKind::VarDecl ||
                                                n.children[idx].kind == NodeKind::ExprStmt);
    if (has_init) {
      const AstNode& init = n.children[idx++];
      if (init.kind == NodeKind::VarDecl) {
        if (!init.children.empty()) expr(init.children[0]);
        out_ += " ";
        if (init.children.size() > 1) expr(init.children[1]);
        if (init.children.size() > 2) {
          out_ += " = ";
          expr(init.children[2]);
        }
        out_ += ";";
      } else {
        if (!init.children.empty()) expr(init.children[0]);
        out_ += ";";
      }
    } else {
      out_ += ";";
    }
    out_ += " ";
    if (idx < n.children.size() && n.children.size() - idx >= 2) {
      expr(n.children[idx++]);
    }
    out_ += ";";
    if (n.children.size() - idx >= 2) {
      out_ += " ";
      expr(n.children[idx++]);
    }
    out_ += ") ";
    if (idx < n.children.size())
      block_body(n.children[idx]);
    else
      out_ += "{\n}";
    out_ += "\n";
  }

  // Expression precedence mirrors the parser; parenthesize when a child
  // binds looser than its context requires.
  static int precedence(const AstNode& n) {
    switch (n.kind) {
      case NodeKind::Assign:
        return 1;
      case NodeKind::CondExpr:
        return 2;
      case NodeKind::Binary: {
        const std::string& op = n.text;
        if (op == "||") return 3;
        if (op == "&&") return 4;
        if (op == "==" || op == "!=") return 5;
        if (op == "<" || op == ">" || op == "<=" || op == ">=") return 6;
        if (op == "+" || op == "-") return 7;
        return 8;  // * / %
      }
      case NodeKind::Unary:
        return 9;
      default:
        return 10;  // postfix and primary
    }
  }

  void child_expr(const AstNode& child, int min_prec) {
    if (precedence(child) < min_prec) {
      out_ += "(";
      expr(child);
      out_ += ")";
    } else {
      expr(child);
    }
  }

  void expr(const AstNode& n) {
    switch (n.kind) {
      case NodeKind::Identifier:
        out_ += n.text;
        return;
      case NodeKind::IntLit:
        out_ += n.text;
        return;
      case NodeKind::BoolLit:
        out_ += n.text;
        return;
      case NodeKind::StrLit: {
        out_ += '"';
        for (char c : n.text) {
          if (c == '"' || c == '\\') out_ += '\\';
          out_ += c;
        }
        out_ += '"';
        return;
      }
      case NodeKind::PrimType:
        out_ += n.text;
        return;
      case NodeKind::ArrayType:
        if (!n.children.empty()) expr(n.children[0]);
        out_ += "[]";
        return;
      case NodeKind::Param:
        if (!n.children.empty()) expr(n.children[0]);
        out_ += " ";
        if (n.children.size() > 1) expr(n.children[1]);
        return;
      case NodeKind::Assign:
        if (!n.children.empty()) child_expr(n.children[0], 2);
        out_ += " = ";
        if (n.children.size() > 1) child_expr(n.children[1], 1);
        return;
      case NodeKind::CondExpr:
        if (!n.children.empty()) child_expr(n.children[0], 3);
        out_ += " ? ";
        if (n.children.size() > 1) expr(n.children[1]);
        out_ += " : ";
        if (n.children.size() > 2) child_expr(n.children[2], 2);
        return;
      case NodeKind::Binary: {
        int p = precedence(n);
        if (!n.children.empty()) child_expr(n.children[0], p);
        out_ += " " + n.text + " ";
        // Left-associative: right child needs strictly higher precedence.
        if (n.children.size() > 1) child_expr(n.children[1], p + 1);
        return;
      }
      case NodeKind::Unary:
        out_ += n.text;
        if (!n.children.empty()) child_expr(n.children[0], 9);
        return;
      case NodeKind::Call:
        if (!n.children.empty()) child_expr(n.children[0], 10);
        out_ += "(";
        if (n.children.size() > 1) {
          const AstNode& args = n.children[1];
          for (std::size_t i = 0; i < args.children.size(); ++i) {
            if (i) out_ += ", ";
            expr(args.children[i]);
          }
        }
        out_ += ")";
        return;
      case NodeKind::Index:
        if (!n.children.empty()) child_expr(n.children[0], 10);
        out_ += "[";
        if (n.children.size() > 1) expr(n.children[1]);
        out_ += "]";
        return;
      case NodeKind::ArgList:
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          if (i) out_ += ", ";
          expr(n.children[i]);
        }
        return;
      default:
        // Statement node in expression position (truncated trees): emit
        // nothing rather than invalid source.
        return;
    }
  }
};

}  // namespace

AstNode parse(std::string_view source) {
  Parser parser(tokenize(source));
  return parser.parse_program();
}

std::string pretty_print(const AstNode& node) {
  Printer p;
  return p.print(node);
}

bool structurally_equal(const AstNode& a, const AstNode& b) {
  if (a.kind != b.kind || a.text != b.text || a.children.size() != b.children.size()) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i)
    if (!structurally_equal(a.children[i], b.children[i])) return false;
  return true;
}

std::size_t tree_size(const AstNode& node) {
  std::size_t n = 1;
  for (const AstNode& c : node.children) n += tree_size(c);
  return n;
}

}  // namespace codekc::minilang
