#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace codekc::minilang {

enum class TokenKind { Keyword, Identifier, IntLiteral, StringLiteral, BoolLiteral, Operator, Punct };

struct Token {
  TokenKind kind;
  std::string text;
  int line = 1;
  int col = 1;
};

// The full node-kind catalog. Every tree the parser produces is closed over
// these 24 kinds.
enum class NodeKind {
  MethodDecl,
  Param,
  Block,
  VarDecl,
  Assign,
  If,
  While,
  For,
  Return,
  ExprStmt,
  Call,
  Index,
  Binary,
  Unary,
  Identifier,
  IntLit,
  StrLit,
  BoolLit,
  ArrayType,
  PrimType,
  CondExpr,
  Break,
  Continue,
  ArgList,
};

struct AstNode {
  NodeKind kind;
  std::string text;  // identifier / literal / operator lexeme, empty otherwise
  std::vector<AstNode> children;
  int line = 0;  // span of the first token
  int col = 0;
};

const char* node_kind_name(NodeKind kind);
std::optional<NodeKind> node_kind_from_name(std::string_view name);
bool is_leaf_kind(NodeKind kind);

// Lexer. Strips // and /* */ comments; throws SyntaxError on illegal
// characters, unterminated strings/comments, or unknown escapes.
std::vector<Token> tokenize(std::string_view source);

// Recursive-descent parser for the mini-language. Roots at MethodDecl for a
// single method, Block otherwise (bare statement list or several methods).
// Throws SyntaxError with an expected-token message and position; never
// returns a partial tree.
//
// The parser canonicalizes: non-block bodies of if/else/while/for are wrapped
// in a Block, `+=`/`-=` desugar to plain assignment of a Binary, and a missing
// for-condition becomes BoolLit true. Canonical trees are what pretty_print
// emits, which is what makes parse-print-parse a structural identity.
AstNode parse(std::string_view source);

// Canonical source form: explicit braces always, one statement per line.
// Re-parsing the output yields a structurally identical tree. Tolerates
// truncated trees (missing operands print as empty).
std::string pretty_print(const AstNode& node);

// Same kinds, same child shapes, same lexemes.
bool structurally_equal(const AstNode& a, const AstNode& b);

// Total node count of the tree rooted at `node`.
std::size_t tree_size(const AstNode& node);

}  // namespace codekc::minilang
