#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "codekc/minilang.hpp"

namespace codekc::pattern {

struct SubmissionRef {
  std::string student_id;
  std::string problem_id;
  int attempt = 1;

  auto operator<=>(const SubmissionRef&) const = default;
};

// An anchored subtree: an anchor node plus its descendants in pre-order,
// truncated to max_nodes. `tree` is the subtree's own (possibly truncated)
// copy, so it can be serialized, normalized and printed independently.
struct Subtree {
  minilang::AstNode tree;
  std::size_t position = 0;  // pre-order index of the anchor in the source AST
  std::string canon;
};

struct SubtreeSequence {
  std::vector<Subtree> subtrees;  // ordered by position
  SubmissionRef submission;
};

std::vector<minilang::NodeKind> default_anchor_kinds();

struct ExtractOptions {
  std::size_t max_nodes = 100;     // per-subtree node cap
  std::size_t max_subtrees = 100;  // per-sequence cap, earliest kept
  std::vector<minilang::NodeKind> anchors = default_anchor_kinds();
};

// One subtree per anchor node (VarDecl anchors only when it has an
// initializer), ordered by anchor pre-order position.
SubtreeSequence extract_subtrees(const minilang::AstNode& ast, const ExtractOptions& opts = {});

// Deterministic parenthesized pre-order serialization:
//   Kind[:lexeme]              for childless nodes
//   Kind[:lexeme](c1,c2,...)   otherwise
// Lexemes are escaped so the form stays injective and parseable.
std::string serialize_subtree(const minilang::AstNode& root);

// Inverse of serialize_subtree. Throws ValidationError on malformed input.
minilang::AstNode parse_canon(std::string_view canon);

// Placeholder normalization: Identifier -> ID (FUNC in callee position),
// IntLit -> LIT_INT, StrLit -> LIT_STR, BoolLit -> LIT_BOOL. Operators, type
// names and node kinds untouched. Idempotent and shape-preserving.
minilang::AstNode normalize_tree(minilang::AstNode tree);
Subtree normalize_subtree(Subtree subtree);
SubtreeSequence normalize_sequence(SubtreeSequence seq);

// Two-way vocabulary. Node ids key on "Kind" or "Kind:lexeme-class" of
// normalized nodes; subtree ids key on normalized canon strings. Id 0 is
// padding, id 1 unknown; real entries start at 2 in first-seen order.
struct Vocab {
  static constexpr int kPadding = 0;
  static constexpr int kUnknown = 1;

  std::vector<std::string> node_keys;     // index = id
  std::vector<std::string> subtree_keys;  // index = id
  std::map<std::string, int> node_ids;
  std::map<std::string, int> subtree_ids;

  int node_size() const { return static_cast<int>(node_keys.size()); }
  int subtree_size() const { return static_cast<int>(subtree_keys.size()); }

  int node_id(const std::string& key) const;
  int subtree_id(const std::string& canon) const;
  const std::string& subtree_key(int id) const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);
};

std::string node_vocab_key(const minilang::AstNode& node);

// Built over normalized forms of the given (training) sequences.
Vocab build_vocab(std::span<const SubtreeSequence> sequences);

struct EncodedSequence {
  Eigen::MatrixXi node_ids;     // max_subtrees x max_nodes, 0-padded
  Eigen::VectorXi subtree_ids;  // max_subtrees, 0-padded
  std::vector<std::uint8_t> mask;
  std::vector<int> node_len;  // real node count per slot
  int len = 0;                // real subtree count
};

EncodedSequence encode_sequence(const SubtreeSequence& seq, const Vocab& vocab,
                                std::size_t max_subtrees, std::size_t max_nodes);

// Encode one canon string as a length-1 sequence (used for per-subtree
// latents and representative lookups).
EncodedSequence encode_canon(const std::string& normalized_canon, const Vocab& vocab,
                             std::size_t max_nodes);

}  // namespace codekc::pattern
