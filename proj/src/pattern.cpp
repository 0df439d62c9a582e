#include "codekc/pattern.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "codekc/errors.hpp"
#include "json.hpp"

namespace codekc::pattern {

using minilang::AstNode;
using minilang::NodeKind;

std::vector<NodeKind> default_anchor_kinds() {
  return {NodeKind::MethodDecl, NodeKind::If,   NodeKind::While,   NodeKind::For, NodeKind::Return,
          NodeKind::Assign,     NodeKind::VarDecl, NodeKind::Call, NodeKind::CondExpr};
}

namespace {

// Copies the subtree rooted at `node` in pre-order, dropping nodes past the
// budget. Children that fall entirely past the cut are omitted.
void copy_capped(const AstNode& node, AstNode& out, std::size_t& budget) {
  // Caller has already spent one unit on `node` itself.
  out.kind = node.kind;
  out.text = node.text;
  out.line = node.line;
  out.col = node.col;
  for (const AstNode& child : node.children) {
    if (budget == 0) break;
    --budget;
    out.children.emplace_back();
    copy_capped(child, out.children.back(), budget);
  }
}

bool is_anchor(const AstNode& node, const std::vector<NodeKind>& anchors) {
  for (NodeKind k : anchors) {
    if (node.kind != k) continue;
    // VarDecl anchors only with an initializer (type, name, init).
    if (k == NodeKind::VarDecl) return node.children.size() >= 3;
    return true;
  }
  return false;
}

void walk_anchors(const AstNode& node, const ExtractOptions& opts, std::size_t& preorder,
                  std::vector<Subtree>& out) {
  std::size_t position = preorder++;
  if (is_anchor(node, opts.anchors) && out.size() < opts.max_subtrees) {
    Subtree st;
    st.position = position;
    std::size_t budget = opts.max_nodes == 0 ? 0 : opts.max_nodes - 1;
    copy_capped(node, st.tree, budget);
    st.canon = serialize_subtree(st.tree);
    out.push_back(std::move(st));
  }
  for (const AstNode& child : node.children) walk_anchors(child, opts, preorder, out);
}

void escape_into(const std::string& lexeme, std::string& out) {
  for (char c : lexeme) {
    if (c == '\\' || c == '(' || c == ')' || c == ',' || c == ':') out += '\\';
    out += c;
  }
}

void serialize_into(const AstNode& node, std::string& out) {
  out += minilang::node_kind_name(node.kind);
  if (!node.text.empty()) {
    out += ':';
    escape_into(node.text, out);
  }
  if (!node.children.empty()) {
    out += '(';
    for (std::size_t i = 0; i < node.children.size(); ++i) {
      if (i) out += ',';
      serialize_into(node.children[i], out);
    }
    out += ')';
  }
}

class CanonParser {
 public:
  explicit CanonParser(std::string_view s) : s_(s) {}

  AstNode parse() {
    AstNode node = parse_node();
    if (pos_ != s_.size()) throw ValidationError("canon: trailing characters at offset " + std::to_string(pos_));
    return node;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  AstNode parse_node() {
    std::string kind_name;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      kind_name += s_[pos_++];
    auto kind = minilang::node_kind_from_name(kind_name);
    if (!kind) throw ValidationError("canon: unknown node kind '" + kind_name + "'");
    AstNode node;
    node.kind = *kind;
    if (peek() == ':') {
      ++pos_;
      while (pos_ < s_.size()) {
        char c = s_[pos_];
        if (c == '(' || c == ')' || c == ',') break;
        if (c == '\\') {
          ++pos_;
          if (pos_ >= s_.size()) throw ValidationError("canon: dangling escape");
          node.text += s_[pos_++];
          continue;
        }
        if (c == ':') throw ValidationError("canon: unescaped ':' in lexeme");
        node.text += c;
        ++pos_;
      }
    }
    if (peek() == '(') {
      ++pos_;
      for (;;) {
        node.children.push_back(parse_node());
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        if (peek() == ')') {
          ++pos_;
          break;
        }
        throw ValidationError("canon: expected ',' or ')' at offset " + std::to_string(pos_));
      }
    }
    return node;
  }
};

void normalize_in_place(AstNode& node, bool callee_position) {
  switch (node.kind) {
    case NodeKind::Identifier:
      node.text = callee_position ? "FUNC" : "ID";
      break;
    case NodeKind::IntLit:
      node.text = "LIT_INT";
      break;
    case NodeKind::StrLit:
      node.text = "LIT_STR";
      break;
    case NodeKind::BoolLit:
      node.text = "LIT_BOOL";
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    bool callee = node.kind == NodeKind::Call && i == 0;
    normalize_in_place(node.children[i], callee);
  }
}

void collect_node_ids(const AstNode& node, const Vocab& vocab, Eigen::MatrixXi& grid, int row,
                      int& col, int max_nodes) {
  if (col >= max_nodes) return;
  grid(row, col++) = vocab.node_id(node_vocab_key(node));
  for (const AstNode& child : node.children) collect_node_ids(child, vocab, grid, row, col, max_nodes);
}

void collect_node_keys(const AstNode& node, std::vector<std::string>& keys) {
  keys.push_back(node_vocab_key(node));
  for (const AstNode& child : node.children) collect_node_keys(child, keys);
}

}  // namespace

SubtreeSequence extract_subtrees(const AstNode& ast, const ExtractOptions& opts) {
  SubtreeSequence seq;
  std::size_t preorder = 0;
  walk_anchors(ast, opts, preorder, seq.subtrees);
  return seq;
}

std::string serialize_subtree(const AstNode& root) {
  std::string out;
  serialize_into(root, out);
  return out;
}

AstNode parse_canon(std::string_view canon) { return CanonParser(canon).parse(); }

AstNode normalize_tree(AstNode tree) {
  normalize_in_place(tree, false);
  return tree;
}

Subtree normalize_subtree(Subtree subtree) {
  normalize_in_place(subtree.tree, false);
  subtree.canon = serialize_subtree(subtree.tree);
  return subtree;
}

SubtreeSequence normalize_sequence(SubtreeSequence seq) {
  for (Subtree& st : seq.subtrees) st = normalize_subtree(std::move(st));
  return seq;
}

std::string node_vocab_key(const AstNode& node) {
  std::string key = minilang::node_kind_name(node.kind);
  if (!node.text.empty()) {
    key += ':';
    key += node.text;
  }
  return key;
}

int Vocab::node_id(const std::string& key) const {
  auto it = node_ids.find(key);
  return it == node_ids.end() ? kUnknown : it->second;
}

int Vocab::subtree_id(const std::string& canon) const {
  auto it = subtree_ids.find(canon);
  return it == subtree_ids.end() ? kUnknown : it->second;
}

const std::string& Vocab::subtree_key(int id) const {
  if (id < 0 || id >= subtree_size())
    throw ValidationError("subtree id " + std::to_string(id) + " out of range");
  return subtree_keys[static_cast<std::size_t>(id)];
}

void Vocab::save(const std::string& path) const {
  nlohmann::json j;
  j["node_vocab"] = nlohmann::json::object();
  j["subtree_vocab"] = nlohmann::json::object();
  for (const auto& [key, id] : node_ids) j["node_vocab"][key] = id;
  for (const auto& [key, id] : subtree_ids) j["subtree_vocab"][key] = id;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write vocab file: " + path);
  out << j.dump(2) << "\n";
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StageError("missing vocab file: " + path);
  nlohmann::json j;
  in >> j;
  Vocab v;
  auto fill = [](const nlohmann::json& obj, std::map<std::string, int>& ids,
                 std::vector<std::string>& keys) {
    std::size_t size = obj.size();
    keys.assign(size, "");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      int id = it.value().get<int>();
      ids[it.key()] = id;
      if (id < 0 || static_cast<std::size_t>(id) >= size)
        throw ValidationError("vocab file has non-dense ids");
      keys[static_cast<std::size_t>(id)] = it.key();
    }
  };
  fill(j.at("node_vocab"), v.node_ids, v.node_keys);
  fill(j.at("subtree_vocab"), v.subtree_ids, v.subtree_keys);
  return v;
}

Vocab build_vocab(std::span<const SubtreeSequence> sequences) {
  Vocab v;
  v.node_keys = {"<pad>", "<unk>"};
  v.subtree_keys = {"<pad>", "<unk>"};
  v.node_ids = {{"<pad>", 0}, {"<unk>", 1}};
  v.subtree_ids = {{"<pad>", 0}, {"<unk>", 1}};
  for (const SubtreeSequence& seq : sequences) {
    for (const Subtree& st : seq.subtrees) {
      AstNode norm = normalize_tree(st.tree);
      std::string canon = serialize_subtree(norm);
      if (v.subtree_ids.emplace(canon, v.subtree_size()).second) v.subtree_keys.push_back(canon);
      std::vector<std::string> keys;
      collect_node_keys(norm, keys);
      for (std::string& key : keys) {
        if (v.node_ids.emplace(key, v.node_size()).second) v.node_keys.push_back(std::move(key));
      }
    }
  }
  return v;
}

EncodedSequence encode_sequence(const SubtreeSequence& seq, const Vocab& vocab,
                                std::size_t max_subtrees, std::size_t max_nodes) {
  EncodedSequence enc;
  int rows = static_cast<int>(max_subtrees);
  int cols = static_cast<int>(max_nodes);
  enc.node_ids = Eigen::MatrixXi::Zero(rows, cols);
  enc.subtree_ids = Eigen::VectorXi::Zero(rows);
  enc.mask.assign(max_subtrees, 0);
  enc.node_len.assign(max_subtrees, 0);
  enc.len = static_cast<int>(std::min(seq.subtrees.size(), max_subtrees));
  for (int s = 0; s < enc.len; ++s) {
    AstNode norm = normalize_tree(seq.subtrees[static_cast<std::size_t>(s)].tree);
    enc.subtree_ids(s) = vocab.subtree_id(serialize_subtree(norm));
    int col = 0;
    collect_node_ids(norm, vocab, enc.node_ids, s, col, cols);
    enc.node_len[static_cast<std::size_t>(s)] = col;
    enc.mask[static_cast<std::size_t>(s)] = 1;
  }
  return enc;
}

EncodedSequence encode_canon(const std::string& normalized_canon, const Vocab& vocab,
                             std::size_t max_nodes) {
  SubtreeSequence seq;
  Subtree st;
  st.tree = parse_canon(normalized_canon);
  st.canon = normalized_canon;
  seq.subtrees.push_back(std::move(st));
  return encode_sequence(seq, vocab, 1, max_nodes);
}

}  // namespace codekc::pattern
