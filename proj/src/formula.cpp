#include "auditkit/formula.hpp"

#include <cctype>
#include <charconv>
#include <functional>

#include "auditkit/error.hpp"

namespace auditkit {

std::string_view op_text(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Pow: return "^";
    case BinaryOp::Concat: return "&";
    case BinaryOp::Eq: return "=";
    case BinaryOp::Ne: return "<>";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
  }
  return "?";
}

bool is_comparison(BinaryOp op) {
  return op == BinaryOp::Eq || op == BinaryOp::Ne || op == BinaryOp::Lt || op == BinaryOp::Le ||
         op == BinaryOp::Gt || op == BinaryOp::Ge;
}

bool operator==(const Node& a, const Node& b) {
  if (a.v.index() != b.v.index()) return false;
  return std::visit(
      [&b](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const T& y = std::get<T>(b.v);
        if constexpr (std::is_same_v<T, LiteralNode>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, RefNode>) {
          return x.ref == y.ref;
        } else if constexpr (std::is_same_v<T, RangeNode>) {
          return x.range == y.range;
        } else if constexpr (std::is_same_v<T, NameNode>) {
          return x.name == y.name;
        } else if constexpr (std::is_same_v<T, UnaryNode>) {
          return x.op == y.op && *x.child == *y.child;
        } else if constexpr (std::is_same_v<T, BinaryNode>) {
          return x.op == y.op && *x.lhs == *y.lhs && *x.rhs == *y.rhs;
        } else {
          if (x.name != y.name || x.args.size() != y.args.size()) return false;
          for (std::size_t i = 0; i < x.args.size(); ++i) {
            if (!(*x.args[i] == *y.args[i])) return false;
          }
          return true;
        }
      },
      a.v);
}

namespace ast {
NodePtr literal(CellValue v) { return std::make_shared<const Node>(Node{LiteralNode{std::move(v)}}); }
NodePtr number(double d) { return literal(CellValue{d}); }
NodePtr ref(CellRef r) { return std::make_shared<const Node>(Node{RefNode{std::move(r)}}); }
NodePtr range(Range r) { return std::make_shared<const Node>(Node{RangeNode{std::move(r)}}); }
NodePtr name(std::string n) { return std::make_shared<const Node>(Node{NameNode{std::move(n)}}); }
NodePtr unary(UnaryOp op, NodePtr child) {
  return std::make_shared<const Node>(Node{UnaryNode{op, std::move(child)}});
}
NodePtr binary(BinaryOp op, NodePtr lhs, NodePtr rhs) {
  return std::make_shared<const Node>(Node{BinaryNode{op, std::move(lhs), std::move(rhs)}});
}
NodePtr call(std::string fn, std::vector<NodePtr> args) {
  return std::make_shared<const Node>(Node{CallNode{to_upper(fn), std::move(args)}});
}
}  // namespace ast

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  FormulaAst parse() {
    skip_ws();
    if (!eat('=')) fail("'='");
    NodePtr root = comparison();
    skip_ws();
    if (pos_ != src_.size()) fail("operator or end of input");
    return FormulaAst(std::move(root));
  }

 private:
  [[noreturn]] void fail(const std::string& expected) const { throw SyntaxError(pos_, expected); }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }
  char peek() {
    skip_ws();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }
  bool eat(char c) {
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr comparison() {
    NodePtr lhs = concat();
    for (;;) {
      char c = peek();
      BinaryOp op;
      if (c == '=') {
        op = BinaryOp::Eq;
        ++pos_;
      } else if (c == '<') {
        ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '=') {
          op = BinaryOp::Le;
          ++pos_;
        } else if (pos_ < src_.size() && src_[pos_] == '>') {
          op = BinaryOp::Ne;
          ++pos_;
        } else {
          op = BinaryOp::Lt;
        }
      } else if (c == '>') {
        ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '=') {
          op = BinaryOp::Ge;
          ++pos_;
        } else {
          op = BinaryOp::Gt;
        }
      } else {
        return lhs;
      }
      lhs = ast::binary(op, lhs, concat());
    }
  }

  NodePtr concat() {
    NodePtr lhs = additive();
    while (eat('&')) lhs = ast::binary(BinaryOp::Concat, lhs, additive());
    return lhs;
  }

  NodePtr additive() {
    NodePtr lhs = multiplicative();
    for (;;) {
      if (eat('+')) {
        lhs = ast::binary(BinaryOp::Add, lhs, multiplicative());
      } else if (eat('-')) {
        lhs = ast::binary(BinaryOp::Sub, lhs, multiplicative());
      } else {
        return lhs;
      }
    }
  }

  NodePtr multiplicative() {
    NodePtr lhs = power();
    for (;;) {
      if (eat('*')) {
        lhs = ast::binary(BinaryOp::Mul, lhs, power());
      } else if (eat('/')) {
        lhs = ast::binary(BinaryOp::Div, lhs, power());
      } else {
        return lhs;
      }
    }
  }

  NodePtr power() {
    NodePtr lhs = unary();
    while (eat('^')) lhs = ast::binary(BinaryOp::Pow, lhs, unary());
    return lhs;
  }

  NodePtr unary() {
    if (eat('-')) return ast::unary(UnaryOp::Neg, unary());
    if (eat('+')) return ast::unary(UnaryOp::Plus, unary());
    return primary();
  }

  NodePtr primary() {
    char c = peek();
    if (c == '\0') fail("operand");
    if (c == '(') {
      ++pos_;
      NodePtr inner = comparison();
      if (!eat(')')) fail("')'");
      return inner;
    }
    if (c == '"') return string_literal();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number_literal();
    if (c == '#') return error_literal();
    if (c == '\'') {
      std::string sheet = quoted_sheet();
      return reference(sheet);
    }
    if (is_ident_start(c)) return identifier();
    fail("operand");
  }

  NodePtr string_literal() {
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < src_.size()) {
      char c = src_[pos_++];
      if (c == '"') {
        if (pos_ < src_.size() && src_[pos_] == '"') {
          out += '"';
          ++pos_;
          continue;
        }
        return ast::literal(CellValue{std::move(out)});
      }
      out += c;
    }
    fail("closing '\"'");
  }

  NodePtr number_literal() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    double d = 0;
    auto res = std::from_chars(src_.data() + start, src_.data() + pos_, d);
    if (res.ec != std::errc() || res.ptr != src_.data() + pos_) {
      pos_ = start;
      fail("number");
    }
    return ast::number(d);
  }

  NodePtr error_literal() {
    for (auto code : {ErrorCode::Div0, ErrorCode::Value, ErrorCode::Ref, ErrorCode::Name,
                      ErrorCode::Cycle}) {
      auto text = error_text(code);
      if (src_.size() - pos_ >= text.size() && iequals(src_.substr(pos_, text.size()), text)) {
        pos_ += text.size();
        return ast::literal(CellValue{code});
      }
    }
    fail("error literal");
  }

  std::string quoted_sheet() {
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < src_.size()) {
      char c = src_[pos_++];
      if (c == '\'') {
        if (pos_ < src_.size() && src_[pos_] == '\'') {
          out += '\'';
          ++pos_;
          continue;
        }
        if (pos_ >= src_.size() || src_[pos_] != '!') fail("'!' after sheet name");
        ++pos_;
        return out;
      }
      out += c;
    }
    fail("closing quote of sheet name");
  }

  std::string_view read_word() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
    return src_.substr(start, pos_ - start);
  }

  // Cell or range reference after an optional sheet prefix.
  NodePtr reference(const std::string& sheet) {
    std::size_t start = pos_;
    auto first = parse_a1(read_word());
    if (!first) {
      pos_ = start;
      fail("cell reference");
    }
    first->sheet = sheet;
    if (pos_ < src_.size() && src_[pos_] == ':') {
      ++pos_;
      std::size_t second_start = pos_;
      auto second = parse_a1(read_word());
      if (!second || !second->sheet.empty()) {
        pos_ = second_start;
        fail("cell reference after ':'");
      }
      second->sheet = sheet;
      return ast::range(Range{*first, *second});
    }
    return ast::ref(*first);
  }

  NodePtr identifier() {
    std::size_t start = pos_;
    std::string_view word = read_word();
    if (pos_ < src_.size() && src_[pos_] == '!') {
      if (word.find('$') != std::string_view::npos) {
        pos_ = start;
        fail("sheet name");
      }
      ++pos_;
      return reference(std::string(word));
    }
    bool plain = word.find('$') == std::string_view::npos;
    std::size_t after_word = pos_;
    if (plain && peek() == '(') {
      ++pos_;
      std::vector<NodePtr> args;
      if (!eat(')')) {
        do {
          args.push_back(comparison());
        } while (eat(','));
        if (!eat(')')) fail("',' or ')'");
      }
      return ast::call(std::string(word), std::move(args));
    }
    pos_ = after_word;
    if (parse_a1(word)) {
      pos_ = start;
      return reference("");
    }
    if (!plain) {
      pos_ = start;
      fail("cell reference");
    }
    if (iequals(word, "TRUE")) return ast::literal(CellValue{true});
    if (iequals(word, "FALSE")) return ast::literal(CellValue{false});
    return ast::name(std::string(word));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

int precedence(const Node& n) {
  if (auto* b = std::get_if<BinaryNode>(&n.v)) {
    switch (b->op) {
      case BinaryOp::Pow: return 5;
      case BinaryOp::Mul:
      case BinaryOp::Div: return 4;
      case BinaryOp::Add:
      case BinaryOp::Sub: return 3;
      case BinaryOp::Concat: return 2;
      default: return 1;
    }
  }
  if (std::holds_alternative<UnaryNode>(n.v)) return 6;
  return 7;
}

using RefPrinter = std::function<std::string(const CellRef&)>;
using RangePrinter = std::function<std::string(const Range&)>;

std::string quote_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    out += c;
    if (c == '"') out += '"';
  }
  return out + "\"";
}

void print_into(const Node& n, std::string& out, const RefPrinter& pref, const RangePrinter& prange) {
  if (auto* lit = std::get_if<LiteralNode>(&n.v)) {
    if (is_text(lit->value)) {
      out += quote_string(std::get<std::string>(lit->value));
    } else {
      out += display_value(lit->value);
    }
  } else if (auto* r = std::get_if<RefNode>(&n.v)) {
    out += pref(r->ref);
  } else if (auto* rg = std::get_if<RangeNode>(&n.v)) {
    out += prange(rg->range);
  } else if (auto* nm = std::get_if<NameNode>(&n.v)) {
    out += nm->name;
  } else if (auto* u = std::get_if<UnaryNode>(&n.v)) {
    out += u->op == UnaryOp::Neg ? '-' : '+';
    bool parens = precedence(*u->child) < 6;
    if (parens) out += '(';
    print_into(*u->child, out, pref, prange);
    if (parens) out += ')';
  } else if (auto* b = std::get_if<BinaryNode>(&n.v)) {
    int p = precedence(n);
    bool lp = precedence(*b->lhs) < p;
    bool rp = precedence(*b->rhs) <= p;
    if (lp) out += '(';
    print_into(*b->lhs, out, pref, prange);
    if (lp) out += ')';
    out += op_text(b->op);
    if (rp) out += '(';
    print_into(*b->rhs, out, pref, prange);
    if (rp) out += ')';
  } else if (auto* c = std::get_if<CallNode>(&n.v)) {
    out += c->name;
    out += '(';
    for (std::size_t i = 0; i < c->args.size(); ++i) {
      if (i) out += ',';
      print_into(*c->args[i], out, pref, prange);
    }
    out += ')';
  }
}

std::string relative_part(const CellRef& holder, const CellRef& r) {
  std::string out = "R";
  out += r.row_absolute ? std::to_string(r.row) : "[" + std::to_string(r.row - holder.row) + "]";
  out += "C";
  out += r.col_absolute ? std::to_string(r.col) : "[" + std::to_string(r.col - holder.col) + "]";
  return out;
}

std::string sheet_prefix(const CellRef& r) {
  return r.sheet.empty() ? std::string() : quote_sheet(to_upper(r.sheet)) + "!";
}

}  // namespace

FormulaAst parse_formula(std::string_view src) { return Parser(src).parse(); }

std::string print_node(const Node& node) {
  std::string out;
  print_into(
      node, out, [](const CellRef& r) { return to_a1(r); },
      [](const Range& r) { return to_a1(r); });
  return out;
}

std::string print_formula(const FormulaAst& formula) { return "=" + print_node(formula.root()); }

std::string normalize_relative(const CellRef& holder, const FormulaAst& formula) {
  std::string out = "=";
  print_into(
      formula.root(), out,
      [&holder](const CellRef& r) { return sheet_prefix(r) + relative_part(holder, r); },
      [&holder](const Range& r) {
        return sheet_prefix(r.start) + relative_part(holder, r.start) + ":" +
               relative_part(holder, r.end);
      });
  return out;
}

namespace {

void expand(const Range& range, const std::string& sheet, std::set<CellRef>& out) {
  Range n = range.normalized();
  for (int row = n.start.row; row <= n.end.row; ++row) {
    for (int col = n.start.col; col <= n.end.col; ++col) {
      out.insert(CellRef{sheet, col, row, false, false});
    }
  }
}

}  // namespace

std::set<CellRef> references_of(const FormulaAst& formula, const CellRef& holder,
                                const NamedRanges& names) {
  std::set<CellRef> out;
  visit_nodes(formula.root(), [&](const Node& n) {
    if (auto* r = std::get_if<RefNode>(&n.v)) {
      CellRef p = r->ref.position();
      if (p.sheet.empty()) p.sheet = holder.sheet;
      out.insert(p);
    } else if (auto* rg = std::get_if<RangeNode>(&n.v)) {
      expand(rg->range, rg->range.start.sheet.empty() ? holder.sheet : rg->range.start.sheet, out);
    } else if (auto* nm = std::get_if<NameNode>(&n.v)) {
      auto it = names.find(nm->name);
      if (it == names.end()) throw UnknownName("unknown name: " + nm->name);
      expand(it->second, it->second.start.sheet, out);
    }
  });
  return out;
}

}  // namespace auditkit
