#pragma once

#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lcnr/errors.hpp"
#include "lcnr/tensor.hpp"

namespace lcnr::logic {

enum class DistanceKind { euclidean, manhattan, minkowski };
enum class Transform { exp_neg, inverse };

struct Predicate {
  DistanceKind distance = DistanceKind::euclidean;
  double minkowski_p = 2.0;
  Transform transform = Transform::exp_neg;
  double alpha = 1.0;

  void validate() const {
    if (alpha <= 0.0) throw ConfigError("predicate scale alpha must be positive");
    if (distance == DistanceKind::minkowski && minkowski_p < 1.0)
      throw ConfigError("minkowski order must be >= 1");
  }

  // Four named configurations; the minkowski pair differs from the plain
  // euclidean/manhattan ones only in the default scale.
  static Predicate named(std::string_view name) {
    Predicate p;
    if (name == "euclidean") {
      p.distance = DistanceKind::euclidean;
      p.alpha = 1.0;
    } else if (name == "manhattan") {
      p.distance = DistanceKind::manhattan;
      p.alpha = 1.0;
    } else if (name == "minkowski1") {
      p.distance = DistanceKind::minkowski;
      p.minkowski_p = 1.0;
      p.alpha = 0.5;
    } else if (name == "minkowski2") {
      p.distance = DistanceKind::minkowski;
      p.minkowski_p = 2.0;
      p.alpha = 0.5;
    } else {
      throw ConfigError("unknown predicate '" + std::string(name) +
                        "' (expected euclidean, manhattan, minkowski1 or minkowski2)");
    }
    return p;
  }

  std::string describe() const {
    std::string out;
    switch (distance) {
      case DistanceKind::euclidean: out = "euclidean"; break;
      case DistanceKind::manhattan: out = "manhattan"; break;
      case DistanceKind::minkowski: out = "minkowski(p=" + std::to_string(minkowski_p) + ")"; break;
    }
    out += transform == Transform::exp_neg ? " exp(-a*d)" : " 1/(1+a*d)";
    out += " alpha=" + std::to_string(alpha);
    return out;
  }
};

inline void assert_unit_range(const ad::Tensor& t, const char* where) {
  constexpr double kTol = 1e-12;
  for (double v : t.data)
    if (!(v >= -kTol && v <= 1.0 + kTol))
      throw ContractError(std::string(where) + ": truth value " + std::to_string(v) + " escapes [0,1]");
}

// Pairwise distances over the feature axis: [B,F] x [B,F] -> [B].
inline ad::NodeRef distance(const Predicate& pred, ad::NodeRef u, ad::NodeRef v) {
  const ad::Tensor& uv = u.value();
  const ad::Tensor& vv = v.value();
  if (uv.rank() != 2 || vv.rank() != 2)
    throw ShapeError("distance: need [B,F] operands, got " + ad::shape_str(uv.shape) + " and " +
                     ad::shape_str(vv.shape));
  if (uv.shape != vv.shape)
    throw ShapeError("distance: shapes " + ad::shape_str(uv.shape) + " and " + ad::shape_str(vv.shape) + " differ");
  ad::NodeRef diff = ad::sub(u, v);
  switch (pred.distance) {
    case DistanceKind::euclidean: return ad::sqrt(ad::sum_axis1(ad::mul(diff, diff)));
    case DistanceKind::manhattan: return ad::sum_axis1(ad::abs(diff));
    case DistanceKind::minkowski:
      return ad::pow(ad::sum_axis1(ad::pow(ad::abs(diff), pred.minkowski_p)), 1.0 / pred.minkowski_p);
  }
  throw ContractError("unknown distance kind");
}

// Distance-based similarity in (0,1]: exp(-a*d) or 1/(1+a*d).
inline ad::NodeRef eq_truth(const Predicate& pred, ad::NodeRef u, ad::NodeRef v) {
  pred.validate();
  ad::NodeRef d = distance(pred, u, v);
  ad::NodeRef truth = [&] {
    if (pred.transform == Transform::exp_neg) return ad::exp(ad::affine(d, -pred.alpha, 0.0));
    ad::Graph& g = *d.graph;
    ad::NodeRef ones = g.constant(ad::Tensor::full(d.value().shape, 1.0));
    return ad::div(ones, ad::affine(d, pred.alpha, 1.0));
  }();
  assert_unit_range(truth.value(), "eq");
  return truth;
}

// 1 - ((1/n) * sum (1-t)^p)^(1/p); smooth forall.
inline ad::NodeRef p_mean_error(ad::NodeRef truths, double p) {
  if (p < 1.0) throw ConfigError("aggregator exponent must be >= 1");
  if (truths.value().size() == 0) throw ContractError("p_mean_error: empty truth vector");
  assert_unit_range(truths.value(), "p_mean_error input");
  ad::NodeRef err = ad::affine(truths, -1.0, 1.0);
  ad::NodeRef agg = ad::affine(ad::pow(ad::mean_all(ad::pow(err, p)), 1.0 / p), -1.0, 1.0);
  assert_unit_range(agg.value(), "p_mean_error");
  return agg;
}

inline ad::NodeRef l_not(ad::NodeRef a) {
  assert_unit_range(a.value(), "not input");
  ad::NodeRef out = ad::affine(a, -1.0, 1.0);
  assert_unit_range(out.value(), "not");
  return out;
}
inline ad::NodeRef l_and(ad::NodeRef a, ad::NodeRef b) {
  assert_unit_range(a.value(), "and input");
  assert_unit_range(b.value(), "and input");
  ad::NodeRef out = ad::mul(a, b);
  assert_unit_range(out.value(), "and");
  return out;
}
inline ad::NodeRef l_or(ad::NodeRef a, ad::NodeRef b) {
  assert_unit_range(a.value(), "or input");
  assert_unit_range(b.value(), "or input");
  // a + b - a*b
  ad::NodeRef out = ad::sub(ad::add(a, b), ad::mul(a, b));
  assert_unit_range(out.value(), "or");
  return out;
}
inline ad::NodeRef l_implies(ad::NodeRef a, ad::NodeRef b) {
  assert_unit_range(a.value(), "implies input");
  assert_unit_range(b.value(), "implies input");
  // 1 - a + a*b
  ad::NodeRef out = ad::add(ad::affine(a, -1.0, 1.0), ad::mul(a, b));
  assert_unit_range(out.value(), "implies");
  return out;
}

// ---------------------------------------------------------------------------
// Formula AST and grounding

struct Term {
  std::string symbol;          // variable, or function name when applied
  std::string argument;        // variable the function is applied to
  bool is_application = false;
};

struct FormulaNode {
  enum class Kind { predicate_app, negation, conjunction, disjunction, implication, forall_diag };
  Kind kind = Kind::predicate_app;

  std::string predicate_name;  // predicate_app
  Term lhs, rhs;               // predicate_app

  std::vector<std::unique_ptr<FormulaNode>> children;

  std::string var_x, var_y;    // forall_diag
  double aggregator_p = 2.0;   // forall_diag
};

struct Formula {
  std::unique_ptr<FormulaNode> root;

  FormulaNode& forall() const {
    if (!root || root->kind != FormulaNode::Kind::forall_diag)
      throw ContractError("formula root must be a forall over diag");
    return *root;
  }
};

using FunctionSymbol = std::function<ad::NodeRef(ad::Graph&, ad::NodeRef)>;

struct Grounding {
  std::map<std::string, ad::Tensor> variables;     // name -> [B,F]
  std::map<std::string, FunctionSymbol> functions; // name -> differentiable map
  std::map<std::string, Predicate> predicates;     // name -> similarity predicate
};

// ---------------------------------------------------------------------------
// Parser for the textual notation:
//   forall diag(x,y): eq(F(x), y)
//   forall diag(x,y): eq(F(x), y) and not eq(x, y)
// Precedence: not > and > or > implies.

namespace detail {

struct Lexer {
  std::string_view text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool eof() {
    skip_ws();
    return pos >= text.size();
  }
  bool peek_char(char c) {
    skip_ws();
    return pos < text.size() && text[pos] == c;
  }
  void expect_char(char c) {
    skip_ws();
    if (pos >= text.size() || text[pos] != c)
      throw ParseError(std::string("formula: expected '") + c + "' at offset " + std::to_string(pos));
    ++pos;
  }
  std::string ident() {
    skip_ws();
    const std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    if (pos == start) throw ParseError("formula: expected identifier at offset " + std::to_string(pos));
    return std::string(text.substr(start, pos - start));
  }
  bool try_keyword(std::string_view kw) {
    skip_ws();
    const std::size_t save = pos;
    if (text.substr(pos, kw.size()) != kw) return false;
    const std::size_t after = pos + kw.size();
    if (after < text.size() &&
        (std::isalnum(static_cast<unsigned char>(text[after])) || text[after] == '_')) {
      pos = save;
      return false;
    }
    pos = after;
    return true;
  }
};

std::unique_ptr<FormulaNode> parse_bool(Lexer& lx);

inline Term parse_term(Lexer& lx) {
  Term t;
  t.symbol = lx.ident();
  if (lx.peek_char('(')) {
    lx.expect_char('(');
    t.argument = lx.ident();
    lx.expect_char(')');
    t.is_application = true;
  }
  return t;
}

inline std::unique_ptr<FormulaNode> parse_atom(Lexer& lx) {
  if (lx.peek_char('(')) {
    lx.expect_char('(');
    auto inner = parse_bool(lx);
    lx.expect_char(')');
    return inner;
  }
  if (lx.try_keyword("not")) {
    auto node = std::make_unique<FormulaNode>();
    node->kind = FormulaNode::Kind::negation;
    node->children.push_back(parse_atom(lx));
    return node;
  }
  auto node = std::make_unique<FormulaNode>();
  node->kind = FormulaNode::Kind::predicate_app;
  node->predicate_name = lx.ident();
  lx.expect_char('(');
  node->lhs = parse_term(lx);
  lx.expect_char(',');
  node->rhs = parse_term(lx);
  lx.expect_char(')');
  return node;
}

inline std::unique_ptr<FormulaNode> parse_and(Lexer& lx) {
  auto left = parse_atom(lx);
  while (lx.try_keyword("and")) {
    auto node = std::make_unique<FormulaNode>();
    node->kind = FormulaNode::Kind::conjunction;
    node->children.push_back(std::move(left));
    node->children.push_back(parse_atom(lx));
    left = std::move(node);
  }
  return left;
}

inline std::unique_ptr<FormulaNode> parse_or(Lexer& lx) {
  auto left = parse_and(lx);
  while (lx.try_keyword("or")) {
    auto node = std::make_unique<FormulaNode>();
    node->kind = FormulaNode::Kind::disjunction;
    node->children.push_back(std::move(left));
    node->children.push_back(parse_and(lx));
    left = std::move(node);
  }
  return left;
}

inline std::unique_ptr<FormulaNode> parse_bool(Lexer& lx) {
  auto left = parse_or(lx);
  if (lx.try_keyword("implies")) {
    auto node = std::make_unique<FormulaNode>();
    node->kind = FormulaNode::Kind::implication;
    node->children.push_back(std::move(left));
    node->children.push_back(parse_bool(lx));
    return node;
  }
  return left;
}

}  // namespace detail

inline Formula parse_formula(std::string_view text, double aggregator_p = 2.0) {
  if (aggregator_p < 1.0) throw ConfigError("aggregator exponent must be >= 1");
  detail::Lexer lx{text};
  if (!lx.try_keyword("forall")) throw ParseError("formula must start with 'forall'");
  if (!lx.try_keyword("diag")) throw ParseError("formula: expected 'diag' after forall");
  lx.expect_char('(');
  auto root = std::make_unique<FormulaNode>();
  root->kind = FormulaNode::Kind::forall_diag;
  root->var_x = lx.ident();
  lx.expect_char(',');
  root->var_y = lx.ident();
  lx.expect_char(')');
  lx.expect_char(':');
  root->aggregator_p = aggregator_p;
  root->children.push_back(detail::parse_bool(lx));
  if (!lx.eof()) throw ParseError("formula: trailing text at offset " + std::to_string(lx.pos));
  Formula f;
  f.root = std::move(root);
  return f;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Evaluation {
  ad::NodeRef truth;        // scalar aggregate
  ad::NodeRef pair_truths;  // [B]
};

namespace detail {

struct EvalContext {
  ad::Graph* graph;
  const Grounding* grounding;
  std::map<std::string, ad::NodeRef> variable_nodes;
  std::size_t batch = 0;
};

inline ad::NodeRef ground_term(EvalContext& ctx, const Term& t) {
  if (t.is_application) {
    auto fn = ctx.grounding->functions.find(t.symbol);
    if (fn == ctx.grounding->functions.end())
      throw GroundingError("unbound function symbol '" + t.symbol + "'");
    auto arg = ctx.variable_nodes.find(t.argument);
    if (arg == ctx.variable_nodes.end())
      throw GroundingError("unbound variable '" + t.argument + "' (only diag variables may appear)");
    return fn->second(*ctx.graph, arg->second);
  }
  auto var = ctx.variable_nodes.find(t.symbol);
  if (var == ctx.variable_nodes.end())
    throw GroundingError("unbound variable '" + t.symbol + "' (only diag variables may appear)");
  return var->second;
}

inline ad::NodeRef eval_bool(EvalContext& ctx, const FormulaNode& node) {
  switch (node.kind) {
    case FormulaNode::Kind::predicate_app: {
      auto pred = ctx.grounding->predicates.find(node.predicate_name);
      if (pred == ctx.grounding->predicates.end())
        throw GroundingError("unbound predicate symbol '" + node.predicate_name + "'");
      return eq_truth(pred->second, ground_term(ctx, node.lhs), ground_term(ctx, node.rhs));
    }
    case FormulaNode::Kind::negation: return l_not(eval_bool(ctx, *node.children[0]));
    case FormulaNode::Kind::conjunction:
      return l_and(eval_bool(ctx, *node.children[0]), eval_bool(ctx, *node.children[1]));
    case FormulaNode::Kind::disjunction:
      return l_or(eval_bool(ctx, *node.children[0]), eval_bool(ctx, *node.children[1]));
    case FormulaNode::Kind::implication:
      return l_implies(eval_bool(ctx, *node.children[0]), eval_bool(ctx, *node.children[1]));
    case FormulaNode::Kind::forall_diag: throw ContractError("nested forall is not supported");
  }
  throw ContractError("unknown formula node kind");
}

}  // namespace detail

// Builds the formula's graph nodes inside `g` so callers can keep
// differentiating through the result.
inline Evaluation evaluate_in(ad::Graph& g, const Formula& formula, const Grounding& grounding) {
  const FormulaNode& root = formula.forall();
  detail::EvalContext ctx;
  ctx.graph = &g;
  ctx.grounding = &grounding;
  for (const std::string& var : {root.var_x, root.var_y}) {
    auto it = grounding.variables.find(var);
    if (it == grounding.variables.end()) throw GroundingError("unbound variable '" + var + "'");
    if (it->second.rank() != 2)
      throw ShapeError("variable '" + var + "' must be batched [B,F], got " + ad::shape_str(it->second.shape));
    if (ctx.batch == 0) ctx.batch = it->second.shape[0];
    if (it->second.shape[0] != ctx.batch)
      throw ShapeError("diag variables have batch sizes " + std::to_string(ctx.batch) + " and " +
                       std::to_string(it->second.shape[0]));
    ctx.variable_nodes.emplace(var, g.input(it->second));
  }
  if (ctx.batch == 0) throw ContractError("diag requires a nonempty batch");
  Evaluation ev{{}, {}};
  ev.pair_truths = detail::eval_bool(ctx, *root.children[0]);
  if (ev.pair_truths.value().size() != ctx.batch)
    throw ShapeError("formula body produced " + std::to_string(ev.pair_truths.value().size()) +
                     " truths for a batch of " + std::to_string(ctx.batch));
  ev.truth = p_mean_error(ev.pair_truths, root.aggregator_p);
  return ev;
}

struct QueryReport {
  double truth = 0.0;
  std::vector<double> pair_truths;

  double fraction_at_least(double threshold) const {
    if (pair_truths.empty()) return 0.0;
    std::size_t n = 0;
    for (double t : pair_truths)
      if (t >= threshold) ++n;
    return static_cast<double>(n) / static_cast<double>(pair_truths.size());
  }
};

// Evaluation without gradient bookkeeping: same arithmetic, throwaway graph.
inline QueryReport query(const Formula& formula, const Grounding& grounding) {
  ad::Graph g;
  const Evaluation ev = evaluate_in(g, formula, grounding);
  QueryReport report;
  report.truth = ev.truth.value().item();
  report.pair_truths = ev.pair_truths.value().data;
  return report;
}

}  // namespace lcnr::logic
