#pragma once

#include "sode/expr.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace sode::detail {

struct Node {
  Expression::Kind kind = Expression::Kind::Constant;
  Number number;
  std::string name;
  std::vector<Expression> children;
  Rational exponent;
  FunctionKind function = FunctionKind::Exp;

  std::uint64_t hash = 0;
  std::size_t size = 1;
  // One bit per symbol-name hash; a clear bit proves independence.
  std::uint64_t symbol_mask = 0;
  // Set only on trees produced by normalize(): the canonical form they spell.
  std::shared_ptr<const RatFunc> canonical;
};

std::uint64_t symbol_bit(std::string_view name);

/// True when `e` may depend on `symbol` (exact: falls back to traversal).
bool depends_on(const Expression& e, std::string_view symbol);

/// Builds a node, filling hash/size/mask from the payload.
std::shared_ptr<Node> new_node(Expression::Kind kind);
Expression finish(std::shared_ptr<Node> node);

}  // namespace sode::detail
