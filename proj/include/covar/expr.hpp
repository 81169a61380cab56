#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace covar {

/// Names an expression may reference: coordinate symbols (bound by position)
/// and named numeric parameters that are folded in at parse time.
struct SymbolTable {
  std::vector<std::string> coordinates;
  std::map<std::string, double, std::less<>> constants;
};

enum class ExprKind { Constant, Symbol, Negate, Add, Subtract, Multiply, Divide, Power, Call };

enum class Function { Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Asin, Acos, Atan };

/// Immutable expression tree over chart coordinates. Copies share structure.
class Expr {
 public:
  /// The constant 0.
  Expr();

  static Expr constant(double value);
  static Expr symbol(int index, std::string name);

  ExprKind kind() const;
  /// Constant value; only meaningful for ExprKind::Constant.
  double value() const;
  /// Coordinate index; only meaningful for ExprKind::Symbol.
  int symbol_index() const;
  const std::string& symbol_name() const;
  /// Exponent of an ExprKind::Power node.
  double exponent() const;
  Function function() const;
  std::span<const Expr> children() const;

  bool is_constant(double v) const;
  /// True if no coordinate symbol occurs in the tree.
  bool is_closed() const;

  /// IEEE double evaluation at `point` (indexed like the bound coordinates).
  /// Throws DomainError for log/sqrt/asin/acos/pow outside their real domain.
  double eval(std::span<const double> point) const;

  /// Prints a form that parse() accepts and evaluates identically.
  std::string str() const;

  friend Expr operator-(const Expr& a);
  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr pow(const Expr& base, double exponent);
  friend Expr apply(Function f, const Expr& arg);

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node);
  static Expr make_node(ExprKind kind, std::vector<Expr> children, double value = 0.0,
                        Function fn = Function::Sin);
  std::shared_ptr<const Node> node_;
};

Expr parse(std::string_view source, const SymbolTable& symbols);

/// Exact symbolic derivative with respect to coordinate `index`.
/// The result is constant-folded but otherwise unsimplified.
Expr differentiate(const Expr& e, int index);

/// Replaces coordinate symbol i by replacements[i].
Expr substitute(const Expr& e, std::span<const Expr> replacements);

std::string_view function_name(Function f);

}  // namespace covar
