#include "covar/expr.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <system_error>

#include "covar/error.hpp"

namespace covar {

struct Expr::Node {
  ExprKind kind = ExprKind::Constant;
  double value = 0.0;  // constant value, or exponent for Power
  int index = -1;
  std::string name;
  Function fn = Function::Sin;
  std::vector<Expr> children;
};

namespace {

struct FunctionInfo {
  std::string_view name;
  Function fn;
};

constexpr FunctionInfo kFunctions[] = {
    {"sin", Function::Sin},   {"cos", Function::Cos},   {"tan", Function::Tan},
    {"exp", Function::Exp},   {"log", Function::Log},   {"sqrt", Function::Sqrt},
    {"abs", Function::Abs},   {"asin", Function::Asin}, {"acos", Function::Acos},
    {"atan", Function::Atan},
};

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_point(std::span<const double> point) {
  std::string s = "(";
  for (std::size_t i = 0; i < point.size(); ++i) {
    if (i) s += ", ";
    s += format_number(point[i]);
  }
  return s + ")";
}

// Returns NaN when the argument lies outside the real domain.
double apply_function(Function f, double x) {
  switch (f) {
    case Function::Sin: return std::sin(x);
    case Function::Cos: return std::cos(x);
    case Function::Tan: return std::tan(x);
    case Function::Exp: return std::exp(x);
    case Function::Log: return x > 0.0 ? std::log(x) : std::nan("");
    case Function::Sqrt: return x >= 0.0 ? std::sqrt(x) : std::nan("");
    case Function::Abs: return std::abs(x);
    case Function::Asin: return std::abs(x) <= 1.0 ? std::asin(x) : std::nan("");
    case Function::Acos: return std::abs(x) <= 1.0 ? std::acos(x) : std::nan("");
    case Function::Atan: return std::atan(x);
  }
  return std::nan("");
}

double apply_power(double base, double exponent) {
  if (base < 0.0 && exponent != std::floor(exponent)) return std::nan("");
  return std::pow(base, exponent);
}

int precedence(ExprKind k) {
  switch (k) {
    case ExprKind::Add:
    case ExprKind::Subtract: return 1;
    case ExprKind::Multiply:
    case ExprKind::Divide: return 2;
    case ExprKind::Negate: return 3;
    case ExprKind::Power: return 4;
    default: return 5;
  }
}

}  // namespace

Expr::Expr() : Expr(constant(0.0)) {}

Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr Expr::constant(double value) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Constant;
  n->value = value;
  return Expr(std::move(n));
}

Expr Expr::symbol(int index, std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Symbol;
  n->index = index;
  n->name = std::move(name);
  return Expr(std::move(n));
}

ExprKind Expr::kind() const { return node_->kind; }
double Expr::value() const { return node_->value; }
int Expr::symbol_index() const { return node_->index; }
const std::string& Expr::symbol_name() const { return node_->name; }
double Expr::exponent() const { return node_->value; }
Function Expr::function() const { return node_->fn; }
std::span<const Expr> Expr::children() const { return node_->children; }

bool Expr::is_constant(double v) const {
  return node_->kind == ExprKind::Constant && node_->value == v;
}

bool Expr::is_closed() const {
  if (node_->kind == ExprKind::Symbol) return false;
  for (const auto& c : node_->children)
    if (!c.is_closed()) return false;
  return true;
}

double Expr::eval(std::span<const double> point) const {
  const Node& n = *node_;
  switch (n.kind) {
    case ExprKind::Constant: return n.value;
    case ExprKind::Symbol:
      if (n.index < 0 || static_cast<std::size_t>(n.index) >= point.size())
        throw PreconditionError("expression symbol '" + n.name + "' has no coordinate in point " +
                                format_point(point));
      return point[n.index];
    case ExprKind::Negate: return -n.children[0].eval(point);
    case ExprKind::Add: return n.children[0].eval(point) + n.children[1].eval(point);
    case ExprKind::Subtract: return n.children[0].eval(point) - n.children[1].eval(point);
    case ExprKind::Multiply: return n.children[0].eval(point) * n.children[1].eval(point);
    case ExprKind::Divide: return n.children[0].eval(point) / n.children[1].eval(point);
    case ExprKind::Power: {
      const double base = n.children[0].eval(point);
      const double r = apply_power(base, n.value);
      if (std::isnan(r) && !std::isnan(base))
        throw DomainError("negative base " + format_number(base) + " raised to non-integer power " +
                          format_number(n.value) + " at " + format_point(point));
      return r;
    }
    case ExprKind::Call: {
      const double x = n.children[0].eval(point);
      const double r = apply_function(n.fn, x);
      if (std::isnan(r) && !std::isnan(x))
        throw DomainError(std::string(function_name(n.fn)) + " of " + format_number(x) +
                          " is outside its domain at " + format_point(point));
      return r;
    }
  }
  return 0.0;
}

std::string Expr::str() const {
  const Node& n = *node_;
  auto wrap = [](const Expr& child, int min_prec) {
    std::string s = child.str();
    if (precedence(child.kind()) < min_prec) return "(" + s + ")";
    return s;
  };
  switch (n.kind) {
    case ExprKind::Constant: {
      std::string s = format_number(n.value);
      if (std::signbit(n.value) || !std::isfinite(n.value)) return "(" + s + ")";
      return s;
    }
    case ExprKind::Symbol: return n.name;
    case ExprKind::Negate: return "-" + wrap(n.children[0], 4);
    case ExprKind::Add: return wrap(n.children[0], 1) + " + " + wrap(n.children[1], 2);
    case ExprKind::Subtract: return wrap(n.children[0], 1) + " - " + wrap(n.children[1], 2);
    case ExprKind::Multiply: return wrap(n.children[0], 2) + "*" + wrap(n.children[1], 3);
    case ExprKind::Divide: return wrap(n.children[0], 2) + "/" + wrap(n.children[1], 3);
    case ExprKind::Power: {
      std::string e = format_number(n.value);
      if (std::signbit(n.value)) e = "(" + e + ")";
      return wrap(n.children[0], 5) + "^" + e;
    }
    case ExprKind::Call:
      return std::string(function_name(n.fn)) + "(" + n.children[0].str() + ")";
  }
  return {};
}

// ---- constant-folding builders -------------------------------------------------

Expr operator-(const Expr& a) {
  if (a.kind() == ExprKind::Constant) return Expr::constant(-a.value());
  if (a.kind() == ExprKind::Negate) return a.children()[0];
  return Expr::make_node(ExprKind::Negate, {a});
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.kind() == ExprKind::Constant && b.kind() == ExprKind::Constant)
    return Expr::constant(a.value() + b.value());
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  return Expr::make_node(ExprKind::Add, {a, b});
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.kind() == ExprKind::Constant && b.kind() == ExprKind::Constant)
    return Expr::constant(a.value() - b.value());
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return -b;
  return Expr::make_node(ExprKind::Subtract, {a, b});
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.kind() == ExprKind::Constant && b.kind() == ExprKind::Constant)
    return Expr::constant(a.value() * b.value());
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return -b;
  if (b.is_constant(-1.0)) return -a;
  return Expr::make_node(ExprKind::Multiply, {a, b});
}

Expr operator/(const Expr& a, const Expr& b) {
  if (a.kind() == ExprKind::Constant && b.kind() == ExprKind::Constant && b.value() != 0.0)
    return Expr::constant(a.value() / b.value());
  if (a.is_constant(0.0)) return Expr::constant(0.0);
  if (b.is_constant(1.0)) return a;
  return Expr::make_node(ExprKind::Divide, {a, b});
}

Expr pow(const Expr& base, double exponent) {
  if (exponent == 0.0) return Expr::constant(1.0);
  if (exponent == 1.0) return base;
  if (base.kind() == ExprKind::Constant) {
    const double r = apply_power(base.value(), exponent);
    if (std::isfinite(r)) return Expr::constant(r);
  }
  return Expr::make_node(ExprKind::Power, {base}, exponent);
}

Expr apply(Function f, const Expr& arg) {
  if (arg.kind() == ExprKind::Constant) {
    const double r = apply_function(f, arg.value());
    if (std::isfinite(r)) return Expr::constant(r);
  }
  return Expr::make_node(ExprKind::Call, {arg}, 0.0, f);
}

Expr Expr::make_node(ExprKind kind, std::vector<Expr> children, double value, Function fn) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = kind;
  n->children = std::move(children);
  n->value = value;
  n->fn = fn;
  return Expr(std::move(n));
}

std::string_view function_name(Function f) {
  for (const auto& info : kFunctions)
    if (info.fn == f) return info.name;
  return "?";
}

// ---- parser ---------------------------------------------------------------------

namespace {

class Parser {
 public:
  Parser(std::string_view src, const SymbolTable& symbols) : src_(src), symbols_(symbols) {}

  Expr parse_all() {
    Expr e = parse_sum();
    skip_space();
    if (pos_ < src_.size()) fail_unexpected();
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  char peek() {
    skip_space();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  [[noreturn]] void fail_unexpected() {
    if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
    throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
  }

  Expr parse_sum() {
    Expr lhs = parse_product();
    for (;;) {
      const char c = peek();
      if (c != '+' && c != '-') return lhs;
      ++pos_;
      Expr rhs = parse_product();
      lhs = c == '+' ? lhs + rhs : lhs - rhs;
    }
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    for (;;) {
      const char c = peek();
      if (c != '*' && c != '/') return lhs;
      ++pos_;
      Expr rhs = parse_unary();
      lhs = c == '*' ? lhs * rhs : lhs / rhs;
    }
  }

  // Unary minus binds looser than '^': -r^2 == -(r^2).
  Expr parse_unary() {
    if (peek() == '-') {
      ++pos_;
      return -parse_unary();
    }
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (peek() != '^') return base;
    ++pos_;
    skip_space();
    const std::size_t at = pos_;
    Expr exponent = parse_unary();
    if (!exponent.is_closed()) throw ParseError("exponent must be a constant", at);
    double value = 0.0;
    try {
      value = exponent.eval({});
    } catch (const DomainError& e) {
      throw ParseError(std::string("invalid exponent: ") + e.what(), at);
    }
    return pow(base, value);
  }

  Expr parse_primary() {
    const char c = peek();
    if (c == '(') {
      ++pos_;
      Expr inner = parse_sum();
      if (peek() != ')') fail_unexpected();
      ++pos_;
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail_unexpected();
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    double value = 0.0;
    auto res = std::from_chars(src_.data() + pos_, src_.data() + src_.size(), value);
    if (res.ec != std::errc()) throw ParseError("malformed number", start);
    pos_ = static_cast<std::size_t>(res.ptr - src_.data());
    return Expr::constant(value);
  }

  Expr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string_view name = src_.substr(start, pos_ - start);

    if (peek() == '(') {
      const FunctionInfo* info = nullptr;
      for (const auto& f : kFunctions)
        if (f.name == name) info = &f;
      if (!info) throw ParseError("unknown function '" + std::string(name) + "'", start);
      ++pos_;
      std::vector<Expr> args;
      if (peek() != ')') {
        args.push_back(parse_sum());
        while (peek() == ',') {
          ++pos_;
          args.push_back(parse_sum());
        }
      }
      if (peek() != ')') fail_unexpected();
      ++pos_;
      if (args.size() != 1)
        throw ParseError("function '" + std::string(name) + "' takes 1 argument, got " +
                             std::to_string(args.size()),
                         start);
      return apply(info->fn, args[0]);
    }

    for (std::size_t i = 0; i < symbols_.coordinates.size(); ++i)
      if (symbols_.coordinates[i] == name) return Expr::symbol(static_cast<int>(i), std::string(name));
    if (auto it = symbols_.constants.find(name); it != symbols_.constants.end())
      return Expr::constant(it->second);
    if (name == "pi") return Expr::constant(std::numbers::pi);
    for (const auto& f : kFunctions)
      if (f.name == name)
        throw ParseError("function '" + std::string(name) + "' requires an argument", start);
    throw ParseError("unknown identifier '" + std::string(name) + "'", start);
  }

  std::string_view src_;
  const SymbolTable& symbols_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view source, const SymbolTable& symbols) {
  return Parser(source, symbols).parse_all();
}

// ---- calculus on trees --------------------------------------------------------------

Expr differentiate(const Expr& e, int index) {
  const auto ch = e.children();
  switch (e.kind()) {
    case ExprKind::Constant: return Expr::constant(0.0);
    case ExprKind::Symbol: return Expr::constant(e.symbol_index() == index ? 1.0 : 0.0);
    case ExprKind::Negate: return -differentiate(ch[0], index);
    case ExprKind::Add: return differentiate(ch[0], index) + differentiate(ch[1], index);
    case ExprKind::Subtract: return differentiate(ch[0], index) - differentiate(ch[1], index);
    case ExprKind::Multiply:
      return differentiate(ch[0], index) * ch[1] + ch[0] * differentiate(ch[1], index);
    case ExprKind::Divide:
      return (differentiate(ch[0], index) * ch[1] - ch[0] * differentiate(ch[1], index)) /
             pow(ch[1], 2.0);
    case ExprKind::Power: {
      const double c = e.exponent();
      return Expr::constant(c) * pow(ch[0], c - 1.0) * differentiate(ch[0], index);
    }
    case ExprKind::Call: {
      const Expr& u = ch[0];
      const Expr du = differentiate(u, index);
      if (du.is_constant(0.0)) return du;
      switch (e.function()) {
        case Function::Sin: return apply(Function::Cos, u) * du;
        case Function::Cos: return -(apply(Function::Sin, u) * du);
        case Function::Tan: return du / pow(apply(Function::Cos, u), 2.0);
        case Function::Exp: return e * du;
        case Function::Log: return du / u;
        case Function::Sqrt: return du / (Expr::constant(2.0) * e);
        case Function::Abs: return du * u / e;
        case Function::Asin:
          return du / apply(Function::Sqrt, Expr::constant(1.0) - pow(u, 2.0));
        case Function::Acos:
          return -(du / apply(Function::Sqrt, Expr::constant(1.0) - pow(u, 2.0)));
        case Function::Atan: return du / (Expr::constant(1.0) + pow(u, 2.0));
      }
    }
  }
  return Expr::constant(0.0);
}

Expr substitute(const Expr& e, std::span<const Expr> replacements) {
  const auto ch = e.children();
  switch (e.kind()) {
    case ExprKind::Constant: return e;
    case ExprKind::Symbol:
      if (e.symbol_index() < 0 || static_cast<std::size_t>(e.symbol_index()) >= replacements.size())
        throw PreconditionError("no replacement for symbol '" + e.symbol_name() + "'");
      return replacements[e.symbol_index()];
    case ExprKind::Negate: return -substitute(ch[0], replacements);
    case ExprKind::Add: return substitute(ch[0], replacements) + substitute(ch[1], replacements);
    case ExprKind::Subtract:
      return substitute(ch[0], replacements) - substitute(ch[1], replacements);
    case ExprKind::Multiply:
      return substitute(ch[0], replacements) * substitute(ch[1], replacements);
    case ExprKind::Divide:
      return substitute(ch[0], replacements) / substitute(ch[1], replacements);
    case ExprKind::Power: return pow(substitute(ch[0], replacements), e.exponent());
    case ExprKind::Call: return apply(e.function(), substitute(ch[0], replacements));
  }
  return e;
}

}  // namespace covar
