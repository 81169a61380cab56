#include <gtest/gtest.h>

#include <stdexcept>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "covar/error.hpp"
#include "covar/expr.hpp"

using namespace covar;

namespace {

const SymbolTable kPolar{{"r", "theta"}, {}};

double eval_at(const std::string& src, double r, double theta = 0.0) {
  const double x[2] = {r, theta};
  return parse(src, kPolar).eval(x);
}

// Second evaluator for the arithmetic subset (numbers, r, + - * / ^, unary minus,
// parentheses). Interprets the text directly, without building a tree.
class MiniEvaluator {
 public:
  MiniEvaluator(std::string s, double r) : s_(std::move(s)), r_(r) {}
  double run() {
    const double v = sum();
    if (peek() != '\0') throw std::runtime_error("trailing input");
    return v;
  }

 private:
  char peek() {
    while (pos_ < s_.size() && s_[pos_] == ' ') ++pos_;
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }
  double sum() {
    double v = product();
    for (char c = peek(); c == '+' || c == '-'; c = peek()) {
      ++pos_;
      v = c == '+' ? v + product() : v - product();
    }
    return v;
  }
  double product() {
    double v = unary();
    for (char c = peek(); c == '*' || c == '/'; c = peek()) {
      ++pos_;
      v = c == '*' ? v * unary() : v / unary();
    }
    return v;
  }
  double unary() {
    if (peek() == '-') {
      ++pos_;
      return -unary();
    }
    const double base = atom();
    if (peek() != '^') return base;
    ++pos_;
    return std::pow(base, unary());
  }
  double atom() {
    const char c = peek();
    if (c == '(') {
      ++pos_;
      const double v = sum();
      if (peek() != ')') throw std::runtime_error("missing )");
      ++pos_;
      return v;
    }
    if (c == 'r') {
      ++pos_;
      return r_;
    }
    std::size_t used = 0;
    const double v = std::stod(s_.substr(pos_), &used);
    pos_ += used;
    return v;
  }

  std::string s_;
  double r_;
  std::size_t pos_ = 0;
};

}  // namespace

TEST(ExprParse, EvaluatesProductOfPowers) {
  EXPECT_NEAR(eval_at("r^2*sin(theta)^2", 2.0, 0.5), 4.0 * std::pow(std::sin(0.5), 2), 1e-15);
}

TEST(ExprParse, ConstantLiteral) {
  const Expr e = parse("1", kPolar);
  EXPECT_EQ(e.kind(), ExprKind::Constant);
  EXPECT_EQ(e.value(), 1.0);
}

TEST(ExprParse, SyntaxErrorReportsOffset) {
  try {
    parse("2*+3", kPolar);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 2u);
  }
}

TEST(ExprParse, RejectsUnknownIdentifierAndArity) {
  EXPECT_THROW(parse("rho + 1", kPolar), ParseError);
  EXPECT_THROW(parse("sin(r, theta)", kPolar), ParseError);
  EXPECT_THROW(parse("sin()", kPolar), ParseError);
  EXPECT_THROW(parse("(r + 1", kPolar), ParseError);
  EXPECT_THROW(parse("", kPolar), ParseError);
}

TEST(ExprParse, ExponentMustBeConstant) {
  EXPECT_THROW(parse("r^theta", kPolar), ParseError);
  EXPECT_NEAR(eval_at("r^(1/2)", 4.0), 2.0, 1e-15);
}

TEST(ExprParse, PowerIsRightAssociative) { EXPECT_EQ(eval_at("2^3^2", 0.0), 512.0); }

TEST(ExprParse, NamedConstantsAndPi) {
  SymbolTable t = kPolar;
  t.constants["M"] = 2.5;
  const double x[2] = {1.0, 0.0};
  EXPECT_EQ(parse("2*M/r", t).eval(x), 5.0);
  EXPECT_NEAR(parse("cos(pi)", t).eval(x), -1.0, 1e-15);
}

TEST(ExprEval, SquareAndSine) {
  EXPECT_EQ(eval_at("r^2", 3.0), 9.0);
  EXPECT_NEAR(eval_at("sin(theta)", 0.0, std::numbers::pi / 2), 1.0, 1e-15);
}

TEST(ExprEval, UnaryMinusBindsLooserThanPower) {
  EXPECT_EQ(eval_at("-r^2", 2.0), -4.0);
  for (const char* src : {"-r^2", "-2^2", "3*-r^2", "(-r)^2", "1 - -r", "-r^2^0.5",
                          "2/-r*3", "-(r+1)^3 - r/4", "r^-2", "-r*-r"}) {
    for (double r : {0.5, 2.0, 3.25}) {
      const double mine = MiniEvaluator(src, r).run();
      EXPECT_DOUBLE_EQ(eval_at(src, r), mine) << src << " at r=" << r;
    }
  }
}

TEST(ExprEval, DomainErrorsNameThePoint) {
  for (const char* src : {"log(r - 2)", "sqrt(1 - r)", "acos(r)", "(1 - r)^0.5"}) {
    try {
      eval_at(src, 2.0, 0.25);
      FAIL() << src;
    } catch (const DomainError& e) {
      EXPECT_NE(std::string(e.what()).find("0.25"), std::string::npos) << e.what();
    }
  }
  EXPECT_TRUE(std::isinf(eval_at("1/(r-2)", 2.0)));
}

TEST(ExprDifferentiate, Basics) {
  const Expr e = parse("r^2", kPolar);
  const double x[2] = {1.5, 0.3};
  EXPECT_EQ(differentiate(e, 0).eval(x), 3.0);
  EXPECT_TRUE(differentiate(e, 1).is_constant(0.0));
  const double p[2] = {2.0, std::numbers::pi / 6};
  EXPECT_NEAR(differentiate(parse("r^2*sin(theta)", kPolar), 0).eval(p), 2.0, 1e-15);
}

TEST(ExprDifferentiate, AgreesWithCentralDifferences) {
  const char* sources[] = {"r^3*cos(theta)", "exp(-r)*tan(theta/2)", "log(r)/sqrt(r)",
                           "abs(sin(theta)) + atan(r)", "asin(r/4)*acos(theta/2)",
                           "(r^2 + theta^2)^1.5 / (1 + r)"};
  for (const char* src : sources) {
    const Expr e = parse(src, kPolar);
    for (int axis = 0; axis < 2; ++axis) {
      const Expr de = differentiate(e, axis);
      const double x[2] = {1.3, 0.7};
      const double h = 1e-5;
      double xp[2] = {x[0], x[1]}, xm[2] = {x[0], x[1]};
      xp[axis] += h;
      xm[axis] -= h;
      const double fd = (e.eval(xp) - e.eval(xm)) / (2 * h);
      EXPECT_NEAR(de.eval(x), fd, 1e-8 * std::max(1.0, std::abs(fd))) << src << " axis " << axis;
    }
  }
}

TEST(ExprPrint, ReparseAgreesAtRandomPoints) {
  const char* sources[] = {"-r^2",
                           "r^2*sin(theta)^2",
                           "-(1 - 2/r)",
                           "(1 - 2/r)^-1",
                           "exp(-r/3)*cos(2*theta) - 1e-3*r",
                           "1/(r*r) - -theta",
                           "abs(theta - 1)^2.5 + atan(r)/sqrt(r)",
                           "r - (theta - r) - (r + theta)"};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ur(1.0, 3.0), ut(0.1, 3.0);
  for (const char* src : sources) {
    const Expr e = parse(src, kPolar);
    const Expr again = parse(e.str(), kPolar);
    EXPECT_EQ(again.str(), e.str());
    for (int i = 0; i < 100; ++i) {
      const double x[2] = {ur(rng), ut(rng)};
      const double a = e.eval(x), b = again.eval(x);
      EXPECT_NEAR(a, b, 1e-14 * std::max(1.0, std::abs(a))) << src << " -> " << e.str();
    }
  }
}

TEST(ExprSubstitute, ReplacesSymbols) {
  const Expr e = parse("r^2 + theta", kPolar);
  const SymbolTable xy{{"x", "y"}, {}};
  const Expr repl[2] = {parse("x + y", xy), parse("2*y", xy)};
  const Expr s = substitute(e, repl);
  const double p[2] = {1.0, 2.0};
  EXPECT_EQ(s.eval(p), 9.0 + 4.0);
}
