#ifndef FINSLERHJ_EXPRESSION_HPP_
#define FINSLERHJ_EXPRESSION_HPP_

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "finslerhj/types.hpp"

namespace finslerhj {

//! Values bound to the variables of an expression.
struct ExprEnv {
  double x1 = 0.0;
  double x2 = 0.0;
  double t = 0.0;
  double m = 0.0;
  //! d(x0, x) from a precomputed distance field.
  double d = 0.0;
  //! Arguments of a continuity modulus omega(s, r) (or omega(s, d, r)).
  double s = 0.0;
  double r = 0.0;
};

//! Arithmetic over x1, x2, t, m, d (s, r for moduli) and numeric constants (plus pi, e) with
//! + - * / ^, unary minus, parentheses and the functions cos, sin, exp, log,
//! sqrt, abs, tanh (one argument) and min, max (two or more).
class Expression {
 public:
  Expression() = default;

  //! Throws InputError on syntax errors or variables outside `allowed`.
  static Expression Parse(std::string const& src,
                          std::set<std::string> const& allowed = {"x1", "x2", "t", "m", "d"}) {
    Parser p{src, 0, allowed, {}};
    Expression e;
    e.source_ = src;
    e.root_ = p.ParseSum();
    p.SkipSpace();
    if (p.pos != src.size()) p.Fail("unexpected '" + std::string(1, src[p.pos]) + "'");
    e.vars_ = std::move(p.used);
    return e;
  }

  double operator()(ExprEnv const& env) const {
    if (!root_) throw InputError("empty expression");
    return Eval(*root_, env);
  }

  bool Uses(std::string const& var) const { return vars_.count(var) > 0; }
  std::string const& source() const { return source_; }

 private:
  enum class Op { kConst, kVar, kNeg, kAdd, kSub, kMul, kDiv, kPow, kCall };

  struct Node {
    Op op = Op::kConst;
    double value = 0.0;
    std::string name;
    std::vector<std::shared_ptr<Node const>> args;
  };
  using NodePtr = std::shared_ptr<Node const>;

  static NodePtr Make(Op op, std::vector<NodePtr> args, std::string name = {},
                      double value = 0.0) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->args = std::move(args);
    n->name = std::move(name);
    n->value = value;
    return n;
  }

  struct Parser {
    std::string const& src;
    std::size_t pos;
    std::set<std::string> const& allowed;
    std::set<std::string> used;

    [[noreturn]] void Fail(std::string const& what) const {
      throw InputError("expression '" + src + "' at " + std::to_string(pos) + ": " + what);
    }

    void SkipSpace() {
      while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    }

    bool Accept(char c) {
      SkipSpace();
      if (pos < src.size() && src[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    NodePtr ParseSum() {
      NodePtr lhs = ParseProduct();
      for (;;) {
        if (Accept('+')) {
          lhs = Make(Op::kAdd, {lhs, ParseProduct()});
        } else if (Accept('-')) {
          lhs = Make(Op::kSub, {lhs, ParseProduct()});
        } else {
          return lhs;
        }
      }
    }

    NodePtr ParseProduct() {
      NodePtr lhs = ParseUnary();
      for (;;) {
        if (Accept('*')) {
          lhs = Make(Op::kMul, {lhs, ParseUnary()});
        } else if (Accept('/')) {
          lhs = Make(Op::kDiv, {lhs, ParseUnary()});
        } else {
          return lhs;
        }
      }
    }

    NodePtr ParseUnary() {
      if (Accept('-')) return Make(Op::kNeg, {ParseUnary()});
      if (Accept('+')) return ParseUnary();
      return ParsePower();
    }

    // Right associative; binds tighter than unary minus on its left.
    NodePtr ParsePower() {
      NodePtr base = ParseAtom();
      if (Accept('^')) return Make(Op::kPow, {base, ParseUnary()});
      return base;
    }

    NodePtr ParseAtom() {
      SkipSpace();
      if (pos >= src.size()) Fail("unexpected end");
      char const c = src[pos];
      if (Accept('(')) {
        NodePtr inner = ParseSum();
        if (!Accept(')')) Fail("expected ')'");
        return inner;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        char const* begin = src.c_str() + pos;
        char* end = nullptr;
        double const v = std::strtod(begin, &end);
        if (end == begin) Fail("bad number");
        pos += static_cast<std::size_t>(end - begin);
        return Make(Op::kConst, {}, {}, v);
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        std::size_t const start = pos;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_')) {
          ++pos;
        }
        std::string const id = src.substr(start, pos - start);
        if (Accept('(')) {
          std::vector<NodePtr> args{ParseSum()};
          while (Accept(',')) args.push_back(ParseSum());
          if (!Accept(')')) Fail("expected ')' after arguments of " + id);
          CheckCall(id, args.size());
          return Make(Op::kCall, std::move(args), id);
        }
        if (id == "pi") return Make(Op::kConst, {}, {}, std::numbers::pi);
        if (id == "e") return Make(Op::kConst, {}, {}, std::numbers::e);
        if (!allowed.count(id)) Fail("unknown variable " + id);
        used.insert(id);
        return Make(Op::kVar, {}, id);
      }
      Fail("unexpected '" + std::string(1, c) + "'");
    }

    void CheckCall(std::string const& id, std::size_t n) const {
      static std::set<std::string> const unary{"cos", "sin", "exp", "log", "sqrt", "abs", "tanh"};
      if (unary.count(id)) {
        if (n != 1) Fail(id + " takes one argument");
      } else if (id == "min" || id == "max") {
        if (n < 2) Fail(id + " takes at least two arguments");
      } else {
        Fail("unknown function " + id);
      }
    }
  };

  static double Var(std::string const& name, ExprEnv const& env) {
    if (name == "x1") return env.x1;
    if (name == "x2") return env.x2;
    if (name == "t") return env.t;
    if (name == "m") return env.m;
    if (name == "s") return env.s;
    if (name == "r") return env.r;
    return env.d;
  }

  static double Eval(Node const& n, ExprEnv const& env) {
    switch (n.op) {
      case Op::kConst: return n.value;
      case Op::kVar: return Var(n.name, env);
      case Op::kNeg: return -Eval(*n.args[0], env);
      case Op::kAdd: return Eval(*n.args[0], env) + Eval(*n.args[1], env);
      case Op::kSub: return Eval(*n.args[0], env) - Eval(*n.args[1], env);
      case Op::kMul: return Eval(*n.args[0], env) * Eval(*n.args[1], env);
      case Op::kDiv: return Eval(*n.args[0], env) / Eval(*n.args[1], env);
      case Op::kPow: return std::pow(Eval(*n.args[0], env), Eval(*n.args[1], env));
      case Op::kCall: break;
    }
    double const a = Eval(*n.args[0], env);
    if (n.name == "cos") return std::cos(a);
    if (n.name == "sin") return std::sin(a);
    if (n.name == "exp") return std::exp(a);
    if (n.name == "log") return std::log(a);
    if (n.name == "sqrt") return std::sqrt(a);
    if (n.name == "abs") return std::abs(a);
    if (n.name == "tanh") return std::tanh(a);
    double r = a;
    for (std::size_t q = 1; q < n.args.size(); ++q) {
      double const b = Eval(*n.args[q], env);
      r = n.name == "min" ? std::min(r, b) : std::max(r, b);
    }
    return r;
  }

  std::string source_;
  NodePtr root_;
  std::set<std::string> vars_;
};

}  // namespace finslerhj

#endif  // FINSLERHJ_EXPRESSION_HPP_
