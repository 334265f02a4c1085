// Minimal arithmetic expression grammar for user-defined problems:
// + - * / ^, sin, cos, exp, constants pi and e, variables t, x, y.
#pragma once

#include <cctype>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnp {

class Expression {
 public:
  static Expression parse(const std::string& text) {
    Parser p(text);
    Expression e;
    e.root_ = p.parse_expr();
    p.skip_ws();
    if (!p.done()) throw std::invalid_argument("expression: trailing input at '" + p.rest() + "'");
    return e;
  }

  double operator()(double t, double x, double y) const { return root_->eval(t, x, y); }

 private:
  struct Node {
    virtual ~Node() = default;
    virtual double eval(double t, double x, double y) const = 0;
  };
  using NodePtr = std::shared_ptr<const Node>;

  struct Const : Node {
    double v;
    explicit Const(double c) : v(c) {}
    double eval(double, double, double) const override { return v; }
  };
  struct Var : Node {
    int which;  // 0 t, 1 x, 2 y
    explicit Var(int w) : which(w) {}
    double eval(double t, double x, double y) const override {
      return which == 0 ? t : which == 1 ? x : y;
    }
  };
  struct Unary : Node {
    int fn;  // 0 neg, 1 sin, 2 cos, 3 exp
    NodePtr a;
    Unary(int f, NodePtr n) : fn(f), a(std::move(n)) {}
    double eval(double t, double x, double y) const override {
      const double v = a->eval(t, x, y);
      switch (fn) {
        case 0: return -v;
        case 1: return std::sin(v);
        case 2: return std::cos(v);
        default: return std::exp(v);
      }
    }
  };
  struct Binary : Node {
    char op;
    NodePtr a, b;
    Binary(char o, NodePtr x_, NodePtr y_) : op(o), a(std::move(x_)), b(std::move(y_)) {}
    double eval(double t, double x, double y) const override {
      const double u = a->eval(t, x, y), v = b->eval(t, x, y);
      switch (op) {
        case '+': return u + v;
        case '-': return u - v;
        case '*': return u * v;
        case '/': return u / v;
        default: return std::pow(u, v);
      }
    }
  };

  class Parser {
   public:
    explicit Parser(const std::string& s) : s_(s) {}

    NodePtr parse_expr() {
      NodePtr lhs = parse_term();
      for (;;) {
        skip_ws();
        if (accept('+'))
          lhs = std::make_shared<Binary>('+', lhs, parse_term());
        else if (accept('-'))
          lhs = std::make_shared<Binary>('-', lhs, parse_term());
        else
          return lhs;
      }
    }

    void skip_ws() {
      while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool done() const { return pos_ >= s_.size(); }
    std::string rest() const { return s_.substr(pos_); }

   private:
    NodePtr parse_term() {
      NodePtr lhs = parse_factor();
      for (;;) {
        skip_ws();
        if (accept('*'))
          lhs = std::make_shared<Binary>('*', lhs, parse_factor());
        else if (accept('/'))
          lhs = std::make_shared<Binary>('/', lhs, parse_factor());
        else
          return lhs;
      }
    }

    // right-associative power; a leading sign binds looser than the power
    NodePtr parse_factor() {
      skip_ws();
      if (accept('-')) return std::make_shared<Unary>(0, parse_factor());
      if (accept('+')) return parse_factor();
      NodePtr base = parse_primary();
      skip_ws();
      if (accept('^')) return std::make_shared<Binary>('^', base, parse_factor());
      return base;
    }

    NodePtr parse_primary() {
      skip_ws();
      if (pos_ >= s_.size()) throw std::invalid_argument("expression: unexpected end of input");
      const char c = s_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t used = 0;
        double v = std::stod(s_.substr(pos_), &used);
        pos_ += used;
        return std::make_shared<Const>(v);
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        std::string name;
        while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_])))
          name.push_back(s_[pos_++]);
        if (name == "pi") return std::make_shared<Const>(M_PI);
        if (name == "e") return std::make_shared<Const>(M_E);
        if (name == "t") return std::make_shared<Var>(0);
        if (name == "x") return std::make_shared<Var>(1);
        if (name == "y") return std::make_shared<Var>(2);
        int fn = name == "sin" ? 1 : name == "cos" ? 2 : name == "exp" ? 3 : -1;
        if (fn < 0) throw std::invalid_argument("expression: unknown name '" + name + "'");
        skip_ws();
        if (!accept('(')) throw std::invalid_argument("expression: expected '(' after " + name);
        NodePtr arg = parse_expr();
        skip_ws();
        if (!accept(')')) throw std::invalid_argument("expression: missing ')'");
        return std::make_shared<Unary>(fn, arg);
      }
      if (accept('(')) {
        NodePtr inner = parse_expr();
        skip_ws();
        if (!accept(')')) throw std::invalid_argument("expression: missing ')'");
        return inner;
      }
      throw std::invalid_argument(std::string("expression: unexpected character '") + c + "'");
    }

    bool accept(char c) {
      if (pos_ < s_.size() && s_[pos_] == c) {
        ++pos_;
        return true;
      }
      return false;
    }

    const std::string& s_;
    std::size_t pos_ = 0;
  };

  NodePtr root_;
};

}  // namespace pnp
