#include "sode/errors.hpp"
#include "sode/expr.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

namespace sode {

namespace {

struct Token {
  enum Kind { Number, Ident, Op, End } kind = End;
  std::string text;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view s) : src_(s) {}

  Token next() {
    skip_space();
    Token t;
    t.line = line_;
    t.col = col_;
    if (pos_ >= src_.size()) return t;
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      t.kind = Token::Number;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) t.text += take();
      if (pos_ < src_.size() && src_[pos_] == '.') {
        t.text += take();
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) t.text += take();
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        std::size_t look = pos_ + 1;
        if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
        if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
          while (pos_ < look) t.text += take();
          while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) t.text += take();
        }
      }
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      t.kind = Token::Ident;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) t.text += take();
      return t;
    }
    if (std::string_view("+-*/^(),").find(c) != std::string_view::npos) {
      t.kind = Token::Op;
      t.text = std::string(1, take());
      return t;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
  }

 private:
  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) take();
  }
  char take() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }
  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

Rational parse_decimal(const std::string& text) {
  std::size_t epos = text.find_first_of("eE");
  std::string mantissa = text.substr(0, epos);
  long long exp10 = 0;
  if (epos != std::string::npos) exp10 = std::stoll(text.substr(epos + 1));
  std::size_t dot = mantissa.find('.');
  std::string digits = mantissa;
  if (dot != std::string::npos) {
    digits = mantissa.substr(0, dot) + mantissa.substr(dot + 1);
    exp10 -= static_cast<long long>(mantissa.size() - dot - 1);
  }
  digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size()));
  if (digits.empty()) digits = "0";
  boost::multiprecision::cpp_int n(digits);
  boost::multiprecision::cpp_int scale = boost::multiprecision::pow(boost::multiprecision::cpp_int(10), static_cast<unsigned>(exp10 < 0 ? -exp10 : exp10));
  return exp10 < 0 ? Rational(n, scale) : Rational(n * scale);
}

class Parser {
 public:
  explicit Parser(std::string_view s) : lex_(s) { advance(); }

  Expression parse_all() {
    Expression e = expression();
    if (cur_.kind != Token::End) fail("unexpected '" + cur_.text + "'");
    return e;
  }

 private:
  void advance() { cur_ = lex_.next(); }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, cur_.line, cur_.col); }
  bool at(const char* op) const { return cur_.kind == Token::Op && cur_.text == op; }
  void expect(const char* op) {
    if (!at(op)) fail(std::string("expected '") + op + "'" + (cur_.kind == Token::End ? " before end of input" : ""));
    advance();
  }

  Expression expression() {
    std::vector<Expression> terms{term()};
    while (at("+") || at("-")) {
      bool minus = at("-");
      advance();
      Expression t = term();
      terms.push_back(minus ? -t : t);
    }
    return terms.size() == 1 ? terms[0] : Expression::sum(std::move(terms));
  }

  Expression term() {
    Expression acc = unary();
    while (at("*") || at("/")) {
      bool div = at("/");
      advance();
      Expression rhs = unary();
      acc = div ? Expression::quotient(acc, rhs) : Expression::product({acc, rhs});
    }
    return acc;
  }

  Expression unary() {
    if (at("-")) {
      advance();
      Expression inner = unary();
      if (inner.is_constant()) return Expression(-inner.number());
      return Expression::product({Expression(-1), inner});
    }
    if (at("+")) {
      advance();
      return unary();
    }
    return power();
  }

  Expression power() {
    Expression base = primary();
    if (!at("^")) return base;
    Token where = cur_;
    advance();
    Expression ex = unary();
    Rational r = constant_exponent(ex, where);
    return Expression::power(base, r);
  }

  Rational constant_exponent(const Expression& e, const Token& where) const {
    auto value = fold(e);
    if (!value) throw ParseError("exponent must be a rational constant", where.line, where.col);
    return *value;
  }

  std::optional<Rational> fold(const Expression& e) const {
    switch (e.kind()) {
      case Expression::Kind::Constant:
        if (!e.number().is_exact()) return std::nullopt;
        return e.number().exact();
      case Expression::Kind::Sum: {
        Rational acc = 0;
        for (const auto& c : e.children()) {
          auto v = fold(c);
          if (!v) return std::nullopt;
          acc += *v;
        }
        return acc;
      }
      case Expression::Kind::Product: {
        Rational acc = 1;
        for (const auto& c : e.children()) {
          auto v = fold(c);
          if (!v) return std::nullopt;
          acc *= *v;
        }
        return acc;
      }
      case Expression::Kind::Quotient: {
        auto n = fold(e.children()[0]);
        auto d = fold(e.children()[1]);
        if (!n || !d) return std::nullopt;
        if (*d == 0) throw ParseError("zero denominator in exponent", cur_.line, cur_.col);
        return *n / *d;
      }
      case Expression::Kind::Power: {
        auto b = fold(e.children()[0]);
        if (!b || boost::multiprecision::denominator(e.exponent()) != 1) return std::nullopt;
        long long k = e.exponent().convert_to<long long>();
        if (*b == 0 && k < 0) throw ParseError("zero denominator in exponent", cur_.line, cur_.col);
        return pow(Number(*b), k).exact();
      }
      default: return std::nullopt;
    }
  }

  Expression primary() {
    if (cur_.kind == Token::Number) {
      Rational v = parse_decimal(cur_.text);
      advance();
      return Expression(Number(v));
    }
    if (cur_.kind == Token::Ident) {
      std::string name = cur_.text;
      Token where = cur_;
      advance();
      if (!at("(")) return Expression::symbol(name);
      advance();
      Expression arg = expression();
      expect(")");
      if (name == "exp") return Expression::function(FunctionKind::Exp, arg);
      if (name == "log") return Expression::function(FunctionKind::Log, arg);
      if (name == "sin") return Expression::function(FunctionKind::Sin, arg);
      if (name == "cos") return Expression::function(FunctionKind::Cos, arg);
      if (name == "sqrt") return Expression::power(arg, Rational(1, 2));
      throw ParseError("unknown function '" + name + "'", where.line, where.col);
    }
    if (at("(")) {
      advance();
      Expression e = expression();
      expect(")");
      return e;
    }
    if (cur_.kind == Token::End) fail("unexpected end of input");
    fail("unexpected '" + cur_.text + "'");
  }

  Lexer lex_;
  Token cur_;
};

}  // namespace

Expression parse(std::string_view text) { return Parser(text).parse_all(); }

}  // namespace sode
