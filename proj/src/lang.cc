#include "nanoflow/lang.h"

#include <cctype>
#include <charconv>
#include <functional>
#include <sstream>

namespace nanoflow {

std::string Loc::str() const {
  return file + ":" + std::to_string(line) + ":" + std::to_string(column);
}

Loc Loc::parse(std::string_view s) {
  auto c2 = s.rfind(':');
  if (c2 == std::string_view::npos || c2 == 0)
    throw std::invalid_argument("bad location: " + std::string(s));
  auto c1 = s.rfind(':', c2 - 1);
  if (c1 == std::string_view::npos)
    throw std::invalid_argument("bad location: " + std::string(s));
  Loc l;
  l.file = std::string(s.substr(0, c1));
  auto num = [&](std::string_view t) {
    int v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || v <= 0)
      throw std::invalid_argument("bad location: " + std::string(s));
    return v;
  };
  l.line = num(s.substr(c1 + 1, c2 - c1 - 1));
  l.column = num(s.substr(c2 + 1));
  return l;
}

static std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string render(const BaseValue& b) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Null>) return "null";
        else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
        else return quote(v);
      },
      b);
}

std::string to_display(const BaseValue& b) {
  if (auto s = std::get_if<std::string>(&b)) return *s;
  return render(b);
}

static std::string format_error(const Loc& loc, const std::string& msg) {
  return loc.str() + ": syntax error: " + msg;
}

SyntaxError::SyntaxError(Loc loc, const std::string& msg)
    : std::runtime_error(format_error(loc, msg)), loc_(std::move(loc)) {}

const char* binop_text(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::StrictEq: return "===";
    case BinOp::StrictNe: return "!==";
    case BinOp::Lt: return "<";
    case BinOp::And: return "&&";
    case BinOp::Or: return "||";
  }
  return "?";
}

// ---- constructors

ExprPtr Expr::literal(BaseValue v, Loc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Literal;
  e->lit = std::move(v);
  e->loc = std::move(loc);
  return e;
}
ExprPtr Expr::var(std::string n, Loc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Var;
  e->name = std::move(n);
  e->loc = std::move(loc);
  return e;
}
ExprPtr Expr::field_access(std::string obj, std::string f, Loc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Field;
  e->name = std::move(obj);
  e->field = std::move(f);
  e->loc = std::move(loc);
  return e;
}
ExprPtr Expr::binary(BinOp op, ExprPtr l, ExprPtr r, Loc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Binary;
  e->op = op;
  e->lhs = std::move(l);
  e->rhs = std::move(r);
  e->loc = std::move(loc);
  return e;
}
ExprPtr Expr::negate(ExprPtr x, Loc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Not;
  e->lhs = std::move(x);
  e->loc = std::move(loc);
  return e;
}
ExprPtr Expr::object(std::vector<std::pair<std::string, ExprPtr>> fs, Loc loc) {
  auto e = std::make_shared<Expr>();
  e->kind = Kind::Object;
  e->fields = std::move(fs);
  e->loc = std::move(loc);
  return e;
}

static std::shared_ptr<Stmt> mk(Stmt::Kind k, Loc loc) {
  auto s = std::make_shared<Stmt>();
  s->kind = k;
  s->loc = std::move(loc);
  return s;
}

StmtPtr Stmt::skip(Loc loc) { return mk(Kind::Skip, std::move(loc)); }
StmtPtr Stmt::seq(StmtPtr a, StmtPtr b) {
  auto s = mk(Kind::Seq, a->loc);
  s->first = std::move(a);
  s->second = std::move(b);
  return s;
}
StmtPtr Stmt::assign(std::string x, ExprPtr e, Loc loc) {
  auto s = mk(Kind::Assign, std::move(loc));
  s->target = std::move(x);
  s->expr = std::move(e);
  return s;
}
StmtPtr Stmt::assign_field(std::string x, std::string f, ExprPtr e, Loc loc) {
  auto s = mk(Kind::AssignField, std::move(loc));
  s->target = std::move(x);
  s->field = std::move(f);
  s->expr = std::move(e);
  return s;
}
StmtPtr Stmt::if_(ExprPtr g, StmtPtr t, StmtPtr e, Loc loc) {
  auto s = mk(Kind::If, std::move(loc));
  s->expr = std::move(g);
  s->first = std::move(t);
  s->second = std::move(e);
  return s;
}
StmtPtr Stmt::while_(ExprPtr g, StmtPtr body, Loc loc) {
  auto s = mk(Kind::While, std::move(loc));
  s->expr = std::move(g);
  s->first = std::move(body);
  return s;
}
StmtPtr Stmt::sink(ExprPtr e, Loc loc) {
  auto s = mk(Kind::Sink, std::move(loc));
  s->expr = std::move(e);
  return s;
}
StmtPtr Stmt::upgrade(std::string x, Loc loc) {
  auto s = mk(Kind::Upgrade, std::move(loc));
  s->target = std::move(x);
  return s;
}
StmtPtr Stmt::mark_src(std::string x, Loc loc) {
  auto s = mk(Kind::MarkSrc, std::move(loc));
  s->target = std::move(x);
  return s;
}
StmtPtr Stmt::pop(Loc loc) { return mk(Kind::Pop, std::move(loc)); }

StmtPtr Stmt::block(const std::vector<StmtPtr>& stmts) {
  if (stmts.empty()) return skip();
  StmtPtr acc = stmts.back();
  for (auto it = stmts.rbegin() + 1; it != stmts.rend(); ++it)
    acc = seq(*it, acc);
  return acc;
}

// ---- lexer

namespace {

enum class Tok {
  Ident, Int, Str, LParen, RParen, LBrace, RBrace, Semi, Assign, Dot, Comma,
  Colon, Plus, Minus, Star, Lt, Bang, AndAnd, OrOr, EqEqEq, NotEqEq, End
};

struct Token {
  Tok kind;
  std::string text;
  std::int64_t ival = 0;
  Loc loc;
};

class Lexer {
 public:
  Lexer(std::string_view src, std::string file) : src_(src), file_(std::move(file)) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Loc at = here();
      if (pos_ >= src_.size()) {
        out.push_back({Tok::End, "", 0, at});
        return out;
      }
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::string id;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
          id += advance();
        out.push_back({Tok::Ident, id, 0, at});
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        std::string digits;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
          digits += advance();
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
        if (ec != std::errc()) throw SyntaxError(at, "integer literal out of range");
        out.push_back({Tok::Int, digits, v, at});
      } else if (c == '"') {
        advance();
        std::string s;
        for (;;) {
          if (pos_ >= src_.size() || src_[pos_] == '\n')
            throw SyntaxError(at, "unterminated string literal");
          char d = advance();
          if (d == '"') break;
          if (d == '\\') {
            if (pos_ >= src_.size()) throw SyntaxError(at, "unterminated string literal");
            char e = advance();
            switch (e) {
              case 'n': s += '\n'; break;
              case 't': s += '\t'; break;
              case '"': s += '"'; break;
              case '\\': s += '\\'; break;
              default: throw SyntaxError(at, std::string("bad escape \\") + e);
            }
          } else {
            s += d;
          }
        }
        out.push_back({Tok::Str, s, 0, at});
      } else {
        out.push_back(punct(at));
      }
    }
  }

 private:
  Loc here() const { return {file_, line_, col_}; }

  char advance() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  bool starts(std::string_view p) const { return src_.substr(pos_, p.size()) == p; }

  void skip_space() {
    while (pos_ < src_.size()) {
      if (std::isspace(static_cast<unsigned char>(src_[pos_]))) {
        advance();
      } else if (starts("//")) {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  Token punct(const Loc& at) {
    static const std::pair<std::string_view, Tok> table[] = {
        {"===", Tok::EqEqEq}, {"!==", Tok::NotEqEq}, {"&&", Tok::AndAnd},
        {"||", Tok::OrOr},    {"(", Tok::LParen},    {")", Tok::RParen},
        {"{", Tok::LBrace},   {"}", Tok::RBrace},    {";", Tok::Semi},
        {"=", Tok::Assign},   {".", Tok::Dot},       {",", Tok::Comma},
        {":", Tok::Colon},    {"+", Tok::Plus},      {"-", Tok::Minus},
        {"*", Tok::Star},     {"<", Tok::Lt},        {"!", Tok::Bang},
    };
    for (auto& [text, kind] : table) {
      if (starts(text)) {
        for (size_t i = 0; i < text.size(); ++i) advance();
        return {kind, std::string(text), 0, at};
      }
    }
    throw SyntaxError(at, std::string("unexpected character '") + src_[pos_] + "'");
  }

  std::string_view src_;
  std::string file_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

const char* tok_name(Tok t) {
  switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Int: return "integer";
    case Tok::Str: return "string";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::Semi: return "';'";
    case Tok::Assign: return "'='";
    case Tok::Dot: return "'.'";
    case Tok::Comma: return "','";
    case Tok::Colon: return "':'";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Lt: return "'<'";
    case Tok::Bang: return "'!'";
    case Tok::AndAnd: return "'&&'";
    case Tok::OrOr: return "'||'";
    case Tok::EqEqEq: return "'==='";
    case Tok::NotEqEq: return "'!=='";
    case Tok::End: return "end of input";
  }
  return "?";
}

bool is_keyword(const std::string& s) {
  static const char* kws[] = {"skip", "if", "else", "while", "sink", "upgrade",
                              "markSrc", "true", "false", "null"};
  for (auto k : kws)
    if (s == k) return true;
  return false;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  StmtPtr program() {
    std::vector<StmtPtr> stmts;
    while (peek().kind != Tok::End) stmts.push_back(statement());
    return Stmt::block(stmts);
  }

  ExprPtr lone_expr() {
    auto e = expr();
    expect(Tok::End);
    return e;
  }

 private:
  const Token& peek(size_t k = 0) const {
    return toks_[std::min(pos_ + k, toks_.size() - 1)];
  }
  Token take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  bool at_word(const char* w) const {
    return peek().kind == Tok::Ident && peek().text == w;
  }
  Token expect(Tok t) {
    if (peek().kind != t)
      throw SyntaxError(peek().loc, std::string("expected ") + tok_name(t) +
                                        ", found " + describe(peek()));
    return take();
  }
  static std::string describe(const Token& t) {
    if (t.kind == Tok::Ident || t.kind == Tok::Int) return "'" + t.text + "'";
    return tok_name(t.kind);
  }
  std::string name() {
    auto t = expect(Tok::Ident);
    if (is_keyword(t.text)) throw SyntaxError(t.loc, "keyword '" + t.text + "' used as a name");
    return t.text;
  }

  StmtPtr block() {
    expect(Tok::LBrace);
    std::vector<StmtPtr> stmts;
    while (peek().kind != Tok::RBrace) {
      if (peek().kind == Tok::End) throw SyntaxError(peek().loc, "unterminated block");
      stmts.push_back(statement());
    }
    take();
    return Stmt::block(stmts);
  }

  // A braced block, or a single statement as in `if (x) y = 5;`.
  StmtPtr body() { return peek().kind == Tok::LBrace ? block() : statement(); }

  StmtPtr statement() {
    Loc at = peek().loc;
    if (at_word("skip")) {
      take();
      expect(Tok::Semi);
      return Stmt::skip(at);
    }
    if (at_word("if")) {
      take();
      expect(Tok::LParen);
      auto g = expr();
      expect(Tok::RParen);
      auto t = body();
      StmtPtr e = Stmt::skip();
      if (at_word("else")) {
        take();
        e = body();
      }
      return Stmt::if_(g, t, e, at);
    }
    if (at_word("while")) {
      take();
      expect(Tok::LParen);
      auto g = expr();
      expect(Tok::RParen);
      return Stmt::while_(g, body(), at);
    }
    if (at_word("sink")) {
      take();
      expect(Tok::LParen);
      auto e = expr();
      expect(Tok::RParen);
      expect(Tok::Semi);
      return Stmt::sink(e, at);
    }
    if (at_word("upgrade") || at_word("markSrc")) {
      bool up = take().text == "upgrade";
      expect(Tok::LParen);
      auto x = name();
      expect(Tok::RParen);
      expect(Tok::Semi);
      return up ? Stmt::upgrade(x, at) : Stmt::mark_src(x, at);
    }
    if (peek().kind != Tok::Ident)
      throw SyntaxError(at, "expected a statement, found " + describe(peek()));
    auto x = name();
    if (peek().kind == Tok::Dot) {
      take();
      auto f = name();
      expect(Tok::Assign);
      auto e = expr();
      expect(Tok::Semi);
      return Stmt::assign_field(x, f, e, at);
    }
    expect(Tok::Assign);
    auto e = expr();
    expect(Tok::Semi);
    return Stmt::assign(x, e, at);
  }

  // Precedence climbing, all binary operators left-associative.
  static int prec(Tok t) {
    switch (t) {
      case Tok::OrOr: return 1;
      case Tok::AndAnd: return 2;
      case Tok::EqEqEq:
      case Tok::NotEqEq: return 3;
      case Tok::Lt: return 4;
      case Tok::Plus:
      case Tok::Minus: return 5;
      case Tok::Star: return 6;
      default: return 0;
    }
  }
  static BinOp op_of(Tok t) {
    switch (t) {
      case Tok::OrOr: return BinOp::Or;
      case Tok::AndAnd: return BinOp::And;
      case Tok::EqEqEq: return BinOp::StrictEq;
      case Tok::NotEqEq: return BinOp::StrictNe;
      case Tok::Lt: return BinOp::Lt;
      case Tok::Plus: return BinOp::Add;
      case Tok::Minus: return BinOp::Sub;
      default: return BinOp::Mul;
    }
  }

  ExprPtr expr(int min_prec = 1) {
    auto lhs = unary();
    for (;;) {
      int p = prec(peek().kind);
      if (p < min_prec || p == 0) return lhs;
      auto t = take();
      auto rhs = expr(p + 1);
      lhs = Expr::binary(op_of(t.kind), lhs, rhs, t.loc);
    }
  }

  ExprPtr unary() {
    if (peek().kind == Tok::Bang) {
      auto t = take();
      return Expr::negate(unary(), t.loc);
    }
    return primary();
  }

  ExprPtr primary() {
    Token t = peek();
    switch (t.kind) {
      case Tok::Int:
        take();
        return Expr::literal(t.ival, t.loc);
      case Tok::Minus:
        if (peek(1).kind == Tok::Int) {
          take();
          auto n = take();
          return Expr::literal(-n.ival, t.loc);
        }
        break;
      case Tok::Str:
        take();
        return Expr::literal(t.text, t.loc);
      case Tok::LParen: {
        take();
        auto e = expr();
        expect(Tok::RParen);
        return e;
      }
      case Tok::LBrace: {
        take();
        std::vector<std::pair<std::string, ExprPtr>> fs;
        if (peek().kind != Tok::RBrace) {
          for (;;) {
            auto f = name();
            for (auto& [k, _] : fs)
              if (k == f) throw SyntaxError(t.loc, "duplicate field '" + f + "'");
            expect(Tok::Colon);
            fs.emplace_back(f, expr());
            if (peek().kind != Tok::Comma) break;
            take();
          }
        }
        expect(Tok::RBrace);
        return Expr::object(std::move(fs), t.loc);
      }
      case Tok::Ident: {
        if (t.text == "true" || t.text == "false") {
          take();
          return Expr::literal(t.text == "true", t.loc);
        }
        if (t.text == "null") {
          take();
          return Expr::literal(Null{}, t.loc);
        }
        auto n = name();
        if (peek().kind == Tok::Dot) {
          take();
          return Expr::field_access(n, name(), t.loc);
        }
        return Expr::var(n, t.loc);
      }
      default:
        break;
    }
    throw SyntaxError(t.loc, "expected an expression, found " + describe(t));
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
};

}  // namespace

StmtPtr parse(std::string_view text, const std::string& filename) {
  return Parser(Lexer(text, filename).run()).program();
}

ExprPtr parse_expr(std::string_view text, const std::string& filename) {
  return Parser(Lexer(text, filename).run()).lone_expr();
}

// ---- printer

static int expr_prec(const Expr& e) {
  if (e.kind == Expr::Kind::Binary) {
    switch (e.op) {
      case BinOp::Or: return 1;
      case BinOp::And: return 2;
      case BinOp::StrictEq:
      case BinOp::StrictNe: return 3;
      case BinOp::Lt: return 4;
      case BinOp::Add:
      case BinOp::Sub: return 5;
      case BinOp::Mul: return 6;
    }
  }
  if (e.kind == Expr::Kind::Literal) {
    auto i = std::get_if<std::int64_t>(&e.lit);
    if (i && *i < 0) return 7;
  }
  return 8;
}

static void print_expr(std::ostream& os, const Expr& e, int ctx) {
  bool paren = expr_prec(e) < ctx;
  if (paren) os << '(';
  switch (e.kind) {
    case Expr::Kind::Literal: os << render(e.lit); break;
    case Expr::Kind::Var: os << e.name; break;
    case Expr::Kind::Field: os << e.name << '.' << e.field; break;
    case Expr::Kind::Binary: {
      int p = expr_prec(e);
      print_expr(os, *e.lhs, p);
      os << ' ' << binop_text(e.op) << ' ';
      print_expr(os, *e.rhs, p + 1);
      break;
    }
    case Expr::Kind::Not:
      os << '!';
      print_expr(os, *e.lhs, 8);
      break;
    case Expr::Kind::Object: {
      os << '{';
      bool first = true;
      for (auto& [k, v] : e.fields) {
        if (!first) os << ", ";
        first = false;
        os << k << ": ";
        print_expr(os, *v, 1);
      }
      os << '}';
      break;
    }
  }
  if (paren) os << ')';
}

std::string print(const ExprPtr& e) {
  std::ostringstream os;
  print_expr(os, *e, 1);
  return os.str();
}

static void flatten(const StmtPtr& s, std::vector<StmtPtr>& out) {
  if (s->kind == Stmt::Kind::Seq) {
    flatten(s->first, out);
    flatten(s->second, out);
  } else {
    out.push_back(s);
  }
}

static void print_stmt(std::ostream& os, const StmtPtr& s, int indent);

static void print_block(std::ostream& os, const StmtPtr& s, int indent) {
  os << "{\n";
  std::vector<StmtPtr> items;
  flatten(s, items);
  for (auto& it : items) {
    if (it->kind == Stmt::Kind::Skip && items.size() == 1) break;
    print_stmt(os, it, indent + 2);
  }
  os << std::string(indent, ' ') << '}';
}

static void print_stmt(std::ostream& os, const StmtPtr& s, int indent) {
  std::string pad(indent, ' ');
  switch (s->kind) {
    case Stmt::Kind::Seq: {
      std::vector<StmtPtr> items;
      flatten(s, items);
      for (auto& it : items) print_stmt(os, it, indent);
      return;
    }
    case Stmt::Kind::Skip: os << pad << "skip;\n"; return;
    case Stmt::Kind::Assign:
      os << pad << s->target << " = " << print(s->expr) << ";\n";
      return;
    case Stmt::Kind::AssignField:
      os << pad << s->target << '.' << s->field << " = " << print(s->expr) << ";\n";
      return;
    case Stmt::Kind::If:
      os << pad << "if (" << print(s->expr) << ") ";
      print_block(os, s->first, indent);
      if (s->second->kind != Stmt::Kind::Skip) {
        os << " else ";
        print_block(os, s->second, indent);
      }
      os << '\n';
      return;
    case Stmt::Kind::While:
      os << pad << "while (" << print(s->expr) << ") ";
      print_block(os, s->first, indent);
      os << '\n';
      return;
    case Stmt::Kind::Sink: os << pad << "sink(" << print(s->expr) << ");\n"; return;
    case Stmt::Kind::Upgrade: os << pad << "upgrade(" << s->target << ");\n"; return;
    case Stmt::Kind::MarkSrc: os << pad << "markSrc(" << s->target << ");\n"; return;
    case Stmt::Kind::Pop: os << pad << "// pop\n"; return;
  }
}

std::string print(const StmtPtr& s) {
  std::ostringstream os;
  print_stmt(os, s, 0);
  return os.str();
}

StmtPtr desugar_while(const StmtPtr& s) {
  if (s->kind != Stmt::Kind::While) throw NotAWhile();
  auto body = Stmt::seq(s->first, s);
  auto r = std::make_shared<Stmt>(*Stmt::if_(s->expr, body, Stmt::skip(s->loc), s->loc));
  r->unfolded = true;
  return r;
}

StmtPtr normalize_skips(const StmtPtr& s) {
  switch (s->kind) {
    case Stmt::Kind::Seq: {
      auto a = normalize_skips(s->first);
      auto b = normalize_skips(s->second);
      if (a->kind == Stmt::Kind::Skip) return b;
      if (b->kind == Stmt::Kind::Skip) return a;
      // Re-associate to the right so equal sequences get equal trees.
      if (a->kind == Stmt::Kind::Seq) return normalize_skips(Stmt::seq(a->first, Stmt::seq(a->second, b)));
      return Stmt::seq(a, b);
    }
    case Stmt::Kind::If: {
      auto r = std::make_shared<Stmt>(*s);
      r->first = normalize_skips(s->first);
      r->second = normalize_skips(s->second);
      return r;
    }
    case Stmt::Kind::While: {
      auto r = std::make_shared<Stmt>(*s);
      r->first = normalize_skips(s->first);
      return r;
    }
    default:
      return s;
  }
}

bool same_shape(const ExprPtr& a, const ExprPtr& b) {
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case Expr::Kind::Literal: return a->lit == b->lit;
    case Expr::Kind::Var: return a->name == b->name;
    case Expr::Kind::Field: return a->name == b->name && a->field == b->field;
    case Expr::Kind::Binary:
      return a->op == b->op && same_shape(a->lhs, b->lhs) && same_shape(a->rhs, b->rhs);
    case Expr::Kind::Not: return same_shape(a->lhs, b->lhs);
    case Expr::Kind::Object:
      if (a->fields.size() != b->fields.size()) return false;
      for (size_t i = 0; i < a->fields.size(); ++i)
        if (a->fields[i].first != b->fields[i].first ||
            !same_shape(a->fields[i].second, b->fields[i].second))
          return false;
      return true;
  }
  return false;
}

bool same_shape(const StmtPtr& a, const StmtPtr& b) {
  if (a->kind != b->kind) return false;
  auto eq = [](const StmtPtr& x, const StmtPtr& y) {
    if (!x || !y) return !x && !y;
    return same_shape(x, y);
  };
  auto eqe = [](const ExprPtr& x, const ExprPtr& y) {
    if (!x || !y) return !x && !y;
    return same_shape(x, y);
  };
  return a->target == b->target && a->field == b->field && eqe(a->expr, b->expr) &&
         eq(a->first, b->first) && eq(a->second, b->second);
}

std::vector<Loc> statement_locs(const StmtPtr& s) {
  std::vector<Loc> out;
  std::function<void(const StmtPtr&)> go = [&](const StmtPtr& t) {
    switch (t->kind) {
      case Stmt::Kind::Seq:
        go(t->first);
        go(t->second);
        return;
      case Stmt::Kind::Pop: return;
      case Stmt::Kind::Skip:
        if (t->loc.line > 0) out.push_back(t->loc);
        return;
      case Stmt::Kind::If:
        out.push_back(t->loc);
        go(t->first);
        go(t->second);
        return;
      case Stmt::Kind::While:
        out.push_back(t->loc);
        go(t->first);
        return;
      default:
        out.push_back(t->loc);
    }
  };
  go(s);
  return out;
}

int count_assignments(const StmtPtr& s) {
  switch (s->kind) {
    case Stmt::Kind::Seq:
    case Stmt::Kind::If:
      return count_assignments(s->first) + count_assignments(s->second);
    case Stmt::Kind::While: return count_assignments(s->first);
    case Stmt::Kind::Assign:
    case Stmt::Kind::AssignField: return 1;
    default: return 0;
  }
}

std::vector<std::string> free_vars(const ExprPtr& e) {
  std::vector<std::string> out;
  auto add = [&](const std::string& n) {
    for (auto& x : out)
      if (x == n) return;
    out.push_back(n);
  };
  std::function<void(const Expr&)> go = [&](const Expr& x) {
    switch (x.kind) {
      case Expr::Kind::Var:
      case Expr::Kind::Field: add(x.name); break;
      case Expr::Kind::Binary:
        go(*x.lhs);
        go(*x.rhs);
        break;
      case Expr::Kind::Not: go(*x.lhs); break;
      case Expr::Kind::Object:
        for (auto& [_, v] : x.fields) go(*v);
        break;
      case Expr::Kind::Literal: break;
    }
  };
  go(*e);
  return out;
}

}  // namespace nanoflow
