// NanoJS: syntax tree, parser and printer.
#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace nanoflow {

struct Loc {
  std::string file;
  int line = 0;
  int column = 0;

  auto operator<=>(const Loc&) const = default;
  bool operator==(const Loc&) const = default;

  std::string str() const;
  // Accepts "file:line:col"; the file part may itself contain colons.
  static Loc parse(std::string_view s);
};

struct Null {
  auto operator<=>(const Null&) const = default;
  bool operator==(const Null&) const = default;
};

using BaseValue = std::variant<Null, bool, std::int64_t, std::string>;

std::string render(const BaseValue& b);      // JSON-ish: "abc" quoted
std::string to_display(const BaseValue& b);  // JS string coercion

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(Loc loc, const std::string& msg);
  const Loc& loc() const { return loc_; }

 private:
  Loc loc_;
};

enum class BinOp { Add, Sub, Mul, StrictEq, StrictNe, Lt, And, Or };
const char* binop_text(BinOp op);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { Literal, Var, Field, Binary, Not, Object };
  Kind kind = Kind::Literal;
  Loc loc;
  BaseValue lit;
  std::string name;   // Var, Field (object name)
  std::string field;  // Field
  BinOp op = BinOp::Add;
  ExprPtr lhs, rhs;  // Binary; lhs for Not
  std::vector<std::pair<std::string, ExprPtr>> fields;  // Object

  static ExprPtr literal(BaseValue v, Loc loc = {});
  static ExprPtr var(std::string n, Loc loc = {});
  static ExprPtr field_access(std::string obj, std::string f, Loc loc = {});
  static ExprPtr binary(BinOp op, ExprPtr l, ExprPtr r, Loc loc = {});
  static ExprPtr negate(ExprPtr e, Loc loc = {});
  static ExprPtr object(std::vector<std::pair<std::string, ExprPtr>> fs,
                        Loc loc = {});
};

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;

struct Stmt {
  enum class Kind {
    Skip,
    Seq,
    Assign,
    AssignField,
    If,
    While,
    Sink,
    Upgrade,
    MarkSrc,
    Pop  // interpreter-internal
  };
  Kind kind = Kind::Skip;
  Loc loc;
  std::string target;  // Assign, AssignField (object), Upgrade, MarkSrc
  std::string field;   // AssignField
  ExprPtr expr;        // rhs, guard, sink argument
  StmtPtr first, second;  // Seq; If then/else; While body in `first`
  // Set on the if produced by unfolding a while.
  bool unfolded = false;

  static StmtPtr skip(Loc loc = {});
  static StmtPtr seq(StmtPtr a, StmtPtr b);
  static StmtPtr assign(std::string x, ExprPtr e, Loc loc);
  static StmtPtr assign_field(std::string x, std::string f, ExprPtr e, Loc loc);
  static StmtPtr if_(ExprPtr g, StmtPtr t, StmtPtr e, Loc loc);
  static StmtPtr while_(ExprPtr g, StmtPtr body, Loc loc);
  static StmtPtr sink(ExprPtr e, Loc loc);
  static StmtPtr upgrade(std::string x, Loc loc);
  static StmtPtr mark_src(std::string x, Loc loc);
  static StmtPtr pop(Loc loc);

  // Right-nested sequence; empty list gives skip.
  static StmtPtr block(const std::vector<StmtPtr>& stmts);
};

StmtPtr parse(std::string_view text, const std::string& filename);
ExprPtr parse_expr(std::string_view text, const std::string& filename);

std::string print(const StmtPtr& s);
std::string print(const ExprPtr& e);

// One-step unfolding of a while into an if (else branch skip).
class NotAWhile : public std::logic_error {
 public:
  NotAWhile() : std::logic_error("desugarWhile: statement is not a while") {}
};
StmtPtr desugar_while(const StmtPtr& s);

// Removes skips that sit inside sequences (skip;c == c).
StmtPtr normalize_skips(const StmtPtr& s);

// Structural equality ignoring locations.
bool same_shape(const StmtPtr& a, const StmtPtr& b);
bool same_shape(const ExprPtr& a, const ExprPtr& b);

// All statement locations in program order (pop excluded).
std::vector<Loc> statement_locs(const StmtPtr& s);
int count_assignments(const StmtPtr& s);
// Names read by an expression, in first-occurrence order.
std::vector<std::string> free_vars(const ExprPtr& e);

}  // namespace nanoflow
