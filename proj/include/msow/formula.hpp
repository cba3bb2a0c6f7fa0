#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace msow {

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t pos)
        : Error(msg + " at offset " + std::to_string(pos)), position(pos) {}
    std::size_t position;
};

class UnknownPredicateError : public Error {
public:
    using Error::Error;
};

class SortError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// AST

enum class Sort { Element, Set, Edge, EdgeSet };

enum class Kind { Exists, Forall, And, Or, Not, Implies, Iff, Atom, Lib, True, False };

enum class Pred { Prec, Edge, Child, Color, In, Eq, Incident, InE };

const char* to_string(Sort s);
const char* to_string(Pred p);

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

/// Immutable formula node. Binders (Exists/Forall) carry the bound variable and
/// its sort; atoms carry a predicate with argument variables; lib nodes name a
/// registered library predicate with integer parameters and argument variables.
struct Formula {
    Kind kind = Kind::True;
    std::string var;
    Sort sort = Sort::Element;
    std::vector<FormulaPtr> kids;
    Pred pred = Pred::Eq;
    std::string color;
    std::string lib;
    std::vector<std::int64_t> params;
    std::vector<std::string> args;

    bool is_binder() const { return kind == Kind::Exists || kind == Kind::Forall; }
};

/// Structural equality.
bool equal(const Formula& a, const Formula& b);

// Builders ------------------------------------------------------------------

FormulaPtr make_true();
FormulaPtr make_false();
FormulaPtr exists(Sort s, std::string v, FormulaPtr body);
FormulaPtr forall(Sort s, std::string v, FormulaPtr body);
inline FormulaPtr exists1(std::string v, FormulaPtr b) { return exists(Sort::Element, std::move(v), std::move(b)); }
inline FormulaPtr forall1(std::string v, FormulaPtr b) { return forall(Sort::Element, std::move(v), std::move(b)); }
inline FormulaPtr exists_set(std::string v, FormulaPtr b) { return exists(Sort::Set, std::move(v), std::move(b)); }
inline FormulaPtr forall_set(std::string v, FormulaPtr b) { return forall(Sort::Set, std::move(v), std::move(b)); }
FormulaPtr conj(std::vector<FormulaPtr> kids);
FormulaPtr disj(std::vector<FormulaPtr> kids);
FormulaPtr neg(FormulaPtr f);
FormulaPtr implies(FormulaPtr a, FormulaPtr b);
FormulaPtr iff(FormulaPtr a, FormulaPtr b);
FormulaPtr atom(Pred p, std::vector<std::string> args);
FormulaPtr color_atom(std::string color, std::string v);
FormulaPtr lib_call(std::string name, std::vector<std::int64_t> params, std::vector<std::string> args);

// Frequently used atoms.
inline FormulaPtr prec(std::string x, std::string y) { return atom(Pred::Prec, {std::move(x), std::move(y)}); }
inline FormulaPtr in(std::string x, std::string X) { return atom(Pred::In, {std::move(x), std::move(X)}); }
inline FormulaPtr eq(std::string x, std::string y) { return atom(Pred::Eq, {std::move(x), std::move(y)}); }
inline FormulaPtr edge(std::string x, std::string y) { return atom(Pred::Edge, {std::move(x), std::move(y)}); }
inline FormulaPtr child(std::string x, std::string y) { return atom(Pred::Child, {std::move(x), std::move(y)}); }

// Desugared set-level shorthands. Each introduces one element quantifier over `z`.
FormulaPtr subset_of(const std::string& A, const std::string& B, const std::string& z);
FormulaPtr set_equal(const std::string& A, const std::string& B, const std::string& z);
FormulaPtr is_empty(const std::string& A, const std::string& z);
/// A = B \ C, written as a definition `forall z (z in A <-> (z in B and not z in C))`.
FormulaPtr is_difference(const std::string& A, const std::string& B, const std::string& C, const std::string& z);
/// Disjointness of two sets.
FormulaPtr disjoint(const std::string& A, const std::string& B, const std::string& z);

// Printing / parsing -----------------------------------------------------------

std::string print(const Formula& f);
inline std::string print(const FormulaPtr& f) { return print(*f); }

/// Multi-line pretty print (same grammar, indented).
std::string pretty(const Formula& f);

struct FreeVar {
    std::string name;
    Sort sort;
    friend bool operator==(const FreeVar&, const FreeVar&) = default;
};

class LibRegistry;

/// Free variables in first-occurrence order. Lib arguments take their sort
/// from the registry when given, otherwise Set.
std::vector<FreeVar> free_vars(const Formula& f, const LibRegistry* reg = nullptr);

// ---------------------------------------------------------------------------
// Signatures

struct Signature {
    std::string name;
    std::vector<Pred> predicates;
    std::vector<std::string> colors;
    bool sets = true;
    bool edge_sets = false;

    bool has(Pred p) const;
    bool has_color(const std::string& c) const;

    static Signature word();
    static Signature unary();
    static Signature path();
    static Signature threshold();
    static Signature tree(std::vector<std::string> colors);
    static Signature clique();
    /// Everything allowed (useful for library bodies).
    static Signature any();
};

// ---------------------------------------------------------------------------
// Library predicates

/// Instantiated library body: the formal argument names, their sorts, and a
/// formula whose free variables are exactly the formals.
struct LibBody {
    std::vector<std::string> formals;
    std::vector<Sort> sorts;
    FormulaPtr body;
};

struct LibDef {
    std::string name;
    int param_count = 0;
    std::function<LibBody(std::span<const std::int64_t>)> instantiate;
};

/// Registry of named library predicates. Instantiated bodies are cached per
/// (name, params); the registry is safe to share once populated.
class LibRegistry {
public:
    void add(LibDef def);
    bool contains(const std::string& name) const;
    const LibDef& def(const std::string& name) const;
    const LibBody& body(const std::string& name, std::span<const std::int64_t> params) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, LibDef> defs_;
    mutable std::map<std::pair<std::string, std::vector<std::int64_t>>, LibBody> cache_;
};

struct ParseResult {
    FormulaPtr formula;
    std::vector<FreeVar> free;
};

/// Parse the s-expression grammar. Sorts are resolved from binders and usage;
/// `subset` and set-level `=` are desugared into element quantification.
/// When `registry` is given, lib calls are checked for existence and arity.
ParseResult parse_formula(std::string_view text, const Signature& sig, const LibRegistry* registry = nullptr);

// ---------------------------------------------------------------------------
// Metrics, validation, expansion

struct Metrics {
    std::uint64_t size = 0;
    std::uint64_t first_order_quantifiers = 0;
    std::uint64_t set_quantifiers = 0;
    std::uint64_t edge_set_quantifiers = 0;
    std::uint64_t quantifier_depth = 0;
    friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Node counts. With `registry` and `expand_lib`, each lib call is measured as
/// its fully expanded body (memoized, never materialized).
Metrics formula_metrics(const Formula& f, const LibRegistry* registry = nullptr, bool expand_lib = false);

struct Violation {
    std::string path;
    std::string message;
};

/// Well-sortedness check. `declared_free` lists variables allowed to occur free.
std::vector<Violation> validate(const Formula& f, const Signature& sig, const LibRegistry* registry = nullptr,
                                const std::vector<FreeVar>& declared_free = {});

/// Replace every lib call with its alpha-renamed body. Throws on unknown names
/// and on cyclic definitions.
FormulaPtr expand_lib(const FormulaPtr& f, const LibRegistry& registry);

/// Substitute free variable names (no capture check; bound names must not clash).
FormulaPtr rename_free(const FormulaPtr& f, const std::map<std::string, std::string>& mapping);

}  // namespace msow
