#pragma once

#include <cstdint>
#include <functional>
#include <json.hpp>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msow/bitset.hpp"
#include "msow/formula.hpp"
#include "msow/structure.hpp"

namespace msow {

/// Value of a variable: an element or edge index, or a set of elements/edges.
struct Value {
    Sort sort = Sort::Element;
    int index = -1;
    BitSet set;

    static Value element(int x) { return {Sort::Element, x, {}}; }
    static Value edge(int e) { return {Sort::Edge, e, {}}; }
    static Value elements(BitSet s) { return {Sort::Set, -1, std::move(s)}; }
    static Value edges(BitSet s) { return {Sort::EdgeSet, -1, std::move(s)}; }

    bool is_set() const { return sort == Sort::Set || sort == Sort::EdgeSet; }
    friend bool operator==(const Value& a, const Value& b) {
        return a.sort == b.sort && a.index == b.index && a.set == b.set;
    }
};

using Assignment = std::map<std::string, Value>;

nlohmann::json to_json(const Assignment& a, const Structure& s);
/// Parse {"x":3,"X":[0,2],"F":[[0,1]]}. Sorts come from `free` when listed,
/// otherwise from the JSON shape.
Assignment assignment_from_json(const nlohmann::json& j, const Structure& s, const std::vector<FreeVar>& free = {});

struct Budget {
    std::uint64_t max_steps = 20'000'000'000ULL;
    /// Largest candidate family a raw (unguarded) set quantifier may enumerate.
    std::uint64_t max_raw_width = std::uint64_t{1} << 22;

    /// Defaults, with max_steps overridable through MSOW_BUDGET.
    static Budget from_env();
};

enum class Outcome { False, True, BudgetExceeded };
const char* to_string(Outcome o);

struct EvalResult {
    Outcome outcome = Outcome::False;
    std::uint64_t steps = 0;
    std::optional<Assignment> witness;
};

nlohmann::json to_json(const EvalResult& r, const Structure& s);

// Oracles ------------------------------------------------------------------------

/// Semantic replacement for a library predicate. Receives the parameters and
/// the argument values in formal order. Must be pure.
using OracleFn = std::function<bool(const Structure&, std::span<const std::int64_t>, std::span<const Value* const>)>;

class OracleRegistry {
public:
    /// Throws on name collision.
    void add(const std::string& lib, OracleFn fn);
    const OracleFn* find(const std::string& lib) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, OracleFn> fns_;
};

// Guards -------------------------------------------------------------------------

/// Candidate generator for a set quantifier guarded by a library call
/// `(lib name ... S ...)` with the bound set S at position `bound_arg`.
/// Receives the other argument values (nullptr at the bound position). The
/// result must contain every set for which the guard can be true.
using GuardEnumerator = std::function<std::vector<BitSet>(const Structure&, std::span<const std::int64_t>,
                                                          std::span<const Value* const>)>;

struct GuardShape {
    std::string lib;
    int bound_arg = 0;
    friend auto operator<=>(const GuardShape&, const GuardShape&) = default;
};

class GuardRegistry {
public:
    void add(GuardShape shape, GuardEnumerator fn);
    const GuardEnumerator* find(const std::string& lib, int bound_arg) const;

    /// Registry with the section and partsection enumerators.
    static const GuardRegistry& defaults();

private:
    std::map<GuardShape, GuardEnumerator> fns_;
};

/// Maximal runs of U (in the structure order) whose elements agree on P, plus
/// the empty set. Superset of the sets S with section(S,U,P).
std::vector<BitSet> section_candidates(const Structure& s, const BitSet& U, const BitSet& P);
/// All contiguous pieces of those runs, plus the empty set.
std::vector<BitSet> partsection_candidates(const Structure& s, const BitSet& U, const BitSet& P);

// Evaluation ---------------------------------------------------------------------

struct EvalOptions {
    Budget budget;
    const LibRegistry* libs = nullptr;
    const OracleRegistry* oracles = nullptr;
    const GuardRegistry* guards = &GuardRegistry::defaults();
    /// Use structural guard recognition (subset, definitions, partitions).
    bool structural_guards = true;
    bool capture_witness = false;
};

/// Decide s, a |= f. Lib calls use a registered oracle when present,
/// otherwise their bodies (memoized by argument values).
EvalResult evaluate(const Structure& s, const FormulaPtr& f, const Assignment& a, const EvalOptions& opt = {});

struct ModelsResult {
    Outcome outcome = Outcome::True;  // BudgetExceeded when the list is incomplete
    std::vector<Assignment> models;
    std::uint64_t steps = 0;
};

/// All satisfying assignments of `free`, in canonical order: lexicographic over
/// `free`, elements ascending, sets by bitmask value.
ModelsResult enumerate_models(const Structure& s, const FormulaPtr& f, const std::vector<FreeVar>& free,
                              const EvalOptions& opt = {});

// Derived relations on trees ----------------------------------------------------

struct DerivedRelationTable {
    std::string name;
    int level = 0;
    std::vector<BitSet> rows;  // rows[x].test(y)
    bool operator()(int x, int y) const { return rows[static_cast<std::size_t>(x)].test(static_cast<std::size_t>(y)); }
};

/// eq_0 .. eq_maxK on a colored rooted tree. `colors` restricts samecols to the
/// listed colors (all colors when empty).
std::vector<DerivedRelationTable> compute_eq_tables(const Structure& t, int maxK,
                                                    const std::vector<std::string>& colors = {});

}  // namespace msow
