#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "msow/automata.hpp"
#include "msow/eval.hpp"
#include "msow/formula.hpp"

namespace msow {

// Counting and arithmetic predicates over ordered structures.
//
// Library names and parameters:
//   eq d (P1,P2)            |P1| = |P2|
//   double d (S1,S2)        |S2| = 2|S1|
//   ddist d (x,y,z,U)       |U ∩ [y,z)| = 2 |U ∩ [x,y)|
//   exp d (P1,P2)           |P2| = 2^|P1|
//   root d (P1,P2)          |P2| = |P1|^2
//   rootk k d (P1,P2)       |P2| = |P1|^k, k a power of two
//   div d (P1,P2)           |P1| divides |P2|
//   less d (P1,P2)          |P1| < |P2|
//   mod d (P1,P2,R)         |P2| mod |P1| = |R|
// Helpers without parameters: consec, partsection, section, adj; with depth:
// next, same.
//
// Every predicate is sound (true only when the arithmetic relation holds) and
// complete inside its capacity. contract() states the exact truth set of the
// generated formula, capacity effects included.

/// cap(0) = 4, cap(d+1) = cap(d) * 2^cap(d). nullopt when not representable (d >= 3).
std::optional<BigInt> eq_capacity(int d);

struct CapacityEntry {
    std::string name;
    std::vector<std::int64_t> params;
    std::string capacity;  // decimal, or a symbolic expression when too large
    std::string note;
};

std::vector<CapacityEntry> capacity_ledger(int max_depth);
nlohmann::json to_json(const CapacityEntry& e);

struct PredicateInfo {
    std::string name;
    int param_count = 0;
    std::vector<std::string> formals;
    std::vector<Sort> sorts;
    /// True when the contract only depends on set cardinalities.
    bool cardinality = true;
};

const std::vector<PredicateInfo>& counting_predicates();
const PredicateInfo& predicate_info(const std::string& name);

/// All counting libraries registered (bodies instantiated on demand).
const LibRegistry& counting_registry();

/// Bodies of the generated formulas (lib nodes for sub-predicates).
LibBody gen_eq(int d);
LibBody gen_exp(int d);
LibBody gen_double(int d);
LibBody gen_ddist(int d);
LibBody gen_root(std::int64_t k, int d);
LibBody gen_div(int d);
LibBody gen_less(int d);
LibBody gen_mod(int d);

/// Exact truth value of the generated formula on the given arguments.
bool contract(const Structure& s, const std::string& name, std::span<const std::int64_t> params,
              std::span<const Value* const> args);
/// The plain arithmetic relation (no capacity); syntactic truth must imply it.
bool ideal(const Structure& s, const std::string& name, std::span<const std::int64_t> params,
           std::span<const Value* const> args);

/// Contracts registered as oracles for every counting predicate and helper.
const OracleRegistry& counting_oracles();

/// Minimal DFA of the contract built from saturating counters. Throws
/// BlowupError when the counters do not fit the limits.
TrackDfa semantic_dfa(const std::string& name, std::span<const std::int64_t> params, const Limits& limits = {});

/// Syntactic automaton of a predicate (its formula compiled with lib nodes
/// compiled recursively).
TrackDfa syntactic_dfa(const std::string& name, std::span<const std::int64_t> params, CompileCache* cache = nullptr,
                       const Limits& limits = {});

struct VerifyReport {
    std::string name;
    std::vector<std::int64_t> params;
    std::size_t max_length = 0;
    std::string coverage;  // "exhaustive", "guarded", "partial"
    std::uint64_t instances = 0;
    std::vector<std::string> mismatches;
    /// Exhaustive mode only: the two automata accept the same language at every length.
    bool all_lengths = false;
    double seconds = 0;
};

nlohmann::json to_json(const VerifyReport& r);

/// Exhaustive comparison of the syntactic automaton with the contract on all
/// lengths <= max_length and all argument tuples.
VerifyReport verify_lib_predicate(const std::string& name, std::span<const std::int64_t> params, std::size_t max_length);

/// Guarded check of eq(d) on words of length <= max_length: seeded random
/// pairs decided on the word by lazy automata, plus one equal-cardinality pair
/// per (length, size) whose constructed witness must satisfy the matrix.
VerifyReport verify_eq_guarded(int d, std::size_t max_length, int random_pairs, std::uint64_t seed);

/// Witness for the leading existentials of eq(d+1) (R1,R2,U1,U2,Q1,Q2,B1,B2):
/// sections of size min(n, cap(d)) counting 0,1,2,... in binary (most
/// significant bit first), remainder at the end. Requires |P1| = |P2| within
/// capacity.
Assignment eq_witness(const Structure& s, const BitSet& P1, const BitSet& P2, int d);

/// The quantifier-free-prefix part of eq(d+1): the conjunction under the
/// leading existentials, with those variables free.
FormulaPtr eq_matrix(int d_plus_1);

struct GrowthRow {
    int depth = 0;
    std::uint64_t size = 0;
    std::uint64_t eq_calls = 0;  // direct eq(d-1) occurrences after expanding helpers
};

struct GrowthReport {
    std::vector<GrowthRow> rows;
    /// floor(size(d+1) / size(d)) for consecutive rows.
    std::vector<std::uint64_t> ratios;
};

GrowthReport eq_growth(int max_depth);
nlohmann::json to_json(const GrowthReport& g);

}  // namespace msow
