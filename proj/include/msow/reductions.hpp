#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "msow/eval.hpp"
#include "msow/formula.hpp"
#include "msow/structure.hpp"

namespace msow {

/// Structure, formula and layout emitted by a reduction. Serialized as a
/// directory: structure.json, formula.mso, layout.json, witness.json.
struct ReductionArtifact {
    std::string kind;
    StructureDescriptor structure;
    FormulaPtr formula;
    nlohmann::json layout = nlohmann::json::object();
    /// Witness values as assignment JSON (positions), when one was built.
    std::optional<nlohmann::json> witness;
};

void write_artifact(const ReductionArtifact& a, const std::filesystem::path& dir);

/// Counting predicates plus the threshold, tree and clique helpers below.
const LibRegistry& reduction_registry();

// Words to threshold graphs ------------------------------------------------------

/// "uuj", then "uj" per 0 and "ujj" per 1.
std::string threshold_creation(const std::string& word);

/// Relativize an FO word sentence to threshold graphs: element quantifiers
/// range over main vertices, prec and color 1 become the tprec/tone helpers.
/// Throws SortError on set quantifiers and UnknownPredicateError on non-word atoms.
FormulaPtr translate_word_formula(const FormulaPtr& phi);

ReductionArtifact word_to_threshold(const std::string& word, const FormulaPtr& phi);

/// Small graph replacing every vertex of a threshold construction.
struct SeedGraph {
    int k = 1;
    std::vector<std::pair<int, int>> edges;
};

/// Every creation letter becomes a copy of the seed (join copies adjacent to
/// all earlier vertices). `phi` is an FO sentence over threshold graphs using
/// edge and = only (lib calls are expanded first); each element quantifier
/// becomes a block of k quantifiers over one seed copy.
ReductionArtifact embed_with_seed(const SeedGraph& seed, const std::string& creation, const FormulaPtr& phi);

// 3SAT to colored trees ----------------------------------------------------------

struct Literal {
    int var = 0;  // in [n, 2n)
    bool positive = true;
    friend bool operator==(const Literal&, const Literal&) = default;
};

struct CnfInstance {
    int n = 0;
    std::vector<std::array<Literal, 3>> clauses;
};

/// DIMACS with exactly three literals per clause; variable v becomes n + v - 1.
CnfInstance parse_dimacs(std::string_view text);
/// Throws when a literal is outside [n, 2n).
void check_cnf(const CnfInstance& c);
bool brute_force_sat(const CnfInstance& c);
CnfInstance random_3sat(int n, int m, std::uint64_t seed);

/// Number tree of i over b base colors: a leaf colored with the set bits of i
/// when i < 2^b, otherwise a root whose children are the trees of the set bits.
TreeNode number_tree(std::uint64_t i, int base_colors);
/// Inverse of number_tree. Other colors are ignored. Throws on a malformed
/// tree (two children with the same value, a colored inner node).
std::uint64_t decode_number_tree(const TreeNode& t, int base_colors);
int tree_height(const TreeNode& t);

/// Base colors for height h over numbers below 2n: the least b >= 1 with
/// tower(h, b) >= 2n, tower(1, b) = 2^b, tower(j+1, b) = 2^tower(j, b).
int tree_base_colors(int n, int h);

/// Variable count after padding with unused variables so that every variable
/// tree has height >= 1 and the largest has height exactly h - 1 (h >= 2).
int padded_variable_count(int n, int h);

/// Tree of height exactly h and the isSAT sentence. Layout records the padded
/// variable count, base color count and color roster.
ReductionArtifact sat_to_tree(const CnfInstance& c, int h);

enum class TreeEqPath { Tables, Decode, Formula };

/// Evaluate isSAT on the emitted tree, deciding treeeq with precomputed eq
/// tables, with the decode oracle, or from its formula.
EvalResult evaluate_tree_sat(const ReductionArtifact& a, TreeEqPath path, const Budget& budget = Budget::from_env());

// NTM to unary strings ----------------------------------------------------------

enum class Move { L, S, R };

struct TmSpec {
    std::vector<std::string> states;  // states[0] is initial
    std::string accept;
    int k = 1;
    struct Rule {
        std::string state;
        int read = 0;
        std::string next;
        int write = 0;
        Move move = Move::S;
    };
    std::vector<Rule> delta;

    const Rule& rule(const std::string& q, int bit) const;
};

TmSpec tm_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TmSpec& m);
/// Throws unless delta is total, deterministic and q_acc is absorbing.
void check_tm(const TmSpec& m);

TmSpec machine_always_accept();
TmSpec machine_always_reject();
/// Accepts iff tape cell 0 (the least significant input bit) holds 1.
TmSpec machine_input_parity();

struct TmConfig {
    std::vector<int> tape;
    int head = 0;
    std::string state;
    friend bool operator==(const TmConfig&, const TmConfig&) = default;
};

struct TmRun {
    bool accepted = false;
    std::vector<int> guess;        // initial tape
    std::vector<TmConfig> configs; // T snapshots when accepted
};

/// Input bits are read as a binary number I (most significant first) and laid
/// out least significant first on cells 0..m-1 (m = input cells, >= n). Tries
/// every initial tape agreeing with the input and runs T-1 steps.
TmRun simulate_ntm(const TmSpec& m, const std::string& input, int T, int input_cells = -1);

/// Input cells used by the formula for this T: m with m^k = log2 T.
int tm_input_cells(int T, int k);

/// Length (2I+1) T^2 and the formula. T defaults to 2^(n^k); a supplied T must
/// be a power of two with log2 T = m^k for some m >= n.
ReductionArtifact tm_to_unary(const TmSpec& m, const std::string& input, std::optional<int> T = {});

/// Top-level sets of the formula from a run (layout sets as prefixes, B and
/// the head sets H_<state> from the configurations). Throws when the run does
/// not follow delta.
Assignment build_tm_witness(const ReductionArtifact& a, const TmRun& run);

struct TmCheck {
    bool ok = false;
    std::string failure;
};

/// Checks the intended conditions directly on the witness.
TmCheck semantic_verify_tm(const ReductionArtifact& a, const Assignment& w);

/// The formula's matrix (top-level existentials free) evaluated under the
/// witness, counting predicates decided by their contracts.
EvalResult evaluate_tm_matrix(const ReductionArtifact& a, const Assignment& w, const Budget& budget = Budget::from_env());
FormulaPtr tm_matrix(const ReductionArtifact& a);

struct TmSearch {
    std::uint64_t candidates = 0;
    std::optional<Assignment> witness;
};

/// Exhaustive search over witnesses with canonical layout sets and one head per
/// snapshot: snapshots are extended one at a time and pruned with the same
/// local checks semantic_verify_tm applies.
TmSearch structured_tm_search(const ReductionArtifact& a);

// Cliques (MSO2) ----------------------------------------------------------------

struct CliqueFormulas {
    FormulaPtr pm;     // free S1, S2
    FormulaPtr eq;     // free P1, P2
    FormulaPtr cycle;  // free F: spanning cycle
    FormulaPtr order;  // free x, y, F, e, s: x before y on the path F - e from s
};

CliqueFormulas gen_clique_mso2();

}  // namespace msow
