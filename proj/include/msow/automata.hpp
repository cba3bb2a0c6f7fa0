#pragma once

#include <cstdint>
#include <functional>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msow/eval.hpp"
#include "msow/formula.hpp"
#include "msow/structure.hpp"

namespace msow {

/// One bit of the input alphabet. Letter tracks carry a word color ("$1" for
/// the letter 1); element tracks carry exactly one flagged position.
struct Track {
    std::string name;
    Sort sort = Sort::Set;
    bool letter = false;
    friend bool operator==(const Track&, const Track&) = default;
};

inline Track letter_track(const std::string& color) { return {"$" + color, Sort::Set, true}; }

/// Complete DFA over bit-vector symbols. Bit i of a symbol is track i; tracks
/// are sorted by name. Every automaton built here rejects words whose element
/// tracks are not one-hot.
class TrackDfa {
public:
    TrackDfa() = default;
    TrackDfa(std::vector<Track> tracks, std::uint32_t states, std::uint32_t initial, std::vector<char> accepting,
             std::vector<std::uint32_t> table);

    const std::vector<Track>& tracks() const { return tracks_; }
    int width() const { return static_cast<int>(tracks_.size()); }
    std::uint32_t symbols() const { return std::uint32_t{1} << tracks_.size(); }
    std::uint32_t states() const { return states_; }
    std::uint32_t initial() const { return initial_; }
    bool accepting(std::uint32_t q) const { return accepting_[q] != 0; }
    std::uint32_t next(std::uint32_t q, std::uint32_t sym) const { return table_[static_cast<std::size_t>(q) * symbols() + sym]; }
    int track_index(const std::string& name) const;

    const std::vector<std::uint32_t>& table() const { return table_; }
    const std::vector<char>& accepting_flags() const { return accepting_; }

private:
    std::vector<Track> tracks_;
    std::uint32_t states_ = 0;
    std::uint32_t initial_ = 0;
    std::vector<char> accepting_;
    std::vector<std::uint32_t> table_;
};

class BlowupError : public Error {
public:
    BlowupError(const std::string& subformula, std::uint64_t states)
        : Error("automaton blowup (" + std::to_string(states) + " states) at " + subformula),
          subformula(subformula),
          states(states) {}
    std::string subformula;
    std::uint64_t states;
};

struct Limits {
    std::uint64_t state_cap = std::uint64_t{1} << 20;
    /// Bound on states * 2^tracks for any table built.
    std::uint64_t table_cap = std::uint64_t{1} << 26;
};

/// Language-preserving minimization with canonical BFS state numbering.
TrackDfa minimize(const TrackDfa& d);

/// Build a DFA by exploring states given as 64-bit keys, then minimize.
TrackDfa build_dfa(std::vector<Track> tracks, std::uint64_t initial,
                   const std::function<std::uint64_t(std::uint64_t, std::uint32_t)>& delta,
                   const std::function<bool(std::uint64_t)>& accept, const Limits& limits = {});

/// Boolean combinations and projection (results minimized).
TrackDfa dfa_and(const TrackDfa& a, const TrackDfa& b, const Limits& limits = {});
TrackDfa dfa_or(const TrackDfa& a, const TrackDfa& b, const Limits& limits = {});
TrackDfa dfa_not(const TrackDfa& a, const Limits& limits = {});
TrackDfa dfa_project(const TrackDfa& a, const std::string& track, const Limits& limits = {});
/// Rename tracks (old name -> new name); tracks mapped to the same name merge.
TrackDfa dfa_rename(const TrackDfa& a, const std::map<std::string, std::string>& mapping, const Limits& limits = {});
/// One-hot constraint on the given element tracks (plus extra free tracks).
TrackDfa dfa_wellformed(std::vector<Track> tracks);

struct CompileRecord {
    std::uint64_t quantifier_depth = 0;
    std::uint32_t states = 0;
    std::string kind;
};

/// Compiled library bodies, shareable across compile calls with the same
/// registry and replacement automata.
struct CompileCache {
    std::map<std::pair<std::string, std::vector<std::int64_t>>, TrackDfa> dfas;
    std::map<std::pair<std::string, std::vector<std::int64_t>>, std::uint64_t> depths;
};

struct CompileOptions {
    Limits limits;
    CompileCache* cache = nullptr;
    const LibRegistry* libs = nullptr;
    /// Optional replacement automata for library predicates, over tracks named
    /// like the body's formals.
    std::function<std::optional<TrackDfa>(const std::string&, std::span<const std::int64_t>)> lib_dfa;
    std::vector<CompileRecord>* records = nullptr;
};

/// Automaton over the free variables of f (plus a letter track when f uses
/// the color 1). Only prec, color 1, in, = and lib calls are allowed.
TrackDfa compile(const FormulaPtr& f, const CompileOptions& opt = {});

/// Run on a word (letters over {0,1}) with values for every non-letter track.
bool accepts(const TrackDfa& d, const std::string& letters, const Assignment& a = {});
/// Same on a word structure or unary structure.
bool accepts(const TrackDfa& d, const Structure& s, const Assignment& a = {});

struct CycleProfile {
    std::uint64_t tail = 0;   // states before the cycle
    std::uint64_t cycle = 0;  // cycle length (>= 1)
    std::vector<char> accept; // acceptance of a^i for i < tail + cycle
};

/// Run on the all-zero letter. Requires a DFA without non-letter tracks.
CycleProfile cycle_profile(const TrackDfa& d);
bool accepts_unary(const TrackDfa& d, const BigInt& n);

struct Counterexample {
    std::string letters;
    Assignment tracks;
    std::size_t length = 0;
};

struct EquivResult {
    bool equal = true;
    std::optional<Counterexample> counterexample;
};

/// Equivalence by product reachability; the counterexample is shortest. With
/// max_length, only words up to that length are compared.
EquivResult language_equiv(const TrackDfa& a, const TrackDfa& b, std::optional<std::size_t> max_length = {});

/// Decide a formula on one word without building the full automaton: the
/// existential prefix (pulled through conjunctions) is guessed position by
/// position while the conjuncts' automata run in lockstep.
bool decide_on_word(const FormulaPtr& f, const std::string& letters, const Assignment& a,
                    const CompileOptions& opt = {});

nlohmann::json to_json(const TrackDfa& d);
TrackDfa dfa_from_json(const nlohmann::json& j);

}  // namespace msow
