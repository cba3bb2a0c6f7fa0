#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

// Verification suites shared by `msow verify` and the acceptance binary. Each
// returns a report whose "pass" field summarizes the run; "mismatches" lists
// the first failures verbatim.
namespace msow::suites {

struct Report {
    std::string suite;
    bool pass = true;
    std::uint64_t cases = 0;
    std::vector<std::string> mismatches;
    nlohmann::json details = nlohmann::json::object();
    double seconds = 0;

    void fail(std::string what);
};

/// Timing is left out unless asked for, so reruns are byte-identical.
nlohmann::json to_json(const Report& r, bool timing = false);

/// Pinned word formulas for compile/evaluate agreement (at most one set track).
const std::vector<std::string>& automata_battery();
/// Pinned FO word sentences for the threshold reduction.
const std::vector<std::string>& threshold_battery();

Report counting(std::size_t max_len, const std::vector<std::string>& names = {"eq", "div", "less", "mod", "double"});
Report eq_guarded(std::size_t max_len, int pairs, std::uint64_t seed);
/// Compares the measured sizes with the pinned table and reports whether the
/// consecutive ratios are one constant.
Report growth();
Report threshold(int max_len);
Report tree(int max_n, int max_clauses, int cases, std::uint64_t seed, bool roundtrip = true);
Report turing(int n, int T);
Report clique(int max_n);
Report automata(int max_len, int random_dfas, std::uint64_t seed, int unary_max = 2000);
Report robustness(int formulas, std::uint64_t seed);

/// State counts per compilation step for the battery plus eq(1); cap aborts
/// are recorded as data.
nlohmann::json dfa_blowup(std::uint64_t state_cap);

}  // namespace msow::suites
