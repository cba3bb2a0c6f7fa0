// msow: evaluate, compile, reduce, verify, bench.
// Exit codes: 0 true/pass, 1 false/fail, 2 budget exceeded, 3 usage or input
// error, 4 other error (e.g. automaton blowup).
#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "msow/automata.hpp"
#include "msow/counting.hpp"
#include "msow/reductions.hpp"
#include "msow/suites.hpp"

using namespace msow;
using nlohmann::json;

namespace {

struct UsageError : Error {
    using Error::Error;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string g_command;

// Every report carries its schema version and the command that produced it.
void emit(json j) {
    if (!j.is_object()) j = json{{"result", std::move(j)}};
    j["schema"] = "msow-report/1";
    j["command"] = g_command;
    std::cout << j.dump(2) << '\n';
}

std::string formula_text(const std::string& file, const std::string& expr) {
    if (!expr.empty() && !file.empty()) throw UsageError("give either a formula file or -e, not both");
    if (!expr.empty()) return expr;
    if (file.empty()) throw UsageError("no formula given");
    return slurp(file);
}

int outcome_code(Outcome o) { return o == Outcome::True ? 0 : o == Outcome::False ? 1 : 2; }

TmSpec builtin_machine(const std::string& name) {
    if (name == "accept") return machine_always_accept();
    if (name == "reject") return machine_always_reject();
    if (name == "parity") return machine_input_parity();
    throw UsageError("unknown builtin machine " + name + " (accept, reject, parity)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MSO model checking on words, trees and graphs: evaluation, automata, reductions"};
    app.require_subcommand(1);

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a formula on a structure");
    std::string structure_file, word, formula_file, expr, assignment_file;
    std::optional<std::uint64_t> budget;
    bool use_oracles = false, no_guards = false, witness = false;
    eval->add_option("structure", structure_file, "Structure descriptor JSON");
    eval->add_option("formula", formula_file, "Formula file");
    eval->add_option("-w,--word", word, "Word structure given inline (instead of a file)");
    eval->add_option("-e,--expr", expr, "Formula given inline");
    eval->add_option("-a,--assignment", assignment_file, "Assignment JSON for free variables");
    eval->add_option("-b,--budget", budget, "Step budget (default: MSOW_BUDGET or built-in)");
    eval->add_flag("--oracles", use_oracles, "Decide counting predicates by their contracts");
    eval->add_flag("--no-guards", no_guards, "Disable structural guard recognition");
    eval->add_flag("--witness", witness, "Report a witness for leading existentials");

    // compile
    auto* comp = app.add_subcommand("compile", "Compile a word formula to a minimal DFA");
    std::string dfa_out;
    std::uint64_t state_cap = std::uint64_t{1} << 20;
    comp->add_option("formula", formula_file, "Formula file");
    comp->add_option("-e,--expr", expr, "Formula given inline");
    comp->add_option("-o,--out", dfa_out, "Write the DFA JSON here");
    comp->add_option("--state-cap", state_cap, "Abort when an intermediate automaton exceeds this");

    // reduce
    auto* red = app.add_subcommand("reduce", "Emit a reduction artifact directory");
    std::string kind, out_dir, cnf_file, machine_file, builtin, input_bits;
    int height = 2, clique_n = 4;
    std::optional<int> T;
    bool tm_witness = false;
    red->add_option("kind", kind, "word2threshold | sat2tree | tm2unary | clique-eq")->required()->check(
        CLI::IsMember({"word2threshold", "sat2tree", "tm2unary", "clique-eq"}));
    red->add_option("-o,--out", out_dir, "Output directory")->required();
    red->add_option("-w,--word", word, "word2threshold: binary word");
    red->add_option("-f,--formula", formula_file, "word2threshold: FO word sentence file");
    red->add_option("-e,--expr", expr, "word2threshold: sentence given inline");
    red->add_option("--cnf", cnf_file, "sat2tree: DIMACS file");
    red->add_option("--height", height, "sat2tree: tree height h >= 1");
    red->add_option("--machine", machine_file, "tm2unary: machine JSON");
    red->add_option("--builtin", builtin, "tm2unary: accept | reject | parity");
    red->add_option("--input", input_bits, "tm2unary: input bits, most significant first");
    red->add_option("-T,--time", T, "tm2unary: scaled T (power of two); default 2^(n^k)");
    red->add_flag("--witness", tm_witness, "tm2unary: simulate and attach a witness when accepting");
    red->add_option("-n", clique_n, "clique-eq: clique size");

    // verify
    auto* ver = app.add_subcommand("verify", "Run a verification suite");
    std::string suite;
    std::size_t max_len = 0;
    std::uint64_t seed = 0;
    int cases = 50, vars = 6, clauses = 12, pairs = 200, random_dfas = 100, formulas = 100, tm_T = 4, clique_max = 5;
    bool timing = false, no_roundtrip = false;
    ver->add_option("suite", suite, "counting | eq-guarded | threshold | tree | tm | clique | automata | robustness")
        ->required()
        ->check(CLI::IsMember({"counting", "eq-guarded", "threshold", "tree", "tm", "clique", "automata", "robustness"}));
    ver->add_option("--max-len", max_len, "Word length bound (counting 10, eq-guarded 24, threshold 4, automata 8)");
    ver->add_option("--seed", seed, "Seed for randomized suites");
    ver->add_option("--cases", cases, "tree: random instances");
    ver->add_option("--n", vars, "tree: max variables; tm: input length; clique: max n");
    ver->add_option("--clauses", clauses, "tree: max clauses");
    ver->add_option("--pairs", pairs, "eq-guarded: random pairs");
    ver->add_option("--random-dfas", random_dfas, "automata: random DFAs for minimization");
    ver->add_option("--formulas", formulas, "robustness: deep formulas");
    ver->add_option("-T", tm_T, "tm: T");
    ver->add_flag("--no-roundtrip", no_roundtrip, "tree: skip the number-tree round trip");
    ver->add_flag("--timing", timing, "Include wall time (breaks byte-identical reruns)");

    // bench
    auto* bench = app.add_subcommand("bench", "Size and automaton growth tables");
    std::string bench_kind;
    std::uint64_t bench_cap = std::uint64_t{1} << 14;
    bench->add_option("kind", bench_kind, "eq-growth | dfa-blowup")->required()->check(CLI::IsMember({"eq-growth", "dfa-blowup"}));
    bench->add_option("--state-cap", bench_cap, "dfa-blowup: state cap per step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 3;
    }

    for (auto* sub : app.get_subcommands()) g_command = sub->get_name();
    try {
        if (*eval) {
            StructureDescriptor d;
            if (!word.empty() && !structure_file.empty() && formula_file.empty() && expr.empty()) {
                // `eval --word 01 f.mso`: the single positional is the formula.
                formula_file = structure_file;
                structure_file.clear();
            }
            if (!word.empty())
                d = StructureDescriptor::word(word);
            else if (!structure_file.empty())
                d = descriptor_from_json(json::parse(slurp(structure_file)));
            else
                throw UsageError("no structure given");
            if (d.kind == StructureKind::Unary && d.length > BigInt(kDefaultMaterializeLimit)) {
                // Too long to materialize: decide the sentence on its automaton.
                auto parsed = parse_formula(formula_text(formula_file, expr), Signature::word(), &counting_registry());
                if (!parsed.free.empty()) throw UsageError("long unary words take sentences only");
                CompileOptions opt;
                opt.libs = &counting_registry();
                TrackDfa dfa = compile(parsed.formula, opt);
                const bool yes = accepts_unary(dfa, d.length);
                emit({{"outcome", yes ? "true" : "false"}, {"route", "automaton"}, {"states", dfa.states()}});
                return yes ? 0 : 1;
            }
            Structure s = build_structure(d);
            const auto& reg = reduction_registry();
            auto parsed = parse_formula(formula_text(formula_file, expr), s.signature(), &reg);
            Assignment a;
            if (!assignment_file.empty()) a = assignment_from_json(json::parse(slurp(assignment_file)), s, parsed.free);
            EvalOptions opt;
            opt.budget = Budget::from_env();
            if (budget) opt.budget.max_steps = *budget;
            opt.libs = &reg;
            if (use_oracles) opt.oracles = &counting_oracles();
            opt.structural_guards = !no_guards;
            opt.capture_witness = witness;
            auto r = evaluate(s, parsed.formula, a, opt);
            emit(to_json(r, s));
            return outcome_code(r.outcome);
        }
        if (*comp) {
            auto f = parse_formula(formula_text(formula_file, expr), Signature::word(), &counting_registry()).formula;
            std::vector<CompileRecord> recs;
            CompileOptions opt;
            opt.libs = &counting_registry();
            opt.records = &recs;
            opt.limits.state_cap = state_cap;
            try {
                TrackDfa dfa = compile(f, opt);
                json tracks = json::array();
                for (const auto& t : dfa.tracks()) tracks.push_back(t.name);
                json out{{"states", dfa.states()}, {"tracks", tracks}, {"steps", recs.size()}};
                if (!dfa_out.empty()) {
                    std::ofstream o(dfa_out);
                    if (!o) throw UsageError("cannot write " + dfa_out);
                    o << to_json(dfa).dump(2) << '\n';
                    out["written"] = dfa_out;
                } else {
                    out["dfa"] = to_json(dfa);
                }
                emit(out);
                return 0;
            } catch (const BlowupError& e) {
                emit({{"aborted", true}, {"states", e.states}, {"at", e.subformula}});
                return 4;
            }
        }
        if (*red) {
            ReductionArtifact art;
            if (kind == "word2threshold") {
                auto phi = parse_formula(formula_text(formula_file, expr), Signature::word()).formula;
                art = word_to_threshold(word, phi);
            } else if (kind == "sat2tree") {
                if (cnf_file.empty()) throw UsageError("sat2tree needs --cnf");
                art = sat_to_tree(parse_dimacs(slurp(cnf_file)), height);
            } else if (kind == "tm2unary") {
                if (machine_file.empty() == builtin.empty()) throw UsageError("tm2unary needs exactly one of --machine, --builtin");
                TmSpec m = builtin.empty() ? tm_from_json(json::parse(slurp(machine_file))) : builtin_machine(builtin);
                art = tm_to_unary(m, input_bits, T);
                if (tm_witness) {
                    auto run = simulate_ntm(m, input_bits, art.layout["T"], art.layout["input_cells"]);
                    art.layout["accepted"] = run.accepted;
                    if (run.accepted) art.witness = to_json(build_tm_witness(art, run), build_structure(art.structure));
                }
            } else {
                auto cf = gen_clique_mso2();
                art.kind = "clique-eq";
                art.structure = StructureDescriptor::clique(clique_n);
                art.formula = cf.eq;
                art.layout = {{"n", clique_n}, {"edges", clique_n * (clique_n - 1) / 2}, {"free", {"P1", "P2"}}};
            }
            write_artifact(art, out_dir);
            json layout = art.layout;
            layout["kind"] = art.kind;
            emit({{"out", out_dir}, {"layout", layout}});
            return 0;
        }
        if (*ver) {
            suites::Report r;
            if (suite == "counting")
                r = suites::counting(max_len ? max_len : 10);
            else if (suite == "eq-guarded")
                r = suites::eq_guarded(max_len ? max_len : 24, pairs, seed);
            else if (suite == "threshold")
                r = suites::threshold(max_len ? static_cast<int>(max_len) : 4);
            else if (suite == "tree")
                r = suites::tree(vars, clauses, cases, seed, !no_roundtrip);
            else if (suite == "tm")
                r = suites::turing(ver->count("--n") ? vars : 2, tm_T);
            else if (suite == "clique")
                r = suites::clique(ver->count("--n") ? vars : clique_max);
            else if (suite == "automata")
                r = suites::automata(max_len ? static_cast<int>(max_len) : 8, random_dfas, seed);
            else
                r = suites::robustness(formulas, seed);
            emit(suites::to_json(r, timing));
            return r.pass ? 0 : 1;
        }
        if (*bench) {
            if (bench_kind == "eq-growth") {
                auto r = suites::growth();
                json j = r.details;
                j["pinned_match"] = r.details["pinned_match"];
                emit(j);
                return r.details["pinned_match"].get<bool>() ? 0 : 1;
            }
            emit({{"state_cap", bench_cap}, {"corpus", suites::dfa_blowup(bench_cap)}});
            return 0;
        }
    } catch (const UsageError& e) {
        emit({{"error", e.what()}});
        return 3;
    } catch (const ParseError& e) {
        emit({{"error", e.what()}});
        return 3;
    } catch (const json::exception& e) {
        emit({{"error", std::string("json: ") + e.what()}});
        return 3;
    } catch (const std::exception& e) {
        emit({{"error", e.what()}});
        return 4;
    }
    return 3;
}
