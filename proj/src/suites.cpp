#include "msow/suites.hpp"

#include <chrono>
#include <random>
#include <sstream>

#include "msow/automata.hpp"
#include "msow/counting.hpp"
#include "msow/pinned.hpp"
#include "msow/reductions.hpp"

namespace msow::suites {

namespace {

constexpr std::size_t kMaxListed = 20;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
};

std::string word_of(int len, std::uint64_t mask) {
    std::string w;
    for (int i = 0; i < len; ++i) w += (mask >> i & 1) ? '1' : '0';
    return w;
}

std::vector<std::string> words_upto(int max_len, int min_len = 1) {
    std::vector<std::string> out;
    for (int len = min_len; len <= max_len; ++len)
        for (std::uint64_t m = 0; m < (std::uint64_t{1} << len); ++m) out.push_back(word_of(len, m));
    return out;
}

BitSet mask_set(int n, std::uint64_t m) {
    BitSet s(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) s.set(static_cast<std::size_t>(i), (m >> i & 1) != 0);
    return s;
}

// Every assignment of `free` over a universe of size n.
std::vector<Assignment> assignments(const std::vector<FreeVar>& free, int n) {
    std::vector<Assignment> out{{}};
    for (const auto& v : free) {
        std::vector<Assignment> next;
        for (const auto& a : out) {
            if (v.sort == Sort::Element) {
                for (int x = 0; x < n; ++x) {
                    auto b = a;
                    b[v.name] = Value::element(x);
                    next.push_back(std::move(b));
                }
            } else {
                for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
                    auto b = a;
                    b[v.name] = Value::elements(mask_set(n, m));
                    next.push_back(std::move(b));
                }
            }
        }
        out = std::move(next);
    }
    return out;
}

TrackDfa random_dfa(std::mt19937_64& rng, int tracks, std::uint32_t states) {
    std::vector<Track> t;
    for (int i = 0; i < tracks; ++i) t.push_back({std::string(1, static_cast<char>('A' + i)), Sort::Set, false});
    const std::uint32_t S = 1u << tracks;
    std::vector<std::uint32_t> table(static_cast<std::size_t>(states) * S);
    for (auto& x : table) x = static_cast<std::uint32_t>(rng() % states);
    std::vector<char> acc(states);
    for (auto& a : acc) a = static_cast<char>(rng() & 1);
    return TrackDfa(t, states, 0, acc, table);
}

bool same_dfa(const TrackDfa& a, const TrackDfa& b) {
    return a.tracks() == b.tracks() && a.initial() == b.initial() && a.table() == b.table() &&
           a.accepting_flags() == b.accepting_flags();
}

EvalResult run(const Structure& s, const FormulaPtr& f, const Assignment& a = {}) {
    EvalOptions opt;
    opt.libs = &reduction_registry();
    return evaluate(s, f, a, opt);
}

bool truth(const Structure& s, const FormulaPtr& f, const Assignment& a, Report& r, const std::string& what) {
    auto e = run(s, f, a);
    if (e.outcome == Outcome::BudgetExceeded) r.fail(what + ": budget exceeded");
    return e.outcome == Outcome::True;
}

std::string show_cnf(const CnfInstance& c) {
    std::ostringstream o;
    o << "n=" << c.n << " [";
    for (const auto& cl : c.clauses) {
        o << "(";
        for (const auto& l : cl) o << (l.positive ? "" : "-") << l.var << " ";
        o << ")";
    }
    o << "]";
    return o.str();
}

}  // namespace

void Report::fail(std::string what) {
    pass = false;
    if (mismatches.size() < kMaxListed) mismatches.push_back(std::move(what));
}

nlohmann::json to_json(const Report& r, bool timing) {
    nlohmann::json j{{"suite", r.suite}, {"pass", r.pass}, {"cases", r.cases}, {"mismatches", r.mismatches}, {"details", r.details}};
    if (timing) j["seconds"] = r.seconds;
    return j;
}

const std::vector<std::string>& automata_battery() {
    static const std::vector<std::string> f = {
        "(exists1 x (color 1 x))",
        "(forall1 x (color 1 x))",
        "(exists1 x (exists1 y (and (prec x y) (color 1 x) (not (color 1 y)))))",
        "(prec x y)",
        "(forall1 z (implies (in z X) (color 1 z)))",
        "(and (in x X) (forall1 y (implies (prec y x) (not (in y X)))))",
        "(or (forall1 x (not (= x x))) (existsSet X (and (forall1 x (implies (forall1 y (not (prec y x))) (in x X))) "
        "(forall1 x (forall1 y (implies (and (prec x y) (forall1 z (not (and (prec x z) (prec z y))))) "
        "(iff (in x X) (not (in y X)))))) (forall1 x (implies (forall1 y (not (prec x y))) (not (in x X)))))))",
        "(iff (exists1 x (color 1 x)) (forall1 y (color 1 y)))",
        "(existsSet Y (and (forall1 z (implies (in z Y) (in z X))) (exists1 a (exists1 b (and (in a Y) (in b Y) (prec a b))))))",
        "(and (prec x y) (forall1 z (not (and (prec x z) (prec z y) (color 1 z)))))",
    };
    return f;
}

const std::vector<std::string>& threshold_battery() {
    static const std::vector<std::string> f = {
        "(exists1 x (color 1 x))",
        "(forall1 x (color 1 x))",
        "(exists1 x (exists1 y (and (prec x y) (color 1 x) (not (color 1 y)))))",
        "(forall1 x (forall1 y (implies (and (color 1 x) (color 1 y)) (= x y))))",
        "(exists1 x (and (forall1 y (not (prec y x))) (color 1 x)))",
        "(exists1 x (exists1 y (and (prec x y) (forall1 z (not (and (prec x z) (prec z y)))) (color 1 x) (color 1 y))))",
    };
    return f;
}

// Counting ------------------------------------------------------------------------------

Report counting(std::size_t max_len, const std::vector<std::string>& names) {
    Timer t;
    Report r;
    r.suite = "counting";
    for (const auto& name : names) {
        const std::vector<std::int64_t> params{0};
        auto v = verify_lib_predicate(name, params, max_len);
        r.cases += v.instances;
        for (const auto& m : v.mismatches) r.fail(name + ": " + m);
        if (v.coverage != "exhaustive") r.fail(name + ": coverage " + v.coverage);
        r.details[name] = {{"instances", v.instances}, {"coverage", v.coverage}, {"all_lengths", v.all_lengths},
                           {"mismatches", v.mismatches.size()}};
    }
    r.details["max_len"] = max_len;
    r.seconds = t.seconds();
    return r;
}

Report eq_guarded(std::size_t max_len, int pairs, std::uint64_t seed) {
    Timer t;
    Report r;
    r.suite = "eq-guarded";
    auto v = verify_eq_guarded(1, max_len, pairs, seed);
    r.cases = v.instances;
    for (const auto& m : v.mismatches) r.fail(m);
    r.details = {{"depth", 1}, {"max_len", max_len}, {"random_pairs", pairs}, {"seed", seed}, {"coverage", v.coverage}};
    r.seconds = t.seconds();
    return r;
}

Report growth() {
    Timer t;
    Report r;
    r.suite = "eq-growth";
    auto g = eq_growth(3);
    std::vector<std::uint64_t> sizes;
    for (const auto& row : g.rows) sizes.push_back(row.size);
    r.cases = sizes.size();
    bool pinned = sizes.size() == pinned::eq_sizes.size();
    for (std::size_t i = 0; pinned && i < sizes.size(); ++i) pinned = sizes[i] == pinned::eq_sizes[i];
    if (!pinned) r.fail("sizes drifted from the pinned table");
    // Exact integer ratio: size(d+1) = c * size(d) with one c for all d.
    std::vector<std::string> exact;
    std::optional<std::uint64_t> common;
    bool constant = true;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        const bool divides = sizes[i + 1] % sizes[i] == 0;
        const std::uint64_t q = sizes[i + 1] / sizes[i];
        exact.push_back(std::to_string(sizes[i + 1]) + "/" + std::to_string(sizes[i]) + (divides ? " = " : " ~ ") + std::to_string(q));
        if (!divides || (common && *common != q)) constant = false;
        common = q;
    }
    if (!constant) r.fail("consecutive size ratios are not one integer constant");
    std::vector<std::int64_t> offsets;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
        offsets.push_back(static_cast<std::int64_t>(sizes[i + 1]) - static_cast<std::int64_t>(pinned::eq_copies * sizes[i]));
    r.details = {{"sizes", sizes},
                 {"pinned_sizes", pinned::eq_sizes},
                 {"pinned_match", pinned},
                 {"floor_ratios", g.ratios},
                 {"ratios", exact},
                 {"constant_ratio", constant},
                 {"affine_offsets", offsets},
                 {"affine_copies", pinned::eq_copies},
                 {"growth", to_json(g)}};
    r.seconds = t.seconds();
    return r;
}

// Reductions ---------------------------------------------------------------------------

Report threshold(int max_len) {
    Timer t;
    Report r;
    r.suite = "threshold";
    const std::string c = threshold_creation("01101");
    if (c != "uujujujjujjujujj") r.fail("creation of 01101 is " + c);
    std::uint64_t agree = 0;
    for (const auto& text : threshold_battery()) {
        auto phi = parse_formula(text, Signature::word()).formula;
        for (const auto& w : words_upto(max_len)) {
            ++r.cases;
            auto a = word_to_threshold(w, phi);
            const bool lhs = truth(build_structure(StructureDescriptor::word(w)), phi, {}, r, w);
            const bool rhs = truth(build_structure(a.structure), a.formula, {}, r, w);
            if (lhs == rhs)
                ++agree;
            else
                r.fail(text + " on " + w + ": word " + (lhs ? "true" : "false") + ", graph " + (rhs ? "true" : "false"));
        }
    }
    r.details = {{"max_len", max_len}, {"sentences", threshold_battery().size()}, {"agree", agree}, {"creation_01101", c}};
    r.seconds = t.seconds();
    return r;
}

Report tree(int max_n, int max_clauses, int cases, std::uint64_t seed, bool roundtrip) {
    Timer t;
    Report r;
    r.suite = "tree";
    if (max_n < 1 || max_clauses < 1) throw Error("tree suite needs n >= 1 and clauses >= 1");
    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::string, CnfInstance>> inst;
    for (int i = 0; i < cases; ++i) {
        // Few variables and many clauses, so that unsatisfiable draws are common.
        const int n = 1 + static_cast<int>(rng() % (1 + rng() % static_cast<std::uint64_t>(max_n)));
        const int lo = std::max(1, max_clauses / 2);
        const int m = lo + static_cast<int>(rng() % static_cast<std::uint64_t>(max_clauses - lo + 1));
        inst.push_back({"random " + std::to_string(i), random_3sat(n, m, rng())});
    }
    auto lit = [](int v, bool p) { return Literal{v, p}; };
    // Crafted pairs: one satisfiable and one unsatisfiable instance on the same variables.
    inst.push_back({"unit", {4, {{lit(4, true), lit(4, true), lit(4, true)}}}});
    inst.push_back({"unit contradiction", {4, {{lit(4, true), lit(4, true), lit(4, true)}, {lit(4, false), lit(4, false), lit(4, false)}}}});
    CnfInstance all8{3, {}}, seven{3, {}};
    for (int m = 0; m < 8; ++m) {
        all8.clauses.push_back({lit(3, (m & 1) != 0), lit(4, (m & 2) != 0), lit(5, (m & 4) != 0)});
        if (m) seven.clauses.push_back(all8.clauses.back());
    }
    inst.push_back({"seven of eight", seven});
    inst.push_back({"all eight", all8});
    CnfInstance chain{6, {}}, chain_bad{6, {}};
    for (int v = 6; v < 11; ++v) chain.clauses.push_back({lit(v, false), lit(v + 1, true), lit(v + 1, true)});
    chain_bad = chain;
    chain.clauses.push_back({lit(6, true), lit(6, true), lit(6, true)});
    chain_bad.clauses.push_back({lit(6, true), lit(6, true), lit(6, true)});
    chain_bad.clauses.push_back({lit(11, false), lit(11, false), lit(11, false)});
    inst.push_back({"implication chain", chain});
    inst.push_back({"implication chain refuted", chain_bad});

    int sat = 0;
    std::uint64_t agree = 0;
    for (const auto& [name, c] : inst) {
        const bool want = brute_force_sat(c);
        sat += want;
        for (int h : {1, 2}) {
            auto a = sat_to_tree(c, h);
            if (tree_height(a.structure.root) != h) r.fail(name + ": tree height is not " + std::to_string(h));
            const int b = a.layout["base_colors"];
            if (a.layout["roster_size"].get<int>() != (h == 1 ? 7 * b + 2 : b + 8)) r.fail(name + ": roster size");
            for (auto path : {TreeEqPath::Tables, TreeEqPath::Decode}) {
                ++r.cases;
                auto e = evaluate_tree_sat(a, path);
                const char* pn = path == TreeEqPath::Tables ? "tables" : "decode";
                if (e.outcome == Outcome::BudgetExceeded)
                    r.fail(name + " h=" + std::to_string(h) + " " + pn + ": budget exceeded");
                else if ((e.outcome == Outcome::True) != want)
                    r.fail(name + " h=" + std::to_string(h) + " " + pn + ": " + show_cnf(c));
                else
                    ++agree;
            }
        }
    }
    r.details = {{"instances", inst.size()}, {"satisfiable", sat}, {"agree", agree}, {"seed", seed}, {"max_n", max_n},
                 {"max_clauses", max_clauses}};
    if (roundtrip) {
        const int b = tree_base_colors(1 << 15, 3);
        std::uint64_t bad = 0;
        for (std::uint64_t i = 0; i < (1u << 16); ++i) {
            TreeNode tn = number_tree(i, b);
            if (decode_number_tree(tn, b) != i || tree_height(tn) > 3) {
                if (!bad++) r.fail("decode(build(" + std::to_string(i) + ")) != " + std::to_string(i));
            }
        }
        r.cases += 1u << 16;
        r.details["roundtrip"] = {{"h", 3}, {"base_colors", b}, {"range", 1 << 16}, {"failures", bad}};
    }
    r.seconds = t.seconds();
    return r;
}

Report turing(int n, int T) {
    Timer t;
    Report r;
    r.suite = "tm";
    const std::vector<std::pair<std::string, TmSpec>> machines{
        {"always-accept", machine_always_accept()}, {"always-reject", machine_always_reject()}, {"input-parity", machine_input_parity()}};
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [name, m] : machines)
        for (const auto& in : words_upto(n, n)) {
            ++r.cases;
            const std::string id = name + " " + in;
            auto a = tm_to_unary(m, in, T);
            const std::uint64_t I = std::stoull(in, nullptr, 2);
            const BigInt want = BigInt(2 * I + 1) * T * T;
            if (a.layout["length"] != want.str()) r.fail(id + ": length " + a.layout["length"].get<std::string>());
            auto sim = simulate_ntm(m, in, T, a.layout["input_cells"]);
            auto search = structured_tm_search(a);
            bool verified = false, matrix = false;
            if (sim.accepted) {
                auto w = build_tm_witness(a, sim);
                auto chk = semantic_verify_tm(a, w);
                verified = chk.ok;
                if (!chk.ok) r.fail(id + ": accepting witness fails: " + chk.failure);
                matrix = evaluate_tm_matrix(a, w).outcome == Outcome::True;
                if (!matrix) r.fail(id + ": matrix is not true under the accepting witness");
            }
            if (search.witness.has_value() != sim.accepted) r.fail(id + ": structured search disagrees with simulation");
            rows.push_back({{"machine", name}, {"input", in}, {"length", a.layout["length"]}, {"accepted", sim.accepted},
                            {"search_found", search.witness.has_value()}, {"search_candidates", search.candidates},
                            {"witness_verified", verified}, {"matrix_true", matrix}});
        }
    r.details = {{"n", n}, {"T", T}, {"runs", rows}};
    r.seconds = t.seconds();
    return r;
}

Report clique(int max_n) {
    Timer t;
    Report r;
    r.suite = "clique";
    auto cf = gen_clique_mso2();
    const FormulaPtr pm_matrix = reduction_registry().body("pm", {}).body->kids.at(0);
    std::uint64_t pm_pairs = 0, eq_pairs = 0, matchings = 0;
    for (int n = 2; n <= max_n; ++n) {
        Structure s = build_structure(StructureDescriptor::clique(n));
        const std::uint64_t full = std::uint64_t{1} << n;
        for (std::uint64_t m1 = 0; m1 < full; ++m1)
            for (std::uint64_t m2 = 0; m2 < full; ++m2) {
                const bool same = std::popcount(m1) == std::popcount(m2);
                const BitSet a = mask_set(n, m1), b = mask_set(n, m2);
                const std::string id = "K" + std::to_string(n) + " " + std::to_string(m1) + "/" + std::to_string(m2);
                ++r.cases;
                ++eq_pairs;
                if (truth(s, cf.eq, {{"P1", Value::elements(a)}, {"P2", Value::elements(b)}}, r, id) != same) r.fail("eq " + id);
                if (m1 & m2) continue;
                ++r.cases;
                ++pm_pairs;
                Assignment as{{"S1", Value::elements(a)}, {"S2", Value::elements(b)}};
                if (truth(s, cf.pm, as, r, id) != same) r.fail("pm " + id);
                if (n != max_n) continue;
                // Every edge subset against a direct matching check.
                const int E = s.edge_count();
                for (std::uint64_t fm = 0; fm < (std::uint64_t{1} << E); ++fm) {
                    std::vector<int> deg(static_cast<std::size_t>(n), 0);
                    bool across = true;
                    for (int e = 0; e < E; ++e) {
                        if (!(fm >> e & 1)) continue;
                        auto [u, v] = s.edge_list()[static_cast<std::size_t>(e)];
                        ++deg[static_cast<std::size_t>(u)];
                        ++deg[static_cast<std::size_t>(v)];
                        across = across && ((a.test(static_cast<std::size_t>(u)) && b.test(static_cast<std::size_t>(v))) ||
                                            (b.test(static_cast<std::size_t>(u)) && a.test(static_cast<std::size_t>(v))));
                    }
                    bool cover = true;
                    for (int x = 0; x < n; ++x)
                        if (((m1 | m2) >> x & 1) && deg[static_cast<std::size_t>(x)] != 1) cover = false;
                    const bool want = across && cover;
                    Assignment af = as;
                    af["F"] = Value::edges(mask_set(E, fm));
                    ++r.cases;
                    matchings += want;
                    if (truth(s, pm_matrix, af, r, id) != want) r.fail("pm matrix " + id + " F=" + std::to_string(fm));
                }
            }
    }
    r.details = {{"max_n", max_n}, {"pm_pairs", pm_pairs}, {"eq_pairs", eq_pairs}, {"matchings_at_max_n", matchings}};
    r.seconds = t.seconds();
    return r;
}

// Automata ------------------------------------------------------------------------------

Report automata(int max_len, int random_dfas, std::uint64_t seed, int unary_max) {
    Timer t;
    Report r;
    r.suite = "automata";
    std::vector<TrackDfa> dfas;
    std::uint64_t runs = 0;
    for (const auto& text : automata_battery()) {
        auto f = parse_formula(text, Signature::word()).formula;
        auto free = free_vars(*f);
        TrackDfa d = compile(f);
        dfas.push_back(d);
        for (int n = 0; n <= max_len; ++n) {
            const auto as = assignments(free, n);
            for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
                const std::string w = word_of(n, mask);
                Structure s = build_structure(StructureDescriptor::word(w));
                for (const auto& a : as) {
                    ++runs;
                    auto e = evaluate(s, f, a);
                    if (e.outcome == Outcome::BudgetExceeded) r.fail(text + " on " + w + ": budget exceeded");
                    if (accepts(d, s, a) != (e.outcome == Outcome::True)) r.fail(text + " on " + w + ": automaton and evaluator differ");
                }
            }
        }
    }
    r.cases += runs;

    std::mt19937_64 rng(seed);
    for (int i = 0; i < random_dfas; ++i) dfas.push_back(random_dfa(rng, 1 + i % 2, 1 + static_cast<std::uint32_t>(rng() % 24)));
    std::uint64_t minimized = 0;
    for (std::size_t i = 0; i < dfas.size(); ++i) {
        ++r.cases;
        ++minimized;
        TrackDfa m = minimize(dfas[i]);
        if (!language_equiv(dfas[i], m).equal) r.fail("minimize changed the language of dfa " + std::to_string(i));
        if (!same_dfa(minimize(m), m)) r.fail("minimize is not idempotent on dfa " + std::to_string(i));
        if (m.states() > dfas[i].states()) r.fail("minimize grew dfa " + std::to_string(i));
    }

    // Unary acceptance on the sentences of the battery.
    std::uint64_t unary = 0;
    double worst_ns = 0;
    const BigInt big("1000000000000000000");
    for (std::size_t i = 0; i < automata_battery().size(); ++i) {
        const TrackDfa& d = dfas[i];
        bool sentence = true;
        for (const auto& tr : d.tracks()) sentence = sentence && tr.letter;
        if (!sentence) continue;
        std::string w;
        for (int N = 0; N <= unary_max; ++N) {
            ++unary;
            if (accepts_unary(d, N) != accepts(d, w)) r.fail("accepts_unary differs at N=" + std::to_string(N) + " for battery " + std::to_string(i));
            w += '0';
        }
        auto t0 = std::chrono::steady_clock::now();
        const bool res = accepts_unary(d, big);
        const double ns = std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0).count();
        worst_ns = std::max(worst_ns, ns);
        r.details["unary_1e18"].push_back({{"battery", i}, {"accepts", res}});
    }
    r.cases += unary;
    if (worst_ns >= 1e6) r.fail("accepts_unary(1e18) took " + std::to_string(worst_ns / 1e6) + " ms");
    r.details["max_len"] = max_len;
    r.details["runs"] = runs;
    r.details["minimized"] = minimized;
    r.details["random_dfas"] = random_dfas;
    r.details["seed"] = seed;
    r.details["unary_checks"] = unary;
    r.details["unary_1e18_under_1ms"] = worst_ns < 1e6;
    r.seconds = t.seconds();
    return r;
}

// Robustness ----------------------------------------------------------------------------

namespace {

struct DeepGen {
    std::mt19937_64& rng;
    std::vector<std::string> elems, sets;
    int fresh = 0;

    int pick(int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); }

    FormulaPtr atom_f() {
        const int k = pick(4);
        if (elems.empty()) return pick(2) ? make_true() : make_false();
        const std::string x = elems[static_cast<std::size_t>(pick(static_cast<int>(elems.size())))];
        const std::string y = elems[static_cast<std::size_t>(pick(static_cast<int>(elems.size())))];
        if (k == 0) return prec(x, y);
        if (k == 1) return color_atom("1", x);
        if (k == 2 && !sets.empty()) return in(x, sets[static_cast<std::size_t>(pick(static_cast<int>(sets.size())))]);
        return eq(x, y);
    }

    FormulaPtr body(int width) {
        std::vector<FormulaPtr> kids;
        for (int i = 0; i < width; ++i) kids.push_back(pick(3) ? atom_f() : neg(atom_f()));
        return pick(2) ? conj(kids) : disj(kids);
    }

    // depth quantifiers, at least half of them over sets.
    FormulaPtr chain(int depth) {
        if (depth == 0) return body(3 + pick(3));
        const bool set = pick(2) || static_cast<int>(sets.size()) < 2;
        const std::string v = (set ? "X" : "x") + std::to_string(++fresh);
        (set ? sets : elems).push_back(v);
        FormulaPtr inner = chain(depth - 1);
        (set ? sets : elems).pop_back();
        const Sort s = set ? Sort::Set : Sort::Element;
        return pick(2) ? exists(s, v, inner) : forall(s, v, inner);
    }
};

}  // namespace

Report robustness(int formulas, std::uint64_t seed) {
    Timer t;
    Report r;
    r.suite = "robustness";
    std::mt19937_64 rng(seed);
    const std::uint64_t full_budget = 5'000'000;
    std::uint64_t decided = 0, exceeded = 0, probes = 0;
    for (int i = 0; i < formulas; ++i) {
        DeepGen g{rng, {}, {}, 0};
        const int depth = 6 + g.pick(5);
        FormulaPtr f = g.chain(depth);
        const int len = 5 + g.pick(4);
        Structure s = build_structure(StructureDescriptor::word(word_of(len, rng())));
        EvalOptions opt;
        opt.structural_guards = false;
        opt.budget.max_steps = full_budget;
        auto full = evaluate(s, f, {}, opt);
        (full.outcome == Outcome::BudgetExceeded ? exceeded : decided) += 1;
        const std::string id = "formula " + std::to_string(i) + " (depth " + std::to_string(depth) + ")";
        std::vector<std::uint64_t> budgets{0, 1, 10, 100, 1000, 10000, 100000, 1000000};
        if (full.outcome != Outcome::BudgetExceeded && full.steps > 0) budgets.push_back(full.steps - 1);
        for (std::uint64_t b : budgets) {
            if (b >= full_budget) continue;
            ++probes;
            ++r.cases;
            opt.budget.max_steps = b;
            auto e = evaluate(s, f, {}, opt);
            const bool must_exceed = full.outcome == Outcome::BudgetExceeded || b < full.steps;
            if (must_exceed && e.outcome != Outcome::BudgetExceeded)
                r.fail(id + " budget " + std::to_string(b) + ": got " + to_string(e.outcome) + " instead of budget-exceeded");
            if (!must_exceed && e.outcome != full.outcome) r.fail(id + " budget " + std::to_string(b) + ": wrong answer");
        }
    }
    r.details = {{"formulas", formulas}, {"seed", seed}, {"decided_within_full_budget", decided},
                 {"exceeded_full_budget", exceeded}, {"probes", probes}, {"full_budget", full_budget}};
    r.seconds = t.seconds();
    return r;
}

// Bench --------------------------------------------------------------------------------

nlohmann::json dfa_blowup(std::uint64_t state_cap) {
    nlohmann::json out = nlohmann::json::array();
    std::vector<std::pair<std::string, FormulaPtr>> corpus;
    for (const auto& text : automata_battery()) corpus.push_back({text, parse_formula(text, Signature::word()).formula});
    corpus.push_back({"(lib eq 1 P1 P2)", lib_call("eq", {1}, {"P1", "P2"})});
    for (const auto& [text, f] : corpus) {
        std::vector<CompileRecord> recs;
        CompileOptions opt;
        opt.libs = &counting_registry();
        opt.records = &recs;
        opt.limits.state_cap = state_cap;
        nlohmann::json row{{"formula", text}};
        try {
            TrackDfa d = compile(f, opt);
            row["states"] = d.states();
            row["aborted"] = false;
        } catch (const BlowupError& e) {
            row["aborted"] = true;
            row["abort_states"] = e.states;
            row["abort_at"] = e.subformula.substr(0, 200);
        }
        nlohmann::json steps = nlohmann::json::array();
        std::uint32_t peak = 0;
        for (const auto& rc : recs) {
            steps.push_back({{"kind", rc.kind}, {"depth", rc.quantifier_depth}, {"states", rc.states}});
            peak = std::max(peak, rc.states);
        }
        row["steps"] = steps.size() > 64 ? nlohmann::json("(" + std::to_string(steps.size()) + " steps)") : steps;
        row["peak_states"] = peak;
        out.push_back(row);
    }
    return out;
}

}  // namespace msow::suites
