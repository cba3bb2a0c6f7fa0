#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "msow/counting.hpp"
#include "msow/reductions.hpp"
#include "msow/suites.hpp"

using namespace msow;

namespace {

std::vector<std::string> battery() {
    std::ifstream in(std::string(MSOW_FIXTURES) + "/threshold_battery.txt");
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(line);
    return out;
}

std::vector<std::string> words_upto(int n) {
    std::vector<std::string> out;
    for (int len = 1; len <= n; ++len)
        for (int m = 0; m < (1 << len); ++m) {
            std::string w;
            for (int i = len - 1; i >= 0; --i) w += (m >> i & 1) ? '1' : '0';
            out.push_back(w);
        }
    return out;
}

bool holds(const StructureDescriptor& d, const FormulaPtr& f, const Assignment& a = {}) {
    EvalOptions opt;
    opt.libs = &reduction_registry();
    auto r = evaluate(build_structure(d), f, a, opt);
    REQUIRE(r.outcome != Outcome::BudgetExceeded);
    return r.outcome == Outcome::True;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("threshold creation strings") {
    CHECK(threshold_creation("01101") == "uujujujjujjujujj");
    CHECK(threshold_creation("1") == "uujujj");
    CHECK(threshold_creation("") == "uuj");
    CHECK_THROWS_AS(threshold_creation("012"), Error);
}

TEST_CASE("threshold translation agrees with the word on the battery") {
    const auto fs = battery();
    REQUIRE(fs.size() == 6);
    CHECK(fs == suites::threshold_battery());
    for (const auto& text : fs) {
        auto phi = parse_formula(text, Signature::word()).formula;
        for (const auto& w : words_upto(4)) {
            auto a = word_to_threshold(w, phi);
            CAPTURE(text);
            CAPTURE(w);
            CHECK(holds(StructureDescriptor::word(w), phi) == holds(a.structure, a.formula));
        }
    }
}

TEST_CASE("threshold translation rejects non-FO input") {
    auto set_q = parse_formula("(existsSet X (forall1 x (in x X)))", Signature::word()).formula;
    CHECK_THROWS_AS(translate_word_formula(set_q), SortError);
    auto edge_f = parse_formula("(exists1 x (exists1 y (edge x y)))", Signature::threshold()).formula;
    CHECK_THROWS_AS(translate_word_formula(edge_f), UnknownPredicateError);
}

TEST_CASE("threshold layout lists one main vertex per letter") {
    auto a = word_to_threshold("01101", parse_formula("(exists1 x (color 1 x))", Signature::word()).formula);
    CHECK(a.layout["main_vertices"].size() == 5);
    CHECK(a.layout["creation"] == "uujujujjujjujujj");
}

TEST_CASE("seed embedding with a single edge") {
    auto a = embed_with_seed({2, {{0, 1}}}, "uj", parse_formula("(exists1 x (= x x))", Signature::threshold()).formula);
    Structure g = build_structure(a.structure);
    REQUIRE(g.size() == 4);
    CHECK(g.edge(0, 1));
    CHECK(g.edge(2, 3));
    for (int j : {2, 3})
        for (int u : {0, 1}) CHECK(g.edge(j, u));
}

TEST_CASE("seed embedding with K1 is the plain threshold graph") {
    const std::string c = threshold_creation("0110");
    auto a = embed_with_seed({1, {}}, c, parse_formula("(exists1 x (= x x))", Signature::threshold()).formula);
    Structure g = build_structure(a.structure);
    Structure t = build_structure(StructureDescriptor::threshold(c));
    REQUIRE(g.size() == t.size());
    for (int x = 0; x < g.size(); ++x)
        for (int y = 0; y < g.size(); ++y) CHECK(g.edge(x, y) == t.edge(x, y));
}

TEST_CASE("seed embedding preserves translated sentences") {
    const std::vector<SeedGraph> seeds{{1, {}}, {2, {{0, 1}}}};
    for (const auto& w : std::vector<std::string>{"0", "1", "01", "10"})
        for (const std::string text : {"(exists1 x (color 1 x))", "(forall1 x (color 1 x))"}) {
            auto t = word_to_threshold(w, parse_formula(text, Signature::word()).formula);
            const bool plain = holds(t.structure, t.formula);
            for (const auto& s : seeds) {
                // Blocks double the quantifier depth: "01" under the edge seed costs 40 s.
                if (s.k == 2 && w == "01") continue;
                auto e = embed_with_seed(s, t.layout["creation"], t.formula);
                CAPTURE(w);
                CAPTURE(text);
                CHECK(holds(e.structure, e.formula) == plain);
            }
        }
    auto main0 = lib_call("tmain", {}, {"x"});
    auto phi = exists1("x", main0);
    auto e = embed_with_seed({2, {{0, 1}}}, threshold_creation("0"), phi);
    CHECK(holds(e.structure, e.formula) == holds(StructureDescriptor::threshold(threshold_creation("0")), phi));
}

TEST_CASE("number trees") {
    for (std::uint64_t i = 0; i <= 3; ++i) {
        TreeNode t = number_tree(i, 2);
        CHECK(t.children.empty());
        CHECK(decode_number_tree(t, 2) == i);
    }
    TreeNode t5 = number_tree(5, 2);
    REQUIRE(t5.children.size() == 2);
    CHECK(t5.children[0].colors.empty());
    CHECK(t5.children[1].colors == std::vector<std::string>{"1"});
    CHECK(decode_number_tree(t5, 2) == 5);
    CHECK(decode_number_tree(TreeNode{{"0", "1"}, {}}, 2) == 3);
    CHECK(decode_number_tree(TreeNode{}, 2) == 0);
    TreeNode bad{{}, {TreeNode{{"0"}, {}}, TreeNode{{"0"}, {}}}};
    CHECK_THROWS_AS(decode_number_tree(bad, 2), Error);

    const int b = tree_base_colors(1 << 15, 3);
    CHECK(b == 2);
    for (std::uint64_t i = 0; i < (1u << 16); ++i) {
        TreeNode t = number_tree(i, b);
        if (decode_number_tree(t, b) != i || tree_height(t) > 3) FAIL("round trip failed at " << i);
    }
}

TEST_CASE("DIMACS parsing") {
    auto c = parse_dimacs("c demo\np cnf 3 2\n1 -2 3 0\n-1 -1 2 0\n");
    CHECK(c.n == 3);
    REQUIRE(c.clauses.size() == 2);
    CHECK(c.clauses[0][0] == Literal{3, true});
    CHECK(c.clauses[0][1] == Literal{4, false});
    CHECK(c.clauses[1][2] == Literal{4, true});
    CHECK_THROWS_AS(parse_dimacs("p cnf 2 1\n1 2 0\n"), Error);
    CHECK_THROWS_AS(parse_dimacs("p cnf 2 1\n1 2 3 0\n"), Error);
    CHECK_THROWS_AS(check_cnf({2, {{Literal{0, true}, Literal{2, true}, Literal{3, true}}}}), Error);
}

TEST_CASE("tree layout: height and roster") {
    for (int h : {1, 2, 3})
        for (int n : {1, 3, 6}) {
            auto a = sat_to_tree(random_3sat(n, 4, 7), h);
            CAPTURE(h);
            CAPTURE(n);
            CHECK(tree_height(a.structure.root) == h);
            const int b = a.layout["base_colors"];
            CHECK(a.layout["roster_size"].get<int>() == (h == 1 ? 7 * b + 2 : b + 8));
            CHECK(a.layout["padded_n"].get<int>() >= n);
        }
}

TEST_CASE("tree reduction agrees with brute force") {
    CnfInstance one{4, {{Literal{4, true}, Literal{4, true}, Literal{4, true}}}};
    CnfInstance unsat{3, {}};
    for (int m = 0; m < 8; ++m)
        unsat.clauses.push_back({Literal{3, (m & 1) != 0}, Literal{4, (m & 2) != 0}, Literal{5, (m & 4) != 0}});
    std::vector<CnfInstance> cases{one, unsat};
    for (int s = 0; s < 16; ++s) cases.push_back(random_3sat(2 + s % 5, 3 + s % 10, 100 + static_cast<std::uint64_t>(s)));
    int sat = 0;
    for (const auto& c : cases) {
        const bool truth = brute_force_sat(c);
        sat += truth;
        for (int h : {1, 2}) {
            auto a = sat_to_tree(c, h);
            CHECK((evaluate_tree_sat(a, TreeEqPath::Tables).outcome == Outcome::True) == truth);
            CHECK((evaluate_tree_sat(a, TreeEqPath::Decode).outcome == Outcome::True) == truth);
        }
    }
    CHECK(brute_force_sat(one));
    CHECK_FALSE(brute_force_sat(unsat));
    CHECK(sat > 2);
    CHECK(sat < static_cast<int>(cases.size()));
    // The formula path on small instances.
    for (const auto& c : {one, unsat, random_3sat(3, 5, 1)})
        for (int h : {1, 2}) {
            auto a = sat_to_tree(c, h);
            CHECK((evaluate_tree_sat(a, TreeEqPath::Formula).outcome == Outcome::True) == brute_force_sat(c));
        }
}

TEST_CASE("tree eq tables match the treeeq formula") {
    auto a = sat_to_tree(random_3sat(4, 3, 9), 2);
    Structure t = build_structure(a.structure);
    const int b = a.layout["base_colors"];
    std::vector<std::string> base;
    for (int j = 0; j < b; ++j) base.push_back(std::to_string(j));
    auto tables = compute_eq_tables(t, 1, base);
    EvalOptions opt;
    opt.libs = &reduction_registry();
    for (int k = 0; k <= 1; ++k) {
        auto f = lib_call("treeeq", {k, b}, {"x", "y"});
        for (int x = 0; x < t.size(); ++x)
            for (int y = 0; y < t.size(); ++y) {
                auto r = evaluate(t, f, {{"x", Value::element(x)}, {"y", Value::element(y)}}, opt);
                CHECK((r.outcome == Outcome::True) == tables[static_cast<std::size_t>(k)](x, y));
            }
    }
}

TEST_CASE("tm machines and simulation") {
    for (auto m : {machine_always_accept(), machine_always_reject(), machine_input_parity()}) CHECK_NOTHROW(check_tm(m));
    auto r = simulate_ntm(machine_always_accept(), "1", 2);
    CHECK(r.accepted);
    CHECK(r.configs.size() == 2);
    CHECK_FALSE(simulate_ntm(machine_always_reject(), "1", 4).accepted);
    CHECK(simulate_ntm(machine_input_parity(), "01", 4).accepted);
    CHECK_FALSE(simulate_ntm(machine_input_parity(), "10", 4).accepted);

    TmSpec bad = machine_always_accept();
    bad.delta.pop_back();
    CHECK_THROWS_AS(check_tm(bad), Error);
    TmSpec leaky = machine_always_accept();
    leaky.delta[2].next = "q0";
    CHECK_THROWS_AS(check_tm(leaky), Error);
    CHECK(tm_from_json(to_json(machine_input_parity())).delta.size() == 6);
}

TEST_CASE("tm lengths") {
    CHECK(tm_to_unary(machine_input_parity(), "10").layout["length"] == "80");
    CHECK(tm_to_unary(machine_always_accept(), "1", 2).layout["length"] == "12");
    CHECK(tm_to_unary(machine_always_accept(), "1").layout["T"] == 2);
    CHECK_THROWS_AS(tm_to_unary(machine_always_accept(), "101", 4), Error);
    auto scaled = tm_to_unary(machine_always_accept(), "1", 8);
    CHECK(scaled.layout["input_cells"] == 3);
    CHECK(scaled.layout["length"] == "192");
}

TEST_CASE("tm witnesses agree with simulation") {
    for (auto m : {machine_always_accept(), machine_always_reject(), machine_input_parity()})
        for (std::string in : {"00", "01", "10", "11"}) {
            auto a = tm_to_unary(m, in);
            const int T = a.layout["T"];
            CHECK(a.layout["length"] == BigInt((2 * std::stoi(in, nullptr, 2) + 1) * T * T).str());
            auto run = simulate_ntm(m, in, T, a.layout["input_cells"]);
            auto search = structured_tm_search(a);
            CAPTURE(in);
            CHECK(run.accepted == search.witness.has_value());
            if (!run.accepted) continue;
            auto w = build_tm_witness(a, run);
            CHECK(semantic_verify_tm(a, w).ok);
            CHECK(evaluate_tm_matrix(a, w).outcome == Outcome::True);
            CHECK(evaluate_tm_matrix(a, *search.witness).outcome == Outcome::True);

            auto flipped = w;
            flipped["B"].set.set(1, !flipped["B"].set.test(1));
            CHECK_FALSE(semantic_verify_tm(a, flipped).ok);
            CHECK(evaluate_tm_matrix(a, flipped).outcome == Outcome::False);

            auto two = w;
            two[std::string("H_") + m.accept].set.set(static_cast<std::size_t>(T + 2));
            CHECK_FALSE(semantic_verify_tm(a, two).ok);
            CHECK(evaluate_tm_matrix(a, two).outcome == Outcome::False);

            auto late = w;
            late["B"].set.set(static_cast<std::size_t>(2 * T + 3), !late["B"].set.test(static_cast<std::size_t>(2 * T + 3)));
            CHECK_FALSE(semantic_verify_tm(a, late).ok);
            CHECK(evaluate_tm_matrix(a, late).outcome == Outcome::False);
        }
}

TEST_CASE("tampered tm runs are rejected") {
    auto a = tm_to_unary(machine_input_parity(), "11");
    auto run = simulate_ntm(machine_input_parity(), "11", 4, 2);
    REQUIRE(run.accepted);
    auto t1 = run;
    t1.configs[1].state = "qrej";
    CHECK_THROWS_AS(build_tm_witness(a, t1), Error);
    auto t2 = run;
    t2.configs[2].tape[3] ^= 1;
    CHECK_THROWS_AS(build_tm_witness(a, t2), Error);
    auto t3 = run;
    t3.configs.pop_back();
    CHECK_THROWS_AS(build_tm_witness(a, t3), Error);
}

TEST_CASE("tm witness for the two-cell tape") {
    auto a = tm_to_unary(machine_always_accept(), "1", 2);
    auto w = build_tm_witness(a, simulate_ntm(machine_always_accept(), "1", 2, 1));
    CHECK(w.at("H_qacc").set.test(2));
    CHECK(semantic_verify_tm(a, w).ok);
    CHECK(evaluate_tm_matrix(a, w).outcome == Outcome::True);
}

TEST_CASE("clique pm and eq") {
    auto cf = gen_clique_mso2();
    auto k4 = StructureDescriptor::clique(4);
    auto pair = [](int n, std::uint32_t m1, std::uint32_t m2, const char* a, const char* b) {
        BitSet x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            x.set(static_cast<std::size_t>(i), m1 >> i & 1);
            y.set(static_cast<std::size_t>(i), m2 >> i & 1);
        }
        return Assignment{{a, Value::elements(x)}, {b, Value::elements(y)}};
    };
    CHECK(holds(k4, cf.pm, pair(4, 0b0001, 0b0010, "S1", "S2")));
    CHECK_FALSE(holds(k4, cf.pm, pair(4, 0b0011, 0b0100, "S1", "S2")));
    for (std::uint32_t m1 = 0; m1 < 16; ++m1)
        for (std::uint32_t m2 = 0; m2 < 16; ++m2) {
            CHECK(holds(k4, cf.eq, pair(4, m1, m2, "P1", "P2")) == (std::popcount(m1) == std::popcount(m2)));
            if ((m1 & m2) == 0) CHECK(holds(k4, cf.pm, pair(4, m1, m2, "S1", "S2")) == (std::popcount(m1) == std::popcount(m2)));
        }
}

TEST_CASE("clique spanning cycle and order") {
    auto cf = gen_clique_mso2();
    auto k4 = StructureDescriptor::clique(4);
    Structure s = build_structure(k4);
    auto cycle = [&](std::vector<std::pair<int, int>> es) {
        BitSet f(static_cast<std::size_t>(s.edge_count()));
        for (auto [u, v] : es) f.set(static_cast<std::size_t>(s.edge_index(u, v)));
        return f;
    };
    BitSet ham = cycle({{0, 1}, {1, 2}, {2, 3}, {3, 0}});
    CHECK(holds(k4, cf.cycle, {{"F", Value::edges(ham)}}));
    CHECK_FALSE(holds(k4, cf.cycle, {{"F", Value::edges(cycle({{0, 1}, {1, 2}, {2, 0}}))}}));
    CHECK_FALSE(holds(k4, cf.cycle, {{"F", Value::edges(cycle({{0, 1}, {1, 0}, {2, 3}}))}}));

    // Removing {3,0} leaves the path 0-1-2-3.
    const std::vector<int> order{0, 1, 2, 3};
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y) {
            Assignment a{{"x", Value::element(x)}, {"y", Value::element(y)},     {"F", Value::edges(ham)},
                         {"e", Value::edge(s.edge_index(0, 3))}, {"s", Value::element(0)}};
            CAPTURE(x);
            CAPTURE(y);
            CHECK(holds(k4, cf.order, a) == (x < y));
        }
}

TEST_CASE("artifacts regenerate byte-identically") {
    const auto base = std::filesystem::temp_directory_path() / "msow_artifact_test";
    std::filesystem::remove_all(base);
    auto emit = [&](const std::string& sub) {
        auto a = sat_to_tree(random_3sat(3, 4, 5), 2);
        write_artifact(a, base / sub);
        return slurp(base / sub / "structure.json") + slurp(base / sub / "formula.mso") + slurp(base / sub / "layout.json");
    };
    CHECK(emit("one") == emit("two"));
    auto t = tm_to_unary(machine_input_parity(), "10", 4);
    write_artifact(t, base / "tm");
    CHECK(nlohmann::json::parse(slurp(base / "tm" / "layout.json"))["length"] == "80");
    std::filesystem::remove_all(base);
}
