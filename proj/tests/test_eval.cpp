#include <doctest.h>

#include <random>

#include "msow/eval.hpp"

using namespace msow;

namespace {

FormulaPtr P(const std::string& text, const Signature& sig = Signature::word()) { return parse_formula(text, sig).formula; }

Outcome run(const Structure& s, const std::string& text, const Assignment& a = {}, const Signature& sig = Signature::word()) {
    return evaluate(s, P(text, sig), a).outcome;
}

}  // namespace

TEST_CASE("basic evaluation on words") {
    Structure w = build_structure(StructureDescriptor::word("01"));
    CHECK(run(w, "(exists1 x (color 1 x))") == Outcome::True);
    CHECK(run(w, "(forall1 x (color 1 x))") == Outcome::False);
    CHECK(run(w, "(exists1 x (exists1 y (and (prec x y) (color 1 y) (not (color 1 x)))))") == Outcome::True);
    Structure e = build_structure(StructureDescriptor::word(""));
    CHECK(run(e, "(forall1 x (color 1 x))") == Outcome::True);
    CHECK(run(e, "(existsSet X (forall1 x (not (in x X))))") == Outcome::True);
}

TEST_CASE("path with derived order") {
    Structure p = build_structure(StructureDescriptor::path(5));
    p = p.with_order(derive_path_order(p, 0));
    Assignment a{{"x", Value::element(0)}, {"y", Value::element(4)}};
    CHECK(run(p, "(prec x y)", a, Signature::path()) == Outcome::True);
    Structure q = p.with_order(derive_path_order(p, 4));
    CHECK(run(q, "(prec x y)", a, Signature::path()) == Outcome::False);
}

TEST_CASE("missing assignment and sort mismatch") {
    Structure w = build_structure(StructureDescriptor::word("01"));
    CHECK_THROWS_AS(evaluate(w, P("(prec x y)"), {{"x", Value::element(0)}}), Error);
    CHECK_THROWS_AS(evaluate(w, P("(in x X)"), {{"x", Value::element(0)}, {"X", Value::element(1)}}), SortError);
}

TEST_CASE("enumerate_models examples") {
    Structure w = build_structure(StructureDescriptor::word("01"));
    auto f = P("(forall1 z (implies (in z X) (color 1 z)))");
    auto r = enumerate_models(w, f, {{"X", Sort::Set}});
    REQUIRE(r.models.size() == 2);
    CHECK(r.models[0].at("X").set.empty());
    CHECK(r.models[1].at("X").set.elements() == std::vector<int>{1});

    Structure u = build_structure(StructureDescriptor::unary(2));
    auto t = enumerate_models(u, P("(true)", Signature::unary()), {{"x", Sort::Element}});
    REQUIRE(t.models.size() == 2);
    CHECK(t.models[0].at("x").index == 0);
    CHECK(t.models[1].at("x").index == 1);
}

TEST_CASE("guards agree with raw enumeration") {
    // Formulas whose set quantifiers carry subset / definition / emptiness guards.
    const char* formulas[] = {
        "(existsSet X (and (forall1 z (implies (in z X) (color 1 z))) (exists1 x (and (in x X) (exists1 y (and (in y X) (prec x y)))))))",
        "(forallSet X (implies (forall1 z (iff (in z X) (not (color 1 z)))) (forall1 x (implies (in x X) (exists1 y (and (prec x y) (color 1 y)))))))",
        "(existsSet X (and (forall1 z (not (in z X))) (forall1 y (not (in y X)))))",
        "(forallSet X (implies (forall1 z (implies (in z X) (color 1 z))) (existsSet Y (and (forall1 z (implies (in z Y) (in z X))) (forall1 z (implies (in z X) (in z Y)))))))",
    };
    EvalOptions guarded;
    EvalOptions raw;
    raw.structural_guards = false;
    raw.guards = nullptr;
    for (int n = 0; n <= 6; ++n)
        for (int mask = 0; mask < (1 << n); ++mask) {
            std::string letters;
            for (int i = 0; i < n; ++i) letters += (mask >> i & 1) ? '1' : '0';
            Structure w = build_structure(StructureDescriptor::word(letters));
            for (const char* f : formulas) {
                auto g = evaluate(w, P(f), {}, guarded);
                auto r = evaluate(w, P(f), {}, raw);
                CHECK(g.outcome == r.outcome);
            }
        }
}

TEST_CASE("budget exceeded is distinct and monotone") {
    Structure w = build_structure(StructureDescriptor::word("0110101"));
    auto f = P("(forallSet X (existsSet Y (forall1 x (iff (in x X) (not (in x Y))))))");
    EvalOptions small;
    small.budget.max_steps = 100;
    small.structural_guards = false;
    auto r = evaluate(w, f, {}, small);
    CHECK(r.outcome == Outcome::BudgetExceeded);
    CHECK_FALSE(r.witness.has_value());
    EvalOptions big = small;
    big.budget.max_steps = 1'000'000'000;
    auto full = evaluate(w, f, {}, big);
    CHECK(full.outcome == Outcome::True);
    // Monotone: every budget gives either budget-exceeded or the full answer.
    for (std::uint64_t b = 1; b < full.steps + 10; b = b * 3 + 1) {
        small.budget.max_steps = b;
        auto o = evaluate(w, f, {}, small).outcome;
        CHECK((o == Outcome::BudgetExceeded || o == full.outcome));
    }
    EvalOptions narrow;
    narrow.budget.max_raw_width = 16;
    narrow.structural_guards = false;
    CHECK(evaluate(w, f, {}, narrow).outcome == Outcome::BudgetExceeded);
}

TEST_CASE("witness re-checks to true") {
    std::mt19937_64 rng(3);
    auto body = "(and (forall1 z (implies (in z X) (color 1 z))) (in x X) (exists1 y (and (in y X) (prec x y))))";
    auto f = P(std::string("(existsSet X (exists1 x ") + body + "))");
    auto matrix = P(body);
    for (int trial = 0; trial < 40; ++trial) {
        std::string letters;
        for (int i = 0; i < 7; ++i) letters += (rng() & 1) ? '1' : '0';
        Structure w = build_structure(StructureDescriptor::word(letters));
        EvalOptions opt;
        opt.capture_witness = true;
        auto r = evaluate(w, f, {}, opt);
        if (r.outcome != Outcome::True) {
            CHECK_FALSE(r.witness.has_value());
            continue;
        }
        REQUIRE(r.witness.has_value());
        CHECK(evaluate(w, matrix, *r.witness).outcome == Outcome::True);
    }
}

TEST_CASE("oracles and library bodies agree") {
    LibRegistry reg;
    reg.add({"nonempty", 0, [](std::span<const std::int64_t>) {
                 return LibBody{{"A"}, {Sort::Set}, exists1("a", in("a", "A"))};
             }});
    OracleRegistry orc;
    orc.add("nonempty", [](const Structure&, std::span<const std::int64_t>, std::span<const Value* const> a) {
        return !a[0]->set.empty();
    });
    CHECK_THROWS_AS(orc.add("nonempty", nullptr), Error);
    auto f = parse_formula("(forallSet X (implies (forall1 z (implies (in z X) (color 1 z))) (or (lib nonempty X) (forall1 y (not (color 1 y))))))",
                           Signature::word(), &reg)
                 .formula;
    for (const char* word : {"", "0", "1", "0101", "000"}) {
        Structure w = build_structure(StructureDescriptor::word(word));
        EvalOptions a;
        a.libs = &reg;
        EvalOptions b = a;
        b.oracles = &orc;
        auto ra = evaluate(w, f, {}, a).outcome;
        CHECK(ra == evaluate(w, f, {}, b).outcome);
    }
}

TEST_CASE("eq tables on small trees") {
    TreeNode leaf0{{"0"}, {}};
    TreeNode leaf1{{"1"}, {}};
    TreeNode root{{}, {leaf0, TreeNode{{"0"}, {}}, leaf1}};
    Structure t = build_structure(StructureDescriptor::tree(root));
    auto tabs = compute_eq_tables(t, 2);
    CHECK(tabs[0](1, 2));        // two leaves colored {0}
    CHECK_FALSE(tabs[0](1, 3));  // {0} vs {1}
    CHECK_FALSE(tabs[0](0, 0));  // root has children
    CHECK(tabs[1](0, 0));
    Structure w = build_structure(StructureDescriptor::word("01"));
    CHECK_THROWS_AS(compute_eq_tables(w, 1), Error);
}
