#include <doctest.h>

#include "msow/formula.hpp"

using namespace msow;

TEST_CASE("parse atoms and binders") {
    auto r = parse_formula("(prec x y)", Signature::word());
    CHECK(r.formula->kind == Kind::Atom);
    CHECK(r.formula->pred == Pred::Prec);
    REQUIRE(r.free.size() == 2);
    CHECK(r.free[0] == FreeVar{"x", Sort::Element});
    CHECK(r.free[1] == FreeVar{"y", Sort::Element});

    auto s = parse_formula("(existsSet X (in x X))", Signature::word());
    CHECK(s.formula->kind == Kind::Exists);
    CHECK(s.formula->sort == Sort::Set);
    REQUIRE(s.free.size() == 1);
    CHECK(s.free[0].name == "x");
}

TEST_CASE("predicates outside the signature are rejected") {
    CHECK_THROWS_AS(parse_formula("(edge x y)", Signature::word()), UnknownPredicateError);
    CHECK_THROWS_AS(parse_formula("(child x y)", Signature::threshold()), UnknownPredicateError);
    CHECK_NOTHROW(parse_formula("(edge x y)", Signature::threshold()));
}

TEST_CASE("malformed input") {
    CHECK_THROWS_AS(parse_formula("(prec x y", Signature::word()), ParseError);
    CHECK_THROWS_AS(parse_formula("(prec x y))", Signature::word()), ParseError);
    CHECK_THROWS_AS(parse_formula("(bogus x)", Signature::word()), ParseError);
    CHECK_THROWS_AS(parse_formula("(and (in x X) (in X x))", Signature::word()), SortError);
    CHECK_THROWS_AS(parse_formula("(existsEdgeSet F (true))", Signature::word()), SortError);
}

TEST_CASE("metrics") {
    auto f = parse_formula("(exists1 x (color 1 x))", Signature::word()).formula;
    Metrics m = formula_metrics(*f);
    CHECK(m.size == 2);
    CHECK(m.first_order_quantifiers == 1);
    CHECK(m.set_quantifiers == 0);
    CHECK(m.quantifier_depth == 1);

    auto g = parse_formula("(forallSet X (exists1 x (and (in x X) (prec x y))))", Signature::word()).formula;
    Metrics mg = formula_metrics(*g);
    CHECK(mg.size == 5);
    CHECK(mg.set_quantifiers == 1);
    CHECK(mg.quantifier_depth == 2);
}

TEST_CASE("desugaring of subset and set equality") {
    auto f = parse_formula("(subset A B)", Signature::word()).formula;
    CHECK(f->kind == Kind::Forall);
    CHECK(free_vars(*f).size() == 2);
    auto g = parse_formula("(and (in x A) (in x B) (= A B))", Signature::word()).formula;
    CHECK(g->kids[2]->kind == Kind::Forall);
    CHECK(parse_formula("(= a b)", Signature::word()).formula->kind == Kind::Atom);
    CHECK_THROWS_AS(parse_formula("(and (in x A) (= A x))", Signature::word()), SortError);
}

TEST_CASE("print/parse round trip") {
    const char* texts[] = {
        "(exists1 x (color 1 x))",
        "(forallSet X (implies (in x X) (exists1 y (and (prec x y) (in y X)))))",
        "(iff (true) (not (false)))",
        "(or (= x y) (prec y x) (prec x y))",
        "(subset A B)",
    };
    for (const char* t : texts) {
        auto a = parse_formula(t, Signature::word()).formula;
        auto b = parse_formula(print(a), Signature::word()).formula;
        CHECK_MESSAGE(equal(*a, *b), t);
        auto c = parse_formula(pretty(*a), Signature::word()).formula;
        CHECK(equal(*a, *c));
    }
}

TEST_CASE("validate") {
    auto f = parse_formula("(exists1 x (prec x y))", Signature::word()).formula;
    CHECK(validate(*f, Signature::word(), nullptr, {{"y", Sort::Element}}).empty());
    CHECK_FALSE(validate(*f, Signature::word()).empty());
    CHECK_FALSE(validate(*f, Signature::clique(), nullptr, {{"y", Sort::Element}}).empty());
    auto bad = atom(Pred::In, {"X", "x"});
    auto v = validate(*exists_set("X", exists1("x", bad)), Signature::word());
    REQUIRE_FALSE(v.empty());
    CHECK(v[0].path == "0.0.0");  // root is "0"
}

TEST_CASE("library expansion") {
    LibRegistry reg;
    reg.add({"before", 0, [](std::span<const std::int64_t>) {
                 return LibBody{{"a", "b"}, {Sort::Element, Sort::Element}, exists1("m", conj({prec("a", "m"), prec("m", "b")}))};
             }});
    auto f = parse_formula("(exists1 x (exists1 y (lib before x y)))", Signature::word(), &reg).formula;
    auto e = expand_lib(f, reg);
    CHECK(formula_metrics(*e).size == formula_metrics(*f, &reg, true).size);
    CHECK(free_vars(*e).empty());
    CHECK(validate(*e, Signature::word()).empty());
    CHECK_THROWS_AS(parse_formula("(lib nope x)", Signature::word(), &reg), UnknownPredicateError);
    CHECK_THROWS_AS(parse_formula("(lib before x)", Signature::word(), &reg), SortError);

    LibRegistry cyc;
    cyc.add({"loop", 0, [](std::span<const std::int64_t>) {
                 return LibBody{{"a"}, {Sort::Element}, lib_call("loop", {}, {"a"})};
             }});
    CHECK_THROWS_AS(expand_lib(lib_call("loop", {}, {"x"}), cyc), Error);
}
