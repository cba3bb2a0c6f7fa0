#include <doctest.h>

#include <random>
#include <set>

#include "msow/counting.hpp"
#include "msow/pinned.hpp"

using namespace msow;

namespace {

std::string zeros(int n) { return std::string(static_cast<std::size_t>(n), '0'); }

Structure word(int n) { return build_structure(StructureDescriptor::word(zeros(n))); }

// First k positions after `from`.
BitSet block(int n, int from, int k) {
    BitSet s(static_cast<std::size_t>(n));
    for (int i = from; i < from + k; ++i) s.set(static_cast<std::size_t>(i));
    return s;
}

Value decode(const PredicateInfo& info, std::size_t i, std::uint64_t& code, int n) {
    if (info.sorts[i] == Sort::Element) {
        const int x = static_cast<int>(code % static_cast<std::uint64_t>(n));
        code /= static_cast<std::uint64_t>(n);
        return Value::element(x);
    }
    BitSet s(static_cast<std::size_t>(n));
    for (int b = 0; b < n; ++b) {
        if (code & 1) s.set(static_cast<std::size_t>(b));
        code >>= 1;
    }
    return Value::elements(s);
}

std::uint64_t tuple_total(const PredicateInfo& info, int n) {
    std::uint64_t t = 1;
    for (Sort s : info.sorts) t *= s == Sort::Element ? static_cast<std::uint64_t>(n) : (std::uint64_t{1} << n);
    return t;
}

// Calls f(assignment, args) for every argument tuple on a length-n word.
template <class F>
void for_tuples(const PredicateInfo& info, int n, F&& f) {
    const std::uint64_t total = tuple_total(info, n);
    for (std::uint64_t c = 0; c < total; ++c) {
        std::uint64_t code = c;
        std::vector<Value> vals;
        Assignment a;
        for (std::size_t i = 0; i < info.formals.size(); ++i) {
            vals.push_back(decode(info, i, code, n));
            a[info.formals[i]] = vals.back();
        }
        std::vector<const Value*> ptrs;
        for (const auto& v : vals) ptrs.push_back(&v);
        f(a, std::span<const Value* const>(ptrs));
    }
}

FormulaPtr call(const std::string& name, std::vector<std::int64_t> params) {
    return lib_call(name, std::move(params), predicate_info(name).formals);
}

Outcome direct(const Structure& s, const std::string& name, std::vector<std::int64_t> params, const Assignment& a,
               bool guards = true) {
    EvalOptions opt;
    opt.libs = &counting_registry();
    opt.structural_guards = guards;
    return evaluate(s, call(name, std::move(params)), a, opt).outcome;
}

struct Case {
    std::string name;
    std::vector<std::int64_t> params;
};

const std::vector<Case>& depth0() {
    static const std::vector<Case> v{{"eq", {0}},   {"double", {0}}, {"ddist", {0}}, {"exp", {0}},
                                     {"root", {0}}, {"rootk", {4, 0}}, {"div", {0}}, {"less", {0}},
                                     {"mod", {0}}};
    return v;
}

const std::vector<Case>& helpers() {
    static const std::vector<Case> v{{"consec", {}}, {"partsection", {}}, {"section", {}},
                                     {"adj", {}},    {"same", {0}},       {"next", {0}}};
    return v;
}

}  // namespace

TEST_CASE("capacity recursion") {
    CHECK(*eq_capacity(0) == 4);
    CHECK(*eq_capacity(1) == 64);
    CHECK(*eq_capacity(2) == BigInt(64) << 64);
    CHECK_FALSE(eq_capacity(3).has_value());
    auto ledger = capacity_ledger(2);
    REQUIRE_FALSE(ledger.empty());
    CHECK(ledger.front().name == "eq");
    CHECK(ledger.front().capacity == "4");
}

TEST_CASE("eq depth 0 examples") {
    auto s = word(6);
    CHECK(direct(s, "eq", {0}, {{"P1", Value::elements(set_of(6, {0, 1}))}, {"P2", Value::elements(set_of(6, {3, 4}))}}) ==
          Outcome::True);
    CHECK(direct(s, "eq", {0}, {{"P1", Value::elements(block(6, 0, 2))}, {"P2", Value::elements(block(6, 2, 3))}}) ==
          Outcome::False);
    auto t = word(10);
    CHECK(direct(t, "eq", {0}, {{"P1", Value::elements(block(10, 0, 5))}, {"P2", Value::elements(block(10, 5, 5))}}) ==
          Outcome::False);
    CHECK(direct(t, "eq", {0}, {{"P1", Value::elements(block(10, 0, 4))}, {"P2", Value::elements(block(10, 5, 4))}}) ==
          Outcome::True);
}

TEST_CASE("arithmetic examples on the syntactic automata") {
    struct Ex {
        std::string name;
        std::vector<std::int64_t> params;
        std::vector<int> sizes;
        bool expected;
    };
    // Arguments laid out as consecutive blocks.
    const std::vector<Ex> examples{
        {"exp", {0}, {4, 16}, true},   {"exp", {0}, {3, 8}, true},      {"exp", {0}, {3, 9}, false},
        {"double", {0}, {2, 4}, true}, {"double", {0}, {0, 0}, true},   {"double", {0}, {2, 5}, false},
        {"root", {0}, {3, 9}, true},   {"rootk", {4, 0}, {2, 16}, true}, {"root", {0}, {3, 10}, false},
        {"div", {0}, {3, 9}, true},    {"div", {0}, {3, 10}, false},    {"mod", {0}, {3, 10, 1}, true},
        {"mod", {0}, {3, 10, 2}, false}, {"less", {0}, {4, 4}, false},  {"less", {0}, {3, 4}, true},
    };
    CompileCache cache;
    for (const auto& e : examples) {
        CAPTURE(e.name);
        CAPTURE(e.sizes[1]);
        const auto& info = predicate_info(e.name);
        int n = 0;
        for (int k : e.sizes) n += k;
        Assignment a;
        int at = 0;
        for (std::size_t i = 0; i < e.sizes.size(); ++i) {
            a[info.formals[i]] = Value::elements(block(n, at, e.sizes[i]));
            at += e.sizes[i];
        }
        auto d = syntactic_dfa(e.name, e.params, &cache);
        CHECK(accepts(d, zeros(n), a) == e.expected);
        auto s = word(n);
        std::vector<const Value*> args;
        for (const auto& f : info.formals) args.push_back(&a.at(f));
        CHECK(contract(s, e.name, e.params, args) == e.expected);
    }
}

TEST_CASE("ddist on intervals within U") {
    auto s = word(8);
    // U = {0,1,2,4,5,6,7}; [x,y) = [0,2) holds 2, [y,z) = [2,7) holds 4.
    Assignment a{{"x", Value::element(0)}, {"y", Value::element(2)}, {"z", Value::element(7)},
                 {"U", Value::elements(set_of(8, {0, 1, 2, 4, 5, 6, 7}))}};
    CHECK(direct(s, "ddist", {0}, a) == Outcome::True);
    a["z"] = Value::element(6);
    CHECK(direct(s, "ddist", {0}, a) == Outcome::False);
}

TEST_CASE("rootk rejects exponents that are not powers of two") {
    CHECK_THROWS(counting_registry().body("rootk", std::vector<std::int64_t>{3, 0}));
    CHECK_THROWS(gen_root(3, 0));
    CHECK_NOTHROW(gen_root(8, 0));
}

TEST_CASE("depth-0 predicates match their counter automata on every length") {
    for (const auto& c : depth0()) {
        CAPTURE(c.name);
        auto r = verify_lib_predicate(c.name, c.params, 10);
        CHECK(r.mismatches.empty());
        CHECK(r.all_lengths);
        CHECK(r.coverage == "exhaustive");
    }
    auto div = verify_lib_predicate("div", std::vector<std::int64_t>{0}, 9);
    CHECK(div.mismatches.empty());
}

TEST_CASE("semantic automata: pinned sizes and a class-count oracle") {
    auto eq = semantic_dfa("eq", std::vector<std::int64_t>{0});
    CHECK(eq.states() == pinned::eq0_states);
    auto less = semantic_dfa("less", std::vector<std::int64_t>{0});
    CHECK(less.states() == pinned::less0_states);

    // Independent count for eq(0): a prefix is summarized by (|P1|, |P2|) with
    // both clamped at 5; two summaries are equivalent iff no suffix separates
    // them. Enumerate suffix counts (i, j) up to 5 each.
    std::set<std::vector<int>> classes;
    for (int a = 0; a <= 5; ++a)
        for (int b = 0; b <= 5; ++b) {
            std::vector<int> sig;
            for (int i = 0; i <= 5; ++i)
                for (int j = 0; j <= 5; ++j) {
                    const int p = std::min(5, a + i), q = std::min(5, b + j);
                    sig.push_back(p == q && p <= 4);
                }
            classes.insert(sig);
        }
    CHECK(classes.size() == eq.states());
}

TEST_CASE("helper automata agree with their contracts") {
    CompileCache cache;
    for (const auto& c : helpers()) {
        CAPTURE(c.name);
        const auto& info = predicate_info(c.name);
        auto d = syntactic_dfa(c.name, c.params, &cache);
        for (int n = 0; n <= 5; ++n) {
            if (tuple_total(info, n) > (1u << 20)) break;
            auto s = word(n);
            std::uint64_t bad = 0;
            for_tuples(info, n, [&](const Assignment& a, std::span<const Value* const> args) {
                if (accepts(d, s, a) != contract(s, c.name, c.params, args)) ++bad;
            });
            CHECK(bad == 0);
        }
    }
}

TEST_CASE("direct evaluation of bodies agrees with the oracles") {
    std::vector<Case> all = depth0();
    for (const auto& h : helpers()) all.push_back(h);
    for (const auto& c : all) {
        CAPTURE(c.name);
        const auto& info = predicate_info(c.name);
        for (int n = 0; n <= 4; ++n) {
            if (tuple_total(info, n) > 5000) break;
            auto s = word(n);
            std::uint64_t bad = 0;
            for_tuples(info, n, [&](const Assignment& a, std::span<const Value* const> args) {
                const bool want = contract(s, c.name, c.params, args);
                if (direct(s, c.name, c.params, a) != (want ? Outcome::True : Outcome::False)) ++bad;
            });
            CHECK(bad == 0);
        }
    }
}

TEST_CASE("soundness: syntactic truth implies the arithmetic relation") {
    CompileCache cache;
    for (const auto& c : depth0()) {
        CAPTURE(c.name);
        const auto& info = predicate_info(c.name);
        auto d = syntactic_dfa(c.name, c.params, &cache);
        for (int n = 0; n <= 7; ++n) {
            if (tuple_total(info, n) > (1u << 21)) break;
            auto s = word(n);
            std::uint64_t bad = 0;
            for_tuples(info, n, [&](const Assignment& a, std::span<const Value* const> args) {
                if (accepts(d, s, a) && !ideal(s, c.name, c.params, args)) ++bad;
            });
            CHECK(bad == 0);
        }
    }
}

TEST_CASE("guarded and raw enumeration agree") {
    std::vector<Case> all = depth0();
    for (const auto& h : helpers()) all.push_back(h);
    for (const auto& c : all) {
        CAPTURE(c.name);
        const auto& info = predicate_info(c.name);
        for (int n = 0; n <= 3; ++n) {
            if (tuple_total(info, n) > 5000) break;
            auto s = word(n);
            std::uint64_t bad = 0;
            for_tuples(info, n, [&](const Assignment& a, std::span<const Value* const>) {
                if (direct(s, c.name, c.params, a, true) != direct(s, c.name, c.params, a, false)) ++bad;
            });
            CHECK(bad == 0);
        }
    }
    // eq(1): raw enumeration is only feasible on the tiniest words.
    for (int n = 0; n <= 2; ++n) {
        auto s = word(n);
        for_tuples(predicate_info("eq"), n, [&](const Assignment& a, std::span<const Value* const>) {
            CHECK(direct(s, "eq", {1}, a, true) == direct(s, "eq", {1}, a, false));
        });
    }
}

// Refuting unequal pairs directly costs ~10^8 steps at length 8 (a budget
// exceed at 2*10^9 on some), so the direct path is exercised up to length 6;
// longer words go through the lazy automaton in verify_eq_guarded.
TEST_CASE("guarded eq(1) on random pairs up to length 6") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 40; ++i) {
        const int n = static_cast<int>(rng() % 7);
        auto s = word(n);
        BitSet P1(static_cast<std::size_t>(n)), P2(static_cast<std::size_t>(n));
        for (int b = 0; b < n; ++b) {
            if (rng() & 1) P1.set(static_cast<std::size_t>(b));
            if (rng() & 1) P2.set(static_cast<std::size_t>(b));
        }
        CAPTURE(n);
        const bool want = P1.count() == P2.count();
        CHECK(direct(s, "eq", {1}, {{"P1", Value::elements(P1)}, {"P2", Value::elements(P2)}}) ==
              (want ? Outcome::True : Outcome::False));
    }
}

TEST_CASE("eq witness satisfies the matrix") {
    auto m = eq_matrix(1);
    EvalOptions opt;
    opt.libs = &counting_registry();
    for (int n : {5, 9, 13}) {
        auto s = word(n);
        for (int k = 1; k <= n / 2; ++k) {
            CAPTURE(n);
            CAPTURE(k);
            BitSet P1 = block(n, 0, k), P2 = block(n, n - k, k);
            Assignment a = eq_witness(s, P1, P2, 0);
            a["P1"] = Value::elements(P1);
            a["P2"] = Value::elements(P2);
            CHECK(evaluate(s, m, a, opt).outcome == Outcome::True);
        }
    }
    auto s = word(4);
    CHECK_THROWS(eq_witness(s, block(4, 0, 1), block(4, 0, 2), 0));
}

TEST_CASE("small guarded eq(1) run") {
    auto r = verify_eq_guarded(1, 10, 20, 3);
    CHECK(r.mismatches.empty());
    CHECK(r.coverage == "guarded");
    CHECK(r.instances > 20);
}

TEST_CASE("eq growth is pinned") {
    auto g = eq_growth(3);
    REQUIRE(g.rows.size() == 4);
    for (std::size_t d = 0; d < 4; ++d) CHECK(g.rows[d].size == pinned::eq_sizes[d]);
    for (std::size_t d = 1; d < 4; ++d) CHECK(g.rows[d].eq_calls == pinned::eq_copies);
    REQUIRE(g.ratios.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(g.ratios[i] == pinned::eq_ratio_floors[i]);
    // Each level adds a fixed amount besides its copies of the level below.
    for (std::size_t d = 1; d < 3; ++d)
        CHECK(g.rows[d + 1].size - pinned::eq_copies * g.rows[d].size ==
              g.rows[d].size - pinned::eq_copies * g.rows[d - 1].size);
}
