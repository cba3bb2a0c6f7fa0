#include <doctest.h>

#include <random>

#include "msow/suites.hpp"
#include "msow/automata.hpp"

using namespace msow;

namespace {

FormulaPtr P(const std::string& text) { return parse_formula(text, Signature::word()).formula; }

std::string word_of(int len, int mask) {
    std::string w;
    for (int i = 0; i < len; ++i) w += (mask >> i & 1) ? '1' : '0';
    return w;
}

// All assignments of the given free variables over a universe of size n.
std::vector<Assignment> assignments(const std::vector<FreeVar>& free, int n) {
    std::vector<Assignment> out{{}};
    for (const auto& v : free) {
        std::vector<Assignment> next;
        for (const auto& a : out) {
            if (v.sort == Sort::Element) {
                for (int x = 0; x < n; ++x) {
                    auto b = a;
                    b[v.name] = Value::element(x);
                    next.push_back(b);
                }
            } else {
                for (int m = 0; m < (1 << n); ++m) {
                    auto b = a;
                    BitSet s(static_cast<std::size_t>(n));
                    for (int i = 0; i < n; ++i)
                        if (m >> i & 1) s.set(static_cast<std::size_t>(i));
                    b[v.name] = Value::elements(s);
                    next.push_back(b);
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
    std::vector<std::uint32_t> table(states * S);
    for (auto& x : table) x = static_cast<std::uint32_t>(rng() % states);
    std::vector<char> acc(states);
    for (auto& a : acc) a = static_cast<char>(rng() & 1);
    return TrackDfa(t, states, 0, acc, table);
}

}  // namespace

TEST_CASE("textbook automata") {
    auto d = compile(P("(exists1 x (color 1 x))"));
    CHECK(d.states() == 2);
    CHECK_FALSE(accepts(d, "00"));
    CHECK(accepts(d, "010"));
    auto t = compile(P("(true)"));
    CHECK(t.states() == 1);
    CHECK(t.accepting(0));
    CHECK_THROWS_AS(compile(parse_formula("(edge x y)", Signature::threshold()).formula), UnknownPredicateError);
}

TEST_CASE("battery: compile agrees with evaluate on words up to length 6") {
    for (const auto& text : suites::automata_battery()) {
        auto f = P(text);
        auto free = free_vars(*f);
        TrackDfa d = compile(f);
        for (int n = 0; n <= 6; ++n)
            for (int mask = 0; mask < (1 << n); ++mask) {
                Structure w = build_structure(StructureDescriptor::word(word_of(n, mask)));
                for (const auto& a : assignments(free, n)) {
                    const bool e = evaluate(w, f, a).outcome == Outcome::True;
                    CHECK_MESSAGE(accepts(d, w, a) == e, text);
                }
            }
    }
}

TEST_CASE("minimize is language preserving and idempotent") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 30; ++i) {
        TrackDfa d = random_dfa(rng, 1 + i % 2, 1 + static_cast<std::uint32_t>(rng() % 15));
        TrackDfa m = minimize(d);
        CHECK(language_equiv(d, m).equal);
        TrackDfa mm = minimize(m);
        CHECK(mm.table() == m.table());
        CHECK(mm.accepting_flags() == m.accepting_flags());
        CHECK(m.states() <= d.states());
    }
    // Product with itself collapses.
    auto d = compile(P("(exists1 x (exists1 y (and (prec x y) (color 1 y))))"));
    CHECK(dfa_and(d, d).states() == d.states());
}

TEST_CASE("minimize matches brute-force Nerode classes") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        TrackDfa d = random_dfa(rng, 1, 12);
        // Signature of each reachable state: acceptance of all words up to length 12.
        std::vector<char> reach(12, 0);
        std::vector<std::uint32_t> st{0};
        reach[0] = 1;
        while (!st.empty()) {
            auto q = st.back();
            st.pop_back();
            for (std::uint32_t a = 0; a < 2; ++a)
                if (!reach[d.next(q, a)]) {
                    reach[d.next(q, a)] = 1;
                    st.push_back(d.next(q, a));
                }
        }
        std::set<std::vector<char>> classes;
        for (std::uint32_t q = 0; q < 12; ++q) {
            if (!reach[q]) continue;
            std::vector<char> sig;
            for (int len = 0; len <= 12; ++len)
                for (int w = 0; w < (1 << len); ++w) {
                    std::uint32_t r = q;
                    for (int i = 0; i < len; ++i) r = d.next(r, static_cast<std::uint32_t>(w >> i & 1));
                    sig.push_back(static_cast<char>(d.accepting(r)));
                }
            classes.insert(sig);
        }
        CHECK(minimize(d).states() == classes.size());
    }
}

TEST_CASE("unary acceptance via cycle profile") {
    // length = 0 mod 3
    TrackDfa mod3 = build_dfa({}, 0, [](std::uint64_t k, std::uint32_t) { return (k + 1) % 3; },
                              [](std::uint64_t k) { return k == 0; });
    CHECK(mod3.states() == 3);
    CHECK_FALSE(accepts_unary(mod3, BigInt("1000000000000000000")));
    CHECK(accepts_unary(mod3, BigInt("999999999999999999")));
    CHECK(accepts_unary(mod3, 0));
    auto even = compile(P(suites::automata_battery()[6]));
    for (int n = 0; n <= 50; ++n) CHECK(accepts_unary(even, n) == (n % 2 == 0));
    CHECK_THROWS_AS(accepts_unary(compile(P("(prec x y)")), 3), Error);
}

TEST_CASE("language equivalence counterexamples") {
    auto some = compile(P("(exists1 x (color 1 x))"));
    auto t = dfa_and(compile(P("(true)")), dfa_wellformed({letter_track("1")}));
    auto r = language_equiv(some, t);
    REQUIRE_FALSE(r.equal);
    CHECK(r.counterexample->length == 0);
    CHECK(language_equiv(some, minimize(some)).equal);
    auto mx = compile(P("(prec x y)"));
    CHECK_THROWS_AS(language_equiv(mx, some), Error);
}

TEST_CASE("lib calls compile through renaming") {
    LibRegistry reg;
    reg.add({"before", 0, [](std::span<const std::int64_t>) {
                 return LibBody{{"a", "b"}, {Sort::Element, Sort::Element}, prec("a", "b")};
             }});
    CompileOptions opt;
    opt.libs = &reg;
    auto f = parse_formula("(and (lib before x y) (lib before y x))", Signature::word(), &reg).formula;
    auto d = compile(f, opt);
    CHECK_FALSE(language_equiv(d, compile(P("(and (prec x y) (not (prec x y)))"))).counterexample.has_value());
    auto g = parse_formula("(exists1 y (lib before y x))", Signature::word(), &reg).formula;
    auto h = P("(exists1 y (prec y x))");
    CHECK(language_equiv(compile(g, opt), compile(h)).equal);
    auto same = parse_formula("(lib before x x)", Signature::word(), &reg).formula;
    CHECK(language_equiv(compile(same, opt), compile(P("(and (prec x x) (= x x))"))).equal);
}

TEST_CASE("decide_on_word matches compiled automata") {
    auto f = P("(existsSet X (and (forall1 z (implies (in z X) (color 1 z))) (exists1 a (exists1 b (and (in a X) (in b X) (prec a b) (in a Y))))))");
    auto d = compile(f);
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = static_cast<int>(rng() % 9);
        std::string w = word_of(n, static_cast<int>(rng() % 512));
        BitSet y(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) y.set(static_cast<std::size_t>(i), rng() & 1);
        Assignment a{{"Y", Value::elements(y)}};
        CHECK(decide_on_word(f, w, a) == accepts(d, w, a));
    }
}

TEST_CASE("blowup is reported with the subformula") {
    CompileOptions opt;
    opt.limits.state_cap = 3;
    try {
        compile(P(suites::automata_battery()[6]), opt);
        FAIL("expected blowup");
    } catch (const BlowupError& e) {
        CHECK_FALSE(e.subformula.empty());
    }
}

TEST_CASE("automaton JSON round trip") {
    auto d = compile(P("(and (in x X) (forall1 y (implies (prec y x) (not (in y X)))))"));
    auto j = to_json(d);
    auto e = dfa_from_json(j);
    CHECK(e.table() == d.table());
    CHECK(to_json(e) == j);
}
