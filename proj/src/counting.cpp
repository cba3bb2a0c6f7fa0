#include "msow/counting.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <sstream>

namespace msow {

namespace {

using F = FormulaPtr;

F And(std::vector<F> k) { return conj(std::move(k)); }
F Or(std::vector<F> k) { return disj(std::move(k)); }
F Not(F f) { return neg(std::move(f)); }
F Imp(F a, F b) { return implies(std::move(a), std::move(b)); }
F leq(const std::string& x, const std::string& y) { return Or({prec(x, y), eq(x, y)}); }
F sub(const std::string& A, const std::string& B) { return subset_of(A, B, "z"); }
F empty(const std::string& A) { return is_empty(A, "z"); }
F L(const std::string& name, std::vector<std::int64_t> params, std::vector<std::string> args) {
    return lib_call(name, std::move(params), std::move(args));
}
F section(const std::string& S, const std::string& U, const std::string& P) { return L("section", {}, {S, U, P}); }

const std::vector<Sort> kSets2{Sort::Set, Sort::Set};

// Bodies -------------------------------------------------------------------------------

LibBody consec_body() {
    return {{"S", "U"}, kSets2,
            forall1("x", forall1("y", forall1("z", Imp(And({in("x", "S"), in("y", "S"), in("z", "U"), prec("x", "z"),
                                                             prec("z", "y")}),
                                                        in("z", "S")))))};
}

LibBody partsection_body() {
    return {{"S", "U", "P"},
            {Sort::Set, Sort::Set, Sort::Set},
            And({sub("S", "U"), L("consec", {}, {"S", "U"}),
                 forall1("x", forall1("y", Imp(And({in("x", "S"), in("y", "S")}), iff(in("x", "P"), in("y", "P")))))})};
}

LibBody section_body() {
    return {{"S", "U", "P"},
            {Sort::Set, Sort::Set, Sort::Set},
            And({L("partsection", {}, {"S", "U", "P"}),
                 forall_set("T", Imp(And({sub("S", "T"), L("partsection", {}, {"T", "U", "P"})}), set_equal("T", "S", "z")))})};
}

LibBody adj_body() {
    return {{"S1", "S2", "U"},
            {Sort::Set, Sort::Set, Sort::Set},
            exists1("x", exists1("y", And({in("x", "S1"), in("y", "S2"), prec("x", "y"),
                                           forall1("z", Imp(in("z", "U"), Or({prec("z", "x"), prec("y", "z"), eq("z", "x"),
                                                                              eq("z", "y")})))})))};
}

LibBody same_body(std::int64_t d) {
    auto first = [](const std::string& f, const std::string& S) { return forall1("x", Imp(in("x", S), leq(f, "x"))); };
    auto last = [](const std::string& l, const std::string& X) { return forall1("x", Imp(in("x", X), leq("x", l))); };
    F probe = Imp(And({sub("X1", "S1"), sub("X2", "S2"), in("f1", "X1"), in("f2", "X2"), L("consec", {}, {"X1", "S1"}),
                       L("consec", {}, {"X2", "S2"}), L("eq", {d}, {"X1", "X2"})}),
                  exists1("l1", exists1("l2", And({in("l1", "X1"), in("l2", "X2"), last("l1", "X1"), last("l2", "X2"),
                                                   iff(in("l1", "B1"), in("l2", "B2"))}))));
    F main = exists1("f1", exists1("f2", And({in("f1", "S1"), in("f2", "S2"), first("f1", "S1"), first("f2", "S2"),
                                              forall_set("X1", forall_set("X2", probe))})));
    return {{"S1", "S2", "B1", "B2"},
            {Sort::Set, Sort::Set, Sort::Set, Sort::Set},
            Or({And({empty("S1"), empty("S2")}), main})};
}

LibBody next_body(std::int64_t d) {
    auto split = [](const std::string& i) {
        const std::string S = "S" + i, Lf = "L" + i, s = "s" + i, R = "R" + i;
        return And({sub(Lf, S), in(s, S), sub(R, S), forall1("x", Imp(in("x", Lf), prec("x", s))),
                    forall1("y", Imp(in("y", R), prec(s, "y"))),
                    forall1("z", Imp(in("z", S), Or({in("z", Lf), eq("z", s), in("z", R)})))});
    };
    F m = And({split("1"), split("2"), in("s2", "B"), Not(in("s1", "B")), sub("R1", "B"), disjoint("R2", "B", "z"),
               L("eq", {d}, {"R1", "R2"}), L("same", {d}, {"L1", "L2", "B", "B"})});
    return {{"S1", "S2", "B"},
            {Sort::Set, Sort::Set, Sort::Set},
            exists_set("L1", exists1("s1", exists_set("R1", exists_set("L2", exists1("s2", exists_set("R2", m))))))};
}

F card(const std::string& P, int k) {
    if (k == 0) return is_empty(P, "z");
    std::vector<F> parts;
    std::vector<F> alts;
    for (int i = 1; i <= k; ++i) {
        const std::string x = "x" + std::to_string(i);
        parts.push_back(in(x, P));
        if (i > 1) parts.push_back(prec("x" + std::to_string(i - 1), x));
        alts.push_back(eq("z", x));
    }
    parts.push_back(forall1("z", Imp(in("z", P), Or(alts))));
    F f = And(parts);
    for (int i = k; i >= 1; --i) f = exists1("x" + std::to_string(i), f);
    return f;
}

// Matrix of eq(d) for d >= 1 over the witnesses R_i, U_i, Q_i, B_i.
F eq_matrix_of(std::int64_t d) {
    const std::int64_t e = d - 1;
    std::vector<F> parts;
    for (const char* i : {"1", "2"}) {
        const std::string P = std::string("P") + i, R = std::string("R") + i, U = std::string("U") + i,
                          Q = std::string("Q") + i, B = std::string("B") + i;
        parts.push_back(sub(R, P));
        parts.push_back(is_difference(U, P, R, "z"));
        parts.push_back(sub(Q, P));
        parts.push_back(sub(B, P));
    }
    parts.push_back(L("eq", {e}, {"R1", "R2"}));
    parts.push_back(forall_set("S1", forall_set("S2", Imp(And({section("S1", "U1", "Q1"), section("S2", "U2", "Q2")}),
                                                          L("eq", {e}, {"S1", "S2"})))));
    for (const char* i : {"1", "2"}) {
        const std::string U = std::string("U") + i, Q = std::string("Q") + i, B = std::string("B") + i;
        parts.push_back(forall_set(
            "S", forall_set("T", Imp(And({disjoint("S", "T", "z"), section("S", U, Q), section("T", U, Q),
                                          L("adj", {}, {"S", "T", U})}),
                                     L("next", {e}, {"S", "T", B})))));
    }
    std::vector<F> last{L("same", {e}, {"F1", "F2", "B1", "B2"})};
    for (const char* i : {"1", "2"}) {
        const std::string U = std::string("U") + i, Q = std::string("Q") + i, Fi = std::string("F") + i;
        last.push_back(section(Fi, U, Q));
        last.push_back(forall_set("T", Imp(And({section("T", U, Q), disjoint("T", Fi, "z")}),
                                           exists1("x", exists1("y", And({in("x", "T"), in("y", Fi), prec("x", "y")}))))));
    }
    parts.push_back(exists_set("F1", exists_set("F2", And(last))));
    for (const char* i : {"1", "2"}) {
        const std::string U = std::string("U") + i, Q = std::string("Q") + i, B = std::string("B") + i;
        parts.push_back(forall_set("S", Imp(section("S", U, Q), exists1("z", And({in("z", "S"), Not(in("z", B))})))));
    }
    for (const char* i : {"1", "2"}) {
        const std::string U = std::string("U") + i, Q = std::string("Q") + i, B = std::string("B") + i;
        const std::string Z = std::string("Z") + i;
        parts.push_back(exists_set(Z, And({section(Z, U, Q), disjoint(Z, B, "z")})));
    }
    return And(parts);
}

const std::vector<std::string> kEqWitnesses{"R1", "R2", "U1", "U2", "Q1", "Q2", "B1", "B2"};

LibBody eq_body(std::int64_t d) {
    if (d < 0) throw Error("eq depth must be >= 0");
    if (d == 0) {
        std::vector<F> alts;
        for (int k = 0; k <= 4; ++k) alts.push_back(And({card("P1", k), card("P2", k)}));
        return {{"P1", "P2"}, kSets2, Or(alts)};
    }
    F m = eq_matrix_of(d);
    for (auto it = kEqWitnesses.rbegin(); it != kEqWitnesses.rend(); ++it) m = exists_set(*it, m);
    return {{"P1", "P2"}, kSets2, Or({And({empty("P1"), empty("P2")}), m})};
}

LibBody double_body(std::int64_t d) {
    return {{"S1", "S2"}, kSets2,
            exists_set("T", exists_set("D", And({sub("T", "S2"), is_difference("D", "S2", "T", "z"),
                                                 L("eq", {d}, {"S1", "T"}), L("eq", {d}, {"S1", "D"})})))};
}

LibBody ddist_body(std::int64_t d) {
    auto interval = [](const std::string& A, const std::string& lo, const std::string& hi) {
        return forall1("u", iff(in("u", A), And({in("u", "U"), leq(lo, "u"), prec("u", hi)})));
    };
    return {{"x", "y", "z", "U"},
            {Sort::Element, Sort::Element, Sort::Element, Sort::Set},
            exists_set("A", exists_set("C", And({interval("A", "x", "y"), interval("C", "y", "z"),
                                                 L("double", {d}, {"A", "C"})})))};
}

LibBody exp_body(std::int64_t d) {
    F ends = forall1("u", Imp(in("u", "P2"), And({leq("u", "l"), Or({leq("s", "u"), eq("f", "u")})})));
    F drop_last = exists_set("Ql", And({forall1("u", iff(in("u", "Ql"), And({in("u", "Q"), Not(eq("u", "l"))}))),
                                        L("eq", {d}, {"P1", "Ql"})}));
    F gap = exists1("u", And({in("u", "Q"), Or({And({prec("x", "u"), prec("u", "y")}), And({prec("y", "u"), prec("u", "z")})})}));
    F triples = forall1("x", forall1("y", forall1("z", Imp(And({in("x", "Q"), in("y", "Q"), in("z", "Q"), prec("x", "y"),
                                                                 prec("y", "z"), Not(gap)}),
                                                            L("ddist", {d}, {"x", "y", "z", "P2"})))));
    F m = And({sub("Q", "P2"), in("f", "Q"), in("s", "Q"), in("l", "Q"), prec("f", "s"), ends, drop_last, triples});
    return {{"P1", "P2"}, kSets2, exists_set("Q", exists1("f", exists1("s", exists1("l", m))))};
}

LibBody root_body(std::int64_t d) {
    F one = exists1("x", And({in("x", "S"), in("x", "T"),
                              forall1("y", Imp(And({in("y", "S"), in("y", "T")}), eq("y", "x")))}));
    F reps = exists_set("T", And({sub("T", "P2"), L("eq", {d}, {"T", "P1"}),
                                  forall_set("S", Imp(section("S", "P2", "Q"), one))}));
    return {{"P1", "P2"}, kSets2,
            exists_set("Q", And({sub("Q", "P2"), forall_set("S", Imp(section("S", "P2", "Q"), L("eq", {d}, {"S", "P1"}))),
                                 reps}))};
}

bool power_of_two(std::int64_t k) { return k >= 2 && (k & (k - 1)) == 0; }

LibBody rootk_body(std::int64_t k, std::int64_t d) {
    if (!power_of_two(k)) throw Error("rootk exponent must be a power of two >= 2, got " + std::to_string(k));
    if (k == 2) return {{"P1", "P2"}, kSets2, L("root", {d}, {"P1", "P2"})};
    return {{"P1", "P2"}, kSets2,
            exists_set("Q", And({L("root", {d}, {"Q", "P2"}), L("rootk", {k / 2, d}, {"P1", "Q"})}))};
}

LibBody div_body(std::int64_t d) {
    return {{"P1", "P2"}, kSets2,
            exists_set("Q", And({sub("Q", "P2"), forall_set("S", Imp(section("S", "P2", "Q"), L("eq", {d}, {"S", "P1"})))}))};
}

LibBody less_body(std::int64_t d) {
    return {{"P1", "P2"}, kSets2,
            exists_set("S", And({sub("P1", "S"), exists1("x", And({in("x", "S"), Not(in("x", "P1"))})),
                                 L("eq", {d}, {"S", "P2"})}))};
}

LibBody mod_body(std::int64_t d) {
    return {{"P1", "P2", "R"},
            {Sort::Set, Sort::Set, Sort::Set},
            exists_set("S", exists_set("D", And({sub("S", "P2"), is_difference("D", "P2", "S", "z"), L("eq", {d}, {"S", "R"}),
                                                 L("div", {d}, {"P1", "D"}), L("less", {d}, {"R", "P1"})})))};
}

std::int64_t depth_param(std::span<const std::int64_t> p, std::size_t i = 0) {
    if (p.size() <= i || p[i] < 0) throw Error("depth parameter must be >= 0");
    return p[i];
}

// Capacities ---------------------------------------------------------------------------

/// n <= cap(d), treating unrepresentable capacities as unbounded.
bool within(const BigInt& n, std::int64_t d) {
    auto c = eq_capacity(static_cast<int>(d));
    return !c || n <= *c;
}

std::vector<int> ordered_members(const Structure& s, const BitSet& S) {
    std::vector<int> out;
    for (int x : s.ordered())
        if (S.test(static_cast<std::size_t>(x))) out.push_back(x);
    return out;
}

bool same_contract(const Structure& s, std::int64_t d, const BitSet& S1, const BitSet& S2, const BitSet& B1,
                   const BitSet& B2) {
    if (S1.empty() && S2.empty()) return true;
    if (S1.empty() || S2.empty()) return false;
    auto a = ordered_members(s, S1), b = ordered_members(s, S2);
    const std::size_t m = std::min(a.size(), b.size());
    for (std::size_t k = 1; k <= m && within(k, d); ++k)
        if (B1.test(static_cast<std::size_t>(a[k - 1])) != B2.test(static_cast<std::size_t>(b[k - 1]))) return false;
    return true;
}

bool next_contract(const Structure& s, std::int64_t d, const BitSet& S1, const BitSet& S2, const BitSet& B) {
    auto a = ordered_members(s, S1), b = ordered_members(s, S2);
    auto in_b = [&](int x) { return B.test(static_cast<std::size_t>(x)); };
    int j1 = -1, j2 = -1;
    for (int i = 0; i < static_cast<int>(a.size()); ++i)
        if (!in_b(a[static_cast<std::size_t>(i)])) j1 = i;
    for (int i = 0; i < static_cast<int>(b.size()); ++i)
        if (in_b(b[static_cast<std::size_t>(i)])) j2 = i;
    if (j1 < 0 || j2 < 0) return false;
    const std::size_t r1 = a.size() - 1 - static_cast<std::size_t>(j1), r2 = b.size() - 1 - static_cast<std::size_t>(j2);
    if (r1 != r2 || !within(r1, d)) return false;
    BitSet L1(S1.size()), L2(S2.size());
    for (int i = 0; i < j1; ++i) L1.set(static_cast<std::size_t>(a[static_cast<std::size_t>(i)]));
    for (int i = 0; i < j2; ++i) L2.set(static_cast<std::size_t>(b[static_cast<std::size_t>(i)]));
    return same_contract(s, d, L1, L2, B, B);
}

bool consec_contract(const Structure& s, const BitSet& S, const BitSet& U) {
    bool started = false, gap = false;
    for (int x : s.ordered()) {
        const bool inS = S.test(static_cast<std::size_t>(x)), inU = U.test(static_cast<std::size_t>(x));
        if (inS) {
            if (gap) return false;
            started = true;
        } else if (inU && started) {
            gap = true;
        }
    }
    return true;
}

bool homogeneous(const BitSet& S, const BitSet& P) {
    BitSet t = S;
    t &= P;
    return t.empty() || t == S;
}

bool partsection_contract(const Structure& s, const BitSet& S, const BitSet& U, const BitSet& P) {
    return S.is_subset_of(U) && consec_contract(s, S, U) && homogeneous(S, P);
}

bool section_contract(const Structure& s, const BitSet& S, const BitSet& U, const BitSet& P) {
    if (!partsection_contract(s, S, U, P)) return false;
    auto u = ordered_members(s, U);
    if (S.empty()) return u.empty();
    auto inS = [&](int x) { return S.test(static_cast<std::size_t>(x)); };
    auto inP = [&](int x) { return P.test(static_cast<std::size_t>(x)); };
    std::size_t lo = u.size(), hi = 0;
    for (std::size_t i = 0; i < u.size(); ++i)
        if (inS(u[i])) {
            lo = std::min(lo, i);
            hi = i;
        }
    // Maximal when the U neighbours on both sides differ on P.
    if (lo > 0 && inP(u[lo - 1]) == inP(u[lo])) return false;
    if (hi + 1 < u.size() && inP(u[hi + 1]) == inP(u[hi])) return false;
    return true;
}

bool adj_contract(const Structure& s, const BitSet& S1, const BitSet& S2, const BitSet& U) {
    // Scan in order remembering whether the last S1/U-relevant element allows a jump.
    bool open = false;  // an S1 element seen with no U element after it yet
    for (int x : s.ordered()) {
        const auto i = static_cast<std::size_t>(x);
        if (open && S2.test(i)) return true;
        if (S1.test(i)) open = true;
        else if (U.test(i)) open = false;
    }
    return false;
}

BigInt pow_big(std::int64_t b, std::int64_t e) {
    BigInt r = 1;
    for (std::int64_t i = 0; i < e; ++i) r *= b;
    return r;
}

std::size_t card_of(const Value* v) { return v->set.count(); }

// |U ∩ [lo, hi)| in structure order.
std::size_t interval_count(const Structure& s, int lo, int hi, const BitSet& U) {
    std::size_t n = 0;
    for (int x : s.ordered())
        if (U.test(static_cast<std::size_t>(x)) && !s.prec(x, lo) && s.prec(x, hi)) ++n;
    return n;
}

bool contract_impl(const Structure& s, const std::string& name, std::span<const std::int64_t> p,
                   std::span<const Value* const> a, bool capacity) {
    auto cap_ok = [&](const BigInt& n, std::int64_t d) { return !capacity || within(n, d); };
    if (name == "consec") return consec_contract(s, a[0]->set, a[1]->set);
    if (name == "partsection") return partsection_contract(s, a[0]->set, a[1]->set, a[2]->set);
    if (name == "section") return section_contract(s, a[0]->set, a[1]->set, a[2]->set);
    if (name == "adj") return adj_contract(s, a[0]->set, a[1]->set, a[2]->set);
    if (name == "same") return same_contract(s, capacity ? depth_param(p) : 1 << 30, a[0]->set, a[1]->set, a[2]->set, a[3]->set);
    if (name == "next") return next_contract(s, capacity ? depth_param(p) : 1 << 30, a[0]->set, a[1]->set, a[2]->set);
    const std::int64_t d = name == "rootk" ? depth_param(p, 1) : depth_param(p);
    if (name == "eq") return card_of(a[0]) == card_of(a[1]) && cap_ok(card_of(a[0]), d);
    if (name == "double") return card_of(a[1]) == 2 * card_of(a[0]) && cap_ok(card_of(a[0]), d);
    if (name == "ddist") {
        const std::size_t lo = interval_count(s, a[0]->index, a[1]->index, a[3]->set);
        const std::size_t hi = interval_count(s, a[1]->index, a[2]->index, a[3]->set);
        return hi == 2 * lo && cap_ok(lo, d);
    }
    if (name == "exp") {
        const std::size_t k = card_of(a[0]);
        if (BigInt(card_of(a[1])) != pow_big(2, static_cast<std::int64_t>(k))) return false;
        if (!capacity) return true;
        if (k < 1 || !cap_ok(k, d)) return false;
        return k < 2 || cap_ok(pow_big(2, static_cast<std::int64_t>(k) - 2), d);
    }
    if (name == "root" || name == "rootk") {
        const std::int64_t k = name == "root" ? 2 : p[0];
        if (!power_of_two(k)) throw Error("rootk exponent must be a power of two >= 2");
        const std::size_t q = card_of(a[0]);
        if (BigInt(card_of(a[1])) != pow_big(static_cast<std::int64_t>(q), k)) return false;
        return !capacity || (q >= 1 && cap_ok(pow_big(static_cast<std::int64_t>(q), k / 2), d));
    }
    if (name == "div") {
        const std::size_t q = card_of(a[0]), m = card_of(a[1]);
        if (!capacity) return q == 0 ? m == 0 : m % q == 0;
        if (m == 0) return q == 0;
        return q >= 1 && cap_ok(q, d) && m % q == 0;
    }
    if (name == "less") return card_of(a[0]) < card_of(a[1]) && cap_ok(card_of(a[1]), d);
    if (name == "mod") {
        const std::size_t q = card_of(a[0]), m = card_of(a[1]), r = card_of(a[2]);
        if (!capacity) return q > 0 && m % q == r;
        return r < q && cap_ok(q, d) && m >= q + r && (m - r) % q == 0;
    }
    throw UnknownPredicateError("unknown counting predicate " + name);
}

}  // namespace

// Public API -----------------------------------------------------------------------------

std::optional<BigInt> eq_capacity(int d) {
    if (d < 0) throw Error("depth must be >= 0");
    BigInt c = 4;
    for (int i = 0; i < d; ++i) {
        if (c > 4096) return std::nullopt;
        c = c * pow_big(2, static_cast<std::int64_t>(c));
    }
    return c;
}

std::vector<CapacityEntry> capacity_ledger(int max_depth) {
    std::vector<CapacityEntry> out;
    for (int d = 0; d <= max_depth; ++d) {
        auto c = eq_capacity(d);
        const std::string cs = c ? c->str() : "cap(" + std::to_string(d - 1) + ")*2^cap(" + std::to_string(d - 1) + ")";
        const std::int64_t D = d;
        out.push_back({"eq", {D}, cs,
                       d == 0 ? "first-order case analysis up to 4 elements"
                              : "sections of size <= cap(d-1), at most 2^cap(d-1)-1 of them, remainder <= cap(d-1)"});
        out.push_back({"double", {D}, cs, "|S1| <= cap(d)"});
        out.push_back({"ddist", {D}, cs, "|U ∩ [x,y)| <= cap(d)"});
        out.push_back({"exp", {D}, cs, "1 <= |P1| <= cap(d) and 2^(|P1|-2) <= cap(d)"});
        out.push_back({"root", {D}, cs, "1 <= |P1| <= cap(d)"});
        out.push_back({"rootk", {4, D}, cs, "1 <= |P1| and |P1|^(k/2) <= cap(d)"});
        out.push_back({"div", {D}, cs, "1 <= |P1| <= cap(d), or both empty"});
        out.push_back({"less", {D}, cs, "|P2| <= cap(d)"});
        out.push_back({"mod", {D}, cs, "|R| < |P1| <= cap(d) and |P2| >= |P1| + |R|"});
    }
    return out;
}

nlohmann::json to_json(const CapacityEntry& e) {
    return {{"name", e.name}, {"params", e.params}, {"capacity", e.capacity}, {"note", e.note}};
}

const std::vector<PredicateInfo>& counting_predicates() {
    static const std::vector<PredicateInfo> v = {
        {"eq", 1, {"P1", "P2"}, kSets2, true},
        {"double", 1, {"S1", "S2"}, kSets2, true},
        {"ddist", 1, {"x", "y", "z", "U"}, {Sort::Element, Sort::Element, Sort::Element, Sort::Set}, false},
        {"exp", 1, {"P1", "P2"}, kSets2, true},
        {"root", 1, {"P1", "P2"}, kSets2, true},
        {"rootk", 2, {"P1", "P2"}, kSets2, true},
        {"div", 1, {"P1", "P2"}, kSets2, true},
        {"less", 1, {"P1", "P2"}, kSets2, true},
        {"mod", 1, {"P1", "P2", "R"}, {Sort::Set, Sort::Set, Sort::Set}, true},
        {"consec", 0, {"S", "U"}, kSets2, false},
        {"partsection", 0, {"S", "U", "P"}, {Sort::Set, Sort::Set, Sort::Set}, false},
        {"section", 0, {"S", "U", "P"}, {Sort::Set, Sort::Set, Sort::Set}, false},
        {"adj", 0, {"S1", "S2", "U"}, {Sort::Set, Sort::Set, Sort::Set}, false},
        {"same", 1, {"S1", "S2", "B1", "B2"}, {Sort::Set, Sort::Set, Sort::Set, Sort::Set}, false},
        {"next", 1, {"S1", "S2", "B"}, {Sort::Set, Sort::Set, Sort::Set}, false},
    };
    return v;
}

const PredicateInfo& predicate_info(const std::string& name) {
    for (const auto& p : counting_predicates())
        if (p.name == name) return p;
    throw UnknownPredicateError("unknown counting predicate " + name);
}

const LibRegistry& counting_registry() {
    static const LibRegistry reg = [] {
        LibRegistry r;
        r.add({"consec", 0, [](std::span<const std::int64_t>) { return consec_body(); }});
        r.add({"partsection", 0, [](std::span<const std::int64_t>) { return partsection_body(); }});
        r.add({"section", 0, [](std::span<const std::int64_t>) { return section_body(); }});
        r.add({"adj", 0, [](std::span<const std::int64_t>) { return adj_body(); }});
        r.add({"same", 1, [](std::span<const std::int64_t> p) { return same_body(depth_param(p)); }});
        r.add({"next", 1, [](std::span<const std::int64_t> p) { return next_body(depth_param(p)); }});
        r.add({"eq", 1, [](std::span<const std::int64_t> p) { return eq_body(depth_param(p)); }});
        r.add({"double", 1, [](std::span<const std::int64_t> p) { return double_body(depth_param(p)); }});
        r.add({"ddist", 1, [](std::span<const std::int64_t> p) { return ddist_body(depth_param(p)); }});
        r.add({"exp", 1, [](std::span<const std::int64_t> p) { return exp_body(depth_param(p)); }});
        r.add({"root", 1, [](std::span<const std::int64_t> p) { return root_body(depth_param(p)); }});
        r.add({"rootk", 2, [](std::span<const std::int64_t> p) { return rootk_body(p[0], depth_param(p, 1)); }});
        r.add({"div", 1, [](std::span<const std::int64_t> p) { return div_body(depth_param(p)); }});
        r.add({"less", 1, [](std::span<const std::int64_t> p) { return less_body(depth_param(p)); }});
        r.add({"mod", 1, [](std::span<const std::int64_t> p) { return mod_body(depth_param(p)); }});
        return r;
    }();
    return reg;
}

LibBody gen_eq(int d) { return eq_body(d); }
LibBody gen_exp(int d) { return exp_body(d); }
LibBody gen_double(int d) { return double_body(d); }
LibBody gen_ddist(int d) { return ddist_body(d); }
LibBody gen_root(std::int64_t k, int d) { return k == 2 ? root_body(d) : rootk_body(k, d); }
LibBody gen_div(int d) { return div_body(d); }
LibBody gen_less(int d) { return less_body(d); }
LibBody gen_mod(int d) { return mod_body(d); }

FormulaPtr eq_matrix(int d_plus_1) {
    if (d_plus_1 < 1) throw Error("eq matrix needs depth >= 1");
    return eq_matrix_of(d_plus_1);
}

bool contract(const Structure& s, const std::string& name, std::span<const std::int64_t> params,
              std::span<const Value* const> args) {
    return contract_impl(s, name, params, args, true);
}

bool ideal(const Structure& s, const std::string& name, std::span<const std::int64_t> params,
           std::span<const Value* const> args) {
    return contract_impl(s, name, params, args, false);
}

const OracleRegistry& counting_oracles() {
    static const OracleRegistry reg = [] {
        OracleRegistry r;
        for (const auto& p : counting_predicates()) {
            const std::string name = p.name;
            r.add(name, [name](const Structure& s, std::span<const std::int64_t> params, std::span<const Value* const> a) {
                return contract(s, name, params, a);
            });
        }
        return r;
    }();
    return reg;
}

// Semantic automata ----------------------------------------------------------------------

namespace {

std::int64_t small_cap(std::int64_t d, const std::string& who, std::int64_t limit = 1 << 16) {
    auto c = eq_capacity(static_cast<int>(d));
    if (!c || *c > limit) throw BlowupError("semantic_dfa(" + who + "): capacity too large for counters", 0);
    return static_cast<std::int64_t>(*c);
}

// Counters over set tracks: each saturates at `sat` and optionally keeps the
// residue modulo `mod`. States are mixed-radix keys.
struct Counter {
    std::int64_t sat = 0;
    std::int64_t mod = 1;
};

TrackDfa counter_dfa(const std::vector<std::string>& names, const std::vector<Counter>& ctr,
                     const std::function<bool(const std::vector<std::int64_t>&, const std::vector<std::int64_t>&)>& accept,
                     const Limits& limits, const std::string& who) {
    // names are already sorted, so bit i of a symbol is names[i].
    std::vector<std::uint64_t> radix;
    std::uint64_t total = 1;
    for (const auto& c : ctr) {
        radix.push_back(total);
        const auto span = static_cast<std::uint64_t>((c.sat + 1) * c.mod);
        if (total > (std::uint64_t{1} << 40) / span) throw BlowupError("semantic_dfa(" + who + ")", total);
        total *= span;
    }
    if (total > limits.state_cap) throw BlowupError("semantic_dfa(" + who + ")", total);
    auto decode = [&](std::uint64_t k, std::vector<std::int64_t>& v, std::vector<std::int64_t>& r) {
        v.resize(ctr.size());
        r.resize(ctr.size());
        for (std::size_t i = 0; i < ctr.size(); ++i) {
            const auto span = static_cast<std::uint64_t>((ctr[i].sat + 1) * ctr[i].mod);
            const auto x = static_cast<std::int64_t>((k / radix[i]) % span);
            v[i] = x / ctr[i].mod;
            r[i] = x % ctr[i].mod;
        }
    };
    auto encode = [&](const std::vector<std::int64_t>& v, const std::vector<std::int64_t>& r) {
        std::uint64_t k = 0;
        for (std::size_t i = 0; i < ctr.size(); ++i) k += radix[i] * static_cast<std::uint64_t>(v[i] * ctr[i].mod + r[i]);
        return k;
    };
    std::vector<Track> tracks;
    for (const auto& n : names) tracks.push_back({n, Sort::Set, false});
    return build_dfa(
        tracks, 0,
        [&](std::uint64_t k, std::uint32_t sym) {
            std::vector<std::int64_t> v, r;
            decode(k, v, r);
            for (std::size_t i = 0; i < ctr.size(); ++i)
                if (sym >> i & 1) {
                    v[i] = std::min(v[i] + 1, ctr[i].sat);
                    r[i] = (r[i] + 1) % ctr[i].mod;
                }
            return encode(v, r);
        },
        [&](std::uint64_t k) {
            std::vector<std::int64_t> v, r;
            decode(k, v, r);
            return accept(v, r);
        },
        limits);
}

std::int64_t lcm_upto(std::int64_t c) {
    std::int64_t l = 1;
    for (std::int64_t i = 2; i <= c; ++i) {
        l = std::lcm(l, i);
        if (l > (1 << 20)) throw BlowupError("semantic_dfa: modulus too large", static_cast<std::uint64_t>(l));
    }
    return l;
}

std::int64_t ipow(std::int64_t b, std::int64_t e) {
    std::int64_t r = 1;
    for (std::int64_t i = 0; i < e; ++i) r *= b;
    return r;
}

TrackDfa ddist_dfa(std::int64_t c, const Limits& limits) {
    // Tracks sorted: U, x, y, z. Key: bits 0..2 seen x/y/z, bit 3 dead, then a, b.
    const std::vector<Track> tracks{{"U", Sort::Set, false}, {"x", Sort::Element, false}, {"y", Sort::Element, false},
                                    {"z", Sort::Element, false}};
    const std::uint64_t A = static_cast<std::uint64_t>(c) + 2, Bc = 2 * static_cast<std::uint64_t>(c) + 2;
    auto pack = [&](std::uint64_t flags, std::uint64_t a, std::uint64_t b) { return flags + 16 * (a + A * b); };
    return build_dfa(
        tracks, 0,
        [&](std::uint64_t k, std::uint32_t sym) {
            std::uint64_t flags = k % 16, a = (k / 16) % A, b = (k / 16) / A;
            if (flags & 8) return k;
            for (int t = 0; t < 3; ++t)
                if (sym >> (t + 1) & 1) {
                    if (flags >> t & 1) return pack(8, 0, 0);
                    flags |= std::uint64_t{1} << t;
                }
            if (sym & 1) {
                const bool sx = flags & 1, sy = flags & 2, sz = flags & 4;
                if (sx && !sy) a = std::min(a + 1, A - 1);
                if (sy && !sz) b = std::min(b + 1, Bc - 1);
            }
            return pack(flags, a, b);
        },
        [&](std::uint64_t k) {
            const std::uint64_t flags = k % 16, a = (k / 16) % A, b = (k / 16) / A;
            return flags == 7 && a <= static_cast<std::uint64_t>(c) && b == 2 * a;
        },
        limits);
}

}  // namespace

TrackDfa semantic_dfa(const std::string& name, std::span<const std::int64_t> params, const Limits& limits) {
    const auto& info = predicate_info(name);
    if (static_cast<int>(params.size()) != info.param_count)
        throw Error("wrong parameter count for " + name);
    if (name == "ddist") return ddist_dfa(small_cap(params[0], name), limits);
    using V = const std::vector<std::int64_t>&;
    if (name == "eq") {
        const std::int64_t c = small_cap(params[0], name);
        return counter_dfa({"P1", "P2"}, {{c + 1}, {c + 1}}, [c](V v, V) { return v[0] == v[1] && v[0] <= c; }, limits, name);
    }
    if (name == "less") {
        const std::int64_t c = small_cap(params[0], name);
        return counter_dfa({"P1", "P2"}, {{c + 1}, {c + 1}}, [c](V v, V) { return v[0] < v[1] && v[1] <= c; }, limits, name);
    }
    if (name == "double") {
        const std::int64_t c = small_cap(params[0], name);
        return counter_dfa({"S1", "S2"}, {{c + 1}, {2 * c + 1}}, [c](V v, V) { return v[1] == 2 * v[0] && v[0] <= c; },
                           limits, name);
    }
    if (name == "exp") {
        const std::int64_t c = small_cap(params[0], name, 40);
        std::int64_t kmax = 0;
        for (std::int64_t k = 1; k <= c; ++k)
            if (k < 2 || ipow(2, k - 2) <= c) kmax = k;
        const std::int64_t top = ipow(2, kmax);
        return counter_dfa({"P1", "P2"}, {{c + 1}, {top + 1}},
                           [=](V v, V) { return v[0] >= 1 && v[0] <= kmax && v[1] == ipow(2, v[0]); }, limits, name);
    }
    if (name == "root" || name == "rootk") {
        const std::int64_t k = name == "root" ? 2 : params[0];
        const std::int64_t c = small_cap(params[name == "root" ? 0 : 1], name);
        if (!power_of_two(k)) throw Error("rootk exponent must be a power of two >= 2");
        std::int64_t pmax = 0;
        while (ipow(pmax + 1, k / 2) <= c) ++pmax;
        const std::int64_t top = ipow(pmax, k);
        return counter_dfa({"P1", "P2"}, {{pmax + 1}, {top + 1}},
                           [=](V v, V) { return v[0] >= 1 && v[0] <= pmax && v[1] == ipow(v[0], k); }, limits, name);
    }
    if (name == "div") {
        const std::int64_t c = small_cap(params[0], name, 64);
        const std::int64_t M = lcm_upto(c);
        return counter_dfa({"P1", "P2"}, {{c + 1}, {1, M}},
                           [c](V v, V r) {
                               if (v[1] == 0) return v[0] == 0;
                               return v[0] >= 1 && v[0] <= c && r[1] % v[0] == 0;
                           },
                           limits, name);
    }
    if (name == "mod") {
        const std::int64_t c = small_cap(params[0], name, 64);
        const std::int64_t M = lcm_upto(c);
        // Sorted tracks: P1, P2, R.
        return counter_dfa({"P1", "P2", "R"}, {{c + 1}, {2 * c, M}, {c + 1}},
                           [c, M](V v, V r) {
                               const std::int64_t q = v[0], m = v[1], rr = v[2];
                               if (!(rr < q && q <= c && m >= q + rr)) return false;
                               return ((r[1] - rr) % M + M) % M % q == 0;
                           },
                           limits, name);
    }
    throw Error("no semantic automaton for " + name + " (not cardinality-definable)");
}

TrackDfa syntactic_dfa(const std::string& name, std::span<const std::int64_t> params, CompileCache* cache,
                       const Limits& limits) {
    const auto& info = predicate_info(name);
    CompileOptions opt;
    opt.limits = limits;
    opt.cache = cache;
    opt.libs = &counting_registry();
    return compile(lib_call(name, {params.begin(), params.end()}, info.formals), opt);
}

// Verification ---------------------------------------------------------------------------

nlohmann::json to_json(const VerifyReport& r) {
    return {{"name", r.name},         {"params", r.params},
            {"max_length", r.max_length}, {"coverage", r.coverage},
            {"instances", r.instances}, {"mismatches", r.mismatches},
            {"all_lengths", r.all_lengths}, {"seconds", r.seconds}};
}

namespace {

std::string describe(const Counterexample& c) {
    std::ostringstream os;
    os << "length " << c.length << ":";
    for (const auto& [k, v] : c.tracks) {
        os << ' ' << k << '=';
        if (v.is_set()) {
            os << '{';
            bool first = true;
            for (int x : v.set.elements()) {
                os << (first ? "" : ",") << x;
                first = false;
            }
            os << '}';
        } else {
            os << v.index;
        }
    }
    return os.str();
}

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) { return a + b < a ? UINT64_MAX : a + b; }
std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) { return b && a > UINT64_MAX / b ? UINT64_MAX : a * b; }

std::uint64_t tuple_count(const PredicateInfo& info, std::size_t max_length) {
    std::uint64_t total = 0;
    for (std::size_t n = 0; n <= max_length; ++n) {
        std::uint64_t t = 1;
        for (auto s : info.sorts)
            t = sat_mul(t, s == Sort::Element ? n : (n >= 64 ? UINT64_MAX : std::uint64_t{1} << n));
        total = sat_add(total, t);
    }
    return total;
}

double since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

VerifyReport verify_lib_predicate(const std::string& name, std::span<const std::int64_t> params, std::size_t max_length) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& info = predicate_info(name);
    VerifyReport r;
    r.name = name;
    r.params = {params.begin(), params.end()};
    r.max_length = max_length;
    r.coverage = "exhaustive";
    r.instances = tuple_count(info, max_length);
    TrackDfa syn = syntactic_dfa(name, params);
    TrackDfa sem = semantic_dfa(name, params);
    auto bounded = language_equiv(syn, sem, max_length);
    if (!bounded.equal) r.mismatches.push_back(describe(*bounded.counterexample));
    r.all_lengths = language_equiv(syn, sem).equal;
    r.seconds = since(t0);
    return r;
}

Assignment eq_witness(const Structure& s, const BitSet& P1, const BitSet& P2, int d) {
    const std::size_t n = P1.count();
    if (P2.count() != n) throw Error("eq witness needs equal cardinalities");
    if (!within(BigInt(n), d + 1)) throw Error("eq witness: cardinality beyond capacity");
    std::size_t sec = 0, m = 0, r = 0;
    if (n > 0) {
        const auto c = eq_capacity(d);
        sec = (!c || BigInt(n) <= *c) ? n : static_cast<std::size_t>(*c);
        m = n / sec;
        r = n % sec;
        // Counters run 0 .. m-1 and may not reach all ones.
        if (sec < 63 && m > (std::size_t{1} << sec) - 1) {
            m -= 1;
            r += sec;
        }
    }
    Assignment a;
    const BitSet* P[2] = {&P1, &P2};
    for (int i = 0; i < 2; ++i) {
        const std::string id = std::to_string(i + 1);
        auto elems = ordered_members(s, *P[i]);
        BitSet R(s.size()), U(s.size()), Q(s.size()), B(s.size());
        for (std::size_t j = 0; j < elems.size(); ++j) {
            const auto x = static_cast<std::size_t>(elems[j]);
            if (j >= sec * m) {
                R.set(x);
                continue;
            }
            U.set(x);
            const std::size_t section = j / sec, offset = j % sec;
            if (section % 2 == 1) Q.set(x);
            const std::size_t shift = sec - 1 - offset;
            if (shift < 64 && (section >> shift & 1)) B.set(x);
        }
        a["R" + id] = Value::elements(R);
        a["U" + id] = Value::elements(U);
        a["Q" + id] = Value::elements(Q);
        a["B" + id] = Value::elements(B);
    }
    return a;
}

VerifyReport verify_eq_guarded(int d, std::size_t max_length, int random_pairs, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    VerifyReport r;
    r.name = "eq";
    r.params = {d};
    r.max_length = max_length;
    r.coverage = "guarded";
    std::mt19937_64 rng(seed);
    const LibBody body = gen_eq(d);
    CompileCache cache;
    CompileOptions copt;
    copt.cache = &cache;
    copt.libs = &counting_registry();
    EvalOptions eopt;
    eopt.libs = &counting_registry();
    auto record = [&](bool got, bool want, const std::string& what) {
        ++r.instances;
        if (got != want) r.mismatches.push_back(what + ": got " + (got ? "true" : "false"));
    };
    auto show = [](const BitSet& b) {
        std::string t;
        for (std::size_t i = 0; i < b.size(); ++i) t += b.test(i) ? '1' : '0';
        return t;
    };
    auto random_set = [&](std::size_t n, std::size_t k) {
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        BitSet b(n);
        for (std::size_t i = 0; i < k; ++i) b.set(static_cast<std::size_t>(idx[i]));
        return b;
    };
    auto decide = [&](std::size_t n, const BitSet& A, const BitSet& B) {
        Assignment a{{"P1", Value::elements(A)}, {"P2", Value::elements(B)}};
        return decide_on_word(body.body, std::string(n, '0'), a, copt);
    };
    for (int i = 0; i < random_pairs; ++i) {
        const std::size_t n = static_cast<std::size_t>(rng() % (max_length + 1));
        const std::size_t k1 = static_cast<std::size_t>(rng() % (n + 1));
        const std::size_t k2 = rng() % 2 ? k1 : static_cast<std::size_t>(rng() % (n + 1));
        BitSet A = random_set(n, k1), B = random_set(n, k2);
        Structure s = build_structure(StructureDescriptor::word(std::string(n, '0')));
        const Value va = Value::elements(A), vb = Value::elements(B);
        const Value* args[] = {&va, &vb};
        const std::int64_t p[] = {d};
        record(decide(n, A, B), contract(s, "eq", p, args), "random " + show(A) + " " + show(B));
    }
    // One equal pair per (length, size), with a constructed witness for the matrix.
    const FormulaPtr matrix = d >= 1 ? eq_matrix(d) : nullptr;
    for (std::size_t n = 0; n <= max_length; ++n) {
        Structure s = build_structure(StructureDescriptor::word(std::string(n, '0')));
        for (std::size_t k = 0; k <= n; ++k) {
            BitSet A = random_set(n, k), B = random_set(n, k);
            const std::string tag = "equal " + show(A) + " " + show(B);
            const Value va = Value::elements(A), vb = Value::elements(B);
            const Value* args[] = {&va, &vb};
            const std::int64_t p[] = {d};
            const bool want = contract(s, "eq", p, args);
            if (matrix && k > 0 && want) {
                // A satisfied matrix under the constructed witness proves the formula true.
                Assignment a = eq_witness(s, A, B, d - 1);
                a["P1"] = va;
                a["P2"] = vb;
                record(evaluate(s, matrix, a, eopt).outcome == Outcome::True, want, tag + " witness");
            } else {
                Assignment a{{"P1", va}, {"P2", vb}};
                const auto res = evaluate(s, body.body, a, eopt);
                if (res.outcome == Outcome::BudgetExceeded) r.coverage = "partial";
                record(res.outcome == Outcome::True, want, tag);
            }
        }
    }
    r.seconds = since(t0);
    return r;
}

// Growth ---------------------------------------------------------------------------------

GrowthReport eq_growth(int max_depth) {
    const LibRegistry& reg = counting_registry();
    GrowthReport g;
    for (int d = 0; d <= max_depth; ++d) {
        GrowthRow row;
        row.depth = d;
        row.size = formula_metrics(*lib_call("eq", {d}, {"P1", "P2"}), &reg, true).size;
        if (d > 0) {
            // Count eq(d-1) occurrences reachable from eq(d) without entering eq(d-1).
            std::map<std::pair<std::string, std::vector<std::int64_t>>, std::uint64_t> memo;
            std::function<std::uint64_t(const Formula&)> calls = [&](const Formula& f) -> std::uint64_t {
                if (f.kind == Kind::Lib) {
                    if (f.lib == "eq" && f.params == std::vector<std::int64_t>{d - 1}) return 1;
                    auto key = std::make_pair(f.lib, f.params);
                    auto it = memo.find(key);
                    if (it != memo.end()) return it->second;
                    const std::uint64_t v = calls(*reg.body(f.lib, f.params).body);
                    memo[key] = v;
                    return v;
                }
                std::uint64_t t = 0;
                for (const auto& k : f.kids) t += calls(*k);
                return t;
            };
            row.eq_calls = calls(*reg.body("eq", std::vector<std::int64_t>{d}).body);
        }
        g.rows.push_back(row);
    }
    for (std::size_t i = 1; i < g.rows.size(); ++i) g.ratios.push_back(g.rows[i].size / g.rows[i - 1].size);
    return g;
}

nlohmann::json to_json(const GrowthReport& g) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : g.rows) rows.push_back({{"depth", r.depth}, {"size", r.size}, {"eq_calls", r.eq_calls}});
    return {{"rows", rows}, {"ratios", g.ratios}};
}

}  // namespace msow
