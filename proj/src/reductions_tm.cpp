#include <algorithm>
#include <regex>
#include <set>

#include "msow/counting.hpp"
#include "reductions_internal.hpp"

namespace msow {

using namespace detail;

// Machines -------------------------------------------------------------------------

namespace {

const char* move_name(Move m) { return m == Move::L ? "L" : m == Move::R ? "R" : "S"; }

Move parse_move(const std::string& s) {
    if (s == "L") return Move::L;
    if (s == "R") return Move::R;
    if (s == "S") return Move::S;
    throw Error("move must be L, S or R: " + s);
}

bool power_of_two(std::int64_t k) { return k >= 1 && (k & (k - 1)) == 0; }

}  // namespace

const TmSpec::Rule& TmSpec::rule(const std::string& q, int bit) const {
    for (const auto& r : delta)
        if (r.state == q && r.read == bit) return r;
    throw Error("no transition for (" + q + ", " + std::to_string(bit) + ")");
}

TmSpec tm_from_json(const nlohmann::json& j) {
    TmSpec m;
    m.states = j.at("states").get<std::vector<std::string>>();
    m.accept = j.at("accept").get<std::string>();
    m.k = j.value("k", 1);
    for (const auto& r : j.at("delta")) {
        if (!r.is_array() || r.size() != 5) throw Error("delta entries are [state, read, next, write, move]");
        m.delta.push_back({r[0].get<std::string>(), r[1].get<int>(), r[2].get<std::string>(), r[3].get<int>(),
                           parse_move(r[4].get<std::string>())});
    }
    check_tm(m);
    return m;
}

nlohmann::json to_json(const TmSpec& m) {
    nlohmann::json d = nlohmann::json::array();
    for (const auto& r : m.delta) d.push_back({r.state, r.read, r.next, r.write, move_name(r.move)});
    return {{"states", m.states}, {"accept", m.accept}, {"k", m.k}, {"delta", d}};
}

void check_tm(const TmSpec& m) {
    static const std::regex ident("[A-Za-z][A-Za-z0-9_]*");
    if (m.states.empty()) throw Error("machine needs at least one state");
    std::set<std::string> qs;
    for (const auto& q : m.states) {
        if (!std::regex_match(q, ident)) throw Error("state names must be identifiers: " + q);
        if (!qs.insert(q).second) throw Error("duplicate state " + q);
    }
    if (!qs.count(m.accept)) throw Error("accept state not listed");
    if (!power_of_two(m.k)) throw Error("k must be a power of two");
    std::set<std::pair<std::string, int>> seen;
    for (const auto& r : m.delta) {
        if (!qs.count(r.state) || !qs.count(r.next)) throw Error("transition mentions an unknown state");
        if ((r.read != 0 && r.read != 1) || (r.write != 0 && r.write != 1)) throw Error("tape alphabet is {0,1}");
        if (!seen.insert({r.state, r.read}).second) throw Error("duplicate transition for " + r.state);
    }
    for (const auto& q : m.states)
        for (int b = 0; b < 2; ++b)
            if (!seen.count({q, b})) throw Error("delta is not total at (" + q + ", " + std::to_string(b) + ")");
    for (int b = 0; b < 2; ++b) {
        const auto& r = m.rule(m.accept, b);
        if (r.next != m.accept || r.write != b || r.move != Move::S) throw Error("accept state must be absorbing");
    }
}

TmSpec machine_always_accept() {
    return {{"q0", "qacc"},
            "qacc",
            1,
            {{"q0", 0, "qacc", 0, Move::S}, {"q0", 1, "qacc", 1, Move::S}, {"qacc", 0, "qacc", 0, Move::S},
             {"qacc", 1, "qacc", 1, Move::S}}};
}

TmSpec machine_always_reject() {
    return {{"q0", "qacc"},
            "qacc",
            1,
            {{"q0", 0, "q0", 0, Move::S}, {"q0", 1, "q0", 1, Move::S}, {"qacc", 0, "qacc", 0, Move::S},
             {"qacc", 1, "qacc", 1, Move::S}}};
}

TmSpec machine_input_parity() {
    return {{"q0", "qacc", "qrej"},
            "qacc",
            1,
            {{"q0", 0, "qrej", 0, Move::S}, {"q0", 1, "qacc", 1, Move::S}, {"qacc", 0, "qacc", 0, Move::S},
             {"qacc", 1, "qacc", 1, Move::S}, {"qrej", 0, "qrej", 0, Move::S}, {"qrej", 1, "qrej", 1, Move::S}}};
}

// Simulation ------------------------------------------------------------------------

namespace {

std::uint64_t input_value(const std::string& input) {
    if (input.empty() || input.size() > 62) throw Error("input must have 1..62 bits");
    std::uint64_t I = 0;
    for (char c : input) {
        if (c != '0' && c != '1') throw Error("input bits must be 0 or 1");
        I = I * 2 + static_cast<std::uint64_t>(c - '0');
    }
    return I;
}

int log2_exact(std::int64_t T) {
    if (!power_of_two(T)) throw Error("T must be a power of two");
    return std::countr_zero(static_cast<std::uint64_t>(T));
}

std::int64_t ipow(std::int64_t b, int e) {
    std::int64_t r = 1;
    for (int i = 0; i < e; ++i) {
        if (r > (std::int64_t{1} << 40) / std::max<std::int64_t>(b, 1)) return std::int64_t{1} << 41;
        r *= b;
    }
    return r;
}

// One deterministic step; nullopt when the head would leave the tape.
std::optional<TmConfig> step(const TmSpec& m, const TmConfig& c) {
    const auto& r = m.rule(c.state, c.tape[static_cast<std::size_t>(c.head)]);
    TmConfig n = c;
    n.tape[static_cast<std::size_t>(c.head)] = r.write;
    n.state = r.next;
    n.head += r.move == Move::L ? -1 : r.move == Move::R ? 1 : 0;
    if (n.head < 0 || n.head >= static_cast<int>(c.tape.size())) return std::nullopt;
    return n;
}

}  // namespace

int tm_input_cells(int T, int k) {
    const int lg = log2_exact(T);
    for (int m = 1; m <= lg; ++m)
        if (ipow(m, k) == lg) return m;
    throw Error("log2 T = " + std::to_string(lg) + " is not a k-th power");
}

TmRun simulate_ntm(const TmSpec& m, const std::string& input, int T, int input_cells) {
    check_tm(m);
    const std::uint64_t I = input_value(input);
    log2_exact(T);
    if (input_cells < 0) input_cells = static_cast<int>(input.size());
    if (input_cells < static_cast<int>(input.size()) || input_cells > T) throw Error("input does not fit the tape");
    const int free_cells = T - input_cells;
    if (free_cells > 24) throw Error("guess space too large to simulate");
    for (std::uint64_t g = 0; g < (std::uint64_t{1} << free_cells); ++g) {
        TmConfig c;
        c.tape.assign(static_cast<std::size_t>(T), 0);
        for (int i = 0; i < input_cells; ++i) c.tape[static_cast<std::size_t>(i)] = static_cast<int>(i < 62 && (I >> i & 1));
        for (int i = 0; i < free_cells; ++i) c.tape[static_cast<std::size_t>(input_cells + i)] = static_cast<int>(g >> i & 1);
        c.state = m.states[0];
        TmRun run;
        run.guess = c.tape;
        run.configs.push_back(c);
        bool fell = false;
        for (int t = 1; t < T; ++t) {
            auto n = step(m, run.configs.back());
            if (!n) {
                fell = true;
                break;
            }
            run.configs.push_back(*n);
        }
        if (!fell && run.configs.back().state == m.accept) {
            run.accepted = true;
            return run;
        }
    }
    return {};
}

// Reduction --------------------------------------------------------------------------

namespace {

struct TmLayout {
    TmSpec m;
    std::string input;
    std::uint64_t I = 0;
    int T = 0;
    int m_cells = 0;
    int depth = 0;
    BigInt L;
};

TmLayout read_layout(const ReductionArtifact& a) {
    TmLayout l;
    l.m = tm_from_json(a.layout.at("machine"));
    l.input = a.layout.at("input").get<std::string>();
    l.I = input_value(l.input);
    l.T = a.layout.at("T").get<int>();
    l.m_cells = a.layout.at("input_cells").get<int>();
    l.depth = a.layout.at("depth").get<int>();
    l.L = BigInt(a.layout.at("length").get<std::string>());
    return l;
}

int depth_for(const BigInt& L) {
    for (int d = 0; d < 3; ++d)
        if (*eq_capacity(d) >= L) return d;
    return 3;
}

std::string H(const std::string& q) { return "H_" + q; }

// Builds the matrix; names are unique per use site to keep binders apart.
struct TmFormula {
    const TmLayout& l;
    std::int64_t d;
    int fresh = 0;

    std::string nv(const std::string& base) { return base + std::to_string(++fresh); }
    F L2(const std::string& name, const std::string& a, const std::string& b) { return Lib(name, {d}, {a, b}); }

    F def(const std::string& X, const std::string& z, F psi) { return forall1(z, Iff(in(z, X), std::move(psi))); }
    F prefix(const std::string& X) {
        const std::string a = nv("a"), b = nv("b");
        return forall1(b, forall1(a, Imp(And({in(b, X), prec(a, b)}), in(a, X))));
    }
    F empty(const std::string& X) { return is_empty(X, nv("z")); }
    F singleton(const std::string& X) {
        const std::string e = nv("e"), z = nv("z");
        return exists1(e, And({in(e, X), forall1(z, Imp(in(z, X), eq(z, e)))}));
    }
    // P = {z < x}, body.
    F with_before(const std::string& x, const std::function<F(const std::string&)>& body) {
        const std::string P = nv("P"), z = nv("z");
        return exists_set(P, And({def(P, z, prec(z, x)), body(P)}));
    }
    F sstart(const std::string& x) {
        return And({in(x, "Sq"), with_before(x, [&](const std::string& P) { return Or({empty(P), L2("div", "Tq", P)}); })});
    }
    // |[x, y)| satisfies rel against Tq.
    F interval(const std::string& x, const std::string& y, const std::string& rel) {
        const std::string P = nv("P"), z = nv("z");
        return exists_set(P, And({def(P, z, And({leq(x, z), prec(z, y)})), L2(rel, P, "Tq")}));
    }
    F insec(const std::string& x, const std::string& y) { return And({leq(x, y), interval(x, y, "less")}); }
    F head(const std::string& y) {
        std::vector<F> h;
        for (const auto& q : l.m.states) h.push_back(in(y, H(q)));
        return Or(h);
    }
    F succ(const std::string& x, const std::string& s) {
        const std::string u = nv("u");
        return And({prec(x, s), Not(exists1(u, And({prec(x, u), prec(u, s)})))});
    }

    F build() {
        std::vector<F> c;
        const std::string x = "x", y = "y";
        c.push_back(forall1("x", in("x", "A")));
        c.push_back(L2("div", "D", "A"));
        c.push_back(exists1("t1", exists1("t2", And({prec("t1", "t2"), exists_set("Two", And({def("Two", "z", Or({eq("z", "t1"), eq("z", "t2")})),
                                                                                            Not(L2("div", "Two", "D"))}))}))));
        c.push_back(def("Dm", "z", And({in("z", "D"), exists1("w", And({in("w", "D"), prec("w", "z")}))})));
        c.push_back(L2("double", "Iset", "Dm"));
        c.push_back(forall1("x", Iff(in("x", "M"), with_before("x", [&](const std::string& P) {
                                         return Or({empty(P), L2("div", "D", P)});
                                     }))));
        c.push_back(L2("eq", "M", "Sq"));
        c.push_back(prefix("Sq"));
        c.push_back(L2("exp", "E", "Sq"));
        c.push_back(L2("root", "Tq", "Sq"));
        c.push_back(prefix("F"));
        c.push_back(L2("eq", "F", "Tq"));
        c.push_back(prefix("Pk"));
        c.push_back(L2("exp", "Pk", "F"));
        c.push_back(prefix("Pn"));
        c.push_back(l.m.k == 1 ? L2("eq", "Pn", "Pk") : Lib("rootk", {l.m.k, d}, {"Pn", "Pk"}));
        c.push_back(subset_of("B", "Sq", nv("z")));
        for (const auto& q : l.m.states) c.push_back(subset_of(H(q), "Sq", nv("z")));
        for (std::size_t i = 0; i < l.m.states.size(); ++i)
            for (std::size_t j = i + 1; j < l.m.states.size(); ++j) c.push_back(disjoint(H(l.m.states[i]), H(l.m.states[j]), nv("z")));

        // One head per section.
        c.push_back(forall1(x, Imp(sstart(x), exists1(y, And({head(y), insec(x, y)})))));
        c.push_back(forall1("y1", forall1("y2", Imp(And({head("y1"), head("y2"), Not(eq("y1", "y2"))}),
                                                   Not(exists1(x, And({sstart(x), insec(x, "y1"), insec(x, "y2")})))))));
        // Initial head.
        c.push_back(forall1(x, Imp(Not(exists1("p", prec("p", x))), in(x, H(l.m.states[0])))));

        // Cells T apart in consecutive snapshots.
        {
            std::vector<F> rules;
            std::vector<F> none;
            for (const auto& q : l.m.states) none.push_back(Not(in(x, H(q))));
            rules.push_back(Imp(And(none), Iff(in(x, "B"), in(y, "B"))));
            for (const auto& r : l.m.delta) {
                F read = r.read ? in(x, "B") : Not(in(x, "B"));
                F write = r.write ? in(y, "B") : Not(in(y, "B"));
                F mv;
                if (r.move == Move::S) {
                    mv = in(y, H(r.next));
                } else if (r.move == Move::R) {
                    const std::string s = nv("s"), s2 = nv("s");
                    mv = And({exists1(s, And({succ(y, s), in(s, H(r.next))})), exists1(s2, And({succ(x, s2), Not(sstart(s2))}))});
                } else {
                    const std::string p = nv("p");
                    mv = And({Not(sstart(x)), exists1(p, And({succ(p, y), in(p, H(r.next))}))});
                }
                rules.push_back(Imp(And({in(x, H(r.state)), read}), And({write, mv})));
            }
            c.push_back(forall1(x, forall1(y, Imp(And({in(y, "Sq"), prec(x, y), interval(x, y, "eq")}), And(rules)))));
        }

        // Input bits: cell i holds bit i of |Iset|.
        {
            const std::string P = "Pi", z = "zi";
            F pow_e1 = Or({And({empty(P), singleton("E1")}), L2("exp", P, "E1")});
            F bit = exists1("e1", exists_set("E1", And({def("E1", "z1", leq("z1", "e1")), pow_e1,
                exists_set("Px", And({def("Px", "z2", Or({in("z2", P), eq("z2", x)})),
                exists1("e2", exists_set("E2", And({def("E2", "z3", leq("z3", "e2")), L2("exp", "Px", "E2"),
                exists1("r", exists_set("R", And({def("R", "z4", prec("z4", "r")),
                                                  Or({Lib("mod", {d}, {"E2", "Iset", "R"}), And({L2("less", "Iset", "E2"), L2("eq", "R", "Iset")})}),
                                                  Iff(in(x, "B"), Not(L2("less", "R", "E1")))})))})))}))})));
            c.push_back(forall1(x, Imp(in(x, "Pn"), exists_set(P, And({def(P, z, And({in(z, "Pn"), prec(z, x)})), bit})))));
        }

        // Acceptance.
        c.push_back(exists1(x, in(x, H(l.m.accept))));
        return And(c);
    }
};

std::vector<std::string> top_sets(const TmSpec& m) {
    std::vector<std::string> v{"A", "D", "Dm", "M", "Sq", "E", "Tq", "F", "Pk", "Pn", "Iset", "B"};
    for (const auto& q : m.states) v.push_back(H(q));
    return v;
}

}  // namespace

ReductionArtifact tm_to_unary(const TmSpec& m, const std::string& input, std::optional<int> T) {
    check_tm(m);
    const std::uint64_t I = input_value(input);
    const int n = static_cast<int>(input.size());
    int t;
    if (T) {
        t = *T;
        const int cells = tm_input_cells(t, m.k);
        if (cells < n) throw Error("T too small: log2 T must be m^k with m >= input length");
    } else {
        const std::int64_t e = ipow(n, m.k);
        if (e > 30) throw Error("faithful T = 2^" + std::to_string(e) + " is too large; supply a scaled T");
        t = 1 << e;
    }
    TmLayout l;
    l.m = m;
    l.input = input;
    l.I = I;
    l.T = t;
    l.m_cells = tm_input_cells(t, m.k);
    l.L = BigInt(2 * I + 1) * BigInt(t) * BigInt(t);
    l.depth = depth_for(l.L);

    TmFormula tf{l, l.depth};
    F f = tf.build();
    const auto sets = top_sets(m);
    for (auto it = sets.rbegin(); it != sets.rend(); ++it) f = exists_set(*it, f);

    ReductionArtifact a;
    a.kind = "tm2unary";
    a.structure = StructureDescriptor::unary(l.L);
    a.formula = f;
    a.layout = {{"machine", to_json(m)},
                {"input", input},
                {"I", I},
                {"n", n},
                {"T", t},
                {"mode", T ? "scaled" : "faithful"},
                {"input_cells", l.m_cells},
                {"length", l.L.str()},
                {"odd_divisor", 2 * I + 1},
                {"depth", l.depth},
                {"sets", sets}};
    return a;
}

FormulaPtr tm_matrix(const ReductionArtifact& a) {
    TmLayout l = read_layout(a);
    TmFormula tf{l, l.depth};
    return tf.build();
}

// Witnesses ------------------------------------------------------------------------------

namespace {

int materialize(const TmLayout& l) {
    if (l.L > kDefaultMaterializeLimit) throw Error("length " + l.L.str() + " is not materializable");
    return static_cast<int>(l.L);
}

BitSet prefix_set(int L, std::int64_t k) {
    BitSet s(static_cast<std::size_t>(L));
    for (std::int64_t i = 0; i < k; ++i) s.set(static_cast<std::size_t>(i));
    return s;
}

struct Snapshot {
    std::vector<int> tape;
    std::vector<std::pair<int, std::string>> heads;  // (cell, state)
};

// Local conditions shared by the verifier and the search.
std::string check_first(const TmLayout& l, const Snapshot& s) {
    if (s.heads.size() != 1) return "snapshot 0 needs exactly one head";
    if (s.heads[0].first != 0 || s.heads[0].second != l.m.states[0]) return "initial head must be at cell 0 in " + l.m.states[0];
    for (int i = 0; i < l.m_cells; ++i) {
        const int want = i < 62 ? static_cast<int>(l.I >> i & 1) : 0;
        if (s.tape[static_cast<std::size_t>(i)] != want) return "input bit " + std::to_string(i) + " does not match";
    }
    return {};
}

std::string check_step(const TmLayout& l, const Snapshot& a, const Snapshot& b, int t) {
    if (b.heads.size() != 1) return "snapshot " + std::to_string(t + 1) + " needs exactly one head";
    const auto& [h, q] = a.heads.at(0);
    const auto& r = l.m.rule(q, a.tape[static_cast<std::size_t>(h)]);
    for (int c = 0; c < l.T; ++c)
        if (c != h && a.tape[static_cast<std::size_t>(c)] != b.tape[static_cast<std::size_t>(c)])
            return "cell " + std::to_string(c) + " changed away from the head at step " + std::to_string(t);
    if (b.tape[static_cast<std::size_t>(h)] != r.write) return "wrong symbol written at step " + std::to_string(t);
    const int nh = h + (r.move == Move::L ? -1 : r.move == Move::R ? 1 : 0);
    if (nh < 0 || nh >= l.T) return "head leaves the tape at step " + std::to_string(t);
    if (b.heads[0].first != nh || b.heads[0].second != r.next) return "head or state wrong after step " + std::to_string(t);
    return {};
}

Assignment assemble(const TmLayout& l, const std::vector<Snapshot>& snaps) {
    const int L = materialize(l);
    const std::int64_t T = l.T, D = static_cast<std::int64_t>(2 * l.I + 1);
    Assignment w;
    w["A"] = Value::elements(BitSet::full(static_cast<std::size_t>(L)));
    w["D"] = Value::elements(prefix_set(L, D));
    BitSet dm = prefix_set(L, D);
    dm.set(0, false);
    w["Dm"] = Value::elements(dm);
    BitSet mset(static_cast<std::size_t>(L));
    for (std::int64_t i = 0; i < L; i += D) mset.set(static_cast<std::size_t>(i));
    w["M"] = Value::elements(mset);
    w["Sq"] = Value::elements(prefix_set(L, T * T));
    w["E"] = Value::elements(prefix_set(L, 2 * log2_exact(T)));
    w["Tq"] = Value::elements(prefix_set(L, T));
    w["F"] = Value::elements(prefix_set(L, T));
    w["Pk"] = Value::elements(prefix_set(L, log2_exact(T)));
    w["Pn"] = Value::elements(prefix_set(L, l.m_cells));
    w["Iset"] = Value::elements(prefix_set(L, static_cast<std::int64_t>(l.I)));
    BitSet B(static_cast<std::size_t>(L));
    std::map<std::string, BitSet> hs;
    for (const auto& q : l.m.states) hs.emplace(q, BitSet(static_cast<std::size_t>(L)));
    for (std::size_t t = 0; t < snaps.size(); ++t) {
        for (int c = 0; c < l.T; ++c)
            if (snaps[t].tape[static_cast<std::size_t>(c)]) B.set(t * static_cast<std::size_t>(T) + static_cast<std::size_t>(c));
        for (const auto& [c, q] : snaps[t].heads) hs.at(q).set(t * static_cast<std::size_t>(T) + static_cast<std::size_t>(c));
    }
    w["B"] = Value::elements(B);
    for (auto& [q, s] : hs) w[H(q)] = Value::elements(std::move(s));
    return w;
}

const BitSet& get_set(const Assignment& w, const std::string& name, int L) {
    auto it = w.find(name);
    if (it == w.end() || it->second.sort != Sort::Set) throw Error("witness lacks set " + name);
    if (static_cast<int>(it->second.set.size()) != L) throw Error("witness set " + name + " has the wrong universe");
    return it->second.set;
}

bool is_prefix(const BitSet& s) {
    const auto c = s.count();
    for (std::size_t i = 0; i < c; ++i)
        if (!s.test(i)) return false;
    return true;
}

}  // namespace

Assignment build_tm_witness(const ReductionArtifact& a, const TmRun& run) {
    TmLayout l = read_layout(a);
    if (!run.accepted) throw Error("run does not accept");
    if (static_cast<int>(run.configs.size()) != l.T) throw Error("run needs exactly T configurations");
    std::vector<Snapshot> snaps;
    for (const auto& c : run.configs) {
        if (static_cast<int>(c.tape.size()) != l.T) throw Error("configuration tape must have T cells");
        snaps.push_back({c.tape, {{c.head, c.state}}});
    }
    if (auto e = check_first(l, snaps[0]); !e.empty()) throw Error("run inconsistent: " + e);
    for (std::size_t t = 0; t + 1 < snaps.size(); ++t)
        if (auto e = check_step(l, snaps[t], snaps[t + 1], static_cast<int>(t)); !e.empty()) throw Error("run inconsistent: " + e);
    if (snaps.back().heads[0].second != l.m.accept) throw Error("run inconsistent: final state is not accepting");
    return assemble(l, snaps);
}

TmCheck semantic_verify_tm(const ReductionArtifact& a, const Assignment& w) {
    TmLayout l = read_layout(a);
    const int L = materialize(l);
    auto fail = [](std::string why) { return TmCheck{false, std::move(why)}; };
    try {
        auto card = [&](const std::string& n) { return static_cast<std::int64_t>(get_set(w, n, L).count()); };
        if (card("A") != L) return fail("A is not the universe");
        const std::int64_t D = card("D");
        if (D == 0 || L % D != 0 || D % 2 == 0) return fail("|D| is not an odd divisor of the length");
        {
            BitSet dm = get_set(w, "D", L);
            const auto el = dm.elements();
            dm.set(static_cast<std::size_t>(el.front()), false);
            if (!(dm == get_set(w, "Dm", L))) return fail("Dm is not D without its minimum");
        }
        if (2 * card("Iset") != D - 1) return fail("2|Iset| != |D| - 1");
        for (int i = 0; i < L; ++i)
            if (get_set(w, "M", L).test(static_cast<std::size_t>(i)) != (i % D == 0)) return fail("M does not mark multiples of |D|");
        const std::int64_t sq = card("Sq");
        if (sq != card("M") || !power_of_two(sq) || !is_prefix(get_set(w, "Sq", L))) return fail("Sq is not a power-of-two prefix of size |M|");
        if (std::int64_t{1} << std::min<std::int64_t>(card("E"), 62) != sq) return fail("|Sq| != 2^|E|");
        const std::int64_t T = card("Tq");
        if (T * T != sq || T != l.T) return fail("|Tq|^2 != |Sq|");
        if (!is_prefix(get_set(w, "F", L)) || card("F") != T) return fail("F is not the first snapshot");
        if (!is_prefix(get_set(w, "Pk", L)) || (std::int64_t{1} << card("Pk")) != T) return fail("2^|Pk| != T");
        if (!is_prefix(get_set(w, "Pn", L)) || ipow(card("Pn"), l.m.k) != card("Pk")) return fail("|Pn|^k != |Pk|");
        if (card("Iset") != static_cast<std::int64_t>(l.I) || card("Pn") != l.m_cells) return fail("layout sets disagree with the artifact");

        const BitSet& B = get_set(w, "B", L);
        const BitSet& Sq = get_set(w, "Sq", L);
        if (!B.is_subset_of(Sq)) return fail("B leaves the snapshots");
        std::vector<Snapshot> snaps(static_cast<std::size_t>(T));
        std::vector<int> owner(static_cast<std::size_t>(L), -1);
        for (std::size_t qi = 0; qi < l.m.states.size(); ++qi) {
            const BitSet& h = get_set(w, H(l.m.states[qi]), L);
            if (!h.is_subset_of(Sq)) return fail("head set leaves the snapshots");
            for (int x : h.elements()) {
                if (owner[static_cast<std::size_t>(x)] >= 0) return fail("head sets overlap");
                owner[static_cast<std::size_t>(x)] = static_cast<int>(qi);
                snaps[static_cast<std::size_t>(x / T)].heads.push_back({static_cast<int>(x % T), l.m.states[qi]});
            }
        }
        for (std::int64_t t = 0; t < T; ++t) {
            auto& s = snaps[static_cast<std::size_t>(t)];
            for (std::int64_t c = 0; c < T; ++c) s.tape.push_back(B.test(static_cast<std::size_t>(t * T + c)) ? 1 : 0);
            std::sort(s.heads.begin(), s.heads.end());
            if (s.heads.size() != 1) return fail("snapshot " + std::to_string(t) + " has " + std::to_string(s.heads.size()) + " heads");
        }
        if (auto e = check_first(l, snaps[0]); !e.empty()) return fail(e);
        for (std::size_t t = 0; t + 1 < snaps.size(); ++t)
            if (auto e = check_step(l, snaps[t], snaps[t + 1], static_cast<int>(t)); !e.empty()) return fail(e);
        if (get_set(w, H(l.m.accept), L).empty()) return fail("accept state never reached");
    } catch (const Error& e) {
        return fail(e.what());
    }
    return {true, {}};
}

EvalResult evaluate_tm_matrix(const ReductionArtifact& a, const Assignment& w, const Budget& budget) {
    TmLayout l = read_layout(a);
    materialize(l);
    Structure s = build_structure(a.structure);
    EvalOptions opt;
    opt.budget = budget;
    opt.libs = &reduction_registry();
    opt.oracles = &counting_oracles();
    return evaluate(s, tm_matrix(a), w, opt);
}

TmSearch structured_tm_search(const ReductionArtifact& a) {
    TmLayout l = read_layout(a);
    materialize(l);
    if (l.T > 16) throw Error("structured search is limited to T <= 16");
    TmSearch out;
    std::vector<Snapshot> cands;
    for (std::uint32_t tape = 0; tape < (1u << l.T); ++tape)
        for (int h = 0; h < l.T; ++h)
            for (const auto& q : l.m.states) {
                Snapshot s;
                for (int c = 0; c < l.T; ++c) s.tape.push_back(static_cast<int>(tape >> c & 1));
                s.heads.push_back({h, q});
                cands.push_back(std::move(s));
            }
    std::vector<Snapshot> path;
    std::function<bool()> dfs = [&]() -> bool {
        const int t = static_cast<int>(path.size());
        if (t == l.T) {
            bool acc = false;
            for (const auto& s : path) acc = acc || s.heads[0].second == l.m.accept;
            if (!acc) return false;
            Assignment w = assemble(l, path);
            if (!semantic_verify_tm(a, w).ok) return false;
            out.witness = std::move(w);
            return true;
        }
        for (const auto& c : cands) {
            ++out.candidates;
            const std::string e = t == 0 ? check_first(l, c) : check_step(l, path.back(), c, t - 1);
            if (!e.empty()) continue;
            path.push_back(c);
            if (dfs()) return true;
            path.pop_back();
        }
        return false;
    };
    dfs();
    return out;
}

}  // namespace msow
