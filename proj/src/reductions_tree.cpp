#include <algorithm>
#include <bit>
#include <random>
#include <sstream>

#include "reductions_internal.hpp"

namespace msow {

using namespace detail;

namespace {

std::string base_color(std::int64_t j) { return std::to_string(j); }
std::string lit_color(std::int64_t p, std::int64_t q) {
    return "c_{" + std::to_string(p) + "," + std::to_string(q) + "}";
}
// Height-1 scheme: bit j of the variable in position p with sign q.
std::string lit_bit_color(std::int64_t p, std::int64_t q, std::int64_t j) { return lit_color(p, q) + "_" + std::to_string(j); }

F child_of(const std::string& u, const std::string& x) { return atom(Pred::Child, {u, x}); }

F samecols(const std::string& x, const std::string& y, std::int64_t b) {
    std::vector<F> parts;
    for (std::int64_t j = 0; j < b; ++j) parts.push_back(Iff(color_atom(base_color(j), x), color_atom(base_color(j), y)));
    return And(parts);
}

// 2^x saturated at 2^62.
std::uint64_t pow2_sat(std::uint64_t x) { return x >= 62 ? (std::uint64_t{1} << 62) : (std::uint64_t{1} << x); }

std::uint64_t tower(int h, int b) {
    std::uint64_t t = pow2_sat(static_cast<std::uint64_t>(b));
    for (int i = 1; i < h; ++i) t = pow2_sat(t);
    return t;
}

int number_height(std::uint64_t i, int b) {
    if (i < pow2_sat(static_cast<std::uint64_t>(b))) return 0;
    int h = 0;
    for (int j = 0; j < 64; ++j)
        if (i >> j & 1) h = std::max(h, number_height(static_cast<std::uint64_t>(j), b));
    return h + 1;
}

}  // namespace

namespace detail {

LibBody treeeq_body(std::int64_t k, std::int64_t b) {
    if (k < 0 || b < 1) throw Error("treeeq needs k >= 0 and b >= 1");
    F body;
    if (k == 0) {
        body = And({samecols("x", "y", b), forall1("z", And({Not(child_of("z", "x")), Not(child_of("z", "y"))}))});
    } else {
        body = And({samecols("x", "y", b),
                    forall1("u", Imp(Or({child_of("u", "x"), child_of("u", "y")}),
                                     exists1("v", And({Lib("treeeq", {k - 1, b}, {"u", "v"}),
                                                       Imp(child_of("u", "x"), child_of("v", "y")),
                                                       Imp(child_of("u", "y"), child_of("v", "x"))}))))});
    }
    return {{"x", "y"}, {Sort::Element, Sort::Element}, body};
}

// Variable x occurs in position i of clause y with sign q.
LibBody lit_body(std::int64_t i, std::int64_t q, std::int64_t h, std::int64_t b) {
    if (i < 1 || i > 3 || (q != 0 && q != 1) || h < 1 || b < 1) throw Error("lit parameters out of range");
    F body;
    if (h == 1) {
        std::vector<F> parts;
        for (std::int64_t j = 0; j < b; ++j)
            parts.push_back(Iff(color_atom(base_color(j), "x"), color_atom(lit_bit_color(i, q, j), "y")));
        body = And(parts);
    } else {
        const std::string c = lit_color(i, q);
        body = forall1("u", Imp(Or({child_of("u", "x"), And({child_of("u", "y"), color_atom(c, "u")})}),
                                exists1("v", And({Lib("treeeq", {h - 2, b}, {"u", "v"}),
                                                  Imp(child_of("u", "x"), And({child_of("v", "y"), color_atom(c, "v")})),
                                                  Imp(child_of("u", "y"), child_of("v", "x"))}))));
    }
    return {{"x", "y"}, {Sort::Element, Sort::Element}, body};
}

}  // namespace detail

// CNF ------------------------------------------------------------------------------

CnfInstance parse_dimacs(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    int vars = -1;
    CnfInstance c;
    std::vector<int> pending;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok) || tok == "c" || tok[0] == 'c' || tok == "%") continue;
        if (tok == "p") {
            std::string fmt;
            int m = 0;
            if (!(ls >> fmt >> vars >> m) || fmt != "cnf" || vars < 1) throw Error("bad DIMACS header");
            continue;
        }
        if (vars < 0) throw Error("DIMACS clause before header");
        ls.clear();
        ls.str(line);
        int lit = 0;
        while (ls >> lit) {
            if (lit == 0) {
                if (pending.size() != 3) throw Error("every clause needs exactly three literals");
                std::array<Literal, 3> cl;
                for (int i = 0; i < 3; ++i) {
                    const int v = std::abs(pending[static_cast<std::size_t>(i)]);
                    if (v > vars) throw Error("literal out of range: " + std::to_string(pending[static_cast<std::size_t>(i)]));
                    cl[static_cast<std::size_t>(i)] = {vars + v - 1, pending[static_cast<std::size_t>(i)] > 0};
                }
                c.clauses.push_back(cl);
                pending.clear();
            } else {
                pending.push_back(lit);
            }
        }
    }
    if (vars < 0) throw Error("missing DIMACS header");
    if (!pending.empty()) throw Error("unterminated clause");
    c.n = vars;
    return c;
}

void check_cnf(const CnfInstance& c) {
    if (c.n < 1) throw Error("CNF needs at least one variable");
    for (const auto& cl : c.clauses)
        for (const auto& l : cl)
            if (l.var < c.n || l.var >= 2 * c.n) throw Error("literal variable " + std::to_string(l.var) + " outside [n, 2n)");
}

bool brute_force_sat(const CnfInstance& c) {
    check_cnf(c);
    if (c.n > 24) throw Error("brute force limited to 24 variables");
    for (std::uint32_t m = 0; m < (1u << c.n); ++m) {
        bool all = true;
        for (const auto& cl : c.clauses) {
            bool sat = false;
            for (const auto& l : cl) sat = sat || (((m >> (l.var - c.n)) & 1u) != 0) == l.positive;
            if (!sat) {
                all = false;
                break;
            }
        }
        if (all) return true;
    }
    return false;
}

CnfInstance random_3sat(int n, int m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    CnfInstance c;
    c.n = n;
    for (int i = 0; i < m; ++i) {
        std::array<Literal, 3> cl;
        for (auto& l : cl) l = {n + static_cast<int>(rng() % static_cast<std::uint64_t>(n)), (rng() & 1) != 0};
        c.clauses.push_back(cl);
    }
    return c;
}

// Number trees ---------------------------------------------------------------------

TreeNode number_tree(std::uint64_t i, int base_colors) {
    if (base_colors < 1 || base_colors > 62) throw Error("base color count must be in [1, 62]");
    TreeNode t;
    if (i < (std::uint64_t{1} << base_colors)) {
        for (int j = 0; j < base_colors; ++j)
            if (i >> j & 1) t.colors.push_back(base_color(j));
        return t;
    }
    for (int j = 0; j < 64; ++j)
        if (i >> j & 1) t.children.push_back(number_tree(static_cast<std::uint64_t>(j), base_colors));
    return t;
}

std::uint64_t decode_number_tree(const TreeNode& t, int base_colors) {
    std::uint64_t bits = 0;
    for (const auto& c : t.colors) {
        bool numeric = !c.empty() && std::all_of(c.begin(), c.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
        if (!numeric) continue;
        const int j = std::stoi(c);
        if (j < base_colors) bits |= std::uint64_t{1} << j;
    }
    if (t.children.empty()) return bits;
    if (bits) throw Error("malformed number tree: colored inner node");
    std::uint64_t v = 0;
    for (const auto& ch : t.children) {
        const std::uint64_t j = decode_number_tree(ch, base_colors);
        if (j >= 64) throw Error("malformed number tree: value too large");
        if (v >> j & 1) throw Error("malformed number tree: two children with value " + std::to_string(j));
        v |= std::uint64_t{1} << j;
    }
    return v;
}

int tree_height(const TreeNode& t) {
    int h = 0;
    for (const auto& c : t.children) h = std::max(h, 1 + tree_height(c));
    return h;
}

int tree_base_colors(int n, int h) {
    if (n < 1 || h < 1) throw Error("tree_base_colors needs n >= 1 and h >= 1");
    int b = 1;
    while (tower(h, b) < 2 * static_cast<std::uint64_t>(n)) ++b;
    return b;
}

int padded_variable_count(int n, int h) {
    if (h == 1) return n;
    for (int N = n; N < (1 << 20); ++N) {
        const int b = tree_base_colors(N, h);
        if (static_cast<std::uint64_t>(N) < pow2_sat(static_cast<std::uint64_t>(b))) continue;
        if (number_height(static_cast<std::uint64_t>(2 * N - 1), b) == h - 1) return N;
    }
    throw Error("no padded variable count found");
}

// Reduction ------------------------------------------------------------------------

ReductionArtifact sat_to_tree(const CnfInstance& c, int h) {
    check_cnf(c);
    if (h < 1) throw Error("tree height must be >= 1");
    const int N = padded_variable_count(c.n, h);
    auto index = [&](int var) { return static_cast<std::uint64_t>(var - c.n + N); };
    TreeNode root;
    std::vector<std::string> roster;
    int b = 0;
    if (h >= 2) {
        b = tree_base_colors(N, h);
        for (int v = N; v < 2 * N; ++v) {
            TreeNode t = number_tree(static_cast<std::uint64_t>(v), b);
            t.colors.push_back("v");
            root.children.push_back(std::move(t));
        }
        for (const auto& cl : c.clauses) {
            TreeNode cr;
            cr.colors.push_back("c");
            for (int p = 0; p < 3; ++p) {
                const Literal& l = cl[static_cast<std::size_t>(p)];
                TreeNode t = number_tree(index(l.var), b);
                for (auto& ch : t.children) {
                    ch.colors.push_back(lit_color(p + 1, l.positive ? 1 : 0));
                    cr.children.push_back(std::move(ch));
                }
            }
            root.children.push_back(std::move(cr));
        }
        for (int j = 0; j < b; ++j) roster.push_back(base_color(j));
        roster.push_back("v");
        roster.push_back("c");
        for (int p = 1; p <= 3; ++p)
            for (int q = 0; q <= 1; ++q) roster.push_back(lit_color(p, q));
    } else {
        b = std::max(1, static_cast<int>(std::bit_width(static_cast<unsigned>(2 * N - 1))));
        for (int v = N; v < 2 * N; ++v) {
            TreeNode t;
            for (int j = 0; j < b; ++j)
                if (v >> j & 1) t.colors.push_back(base_color(j));
            t.colors.push_back("v");
            root.children.push_back(std::move(t));
        }
        for (const auto& cl : c.clauses) {
            TreeNode t;
            t.colors.push_back("c");
            for (int p = 0; p < 3; ++p) {
                const Literal& l = cl[static_cast<std::size_t>(p)];
                for (int j = 0; j < b; ++j)
                    if (index(l.var) >> j & 1) t.colors.push_back(lit_bit_color(p + 1, l.positive ? 1 : 0, j));
            }
            root.children.push_back(std::move(t));
        }
        for (int j = 0; j < b; ++j) roster.push_back(base_color(j));
        roster.push_back("v");
        roster.push_back("c");
        for (int p = 1; p <= 3; ++p)
            for (int q = 0; q <= 1; ++q)
                for (int j = 0; j < b; ++j) roster.push_back(lit_bit_color(p, q, j));
    }

    auto lit = [&](int i, int q) { return Lib("lit", {i, q, h, b}, {"z", "y"}); };
    std::vector<F> pos, negs;
    for (int i = 1; i <= 3; ++i) {
        pos.push_back(And({lit(i, 1), in("z", "S")}));
        negs.push_back(And({lit(i, 0), Not(in("z", "S"))}));
    }
    F clause_ok = forall1("y", Imp(color_atom("c", "y"),
                                   exists1("z", And({color_atom("v", "z"), Or({Or(pos), Or(negs)})}))));
    F is_sat = exists_set("S", And({forall1("x", Imp(in("x", "S"), color_atom("v", "x"))), clause_ok}));

    ReductionArtifact a;
    a.kind = "sat2tree";
    a.structure = StructureDescriptor::tree(std::move(root));
    a.formula = is_sat;
    nlohmann::json clauses = nlohmann::json::array();
    for (const auto& cl : c.clauses) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& l : cl) row.push_back(l.positive ? l.var : -l.var);
        clauses.push_back(row);
    }
    a.layout = {{"h", h},
                {"n", c.n},
                {"padded_n", N},
                {"base_colors", b},
                {"roster", roster},
                {"roster_size", roster.size()},
                {"height", tree_height(a.structure.root)},
                {"clauses", clauses}};
    return a;
}

namespace {

// Value of the number tree rooted at x, or nullopt when malformed or taller than k.
std::optional<std::uint64_t> decode_at(const Structure& t, int x, int b, int k) {
    std::uint64_t bits = 0;
    for (int j = 0; j < b; ++j)
        if (t.has_color(t.color_index(base_color(j)), x)) bits |= std::uint64_t{1} << j;
    if (t.children(x).empty()) return bits;
    if (bits || k == 0) return std::nullopt;
    std::uint64_t v = 0;
    for (int c : t.children(x)) {
        auto j = decode_at(t, c, b, k - 1);
        if (!j || *j >= 64 || (v >> *j & 1)) return std::nullopt;
        v |= std::uint64_t{1} << *j;
    }
    return v;
}

}  // namespace

EvalResult evaluate_tree_sat(const ReductionArtifact& a, TreeEqPath path, const Budget& budget) {
    Structure t = build_structure(a.structure);
    const int h = a.layout.at("h").get<int>();
    const int b = a.layout.at("base_colors").get<int>();
    EvalOptions opt;
    opt.libs = &reduction_registry();
    opt.budget = budget;
    OracleRegistry oracles;
    std::vector<std::string> base;
    for (int j = 0; j < b; ++j) base.push_back(base_color(j));
    if (path == TreeEqPath::Tables) {
        auto tables = std::make_shared<std::vector<DerivedRelationTable>>(compute_eq_tables(t, h, base));
        oracles.add("treeeq", [tables](const Structure&, std::span<const std::int64_t> p, std::span<const Value* const> v) {
            const auto k = static_cast<std::size_t>(p[0]);
            if (k >= tables->size()) throw Error("eq table level out of range");
            return (*tables)[k](v[0]->index, v[1]->index);
        });
        opt.oracles = &oracles;
    } else if (path == TreeEqPath::Decode) {
        oracles.add("treeeq", [b](const Structure& s, std::span<const std::int64_t> p, std::span<const Value* const> v) {
            const int k = static_cast<int>(p[0]);
            auto x = decode_at(s, v[0]->index, b, k), y = decode_at(s, v[1]->index, b, k);
            return x && y && *x == *y;
        });
        opt.oracles = &oracles;
    }
    return evaluate(t, a.formula, {}, opt);
}

}  // namespace msow
