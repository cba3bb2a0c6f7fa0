#include <set>

#include "reductions_internal.hpp"

namespace msow {

using namespace detail;

namespace detail {

namespace {
F E(const std::string& x, const std::string& y) { return edge(x, y); }
F un(const std::string& x) { return Lib("tunion", {}, {x}); }
}  // namespace

// A vertex is a union vertex iff its neighborhood is a clique.
LibBody tunion_body() {
    return {{"x"},
            {Sort::Element},
            forall1("y", forall1("z", Imp(And({E("x", "y"), E("x", "z"), Not(eq("y", "z"))}), E("y", "z"))))};
}

// Union vertices other than the two leading dummies miss some join vertex.
LibBody tmain_body() {
    return {{"x"}, {Sort::Element}, And({un("x"), exists1("y", And({Not(un("y")), Not(E("x", "y"))}))})};
}

LibBody tprec_body() {
    return {{"x", "y"}, {Sort::Element, Sort::Element}, exists1("z", And({Not(un("z")), E("x", "z"), Not(E("y", "z"))}))};
}

// Two join vertices adjacent to x and to no later main vertex: x opens a ujj block.
LibBody tone_body() {
    F later = forall1("w", Imp(And({Lib("tmain", {}, {"w"}), Lib("tprec", {}, {"x", "w"})}),
                               And({Not(E("y", "w")), Not(E("z", "w"))})));
    return {{"x"},
            {Sort::Element},
            exists1("y", exists1("z", And({Not(eq("y", "z")), Not(un("y")), Not(un("z")), E("x", "y"), E("x", "z"), later})))};
}

}  // namespace detail

std::string threshold_creation(const std::string& word) {
    std::string c = "uuj";
    for (char ch : word) {
        if (ch == '0')
            c += "uj";
        else if (ch == '1')
            c += "ujj";
        else
            throw Error("word letters must be 0 or 1");
    }
    return c;
}

namespace {

F translate(const Formula& f) {
    switch (f.kind) {
        case Kind::True: return make_true();
        case Kind::False: return make_false();
        case Kind::Exists:
        case Kind::Forall: {
            if (f.sort != Sort::Element) throw SortError("threshold translation takes first-order formulas only");
            F body = translate(*f.kids[0]);
            F main = Lib("tmain", {}, {f.var});
            return f.kind == Kind::Exists ? exists1(f.var, And({main, body})) : forall1(f.var, Imp(main, body));
        }
        case Kind::Atom:
            switch (f.pred) {
                case Pred::Prec: return Lib("tprec", {}, f.args);
                case Pred::Eq: return eq(f.args[0], f.args[1]);
                case Pred::Color:
                    if (f.color != "1") throw UnknownPredicateError("word color " + f.color);
                    return Lib("tone", {}, f.args);
                case Pred::In: throw SortError("threshold translation takes first-order formulas only");
                default: throw UnknownPredicateError(std::string("not a word predicate: ") + to_string(f.pred));
            }
        case Kind::Lib: throw UnknownPredicateError("library call in a word formula: " + f.lib);
        default: {
            std::vector<F> kids;
            for (const auto& k : f.kids) kids.push_back(translate(*k));
            return rebuild(f, std::move(kids));
        }
    }
}

}  // namespace

FormulaPtr translate_word_formula(const FormulaPtr& phi) {
    if (!free_vars(*phi).empty()) throw Error("threshold translation needs a sentence");
    return translate(*phi);
}

ReductionArtifact word_to_threshold(const std::string& word, const FormulaPtr& phi) {
    ReductionArtifact a;
    a.kind = "word2threshold";
    const std::string c = threshold_creation(word);
    a.structure = StructureDescriptor::threshold(c);
    a.formula = translate_word_formula(phi);
    // Vertex opening each letter block.
    std::vector<int> mains;
    for (std::size_t i = 3; i < c.size(); ++i)
        if (c[i] == 'u') mains.push_back(static_cast<int>(i));
    a.layout = {{"word", word}, {"creation", c}, {"main_vertices", mains}};
    return a;
}

// Seed embedding -------------------------------------------------------------------

namespace {

struct Embedder {
    const SeedGraph& seed;
    std::set<std::string> names;

    std::string v(const std::string& x, int i) const { return x + "_" + std::to_string(i + 1); }

    // x_1..x_k form one seed copy with a common outside neighbourhood.
    F copy(const std::string& x) const {
        std::vector<F> parts;
        const int k = seed.k;
        std::set<std::pair<int, int>> es;
        for (auto [a, b] : seed.edges) es.insert({std::min(a, b), std::max(a, b)});
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j) {
                parts.push_back(Not(eq(v(x, i), v(x, j))));
                F e = edge(v(x, i), v(x, j));
                parts.push_back(es.count({i, j}) ? e : Not(e));
            }
        if (k > 1) {
            const std::string w = x + "_w";
            std::vector<F> outside, same;
            for (int i = 0; i < k; ++i) outside.push_back(Not(eq(w, v(x, i))));
            for (int i = 1; i < k; ++i) same.push_back(iff(edge(w, v(x, 0)), edge(w, v(x, i))));
            parts.push_back(forall1(w, Imp(And(outside), And(same))));
        }
        return And(parts);
    }

    // Two blocks denote the same copy iff they share a vertex.
    F same(const std::string& x, const std::string& y) const {
        std::vector<F> d;
        for (int i = 0; i < seed.k; ++i)
            for (int j = 0; j < seed.k; ++j) d.push_back(eq(v(x, i), v(y, j)));
        return Or(d);
    }

    F tr(const Formula& f) const {
        switch (f.kind) {
            case Kind::True: return make_true();
            case Kind::False: return make_false();
            case Kind::Exists:
            case Kind::Forall: {
                if (f.sort != Sort::Element) throw SortError("seed embedding takes first-order formulas only");
                F body = f.kind == Kind::Exists ? And({copy(f.var), tr(*f.kids[0])}) : Imp(copy(f.var), tr(*f.kids[0]));
                for (int i = seed.k - 1; i >= 0; --i)
                    body = f.kind == Kind::Exists ? exists1(v(f.var, i), body) : forall1(v(f.var, i), body);
                return body;
            }
            case Kind::Atom:
                if (f.pred == Pred::Eq) return same(f.args[0], f.args[1]);
                if (f.pred == Pred::Edge)
                    return And({Not(same(f.args[0], f.args[1])), edge(v(f.args[0], 0), v(f.args[1], 0))});
                throw UnknownPredicateError(std::string("seed embedding supports edge and = only, got ") + to_string(f.pred));
            case Kind::Lib: throw Error("expand library calls before embedding");
            default: {
                std::vector<F> kids;
                for (const auto& k : f.kids) kids.push_back(tr(*k));
                return rebuild(f, std::move(kids));
            }
        }
    }
};

void collect_names(const Formula& f, std::set<std::string>& out) {
    if (f.is_binder()) out.insert(f.var);
    for (const auto& a : f.args) out.insert(a);
    for (const auto& k : f.kids) collect_names(*k, out);
}

}  // namespace

ReductionArtifact embed_with_seed(const SeedGraph& seed, const std::string& creation, const FormulaPtr& phi) {
    if (seed.k < 1) throw Error("seed graph must be nonempty");
    for (auto [a, b] : seed.edges)
        if (a < 0 || b < 0 || a >= seed.k || b >= seed.k || a == b) throw Error("bad seed edge");
    const std::int64_t n = static_cast<std::int64_t>(creation.size()) * seed.k;
    if (n > kDefaultMaterializeLimit) throw Error("embedded graph too large");

    std::vector<std::pair<int, int>> edges;
    for (std::size_t t = 0; t < creation.size(); ++t) {
        const char c = creation[t];
        if (c != 'u' && c != 'j') throw Error("creation letters must be u or j");
        const int base = static_cast<int>(t) * seed.k;
        for (auto [a, b] : seed.edges) edges.push_back({base + a, base + b});
        if (c == 'j')
            for (int x = 0; x < seed.k; ++x)
                for (int y = 0; y < base; ++y) edges.push_back({y, base + x});
    }

    FormulaPtr flat = expand_lib(phi, reduction_registry());
    if (!free_vars(*flat).empty()) throw Error("seed embedding needs a sentence");
    Embedder em{seed, {}};
    std::set<std::string> used;
    collect_names(*flat, used);
    for (const auto& x : used)
        for (int i = 0; i <= seed.k; ++i)
            if (used.count(i < seed.k ? em.v(x, i) : x + "_w")) throw Error("variable names clash with block names: " + x);

    ReductionArtifact a;
    a.kind = "seed-embedding";
    a.structure = StructureDescriptor::graph(n, edges);
    a.formula = em.tr(*flat);
    a.layout = {{"creation", creation}, {"seed_order", seed.k}, {"vertices", n}};
    return a;
}

}  // namespace msow
