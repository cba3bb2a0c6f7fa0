#include "msow/formula.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace msow {

const char* to_string(Sort s) {
    switch (s) {
        case Sort::Element: return "element";
        case Sort::Set: return "element-set";
        case Sort::Edge: return "edge";
        case Sort::EdgeSet: return "edge-set";
    }
    return "?";
}

const char* to_string(Pred p) {
    switch (p) {
        case Pred::Prec: return "prec";
        case Pred::Edge: return "edge";
        case Pred::Child: return "child";
        case Pred::Color: return "color";
        case Pred::In: return "in";
        case Pred::Eq: return "=";
        case Pred::Incident: return "incident";
        case Pred::InE: return "inE";
    }
    return "?";
}

bool equal(const Formula& a, const Formula& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Kind::True:
        case Kind::False: return true;
        case Kind::Atom: return a.pred == b.pred && a.args == b.args && a.color == b.color;
        case Kind::Lib: return a.lib == b.lib && a.params == b.params && a.args == b.args;
        case Kind::Exists:
        case Kind::Forall:
            if (a.var != b.var || a.sort != b.sort) return false;
            break;
        default: break;
    }
    if (a.kids.size() != b.kids.size()) return false;
    for (std::size_t i = 0; i < a.kids.size(); ++i)
        if (!equal(*a.kids[i], *b.kids[i])) return false;
    return true;
}

// Builders ---------------------------------------------------------------------

namespace {
std::shared_ptr<Formula> node(Kind k) {
    auto f = std::make_shared<Formula>();
    f->kind = k;
    return f;
}
}  // namespace

FormulaPtr make_true() {
    static const FormulaPtr t = node(Kind::True);
    return t;
}
FormulaPtr make_false() {
    static const FormulaPtr f = node(Kind::False);
    return f;
}

FormulaPtr exists(Sort s, std::string v, FormulaPtr body) {
    auto f = node(Kind::Exists);
    f->sort = s;
    f->var = std::move(v);
    f->kids.push_back(std::move(body));
    return f;
}

FormulaPtr forall(Sort s, std::string v, FormulaPtr body) {
    auto f = node(Kind::Forall);
    f->sort = s;
    f->var = std::move(v);
    f->kids.push_back(std::move(body));
    return f;
}

FormulaPtr conj(std::vector<FormulaPtr> kids) {
    if (kids.empty()) return make_true();
    if (kids.size() == 1) return kids.front();
    auto f = node(Kind::And);
    f->kids = std::move(kids);
    return f;
}

FormulaPtr disj(std::vector<FormulaPtr> kids) {
    if (kids.empty()) return make_false();
    if (kids.size() == 1) return kids.front();
    auto f = node(Kind::Or);
    f->kids = std::move(kids);
    return f;
}

FormulaPtr neg(FormulaPtr a) {
    auto f = node(Kind::Not);
    f->kids.push_back(std::move(a));
    return f;
}

FormulaPtr implies(FormulaPtr a, FormulaPtr b) {
    auto f = node(Kind::Implies);
    f->kids = {std::move(a), std::move(b)};
    return f;
}

FormulaPtr iff(FormulaPtr a, FormulaPtr b) {
    auto f = node(Kind::Iff);
    f->kids = {std::move(a), std::move(b)};
    return f;
}

FormulaPtr atom(Pred p, std::vector<std::string> args) {
    auto f = node(Kind::Atom);
    f->pred = p;
    f->args = std::move(args);
    return f;
}

FormulaPtr color_atom(std::string color, std::string v) {
    auto f = node(Kind::Atom);
    f->pred = Pred::Color;
    f->color = std::move(color);
    f->args = {std::move(v)};
    return f;
}

FormulaPtr lib_call(std::string name, std::vector<std::int64_t> params, std::vector<std::string> args) {
    auto f = node(Kind::Lib);
    f->lib = std::move(name);
    f->params = std::move(params);
    f->args = std::move(args);
    return f;
}

FormulaPtr subset_of(const std::string& A, const std::string& B, const std::string& z) {
    return forall1(z, implies(in(z, A), in(z, B)));
}

FormulaPtr set_equal(const std::string& A, const std::string& B, const std::string& z) {
    return forall1(z, iff(in(z, A), in(z, B)));
}

FormulaPtr is_empty(const std::string& A, const std::string& z) { return forall1(z, neg(in(z, A))); }

FormulaPtr is_difference(const std::string& A, const std::string& B, const std::string& C, const std::string& z) {
    return forall1(z, iff(in(z, A), conj({in(z, B), neg(in(z, C))})));
}

FormulaPtr disjoint(const std::string& A, const std::string& B, const std::string& z) {
    return forall1(z, neg(conj({in(z, A), in(z, B)})));
}

// Printing ---------------------------------------------------------------------

namespace {

const char* binder_keyword(const Formula& f) {
    const bool ex = f.kind == Kind::Exists;
    switch (f.sort) {
        case Sort::Element:
        case Sort::Edge: return ex ? "exists1" : "forall1";
        case Sort::Set: return ex ? "existsSet" : "forallSet";
        case Sort::EdgeSet: return ex ? "existsEdgeSet" : "forallEdgeSet";
    }
    return "?";
}

const char* connective_keyword(Kind k) {
    switch (k) {
        case Kind::And: return "and";
        case Kind::Or: return "or";
        case Kind::Not: return "not";
        case Kind::Implies: return "implies";
        case Kind::Iff: return "iff";
        default: return "?";
    }
}

void print_leaf(const Formula& f, std::ostream& os) {
    switch (f.kind) {
        case Kind::True: os << "(true)"; return;
        case Kind::False: os << "(false)"; return;
        case Kind::Atom:
            os << '(' << to_string(f.pred);
            if (f.pred == Pred::Color) os << ' ' << f.color;
            for (const auto& a : f.args) os << ' ' << a;
            os << ')';
            return;
        case Kind::Lib:
            os << "(lib " << f.lib;
            for (auto p : f.params) os << ' ' << p;
            for (const auto& a : f.args) os << ' ' << a;
            os << ')';
            return;
        default: break;
    }
}

void print_rec(const Formula& f, std::ostream& os) {
    switch (f.kind) {
        case Kind::True:
        case Kind::False:
        case Kind::Atom:
        case Kind::Lib: print_leaf(f, os); return;
        case Kind::Exists:
        case Kind::Forall:
            os << '(' << binder_keyword(f) << ' ' << f.var << ' ';
            print_rec(*f.kids[0], os);
            os << ')';
            return;
        default:
            os << '(' << connective_keyword(f.kind);
            for (const auto& k : f.kids) {
                os << ' ';
                print_rec(*k, os);
            }
            os << ')';
    }
}

void pretty_rec(const Formula& f, std::ostream& os, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    switch (f.kind) {
        case Kind::True:
        case Kind::False:
        case Kind::Atom:
        case Kind::Lib:
            os << pad;
            print_leaf(f, os);
            return;
        case Kind::Exists:
        case Kind::Forall:
            os << pad << '(' << binder_keyword(f) << ' ' << f.var << '\n';
            pretty_rec(*f.kids[0], os, indent + 1);
            os << ')';
            return;
        default:
            os << pad << '(' << connective_keyword(f.kind);
            for (const auto& k : f.kids) {
                os << '\n';
                pretty_rec(*k, os, indent + 1);
            }
            os << ')';
    }
}

Sort atom_arg_sort(const Formula& f, std::size_t i) {
    switch (f.pred) {
        case Pred::In: return i == 0 ? Sort::Element : Sort::Set;
        case Pred::Incident: return i == 0 ? Sort::Element : Sort::Edge;
        case Pred::InE: return i == 0 ? Sort::Edge : Sort::EdgeSet;
        default: return Sort::Element;
    }
}

void free_rec(const Formula& f, std::vector<std::string>& bound, std::vector<FreeVar>& out,
              const LibRegistry* reg) {
    auto note = [&](const std::string& v, Sort s) {
        if (std::find(bound.begin(), bound.end(), v) != bound.end()) return;
        for (const auto& fv : out)
            if (fv.name == v) return;
        out.push_back({v, s});
    };
    switch (f.kind) {
        case Kind::True:
        case Kind::False: return;
        case Kind::Atom:
            for (std::size_t i = 0; i < f.args.size(); ++i) note(f.args[i], atom_arg_sort(f, i));
            return;
        case Kind::Lib: {
            std::vector<Sort> sorts;
            if (reg && reg->contains(f.lib)) sorts = reg->body(f.lib, f.params).sorts;
            for (std::size_t i = 0; i < f.args.size(); ++i)
                note(f.args[i], i < sorts.size() ? sorts[i] : Sort::Set);
            return;
        }
        case Kind::Exists:
        case Kind::Forall:
            bound.push_back(f.var);
            free_rec(*f.kids[0], bound, out, reg);
            bound.pop_back();
            return;
        default:
            for (const auto& k : f.kids) free_rec(*k, bound, out, reg);
    }
}

}  // namespace

std::string print(const Formula& f) {
    std::ostringstream os;
    print_rec(f, os);
    return os.str();
}

std::string pretty(const Formula& f) {
    std::ostringstream os;
    pretty_rec(f, os, 0);
    return os.str();
}

std::vector<FreeVar> free_vars(const Formula& f, const LibRegistry* reg) {
    std::vector<std::string> bound;
    std::vector<FreeVar> out;
    free_rec(f, bound, out, reg);
    return out;
}

// Signatures ------------------------------------------------------------------

bool Signature::has(Pred p) const {
    return std::find(predicates.begin(), predicates.end(), p) != predicates.end();
}

bool Signature::has_color(const std::string& c) const {
    return std::find(colors.begin(), colors.end(), c) != colors.end();
}

Signature Signature::word() { return {"word", {Pred::Prec, Pred::Color, Pred::In, Pred::Eq}, {"1"}, true, false}; }
Signature Signature::unary() { return {"unary", {Pred::Prec, Pred::In, Pred::Eq}, {}, true, false}; }
Signature Signature::path() {
    return {"path", {Pred::Edge, Pred::Prec, Pred::Color, Pred::In, Pred::Eq}, {"1"}, true, false};
}
Signature Signature::threshold() { return {"threshold", {Pred::Edge, Pred::Prec, Pred::In, Pred::Eq}, {}, true, false}; }
Signature Signature::tree(std::vector<std::string> colors) {
    return {"tree", {Pred::Child, Pred::Color, Pred::In, Pred::Eq}, std::move(colors), true, false};
}
Signature Signature::clique() {
    return {"clique", {Pred::Edge, Pred::In, Pred::Eq, Pred::Incident, Pred::InE}, {}, true, true};
}
Signature Signature::any() {
    return {"any",
            {Pred::Prec, Pred::Edge, Pred::Child, Pred::Color, Pred::In, Pred::Eq, Pred::Incident, Pred::InE},
            {},
            true,
            true};
}

// Registry --------------------------------------------------------------------

void LibRegistry::add(LibDef def) {
    if (defs_.count(def.name)) throw Error("library predicate already registered: " + def.name);
    auto name = def.name;
    defs_.emplace(std::move(name), std::move(def));
}

bool LibRegistry::contains(const std::string& name) const { return defs_.count(name) != 0; }

const LibDef& LibRegistry::def(const std::string& name) const {
    auto it = defs_.find(name);
    if (it == defs_.end()) throw UnknownPredicateError("unknown library predicate: " + name);
    return it->second;
}

const LibBody& LibRegistry::body(const std::string& name, std::span<const std::int64_t> params) const {
    std::pair<std::string, std::vector<std::int64_t>> key{name, {params.begin(), params.end()}};
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const LibDef& d = def(name);
    if (static_cast<int>(params.size()) != d.param_count)
        throw Error("library predicate " + name + " expects " + std::to_string(d.param_count) + " parameters");
    LibBody b = d.instantiate(params);
    return cache_.emplace(std::move(key), std::move(b)).first->second;
}

std::vector<std::string> LibRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : defs_) out.push_back(k);
    return out;
}

// Metrics ---------------------------------------------------------------------

namespace {

struct MetricsWalker {
    const LibRegistry* reg;
    bool expand;
    std::map<std::pair<std::string, std::vector<std::int64_t>>, Metrics> memo;
    std::vector<std::pair<std::string, std::vector<std::int64_t>>> stack;

    Metrics walk(const Formula& f) {
        Metrics m;
        switch (f.kind) {
            case Kind::True:
            case Kind::False:
            case Kind::Atom: m.size = 1; return m;
            case Kind::Lib:
                if (expand && reg) return lib(f);
                m.size = 1;
                return m;
            case Kind::Exists:
            case Kind::Forall: {
                Metrics b = walk(*f.kids[0]);
                m = b;
                m.size += 1;
                m.quantifier_depth = b.quantifier_depth + 1;
                if (f.sort == Sort::Set)
                    ++m.set_quantifiers;
                else if (f.sort == Sort::EdgeSet)
                    ++m.edge_set_quantifiers;
                else
                    ++m.first_order_quantifiers;
                return m;
            }
            default:
                m.size = 1;
                for (const auto& k : f.kids) {
                    Metrics b = walk(*k);
                    m.size += b.size;
                    m.first_order_quantifiers += b.first_order_quantifiers;
                    m.set_quantifiers += b.set_quantifiers;
                    m.edge_set_quantifiers += b.edge_set_quantifiers;
                    m.quantifier_depth = std::max(m.quantifier_depth, b.quantifier_depth);
                }
                return m;
        }
    }

    Metrics lib(const Formula& f) {
        std::pair<std::string, std::vector<std::int64_t>> key{f.lib, f.params};
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        if (std::find(stack.begin(), stack.end(), key) != stack.end())
            throw Error("cyclic library definition through " + f.lib);
        stack.push_back(key);
        Metrics m = walk(*reg->body(f.lib, f.params).body);
        stack.pop_back();
        memo.emplace(key, m);
        return m;
    }
};

}  // namespace

Metrics formula_metrics(const Formula& f, const LibRegistry* registry, bool expand_lib) {
    MetricsWalker w{registry, expand_lib, {}, {}};
    return w.walk(f);
}

// Validation ------------------------------------------------------------------

namespace {

struct Validator {
    const Signature& sig;
    const LibRegistry* reg;
    std::vector<std::pair<std::string, Sort>> scope;
    std::vector<Violation> out;

    std::optional<Sort> lookup(const std::string& v) const {
        for (auto it = scope.rbegin(); it != scope.rend(); ++it)
            if (it->first == v) return it->second;
        return std::nullopt;
    }

    void check_arg(const std::string& path, const std::string& v, Sort want) {
        auto s = lookup(v);
        if (!s) {
            out.push_back({path, "unbound variable " + v});
            return;
        }
        if (*s != want)
            out.push_back({path, "variable " + v + " has sort " + to_string(*s) + ", expected " + to_string(want)});
    }

    void walk(const Formula& f, const std::string& path) {
        switch (f.kind) {
            case Kind::True:
            case Kind::False: return;
            case Kind::Atom: {
                if (!sig.has(f.pred)) out.push_back({path, std::string("predicate not in signature: ") + to_string(f.pred)});
                if (f.pred == Pred::Color && !sig.colors.empty() && !sig.has_color(f.color))
                    out.push_back({path, "unknown color " + f.color});
                const std::size_t arity = f.pred == Pred::Color ? 1 : 2;
                if (f.args.size() != arity) {
                    out.push_back({path, "wrong arity"});
                    return;
                }
                if (f.pred == Pred::Eq) {
                    auto a = lookup(f.args[0]);
                    auto b = lookup(f.args[1]);
                    if (!a || !b) {
                        if (!a) out.push_back({path, "unbound variable " + f.args[0]});
                        if (!b) out.push_back({path, "unbound variable " + f.args[1]});
                    } else if (*a != *b || (*a != Sort::Element && *a != Sort::Edge)) {
                        out.push_back({path, "= expects two elements or two edges"});
                    }
                    return;
                }
                for (std::size_t i = 0; i < f.args.size(); ++i) {
                    Sort want = Sort::Element;
                    if (f.pred == Pred::In && i == 1) want = Sort::Set;
                    if (f.pred == Pred::Incident && i == 1) want = Sort::Edge;
                    if (f.pred == Pred::InE) want = i == 0 ? Sort::Edge : Sort::EdgeSet;
                    check_arg(path, f.args[i], want);
                }
                return;
            }
            case Kind::Lib: {
                if (!reg || !reg->contains(f.lib)) {
                    out.push_back({path, "unknown library predicate " + f.lib});
                    return;
                }
                if (static_cast<int>(f.params.size()) != reg->def(f.lib).param_count) {
                    out.push_back({path, "wrong parameter count for " + f.lib});
                    return;
                }
                const LibBody& b = reg->body(f.lib, f.params);
                if (b.formals.size() != f.args.size()) {
                    out.push_back({path, "wrong arity for " + f.lib});
                    return;
                }
                for (std::size_t i = 0; i < f.args.size(); ++i) check_arg(path, f.args[i], b.sorts[i]);
                return;
            }
            case Kind::Exists:
            case Kind::Forall:
                if ((f.sort == Sort::EdgeSet || f.sort == Sort::Edge) && !sig.edge_sets)
                    out.push_back({path, "edge quantifier outside MSO2 signature"});
                if (f.sort == Sort::Set && !sig.sets) out.push_back({path, "set quantifier not allowed"});
                scope.emplace_back(f.var, f.sort);
                walk(*f.kids[0], path + ".0");
                scope.pop_back();
                return;
            default:
                if ((f.kind == Kind::Not && f.kids.size() != 1) ||
                    ((f.kind == Kind::Implies || f.kind == Kind::Iff) && f.kids.size() != 2))
                    out.push_back({path, "wrong number of operands"});
                for (std::size_t i = 0; i < f.kids.size(); ++i) walk(*f.kids[i], path + "." + std::to_string(i));
        }
    }
};

}  // namespace

std::vector<Violation> validate(const Formula& f, const Signature& sig, const LibRegistry* registry,
                                const std::vector<FreeVar>& declared_free) {
    Validator v{sig, registry, {}, {}};
    for (const auto& fv : declared_free) v.scope.emplace_back(fv.name, fv.sort);
    v.walk(f, "0");
    return v.out;
}

// Renaming and expansion -------------------------------------------------------

namespace {

FormulaPtr rename_rec(const FormulaPtr& f, std::map<std::string, std::string> mapping) {
    if (mapping.empty()) return f;
    auto map_arg = [&](const std::string& a) {
        auto it = mapping.find(a);
        return it == mapping.end() ? a : it->second;
    };
    switch (f->kind) {
        case Kind::True:
        case Kind::False: return f;
        case Kind::Atom:
        case Kind::Lib: {
            auto g = std::make_shared<Formula>(*f);
            for (auto& a : g->args) a = map_arg(a);
            return g;
        }
        case Kind::Exists:
        case Kind::Forall: {
            auto g = std::make_shared<Formula>(*f);
            mapping.erase(f->var);
            g->kids[0] = rename_rec(f->kids[0], std::move(mapping));
            return g;
        }
        default: {
            auto g = std::make_shared<Formula>(*f);
            for (auto& k : g->kids) k = rename_rec(k, mapping);
            return g;
        }
    }
}

struct Expander {
    const LibRegistry& reg;
    std::uint64_t counter = 0;
    std::vector<std::pair<std::string, std::vector<std::int64_t>>> stack;

    // Rename every binder in `f` to a fresh name and substitute free names.
    FormulaPtr freshen(const FormulaPtr& f, std::map<std::string, std::string> mapping) {
        auto map_arg = [&](const std::string& a) {
            auto it = mapping.find(a);
            return it == mapping.end() ? a : it->second;
        };
        switch (f->kind) {
            case Kind::True:
            case Kind::False: return f;
            case Kind::Atom:
            case Kind::Lib: {
                auto g = std::make_shared<Formula>(*f);
                for (auto& a : g->args) a = map_arg(a);
                return g;
            }
            case Kind::Exists:
            case Kind::Forall: {
                auto g = std::make_shared<Formula>(*f);
                const auto cut = f->var.find("__");
                g->var = f->var.substr(0, cut) + "__" + std::to_string(++counter);
                mapping[f->var] = g->var;
                g->kids[0] = freshen(f->kids[0], std::move(mapping));
                return g;
            }
            default: {
                auto g = std::make_shared<Formula>(*f);
                for (auto& k : g->kids) k = freshen(k, mapping);
                return g;
            }
        }
    }

    FormulaPtr expand(const FormulaPtr& f) {
        switch (f->kind) {
            case Kind::True:
            case Kind::False:
            case Kind::Atom: return f;
            case Kind::Lib: {
                std::pair<std::string, std::vector<std::int64_t>> key{f->lib, f->params};
                if (std::find(stack.begin(), stack.end(), key) != stack.end())
                    throw Error("cyclic library definition through " + f->lib);
                const LibBody& b = reg.body(f->lib, f->params);
                if (b.formals.size() != f->args.size()) throw Error("wrong arity for library predicate " + f->lib);
                std::map<std::string, std::string> mapping;
                for (std::size_t i = 0; i < b.formals.size(); ++i) mapping[b.formals[i]] = f->args[i];
                stack.push_back(key);
                FormulaPtr inner = expand(b.body);
                stack.pop_back();
                return freshen(inner, std::move(mapping));
            }
            default: {
                auto g = std::make_shared<Formula>(*f);
                for (auto& k : g->kids) k = expand(k);
                return g;
            }
        }
    }
};

}  // namespace

FormulaPtr rename_free(const FormulaPtr& f, const std::map<std::string, std::string>& mapping) {
    return rename_rec(f, mapping);
}

FormulaPtr expand_lib(const FormulaPtr& f, const LibRegistry& registry) {
    Expander e{registry, 0, {}};
    return e.expand(f);
}

}  // namespace msow
