#include "msow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <unordered_map>

namespace msow {

// Values and JSON ------------------------------------------------------------------

const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::False: return "false";
        case Outcome::True: return "true";
        case Outcome::BudgetExceeded: return "budget-exceeded";
    }
    return "?";
}

nlohmann::json to_json(const Assignment& a, const Structure& s) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, v] : a) {
        switch (v.sort) {
            case Sort::Element: j[name] = v.index; break;
            case Sort::Edge: {
                auto [u, w] = s.edge_list()[static_cast<std::size_t>(v.index)];
                j[name] = nlohmann::json::array({u, w});
                break;
            }
            case Sort::Set: j[name] = v.set.elements(); break;
            case Sort::EdgeSet: {
                nlohmann::json arr = nlohmann::json::array();
                for (int e : v.set.elements()) {
                    auto [u, w] = s.edge_list()[static_cast<std::size_t>(e)];
                    arr.push_back({u, w});
                }
                j[name] = arr;
                break;
            }
        }
    }
    return j;
}

Assignment assignment_from_json(const nlohmann::json& j, const Structure& s, const std::vector<FreeVar>& free) {
    Assignment a;
    const auto n = static_cast<std::size_t>(s.size());
    const auto m = static_cast<std::size_t>(s.edge_count());
    auto edge_of = [&](const nlohmann::json& p) {
        int e = s.edge_index(p.at(0).get<int>(), p.at(1).get<int>());
        if (e < 0) throw Error("assignment names a non-edge");
        return e;
    };
    for (const auto& [name, val] : j.items()) {
        std::optional<Sort> sort;
        for (const auto& fv : free)
            if (fv.name == name) sort = fv.sort;
        if (!sort) {
            if (val.is_number_integer())
                sort = Sort::Element;
            else if (val.is_array() && !val.empty() && val[0].is_array())
                sort = Sort::EdgeSet;
            else if (val.is_array() && val.size() == 2 && val[0].is_number_integer() && free.empty())
                sort = Sort::Set;
            else
                sort = Sort::Set;
        }
        switch (*sort) {
            case Sort::Element: {
                int x = val.get<int>();
                if (x < 0 || static_cast<std::size_t>(x) >= n) throw Error("element " + std::to_string(x) + " out of range");
                a[name] = Value::element(x);
                break;
            }
            case Sort::Edge: a[name] = Value::edge(edge_of(val)); break;
            case Sort::Set: {
                BitSet b(n);
                for (const auto& x : val) {
                    int e = x.get<int>();
                    if (e < 0 || static_cast<std::size_t>(e) >= n) throw Error("element " + std::to_string(e) + " out of range");
                    b.set(static_cast<std::size_t>(e));
                }
                a[name] = Value::elements(std::move(b));
                break;
            }
            case Sort::EdgeSet: {
                BitSet b(m);
                for (const auto& p : val) b.set(static_cast<std::size_t>(edge_of(p)));
                a[name] = Value::edges(std::move(b));
                break;
            }
        }
    }
    return a;
}

Budget Budget::from_env() {
    Budget b;
    if (const char* env = std::getenv("MSOW_BUDGET")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0' && v > 0) b.max_steps = v;
    }
    return b;
}

nlohmann::json to_json(const EvalResult& r, const Structure& s) {
    nlohmann::json j = {{"outcome", to_string(r.outcome)}, {"steps", r.steps}};
    if (r.witness) j["witness"] = to_json(*r.witness, s);
    return j;
}

// Registries -------------------------------------------------------------------------

void OracleRegistry::add(const std::string& lib, OracleFn fn) {
    if (!fns_.emplace(lib, std::move(fn)).second) throw Error("oracle already registered for " + lib);
}

const OracleFn* OracleRegistry::find(const std::string& lib) const {
    auto it = fns_.find(lib);
    return it == fns_.end() ? nullptr : &it->second;
}

std::vector<std::string> OracleRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : fns_) out.push_back(k);
    return out;
}

void GuardRegistry::add(GuardShape shape, GuardEnumerator fn) { fns_[std::move(shape)] = std::move(fn); }

const GuardEnumerator* GuardRegistry::find(const std::string& lib, int bound_arg) const {
    auto it = fns_.find(GuardShape{lib, bound_arg});
    return it == fns_.end() ? nullptr : &it->second;
}

namespace {

// Maximal runs of U in the structure order whose members agree on P.
std::vector<std::vector<int>> runs_of(const Structure& s, const BitSet& U, const BitSet& P) {
    std::vector<std::vector<int>> runs;
    bool last = false;
    for (int x : s.ordered()) {
        if (!U.test(static_cast<std::size_t>(x))) continue;
        const bool p = P.test(static_cast<std::size_t>(x));
        if (runs.empty() || p != last) runs.emplace_back();
        runs.back().push_back(x);
        last = p;
    }
    return runs;
}

void intervals_of(const std::vector<int>& seq, std::size_t n, std::vector<BitSet>& out) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
        BitSet b(n);
        for (std::size_t j = i; j < seq.size(); ++j) {
            b.set(static_cast<std::size_t>(seq[j]));
            out.push_back(b);
        }
    }
}

}  // namespace

std::vector<BitSet> section_candidates(const Structure& s, const BitSet& U, const BitSet& P) {
    std::vector<BitSet> out{BitSet(U.size())};
    for (const auto& run : runs_of(s, U, P)) out.push_back(set_of(U.size(), run));
    return out;
}

std::vector<BitSet> partsection_candidates(const Structure& s, const BitSet& U, const BitSet& P) {
    std::vector<BitSet> out{BitSet(U.size())};
    for (const auto& run : runs_of(s, U, P)) intervals_of(run, U.size(), out);
    return out;
}

const GuardRegistry& GuardRegistry::defaults() {
    static const GuardRegistry reg = [] {
        GuardRegistry r;
        r.add({"section", 0}, [](const Structure& s, std::span<const std::int64_t>, std::span<const Value* const> a) {
            return section_candidates(s, a[1]->set, a[2]->set);
        });
        r.add({"partsection", 0}, [](const Structure& s, std::span<const std::int64_t>, std::span<const Value* const> a) {
            return partsection_candidates(s, a[1]->set, a[2]->set);
        });
        return r;
    }();
    return reg;
}

// Compiled form ----------------------------------------------------------------------

namespace {

struct BudgetHit {};

enum class Op {
    True, False, And, Or, Not, Implies, Iff,
    Prec, Edge, Child, Color, In, Eq, Incident, InE,
    Exists, Forall, Oracle, Call
};

struct Node;

struct GuardPlan {
    enum Type { Empty, Defined, EqualPartition, Registered, ConsecSub, Subset } type;
    int z = -1;                  // element slot of the defining quantifier
    const Node* psi = nullptr;   // membership condition for Defined/Subset
    const Node* call = nullptr;  // lib call for Registered
    int bound_pos = 0;
    const GuardEnumerator* fn = nullptr;
    int host = -1;   // slot of the host set (ConsecSub, EqualPartition)
    int other = -1;  // slot of the size reference (EqualPartition)
};

struct Node {
    Op op = Op::True;
    std::vector<Node*> kids;
    int a = -1, b = -1;  // atom argument slots
    int color = -1;
    int slot = -1;  // bound slot
    Sort sort = Sort::Element;
    std::string var;
    int elem_guard = -1;  // element binder restricted to members of this set slot
    std::vector<GuardPlan> guards;
    // lib calls
    std::string lib;
    std::vector<std::int64_t> params;
    std::vector<int> args;
    const OracleFn* oracle = nullptr;
    int fn = -1;
};

struct Function {
    std::vector<Sort> slot_sorts;
    std::vector<int> formals;
    Node* body = nullptr;
};

class Program {
public:
    Program(const Structure& s, const EvalOptions& opt) : s_(s), opt_(opt) {}

    // Compile the top formula with the given free variables occupying the first slots.
    int compile_top(const FormulaPtr& f, const std::vector<FreeVar>& free) {
        Function fn;
        Scope sc;
        for (const auto& v : free) {
            sc.push_back({v.name, static_cast<int>(fn.slot_sorts.size())});
            fn.formals.push_back(static_cast<int>(fn.slot_sorts.size()));
            fn.slot_sorts.push_back(v.sort);
        }
        const int id = static_cast<int>(fns_.size());
        fns_.emplace_back();
        fn.body = compile(*f, sc, fn);
        fns_[static_cast<std::size_t>(id)] = std::move(fn);
        return id;
    }

    const Function& fn(int id) const { return fns_[static_cast<std::size_t>(id)]; }
    Function& fn(int id) { return fns_[static_cast<std::size_t>(id)]; }

private:
    using Scope = std::vector<std::pair<std::string, int>>;

    Node* make(Op op) {
        nodes_.push_back(std::make_unique<Node>());
        nodes_.back()->op = op;
        return nodes_.back().get();
    }

    static int lookup(const Scope& sc, const std::string& v) {
        for (auto it = sc.rbegin(); it != sc.rend(); ++it)
            if (it->first == v) return it->second;
        throw Error("missing assignment for free variable " + v);
    }

    int lib_function(const std::string& name, const std::vector<std::int64_t>& params) {
        auto key = std::make_pair(name, params);
        auto it = lib_fns_.find(key);
        if (it != lib_fns_.end()) {
            if (it->second < 0) throw Error("cyclic library definition through " + name);
            return it->second;
        }
        if (!opt_.libs || !opt_.libs->contains(name)) throw UnknownPredicateError("unknown library predicate " + name);
        const LibBody& body = opt_.libs->body(name, params);
        lib_fns_[key] = -1;
        std::vector<FreeVar> formals;
        for (std::size_t i = 0; i < body.formals.size(); ++i) formals.push_back({body.formals[i], body.sorts[i]});
        const int id = compile_top(body.body, formals);
        lib_fns_[key] = id;
        return id;
    }

    Node* compile(const Formula& f, Scope& sc, Function& fn) {
        switch (f.kind) {
            case Kind::True: return make(Op::True);
            case Kind::False: return make(Op::False);
            case Kind::And:
            case Kind::Or:
            case Kind::Not:
            case Kind::Implies:
            case Kind::Iff: {
                static const Op ops[] = {Op::And, Op::Or, Op::Not, Op::Implies, Op::Iff};
                Node* n = make(ops[static_cast<int>(f.kind) - static_cast<int>(Kind::And)]);
                for (const auto& k : f.kids) n->kids.push_back(compile(*k, sc, fn));
                return n;
            }
            case Kind::Atom: {
                Node* n = nullptr;
                switch (f.pred) {
                    case Pred::Prec:
                        if (!s_.has_order()) throw UnknownPredicateError("structure has no order");
                        n = make(Op::Prec);
                        break;
                    case Pred::Edge: n = make(Op::Edge); break;
                    case Pred::Child: n = make(Op::Child); break;
                    case Pred::Color:
                        n = make(Op::Color);
                        n->color = s_.color_index(f.color);
                        n->a = lookup(sc, f.args[0]);
                        return n;
                    case Pred::In: n = make(Op::In); break;
                    case Pred::Eq: n = make(Op::Eq); break;
                    case Pred::Incident: n = make(Op::Incident); break;
                    case Pred::InE: n = make(Op::InE); break;
                }
                n->a = lookup(sc, f.args[0]);
                n->b = lookup(sc, f.args[1]);
                return n;
            }
            case Kind::Lib: {
                Node* n = make(Op::Call);
                n->lib = f.lib;
                n->params = f.params;
                for (const auto& a : f.args) n->args.push_back(lookup(sc, a));
                if (opt_.oracles) n->oracle = opt_.oracles->find(f.lib);
                if (n->oracle) {
                    n->op = Op::Oracle;
                } else {
                    n->fn = lib_function(f.lib, f.params);
                    const Function& callee = fns_[static_cast<std::size_t>(n->fn)];
                    if (callee.formals.size() != n->args.size())
                        throw SortError("library predicate " + f.lib + " called with wrong arity");
                }
                return n;
            }
            case Kind::Exists:
            case Kind::Forall: {
                Node* n = make(f.kind == Kind::Exists ? Op::Exists : Op::Forall);
                n->sort = f.sort;
                n->var = f.var;
                n->slot = static_cast<int>(fn.slot_sorts.size());
                fn.slot_sorts.push_back(f.sort);
                sc.push_back({f.var, n->slot});
                n->kids.push_back(compile(*f.kids[0], sc, fn));
                sc.pop_back();
                plan(n);
                return n;
            }
        }
        throw Error("unreachable formula kind");
    }

    static bool mentions(const Node* n, int slot) {
        if (n->a == slot || n->b == slot) return true;
        for (int a : n->args)
            if (a == slot) return true;
        for (const Node* k : n->kids)
            if (mentions(k, slot)) return true;
        return false;
    }

    static void flatten_and(const Node* n, std::vector<const Node*>& out) {
        if (n->op == Op::And) {
            for (const Node* k : n->kids) flatten_and(k, out);
        } else {
            out.push_back(n);
        }
    }

    // Conjuncts that must hold for the binder's body to matter. A chain of
    // binders of the same kind is looked through; conjuncts that read the
    // inner binders' variables are dropped.
    static std::vector<const Node*> guard_conjuncts(const Node* binder) {
        std::vector<const Node*> all, out;
        std::vector<int> inner;
        const Node* body = binder->kids[0];
        while (body->op == binder->op) {
            inner.push_back(body->slot);
            body = body->kids[0];
        }
        if (binder->op == Op::Exists) {
            flatten_and(body, all);
        } else if (body->op == Op::Implies) {
            flatten_and(body->kids[0], all);
        }
        for (const Node* c : all)
            if (std::none_of(inner.begin(), inner.end(), [&](int v) { return mentions(c, v); })) out.push_back(c);
        return out;
    }

    void plan(Node* n) {
        const int X = n->slot;
        auto conjuncts = guard_conjuncts(n);
        if (n->sort == Sort::Element || n->sort == Sort::Edge) {
            const Op want = n->sort == Sort::Element ? Op::In : Op::InE;
            for (const Node* c : conjuncts)
                if (c->op == want && c->a == X && c->b != X) {
                    n->elem_guard = c->b;
                    break;
                }
            return;
        }
        if (!opt_.structural_guards && !opt_.guards) return;
        const Op mem = n->sort == Sort::Set ? Op::In : Op::InE;
        std::vector<GuardPlan> plans;
        std::map<int, const Node*> subset_hosts;  // host slot -> subset conjunct (psi is plain membership)
        for (const Node* c : conjuncts) {
            if (opt_.structural_guards && c->op == Op::Forall && (c->sort == Sort::Element || c->sort == Sort::Edge)) {
                const int z = c->slot;
                const Node* b = c->kids[0];
                auto is_mem = [&](const Node* k) { return k->op == mem && k->a == z && k->b == X; };
                if (b->op == Op::Not && is_mem(b->kids[0])) {
                    plans.push_back({GuardPlan::Empty});
                } else if (b->op == Op::Iff && (is_mem(b->kids[0]) || is_mem(b->kids[1]))) {
                    const Node* psi = is_mem(b->kids[0]) ? b->kids[1] : b->kids[0];
                    if (!mentions(psi, X)) plans.push_back({GuardPlan::Defined, z, psi});
                } else if (b->op == Op::Implies && is_mem(b->kids[0]) && !mentions(b->kids[1], X)) {
                    GuardPlan g{GuardPlan::Subset, z, b->kids[1]};
                    plans.push_back(g);
                    if (b->kids[1]->op == mem && b->kids[1]->a == z) subset_hosts[b->kids[1]->b] = c;
                }
            }
            if (c->op == Op::Call || c->op == Op::Oracle) {
                int pos = -1, uses = 0;
                for (std::size_t i = 0; i < c->args.size(); ++i)
                    if (c->args[i] == X) {
                        pos = static_cast<int>(i);
                        ++uses;
                    }
                if (uses == 1 && opt_.guards) {
                    if (const GuardEnumerator* g = opt_.guards->find(c->lib, pos)) {
                        GuardPlan p{GuardPlan::Registered};
                        p.call = c;
                        p.bound_pos = pos;
                        p.fn = g;
                        plans.push_back(p);
                    }
                }
            }
        }
        if (opt_.structural_guards) {
            for (const Node* c : conjuncts) {
                // consec(X, H) together with X subset of H: contiguous runs of H.
                if ((c->op == Op::Call || c->op == Op::Oracle) && c->lib == "consec" && c->args.size() == 2 &&
                    c->args[0] == X && c->args[1] != X && subset_hosts.count(c->args[1])) {
                    GuardPlan p{GuardPlan::ConsecSub};
                    p.host = c->args[1];
                    plans.push_back(p);
                }
                // forall S (section(S, H, X) -> eq(S, Y)) together with X subset of H: the
                // sections are consecutive blocks of size |Y|, so X alternates between blocks.
                // Relies on eq only holding between equal-size sets.
                if (c->op == Op::Forall && c->sort == Sort::Set && c->kids[0]->op == Op::Implies) {
                    const Node* g = c->kids[0]->kids[0];
                    const Node* e = c->kids[0]->kids[1];
                    const int S = c->slot;
                    auto is_call = [](const Node* k, const char* name) {
                        return (k->op == Op::Call || k->op == Op::Oracle) && k->lib == name;
                    };
                    if (is_call(g, "section") && g->args.size() == 3 && g->args[0] == S && g->args[2] == X &&
                        g->args[1] != X && subset_hosts.count(g->args[1]) && is_call(e, "eq") && e->args.size() == 2) {
                        int other = e->args[0] == S ? e->args[1] : (e->args[1] == S ? e->args[0] : -1);
                        if (other >= 0 && other != X && other != S) {
                            GuardPlan p{GuardPlan::EqualPartition};
                            p.host = g->args[1];
                            p.other = other;
                            plans.push_back(p);
                        }
                    }
                }
            }
        }
        auto rank = [](const GuardPlan& p) {
            switch (p.type) {
                case GuardPlan::Empty: return 0;
                case GuardPlan::Defined: return 1;
                case GuardPlan::EqualPartition: return 2;
                case GuardPlan::Registered: return 3;
                case GuardPlan::ConsecSub: return 4;
                case GuardPlan::Subset: return 5;
            }
            return 6;
        };
        std::stable_sort(plans.begin(), plans.end(), [&](const auto& a, const auto& b) { return rank(a) < rank(b); });
        n->guards = std::move(plans);
    }

    const Structure& s_;
    const EvalOptions& opt_;
    std::vector<std::unique_ptr<Node>> nodes_;
    std::vector<Function> fns_;
    std::map<std::pair<std::string, std::vector<std::int64_t>>, int> lib_fns_;
};

// Interpreter ------------------------------------------------------------------------

class Interpreter {
public:
    Interpreter(const Structure& s, Program& prog, const EvalOptions& opt) : s_(s), prog_(prog), opt_(opt) {}

    std::uint64_t steps = 0;

    std::vector<Value> frame_for(int fn) const {
        std::vector<Value> frame;
        for (Sort so : prog_.fn(fn).slot_sorts) frame.push_back(Value{so, -1, {}});
        return frame;
    }

    bool run(const Node* n, std::vector<Value>& fr) { return eval(n, fr); }

    // Evaluate, recording values of the leading existential binders into `w`.
    bool run_with_witness(const Node* n, std::vector<Value>& fr, Assignment& w) {
        if (n->op != Op::Exists) return eval(n, fr);
        bool found = false;
        for_each_candidate(n, fr, [&](Value&) {
            Assignment inner;
            if (run_with_witness(n->kids[0], fr, inner)) {
                inner[n->var] = fr[static_cast<std::size_t>(n->slot)];
                w = std::move(inner);
                found = true;
                return true;
            }
            return false;
        });
        return found;
    }

private:
    void tick() {
        if (++steps > opt_.budget.max_steps) throw BudgetHit{};
    }

    std::size_t universe(Sort so) const {
        return static_cast<std::size_t>(so == Sort::Element || so == Sort::Set ? s_.size() : s_.edge_count());
    }

    // Calls visit(value) for each candidate value of the binder; stops when visit returns true.
    template <class Visit>
    void for_each_candidate(const Node* n, std::vector<Value>& fr, Visit&& visit) {
        Value& slot = fr[static_cast<std::size_t>(n->slot)];
        const std::size_t N = universe(n->sort);
        if (n->sort == Sort::Element || n->sort == Sort::Edge) {
            slot.sort = n->sort;
            if (n->elem_guard >= 0) {
                for (int x : fr[static_cast<std::size_t>(n->elem_guard)].set.elements()) {
                    slot.index = x;
                    if (visit(slot)) return;
                }
            } else {
                for (std::size_t x = 0; x < N; ++x) {
                    slot.index = static_cast<int>(x);
                    if (visit(slot)) return;
                }
            }
            return;
        }
        slot.sort = n->sort;
        auto emit_list = [&](std::vector<BitSet>& cands) {
            std::sort(cands.begin(), cands.end(), [](const BitSet& a, const BitSet& b) { return a.words() < b.words(); });
            cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
            for (auto& c : cands) {
                slot.set = std::move(c);
                if (visit(slot)) return;
            }
        };
        auto emit_subsets = [&](const BitSet& host) {
            const auto elems = host.elements();
            if (elems.size() >= 63 || (std::uint64_t{1} << elems.size()) > opt_.budget.max_raw_width) throw BudgetHit{};
            const std::uint64_t total = std::uint64_t{1} << elems.size();
            for (std::uint64_t mask = 0; mask < total; ++mask) {
                BitSet b(N);
                for (std::size_t i = 0; i < elems.size(); ++i)
                    if (mask >> i & 1) b.set(static_cast<std::size_t>(elems[i]));
                slot.set = std::move(b);
                if (visit(slot)) return;
            }
        };

        const GuardPlan* best_subset = nullptr;
        BitSet best_host;
        for (const GuardPlan& g : n->guards) {
            switch (g.type) {
                case GuardPlan::Empty: {
                    slot.set = BitSet(N);
                    visit(slot);
                    return;
                }
                case GuardPlan::Defined: {
                    BitSet b = member_set(g, fr, N);
                    slot.set = std::move(b);
                    visit(slot);
                    return;
                }
                case GuardPlan::EqualPartition: {
                    const BitSet& H = fr[static_cast<std::size_t>(g.host)].set;
                    const std::size_t m = fr[static_cast<std::size_t>(g.other)].set.count();
                    std::vector<BitSet> cands;
                    if (m == 0) {
                        cands.emplace_back(N);
                    } else {
                        BitSet even(N), odd(N);
                        std::size_t i = 0;
                        for (int x : s_.ordered()) {
                            if (!H.test(static_cast<std::size_t>(x))) continue;
                            ((i / m) % 2 == 0 ? even : odd).set(static_cast<std::size_t>(x));
                            ++i;
                        }
                        cands = {even, odd};
                    }
                    emit_list(cands);
                    return;
                }
                case GuardPlan::Registered: {
                    std::vector<const Value*> args;
                    for (std::size_t i = 0; i < g.call->args.size(); ++i)
                        args.push_back(static_cast<int>(i) == g.bound_pos ? nullptr
                                                                           : &fr[static_cast<std::size_t>(g.call->args[i])]);
                    auto cands = (*g.fn)(s_, g.call->params, args);
                    emit_list(cands);
                    return;
                }
                case GuardPlan::ConsecSub: {
                    const BitSet& H = fr[static_cast<std::size_t>(g.host)].set;
                    std::vector<int> seq;
                    for (int x : s_.ordered())
                        if (H.test(static_cast<std::size_t>(x))) seq.push_back(x);
                    std::vector<BitSet> cands{BitSet(N)};
                    intervals_of(seq, N, cands);
                    emit_list(cands);
                    return;
                }
                case GuardPlan::Subset: {
                    BitSet host = member_set(g, fr, N);
                    if (!best_subset || host.count() < best_host.count()) {
                        best_subset = &g;
                        best_host = std::move(host);
                    }
                    break;
                }
            }
        }
        if (best_subset) {
            emit_subsets(best_host);
            return;
        }
        emit_subsets(BitSet::full(N));
    }

    // {z : psi(z)} with the binder's element variable at slot g.z.
    BitSet member_set(const GuardPlan& g, std::vector<Value>& fr, std::size_t N) {
        BitSet b(N);
        Value& z = fr[static_cast<std::size_t>(g.z)];
        for (std::size_t x = 0; x < N; ++x) {
            z.index = static_cast<int>(x);
            if (eval(g.psi, fr)) b.set(x);
        }
        return b;
    }

    bool call(const Node* n, std::vector<Value>& fr) {
        std::string key;
        key.reserve(16 + n->args.size() * 16);
        key.append(reinterpret_cast<const char*>(&n->fn), sizeof(int));
        for (int a : n->args) {
            const Value& v = fr[static_cast<std::size_t>(a)];
            if (v.is_set()) {
                for (auto w : v.set.words()) key.append(reinterpret_cast<const char*>(&w), sizeof(w));
                key.push_back('|');
            } else {
                key.append(reinterpret_cast<const char*>(&v.index), sizeof(int));
                key.push_back('.');
            }
        }
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        const Function& callee = prog_.fn(n->fn);
        std::vector<Value> frame = frame_for(n->fn);
        for (std::size_t i = 0; i < n->args.size(); ++i)
            frame[static_cast<std::size_t>(callee.formals[i])] = fr[static_cast<std::size_t>(n->args[i])];
        const bool r = eval(callee.body, frame);
        if (memo_.size() > 4'000'000) memo_.clear();
        memo_.emplace(std::move(key), r);
        return r;
    }

    bool eval(const Node* n, std::vector<Value>& fr) {
        tick();
        auto idx = [&](int slot) { return fr[static_cast<std::size_t>(slot)].index; };
        switch (n->op) {
            case Op::True: return true;
            case Op::False: return false;
            case Op::And:
                for (const Node* k : n->kids)
                    if (!eval(k, fr)) return false;
                return true;
            case Op::Or:
                for (const Node* k : n->kids)
                    if (eval(k, fr)) return true;
                return false;
            case Op::Not: return !eval(n->kids[0], fr);
            case Op::Implies: return !eval(n->kids[0], fr) || eval(n->kids[1], fr);
            case Op::Iff: return eval(n->kids[0], fr) == eval(n->kids[1], fr);
            case Op::Prec: return s_.prec(idx(n->a), idx(n->b));
            case Op::Edge: return s_.edge(idx(n->a), idx(n->b));
            case Op::Child: return s_.child(idx(n->a), idx(n->b));
            case Op::Color: return s_.has_color(n->color, idx(n->a));
            case Op::In:
            case Op::InE: return fr[static_cast<std::size_t>(n->b)].set.test(static_cast<std::size_t>(idx(n->a)));
            case Op::Eq: return idx(n->a) == idx(n->b);
            case Op::Incident: return s_.incident(idx(n->a), idx(n->b));
            case Op::Exists: {
                bool found = false;
                for_each_candidate(n, fr, [&](Value&) { return found = eval(n->kids[0], fr); });
                return found;
            }
            case Op::Forall: {
                bool all = true;
                for_each_candidate(n, fr, [&](Value&) { return !(all = eval(n->kids[0], fr)); });
                return all;
            }
            case Op::Oracle: {
                std::vector<const Value*> args;
                for (int a : n->args) args.push_back(&fr[static_cast<std::size_t>(a)]);
                return (*n->oracle)(s_, n->params, args);
            }
            case Op::Call: return call(n, fr);
        }
        return false;
    }

    const Structure& s_;
    Program& prog_;
    const EvalOptions& opt_;
    std::unordered_map<std::string, bool> memo_;
};

void check_value(const Structure& s, const std::string& name, const Value& v, Sort want) {
    if (v.sort != want)
        throw SortError("assignment for " + name + " has sort " + to_string(v.sort) + ", expected " + to_string(want));
    const std::size_t n = static_cast<std::size_t>(s.size());
    const std::size_t m = static_cast<std::size_t>(s.edge_count());
    switch (want) {
        case Sort::Element:
            if (v.index < 0 || static_cast<std::size_t>(v.index) >= n) throw Error("value of " + name + " out of range");
            break;
        case Sort::Edge:
            if (v.index < 0 || static_cast<std::size_t>(v.index) >= m) throw Error("value of " + name + " out of range");
            break;
        case Sort::Set:
            if (v.set.size() != n) throw Error("set value of " + name + " has wrong universe size");
            break;
        case Sort::EdgeSet:
            if (v.set.size() != m) throw Error("edge-set value of " + name + " has wrong universe size");
            break;
    }
}

}  // namespace

EvalResult evaluate(const Structure& s, const FormulaPtr& f, const Assignment& a, const EvalOptions& opt) {
    std::vector<FreeVar> free = free_vars(*f, opt.libs);
    for (const auto& v : free) {
        auto it = a.find(v.name);
        if (it == a.end()) throw Error("missing assignment for free variable " + v.name);
        check_value(s, v.name, it->second, v.sort);
    }
    Program prog(s, opt);
    const int top = prog.compile_top(f, free);
    Interpreter in(s, prog, opt);
    std::vector<Value> frame = in.frame_for(top);
    for (std::size_t i = 0; i < free.size(); ++i) frame[i] = a.at(free[i].name);

    EvalResult r;
    try {
        if (opt.capture_witness) {
            Assignment w;
            const bool t = in.run_with_witness(prog.fn(top).body, frame, w);
            r.outcome = t ? Outcome::True : Outcome::False;
            if (t) r.witness = std::move(w);
        } else {
            r.outcome = in.run(prog.fn(top).body, frame) ? Outcome::True : Outcome::False;
        }
    } catch (const BudgetHit&) {
        r.outcome = Outcome::BudgetExceeded;
        r.witness.reset();
    }
    r.steps = in.steps;
    return r;
}

ModelsResult enumerate_models(const Structure& s, const FormulaPtr& f, const std::vector<FreeVar>& free,
                              const EvalOptions& opt) {
    for (const auto& v : free_vars(*f, opt.libs)) {
        bool listed = false;
        for (const auto& w : free) listed |= w.name == v.name;
        if (!listed) throw Error("missing assignment for free variable " + v.name);
    }
    ModelsResult out;
    const std::size_t n = static_cast<std::size_t>(s.size());
    const std::size_t m = static_cast<std::size_t>(s.edge_count());
    // Domain sizes and total candidate count.
    std::vector<std::uint64_t> dom;
    long double total = 1;
    for (const auto& v : free) {
        std::size_t u = (v.sort == Sort::Element || v.sort == Sort::Set) ? n : m;
        long double d = (v.sort == Sort::Element || v.sort == Sort::Edge) ? static_cast<long double>(u)
                                                                         : std::pow(2.0L, static_cast<long double>(u));
        total *= d;
        dom.push_back(d > 1e18L ? 0 : static_cast<std::uint64_t>(d));
    }
    if (total > static_cast<long double>(opt.budget.max_raw_width)) {
        out.outcome = Outcome::BudgetExceeded;
        return out;
    }
    if (total == 0) return out;

    Program prog(s, opt);
    const int top = prog.compile_top(f, free);
    Interpreter in(s, prog, opt);
    std::vector<Value> frame = in.frame_for(top);
    std::vector<std::uint64_t> digit(free.size(), 0);
    auto value_of = [&](std::size_t i) {
        const auto& v = free[i];
        switch (v.sort) {
            case Sort::Element: return Value::element(static_cast<int>(digit[i]));
            case Sort::Edge: return Value::edge(static_cast<int>(digit[i]));
            case Sort::Set:
            case Sort::EdgeSet: {
                BitSet b(v.sort == Sort::Set ? n : m);
                for (std::size_t k = 0; k < b.size(); ++k)
                    if (digit[i] >> k & 1) b.set(k);
                return Value{v.sort, -1, b};
            }
        }
        return Value{};
    };
    try {
        for (;;) {
            for (std::size_t i = 0; i < free.size(); ++i) frame[i] = value_of(i);
            if (in.run(prog.fn(top).body, frame)) {
                Assignment a;
                for (std::size_t i = 0; i < free.size(); ++i) a[free[i].name] = frame[i];
                out.models.push_back(std::move(a));
            }
            // Lexicographic over `free`: the last variable varies fastest.
            std::size_t i = free.size();
            while (i > 0) {
                --i;
                if (++digit[i] < dom[i]) break;
                digit[i] = 0;
                if (i == 0) {
                    out.steps = in.steps;
                    return out;
                }
            }
            if (free.empty()) break;
        }
    } catch (const BudgetHit&) {
        out.outcome = Outcome::BudgetExceeded;
    }
    out.steps = in.steps;
    return out;
}

std::vector<DerivedRelationTable> compute_eq_tables(const Structure& t, int maxK, const std::vector<std::string>& colors) {
    if (t.kind() != StructureKind::Tree) throw Error("eq tables require a rooted tree");
    const int n = t.size();
    std::vector<int> col_idx;
    if (colors.empty()) {
        for (std::size_t c = 0; c < t.color_names().size(); ++c) col_idx.push_back(static_cast<int>(c));
    } else {
        for (const auto& c : colors) col_idx.push_back(t.color_index(c));
    }
    std::vector<std::vector<char>> sig(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x)
        for (int c : col_idx) sig[static_cast<std::size_t>(x)].push_back(t.has_color(c, x) ? 1 : 0);
    auto samecols = [&](int x, int y) { return sig[static_cast<std::size_t>(x)] == sig[static_cast<std::size_t>(y)]; };

    std::vector<DerivedRelationTable> out;
    DerivedRelationTable eq0{"eq", 0, std::vector<BitSet>(static_cast<std::size_t>(n), BitSet(static_cast<std::size_t>(n)))};
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            if (samecols(x, y) && t.children(x).empty() && t.children(y).empty())
                eq0.rows[static_cast<std::size_t>(x)].set(static_cast<std::size_t>(y));
    out.push_back(std::move(eq0));
    for (int k = 1; k <= maxK; ++k) {
        const DerivedRelationTable& prev = out.back();
        DerivedRelationTable cur{"eq", k, std::vector<BitSet>(static_cast<std::size_t>(n), BitSet(static_cast<std::size_t>(n)))};
        auto covered = [&](int x, int y) {
            for (int u : t.children(x)) {
                bool ok = false;
                for (int v : t.children(y))
                    if (prev(u, v)) {
                        ok = true;
                        break;
                    }
                if (!ok) return false;
            }
            return true;
        };
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                if (samecols(x, y) && covered(x, y) && covered(y, x))
                    cur.rows[static_cast<std::size_t>(x)].set(static_cast<std::size_t>(y));
        out.push_back(std::move(cur));
    }
    return out;
}

}  // namespace msow
