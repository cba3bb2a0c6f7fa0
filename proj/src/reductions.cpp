#include <fstream>

#include "msow/counting.hpp"
#include "reductions_internal.hpp"

namespace msow {

using namespace detail;

F detail::rebuild(const Formula& f, std::vector<F> kids) {
    switch (f.kind) {
        case Kind::And: return conj(std::move(kids));
        case Kind::Or: return disj(std::move(kids));
        case Kind::Not: return neg(kids.at(0));
        case Kind::Implies: return implies(kids.at(0), kids.at(1));
        case Kind::Iff: return iff(kids.at(0), kids.at(1));
        case Kind::Exists: return exists(f.sort, f.var, kids.at(0));
        case Kind::Forall: return forall(f.sort, f.var, kids.at(0));
        default: throw Error("rebuild: not a connective");
    }
}

const LibRegistry& reduction_registry() {
    static const LibRegistry reg = [] {
        LibRegistry r;
        const LibRegistry& c = counting_registry();
        for (const auto& name : c.names()) r.add(c.def(name));
        r.add({"tunion", 0, [](std::span<const std::int64_t>) { return tunion_body(); }});
        r.add({"tmain", 0, [](std::span<const std::int64_t>) { return tmain_body(); }});
        r.add({"tprec", 0, [](std::span<const std::int64_t>) { return tprec_body(); }});
        r.add({"tone", 0, [](std::span<const std::int64_t>) { return tone_body(); }});
        r.add({"treeeq", 2, [](std::span<const std::int64_t> p) { return treeeq_body(p[0], p[1]); }});
        r.add({"lit", 4, [](std::span<const std::int64_t> p) { return lit_body(p[0], p[1], p[2], p[3]); }});
        r.add({"pm", 0, [](std::span<const std::int64_t>) { return pm_body(); }});
        r.add({"ceq", 0, [](std::span<const std::int64_t>) { return ceq_body(); }});
        r.add({"ccycle", 0, [](std::span<const std::int64_t>) { return ccycle_body(); }});
        r.add({"cprec", 0, [](std::span<const std::int64_t>) { return cprec_body(); }});
        return r;
    }();
    return reg;
}

void write_artifact(const ReductionArtifact& a, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto put = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw Error("cannot write " + (dir / name).string());
        out << text << '\n';
    };
    put("structure.json", to_json(a.structure).dump(2));
    put("formula.mso", pretty(*a.formula));
    nlohmann::json layout = a.layout;
    layout["kind"] = a.kind;
    put("layout.json", layout.dump(2));
    if (a.witness) put("witness.json", a.witness->dump(2));
}

// Cliques --------------------------------------------------------------------------

namespace detail {

namespace {

F inE(const std::string& e, const std::string& S) { return atom(Pred::InE, {e, S}); }
F inc(const std::string& x, const std::string& e) { return atom(Pred::Incident, {x, e}); }
F ex_edge(const std::string& e, F b) { return exists(Sort::Edge, e, std::move(b)); }
F all_edge(const std::string& e, F b) { return forall(Sort::Edge, e, std::move(b)); }

// Some edge of G has exactly one endpoint in Z.
F crosses(const std::string& G, const std::string& Z) {
    return ex_edge("g", And({inE("g", G), exists1("a", exists1("b", And({inc("a", "g"), inc("b", "g"), in("a", Z),
                                                                          Not(in("b", Z))})))}));
}

}  // namespace

LibBody pm_body() {
    F cover = forall1("x", Imp(Or({in("x", "S1"), in("x", "S2")}),
                               ex_edge("e", And({inE("e", "F"), inc("x", "e"),
                                                 all_edge("f", Imp(And({inE("f", "F"), inc("x", "f")}), eq("e", "f")))}))));
    F across = all_edge("e", Imp(inE("e", "F"), exists1("x", exists1("y", And({in("x", "S1"), in("y", "S2"), inc("x", "e"),
                                                                               inc("y", "e")})))));
    return {{"S1", "S2"}, {Sort::Set, Sort::Set}, exists(Sort::EdgeSet, "F", And({cover, across}))};
}

LibBody ceq_body() {
    return {{"P1", "P2"},
            {Sort::Set, Sort::Set},
            exists_set("D1", exists_set("D2", And({is_difference("D1", "P1", "P2", "z"), is_difference("D2", "P2", "P1", "z"),
                                                   Lib("pm", {}, {"D1", "D2"})})))};
}

LibBody ccycle_body() {
    F two = forall1("x", ex_edge("e1", ex_edge("e2", And({inE("e1", "F"), inE("e2", "F"), Not(eq("e1", "e2")), inc("x", "e1"),
                                                          inc("x", "e2"),
                                                          all_edge("e3", Imp(And({inE("e3", "F"), inc("x", "e3")}),
                                                                             Or({eq("e3", "e1"), eq("e3", "e2")})))}))));
    F connected = forall_set("X", Imp(And({exists1("a", in("a", "X")), exists1("b", Not(in("b", "X")))}), crosses("F", "X")));
    return {{"F"}, {Sort::EdgeSet}, And({two, connected})};
}

LibBody cprec_body() {
    // G inside F - e joins s to y when every vertex set separating them is crossed.
    F conn = forall_set("Z", Imp(And({in("s", "Z"), Not(in("y", "Z"))}), crosses("G", "Z")));
    F body = And({Not(eq("x", "y")),
                  forall(Sort::EdgeSet, "G",
                         Imp(And({all_edge("h", Imp(inE("h", "G"), And({inE("h", "F"), Not(eq("h", "e"))}))), conn}),
                             ex_edge("h", And({inE("h", "G"), inc("x", "h")}))))});
    return {{"x", "y", "F", "e", "s"}, {Sort::Element, Sort::Element, Sort::EdgeSet, Sort::Edge, Sort::Element}, body};
}

}  // namespace detail

CliqueFormulas gen_clique_mso2() {
    return {Lib("pm", {}, {"S1", "S2"}), Lib("ceq", {}, {"P1", "P2"}), Lib("ccycle", {}, {"F"}),
            Lib("cprec", {}, {"x", "y", "F", "e", "s"})};
}

}  // namespace msow
