#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "msow/formula.hpp"

namespace msow {

namespace {

struct SExpr {
    bool is_list = false;
    std::string atom;
    std::vector<SExpr> items;
    std::size_t pos = 0;
};

class Reader {
public:
    explicit Reader(std::string_view text) : text_(text) {}

    SExpr read_top() {
        skip();
        SExpr e = read();
        skip();
        if (i_ < text_.size()) throw ParseError("trailing input", i_);
        return e;
    }

private:
    void skip() {
        while (i_ < text_.size()) {
            char c = text_[i_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++i_;
            } else if (c == ';') {
                while (i_ < text_.size() && text_[i_] != '\n') ++i_;
            } else {
                break;
            }
        }
    }

    static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '='; }

    SExpr read() {
        skip();
        if (i_ >= text_.size()) throw ParseError("unexpected end of input", i_);
        SExpr e;
        e.pos = i_;
        if (text_[i_] == '(') {
            e.is_list = true;
            ++i_;
            for (;;) {
                skip();
                if (i_ >= text_.size()) throw ParseError("unbalanced parenthesis", e.pos);
                if (text_[i_] == ')') {
                    ++i_;
                    return e;
                }
                e.items.push_back(read());
            }
        }
        if (text_[i_] == ')') throw ParseError("unexpected ')'", i_);
        std::size_t start = i_;
        while (i_ < text_.size() && ident_char(text_[i_])) ++i_;
        if (start == i_) throw ParseError(std::string("unexpected character '") + text_[i_] + "'", i_);
        e.atom = std::string(text_.substr(start, i_ - start));
        if (e.atom != "=" && e.atom.find('=') != std::string::npos) throw ParseError("bad identifier " + e.atom, start);
        return e;
    }

    std::string_view text_;
    std::size_t i_ = 0;
};

bool is_number(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

// Collect sort hints for identifiers from their usage anywhere in the text.
void collect_hints(const SExpr& e, std::map<std::string, Sort>& hints) {
    if (!e.is_list || e.items.empty() || e.items[0].is_list) {
        for (const auto& k : e.items) collect_hints(k, hints);
        return;
    }
    const std::string& head = e.items[0].atom;
    auto hint = [&](std::size_t i, Sort s) {
        if (i < e.items.size() && !e.items[i].is_list) hints.emplace(e.items[i].atom, s);
    };
    if (head == "in") hint(2, Sort::Set);
    if (head == "subset") {
        hint(1, Sort::Set);
        hint(2, Sort::Set);
    }
    if (head == "incident") hint(2, Sort::Edge);
    if (head == "inE") {
        hint(1, Sort::Edge);
        hint(2, Sort::EdgeSet);
    }
    if (head == "existsSet" || head == "forallSet") hint(1, Sort::Set);
    if (head == "existsEdgeSet" || head == "forallEdgeSet") hint(1, Sort::EdgeSet);
    for (const auto& k : e.items) collect_hints(k, hints);
}

// True when `v` occurs free in an edge position in e.
bool used_as_edge(const SExpr& e, const std::string& v) {
    if (!e.is_list || e.items.empty()) return false;
    if (!e.items[0].is_list) {
        const std::string& head = e.items[0].atom;
        const bool binder = head == "exists1" || head == "forall1" || head == "existsSet" || head == "forallSet" ||
                            head == "existsEdgeSet" || head == "forallEdgeSet";
        if (binder && e.items.size() == 3 && !e.items[1].is_list && e.items[1].atom == v) return false;
        if (head == "incident" && e.items.size() == 3 && !e.items[2].is_list && e.items[2].atom == v) return true;
        if (head == "inE" && e.items.size() == 3 && !e.items[1].is_list && e.items[1].atom == v) return true;
    }
    for (const auto& k : e.items)
        if (used_as_edge(k, v)) return true;
    return false;
}

class Builder {
public:
    Builder(const Signature& sig, const LibRegistry* reg, std::map<std::string, Sort> hints)
        : sig_(sig), reg_(reg), hints_(std::move(hints)) {}

    FormulaPtr build(const SExpr& e) {
        if (!e.is_list) throw ParseError("expected '(' but found identifier " + e.atom, e.pos);
        if (e.items.empty() || e.items[0].is_list) throw ParseError("expected a keyword", e.pos);
        const std::string& head = e.items[0].atom;
        const std::size_t n = e.items.size();

        auto ident = [&](std::size_t i) -> const std::string& {
            if (i >= n || e.items[i].is_list) throw ParseError("expected identifier in " + head, e.pos);
            return e.items[i].atom;
        };
        auto want = [&](std::size_t count) {
            if (n != count) throw ParseError(head + " expects " + std::to_string(count - 1) + " operands", e.pos);
        };

        if (head == "exists1" || head == "forall1" || head == "existsSet" || head == "forallSet" ||
            head == "existsEdgeSet" || head == "forallEdgeSet") {
            want(3);
            const std::string& v = ident(1);
            Sort s = Sort::Element;
            if (head == "existsSet" || head == "forallSet") s = Sort::Set;
            if (head == "existsEdgeSet" || head == "forallEdgeSet") s = Sort::EdgeSet;
            if (s == Sort::Element && used_as_edge(e.items[2], v)) s = Sort::Edge;
            if ((s == Sort::EdgeSet || s == Sort::Edge) && !sig_.edge_sets)
                throw SortError("edge quantifier requires an MSO2 signature (variable " + v + ")");
            scope_.emplace_back(v, s);
            FormulaPtr body = build(e.items[2]);
            scope_.pop_back();
            const bool ex = head.rfind("exists", 0) == 0;
            return ex ? exists(s, v, body) : forall(s, v, body);
        }
        if (head == "and" || head == "or") {
            std::vector<FormulaPtr> kids;
            for (std::size_t i = 1; i < n; ++i) kids.push_back(build(e.items[i]));
            if (kids.empty()) throw ParseError(head + " needs at least one operand", e.pos);
            if (kids.size() == 1) return kids[0];
            return head == "and" ? conj(std::move(kids)) : disj(std::move(kids));
        }
        if (head == "not") {
            want(2);
            return neg(build(e.items[1]));
        }
        if (head == "implies" || head == "iff") {
            want(3);
            auto a = build(e.items[1]);
            auto b = build(e.items[2]);
            return head == "implies" ? implies(a, b) : iff(a, b);
        }
        if (head == "true" || head == "false") {
            want(1);
            return head == "true" ? make_true() : make_false();
        }
        if (head == "subset") {
            want(3);
            const std::string& a = ident(1);
            const std::string& b = ident(2);
            expect_sort(a, Sort::Set, e.pos);
            expect_sort(b, Sort::Set, e.pos);
            return subset_of(a, b, fresh());
        }
        if (head == "lib") {
            if (n < 2) throw ParseError("lib needs a name", e.pos);
            const std::string& name = ident(1);
            std::vector<std::int64_t> params;
            std::vector<std::string> args;
            std::size_t i = 2;
            if (reg_) {
                if (!reg_->contains(name)) throw UnknownPredicateError("unknown library predicate " + name);
                const int pc = reg_->def(name).param_count;
                for (int k = 0; k < pc; ++k, ++i) {
                    if (!is_number(ident(i))) throw ParseError("expected numeric parameter for " + name, e.pos);
                    params.push_back(std::stoll(ident(i)));
                }
                for (; i < n; ++i) args.push_back(ident(i));
                const LibBody& b = reg_->body(name, params);
                if (b.formals.size() != args.size())
                    throw SortError("library predicate " + name + " expects " + std::to_string(b.formals.size()) +
                                    " arguments");
                for (std::size_t k = 0; k < args.size(); ++k) expect_sort(args[k], b.sorts[k], e.pos);
            } else {
                while (i < n && is_number(ident(i))) params.push_back(std::stoll(ident(i++)));
                for (; i < n; ++i) args.push_back(ident(i));
            }
            return lib_call(name, std::move(params), std::move(args));
        }

        // Atoms.
        static const std::map<std::string, Pred> preds = {
            {"prec", Pred::Prec}, {"edge", Pred::Edge},         {"child", Pred::Child}, {"color", Pred::Color},
            {"in", Pred::In},     {"=", Pred::Eq},              {"incident", Pred::Incident},
            {"inE", Pred::InE}};
        auto it = preds.find(head);
        if (it == preds.end()) throw ParseError("unknown keyword " + head, e.pos);
        const Pred p = it->second;

        if (p == Pred::Eq) {
            want(3);
            const std::string& a = ident(1);
            const std::string& b = ident(2);
            const Sort sa = sort_of(a);
            const Sort sb = sort_of(b);
            if (sa != sb) throw SortError("= between " + a + " and " + b + " of different sorts");
            if (sa == Sort::Set) return set_equal(a, b, fresh());
            if (sa == Sort::EdgeSet) {
                std::string z = fresh();
                return forall(Sort::Edge, z, iff(atom(Pred::InE, {z, a}), atom(Pred::InE, {z, b})));
            }
            return eq(a, b);
        }
        if (!sig_.has(p)) throw UnknownPredicateError("predicate " + head + " is not in signature " + sig_.name);
        if (p == Pred::Color) {
            want(3);
            const std::string& c = ident(1);
            if (!sig_.colors.empty() && !sig_.has_color(c))
                throw UnknownPredicateError("color " + c + " is not in signature " + sig_.name);
            expect_sort(ident(2), Sort::Element, e.pos);
            return color_atom(c, ident(2));
        }
        want(3);
        const std::string& a = ident(1);
        const std::string& b = ident(2);
        switch (p) {
            case Pred::In:
                expect_sort(a, Sort::Element, e.pos);
                expect_sort(b, Sort::Set, e.pos);
                break;
            case Pred::Incident:
                expect_sort(a, Sort::Element, e.pos);
                expect_sort(b, Sort::Edge, e.pos);
                break;
            case Pred::InE:
                expect_sort(a, Sort::Edge, e.pos);
                expect_sort(b, Sort::EdgeSet, e.pos);
                break;
            default:
                expect_sort(a, Sort::Element, e.pos);
                expect_sort(b, Sort::Element, e.pos);
        }
        return atom(p, {a, b});
    }

    std::vector<FreeVar> free;

private:
    Sort sort_of(const std::string& v) {
        for (auto it = scope_.rbegin(); it != scope_.rend(); ++it)
            if (it->first == v) return it->second;
        for (const auto& fv : free)
            if (fv.name == v) return fv.sort;
        auto h = hints_.find(v);
        Sort s = h == hints_.end() ? Sort::Element : h->second;
        free.push_back({v, s});
        return s;
    }

    void expect_sort(const std::string& v, Sort s, std::size_t pos) {
        // An unseen free variable takes the sort of its first use.
        if (!hints_.count(v) && std::none_of(scope_.begin(), scope_.end(), [&](const auto& p) { return p.first == v; }) &&
            std::none_of(free.begin(), free.end(), [&](const FreeVar& fv) { return fv.name == v; })) {
            free.push_back({v, s});
            return;
        }
        Sort actual = sort_of(v);
        if (actual != s)
            throw SortError("variable " + v + " has sort " + to_string(actual) + " but " + to_string(s) +
                            " is required (offset " + std::to_string(pos) + ")");
    }

    std::string fresh() { return "z__d" + std::to_string(++counter_); }

    const Signature& sig_;
    const LibRegistry* reg_;
    std::map<std::string, Sort> hints_;
    std::vector<std::pair<std::string, Sort>> scope_;
    int counter_ = 0;
};

}  // namespace

ParseResult parse_formula(std::string_view text, const Signature& sig, const LibRegistry* registry) {
    Reader r(text);
    SExpr top = r.read_top();
    std::map<std::string, Sort> hints;
    collect_hints(top, hints);
    Builder b(sig, registry, std::move(hints));
    FormulaPtr f = b.build(top);
    return {f, b.free};
}

}  // namespace msow
