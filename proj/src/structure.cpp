#include "msow/structure.hpp"

#include <algorithm>
#include <queue>
#include <set>

namespace msow {

const char* to_string(StructureKind k) {
    switch (k) {
        case StructureKind::Word: return "word";
        case StructureKind::Unary: return "unary";
        case StructureKind::Path: return "path";
        case StructureKind::Threshold: return "threshold";
        case StructureKind::Tree: return "tree";
        case StructureKind::Clique: return "clique";
        case StructureKind::Graph: return "graph";
    }
    return "?";
}

// Descriptors -------------------------------------------------------------------

StructureDescriptor StructureDescriptor::word(std::string letters) {
    StructureDescriptor d;
    d.kind = StructureKind::Word;
    d.letters = std::move(letters);
    return d;
}
StructureDescriptor StructureDescriptor::unary(BigInt length) {
    StructureDescriptor d;
    d.kind = StructureKind::Unary;
    d.length = std::move(length);
    return d;
}
StructureDescriptor StructureDescriptor::path(std::int64_t n, std::string letters) {
    StructureDescriptor d;
    d.kind = StructureKind::Path;
    d.n = n;
    d.letters = std::move(letters);
    return d;
}
StructureDescriptor StructureDescriptor::threshold(std::string creation) {
    StructureDescriptor d;
    d.kind = StructureKind::Threshold;
    d.creation = std::move(creation);
    return d;
}
StructureDescriptor StructureDescriptor::tree(TreeNode root) {
    StructureDescriptor d;
    d.kind = StructureKind::Tree;
    d.root = std::move(root);
    return d;
}
StructureDescriptor StructureDescriptor::clique(std::int64_t n) {
    StructureDescriptor d;
    d.kind = StructureKind::Clique;
    d.n = n;
    return d;
}
StructureDescriptor StructureDescriptor::graph(std::int64_t n, std::vector<std::pair<int, int>> edges) {
    StructureDescriptor d;
    d.kind = StructureKind::Graph;
    d.n = n;
    d.edges = std::move(edges);
    return d;
}

namespace {

nlohmann::json tree_to_json(const TreeNode& t) {
    nlohmann::json children = nlohmann::json::array();
    for (const auto& c : t.children) children.push_back(tree_to_json(c));
    return {{"colors", t.colors}, {"children", children}};
}

TreeNode tree_from_json(const nlohmann::json& j) {
    TreeNode t;
    if (j.contains("colors")) t.colors = j.at("colors").get<std::vector<std::string>>();
    if (j.contains("children"))
        for (const auto& c : j.at("children")) t.children.push_back(tree_from_json(c));
    return t;
}

}  // namespace

nlohmann::json to_json(const StructureDescriptor& d) {
    switch (d.kind) {
        case StructureKind::Word: return {{"kind", "word"}, {"letters", d.letters}};
        case StructureKind::Unary: return {{"kind", "unary"}, {"length", d.length.str()}};
        case StructureKind::Path: {
            nlohmann::json j = {{"kind", "path"}, {"n", d.n}};
            if (!d.letters.empty()) j["letters"] = d.letters;
            return j;
        }
        case StructureKind::Threshold: return {{"kind", "threshold"}, {"creation", d.creation}};
        case StructureKind::Tree: return {{"kind", "tree"}, {"root", tree_to_json(d.root)}};
        case StructureKind::Clique: return {{"kind", "clique"}, {"n", d.n}};
        case StructureKind::Graph: {
            nlohmann::json edges = nlohmann::json::array();
            for (auto [a, b] : d.edges) edges.push_back({a, b});
            return {{"kind", "graph"}, {"n", d.n}, {"edges", edges}};
        }
    }
    return {};
}

StructureDescriptor descriptor_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "word") return StructureDescriptor::word(j.at("letters").get<std::string>());
    if (kind == "unary") {
        const auto& len = j.at("length");
        std::string s = len.is_string() ? len.get<std::string>() : std::to_string(len.get<std::int64_t>());
        if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
            throw Error("unary length must be a decimal string");
        return StructureDescriptor::unary(BigInt(s));
    }
    if (kind == "path") return StructureDescriptor::path(j.at("n").get<std::int64_t>(), j.value("letters", std::string{}));
    if (kind == "threshold") return StructureDescriptor::threshold(j.at("creation").get<std::string>());
    if (kind == "tree") return StructureDescriptor::tree(tree_from_json(j.at("root")));
    if (kind == "clique") return StructureDescriptor::clique(j.at("n").get<std::int64_t>());
    if (kind == "graph") {
        std::vector<std::pair<int, int>> edges;
        for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
        return StructureDescriptor::graph(j.at("n").get<std::int64_t>(), std::move(edges));
    }
    throw Error("unknown structure kind " + kind);
}

// Structure ---------------------------------------------------------------------

bool Structure::edge(int x, int y) const {
    if (x == y) return false;
    switch (kind_) {
        case StructureKind::Threshold: return creation_[static_cast<std::size_t>(std::max(x, y))] == 'j';
        case StructureKind::Clique: return true;
        case StructureKind::Tree: return child(x, y) || child(y, x);
        case StructureKind::Path:
        case StructureKind::Graph: return adjacency_[static_cast<std::size_t>(x)].test(static_cast<std::size_t>(y));
        default: return false;
    }
}

int Structure::color_index(const std::string& name) const {
    for (std::size_t i = 0; i < color_names_.size(); ++i)
        if (color_names_[i] == name) return static_cast<int>(i);
    return -1;
}

std::vector<std::string> Structure::colors_of(int x) const {
    std::vector<std::string> out;
    for (std::size_t c = 0; c < color_names_.size(); ++c)
        if (color_members_[c].test(static_cast<std::size_t>(x))) out.push_back(color_names_[c]);
    return out;
}

int Structure::edge_index(int u, int v) const {
    if (u > v) std::swap(u, v);
    auto it = std::lower_bound(edge_list_.begin(), edge_list_.end(), std::make_pair(u, v));
    if (it == edge_list_.end() || *it != std::make_pair(u, v)) return -1;
    return static_cast<int>(it - edge_list_.begin());
}

int Structure::height() const {
    if (kind_ != StructureKind::Tree || n_ == 0) return -1;
    // Children have larger preorder indices than parents.
    std::vector<int> h(static_cast<std::size_t>(n_), 0);
    for (int x = n_ - 1; x >= 0; --x)
        for (int c : children_[static_cast<std::size_t>(x)])
            h[static_cast<std::size_t>(x)] = std::max(h[static_cast<std::size_t>(x)], h[static_cast<std::size_t>(c)] + 1);
    return h[static_cast<std::size_t>(root_)];
}

int Structure::degree(int x) const {
    switch (kind_) {
        case StructureKind::Threshold: {
            if (creation_[static_cast<std::size_t>(x)] == 'j') return n_ - 1;
            int d = 0;
            for (int y = x + 1; y < n_; ++y) d += creation_[static_cast<std::size_t>(y)] == 'j';
            return d;
        }
        case StructureKind::Clique: return n_ - 1;
        case StructureKind::Tree:
            return static_cast<int>(children_[static_cast<std::size_t>(x)].size()) + (parent_[static_cast<std::size_t>(x)] >= 0);
        case StructureKind::Path:
        case StructureKind::Graph: return static_cast<int>(adjacency_[static_cast<std::size_t>(x)].count());
        default: return 0;
    }
}

Signature Structure::signature() const {
    Signature s;
    switch (kind_) {
        case StructureKind::Word: s = Signature::word(); break;
        case StructureKind::Unary: s = Signature::unary(); break;
        case StructureKind::Path: s = Signature::path(); break;
        case StructureKind::Threshold: s = Signature::threshold(); break;
        case StructureKind::Tree: s = Signature::tree({}); break;
        case StructureKind::Clique: s = Signature::clique(); break;
        case StructureKind::Graph: s = Signature::clique(); s.name = "graph"; break;
    }
    s.colors = color_names_;
    if (!color_names_.empty() && !s.has(Pred::Color)) s.predicates.push_back(Pred::Color);
    if (has_order() && !s.has(Pred::Prec)) s.predicates.push_back(Pred::Prec);
    return s;
}

Structure Structure::with_order(const std::vector<int>& ordered) const {
    if (static_cast<int>(ordered.size()) != n_) throw Error("order must list every element exactly once");
    Structure s = *this;
    s.ordered_ = ordered;
    s.has_order_ = true;
    s.rank_.assign(static_cast<std::size_t>(n_), -1);
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        const int x = ordered[i];
        if (x < 0 || x >= n_ || s.rank_[static_cast<std::size_t>(x)] != -1) throw Error("order is not a permutation");
        s.rank_[static_cast<std::size_t>(x)] = static_cast<int>(i);
    }
    return s;
}

Structure Structure::with_color(const std::string& name, const BitSet& members) const {
    Structure s = *this;
    int idx = s.color_index(name);
    if (idx < 0) {
        s.color_names_.push_back(name);
        s.color_members_.push_back(members);
    } else {
        s.color_members_[static_cast<std::size_t>(idx)] = members;
    }
    return s;
}

void Structure::finalize_edges() {
    edge_list_.clear();
    if (kind_ == StructureKind::Word || kind_ == StructureKind::Unary) return;
    for (int u = 0; u < n_; ++u)
        for (int v = u + 1; v < n_; ++v)
            if (edge(u, v)) edge_list_.emplace_back(u, v);
}

namespace {

void identity_order(std::vector<int>& rank, std::vector<int>& ordered, int n, bool& flag) {
    flag = true;
    rank.resize(static_cast<std::size_t>(n));
    ordered.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) rank[static_cast<std::size_t>(i)] = ordered[static_cast<std::size_t>(i)] = i;
}

void check_limit(std::int64_t n, std::int64_t limit) {
    if (n < 0) throw Error("structure size must be non-negative");
    if (n > limit)
        throw Error("structure of size " + std::to_string(n) + " exceeds materialization limit " + std::to_string(limit));
}

void letters_to_color(const std::string& letters, std::vector<std::string>& names, std::vector<BitSet>& members) {
    BitSet ones(letters.size());
    for (std::size_t i = 0; i < letters.size(); ++i) {
        if (letters[i] != '0' && letters[i] != '1') throw Error("word letters must be 0 or 1");
        ones.set(i, letters[i] == '1');
    }
    names = {"1"};
    members = {ones};
}

}  // namespace

Structure build_structure(const StructureDescriptor& d, std::int64_t limit) {
    Structure s;
    s.kind_ = d.kind;
    switch (d.kind) {
        case StructureKind::Word: {
            check_limit(static_cast<std::int64_t>(d.letters.size()), limit);
            s.n_ = static_cast<int>(d.letters.size());
            identity_order(s.rank_, s.ordered_, s.n_, s.has_order_);
            letters_to_color(d.letters, s.color_names_, s.color_members_);
            break;
        }
        case StructureKind::Unary: {
            if (d.length < 0 || d.length > limit)
                throw Error("unary length " + d.length.str() + " exceeds materialization limit " + std::to_string(limit));
            s.n_ = d.length.convert_to<int>();
            identity_order(s.rank_, s.ordered_, s.n_, s.has_order_);
            break;
        }
        case StructureKind::Path: {
            check_limit(d.n, limit);
            s.n_ = static_cast<int>(d.n);
            s.adjacency_.assign(static_cast<std::size_t>(s.n_), BitSet(static_cast<std::size_t>(s.n_)));
            for (int i = 0; i + 1 < s.n_; ++i) {
                s.adjacency_[static_cast<std::size_t>(i)].set(static_cast<std::size_t>(i + 1));
                s.adjacency_[static_cast<std::size_t>(i + 1)].set(static_cast<std::size_t>(i));
            }
            if (!d.letters.empty()) {
                if (static_cast<std::int64_t>(d.letters.size()) != d.n) throw Error("path letters must match n");
                letters_to_color(d.letters, s.color_names_, s.color_members_);
            }
            break;
        }
        case StructureKind::Threshold: {
            if (d.creation.empty()) throw Error("threshold creation string must be nonempty");
            for (char c : d.creation)
                if (c != 'u' && c != 'j') throw Error("threshold creation string must be over {u,j}");
            check_limit(static_cast<std::int64_t>(d.creation.size()), limit);
            s.n_ = static_cast<int>(d.creation.size());
            s.creation_ = d.creation;
            identity_order(s.rank_, s.ordered_, s.n_, s.has_order_);
            break;
        }
        case StructureKind::Tree: {
            // Preorder numbering; colors in first-appearance order.
            std::vector<const TreeNode*> stack{&d.root};
            std::vector<int> parent_stack{-1};
            std::vector<std::vector<std::string>> node_colors;
            while (!stack.empty()) {
                const TreeNode* t = stack.back();
                const int p = parent_stack.back();
                stack.pop_back();
                parent_stack.pop_back();
                const int id = static_cast<int>(s.parent_.size());
                check_limit(id + 1, limit);
                s.parent_.push_back(p);
                s.children_.emplace_back();
                if (p >= 0) s.children_[static_cast<std::size_t>(p)].push_back(id);
                node_colors.push_back(t->colors);
                for (auto it = t->children.rbegin(); it != t->children.rend(); ++it) {
                    stack.push_back(&*it);
                    parent_stack.push_back(id);
                }
            }
            s.n_ = static_cast<int>(s.parent_.size());
            s.root_ = 0;
            for (int x = 0; x < s.n_; ++x) {
                std::set<std::string> seen;
                for (const auto& c : node_colors[static_cast<std::size_t>(x)]) {
                    if (!seen.insert(c).second) throw Error("duplicate color " + c + " on a tree node");
                    int idx = s.color_index(c);
                    if (idx < 0) {
                        s.color_names_.push_back(c);
                        s.color_members_.emplace_back(static_cast<std::size_t>(s.n_));
                        idx = static_cast<int>(s.color_names_.size()) - 1;
                    }
                    s.color_members_[static_cast<std::size_t>(idx)].set(static_cast<std::size_t>(x));
                }
            }
            break;
        }
        case StructureKind::Clique: {
            check_limit(d.n, limit);
            s.n_ = static_cast<int>(d.n);
            break;
        }
        case StructureKind::Graph: {
            check_limit(d.n, limit);
            s.n_ = static_cast<int>(d.n);
            s.adjacency_.assign(static_cast<std::size_t>(s.n_), BitSet(static_cast<std::size_t>(s.n_)));
            for (auto [a, b] : d.edges) {
                if (a < 0 || b < 0 || a >= s.n_ || b >= s.n_ || a == b) throw Error("bad graph edge");
                s.adjacency_[static_cast<std::size_t>(a)].set(static_cast<std::size_t>(b));
                s.adjacency_[static_cast<std::size_t>(b)].set(static_cast<std::size_t>(a));
            }
            break;
        }
    }
    s.finalize_edges();
    return s;
}

std::vector<int> derive_path_order(const Structure& p, int endpoint) {
    const int n = p.size();
    if (n == 0) throw Error("empty structure is not a path");
    int edges = 0;
    for (int x = 0; x < n; ++x) {
        const int d = p.degree(x);
        if (d > 2) throw Error("structure is not a path (degree > 2)");
        edges += d;
    }
    if (edges / 2 != n - 1) throw Error("structure is not a path (edge count)");
    if (endpoint < 0 || endpoint >= n || p.degree(endpoint) > 1) throw Error("vertex is not a path endpoint");
    std::vector<int> order{endpoint};
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    seen[static_cast<std::size_t>(endpoint)] = 1;
    int cur = endpoint;
    while (static_cast<int>(order.size()) < n) {
        int next = -1;
        for (int y = 0; y < n; ++y)
            if (!seen[static_cast<std::size_t>(y)] && p.edge(cur, y)) {
                next = y;
                break;
            }
        if (next < 0) throw Error("structure is not a path (disconnected)");
        seen[static_cast<std::size_t>(next)] = 1;
        order.push_back(next);
        cur = next;
    }
    return order;
}

StructureStats structure_stats(const Structure& s) {
    StructureStats st;
    st.n = s.size();
    st.edges = s.edge_count();
    st.height = s.height();
    if (s.kind() == StructureKind::Word || s.kind() == StructureKind::Unary || st.n == 0) {
        st.degree_histogram = {st.n};
        return st;
    }
    st.min_degree = st.n;
    for (int x = 0; x < st.n; ++x) {
        const int d = s.degree(x);
        st.min_degree = std::min(st.min_degree, d);
        st.max_degree = std::max(st.max_degree, d);
        if (static_cast<int>(st.degree_histogram.size()) <= d) st.degree_histogram.resize(static_cast<std::size_t>(d) + 1, 0);
        ++st.degree_histogram[static_cast<std::size_t>(d)];
    }
    return st;
}

nlohmann::json to_json(const StructureStats& s) {
    return {{"n", s.n},
            {"edges", s.edges},
            {"height", s.height},
            {"min_degree", s.min_degree},
            {"max_degree", s.max_degree},
            {"degree_histogram", s.degree_histogram}};
}

}  // namespace msow
