#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "msow/bitset.hpp"
#include "msow/formula.hpp"

namespace msow {

using BigInt = boost::multiprecision::cpp_int;

enum class StructureKind { Word, Unary, Path, Threshold, Tree, Clique, Graph };

const char* to_string(StructureKind k);

struct TreeNode {
    std::vector<std::string> colors;
    std::vector<TreeNode> children;
};

/// JSON-serializable description of a structure. Only the fields relevant to
/// `kind` are meaningful. Unary lengths are arbitrary precision.
struct StructureDescriptor {
    StructureKind kind = StructureKind::Word;
    std::string letters;                       // word; optional letters for path
    BigInt length = 0;                         // unary
    std::int64_t n = 0;                        // path, clique, graph
    std::string creation;                      // threshold
    TreeNode root;                             // tree
    std::vector<std::pair<int, int>> edges;    // graph

    static StructureDescriptor word(std::string letters);
    static StructureDescriptor unary(BigInt length);
    static StructureDescriptor path(std::int64_t n, std::string letters = {});
    static StructureDescriptor threshold(std::string creation);
    static StructureDescriptor tree(TreeNode root);
    static StructureDescriptor clique(std::int64_t n);
    static StructureDescriptor graph(std::int64_t n, std::vector<std::pair<int, int>> edges);
};

nlohmann::json to_json(const StructureDescriptor& d);
StructureDescriptor descriptor_from_json(const nlohmann::json& j);

inline constexpr std::int64_t kDefaultMaterializeLimit = 100000;

/// Finite relational structure over the universe {0, ..., n-1}. Immutable after
/// construction.
class Structure {
public:
    StructureKind kind() const { return kind_; }
    int size() const { return n_; }

    bool has_order() const { return has_order_; }
    bool prec(int x, int y) const { return rank_[static_cast<std::size_t>(x)] < rank_[static_cast<std::size_t>(y)]; }
    /// Position of element x in the order.
    int rank(int x) const { return rank_[static_cast<std::size_t>(x)]; }
    /// Elements listed in order.
    const std::vector<int>& ordered() const { return ordered_; }

    bool edge(int x, int y) const;
    bool child(int x, int y) const { return parent_.size() && parent_[static_cast<std::size_t>(x)] == y; }
    int parent(int x) const { return parent_[static_cast<std::size_t>(x)]; }
    const std::vector<int>& children(int x) const { return children_[static_cast<std::size_t>(x)]; }

    /// Index of a color name, or -1.
    int color_index(const std::string& name) const;
    bool has_color(int color, int x) const {
        return color >= 0 && color_members_[static_cast<std::size_t>(color)].test(static_cast<std::size_t>(x));
    }
    const std::vector<std::string>& color_names() const { return color_names_; }
    /// Colors of x, in roster order.
    std::vector<std::string> colors_of(int x) const;

    /// Edge universe (for MSO2): edges {u,v} with u < v, lexicographic.
    const std::vector<std::pair<int, int>>& edge_list() const { return edge_list_; }
    int edge_count() const { return static_cast<int>(edge_list_.size()); }
    bool incident(int v, int e) const {
        const auto& [a, b] = edge_list_[static_cast<std::size_t>(e)];
        return v == a || v == b;
    }
    int edge_index(int u, int v) const;

    const std::string& creation() const { return creation_; }
    int root() const { return root_; }
    /// Tree height (single vertex = 0); -1 for non-trees.
    int height() const;
    int degree(int x) const;

    Signature signature() const;

    /// Replace the order relation (e.g. with a derived path order).
    Structure with_order(const std::vector<int>& ordered) const;
    /// Attach or replace a color.
    Structure with_color(const std::string& name, const BitSet& members) const;

    friend Structure build_structure(const StructureDescriptor& d, std::int64_t limit);

private:
    void finalize_edges();

    StructureKind kind_ = StructureKind::Word;
    int n_ = 0;
    std::vector<int> rank_;
    std::vector<int> ordered_;
    std::vector<int> parent_;
    std::vector<std::vector<int>> children_;
    std::vector<std::string> color_names_;
    std::vector<BitSet> color_members_;
    std::string creation_;
    std::vector<BitSet> adjacency_;  // explicit adjacency for graphs and paths
    std::vector<std::pair<int, int>> edge_list_;
    int root_ = -1;
    bool has_order_ = false;
};

/// Materialize a descriptor. Throws when the size exceeds `limit` or the
/// payload is malformed.
Structure build_structure(const StructureDescriptor& d, std::int64_t limit = kDefaultMaterializeLimit);

/// Order on a path where x precedes y iff x lies on every path from `endpoint`
/// to y. Returns the vertices listed in that order.
std::vector<int> derive_path_order(const Structure& p, int endpoint);

struct StructureStats {
    int n = 0;
    int edges = 0;
    int height = -1;
    int min_degree = 0;
    int max_degree = 0;
    std::vector<int> degree_histogram;  // index = degree
};

StructureStats structure_stats(const Structure& s);
nlohmann::json to_json(const StructureStats& s);

}  // namespace msow
