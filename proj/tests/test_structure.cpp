#include <doctest.h>

#include <random>

#include "msow/structure.hpp"

using namespace msow;

TEST_CASE("word structure") {
    Structure w = build_structure(StructureDescriptor::word("0110"));
    CHECK(w.size() == 4);
    CHECK(w.prec(0, 3));
    CHECK_FALSE(w.prec(2, 1));
    const int one = w.color_index("1");
    CHECK(w.has_color(one, 1));
    CHECK_FALSE(w.has_color(one, 0));
    CHECK_THROWS_AS(build_structure(StructureDescriptor::word("012")), Error);
}

TEST_CASE("unary limit") {
    CHECK(build_structure(StructureDescriptor::unary(5)).size() == 5);
    BigInt big = BigInt(1) << 70;
    CHECK_THROWS_AS(build_structure(StructureDescriptor::unary(big)), Error);
    auto j = to_json(StructureDescriptor::unary(big));
    CHECK(descriptor_from_json(j).length == big);
}

TEST_CASE("threshold adjacency") {
    Structure t = build_structure(StructureDescriptor::threshold("uuj"));
    CHECK_FALSE(t.edge(0, 1));
    CHECK(t.edge(0, 2));
    CHECK(t.edge(2, 1));
    CHECK(t.edge_count() == 2);
    CHECK_THROWS_AS(build_structure(StructureDescriptor::threshold("uxj")), Error);
    CHECK_THROWS_AS(build_structure(StructureDescriptor::threshold("")), Error);
}

TEST_CASE("threshold adjacency matches definition on random strings") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::string c;
        const int n = 1 + static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) c += (rng() & 1) ? 'j' : 'u';
        Structure t = build_structure(StructureDescriptor::threshold(c));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                // vertex max(i,j) was created adjacent to everything earlier iff it is a join
                bool expect = i != j && c[static_cast<std::size_t>(std::max(i, j))] == 'j';
                CHECK(t.edge(i, j) == expect);
            }
    }
}

TEST_CASE("tree preorder and colors") {
    TreeNode leaf1{{"a"}, {}};
    TreeNode leaf2{{"b", "a"}, {}};
    TreeNode mid{{}, {leaf2}};
    TreeNode root{{"r"}, {leaf1, mid}};
    Structure t = build_structure(StructureDescriptor::tree(root));
    CHECK(t.size() == 4);
    CHECK(t.child(1, 0));
    CHECK(t.child(2, 0));
    CHECK(t.child(3, 2));
    CHECK(t.height() == 2);
    CHECK(t.colors_of(3) == std::vector<std::string>{"a", "b"});
    auto j = to_json(StructureDescriptor::tree(root));
    Structure t2 = build_structure(descriptor_from_json(j));
    CHECK(t2.size() == 4);
    CHECK(t2.child(3, 2));
}

TEST_CASE("path order matches the every-path definition") {
    // Oracle: x precedes y iff removing x disconnects the endpoint from y.
    for (int n = 1; n <= 7; ++n) {
        Structure p = build_structure(StructureDescriptor::path(n));
        for (int s : {0, n - 1}) {
            auto order = derive_path_order(p, s);
            std::vector<int> rank(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i;
            for (int x = 0; x < n; ++x)
                for (int y = 0; y < n; ++y) {
                    if (x == y) continue;
                    bool on_every = true;
                    if (x != s) {
                        std::vector<char> seen(static_cast<std::size_t>(n), 0);
                        std::vector<int> st{s};
                        seen[static_cast<std::size_t>(s)] = 1;
                        while (!st.empty()) {
                            int u = st.back();
                            st.pop_back();
                            for (int v = 0; v < n; ++v)
                                if (v != x && !seen[static_cast<std::size_t>(v)] && p.edge(u, v)) {
                                    seen[static_cast<std::size_t>(v)] = 1;
                                    st.push_back(v);
                                }
                        }
                        on_every = !seen[static_cast<std::size_t>(y)];
                    }
                    CHECK((rank[static_cast<std::size_t>(x)] < rank[static_cast<std::size_t>(y)]) == on_every);
                }
        }
    }
    Structure p = build_structure(StructureDescriptor::path(4));
    CHECK_THROWS_AS(derive_path_order(p, 1), Error);
    Structure k = build_structure(StructureDescriptor::clique(4));
    CHECK_THROWS_AS(derive_path_order(k, 0), Error);
}

TEST_CASE("clique edges and stats") {
    Structure k = build_structure(StructureDescriptor::clique(5));
    CHECK(k.edge_count() == 10);
    CHECK(k.edge_index(3, 1) == k.edge_index(1, 3));
    CHECK(k.incident(1, k.edge_index(1, 3)));
    auto st = structure_stats(k);
    CHECK(st.min_degree == 4);
    CHECK(st.max_degree == 4);
    CHECK(build_structure(StructureDescriptor::clique(0)).size() == 0);
    CHECK_THROWS_AS(build_structure(StructureDescriptor::clique(200000)), Error);
}
