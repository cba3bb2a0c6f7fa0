#include "msow/automata.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace msow {

namespace {

constexpr int kMaxTracks = 24;
constexpr std::uint64_t kDead = ~std::uint64_t{0};

struct VecHash {
    std::size_t operator()(const std::vector<std::uint32_t>& v) const {
        std::size_t h = v.size();
        for (auto x : v) h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return h;
    }
};

void check_caps(std::uint64_t states, int width, const Limits& limits) {
    if (states > limits.state_cap || (states << width) > limits.table_cap) throw BlowupError("", states);
}

std::vector<Track> sorted_tracks(std::vector<Track> t) {
    std::sort(t.begin(), t.end(), [](const Track& a, const Track& b) { return a.name < b.name; });
    for (std::size_t i = 1; i < t.size(); ++i)
        if (t[i].name == t[i - 1].name) {
            if (!(t[i] == t[i - 1])) throw SortError("track " + t[i].name + " used with two sorts");
        }
    t.erase(std::unique(t.begin(), t.end(), [](const Track& a, const Track& b) { return a.name == b.name; }), t.end());
    if (t.size() > kMaxTracks) throw Error("too many tracks (" + std::to_string(t.size()) + ")");
    return t;
}

std::vector<Track> union_tracks(const std::vector<Track>& a, const std::vector<Track>& b) {
    std::vector<Track> all = a;
    all.insert(all.end(), b.begin(), b.end());
    return sorted_tracks(std::move(all));
}

// For each symbol over `to`... maps symbols over `from` onto the sub-alphabet `sub`.
std::vector<std::uint32_t> restriction(const std::vector<Track>& from, const std::vector<Track>& sub) {
    std::vector<int> where;
    for (const auto& t : sub) {
        auto it = std::find_if(from.begin(), from.end(), [&](const Track& f) { return f.name == t.name; });
        where.push_back(static_cast<int>(it - from.begin()));
    }
    const std::uint32_t S = std::uint32_t{1} << from.size();
    std::vector<std::uint32_t> out(S);
    for (std::uint32_t s = 0; s < S; ++s) {
        std::uint32_t r = 0;
        for (std::size_t i = 0; i < where.size(); ++i)
            if (s >> where[i] & 1) r |= std::uint32_t{1} << i;
        out[s] = r;
    }
    return out;
}

std::uint32_t element_mask(const std::vector<Track>& t) {
    std::uint32_t m = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i].sort == Sort::Element || t[i].sort == Sort::Edge) m |= std::uint32_t{1} << i;
    return m;
}

// One-hot bookkeeping: seen mask over element tracks, kDead on a second flag.
std::uint64_t wf_step(std::uint64_t seen, std::uint32_t sym, std::uint32_t elem) {
    const std::uint64_t flags = sym & elem;
    if (seen & flags) return kDead;
    return seen | flags;
}

}  // namespace

// TrackDfa -----------------------------------------------------------------------------

TrackDfa::TrackDfa(std::vector<Track> tracks, std::uint32_t states, std::uint32_t initial, std::vector<char> accepting,
                   std::vector<std::uint32_t> table)
    : tracks_(std::move(tracks)), states_(states), initial_(initial), accepting_(std::move(accepting)), table_(std::move(table)) {
    if (tracks_.size() > kMaxTracks) throw Error("too many tracks");
    if (states_ == 0 || initial_ >= states_ || accepting_.size() != states_ ||
        table_.size() != static_cast<std::size_t>(states_) * symbols())
        throw Error("malformed automaton");
    for (auto t : table_)
        if (t >= states_) throw Error("transition target out of range");
}

int TrackDfa::track_index(const std::string& name) const {
    for (std::size_t i = 0; i < tracks_.size(); ++i)
        if (tracks_[i].name == name) return static_cast<int>(i);
    return -1;
}

// Minimization ---------------------------------------------------------------------

namespace {

// Reachable part, renumbered in BFS order (symbols ascending).
TrackDfa canonical_bfs(const TrackDfa& d) {
    const std::uint32_t S = d.symbols();
    std::vector<std::uint32_t> id(d.states(), UINT32_MAX);
    std::vector<std::uint32_t> order{d.initial()};
    id[d.initial()] = 0;
    for (std::size_t i = 0; i < order.size(); ++i)
        for (std::uint32_t a = 0; a < S; ++a) {
            std::uint32_t t = d.next(order[i], a);
            if (id[t] == UINT32_MAX) {
                id[t] = static_cast<std::uint32_t>(order.size());
                order.push_back(t);
            }
        }
    const auto n = static_cast<std::uint32_t>(order.size());
    std::vector<std::uint32_t> table(static_cast<std::size_t>(n) * S);
    std::vector<char> acc(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        acc[i] = d.accepting(order[i]);
        for (std::uint32_t a = 0; a < S; ++a) table[static_cast<std::size_t>(i) * S + a] = id[d.next(order[i], a)];
    }
    return TrackDfa(d.tracks(), n, 0, std::move(acc), std::move(table));
}

}  // namespace

TrackDfa minimize(const TrackDfa& input) {
    const TrackDfa d = canonical_bfs(input);
    const std::uint32_t n = d.states();
    const std::uint32_t S = d.symbols();

    // Inverse transitions per symbol (CSR).
    std::vector<std::uint32_t> off(static_cast<std::size_t>(S) * (n + 1), 0);
    std::vector<std::uint32_t> src(static_cast<std::size_t>(S) * n);
    for (std::uint32_t q = 0; q < n; ++q)
        for (std::uint32_t a = 0; a < S; ++a) ++off[static_cast<std::size_t>(a) * (n + 1) + d.next(q, a) + 1];
    for (std::uint32_t a = 0; a < S; ++a) {
        std::uint32_t* o = &off[static_cast<std::size_t>(a) * (n + 1)];
        for (std::uint32_t q = 0; q < n; ++q) o[q + 1] += o[q];
    }
    {
        std::vector<std::uint32_t> fill(off.begin(), off.end());
        for (std::uint32_t q = 0; q < n; ++q)
            for (std::uint32_t a = 0; a < S; ++a) {
                std::size_t base = static_cast<std::size_t>(a) * (n + 1);
                src[static_cast<std::size_t>(a) * n + fill[base + d.next(q, a)]++] = q;
            }
    }

    // Partition as contiguous ranges of `elems`.
    std::vector<std::uint32_t> elems(n), pos(n), blk(n);
    std::vector<std::uint32_t> bstart, bend, bmark;
    {
        std::uint32_t k = 0;
        for (int pass = 0; pass < 2; ++pass) {
            const std::uint32_t begin = k;
            for (std::uint32_t q = 0; q < n; ++q)
                if (d.accepting(q) == (pass == 0)) {
                    elems[k] = q;
                    pos[q] = k++;
                }
            if (k > begin) {
                const auto b = static_cast<std::uint32_t>(bstart.size());
                bstart.push_back(begin);
                bend.push_back(k);
                bmark.push_back(0);
                for (std::uint32_t i = begin; i < k; ++i) blk[elems[i]] = b;
            }
        }
    }
    std::vector<char> inW(static_cast<std::size_t>(n) * S, 0);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> work;
    auto push = [&](std::uint32_t b, std::uint32_t a) {
        inW[static_cast<std::size_t>(b) * S + a] = 1;
        work.emplace_back(b, a);
    };
    if (bstart.size() == 2) {
        const std::uint32_t small = (bend[0] - bstart[0]) <= (bend[1] - bstart[1]) ? 0 : 1;
        for (std::uint32_t a = 0; a < S; ++a) push(small, a);
    }
    std::vector<std::uint32_t> splitter, touched;
    while (!work.empty()) {
        auto [C, a] = work.back();
        work.pop_back();
        inW[static_cast<std::size_t>(C) * S + a] = 0;
        splitter.assign(elems.begin() + bstart[C], elems.begin() + bend[C]);
        touched.clear();
        const std::uint32_t* o = &off[static_cast<std::size_t>(a) * (n + 1)];
        const std::uint32_t* sr = &src[static_cast<std::size_t>(a) * n];
        for (std::uint32_t q : splitter)
            for (std::uint32_t i = o[q]; i < o[q + 1]; ++i) {
                const std::uint32_t p = sr[i];
                const std::uint32_t b = blk[p];
                const std::uint32_t boundary = bstart[b] + bmark[b];
                if (pos[p] < boundary) continue;
                const std::uint32_t other = elems[boundary];
                std::swap(elems[pos[p]], elems[boundary]);
                pos[other] = pos[p];
                pos[p] = boundary;
                if (bmark[b]++ == 0) touched.push_back(b);
            }
        for (std::uint32_t b : touched) {
            const std::uint32_t marked = bmark[b];
            bmark[b] = 0;
            if (marked == bend[b] - bstart[b]) continue;
            const auto nb = static_cast<std::uint32_t>(bstart.size());
            bstart.push_back(bstart[b]);
            bend.push_back(bstart[b] + marked);
            bmark.push_back(0);
            bstart[b] += marked;
            for (std::uint32_t i = bstart[nb]; i < bend[nb]; ++i) blk[elems[i]] = nb;
            const std::uint32_t szn = bend[nb] - bstart[nb];
            const std::uint32_t szb = bend[b] - bstart[b];
            for (std::uint32_t s = 0; s < S; ++s) {
                if (inW[static_cast<std::size_t>(b) * S + s])
                    push(nb, s);
                else
                    push(szn <= szb ? nb : b, s);
            }
        }
    }
    const auto blocks = static_cast<std::uint32_t>(bstart.size());
    std::vector<std::uint32_t> table(static_cast<std::size_t>(blocks) * S);
    std::vector<char> acc(blocks);
    for (std::uint32_t b = 0; b < blocks; ++b) {
        const std::uint32_t rep = elems[bstart[b]];
        acc[b] = d.accepting(rep);
        for (std::uint32_t s = 0; s < S; ++s) table[static_cast<std::size_t>(b) * S + s] = blk[d.next(rep, s)];
    }
    return canonical_bfs(TrackDfa(d.tracks(), blocks, blk[d.initial()], std::move(acc), std::move(table)));
}

TrackDfa build_dfa(std::vector<Track> tracks, std::uint64_t initial,
                   const std::function<std::uint64_t(std::uint64_t, std::uint32_t)>& delta,
                   const std::function<bool(std::uint64_t)>& accept, const Limits& limits) {
    tracks = sorted_tracks(std::move(tracks));
    const std::uint32_t S = std::uint32_t{1} << tracks.size();
    std::unordered_map<std::uint64_t, std::uint32_t> ids;
    std::vector<std::uint64_t> keys{initial};
    ids[initial] = 0;
    std::vector<std::uint32_t> table;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        for (std::uint32_t a = 0; a < S; ++a) {
            const std::uint64_t k = delta(keys[i], a);
            auto [it, fresh] = ids.emplace(k, static_cast<std::uint32_t>(keys.size()));
            if (fresh) {
                keys.push_back(k);
                check_caps(keys.size(), static_cast<int>(tracks.size()), limits);
            }
            table.push_back(it->second);
        }
    }
    std::vector<char> acc(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) acc[i] = accept(keys[i]);
    return minimize(TrackDfa(std::move(tracks), static_cast<std::uint32_t>(keys.size()), 0, std::move(acc), std::move(table)));
}

// Boolean operations -----------------------------------------------------------------

namespace {

// Product of a and b under a truth table (bit (2*x+y) = result for a=x, b=y).
TrackDfa combine(const TrackDfa& a, const TrackDfa& b, unsigned truth, const Limits& limits) {
    const std::vector<Track> t = union_tracks(a.tracks(), b.tracks());
    const auto ra = restriction(t, a.tracks());
    const auto rb = restriction(t, b.tracks());
    const bool need_wf = truth & 1;  // accepting when both reject: ill-formed words must be cut
    const std::uint32_t elem = need_wf ? element_mask(t) : 0;
    if (a.states() >= (1u << 21) || b.states() >= (1u << 21)) throw BlowupError("", std::max(a.states(), b.states()));
    auto pack = [](std::uint64_t qa, std::uint64_t qb, std::uint64_t w) { return qa | (qb << 21) | (w << 42); };
    return build_dfa(
        t, pack(a.initial(), b.initial(), 0),
        [&](std::uint64_t k, std::uint32_t s) -> std::uint64_t {
            if (k == kDead) return kDead;
            const std::uint64_t qa = k & 0x1FFFFF, qb = (k >> 21) & 0x1FFFFF, w = k >> 42;
            const std::uint64_t w2 = need_wf ? wf_step(w, s, elem) : 0;
            if (w2 == kDead) return kDead;
            return pack(a.next(static_cast<std::uint32_t>(qa), ra[s]), b.next(static_cast<std::uint32_t>(qb), rb[s]), w2);
        },
        [&](std::uint64_t k) {
            if (k == kDead) return false;
            const std::uint64_t qa = k & 0x1FFFFF, qb = (k >> 21) & 0x1FFFFF, w = k >> 42;
            if (need_wf && w != elem) return false;
            const unsigned idx = (a.accepting(static_cast<std::uint32_t>(qa)) ? 2u : 0u) +
                                 (b.accepting(static_cast<std::uint32_t>(qb)) ? 1u : 0u);
            return ((truth >> idx) & 1u) != 0;
        },
        limits);
}

TrackDfa constant(bool value) { return TrackDfa({}, 1, 0, {static_cast<char>(value)}, {0}); }

}  // namespace

TrackDfa dfa_and(const TrackDfa& a, const TrackDfa& b, const Limits& limits) { return combine(a, b, 0b1000, limits); }
TrackDfa dfa_or(const TrackDfa& a, const TrackDfa& b, const Limits& limits) { return combine(a, b, 0b1110, limits); }

TrackDfa dfa_not(const TrackDfa& a, const Limits& limits) {
    const std::uint32_t elem = element_mask(a.tracks());
    return build_dfa(
        a.tracks(), a.initial(),
        [&](std::uint64_t k, std::uint32_t s) -> std::uint64_t {
            if (k == kDead) return kDead;
            const std::uint64_t w2 = wf_step(k >> 32, s, elem);
            if (w2 == kDead) return kDead;
            return a.next(static_cast<std::uint32_t>(k & 0xFFFFFFFF), s) | (w2 << 32);
        },
        [&](std::uint64_t k) { return k != kDead && (k >> 32) == elem && !a.accepting(static_cast<std::uint32_t>(k & 0xFFFFFFFF)); },
        limits);
}

TrackDfa dfa_wellformed(std::vector<Track> tracks) {
    tracks = sorted_tracks(std::move(tracks));
    const std::uint32_t elem = element_mask(tracks);
    return build_dfa(
        tracks, 0,
        [&](std::uint64_t k, std::uint32_t s) { return k == kDead ? kDead : wf_step(k, s, elem); },
        [&](std::uint64_t k) { return k == elem; });
}

TrackDfa dfa_project(const TrackDfa& a, const std::string& track, const Limits& limits) {
    const int idx = a.track_index(track);
    if (idx < 0) return a;
    std::vector<Track> t = a.tracks();
    t.erase(t.begin() + idx);
    const std::uint32_t S = std::uint32_t{1} << t.size();
    const std::uint32_t n = a.states();

    // States that can still reach acceptance.
    std::vector<std::vector<std::uint32_t>> rev(n);
    for (std::uint32_t q = 0; q < n; ++q)
        for (std::uint32_t s = 0; s < a.symbols(); ++s) rev[a.next(q, s)].push_back(q);
    std::vector<char> live(n, 0);
    std::vector<std::uint32_t> stack;
    for (std::uint32_t q = 0; q < n; ++q)
        if (a.accepting(q)) {
            live[q] = 1;
            stack.push_back(q);
        }
    while (!stack.empty()) {
        std::uint32_t q = stack.back();
        stack.pop_back();
        for (std::uint32_t p : rev[q])
            if (!live[p]) {
                live[p] = 1;
                stack.push_back(p);
            }
    }

    std::unordered_map<std::vector<std::uint32_t>, std::uint32_t, VecHash> ids;
    std::vector<std::vector<std::uint32_t>> sets;
    std::vector<std::uint32_t> start;
    if (live[a.initial()]) start.push_back(a.initial());
    ids[start] = 0;
    sets.push_back(start);
    std::vector<std::uint32_t> table;
    std::vector<std::uint32_t> stamp(n, UINT32_MAX);
    std::vector<std::uint32_t> next;
    const std::uint32_t low = (std::uint32_t{1} << idx) - 1;
    std::uint32_t stamp_id = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::uint32_t s = 0; s < S; ++s) {
            const std::uint32_t s0 = (s & low) | ((s & ~low) << 1);
            const std::uint32_t s1 = s0 | (std::uint32_t{1} << idx);
            next.clear();
            ++stamp_id;
            for (std::uint32_t q : sets[i])
                for (std::uint32_t sym : {s0, s1}) {
                    const std::uint32_t r = a.next(q, sym);
                    if (live[r] && stamp[r] != stamp_id) {
                        stamp[r] = stamp_id;
                        next.push_back(r);
                    }
                }
            std::sort(next.begin(), next.end());
            auto it = ids.find(next);
            if (it == ids.end()) {
                it = ids.emplace(next, static_cast<std::uint32_t>(sets.size())).first;
                sets.push_back(next);
                check_caps(sets.size(), static_cast<int>(t.size()), limits);
            }
            table.push_back(it->second);
        }
    }
    std::vector<char> acc(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i)
        acc[i] = std::any_of(sets[i].begin(), sets[i].end(), [&](std::uint32_t q) { return a.accepting(q); });
    return minimize(TrackDfa(std::move(t), static_cast<std::uint32_t>(sets.size()), 0, std::move(acc), std::move(table)));
}

TrackDfa dfa_rename(const TrackDfa& a, const std::map<std::string, std::string>& mapping, const Limits& limits) {
    std::vector<Track> renamed;
    for (Track t : a.tracks()) {
        auto it = mapping.find(t.name);
        if (it != mapping.end() && !t.letter) t.name = it->second;
        renamed.push_back(t);
    }
    const std::vector<Track> t = sorted_tracks(renamed);
    std::vector<int> where;
    for (const auto& r : renamed)
        where.push_back(static_cast<int>(std::find_if(t.begin(), t.end(), [&](const Track& x) { return x.name == r.name; }) - t.begin()));
    const std::uint32_t S = std::uint32_t{1} << t.size();
    check_caps(a.states(), static_cast<int>(t.size()), limits);
    std::vector<std::uint32_t> table(static_cast<std::size_t>(a.states()) * S);
    for (std::uint32_t s = 0; s < S; ++s) {
        std::uint32_t old = 0;
        for (std::size_t i = 0; i < where.size(); ++i)
            if (s >> where[i] & 1) old |= std::uint32_t{1} << i;
        for (std::uint32_t q = 0; q < a.states(); ++q) table[static_cast<std::size_t>(q) * S + s] = a.next(q, old);
    }
    return minimize(TrackDfa(t, a.states(), a.initial(), a.accepting_flags(), std::move(table)));
}

// Compilation --------------------------------------------------------------------------

namespace {

std::string shorten(const std::string& s) { return s.size() > 240 ? s.substr(0, 237) + "..." : s; }

class Compiler {
public:
    explicit Compiler(const CompileOptions& opt)
        : opt_(opt), cache_(opt.cache ? opt.cache : &own_), libs_(cache_->dfas), lib_depth_(cache_->depths) {}

    struct Out {
        TrackDfa dfa;
        std::uint64_t depth = 0;
    };

    Out compile(const Formula& f, const std::map<std::string, Sort>& sorts) {
        try {
            Out o = compile_inner(f, sorts);
            if (opt_.records) opt_.records->push_back({o.depth, o.dfa.states(), kind_name(f)});
            return o;
        } catch (const BlowupError& e) {
            if (!e.subformula.empty()) throw;
            throw BlowupError(shorten(print(f)), e.states);
        }
    }

private:
    static std::string kind_name(const Formula& f) {
        switch (f.kind) {
            case Kind::Exists: return "exists";
            case Kind::Forall: return "forall";
            case Kind::And: return "and";
            case Kind::Or: return "or";
            case Kind::Not: return "not";
            case Kind::Implies: return "implies";
            case Kind::Iff: return "iff";
            case Kind::Atom: return "atom";
            case Kind::Lib: return "lib " + f.lib;
            case Kind::True: return "true";
            case Kind::False: return "false";
        }
        return "?";
    }

    static Track track_for(const std::string& v, const std::map<std::string, Sort>& sorts) {
        auto it = sorts.find(v);
        if (it == sorts.end()) throw Error("unknown variable " + v);
        if (it->second == Sort::Edge || it->second == Sort::EdgeSet) throw UnknownPredicateError("edge variables are not allowed over words");
        return {v, it->second, false};
    }

    // Atom automaton over element tracks given by a per-position predicate.
    TrackDfa atom(const Formula& f, const std::map<std::string, Sort>& sorts) {
        const Limits& L = opt_.limits;
        auto bit = [](const std::vector<Track>& t, const std::string& name) {
            for (std::size_t i = 0; i < t.size(); ++i)
                if (t[i].name == name) return static_cast<int>(i);
            return -1;
        };
        switch (f.pred) {
            case Pred::Prec:
            case Pred::Eq: {
                const std::string& x = f.args[0];
                const std::string& y = f.args[1];
                std::vector<Track> t = sorted_tracks({track_for(x, sorts), track_for(y, sorts)});
                if (x == y) {
                    TrackDfa wf = dfa_wellformed(t);
                    return f.pred == Pred::Eq ? wf : dfa_and(wf, constant(false), L);
                }
                const int bx = bit(t, x), by = bit(t, y);
                const bool is_prec = f.pred == Pred::Prec;
                // key: bit0 seen x, bit1 seen y, bit2 violated
                return build_dfa(
                    t, 0,
                    [=](std::uint64_t k, std::uint32_t s) -> std::uint64_t {
                        if (k == kDead) return kDead;
                        const bool fx = s >> bx & 1, fy = s >> by & 1;
                        if ((fx && (k & 1)) || (fy && (k & 2))) return kDead;
                        std::uint64_t r = k | (fx ? 1u : 0u) | (fy ? 2u : 0u);
                        if (is_prec ? (fy && !(k & 1)) : (fx != fy)) r |= 4;
                        return r;
                    },
                    [](std::uint64_t k) { return k == 3; }, L);
            }
            case Pred::In: {
                const std::string& x = f.args[0];
                const std::string& X = f.args[1];
                std::vector<Track> t = sorted_tracks({track_for(x, sorts), track_for(X, sorts)});
                const int bx = bit(t, x), bX = bit(t, X);
                return build_dfa(
                    t, 0,
                    [=](std::uint64_t k, std::uint32_t s) -> std::uint64_t {
                        if (k == kDead || !(s >> bx & 1)) return k;
                        if (k != 0 || !(s >> bX & 1)) return kDead;
                        return 1;
                    },
                    [](std::uint64_t k) { return k == 1; }, L);
            }
            case Pred::Color: {
                const std::string& x = f.args[0];
                std::vector<Track> t = sorted_tracks({track_for(x, sorts), letter_track(f.color)});
                const int bx = bit(t, x), bl = bit(t, "$" + f.color);
                return build_dfa(
                    t, 0,
                    [=](std::uint64_t k, std::uint32_t s) -> std::uint64_t {
                        if (k == kDead || !(s >> bx & 1)) return k;
                        if (k != 0 || !(s >> bl & 1)) return kDead;
                        return 1;
                    },
                    [](std::uint64_t k) { return k == 1; }, L);
            }
            default:
                throw UnknownPredicateError(std::string("predicate ") + to_string(f.pred) + " is not available over words");
        }
    }

    const TrackDfa& lib_body(const std::string& name, const std::vector<std::int64_t>& params) {
        auto key = std::make_pair(name, params);
        auto it = libs_.find(key);
        if (it != libs_.end()) return it->second;
        if (in_progress_.count(key)) throw Error("cyclic library definition through " + name);
        if (opt_.lib_dfa) {
            if (auto d = opt_.lib_dfa(name, params)) return libs_.emplace(key, std::move(*d)).first->second;
        }
        if (!opt_.libs || !opt_.libs->contains(name)) throw UnknownPredicateError("unknown library predicate " + name);
        in_progress_.insert(key);
        const LibBody& b = opt_.libs->body(name, params);
        std::map<std::string, Sort> sorts;
        for (std::size_t i = 0; i < b.formals.size(); ++i) sorts[b.formals[i]] = b.sorts[i];
        Out o = compile(*b.body, sorts);
        // Make sure every formal has a track.
        std::vector<Track> formal_tracks;
        for (std::size_t i = 0; i < b.formals.size(); ++i) formal_tracks.push_back({b.formals[i], b.sorts[i], false});
        TrackDfa d = dfa_and(o.dfa, dfa_wellformed(formal_tracks), opt_.limits);
        in_progress_.erase(key);
        lib_depth_[key] = o.depth;
        return libs_.emplace(key, std::move(d)).first->second;
    }

    Out compile_inner(const Formula& f, const std::map<std::string, Sort>& sorts) {
        const Limits& L = opt_.limits;
        switch (f.kind) {
            case Kind::True: return {constant(true), 0};
            case Kind::False: return {constant(false), 0};
            case Kind::Atom: return {atom(f, sorts), 0};
            case Kind::Lib: {
                const TrackDfa& body = lib_body(f.lib, f.params);
                const LibBody* b = opt_.libs && opt_.libs->contains(f.lib) ? &opt_.libs->body(f.lib, f.params) : nullptr;
                std::map<std::string, std::string> mapping;
                std::vector<std::string> formals;
                if (b) {
                    formals = b->formals;
                } else {
                    for (const auto& t : body.tracks())
                        if (!t.letter) formals.push_back(t.name);
                }
                if (formals.size() != f.args.size()) throw SortError("library predicate " + f.lib + " called with wrong arity");
                // Rename through temporary names so that formals and actuals may overlap.
                std::map<std::string, std::string> to_tmp, to_actual;
                for (std::size_t i = 0; i < formals.size(); ++i) {
                    to_tmp[formals[i]] = "#" + std::to_string(i);
                    to_actual["#" + std::to_string(i)] = f.args[i];
                    track_for(f.args[i], sorts);
                }
                TrackDfa d = dfa_rename(dfa_rename(body, to_tmp, L), to_actual, L);
                auto dep = lib_depth_.find(std::make_pair(f.lib, f.params));
                return {std::move(d), dep == lib_depth_.end() ? 0 : dep->second};
            }
            case Kind::Not: {
                Out a = compile(*f.kids[0], sorts);
                return {dfa_not(a.dfa, L), a.depth};
            }
            case Kind::And:
            case Kind::Or: {
                std::vector<Out> parts;
                for (const auto& k : f.kids) parts.push_back(compile(*k, sorts));
                std::sort(parts.begin(), parts.end(), [](const Out& a, const Out& b) { return a.dfa.states() < b.dfa.states(); });
                Out acc = std::move(parts[0]);
                for (std::size_t i = 1; i < parts.size(); ++i) {
                    acc.dfa = f.kind == Kind::And ? dfa_and(acc.dfa, parts[i].dfa, L) : dfa_or(acc.dfa, parts[i].dfa, L);
                    acc.depth = std::max(acc.depth, parts[i].depth);
                }
                return acc;
            }
            case Kind::Implies:
            case Kind::Iff: {
                Out a = compile(*f.kids[0], sorts);
                Out b = compile(*f.kids[1], sorts);
                return {combine(a.dfa, b.dfa, f.kind == Kind::Implies ? 0b1011u : 0b1001u, L), std::max(a.depth, b.depth)};
            }
            case Kind::Exists:
            case Kind::Forall: {
                if (f.sort == Sort::Edge || f.sort == Sort::EdgeSet)
                    throw UnknownPredicateError("edge quantifiers are not available over words");
                std::map<std::string, Sort> inner = sorts;
                inner[f.var] = f.sort;
                Out body = compile(*f.kids[0], inner);
                TrackDfa d = std::move(body.dfa);
                if (f.kind == Kind::Forall) d = dfa_not(d, L);
                d = dfa_and(d, dfa_wellformed({{f.var, f.sort, false}}), L);
                d = dfa_project(d, f.var, L);
                if (f.kind == Kind::Forall) d = dfa_not(d, L);
                return {std::move(d), body.depth + 1};
            }
        }
        throw Error("unreachable");
    }

    const CompileOptions& opt_;
    CompileCache own_;
    CompileCache* cache_;
    std::map<std::pair<std::string, std::vector<std::int64_t>>, TrackDfa>& libs_;
    std::map<std::pair<std::string, std::vector<std::int64_t>>, std::uint64_t>& lib_depth_;
    std::set<std::pair<std::string, std::vector<std::int64_t>>> in_progress_;
};

}  // namespace

TrackDfa compile(const FormulaPtr& f, const CompileOptions& opt) {
    std::map<std::string, Sort> sorts;
    std::vector<Track> free_tracks;
    for (const auto& v : free_vars(*f, opt.libs)) {
        sorts[v.name] = v.sort;
        free_tracks.push_back({v.name, v.sort, false});
    }
    Compiler c(opt);
    TrackDfa d = c.compile(*f, sorts).dfa;
    return dfa_and(d, dfa_wellformed(free_tracks), opt.limits);
}

// Running ------------------------------------------------------------------------------

namespace {

std::vector<std::uint32_t> symbols_for(const TrackDfa& d, std::size_t length,
                                       const std::function<bool(const std::string&, std::size_t)>& letter,
                                       const Assignment& a) {
    std::vector<std::uint32_t> syms(length, 0);
    for (std::size_t i = 0; i < d.tracks().size(); ++i) {
        const Track& t = d.tracks()[i];
        const std::uint32_t bit = std::uint32_t{1} << i;
        if (t.letter) {
            for (std::size_t p = 0; p < length; ++p)
                if (letter(t.name.substr(1), p)) syms[p] |= bit;
            continue;
        }
        auto it = a.find(t.name);
        if (it == a.end()) throw Error("no value for track " + t.name);
        const Value& v = it->second;
        if (v.sort != t.sort) throw SortError("value for track " + t.name + " has the wrong sort");
        if (t.sort == Sort::Element) {
            if (v.index < 0 || static_cast<std::size_t>(v.index) >= length) throw Error("element out of range for " + t.name);
            syms[static_cast<std::size_t>(v.index)] |= bit;
        } else {
            if (v.set.size() != length) throw Error("set value for " + t.name + " has the wrong length");
            for (int p : v.set.elements()) syms[static_cast<std::size_t>(p)] |= bit;
        }
    }
    return syms;
}

}  // namespace

bool accepts(const TrackDfa& d, const std::string& letters, const Assignment& a) {
    auto syms = symbols_for(
        d, letters.size(),
        [&](const std::string& color, std::size_t p) {
            if (color != "1") throw Error("words only carry the letter 1");
            return letters[p] == '1';
        },
        a);
    std::uint32_t q = d.initial();
    for (auto s : syms) q = d.next(q, s);
    return d.accepting(q);
}

bool accepts(const TrackDfa& d, const Structure& s, const Assignment& a) {
    if (s.kind() != StructureKind::Word && s.kind() != StructureKind::Unary) throw Error("automata run on words");
    auto syms = symbols_for(
        d, static_cast<std::size_t>(s.size()),
        [&](const std::string& color, std::size_t p) { return s.has_color(s.color_index(color), static_cast<int>(p)); }, a);
    std::uint32_t q = d.initial();
    for (auto sym : syms) q = d.next(q, sym);
    return d.accepting(q);
}

CycleProfile cycle_profile(const TrackDfa& d) {
    for (const auto& t : d.tracks())
        if (!t.letter) throw Error("unary acceptance needs an automaton without variable tracks");
    std::vector<std::int64_t> seen(d.states(), -1);
    CycleProfile p;
    std::uint32_t q = d.initial();
    for (std::int64_t i = 0;; ++i) {
        if (seen[q] >= 0) {
            p.tail = static_cast<std::uint64_t>(seen[q]);
            p.cycle = static_cast<std::uint64_t>(i - seen[q]);
            break;
        }
        seen[q] = i;
        p.accept.push_back(d.accepting(q));
        q = d.next(q, 0);
    }
    return p;
}

bool accepts_unary(const TrackDfa& d, const BigInt& n) {
    if (n < 0) throw Error("negative length");
    const CycleProfile p = cycle_profile(d);
    if (n < p.tail + p.cycle) return p.accept[n.convert_to<std::size_t>()];
    const BigInt r = (n - p.tail) % p.cycle;
    return p.accept[static_cast<std::size_t>(p.tail + r.convert_to<std::uint64_t>())];
}

EquivResult language_equiv(const TrackDfa& a, const TrackDfa& b, std::optional<std::size_t> max_length) {
    if (a.tracks() != b.tracks()) throw Error("language_equiv needs automata over the same tracks");
    const std::uint32_t S = a.symbols();
    struct Entry {
        std::uint32_t qa, qb;
        std::int64_t parent;
        std::uint32_t sym;
        std::size_t depth;
    };
    std::vector<Entry> q{{a.initial(), b.initial(), -1, 0, 0}};
    std::unordered_set<std::uint64_t> seen{(static_cast<std::uint64_t>(a.initial()) << 32) | b.initial()};
    for (std::size_t i = 0; i < q.size(); ++i) {
        const Entry e = q[i];
        if (a.accepting(e.qa) != b.accepting(e.qb)) {
            std::vector<std::uint32_t> syms;
            for (std::int64_t j = static_cast<std::int64_t>(i); q[static_cast<std::size_t>(j)].parent >= 0;
                 j = q[static_cast<std::size_t>(j)].parent)
                syms.push_back(q[static_cast<std::size_t>(j)].sym);
            std::reverse(syms.begin(), syms.end());
            Counterexample c;
            c.length = syms.size();
            c.letters.assign(syms.size(), '0');
            for (std::size_t t = 0; t < a.tracks().size(); ++t) {
                const Track& tr = a.tracks()[t];
                if (tr.letter) {
                    if (tr.name == "$1")
                        for (std::size_t p = 0; p < syms.size(); ++p)
                            if (syms[p] >> t & 1) c.letters[p] = '1';
                    continue;
                }
                if (tr.sort == Sort::Element) {
                    Value v = Value::element(-1);
                    for (std::size_t p = 0; p < syms.size(); ++p)
                        if (syms[p] >> t & 1) v.index = static_cast<int>(p);
                    c.tracks[tr.name] = v;
                } else {
                    BitSet s(syms.size());
                    for (std::size_t p = 0; p < syms.size(); ++p)
                        if (syms[p] >> t & 1) s.set(p);
                    c.tracks[tr.name] = Value::elements(s);
                }
            }
            return {false, std::move(c)};
        }
        if (max_length && e.depth >= *max_length) continue;
        for (std::uint32_t s = 0; s < S; ++s) {
            const std::uint32_t na = a.next(e.qa, s), nb = b.next(e.qb, s);
            if (seen.insert((static_cast<std::uint64_t>(na) << 32) | nb).second)
                q.push_back({na, nb, static_cast<std::int64_t>(i), s, e.depth + 1});
        }
    }
    return {true, std::nullopt};
}

// Lazy decision on one word ------------------------------------------------------------

namespace {

// Leading existentials, then the conjuncts below them. Existentials nested
// inside a conjunct stay there: their automata are already projected.
void collect_prefix(const FormulaPtr& f, std::vector<FreeVar>& vars, std::vector<FormulaPtr>& conjuncts, bool leading) {
    if (leading && f->kind == Kind::Exists && (f->sort == Sort::Element || f->sort == Sort::Set)) {
        for (const auto& v : vars)
            if (v.name == f->var) throw Error("existential prefix reuses variable " + f->var);
        vars.push_back({f->var, f->sort});
        collect_prefix(f->kids[0], vars, conjuncts, true);
    } else if (f->kind == Kind::And) {
        for (const auto& k : f->kids) collect_prefix(k, vars, conjuncts, false);
    } else {
        conjuncts.push_back(f);
    }
}

}  // namespace

bool decide_on_word(const FormulaPtr& f, const std::string& letters, const Assignment& a, const CompileOptions& opt) {
    if (f->kind == Kind::Or) {
        for (const auto& k : f->kids) {
            Assignment sub;
            for (const auto& v : free_vars(*k, opt.libs)) sub[v.name] = a.at(v.name);
            if (decide_on_word(k, letters, sub, opt)) return true;
        }
        return false;
    }
    std::vector<FreeVar> vars;
    std::vector<FormulaPtr> conjuncts;
    collect_prefix(f, vars, conjuncts, true);
    if (vars.size() > 16) throw Error("existential prefix too wide for lazy decision");
    const std::size_t n = letters.size();

    // Compile the conjuncts; free variables of f are fixed by `a`.
    std::map<std::string, Sort> sorts;
    for (const auto& v : free_vars(*f, opt.libs)) sorts[v.name] = v.sort;
    for (const auto& v : vars) sorts[v.name] = v.sort;
    CompileCache local_cache;
    CompileOptions o = opt;
    if (!o.cache) o.cache = &local_cache;
    std::vector<TrackDfa> parts;
    for (const auto& c : conjuncts) parts.push_back(compile(c, o));
    // Element variables of the prefix must be one-hot even when unused.
    std::vector<Track> prefix_tracks;
    for (const auto& v : vars) prefix_tracks.push_back({v.name, v.sort, false});
    parts.push_back(dfa_wellformed(prefix_tracks));

    // Per part: fixed bits per position, and where each prefix variable sits.
    const std::size_t m = parts.size();
    std::vector<std::vector<std::uint32_t>> fixed(m, std::vector<std::uint32_t>(n, 0));
    std::vector<std::vector<int>> var_bit(m, std::vector<int>(vars.size(), -1));
    for (std::size_t i = 0; i < m; ++i) {
        Assignment known;
        const auto& tr = parts[i].tracks();
        for (std::size_t t = 0; t < tr.size(); ++t) {
            if (tr[t].letter) continue;
            bool is_var = false;
            for (std::size_t v = 0; v < vars.size(); ++v)
                if (vars[v].name == tr[t].name) {
                    var_bit[i][v] = static_cast<int>(t);
                    is_var = true;
                }
            if (!is_var) known[tr[t].name] = a.at(tr[t].name);
        }
        // Symbols with prefix-variable bits cleared.
        for (std::size_t t = 0; t < tr.size(); ++t) {
            if (tr[t].letter) {
                if (tr[t].name != "$1") throw Error("words only carry the letter 1");
                for (std::size_t p = 0; p < n; ++p)
                    if (letters[p] == '1') fixed[i][p] |= std::uint32_t{1} << t;
                continue;
            }
            auto it = known.find(tr[t].name);
            if (it == known.end()) continue;
            const Value& v = it->second;
            if (v.sort == Sort::Element) {
                fixed[i][static_cast<std::size_t>(v.index)] |= std::uint32_t{1} << t;
            } else {
                for (int p : v.set.elements()) fixed[i][static_cast<std::size_t>(p)] |= std::uint32_t{1} << t;
            }
        }
    }
    // Live states per part.
    std::vector<std::vector<char>> live(m);
    for (std::size_t i = 0; i < m; ++i) {
        const TrackDfa& d = parts[i];
        std::vector<std::vector<std::uint32_t>> rev(d.states());
        for (std::uint32_t q = 0; q < d.states(); ++q)
            for (std::uint32_t s = 0; s < d.symbols(); ++s) rev[d.next(q, s)].push_back(q);
        live[i].assign(d.states(), 0);
        std::vector<std::uint32_t> st;
        for (std::uint32_t q = 0; q < d.states(); ++q)
            if (d.accepting(q)) {
                live[i][q] = 1;
                st.push_back(q);
            }
        while (!st.empty()) {
            auto q = st.back();
            st.pop_back();
            for (auto p : rev[q])
                if (!live[i][p]) {
                    live[i][p] = 1;
                    st.push_back(p);
                }
        }
    }
    // Guesses are built one prefix variable at a time; a part is advanced as
    // soon as every prefix variable it reads has been guessed.
    const std::size_t V = vars.size();
    std::vector<std::vector<std::size_t>> ready(V + 1);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t last = 0;
        for (std::size_t v = 0; v < V; ++v)
            if (var_bit[i][v] >= 0) last = v + 1;
        ready[last].push_back(i);
    }

    std::unordered_set<std::vector<std::uint32_t>, VecHash> cur, nxt;
    std::vector<std::uint32_t> init;
    for (std::size_t i = 0; i < m; ++i) {
        if (!live[i][parts[i].initial()]) return false;
        init.push_back(parts[i].initial());
    }
    cur.insert(init);
    std::vector<std::uint32_t> tuple(m), sym(m);
    for (std::size_t p = 0; p < n; ++p) {
        nxt.clear();
        for (const auto& t : cur) {
            std::function<void(std::size_t)> guess = [&](std::size_t v) {
                for (std::size_t i : ready[v]) {
                    tuple[i] = parts[i].next(t[i], sym[i]);
                    if (!live[i][tuple[i]]) return;
                }
                if (v == V) {
                    nxt.insert(tuple);
                    return;
                }
                for (int bit = 0; bit < 2; ++bit) {
                    for (std::size_t i = 0; i < m; ++i)
                        if (var_bit[i][v] >= 0 && bit) sym[i] |= std::uint32_t{1} << var_bit[i][v];
                    guess(v + 1);
                    for (std::size_t i = 0; i < m; ++i)
                        if (var_bit[i][v] >= 0 && bit) sym[i] &= ~(std::uint32_t{1} << var_bit[i][v]);
                }
            };
            for (std::size_t i = 0; i < m; ++i) sym[i] = fixed[i][p];
            guess(0);
        }
        if (nxt.size() > opt.limits.state_cap) throw BlowupError("lazy product", nxt.size());
        std::swap(cur, nxt);
        if (cur.empty()) return false;
    }
    for (const auto& t : cur) {
        bool all = true;
        for (std::size_t i = 0; i < m && all; ++i) all = parts[i].accepting(t[i]);
        if (all) return true;
    }
    return false;
}

// JSON ---------------------------------------------------------------------------------

nlohmann::json to_json(const TrackDfa& d) {
    nlohmann::json tracks = nlohmann::json::array(), sorts = nlohmann::json::array();
    for (const auto& t : d.tracks()) {
        tracks.push_back(t.name);
        sorts.push_back(t.letter ? "letter" : to_string(t.sort));
    }
    nlohmann::json acc = nlohmann::json::array(), def = nlohmann::json::array(), edges = nlohmann::json::array();
    const std::uint32_t S = d.symbols();
    for (std::uint32_t q = 0; q < d.states(); ++q) {
        if (d.accepting(q)) acc.push_back(q);
        std::map<std::uint32_t, std::uint32_t> freq;
        for (std::uint32_t s = 0; s < S; ++s) ++freq[d.next(q, s)];
        std::uint32_t best = d.next(q, 0);
        for (auto [t, c] : freq)
            if (c > freq[best]) best = t;
        def.push_back({q, best});
        for (std::uint32_t s = 0; s < S; ++s) {
            if (d.next(q, s) == best) continue;
            std::string bits(d.tracks().size(), '0');
            for (std::size_t i = 0; i < bits.size(); ++i)
                if (s >> i & 1) bits[i] = '1';
            edges.push_back({q, bits, d.next(q, s)});
        }
    }
    return {{"tracks", tracks}, {"sorts", sorts},     {"states", d.states()}, {"initial", d.initial()},
            {"accepting", acc}, {"default", def},     {"edges", edges}};
}

TrackDfa dfa_from_json(const nlohmann::json& j) {
    std::vector<Track> tracks;
    const auto names = j.at("tracks").get<std::vector<std::string>>();
    std::vector<std::string> sorts = j.contains("sorts") ? j.at("sorts").get<std::vector<std::string>>()
                                                         : std::vector<std::string>(names.size(), "element-set");
    for (std::size_t i = 0; i < names.size(); ++i) {
        Track t{names[i], Sort::Set, sorts[i] == "letter"};
        if (sorts[i] == "element") t.sort = Sort::Element;
        tracks.push_back(t);
    }
    const auto n = j.at("states").get<std::uint32_t>();
    const std::uint32_t S = std::uint32_t{1} << tracks.size();
    std::vector<std::uint32_t> table(static_cast<std::size_t>(n) * S, 0);
    for (const auto& e : j.at("default")) {
        const auto q = e.at(0).get<std::uint32_t>();
        if (q >= n) throw Error("bad state in automaton JSON");
        std::fill(table.begin() + static_cast<std::ptrdiff_t>(q) * S, table.begin() + static_cast<std::ptrdiff_t>(q + 1) * S,
                  e.at(1).get<std::uint32_t>());
    }
    for (const auto& e : j.at("edges")) {
        const auto q = e.at(0).get<std::uint32_t>();
        const auto bits = e.at(1).get<std::string>();
        if (q >= n || bits.size() != tracks.size()) throw Error("bad edge in automaton JSON");
        std::uint32_t s = 0;
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (bits[i] == '1') s |= std::uint32_t{1} << i;
        table[static_cast<std::size_t>(q) * S + s] = e.at(2).get<std::uint32_t>();
    }
    std::vector<char> acc(n, 0);
    for (const auto& q : j.at("accepting")) acc.at(q.get<std::uint32_t>()) = 1;
    return TrackDfa(std::move(tracks), n, j.at("initial").get<std::uint32_t>(), std::move(acc), std::move(table));
}

}  // namespace msow
