#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace msow {

/// Dense set over a universe {0, ..., size-1}. Used for set-variable values.
class BitSet {
public:
    BitSet() = default;
    explicit BitSet(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}

    static BitSet full(std::size_t size) {
        BitSet s(size);
        for (std::size_t i = 0; i < size; ++i) s.set(i);
        return s;
    }

    std::size_t size() const { return size_; }

    bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
    void set(std::size_t i, bool v = true) {
        if (v)
            words_[i >> 6] |= (std::uint64_t{1} << (i & 63));
        else
            words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63));
    }
    void reset() { std::fill(words_.begin(), words_.end(), 0); }

    std::size_t count() const {
        std::size_t c = 0;
        for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
        return c;
    }
    bool empty() const {
        for (auto w : words_)
            if (w) return false;
        return true;
    }

    /// Elements in increasing order.
    std::vector<int> elements() const {
        std::vector<int> out;
        for (std::size_t wi = 0; wi < words_.size(); ++wi) {
            std::uint64_t w = words_[wi];
            while (w) {
                int b = std::countr_zero(w);
                out.push_back(static_cast<int>(wi * 64 + b));
                w &= w - 1;
            }
        }
        return out;
    }

    bool is_subset_of(const BitSet& o) const {
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & ~o.words_[i]) return false;
        return true;
    }

    BitSet& operator&=(const BitSet& o) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
        return *this;
    }
    BitSet& operator|=(const BitSet& o) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
        return *this;
    }
    BitSet& subtract(const BitSet& o) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= ~o.words_[i];
        return *this;
    }

    friend bool operator==(const BitSet& a, const BitSet& b) {
        return a.size_ == b.size_ && a.words_ == b.words_;
    }
    friend bool operator<(const BitSet& a, const BitSet& b) {
        // Canonical order: by size, then by element list.
        if (a.size_ != b.size_) return a.size_ < b.size_;
        return a.elements() < b.elements();
    }

    std::size_t hash() const {
        std::size_t h = size_ * 0x9e3779b97f4a7c15ULL;
        for (auto w : words_) h ^= std::hash<std::uint64_t>{}(w) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return h;
    }

    const std::vector<std::uint64_t>& words() const { return words_; }

private:
    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

inline BitSet set_of(std::size_t size, const std::vector<int>& elems) {
    BitSet s(size);
    for (int e : elems) s.set(static_cast<std::size_t>(e));
    return s;
}

}  // namespace msow
