#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <iterator>
#include <string>
#include <vector>

namespace gnies {

/// Largest graph the dense bit-row encoding supports.
inline constexpr int kMaxNodes = 64;

/// A subset of node indices in [0, 64), stored as a bitmask.
///
/// Used for parent sets, neighbourhoods, operator sets (T / H) and
/// intervention targets. Iteration yields members in increasing order.
class NodeSet {
public:
    class iterator {
    public:
        using iterator_category = std::forward_iterator_tag;
        using value_type = int;
        using difference_type = std::ptrdiff_t;
        using pointer = const int *;
        using reference = int;

        iterator() = default;
        explicit iterator(std::uint64_t rest) : rest_(rest) {}
        int operator*() const { return std::countr_zero(rest_); }
        iterator &operator++() {
            rest_ &= rest_ - 1;
            return *this;
        }
        iterator operator++(int) {
            iterator tmp = *this;
            ++*this;
            return tmp;
        }
        bool operator==(const iterator &) const = default;

    private:
        std::uint64_t rest_ = 0;
    };

    constexpr NodeSet() = default;
    NodeSet(std::initializer_list<int> nodes) {
        for (int v : nodes) insert(v);
    }
    explicit NodeSet(const std::vector<int> &nodes) {
        for (int v : nodes) insert(v);
    }

    static constexpr NodeSet from_bits(std::uint64_t bits) {
        NodeSet s;
        s.bits_ = bits;
        return s;
    }
    /// {0, ..., n-1}
    static constexpr NodeSet range(int n) {
        return from_bits(n >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1));
    }
    static constexpr NodeSet single(int v) { return from_bits(std::uint64_t{1} << v); }

    constexpr std::uint64_t bits() const { return bits_; }
    constexpr bool contains(int v) const { return (bits_ >> v) & 1U; }
    constexpr void insert(int v) { bits_ |= std::uint64_t{1} << v; }
    constexpr void erase(int v) { bits_ &= ~(std::uint64_t{1} << v); }
    constexpr int size() const { return std::popcount(bits_); }
    constexpr bool empty() const { return bits_ == 0; }
    /// Smallest member; undefined on an empty set.
    constexpr int front() const { return std::countr_zero(bits_); }
    constexpr bool is_subset_of(NodeSet other) const { return (bits_ & ~other.bits_) == 0; }
    constexpr bool intersects(NodeSet other) const { return (bits_ & other.bits_) != 0; }

    iterator begin() const { return iterator(bits_); }
    iterator end() const { return iterator(0); }

    std::vector<int> to_vector() const { return {begin(), end()}; }
    std::string to_string() const;

    constexpr NodeSet operator|(NodeSet o) const { return from_bits(bits_ | o.bits_); }
    constexpr NodeSet operator&(NodeSet o) const { return from_bits(bits_ & o.bits_); }
    /// Set difference.
    constexpr NodeSet operator-(NodeSet o) const { return from_bits(bits_ & ~o.bits_); }
    constexpr NodeSet &operator|=(NodeSet o) {
        bits_ |= o.bits_;
        return *this;
    }
    constexpr NodeSet &operator&=(NodeSet o) {
        bits_ &= o.bits_;
        return *this;
    }
    constexpr NodeSet &operator-=(NodeSet o) {
        bits_ &= ~o.bits_;
        return *this;
    }
    constexpr bool operator==(const NodeSet &) const = default;

    /// Lexicographic order on the sorted member lists.
    friend std::strong_ordering lex_compare(NodeSet a, NodeSet b) {
        std::uint64_t x = a.bits_, y = b.bits_;
        while (x != 0 && y != 0) {
            int u = std::countr_zero(x), v = std::countr_zero(y);
            if (u != v) return u <=> v;
            x &= x - 1;
            y &= y - 1;
        }
        if (x == 0 && y == 0) return std::strong_ordering::equal;
        return x == 0 ? std::strong_ordering::less : std::strong_ordering::greater;
    }

private:
    std::uint64_t bits_ = 0;
};

/// Intervention targets are plain node subsets.
using TargetSet = NodeSet;

/// Calls f(subset) for every subset of `s`, starting with the empty set
/// and proceeding in increasing bitmask order.
template <class F>
void for_each_subset(NodeSet s, F &&f) {
    const std::uint64_t mask = s.bits();
    std::uint64_t sub = 0;
    while (true) {
        f(NodeSet::from_bits(sub));
        if (sub == mask) break;
        sub = (sub - mask) & mask;
    }
}

}  // namespace gnies
