#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gbs {

/// Multi-word bitset sized at runtime. Used for vertex sets and adjacency rows.
class Bitset {
public:
    Bitset() = default;
    explicit Bitset(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}

    std::size_t size() const { return size_; }
    std::size_t word_count() const { return words_.size(); }
    const std::vector<std::uint64_t>& words() const { return words_; }

    bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1U; }
    void set(std::size_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
    void reset(std::size_t i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
    void set(std::size_t i, bool value) { value ? set(i) : reset(i); }

    std::size_t count() const {
        std::size_t c = 0;
        for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
        return c;
    }

    bool any() const {
        for (auto w : words_)
            if (w) return true;
        return false;
    }
    bool none() const { return !any(); }

    /// Index of the lowest set bit, or size() when empty.
    std::size_t first() const { return next(0); }

    /// Index of the lowest set bit at position >= from, or size() when none.
    std::size_t next(std::size_t from) const {
        if (from >= size_) return size_;
        std::size_t wi = from >> 6;
        std::uint64_t w = words_[wi] & (~std::uint64_t{0} << (from & 63));
        while (true) {
            if (w) return (wi << 6) + static_cast<std::size_t>(std::countr_zero(w));
            if (++wi >= words_.size()) return size_;
            w = words_[wi];
        }
    }

    template <class F>
    void for_each(F&& f) const {
        for (std::size_t wi = 0; wi < words_.size(); ++wi) {
            std::uint64_t w = words_[wi];
            while (w) {
                f((wi << 6) + static_cast<std::size_t>(std::countr_zero(w)));
                w &= w - 1;
            }
        }
    }

    std::vector<std::size_t> indices() const {
        std::vector<std::size_t> out;
        out.reserve(count());
        for_each([&](std::size_t i) { out.push_back(i); });
        return out;
    }

    bool is_subset_of(const Bitset& other) const {
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & ~other.words_[i]) return false;
        return true;
    }

    bool intersects(const Bitset& other) const {
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & other.words_[i]) return true;
        return false;
    }

    Bitset& operator&=(const Bitset& o) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
        return *this;
    }
    Bitset& operator|=(const Bitset& o) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
        return *this;
    }
    // set difference
    Bitset& operator-=(const Bitset& o) {
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= ~o.words_[i];
        return *this;
    }

    friend Bitset operator&(Bitset a, const Bitset& b) { return a &= b; }
    friend Bitset operator|(Bitset a, const Bitset& b) { return a |= b; }
    friend Bitset operator-(Bitset a, const Bitset& b) { return a -= b; }
    friend bool operator==(const Bitset&, const Bitset&) = default;
    friend auto operator<=>(const Bitset& a, const Bitset& b) {
        if (auto c = a.size_ <=> b.size_; c != 0) return c;
        return a.words_ <=> b.words_;
    }

    /// Hex encoding of the bitset read as an integer (bit i = 2^i), most
    /// significant digit first, zero-padded to ceil(size/4) digits.
    std::string to_hex() const {
        static constexpr char digits[] = "0123456789abcdef";
        const std::size_t n_digits = size_ == 0 ? 1 : (size_ + 3) / 4;
        std::string out(n_digits, '0');
        for (std::size_t d = 0; d < n_digits; ++d) {
            const std::size_t bit = d * 4;
            unsigned nibble = 0;
            for (std::size_t b = 0; b < 4 && bit + b < size_; ++b)
                if (test(bit + b)) nibble |= 1U << b;
            out[n_digits - 1 - d] = digits[nibble];
        }
        return out;
    }

    static Bitset from_hex(const std::string& hex, std::size_t size);

private:
    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

inline Bitset Bitset::from_hex(const std::string& hex, std::size_t size) {
    Bitset out(size);
    const std::size_t n = hex.size();
    for (std::size_t d = 0; d < n; ++d) {
        const char c = hex[n - 1 - d];
        unsigned nibble;
        if (c >= '0' && c <= '9')
            nibble = static_cast<unsigned>(c - '0');
        else if (c >= 'a' && c <= 'f')
            nibble = static_cast<unsigned>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F')
            nibble = static_cast<unsigned>(c - 'A' + 10);
        else
            throw std::invalid_argument("bad hex digit in vertex set: " + hex);
        for (std::size_t b = 0; b < 4; ++b) {
            if (!(nibble & (1U << b))) continue;
            const std::size_t bit = d * 4 + b;
            if (bit >= size) throw std::invalid_argument("vertex set hex exceeds graph size: " + hex);
            out.set(bit);
        }
    }
    return out;
}

} // namespace gbs
