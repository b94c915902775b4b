#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "cardprune/common.hpp"

namespace cardprune {

/// Binary selection vector x. Variable 0 is the most significant bit of the
/// integer encoding, matching qubit 1 of the simulator.
class SelectionMask {
public:
    SelectionMask() = default;
    explicit SelectionMask(std::size_t n) : bits_(n, 0) {}
    explicit SelectionMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
        for (auto b : bits_) require(b <= 1, "selection mask entries must be 0 or 1");
    }

    static SelectionMask from_index(std::size_t n, std::uint64_t index) {
        require(n <= 64, "selection mask wider than 64 bits");
        SelectionMask m(n);
        for (std::size_t i = 0; i < n; ++i) m.bits_[i] = static_cast<std::uint8_t>((index >> (n - 1 - i)) & 1U);
        return m;
    }

    static SelectionMask from_indices(std::size_t n, const std::vector<std::size_t>& selected) {
        SelectionMask m(n);
        for (auto i : selected) {
            require(i < n, "selected index out of range");
            m.bits_[i] = 1;
        }
        return m;
    }

    static SelectionMask all(std::size_t n) {
        SelectionMask m(n);
        std::fill(m.bits_.begin(), m.bits_.end(), 1);
        return m;
    }

    std::size_t size() const { return bits_.size(); }
    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    void set(std::size_t i, bool value) { bits_[i] = value ? 1 : 0; }
    const std::vector<std::uint8_t>& bits() const { return bits_; }

    std::size_t popcount() const {
        std::size_t k = 0;
        for (auto b : bits_) k += b;
        return k;
    }

    std::vector<std::size_t> indices() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < bits_.size(); ++i)
            if (bits_[i]) out.push_back(i);
        return out;
    }

    std::uint64_t to_index() const {
        require(bits_.size() <= 64, "selection mask wider than 64 bits");
        std::uint64_t v = 0;
        for (auto b : bits_) v = (v << 1) | b;
        return v;
    }

    std::string to_string() const {
        std::string s;
        s.reserve(bits_.size());
        for (auto b : bits_) s.push_back(b ? '1' : '0');
        return s;
    }

    static SelectionMask parse(const std::string& s) {
        SelectionMask m(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            require(s[i] == '0' || s[i] == '1', "bitstring must contain only 0 and 1");
            m.bits_[i] = s[i] == '1';
        }
        return m;
    }

    friend bool operator==(const SelectionMask&, const SelectionMask&) = default;

private:
    std::vector<std::uint8_t> bits_;
};

inline int popcount64(std::uint64_t v) { return __builtin_popcountll(v); }

} // namespace cardprune
