#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kamnf {

// Modes are integers j with |j| <= kMaxAbsMode; each occupies one slot of a dense exponent array.
inline constexpr int kMaxAbsMode = 15;
inline constexpr int kSlots = 32;

constexpr int slot_of(int j) { return j + kMaxAbsMode; }
constexpr int mode_of(int slot) { return slot - kMaxAbsMode; }

// <j> = max(|j|, 1)
inline double japanese(int j) { return j == 0 ? 1.0 : (j < 0 ? -double(j) : double(j)); }

class ModeSet {
public:
    ModeSet() = default;
    explicit ModeSet(int j_max);
    ModeSet(int j_max, std::vector<int> tangential);

    int j_max() const { return j_max_; }
    int size() const { return 2 * j_max_ + 1; }
    bool contains(int j) const { return j >= -j_max_ && j <= j_max_; }
    int index(int j) const { return j + j_max_; }
    int mode_at(int idx) const { return idx - j_max_; }
    std::vector<int> modes() const;

    bool has_tangential() const { return has_tangential_; }
    const std::vector<int>& tangential() const { return tangential_; }
    // True when j belongs to S (or when no split is configured).
    bool is_tangential(int j) const;
    // Bitmask over slots of the normal modes S^c (zero without a split).
    uint32_t normal_mask() const { return normal_mask_; }

    std::string to_text() const;
    static ModeSet from_text(std::string_view text);

    bool operator==(const ModeSet& o) const
    {
        return j_max_ == o.j_max_ && has_tangential_ == o.has_tangential_ && tangential_ == o.tangential_;
    }

private:
    int j_max_ = 0;
    bool has_tangential_ = false;
    std::vector<int> tangential_;
    uint32_t normal_mask_ = 0;
};

class MultiIndex {
public:
    MultiIndex() { e_.fill(0); }

    static MultiIndex unit(int j, int count = 1);
    static MultiIndex from_pairs(std::initializer_list<std::pair<int, int>> pairs);
    static MultiIndex from_text(std::string_view text);

    int operator[](int j) const { return e_[slot_of(j)]; }
    int at_slot(int s) const { return e_[s]; }
    void set(int j, int count);
    void add(int j, int count);

    int mass() const;
    long momentum() const;
    bool empty() const;
    uint32_t support_mask() const;
    // Largest |j| in the support, or -1 for the empty index.
    int max_abs_mode() const;

    std::vector<std::pair<int, int>> entries() const;
    std::string to_text() const;

    MultiIndex operator+(const MultiIndex& o) const;
    // Componentwise difference; throws std::invalid_argument on a negative entry.
    MultiIndex operator-(const MultiIndex& o) const;
    MultiIndex& operator+=(const MultiIndex& o);
    bool leq(const MultiIndex& o) const;

    const std::array<uint8_t, kSlots>& raw() const { return e_; }
    std::array<uint8_t, kSlots>& raw() { return e_; }

    auto operator<=>(const MultiIndex&) const = default;
    bool operator==(const MultiIndex&) const = default;

private:
    std::array<uint8_t, kSlots> e_;
};

struct MultiIndexHash {
    std::size_t operator()(const MultiIndex& a) const noexcept;
};

// Ordered pair (alpha, beta) labelling the monomial u^alpha conj(u)^beta.
struct MonomialKey {
    MultiIndex alpha;
    MultiIndex beta;

    int degree() const { return alpha.mass() + beta.mass(); }
    auto operator<=>(const MonomialKey&) const = default;
    bool operator==(const MonomialKey&) const = default;
};

struct MonomialKeyHash {
    std::size_t operator()(const MonomialKey& k) const noexcept;
};

struct DisjointForm {
    MultiIndex m;
    MultiIndex alpha;
    MultiIndex beta;
};

DisjointForm split_min(const MultiIndex& bold_alpha, const MultiIndex& bold_beta);
std::pair<MultiIndex, MultiIndex> merge(const MultiIndex& m, const MultiIndex& alpha, const MultiIndex& beta);

// Exact binomial coefficient, converted to double. Requires 0 <= k <= n <= 62.
double binomial(int n, int k);
// prod_j binom(m_j, d_j); zero unless d <= m.
double multi_binomial(const MultiIndex& m, const MultiIndex& d);

// Calls f(delta) for every delta <= m (componentwise), in a fixed order.
template <class F>
void for_each_sub_index(const MultiIndex& m, F&& f)
{
    std::array<int, kSlots> slots{};
    int n = 0;
    for (int s = 0; s < kSlots; ++s)
        if (m.at_slot(s) > 0) slots[n++] = s;
    MultiIndex d;
    while (true) {
        f(static_cast<const MultiIndex&>(d));
        int k = 0;
        for (; k < n; ++k) {
            auto& v = d.raw()[slots[k]];
            if (v < m.at_slot(slots[k])) {
                ++v;
                break;
            }
            v = 0;
        }
        if (k == n) return;
    }
}

// Calls f(delta) for every delta <= m with |delta| = q.
template <class F>
void for_each_sub_index_of_mass(const MultiIndex& m, int q, F&& f)
{
    for_each_sub_index(m, [&](const MultiIndex& d) {
        if (d.mass() == q) f(d);
    });
}

// All multi-indices of the given mass supported on `modes`, in a fixed order.
std::vector<MultiIndex> indices_of_mass(const std::vector<int>& modes, int mass);
// All multi-indices of mass <= max_mass supported on `modes`.
std::vector<MultiIndex> indices_up_to_mass(const std::vector<int>& modes, int max_mass);

} // namespace kamnf
