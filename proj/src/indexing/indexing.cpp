#include "kamnf/indexing.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <stdexcept>

namespace kamnf {

ModeSet::ModeSet(int j_max) : j_max_(j_max)
{
    if (j_max < 0 || j_max > kMaxAbsMode)
        throw std::invalid_argument("ModeSet: j_max must lie in [0, " + std::to_string(kMaxAbsMode) + "]");
}

ModeSet::ModeSet(int j_max, std::vector<int> tangential) : ModeSet(j_max)
{
    std::sort(tangential.begin(), tangential.end());
    tangential.erase(std::unique(tangential.begin(), tangential.end()), tangential.end());
    for (int j : tangential)
        if (!contains(j)) throw std::invalid_argument("ModeSet: tangential mode " + std::to_string(j) + " outside range");
    tangential_ = std::move(tangential);
    has_tangential_ = true;
    for (int j = -j_max_; j <= j_max_; ++j)
        if (!std::binary_search(tangential_.begin(), tangential_.end(), j)) normal_mask_ |= (1u << slot_of(j));
}

std::vector<int> ModeSet::modes() const
{
    std::vector<int> out;
    for (int j = -j_max_; j <= j_max_; ++j) out.push_back(j);
    return out;
}

bool ModeSet::is_tangential(int j) const
{
    if (!has_tangential_) return true;
    return (normal_mask_ & (1u << slot_of(j))) == 0;
}

std::string ModeSet::to_text() const
{
    std::string out = "jmax=" + std::to_string(j_max_);
    if (has_tangential_) {
        out += ";S=";
        for (std::size_t i = 0; i < tangential_.size(); ++i) {
            if (i) out += ',';
            out += std::to_string(tangential_[i]);
        }
    }
    return out;
}

namespace {

int parse_int(std::string_view s)
{
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw std::invalid_argument("expected integer, got '" + std::string(s) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

} // namespace

ModeSet ModeSet::from_text(std::string_view text)
{
    auto parts = split(text, ';');
    if (parts.empty() || parts[0].substr(0, 5) != "jmax=") throw std::invalid_argument("ModeSet: bad text form");
    int jm = parse_int(parts[0].substr(5));
    if (parts.size() == 1) return ModeSet(jm);
    if (parts.size() != 2 || parts[1].substr(0, 2) != "S=") throw std::invalid_argument("ModeSet: bad text form");
    std::vector<int> s;
    auto body = parts[1].substr(2);
    if (!body.empty())
        for (auto tok : split(body, ',')) s.push_back(parse_int(tok));
    return ModeSet(jm, std::move(s));
}

MultiIndex MultiIndex::unit(int j, int count)
{
    MultiIndex a;
    a.set(j, count);
    return a;
}

MultiIndex MultiIndex::from_pairs(std::initializer_list<std::pair<int, int>> pairs)
{
    MultiIndex a;
    for (auto [j, c] : pairs) a.add(j, c);
    return a;
}

void MultiIndex::set(int j, int count)
{
    if (j < -kMaxAbsMode || j > kMaxAbsMode) throw std::out_of_range("MultiIndex: mode out of range");
    if (count < 0 || count > 255) throw std::out_of_range("MultiIndex: exponent out of range");
    e_[slot_of(j)] = static_cast<uint8_t>(count);
}

void MultiIndex::add(int j, int count) { set(j, (*this)[j] + count); }

int MultiIndex::mass() const
{
    int s = 0;
    for (auto v : e_) s += v;
    return s;
}

long MultiIndex::momentum() const
{
    long s = 0;
    for (int k = 0; k < kSlots; ++k) s += long(mode_of(k)) * e_[k];
    return s;
}

bool MultiIndex::empty() const
{
    for (auto v : e_)
        if (v) return false;
    return true;
}

uint32_t MultiIndex::support_mask() const
{
    uint32_t m = 0;
    for (int k = 0; k < kSlots; ++k)
        if (e_[k]) m |= (1u << k);
    return m;
}

int MultiIndex::max_abs_mode() const
{
    int best = -1;
    for (int k = 0; k < kSlots; ++k)
        if (e_[k]) best = std::max(best, std::abs(mode_of(k)));
    return best;
}

std::vector<std::pair<int, int>> MultiIndex::entries() const
{
    std::vector<std::pair<int, int>> out;
    for (int k = 0; k < kSlots; ++k)
        if (e_[k]) out.emplace_back(mode_of(k), e_[k]);
    return out;
}

std::string MultiIndex::to_text() const
{
    std::string out;
    bool first = true;
    for (auto [j, c] : entries()) {
        if (!first) out += ',';
        first = false;
        out += std::to_string(j);
        out += ':';
        out += std::to_string(c);
    }
    return out;
}

MultiIndex MultiIndex::from_text(std::string_view text)
{
    MultiIndex a;
    if (text.empty()) return a;
    int last = -kMaxAbsMode - 1;
    for (auto tok : split(text, ',')) {
        auto colon = tok.find(':');
        if (colon == std::string_view::npos) throw std::invalid_argument("MultiIndex: expected j:count");
        int j = parse_int(tok.substr(0, colon));
        int c = parse_int(tok.substr(colon + 1));
        if (c <= 0) throw std::invalid_argument("MultiIndex: counts must be positive");
        if (j <= last) throw std::invalid_argument("MultiIndex: modes must be strictly ascending");
        last = j;
        a.set(j, c);
    }
    return a;
}

MultiIndex MultiIndex::operator+(const MultiIndex& o) const
{
    MultiIndex r = *this;
    r += o;
    return r;
}

MultiIndex& MultiIndex::operator+=(const MultiIndex& o)
{
    for (int k = 0; k < kSlots; ++k) {
        int v = e_[k] + o.e_[k];
        if (v > 255) throw std::out_of_range("MultiIndex: exponent overflow");
        e_[k] = static_cast<uint8_t>(v);
    }
    return *this;
}

MultiIndex MultiIndex::operator-(const MultiIndex& o) const
{
    MultiIndex r;
    for (int k = 0; k < kSlots; ++k) {
        if (o.e_[k] > e_[k]) throw std::invalid_argument("MultiIndex: negative exponent in difference");
        r.e_[k] = static_cast<uint8_t>(e_[k] - o.e_[k]);
    }
    return r;
}

bool MultiIndex::leq(const MultiIndex& o) const
{
    for (int k = 0; k < kSlots; ++k)
        if (e_[k] > o.e_[k]) return false;
    return true;
}

std::size_t MultiIndexHash::operator()(const MultiIndex& a) const noexcept
{
    uint64_t w[4];
    std::memcpy(w, a.raw().data(), sizeof(w));
    uint64_t h = 0x9e3779b97f4a7c15ull;
    for (uint64_t x : w) {
        h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        h *= 0xff51afd7ed558ccdull;
    }
    return static_cast<std::size_t>(h ^ (h >> 33));
}

std::size_t MonomialKeyHash::operator()(const MonomialKey& k) const noexcept
{
    MultiIndexHash h;
    std::size_t a = h(k.alpha), b = h(k.beta);
    return a ^ (b * 0xc2b2ae3d27d4eb4full + 0x165667b19e3779f9ull + (a << 7));
}

DisjointForm split_min(const MultiIndex& ba, const MultiIndex& bb)
{
    DisjointForm out;
    for (int k = 0; k < kSlots; ++k) {
        uint8_t m = std::min(ba.raw()[k], bb.raw()[k]);
        out.m.raw()[k] = m;
        out.alpha.raw()[k] = static_cast<uint8_t>(ba.raw()[k] - m);
        out.beta.raw()[k] = static_cast<uint8_t>(bb.raw()[k] - m);
    }
    return out;
}

std::pair<MultiIndex, MultiIndex> merge(const MultiIndex& m, const MultiIndex& alpha, const MultiIndex& beta)
{
    if (alpha.support_mask() & beta.support_mask())
        throw std::invalid_argument("merge: alpha and beta must have disjoint supports");
    return {m + alpha, m + beta};
}

double binomial(int n, int k)
{
    if (k < 0 || n < 0 || k > n) return 0.0;
    if (n > 62) throw std::out_of_range("binomial: n too large for exact arithmetic");
    k = std::min(k, n - k);
    uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * uint64_t(n - k + i) / uint64_t(i);
    return double(r);
}

double multi_binomial(const MultiIndex& m, const MultiIndex& d)
{
    double r = 1.0;
    for (int k = 0; k < kSlots; ++k) {
        int mk = m.at_slot(k), dk = d.at_slot(k);
        if (dk > mk) return 0.0;
        if (dk && dk != mk) r *= binomial(mk, dk);
    }
    return r;
}

namespace {

void enumerate_mass(const std::vector<int>& modes, std::size_t pos, int remaining, MultiIndex& cur,
                    std::vector<MultiIndex>& out)
{
    if (pos + 1 == modes.size()) {
        cur.set(modes[pos], remaining);
        out.push_back(cur);
        cur.set(modes[pos], 0);
        return;
    }
    for (int c = remaining; c >= 0; --c) {
        cur.set(modes[pos], c);
        enumerate_mass(modes, pos + 1, remaining - c, cur, out);
    }
    cur.set(modes[pos], 0);
}

} // namespace

std::vector<MultiIndex> indices_of_mass(const std::vector<int>& modes, int mass)
{
    std::vector<MultiIndex> out;
    if (mass < 0) return out;
    if (modes.empty()) {
        if (mass == 0) out.emplace_back();
        return out;
    }
    MultiIndex cur;
    enumerate_mass(modes, 0, mass, cur, out);
    return out;
}

std::vector<MultiIndex> indices_up_to_mass(const std::vector<int>& modes, int max_mass)
{
    std::vector<MultiIndex> out;
    for (int q = 0; q <= max_mass; ++q) {
        auto part = indices_of_mass(modes, q);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

} // namespace kamnf
