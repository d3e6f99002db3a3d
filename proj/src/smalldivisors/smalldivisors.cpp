#include "kamnf/smalldivisors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "kamnf/parallel.hpp"
#include "kamnf/random.hpp"

namespace kamnf {

DivisorVector DivisorVector::from_pairs(std::initializer_list<std::pair<int, int>> pairs)
{
    DivisorVector d;
    for (auto [j, v] : pairs) {
        if (j < -kMaxAbsMode || j > kMaxAbsMode) throw std::invalid_argument("DivisorVector: mode out of range");
        d.ell[slot_of(j)] += v;
    }
    return d;
}

DivisorVector DivisorVector::difference(const MultiIndex& alpha, const MultiIndex& beta)
{
    DivisorVector d;
    for (int s = 0; s < kSlots; ++s) d.ell[s] = int(alpha.at_slot(s)) - int(beta.at_slot(s));
    return d;
}

int DivisorVector::l1() const
{
    int n = 0;
    for (int v : ell) n += v < 0 ? -v : v;
    return n;
}

long DivisorVector::mass() const
{
    long n = 0;
    for (int v : ell) n += v;
    return n;
}

long DivisorVector::momentum() const
{
    long n = 0;
    for (int s = 0; s < kSlots; ++s) n += long(mode_of(s)) * ell[s];
    return n;
}

DivisorVector DivisorVector::canonical() const
{
    for (int v : ell) {
        if (v == 0) continue;
        if (v > 0) return *this;
        DivisorVector d;
        for (int s = 0; s < kSlots; ++s) d.ell[s] = -ell[s];
        return d;
    }
    return *this;
}

std::string DivisorVector::to_text() const
{
    std::string out = "{";
    bool first = true;
    for (int s = 0; s < kSlots; ++s) {
        if (ell[s] == 0) continue;
        if (!first) out += ',';
        first = false;
        out += std::to_string(mode_of(s)) + ':' + std::to_string(ell[s]);
    }
    return out + '}';
}

double log_diophantine_weight(const DivisorVector& ell)
{
    double acc = 0.0;
    for (int s = 0; s < kSlots; ++s) {
        if (ell.ell[s] == 0) continue;
        double n = japanese(mode_of(s));
        double v = double(ell.ell[s]);
        acc += std::log1p(v * v * n * n);
    }
    return acc;
}

double diophantine_threshold(const DivisorVector& ell, double gamma)
{
    if (ell.zero()) throw std::invalid_argument("diophantine_threshold: ell = 0");
    if (gamma < 0.0) throw std::invalid_argument("diophantine_threshold: gamma < 0");
    if (gamma == 0.0) return 0.0;
    return std::exp(std::log(gamma) - log_diophantine_weight(ell));
}

std::vector<DivisorVector> enumerate_divisors(const std::vector<int>& modes, int L,
                                              const std::function<bool(const DivisorVector&)>& keep)
{
    std::vector<DivisorVector> out;
    DivisorVector cur;
    std::vector<int> sorted = modes;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("enumerate_divisors: repeated mode");
    for (int j : sorted)
        if (j < -kMaxAbsMode || j > kMaxAbsMode) throw std::invalid_argument("enumerate_divisors: mode out of range");
    if (L < 0) throw std::invalid_argument("enumerate_divisors: L < 0");
    const std::vector<int>& order = sorted;
    // Entries before the first nonzero one stay zero, and that entry is positive.
    auto rec = [&](auto&& self, std::size_t i, int budget, bool seen) -> void {
        if (i == order.size()) {
            if (seen && (!keep || keep(cur))) out.push_back(cur);
            return;
        }
        int lo = seen ? -budget : 0;
        for (int v = lo; v <= budget; ++v) {
            cur.set(order[i], v);
            self(self, i + 1, budget - (v < 0 ? -v : v), seen || v != 0);
        }
        cur.set(order[i], 0);
    };
    rec(rec, 0, L, false);
    return out;
}

std::vector<DivisorVector> occurring_divisors(const Hamiltonian& h)
{
    std::set<DivisorVector> seen;
    for (const auto& t : h.terms())
        if (t.key.alpha != t.key.beta) seen.insert(DivisorVector::difference(t.key.alpha, t.key.beta).canonical());
    return {seen.begin(), seen.end()};
}

DivisorTable::DivisorTable(std::vector<int> modes, std::vector<DivisorVector> divisors)
    : modes_(std::move(modes)), divisors_(std::move(divisors))
{
    std::set<int> mode_set(modes_.begin(), modes_.end());
    if (mode_set.size() != modes_.size()) throw std::invalid_argument("DivisorTable: repeated mode");
    for (const auto& d : divisors_)
        for (int s = 0; s < kSlots; ++s)
            if (d.ell[s] != 0 && !mode_set.count(mode_of(s)))
                throw std::invalid_argument("DivisorTable: divisor " + d.to_text() + " outside the mode list");
    const std::size_t n = divisors_.size();
    coef_.assign(modes_.size() * n, 0.0);
    inv_weight_.assign(n, 1.0);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < modes_.size(); ++i) coef_[i * n + k] = double(divisors_[k][modes_[i]]);
        double w = 1.0;
        for (int s = 0; s < kSlots; ++s) {
            int v = divisors_[k].ell[s];
            if (v == 0) continue;
            double m = japanese(mode_of(s));
            w *= 1.0 + double(v) * double(v) * m * m;
        }
        inv_weight_[k] = w;
    }
}

namespace {

std::vector<double> omega_on(const DivisorTable& table, const FrequencyVector& omega)
{
    std::vector<double> out;
    out.reserve(table.modes().size());
    for (int j : table.modes()) {
        if (!omega.modes().contains(j)) throw std::invalid_argument("is_diophantine: mode outside the frequency vector");
        out.push_back(omega.omega(j));
    }
    return out;
}

} // namespace

DiophantineCheck is_diophantine(const FrequencyVector& omega, double gamma, const DivisorTable& table)
{
    if (gamma < 0.0) throw std::invalid_argument("is_diophantine: gamma < 0");
    DiophantineCheck out;
    if (table.size() == 0) {
        out.worst_margin = std::numeric_limits<double>::infinity();
        return out;
    }
    auto w = omega_on(table, omega);
    ScanResult r = divisor_scan(table, w.data());
    out.witness = table.divisors()[r.argmin];
    out.ok = r.min_ratio > gamma;
    out.worst_margin = gamma > 0.0 ? r.min_ratio / gamma : std::numeric_limits<double>::infinity();
    if (gamma == 0.0 && r.min_ratio == 0.0) out.worst_margin = 0.0;
    return out;
}

DiophantineCheck is_diophantine(const FrequencyVector& omega, double gamma, const std::vector<DivisorVector>& ells)
{
    std::set<int> modes;
    for (const auto& d : ells) {
        if (d.zero()) throw std::invalid_argument("is_diophantine: ell = 0");
        for (int s = 0; s < kSlots; ++s)
            if (d.ell[s] != 0) modes.insert(mode_of(s));
    }
    return is_diophantine(omega, gamma, DivisorTable({modes.begin(), modes.end()}, ells));
}

double sample_measure(double gamma, int L, int j_max, long n_samples, uint64_t seed)
{
    if (n_samples < 1) throw std::invalid_argument("sample_measure: n_samples < 1");
    if (gamma < 0.0) throw std::invalid_argument("sample_measure: gamma < 0");
    if (j_max < 0 || j_max > kMaxAbsMode) throw std::invalid_argument("sample_measure: j_max out of range");
    std::vector<int> modes;
    for (int j = -j_max; j <= j_max; ++j) modes.push_back(j);
    DivisorTable table(modes, enumerate_divisors(modes, L));
    const std::size_t m = modes.size();
    std::vector<double> omega(std::size_t(n_samples) * m);
    Rng rng(seed);
    for (long k = 0; k < n_samples; ++k)
        for (std::size_t i = 0; i < m; ++i)
            omega[k * m + i] = double(modes[i]) * double(modes[i]) + rng.uniform(-0.5, 0.5);
    if (table.size() == 0) return 0.0;

    constexpr long kChunk = 256;
    const std::size_t n_chunks = std::size_t((n_samples + kChunk - 1) / kChunk);
    std::vector<long> failures(n_chunks, 0);
    parallel_for_chunks(n_chunks, [&](std::size_t c) {
        long lo = long(c) * kChunk;
        long hi = std::min(n_samples, lo + kChunk);
        long f = 0;
        for (long k = lo; k < hi; ++k)
            if (!(divisor_scan(table, omega.data() + k * m).min_ratio > gamma)) ++f;
        failures[c] = f;
    });
    long total = 0;
    for (long f : failures) total += f;
    return double(total) / double(n_samples);
}

FrequencyVector sample_diophantine_frequency(const ModeSet& modes, double gamma, const DivisorTable& table,
                                             uint64_t seed, int max_tries)
{
    Rng rng(seed);
    for (int t = 0; t < max_tries; ++t) {
        RealModeArray xi(modes);
        for (int j : modes.modes()) xi[j] = rng.uniform(-0.5, 0.5);
        FrequencyVector omega = FrequencyVector::from_xi(xi);
        if (is_diophantine(omega, gamma, table).ok) return omega;
    }
    throw std::runtime_error("sample_diophantine_frequency: no Diophantine frequency found");
}

Hamiltonian solve_homological(const Hamiltonian& f, const FrequencyVector& omega, double gamma)
{
    std::vector<Term> out;
    out.reserve(f.size());
    for (const auto& t : f.terms()) {
        const auto& a = t.key.alpha;
        const auto& b = t.key.beta;
        if (a == b)
            throw HomologicalError("solve_homological: term " + a.to_text() + "|" + b.to_text() +
                                   " lies in the kernel of L_omega");
        double d = omega.dot(a, b);
        auto ell = DivisorVector::difference(a, b);
        if (std::fabs(d) < kNearResonance)
            throw HomologicalError("solve_homological: near-resonance omega.ell = " + format_double(d) + " at ell = " +
                                   ell.to_text());
        if (gamma > 0.0 && !(std::fabs(d) > diophantine_threshold(ell, gamma)))
            throw HomologicalError("solve_homological: divisor " + ell.to_text() + " fails the Diophantine bound");
        out.push_back({t.key, t.coeff / cplx(0.0, d)});
    }
    Hamiltonian g(f.modes(), f.degree_cutoff());
    g.assign_terms(std::move(out));
    return g;
}

namespace {

void check_sigma_theta(double sigma, double theta)
{
    if (!(sigma > 0.0 && sigma <= 1.0)) throw std::invalid_argument("sigma must lie in (0, 1]");
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must lie in (0, 1)");
}

} // namespace

double i_sharp(double sigma, double theta)
{
    check_sigma_theta(sigma, theta);
    double t = sigma * theta * (1.0 - theta);
    return std::pow(312.0 / t * std::log(156.0 / t), 2.0 / theta);
}

double smoothing_term(int i, double x, double sigma, double theta)
{
    double n = japanese(i);
    return -sigma * (1.0 - theta) * x * std::pow(n, theta / 2.0) / 13.0 + std::log1p(x * x * n * n);
}

double smoothing_budget_bound(double sigma, double theta)
{
    double is = i_sharp(sigma, theta);
    return 21.0 * is * std::log(is);
}

double smoothing_budget(const DivisorVector& ell, double sigma, double theta)
{
    check_sigma_theta(sigma, theta);
    double acc = 0.0;
    for (int s = 0; s < kSlots; ++s) {
        int v = ell.ell[s];
        if (v == 0) continue;
        acc += smoothing_term(mode_of(s), double(v < 0 ? -v : v), sigma, theta);
    }
    if (acc > smoothing_budget_bound(sigma, theta))
        throw std::logic_error("smoothing_budget: bound exceeded at ell = " + ell.to_text());
    return acc;
}

double homological_log_constant(double sigma, double theta) { return smoothing_budget_bound(sigma, theta); }

double homological_lipschitz_log_constant(double sigma, double theta, double gamma)
{
    if (!(gamma > 0.0)) throw std::invalid_argument("homological_lipschitz_log_constant: gamma <= 0");
    double is = i_sharp(sigma / 3.0, theta);
    return 63.0 * is * std::log(is) + 2.0 * std::log(1.0 / gamma);
}

double smoothing_exponent(const MultiIndex& alpha, const MultiIndex& beta, int j, double theta)
{
    double acc = 0.0;
    for (int s = 0; s < kSlots; ++s) {
        int c = alpha.at_slot(s) + beta.at_slot(s);
        if (c) acc += std::pow(japanese(mode_of(s)), theta) * double(c);
    }
    long p = alpha.momentum() - beta.momentum();
    return acc - 2.0 * std::pow(japanese(j), theta) + double(p < 0 ? -p : p);
}

} // namespace kamnf
