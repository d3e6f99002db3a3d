#include <cmath>

#include "json.hpp"
#include "kamnf/smalldivisors.hpp"
#include "kamnf/torus.hpp"

namespace kamnf {

void VerifierReport::record(const std::string& witness, double lhs, double rhs, bool holds)
{
    ++checked;
    if (holds) return;
    ++violation_count;
    if (violations.size() < kMaxStoredViolations) violations.push_back({witness, lhs, rhs});
}

std::string report_to_json(const VerifierReport& r)
{
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["checked"] = r.checked;
    j["violation_count"] = r.violation_count;
    j["ok"] = r.ok();
    auto v = nlohmann::ordered_json::array();
    for (const auto& x : r.violations) {
        nlohmann::ordered_json e;
        e["witness"] = x.witness;
        e["lhs"] = x.lhs;
        e["rhs"] = x.rhs;
        v.push_back(e);
    }
    j["violations"] = v;
    return j.dump(2);
}

namespace {

std::vector<int> symmetric_modes(int j_max)
{
    if (j_max < 0 || j_max > kMaxAbsMode) throw std::invalid_argument("verifier: j_max out of range");
    std::vector<int> modes;
    for (int j = -j_max; j <= j_max; ++j) modes.push_back(j);
    return modes;
}

std::string pair_witness(const MultiIndex& a, const MultiIndex& b, int j)
{
    return "alpha={" + a.to_text() + "} beta={" + b.to_text() + "} j=" + std::to_string(j);
}

// Relative slack for sums of irrational powers.
bool leq_tol(double lhs, double rhs, double scale) { return lhs <= rhs + 1e-12 * std::max(1.0, scale); }

} // namespace

VerifierReport verify_small_divisor_lemma(double theta, int mass_max, int j_max)
{
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("verify_small_divisor_lemma: theta out of (0,1)");
    VerifierReport rep;
    rep.name = "small_divisor_lemma";
    auto modes = symmetric_modes(j_max);
    for (int q = 1; q <= mass_max; ++q) {
        auto idx = indices_of_mass(modes, q);
        for (const auto& a : idx)
            for (const auto& b : idx) {
                if (a == b) continue;
                long weighted = 0;
                int l1 = 0;
                double lhs = 0.0;
                for (int s = 0; s < kSlots; ++s) {
                    int d = int(a.at_slot(s)) - int(b.at_slot(s));
                    if (!d) continue;
                    int i = mode_of(s);
                    weighted += long(d) * i * i;
                    l1 += d < 0 ? -d : d;
                    lhs += double(d < 0 ? -d : d) * std::pow(japanese(i), theta / 2.0);
                }
                if ((weighted < 0 ? -weighted : weighted) > 10L * l1) continue;
                for (int s = 0; s < kSlots; ++s) {
                    if (a.at_slot(s) + b.at_slot(s) == 0) continue;
                    int j = mode_of(s);
                    double rhs = 13.0 / (1.0 - theta) * smoothing_exponent(a, b, j, theta);
                    rep.record(pair_witness(a, b, j), lhs, rhs, leq_tol(lhs, rhs, lhs));
                }
            }
    }
    return rep;
}

VerifierReport verify_binomial_sum_bound(double kappa2, int q_max, int m_mass_max, int j_max, bool inject_fault)
{
    if (!(kappa2 > 0.0 && kappa2 < 1.0)) throw std::invalid_argument("verify_binomial_sum_bound: kappa^2 out of (0,1)");
    VerifierReport rep;
    rep.name = "binomial_sum_lemma";
    const double c = c_kappa_from_square(kappa2);
    auto modes = symmetric_modes(j_max);
    for (int mass = 0; mass <= m_mass_max; ++mass) {
        const double kpow = std::pow(kappa2, mass);
        for (const auto& m : indices_of_mass(modes, mass))
            for (int q = 0; q <= std::min(q_max, mass); ++q) {
                double sum = 0.0;
                for_each_sub_index_of_mass(m, q, [&](const MultiIndex& d) { sum += multi_binomial(m, d); });
                double lhs = kpow * sum;
                double rhs = std::pow(c, q);
                bool holds = leq_tol(lhs, rhs, rhs);
                if (inject_fault) holds = !holds;
                rep.record("m={" + m.to_text() + "} q=" + std::to_string(q), lhs, rhs, holds);
            }
    }
    return rep;
}

VerifierReport verify_smoothing_positivity(int mass_max, int j_max, double theta)
{
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("verify_smoothing_positivity: theta out of (0,1)");
    VerifierReport rep;
    rep.name = "smoothing_positivity";
    auto modes = symmetric_modes(j_max);
    for (int q = 1; q <= mass_max; ++q) {
        auto idx = indices_of_mass(modes, q);
        for (const auto& a : idx)
            for (const auto& b : idx)
                for (int s = 0; s < kSlots; ++s) {
                    if (a.at_slot(s) + b.at_slot(s) == 0) continue;
                    int j = mode_of(s);
                    double e = smoothing_exponent(a, b, j, theta);
                    double scale = 2.0 * std::pow(japanese(j), theta);
                    rep.record(pair_witness(a, b, j), 0.0, e, leq_tol(0.0, e, scale));
                }
    }
    return rep;
}

VerifierReport verify_homological_chain(const Hamiltonian& f, const FrequencyVector& omega, double gamma,
                                        double sigma, double theta)
{
    if (!(gamma > 0.0)) throw std::invalid_argument("verify_homological_chain: gamma <= 0");
    VerifierReport rep;
    rep.name = "homological_chain";
    const double log_bound = homological_log_constant(sigma, theta) - std::log(gamma);
    for (const auto& t : f.terms()) {
        const auto& a = t.key.alpha;
        const auto& b = t.key.beta;
        if (a == b) continue;
        auto ell = DivisorVector::difference(a, b);
        long weighted = 0;
        for (int s = 0; s < kSlots; ++s) weighted += long(ell.ell[s]) * mode_of(s) * mode_of(s);
        bool divisor = (weighted < 0 ? -weighted : weighted) <= 10L * ell.l1();
        double w = std::fabs(omega.dot(a, b));
        for (int s = 0; s < kSlots; ++s) {
            if (a.at_slot(s) + b.at_slot(s) == 0) continue;
            int j = mode_of(s);
            double log_lhs = -sigma * smoothing_exponent(a, b, j, theta) - std::log(w);
            double log_rhs = divisor ? smoothing_budget(ell, sigma, theta) - std::log(gamma) : -std::log(9.0);
            std::string wit = pair_witness(a, b, j);
            rep.record(wit, log_lhs, log_rhs, leq_tol(log_lhs, log_rhs, std::fabs(log_rhs)));
            rep.record(wit + " total", log_rhs, log_bound, log_rhs <= log_bound);
        }
    }
    return rep;
}

} // namespace kamnf
