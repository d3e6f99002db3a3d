#include "kamnf/nls.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "kamnf/random.hpp"

namespace kamnf {

namespace {

double multinomial(const MultiIndex& m, int n)
{
    double v = std::tgamma(double(n) + 1.0);
    for (int s = 0; s < kSlots; ++s)
        if (m.at_slot(s) > 1) v /= std::tgamma(double(m.at_slot(s)) + 1.0);
    return v;
}

} // namespace

NonlinearitySpec NonlinearitySpec::power(int d, double c)
{
    NonlinearitySpec f;
    f.coeffs[{d, 0}] = c;
    return f;
}

double NonlinearitySpec::norm() const
{
    std::map<int, double> sup;
    for (const auto& [dk, c] : coeffs) {
        double v = std::abs(c) * std::exp(a_strip * std::abs(dk.second));
        sup[dk.first] = std::max(sup[dk.first], v);
    }
    double total = 0.0;
    for (const auto& [d, v] : sup) total += v * std::pow(R, d);
    return total;
}

void NonlinearitySpec::validate() const
{
    if (!(a_strip > 0.0 && R > 0.0)) throw std::invalid_argument("NonlinearitySpec: a and R must be positive");
    for (const auto& [dk, c] : coeffs) {
        if (dk.first < 1) throw std::invalid_argument("NonlinearitySpec: degree must be at least 1");
        auto it = coeffs.find({dk.first, -dk.second});
        cplx mirror = it == coeffs.end() ? cplx(0.0) : it->second;
        if (std::abs(mirror - std::conj(c)) > 1e-15 * std::max(1.0, std::abs(c)))
            throw std::invalid_argument("NonlinearitySpec: f^(d)_{-k} must equal conj f^(d)_k");
    }
}

bool NonlinearitySpec::translation_invariant() const
{
    for (const auto& [dk, c] : coeffs)
        if (dk.second != 0 && c != cplx(0.0)) return false;
    return true;
}

void write_nonlinearity(std::ostream& os, const NonlinearitySpec& f)
{
    os << "# nonlinearity a=" << format_double(f.a_strip) << " R=" << format_double(f.R) << '\n';
    for (const auto& [dk, c] : f.coeffs)
        os << dk.first << ' ' << dk.second << ' ' << format_double(c.real()) << ' ' << format_double(c.imag()) << '\n';
}

NonlinearitySpec read_nonlinearity(std::istream& is)
{
    NonlinearitySpec f;
    std::string line;
    if (!std::getline(is, line) || line.rfind("# nonlinearity ", 0) != 0)
        throw std::invalid_argument("read_nonlinearity: missing header");
    auto field = [&](const std::string& name) {
        auto pos = line.find(name + "=");
        if (pos == std::string::npos) throw std::invalid_argument("read_nonlinearity: header lacks " + name);
        auto start = pos + name.size() + 1;
        auto end = line.find(' ', start);
        return parse_double(line.substr(start, end == std::string::npos ? std::string::npos : end - start));
    };
    f.a_strip = field("a");
    f.R = field("R");
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        int d = 0, k = 0;
        std::string re, im;
        if (!(ls >> d >> k >> re >> im)) throw std::invalid_argument("read_nonlinearity: bad line '" + line + "'");
        f.coeffs[{d, k}] = cplx(parse_double(re), parse_double(im));
    }
    f.validate();
    return f;
}

Hamiltonian build_nls_perturbation(const NonlinearitySpec& f, const ModeSet& modes, int degree_cutoff)
{
    f.validate();
    Hamiltonian out(modes, degree_cutoff);
    bool any = false;
    std::map<int, std::vector<std::pair<int, cplx>>> by_degree;
    for (const auto& [dk, c] : f.coeffs)
        if (c != cplx(0.0)) by_degree[dk.first].push_back({dk.second, c});
    std::vector<Term> terms;
    for (const auto& [d, harmonics] : by_degree) {
        int n = d + 1;
        if (2 * n > degree_cutoff) continue;
        any = true;
        auto idx = indices_of_mass(modes.modes(), n);
        std::map<long, std::vector<const MultiIndex*>> by_momentum;
        for (const auto& m : idx) by_momentum[m.momentum()].push_back(&m);
        for (const auto& [k, c] : harmonics) {
            // pi(alpha) - pi(beta) = -k
            for (const auto& [pa, alphas] : by_momentum) {
                auto it = by_momentum.find(pa + k);
                if (it == by_momentum.end()) continue;
                for (const MultiIndex* a : alphas) {
                    double ma = multinomial(*a, n);
                    for (const MultiIndex* b : it->second)
                        terms.push_back({{*a, *b}, c * (ma * multinomial(*b, n) / double(n))});
                }
            }
        }
    }
    if (!any && !by_degree.empty()) throw std::invalid_argument("build_nls_perturbation: degree cutoff holds no term");
    out.assign_terms(std::move(terms));
    return out;
}

double c_alg(double p)
{
    if (!(p > 1.0)) throw std::invalid_argument("c_alg: need p > 1");
    return std::pow(2.0, p + 1.0) * (1.0 + 2.0 * std::riemann_zeta(p));
}

double c_weight(double p, double s, double t, double theta)
{
    if (!(t > 0.0)) throw std::invalid_argument("c_weight: need t > 0");
    double best = -std::numeric_limits<double>::infinity();
    for (long j = 0; j <= 10000000L; ++j) {
        double jj = japanese(int(std::min<long>(j, 1L << 30)));
        double v = -t * double(j) + s * std::pow(jj, theta) + p * std::log(jj);
        best = std::max(best, v);
        // Past the maximum the exponent is decreasing once t exceeds the remaining derivative.
        if (j > 2 && t * jj > 2.0 * (s * theta * std::pow(jj, theta) + p) && v < best - 50.0) break;
    }
    return std::exp(best);
}

RegularityReport verify_regularity_bound(const Hamiltonian& p, const NonlinearitySpec& f, const WeightParams& w)
{
    RegularityReport rep;
    rep.c_alg = c_alg(w.p);
    double ca = rep.c_alg * w.r;
    if (ca * ca > f.R) throw std::invalid_argument("verify_regularity_bound: need (C_alg r)^2 <= R");
    double t = f.a_strip - w.a - w.eta;
    if (!(t > 0.0)) throw std::invalid_argument("verify_regularity_bound: need a + eta < a_strip");
    rep.c_weight = c_weight(w.p, w.s, t, w.theta);
    rep.lhs = norm(p, w);
    rep.rhs = rep.c_weight * ca * ca * f.norm() / f.R;
    rep.holds = rep.lhs <= rep.rhs;
    return rep;
}

RealModeArray potential_from_counterterm(const CounterTerm& lambda, const FrequencyVector& omega)
{
    RealModeArray v(omega.modes(), 0.0);
    for (int j : omega.modes().modes()) v[j] = lambda.lambda[j] + omega.xi(j);
    return v;
}

KamConfig nls_kam_config(const NlsParams& tp, const NonlinearitySpec& f, const KamConfig& base)
{
    KamConfig cfg = base;
    cfg.weights.p = tp.p;
    cfg.weights.a = tp.a;
    cfg.weights.theta = tp.theta;
    cfg.r = tp.r;
    cfg.r0 = 2.0 * std::sqrt(2.0) * tp.r;
    cfg.rho = cfg.r0 - 2.0 * tp.r;
    cfg.eta0 = (f.a_strip - tp.a) / 2.0;
    cfg.sigma = 0.5 * std::min({tp.s, cfg.eta0, 2.0});
    cfg.s0 = tp.s - cfg.sigma;
    cfg.weights = cfg.weights.with(cfg.r0, cfg.s0, cfg.eta0);
    return cfg;
}

TorusData nls_profile_torus(const ModeSet& modes, const NlsParams& tp, int support)
{
    WeightParams w;
    w.p = tp.p;
    w.s = tp.s;
    w.a = tp.a;
    w.theta = tp.theta;
    w.eta = 0.0;
    w.r = 2.0 * std::sqrt(2.0) * tp.r;
    TorusData t = make_profile_torus(modes, w, 1.0, support, 0.5);
    for (double& v : t.actions.values) v *= (tp.r * tp.r / 4.0) / (w.r * w.r);
    return t;
}

double log_eps_star(const KamConfig& cfg, const NonlinearitySpec& f)
{
    double ca = c_alg(cfg.weights.p);
    double cw = c_weight(cfg.weights.p, cfg.s0, cfg.eta0, cfg.weights.theta);
    (void)f;
    return -2.0 * log_frak_K(cfg) - std::log(8.0 * ca * ca * cw);
}

FrequencyVector sample_scheme_frequency(const ModeSet& modes, double gamma, int degree_cutoff, uint64_t seed,
                                        int max_tries)
{
    int normal_l1 = modes.has_tangential() ? 2 : degree_cutoff;
    DivisorTable table(modes.modes(), scheme_divisors(modes, degree_cutoff, normal_l1));
    return sample_diophantine_frequency(modes, gamma, table, seed, max_tries);
}

PotentialResult run_potential_theorem(const NonlinearitySpec& f, const FrequencyVector& omega, const TorusData& torus,
                                  const KamConfig& cfg, double r)
{
    PotentialResult out;
    out.P = build_nls_perturbation(f, torus.modes(), cfg.degree_cutoff);
    out.smallness = f.norm() * r * r / (cfg.gamma * f.R);
    out.log_eps_star = log_eps_star(cfg, f);
    out.run = run_counterterm_theorem(out.P, omega, torus, cfg);
    out.V = potential_from_counterterm(out.run.Lambda, omega);
    return out;
}

} // namespace kamnf
