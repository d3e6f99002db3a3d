#include "kamnf/torus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace kamnf {

namespace {

// Actions indexed by slot; modes outside the torus carry I = 0.
std::array<double, kSlots> actions_by_slot(const TorusData& torus)
{
    std::array<double, kSlots> out{};
    for (int j : torus.modes().modes()) out[slot_of(j)] = torus.actions[j];
    return out;
}

// prod_j (sign * I_j)^{e_j}, with 0^0 = 1.
double action_power(const std::array<double, kSlots>& I, const MultiIndex& e, double sign = 1.0)
{
    double p = 1.0;
    for (int s = 0; s < kSlots; ++s) {
        int k = e.at_slot(s);
        if (k == 0) continue;
        double base = sign * I[s];
        if (base == 0.0) return 0.0;
        for (int i = 0; i < k; ++i) p *= base;
    }
    return p;
}

double factorial(int n)
{
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= double(i);
    return f;
}

void check_modes(const Hamiltonian& h, const TorusData& torus)
{
    if (h.modes().j_max() > torus.modes().j_max())
        throw std::invalid_argument("torus: Hamiltonian modes exceed the torus mode set");
}

} // namespace

double TorusData::radius_ratio() const
{
    double sup = 0.0;
    for (int j : modes().modes()) {
        double I = actions[j];
        if (I <= 0.0) continue;
        sup = std::max(sup, std::sqrt(I) / u0_weight(j, 1.0, weights));
    }
    return sup / weights.r;
}

void TorusData::validate() const
{
    weights.validate();
    if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("torus: kappa must lie in (0,1)");
    for (int j : modes().modes()) {
        double I = actions[j];
        if (!(I >= 0.0) || !std::isfinite(I)) throw std::invalid_argument("torus: actions must be finite and nonnegative");
        if (modes().has_tangential() && !modes().is_tangential(j) && I != 0.0)
            throw std::invalid_argument("torus: normal modes must carry zero action");
    }
    if (radius_ratio() > kappa * (1.0 + 1e-12))
        throw std::invalid_argument("torus: |sqrt I|_{p,s,a} exceeds kappa r");
}

TorusData make_profile_torus(const ModeSet& modes, const WeightParams& w, double scale, int support, double kappa)
{
    TorusData t;
    t.actions = RealModeArray(modes, 0.0);
    t.weights = w;
    t.kappa = kappa;
    for (int j : modes.modes()) {
        if (std::abs(j) > support) continue;
        if (modes.has_tangential() && !modes.is_tangential(j)) continue;
        double u0 = u0_weight(j, w.r, w);
        t.actions[j] = scale * u0 * u0;
    }
    return t;
}

StateVector torus_point(const TorusData& torus, const RealModeArray& angles)
{
    StateVector u(torus.modes(), 0.0);
    for (int j : torus.modes().modes()) u[j] = std::polar(std::sqrt(torus.actions[j]), angles[j]);
    return u;
}

void write_torus(std::ostream& os, const TorusData& torus)
{
    const auto& w = torus.weights;
    os << "# torus modes=" << torus.modes().to_text() << " kappa=" << format_double(torus.kappa)
       << " r=" << format_double(w.r) << " p=" << format_double(w.p) << " s=" << format_double(w.s)
       << " a=" << format_double(w.a) << " eta=" << format_double(w.eta) << " theta=" << format_double(w.theta)
       << '\n';
    for (int j : torus.modes().modes()) os << j << ':' << format_double(torus.actions[j]) << '\n';
}

TorusData read_torus(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line.rfind("# torus ", 0) != 0) throw std::invalid_argument("read_torus: missing header");
    auto field = [&](const std::string& name) -> std::string {
        auto pos = line.find(" " + name + "=");
        if (pos == std::string::npos) throw std::invalid_argument("read_torus: header lacks " + name);
        auto start = pos + name.size() + 2;
        auto end = line.find(' ', start);
        return line.substr(start, end == std::string::npos ? std::string::npos : end - start);
    };
    TorusData t;
    ModeSet modes = ModeSet::from_text(field("modes"));
    t.kappa = parse_double(field("kappa"));
    t.weights.r = parse_double(field("r"));
    t.weights.p = parse_double(field("p"));
    t.weights.s = parse_double(field("s"));
    t.weights.a = parse_double(field("a"));
    t.weights.eta = parse_double(field("eta"));
    t.weights.theta = parse_double(field("theta"));
    t.actions = RealModeArray(modes, 0.0);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto colon = line.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("read_torus: bad line '" + line + "'");
        int j = int(parse_double(std::string_view(line).substr(0, colon)));
        if (!modes.contains(j)) throw std::invalid_argument("read_torus: mode outside the mode set");
        t.actions[j] = parse_double(std::string_view(line).substr(colon + 1));
    }
    return t;
}

double c_kappa(double kappa)
{
    if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("c_kappa: kappa must lie in (0,1)");
    return c_kappa_from_square(kappa * kappa);
}

double c_kappa_from_square(double k2)
{
    if (!(k2 > 0.0 && k2 < 1.0)) throw std::invalid_argument("c_kappa: kappa^2 must lie in (0,1)");
    if (k2 > 0.5) return 1.0 / std::log(1.0 / k2);
    return 2.0 * k2;
}

double CounterTerm::sup_norm() const
{
    double m = 0.0;
    for (double x : lambda.values) m = std::max(m, std::abs(x));
    return m;
}

CounterTerm& CounterTerm::operator+=(const CounterTerm& o)
{
    for (std::size_t i = 0; i < lambda.values.size(); ++i) lambda.values[i] += o.lambda.values.at(i);
    return *this;
}

CounterTerm& CounterTerm::operator-=(const CounterTerm& o)
{
    for (std::size_t i = 0; i < lambda.values.size(); ++i) lambda.values[i] -= o.lambda.values.at(i);
    return *this;
}

CounterTerm& CounterTerm::operator*=(double c)
{
    for (double& x : lambda.values) x *= c;
    return *this;
}

CounterTerm operator+(CounterTerm a, const CounterTerm& b) { return a += b; }
CounterTerm operator-(CounterTerm a, const CounterTerm& b) { return a -= b; }
CounterTerm operator*(double c, CounterTerm a) { return a *= c; }

Hamiltonian counterterm_hamiltonian(const CounterTerm& lambda, const TorusData& torus, int degree_cutoff)
{
    return counterterm_hamiltonian(lambda.lambda, torus.actions, degree_cutoff);
}

Hamiltonian to_centered(const Hamiltonian& h, const TorusData& torus)
{
    check_modes(h, torus);
    auto I = actions_by_slot(torus);
    TermAccumulator acc(h.size() * 2);
    for (const auto& t : h.terms()) {
        DisjointForm f = split_min(t.key.alpha, t.key.beta);
        if (f.m.empty()) {
            acc.add(t.key, t.coeff);
            continue;
        }
        for_each_sub_index(f.m, [&](const MultiIndex& delta) {
            double w = action_power(I, f.m - delta);
            if (w == 0.0) return;
            w *= multi_binomial(f.m, delta);
            acc.add(MonomialKey{delta + f.alpha, delta + f.beta}, t.coeff * w);
        });
    }
    return acc.finish(h.modes(), h.degree_cutoff());
}

Hamiltonian from_centered(const Hamiltonian& c, const TorusData& torus)
{
    check_modes(c, torus);
    auto I = actions_by_slot(torus);
    TermAccumulator acc(c.size() * 2);
    for (const auto& t : c.terms()) {
        DisjointForm f = split_min(t.key.alpha, t.key.beta);
        if (f.m.empty()) {
            acc.add(t.key, t.coeff);
            continue;
        }
        for_each_sub_index(f.m, [&](const MultiIndex& gamma) {
            double w = action_power(I, f.m - gamma, -1.0);
            if (w == 0.0) return;
            w *= multi_binomial(f.m, gamma);
            acc.add(MonomialKey{gamma + f.alpha, gamma + f.beta}, t.coeff * w);
        });
    }
    return acc.finish(c.modes(), c.degree_cutoff());
}

int centered_degree(const MonomialKey& key, uint32_t normal_mask)
{
    int d = -2;
    for (int s = 0; s < kSlots; ++s) {
        int a = key.alpha.at_slot(s), b = key.beta.at_slot(s);
        int m = std::min(a, b);
        d += 2 * m;
        if (normal_mask >> s & 1u) d += (a - m) + (b - m);
    }
    return d;
}

int centered_size(const MonomialKey& key) { return key.alpha.mass() + key.beta.mass(); }

std::map<int, Hamiltonian> degree_components(const Hamiltonian& h, const TorusData& torus)
{
    Hamiltonian c = to_centered(h, torus);
    uint32_t mask = torus.modes().normal_mask();
    std::map<int, std::vector<Term>> parts;
    for (const auto& t : c.terms()) parts[centered_degree(t.key, mask)].push_back(t);
    std::map<int, Hamiltonian> out;
    for (auto& [d, terms] : parts) {
        Hamiltonian part(h.modes(), h.degree_cutoff());
        part.assign_terms(std::move(terms));
        Hamiltonian mono = from_centered(part, torus);
        if (!mono.empty()) out.emplace(d, std::move(mono));
    }
    return out;
}

namespace {

template <class Pred>
Hamiltonian select_degrees(const Hamiltonian& h, const TorusData& torus, Pred&& keep)
{
    Hamiltonian c = to_centered(h, torus);
    Hamiltonian sel = select_centered(c, torus.modes().normal_mask(), [&](int d, bool) { return keep(d); });
    return from_centered(sel, torus);
}

} // namespace

Hamiltonian project_degree(const Hamiltonian& h, const TorusData& torus, int d)
{
    if (d < -2) throw std::invalid_argument("project_degree: degree below -2");
    if (torus.full() && d % 2 != 0) throw std::invalid_argument("project_degree: odd degree on a full torus");
    return select_degrees(h, torus, [d](int e) { return e == d; });
}

Hamiltonian project_degree_geq(const Hamiltonian& h, const TorusData& torus, int d)
{
    if (d <= -2) return h;
    return select_degrees(h, torus, [d](int e) { return e >= d; });
}

Hamiltonian project_degree_leq(const Hamiltonian& h, const TorusData& torus, int d)
{
    return select_degrees(h, torus, [d](int e) { return e <= d; });
}

Hamiltonian bourgain_representation(const Hamiltonian& h, const TorusData& torus, int q)
{
    if (!torus.full()) throw std::invalid_argument("bourgain_representation: full torus only");
    if (q < 0) throw std::invalid_argument("bourgain_representation: q must be nonnegative");
    if (q == 0) return h;
    check_modes(h, torus);
    auto I = actions_by_slot(torus);
    TermAccumulator acc(h.size() * 4);
    for (const auto& t : h.terms()) {
        DisjointForm f = split_min(t.key.alpha, t.key.beta);
        int mm = f.m.mass();
        if (mm < q) continue;
        for_each_sub_index_of_mass(f.m, q, [&](const MultiIndex& delta) {
            MultiIndex rest = f.m - delta;
            double bd = multi_binomial(f.m, delta);
            for_each_sub_index(rest, [&](const MultiIndex& k) {
                double ik = action_power(I, rest - k);
                if (ik == 0.0) return;
                int kk = k.mass();
                double check = double(q) * bd * multi_binomial(rest, k) * ik * factorial(kk) *
                               factorial(mm - kk - 1) / factorial(mm);
                cplx c = t.coeff * check;
                for_each_sub_index(delta, [&](const MultiIndex& gamma) {
                    double w = action_power(I, delta - gamma, -1.0);
                    if (w == 0.0) return;
                    w *= multi_binomial(delta, gamma);
                    MultiIndex g = gamma + k;
                    acc.add(MonomialKey{g + f.alpha, g + f.beta}, c * w);
                });
            });
        });
    }
    return acc.finish(h.modes(), h.degree_cutoff());
}

double bourgain_defect(const Hamiltonian& h, const TorusData& torus, int q)
{
    Hamiltonian a = project_degree_geq(h, torus, 2 * q - 2);
    Hamiltonian b = bourgain_representation(h, torus, q);
    Hamiltonian diff = a - b;
    double scale = 0.0, defect = 0.0;
    for (const auto& t : h.terms()) scale = std::max(scale, std::abs(t.coeff));
    for (const auto& t : diff.terms()) defect = std::max(defect, std::abs(t.coeff));
    return scale > 0.0 ? defect / scale : defect;
}

CounterTerm counterterm_extract(const Hamiltonian& h, const TorusData& torus)
{
    check_modes(h, torus);
    auto I = actions_by_slot(torus);
    CounterTerm out(torus.modes());
    for (const auto& t : h.terms()) {
        if (t.key.alpha != t.key.beta || t.key.alpha.empty()) continue;
        const MultiIndex& m = t.key.alpha;
        for (int s = 0; s < kSlots; ++s) {
            int mj = m.at_slot(s);
            if (mj == 0) continue;
            MultiIndex e = m;
            e.raw()[s] = uint8_t(mj - 1);
            double w = action_power(I, e);
            if (w != 0.0) out.lambda[mode_of(s)] += t.coeff.real() * double(mj) * w;
        }
    }
    return out;
}

AffineSplit extend_projection_affine(const FrequencyVector& omega, const TorusData& torus, int degree_cutoff)
{
    AffineSplit out;
    RealModeArray lambda(torus.modes(), 0.0);
    for (int j : torus.modes().modes()) {
        double w = omega.modes().contains(j) ? omega.omega(j) : 0.0;
        lambda[j] = w;
        out.constant += w * torus.actions[j];
    }
    bool zero = std::all_of(lambda.values.begin(), lambda.values.end(), [](double x) { return x == 0.0; });
    out.zero_K = zero ? Hamiltonian(torus.modes(), degree_cutoff) : counterterm_hamiltonian(lambda, torus.actions, degree_cutoff);
    return out;
}

Hamiltonian TorusTruncator::apply(const Hamiltonian& h)
{
    Hamiltonian c = to_centered(h, torus_);
    std::vector<Term> dropped_terms;
    for (const auto& t : c.terms())
        if (centered_size(t.key) > cutoff_) dropped_terms.push_back(t);
    if (dropped_terms.empty()) {
        Hamiltonian out = h;
        out.set_degree_cutoff(cutoff_);
        return out;
    }
    Hamiltonian dropped_c(h.modes(), h.degree_cutoff());
    dropped_c.assign_terms(std::move(dropped_terms));
    Hamiltonian dropped = from_centered(dropped_c, torus_);
    residual_ += norm(dropped, w_);
    Hamiltonian diff = h - dropped;
    // Monomials above the cutoff cancel exactly; what remains of them is rounding.
    Hamiltonian out = truncate_degree(diff, cutoff_);
    out.set_degree_cutoff(cutoff_);
    return out;
}

} // namespace kamnf
