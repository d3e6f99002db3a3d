#include "kamnf/hamiltonian.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace kamnf {

void WeightParams::validate() const
{
    if (!(p > 1.0)) throw std::invalid_argument("WeightParams: p must exceed 1");
    if (!(s > 0.0)) throw std::invalid_argument("WeightParams: s must be positive");
    if (!(a >= 0.0)) throw std::invalid_argument("WeightParams: a must be nonnegative");
    if (!(eta >= 0.0)) throw std::invalid_argument("WeightParams: eta must be nonnegative");
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("WeightParams: theta must lie in (0,1)");
    if (!(r > 0.0)) throw std::invalid_argument("WeightParams: r must be positive");
}

double log_u0_weight(int j, double r, const WeightParams& w)
{
    double jj = japanese(j);
    return std::log(r) - w.p * std::log(jj) - w.a * std::abs(j) - w.s * std::pow(jj, w.theta);
}

double u0_weight(int j, double r, const WeightParams& w)
{
    if (r == 0.0) return 0.0;
    return std::exp(log_u0_weight(j, r, w));
}

double weighted_sup_norm(const StateVector& u, const WeightParams& w)
{
    double best = 0.0;
    for (int j : u.modes.modes()) {
        double jj = japanese(j);
        best = std::max(best, std::abs(u[j]) * std::pow(jj, w.p) * std::exp(w.a * std::abs(j) + w.s * std::pow(jj, w.theta)));
    }
    return best;
}

FrequencyVector::FrequencyVector(ModeSet modes) : omega_(std::move(modes), 0.0)
{
    for (int j : omega_.modes.modes()) set_omega(j, double(j) * double(j));
}

FrequencyVector FrequencyVector::from_xi(const RealModeArray& xi)
{
    FrequencyVector f(xi.modes);
    for (int j : xi.modes.modes()) f.set_omega(j, double(j) * double(j) + xi[j]);
    return f;
}

FrequencyVector FrequencyVector::from_omega(const RealModeArray& omega)
{
    FrequencyVector f(omega.modes);
    for (int j : omega.modes.modes()) f.set_omega(j, omega[j]);
    return f;
}

void FrequencyVector::set_omega(int j, double w)
{
    omega_[j] = w;
    by_slot_[slot_of(j)] = w;
}

RealModeArray FrequencyVector::xi_array() const
{
    RealModeArray x(modes());
    for (int j : modes().modes()) x[j] = xi(j);
    return x;
}

double FrequencyVector::dot(const MultiIndex& alpha, const MultiIndex& beta) const
{
    double s = 0.0;
    for (int k = 0; k < kSlots; ++k) {
        int l = int(alpha.at_slot(k)) - int(beta.at_slot(k));
        if (l) s += double(l) * by_slot_[k];
    }
    return s;
}

double FrequencyVector::sup_distance(const FrequencyVector& o) const
{
    double d = 0.0;
    for (int j : modes().modes()) d = std::max(d, std::abs(omega(j) - o.omega(j)));
    return d;
}

bool FrequencyVector::in_cube() const
{
    for (int j : modes().modes())
        if (std::abs(xi(j)) > 0.5) return false;
    return true;
}

Hamiltonian::Hamiltonian(ModeSet modes, int degree_cutoff) : modes_(std::move(modes)), degree_cutoff_(degree_cutoff) {}

int Hamiltonian::max_degree() const
{
    int d = 0;
    for (const auto& t : terms_) d = std::max(d, t.key.degree());
    return d;
}

namespace {

bool key_less(const Term& t, const MonomialKey& k) { return t.key < k; }

bool negligible(cplx c) { return std::abs(c.real()) <= kPruneThreshold && std::abs(c.imag()) <= kPruneThreshold; }

} // namespace

cplx Hamiltonian::coeff(const MultiIndex& alpha, const MultiIndex& beta) const
{
    MonomialKey k{alpha, beta};
    auto it = std::lower_bound(terms_.begin(), terms_.end(), k, key_less);
    if (it != terms_.end() && it->key == k) return it->coeff;
    return {0.0, 0.0};
}

void Hamiltonian::add_term(const MultiIndex& alpha, const MultiIndex& beta, cplx c)
{
    MonomialKey k{alpha, beta};
    auto it = std::lower_bound(terms_.begin(), terms_.end(), k, key_less);
    if (it != terms_.end() && it->key == k) {
        it->coeff += c;
        if (negligible(it->coeff)) terms_.erase(it);
        return;
    }
    if (negligible(c)) return;
    terms_.insert(it, Term{k, c});
}

void Hamiltonian::add_real_pair(const MultiIndex& alpha, const MultiIndex& beta, cplx c)
{
    if (alpha == beta) {
        add_term(alpha, beta, c.real());
        return;
    }
    add_term(alpha, beta, c);
    add_term(beta, alpha, std::conj(c));
}

void Hamiltonian::assign_terms(std::vector<Term> terms)
{
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.key < b.key; });
    std::vector<Term> out;
    out.reserve(terms.size());
    for (auto& t : terms) {
        if (!out.empty() && out.back().key == t.key)
            out.back().coeff += t.coeff;
        else
            out.push_back(t);
    }
    out.erase(std::remove_if(out.begin(), out.end(), [](const Term& t) { return negligible(t.coeff); }), out.end());
    terms_ = std::move(out);
}

Hamiltonian& Hamiltonian::add_scaled(const Hamiltonian& o, cplx c)
{
    std::vector<Term> out;
    out.reserve(terms_.size() + o.terms_.size());
    auto a = terms_.begin();
    auto b = o.terms_.begin();
    while (a != terms_.end() || b != o.terms_.end()) {
        if (b == o.terms_.end() || (a != terms_.end() && a->key < b->key)) {
            out.push_back(*a++);
        } else if (a == terms_.end() || b->key < a->key) {
            cplx v = c * b->coeff;
            if (!negligible(v)) out.push_back(Term{b->key, v});
            ++b;
        } else {
            cplx v = a->coeff + c * b->coeff;
            if (!negligible(v)) out.push_back(Term{a->key, v});
            ++a;
            ++b;
        }
    }
    terms_ = std::move(out);
    degree_cutoff_ = std::max(degree_cutoff_, o.degree_cutoff_);
    if (modes_.size() < o.modes_.size()) modes_ = o.modes_;
    return *this;
}

Hamiltonian& Hamiltonian::operator+=(const Hamiltonian& o) { return add_scaled(o, 1.0); }
Hamiltonian& Hamiltonian::operator-=(const Hamiltonian& o) { return add_scaled(o, -1.0); }

Hamiltonian& Hamiltonian::operator*=(cplx c)
{
    for (auto& t : terms_) t.coeff *= c;
    terms_.erase(std::remove_if(terms_.begin(), terms_.end(), [](const Term& t) { return negligible(t.coeff); }),
                 terms_.end());
    return *this;
}

bool Hamiltonian::operator==(const Hamiltonian& o) const
{
    if (!(modes_ == o.modes_) || degree_cutoff_ != o.degree_cutoff_ || terms_.size() != o.terms_.size()) return false;
    for (std::size_t i = 0; i < terms_.size(); ++i)
        if (!(terms_[i].key == o.terms_[i].key) || terms_[i].coeff != o.terms_[i].coeff) return false;
    return true;
}

Hamiltonian operator+(Hamiltonian a, const Hamiltonian& b) { return a += b; }
Hamiltonian operator-(Hamiltonian a, const Hamiltonian& b) { return a -= b; }
Hamiltonian operator*(cplx c, Hamiltonian a) { return a *= c; }

TermAccumulator::TermAccumulator(std::size_t reserve)
{
    if (reserve) map_.reserve(reserve);
}

void TermAccumulator::add(const MonomialKey& key, cplx c)
{
    auto [it, inserted] = map_.try_emplace(key, c);
    if (!inserted) it->second += c;
}

Hamiltonian TermAccumulator::finish(const ModeSet& modes, int degree_cutoff)
{
    std::vector<Term> terms;
    terms.reserve(map_.size());
    for (auto& [k, c] : map_)
        if (!negligible(c)) terms.push_back(Term{k, c});
    map_.clear();
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.key < b.key; });
    Hamiltonian h(modes, degree_cutoff);
    h.assign_terms(std::move(terms));
    return h;
}

InvariantReport check_invariants(const Hamiltonian& h, double reality_tol)
{
    InvariantReport rep;
    int jm = h.modes().j_max();
    for (const auto& t : h.terms()) {
        if (t.key.alpha.mass() != t.key.beta.mass()) rep.mass_conserving = false;
        if (negligible(t.coeff)) rep.no_zero_terms = false;
        if (t.key.alpha.max_abs_mode() > jm || t.key.beta.max_abs_mode() > jm) rep.in_mode_set = false;
        if (t.key.degree() > h.degree_cutoff()) rep.within_cutoff = false;
        cplx partner = h.coeff(t.key.beta, t.key.alpha);
        double scale = std::max(std::abs(t.coeff), 1e-300);
        double defect = std::abs(t.coeff - std::conj(partner)) / scale;
        rep.reality_defect = std::max(rep.reality_defect, defect);
    }
    rep.real = rep.reality_defect <= reality_tol;
    return rep;
}

Hamiltonian action(const ModeSet& modes, int degree_cutoff, int j)
{
    Hamiltonian h(modes, degree_cutoff);
    h.add_term(MultiIndex::unit(j), MultiIndex::unit(j), 1.0);
    return h;
}

Hamiltonian diagonal_hamiltonian(const FrequencyVector& omega, int degree_cutoff)
{
    Hamiltonian h(omega.modes(), degree_cutoff);
    std::vector<Term> terms;
    for (int j : omega.modes().modes())
        terms.push_back(Term{{MultiIndex::unit(j), MultiIndex::unit(j)}, omega.omega(j)});
    h.assign_terms(std::move(terms));
    return h;
}

Hamiltonian counterterm_hamiltonian(const RealModeArray& lambda, const RealModeArray& actions, int degree_cutoff)
{
    Hamiltonian h(lambda.modes, degree_cutoff);
    std::vector<Term> terms;
    double constant = 0.0;
    for (int j : lambda.modes.modes()) {
        if (lambda[j] == 0.0) continue;
        terms.push_back(Term{{MultiIndex::unit(j), MultiIndex::unit(j)}, lambda[j]});
        constant -= lambda[j] * actions[j];
    }
    terms.push_back(Term{{MultiIndex(), MultiIndex()}, constant});
    h.assign_terms(std::move(terms));
    return h;
}

Hamiltonian real_part(const Hamiltonian& h)
{
    std::vector<Term> terms;
    terms.reserve(2 * h.size());
    for (const auto& t : h.terms()) {
        terms.push_back(Term{t.key, 0.5 * t.coeff});
        terms.push_back(Term{{t.key.beta, t.key.alpha}, 0.5 * std::conj(t.coeff)});
    }
    Hamiltonian out(h.modes(), h.degree_cutoff());
    out.assign_terms(std::move(terms));
    return out;
}

double norm(const Hamiltonian& h, const WeightParams& w)
{
    if (h.empty()) return 0.0;
    std::array<double, kSlots> logu{};
    for (int k = 0; k < kSlots; ++k) logu[k] = log_u0_weight(mode_of(k), w.r, w);
    std::array<double, kSlots> acc{};
    for (const auto& t : h.terms()) {
        double c = std::abs(t.coeff);
        if (c == 0.0) continue;
        const auto& al = t.key.alpha.raw();
        const auto& be = t.key.beta.raw();
        double lw = std::log(c);
        long pi = 0;
        for (int k = 0; k < kSlots; ++k) {
            int tot = al[k] + be[k];
            if (tot) {
                lw += tot * logu[k];
                pi += long(mode_of(k)) * (int(al[k]) - int(be[k]));
            }
        }
        if (w.eta != 0.0) lw += w.eta * double(std::labs(pi));
        for (int k = 0; k < kSlots; ++k)
            if (be[k]) acc[k] += double(be[k]) * std::exp(lw - 2.0 * logu[k]);
    }
    double best = 0.0;
    for (double v : acc) best = std::max(best, v);
    return best;
}

double norm(const Hamiltonian& h, double r, double s, double eta, const WeightParams& w)
{
    return norm(h, w.with(r, s, eta));
}

Hamiltonian project_index_set(const Hamiltonian& h, const std::function<bool(const MultiIndex&, const MultiIndex&)>& keep)
{
    Hamiltonian out(h.modes(), h.degree_cutoff());
    std::vector<Term> terms;
    for (const auto& t : h.terms())
        if (keep(t.key.alpha, t.key.beta)) terms.push_back(t);
    out.assign_terms(std::move(terms));
    return out;
}

Hamiltonian project_R(const Hamiltonian& h)
{
    return project_index_set(h, [](const MultiIndex& a, const MultiIndex& b) { return !(a == b); });
}

Hamiltonian project_K(const Hamiltonian& h)
{
    return project_index_set(h, [](const MultiIndex& a, const MultiIndex& b) { return a == b; });
}

Hamiltonian eta_majorant(const Hamiltonian& h, double eta)
{
    std::vector<Term> terms;
    for (const auto& t : h.terms()) {
        long pi = t.key.alpha.momentum() - t.key.beta.momentum();
        terms.push_back(Term{t.key, std::abs(t.coeff) * std::exp(eta * double(std::labs(pi)))});
    }
    Hamiltonian out(h.modes(), h.degree_cutoff());
    out.assign_terms(std::move(terms));
    return out;
}

Hamiltonian truncate_degree(const Hamiltonian& h, int d, Hamiltonian* dropped)
{
    std::vector<Term> keep, drop;
    for (const auto& t : h.terms()) (t.key.degree() <= d ? keep : drop).push_back(t);
    Hamiltonian out(h.modes(), d);
    out.assign_terms(std::move(keep));
    if (dropped) {
        *dropped = Hamiltonian(h.modes(), h.degree_cutoff());
        dropped->assign_terms(std::move(drop));
    }
    return out;
}

double lipschitz_weighted_norm(const LipschitzFamily& f, double mu, const WeightParams& w)
{
    if (f.samples.empty()) throw std::invalid_argument("lipschitz_weighted_norm: no samples");
    std::vector<Hamiltonian> vals;
    double sup = 0.0;
    for (const auto& om : f.samples) {
        vals.push_back(f.eval(om));
        sup = std::max(sup, norm(vals.back(), w));
    }
    if (mu == 0.0) return sup;
    if (f.samples.size() < 2) throw std::invalid_argument("lipschitz_weighted_norm: Lipschitz part needs two samples");
    double lip = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i)
        for (std::size_t k = i + 1; k < vals.size(); ++k) {
            double d = f.samples[i].sup_distance(f.samples[k]);
            if (d == 0.0) continue;
            lip = std::max(lip, norm(vals[i] - vals[k], w) / d);
        }
    return sup + mu * lip;
}

std::string format_double(double x)
{
    if (!std::isfinite(x)) throw std::invalid_argument("format_double: non-finite value");
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, p);
}

double parse_double(std::string_view s)
{
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw std::invalid_argument("expected a number, got '" + std::string(s) + "'");
    return v;
}

void write_hamiltonian(std::ostream& os, const Hamiltonian& h)
{
    os << "# hamiltonian modes=" << h.modes().to_text() << " degree_cutoff=" << h.degree_cutoff()
       << " terms=" << h.size() << '\n';
    for (const auto& t : h.terms())
        os << t.key.alpha.to_text() << '|' << t.key.beta.to_text() << '|' << format_double(t.coeff.real()) << '|'
           << format_double(t.coeff.imag()) << '\n';
}

Hamiltonian read_hamiltonian(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line.rfind("# hamiltonian ", 0) != 0)
        throw std::invalid_argument("read_hamiltonian: missing header");
    auto field = [&](const std::string& name) -> std::string {
        auto pos = line.find(name + "=");
        if (pos == std::string::npos) throw std::invalid_argument("read_hamiltonian: header lacks " + name);
        auto start = pos + name.size() + 1;
        auto end = line.find(' ', start);
        return line.substr(start, end == std::string::npos ? std::string::npos : end - start);
    };
    ModeSet modes = ModeSet::from_text(field("modes"));
    int cutoff = int(parse_double(field("degree_cutoff")));
    std::vector<Term> terms;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::string_view v(line);
        std::array<std::string_view, 4> parts;
        std::size_t start = 0;
        for (int k = 0; k < 4; ++k) {
            auto pos = v.find('|', start);
            if (k < 3 && pos == std::string_view::npos) throw std::invalid_argument("read_hamiltonian: bad term line");
            parts[k] = v.substr(start, k < 3 ? pos - start : std::string_view::npos);
            start = pos + 1;
        }
        terms.push_back(Term{{MultiIndex::from_text(parts[0]), MultiIndex::from_text(parts[1])},
                             {parse_double(parts[2]), parse_double(parts[3])}});
    }
    Hamiltonian h(modes, cutoff);
    h.assign_terms(std::move(terms));
    return h;
}

} // namespace kamnf
