#include "kamnf/poisson.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "kamnf/parallel.hpp"

namespace kamnf {

Hamiltonian DegreeTruncator::apply(const Hamiltonian& h)
{
    Hamiltonian dropped;
    Hamiltonian kept = truncate_degree(h, cutoff_, &dropped);
    if (!dropped.empty()) residual_ += norm(dropped, w_);
    return kept;
}

namespace {

struct PackedTerm {
    const Term* t;
    uint32_t amask;
    uint32_t bmask;
};

std::vector<PackedTerm> pack(const Hamiltonian& h)
{
    std::vector<PackedTerm> out;
    out.reserve(h.size());
    for (const auto& t : h.terms()) out.push_back({&t, t.key.alpha.support_mask(), t.key.beta.support_mask()});
    return out;
}

} // namespace

Hamiltonian poisson_bracket_full(const Hamiltonian& f, const Hamiltonian& g)
{
    ModeSet modes = f.modes().size() >= g.modes().size() ? f.modes() : g.modes();
    int cutoff = std::max({f.degree_cutoff(), g.degree_cutoff(), f.degree_cutoff() + g.degree_cutoff() - 2});
    if (f.empty() || g.empty()) return Hamiltonian(modes, cutoff);
    auto pf = pack(f);
    auto pg = pack(g);
    const std::size_t n_chunks = std::clamp<std::size_t>(pf.size() / 64, 1, 64);
    std::vector<TermAccumulator> parts(n_chunks);
    const cplx I(0.0, 1.0);
    parallel_for_chunks(n_chunks, [&](std::size_t c) {
        std::size_t lo = pf.size() * c / n_chunks, hi = pf.size() * (c + 1) / n_chunks;
        auto& acc = parts[c];
        for (std::size_t i = lo; i < hi; ++i) {
            const auto& a = pf[i];
            const auto& fa = a.t->key.alpha.raw();
            const auto& fb = a.t->key.beta.raw();
            for (const auto& b : pg) {
                uint32_t mask = (a.bmask & b.amask) | (a.amask & b.bmask);
                if (!mask) continue;
                const auto& ga = b.t->key.alpha.raw();
                const auto& gb = b.t->key.beta.raw();
                MonomialKey sum{a.t->key.alpha + b.t->key.alpha, a.t->key.beta + b.t->key.beta};
                cplx prod = a.t->coeff * b.t->coeff;
                while (mask) {
                    int s = std::countr_zero(mask);
                    mask &= mask - 1;
                    int w = int(fb[s]) * int(ga[s]) - int(fa[s]) * int(gb[s]);
                    if (!w) continue;
                    MonomialKey k = sum;
                    --k.alpha.raw()[s];
                    --k.beta.raw()[s];
                    acc.add(k, I * double(w) * prod);
                }
            }
        }
    });
    if (n_chunks == 1) return parts[0].finish(modes, cutoff);
    std::vector<Term> all;
    for (auto& p : parts) {
        auto h = p.finish(modes, cutoff);
        all.insert(all.end(), h.terms().begin(), h.terms().end());
    }
    // stable sort keeps chunk order among equal keys so summation order is fixed
    std::stable_sort(all.begin(), all.end(), [](const Term& x, const Term& y) { return x.key < y.key; });
    Hamiltonian out(modes, cutoff);
    out.assign_terms(std::move(all));
    return out;
}

Hamiltonian poisson_bracket(const Hamiltonian& f, const Hamiltonian& g, Truncator* trunc)
{
    Hamiltonian full = poisson_bracket_full(f, g);
    int cutoff = std::max(f.degree_cutoff(), g.degree_cutoff());
    if (trunc) {
        Hamiltonian kept = trunc->apply(full);
        kept.set_degree_cutoff(cutoff);
        return kept;
    }
    return truncate_degree(full, cutoff);
}

Hamiltonian apply_L_omega(const Hamiltonian& g, const FrequencyVector& omega)
{
    std::vector<Term> terms;
    terms.reserve(g.size());
    for (const auto& t : g.terms()) {
        double d = omega.dot(t.key.alpha, t.key.beta);
        terms.push_back(Term{t.key, cplx(0.0, d) * t.coeff});
    }
    Hamiltonian out(g.modes(), g.degree_cutoff());
    out.assign_terms(std::move(terms));
    return out;
}

VectorField::VectorField(const Hamiltonian& h) : modes_(h.modes())
{
    for (const auto& t : h.terms()) {
        const auto& al = t.key.alpha.raw();
        const auto& be = t.key.beta.raw();
        for (int j = 0; j < kSlots; ++j) {
            if (!be[j]) continue;
            Entry e{j, cplx(0.0, double(be[j])) * t.coeff, uint32_t(factors_.size()), 0};
            for (int s = 0; s < kSlots; ++s) {
                int a = al[s], b = be[s] - (s == j ? 1 : 0);
                if (a || b) {
                    factors_.push_back({uint8_t(s), uint8_t(a), uint8_t(b)});
                    max_exp_ = std::max({max_exp_, a, b});
                    ++e.count;
                }
            }
            entries_.push_back(e);
        }
    }
}

void VectorField::powers(const StateVector& u, std::vector<cplx>& pu, std::vector<cplx>& pb) const
{
    const int stride = max_exp_ + 1;
    pu.assign(std::size_t(kSlots) * stride, 0.0);
    pb.assign(std::size_t(kSlots) * stride, 0.0);
    for (int j : u.modes.modes()) {
        int s = slot_of(j);
        cplx x = u[j], xb = std::conj(x);
        pu[s * stride] = 1.0;
        pb[s * stride] = 1.0;
        for (int k = 1; k < stride; ++k) {
            pu[s * stride + k] = pu[s * stride + k - 1] * x;
            pb[s * stride + k] = pb[s * stride + k - 1] * xb;
        }
    }
}

StateVector VectorField::operator()(const StateVector& u) const
{
    std::vector<cplx> pu, pb;
    powers(u, pu, pb);
    const int stride = max_exp_ + 1;
    std::array<cplx, kSlots> out{};
    for (const auto& e : entries_) {
        cplx m = e.coeff;
        for (uint32_t k = 0; k < e.count; ++k) {
            const auto& f = factors_[e.first + k];
            m *= pu[f.slot * stride + f.a] * pb[f.slot * stride + f.b];
        }
        out[e.target] += m;
    }
    StateVector r(u.modes);
    for (int j : u.modes.modes()) r[j] = out[slot_of(j)];
    return r;
}

StateVector VectorField::jvp(const StateVector& u, const StateVector& v) const
{
    std::vector<cplx> pu, pb;
    powers(u, pu, pb);
    const int stride = max_exp_ + 1;
    std::array<cplx, kSlots> vs{}, vbs{};
    for (int j : u.modes.modes()) {
        vs[slot_of(j)] = v[j];
        vbs[slot_of(j)] = std::conj(v[j]);
    }
    std::array<cplx, kSlots> out{};
    for (const auto& e : entries_) {
        cplx total = 0.0;
        for (uint32_t k = 0; k < e.count; ++k) {
            const auto& f = factors_[e.first + k];
            cplx d = 0.0;
            if (f.a) d += double(f.a) * pu[f.slot * stride + f.a - 1] * pb[f.slot * stride + f.b] * vs[f.slot];
            if (f.b) d += double(f.b) * pu[f.slot * stride + f.a] * pb[f.slot * stride + f.b - 1] * vbs[f.slot];
            if (d == 0.0) continue;
            for (uint32_t l = 0; l < e.count; ++l) {
                if (l == k) continue;
                const auto& g = factors_[e.first + l];
                d *= pu[g.slot * stride + g.a] * pb[g.slot * stride + g.b];
            }
            total += d;
        }
        out[e.target] += e.coeff * total;
    }
    StateVector r(u.modes);
    for (int j : u.modes.modes()) r[j] = out[slot_of(j)];
    return r;
}

StateVector vector_field(const Hamiltonian& h, const StateVector& u) { return VectorField(h)(u); }

cplx evaluate(const Hamiltonian& h, const StateVector& u)
{
    cplx total = 0.0;
    for (const auto& t : h.terms()) {
        cplx m = t.coeff;
        for (int j : u.modes.modes()) {
            int a = t.key.alpha[j], b = t.key.beta[j];
            if (a) m *= std::pow(u[j], a);
            if (b) m *= std::pow(std::conj(u[j]), b);
        }
        total += m;
    }
    return total;
}

double flow_smallness_threshold(double r, double rho) { return rho / (16.0 * std::exp(1.0) * (r + rho)); }

LieResult lie_series(const Hamiltonian& h0, const Hamiltonian& h1, const Hamiltonian& s, const LieOptions& opt)
{
    LieResult res;
    res.value = h0;
    int k_max = opt.k_max > 0 ? opt.k_max : 20;
    double q_paper = -1.0;
    double head = norm(h0, opt.w);
    if (opt.rho > 0.0) {
        double r = opt.w.r;
        double delta = flow_smallness_threshold(r, opt.rho);
        double s_norm = norm(s, opt.w.with(r + opt.rho, opt.w.s, opt.w.eta));
        q_paper = s_norm / (2.0 * delta);
        res.smallness_ok = s_norm <= delta;
        if (res.smallness_ok && opt.k_max <= 0) {
            // smallest k with 2 q^k below 1e-14, capped at 20
            int k = 1;
            while (k < 20 && 2.0 * std::pow(q_paper, k) >= 1e-14) ++k;
            k_max = k;
        }
    }
    if (s.empty() || h1.empty()) {
        res.paper_tail_bound = res.smallness_ok && q_paper >= 0 ? 0.0 : -1.0;
        return res;
    }
    Hamiltonian term = h1;
    if (opt.trunc) term = opt.trunc->apply(term);
    double fact = 1.0;
    double prev_norm = -1.0;
    for (int k = 1; k <= k_max; ++k) {
        fact *= double(k);
        if (k > 1) {
            term = poisson_bracket_full(s, term);
            term = opt.trunc ? opt.trunc->apply(term) : truncate_degree(term, std::max(h0.degree_cutoff(), s.degree_cutoff()));
        }
        if (term.empty()) {
            res.terms_used = k;
            res.last_term_norm = 0.0;
            res.tail_estimate = 0.0;
            break;
        }
        res.value.add_scaled(term, 1.0 / fact);
        double tn = norm(term, opt.w) / fact;
        res.terms_used = k;
        res.last_term_norm = tn;
        double q = prev_norm > 0.0 ? tn / prev_norm : 1.0;
        res.tail_estimate = q < 1.0 ? tn * q / (1.0 - q) : tn;
        prev_norm = tn;
        double scale = std::max(head, norm(res.value, opt.w));
        if (tn <= opt.rel_tol * scale) break;
    }
    if (res.smallness_ok && q_paper >= 0.0) res.paper_tail_bound = 2.0 * head * std::pow(q_paper, res.terms_used + 1);
    return res;
}

LieResult lie_transform(const Hamiltonian& h, const Hamiltonian& s, const LieOptions& opt)
{
    return lie_series(h, poisson_bracket_full(s, h), s, opt);
}

namespace {

void axpy(StateVector& y, const StateVector& x, cplx a)
{
    for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] += a * x.values[i];
}

StateVector plus(const StateVector& u, const StateVector& k, double h)
{
    StateVector r = u;
    axpy(r, k, h);
    return r;
}

double l2(const StateVector& u)
{
    double m = 0.0;
    for (auto& x : u.values) m += std::norm(x);
    return std::sqrt(m);
}

void check_growth(const StateVector& u, double start)
{
    double now = l2(u);
    if (!std::isfinite(now) || now > 2.0 * start + 1e-300)
        throw std::runtime_error("flow_point: divergence detected (state left twice its initial radius)");
}

} // namespace

StateVector flow_point(const VectorField& field, const StateVector& u, int steps, double time)
{
    if (steps <= 0) throw std::invalid_argument("flow_point: steps must be positive");
    StateVector x = u;
    double start = l2(u);
    double h = time / steps;
    for (int n = 0; n < steps; ++n) {
        StateVector k1 = field(x);
        StateVector k2 = field(plus(x, k1, h / 2));
        StateVector k3 = field(plus(x, k2, h / 2));
        StateVector k4 = field(plus(x, k3, h));
        for (std::size_t i = 0; i < x.values.size(); ++i)
            x.values[i] += h / 6.0 * (k1.values[i] + 2.0 * k2.values[i] + 2.0 * k3.values[i] + k4.values[i]);
        check_growth(x, start);
    }
    return x;
}

StateVector flow_point(const Hamiltonian& s, const StateVector& u, int steps)
{
    return flow_point(VectorField(s), u, steps, 1.0);
}

StateVector flow_point_tangent(const VectorField& field, const StateVector& u, int steps,
                               std::vector<StateVector>& tangents, double time)
{
    if (steps <= 0) throw std::invalid_argument("flow_point: steps must be positive");
    StateVector x = u;
    double start = l2(u);
    double h = time / steps;
    for (int n = 0; n < steps; ++n) {
        StateVector x2 = x, x3 = x, x4 = x;
        StateVector k1 = field(x);
        x2 = plus(x, k1, h / 2);
        StateVector k2 = field(x2);
        x3 = plus(x, k2, h / 2);
        StateVector k3 = field(x3);
        x4 = plus(x, k3, h);
        StateVector k4 = field(x4);
        for (auto& v : tangents) {
            StateVector d1 = field.jvp(x, v);
            StateVector d2 = field.jvp(x2, plus(v, d1, h / 2));
            StateVector d3 = field.jvp(x3, plus(v, d2, h / 2));
            StateVector d4 = field.jvp(x4, plus(v, d3, h));
            for (std::size_t i = 0; i < v.values.size(); ++i)
                v.values[i] += h / 6.0 * (d1.values[i] + 2.0 * d2.values[i] + 2.0 * d3.values[i] + d4.values[i]);
        }
        for (std::size_t i = 0; i < x.values.size(); ++i)
            x.values[i] += h / 6.0 * (k1.values[i] + 2.0 * k2.values[i] + 2.0 * k3.values[i] + k4.values[i]);
        check_growth(x, start);
    }
    return x;
}

} // namespace kamnf
