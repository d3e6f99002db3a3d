#include "kamnf/kam.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "kamnf/poisson.hpp"
#include "kamnf/random.hpp"

namespace kamnf {

namespace {

constexpr double kPi = 3.14159265358979323846;

double elapsed_ms(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

Hamiltonian drop_constant(const Hamiltonian& h)
{
    std::vector<Term> kept;
    kept.reserve(h.size());
    for (const auto& t : h.terms())
        if (!(t.key.alpha.empty() && t.key.beta.empty())) kept.push_back(t);
    if (kept.size() == h.size()) return h;
    Hamiltonian out(h.modes(), h.degree_cutoff());
    out.assign_terms(std::move(kept));
    return out;
}

// Degree pieces of a Hamiltonian at the torus, each returned in monomial form.
struct Pieces {
    Hamiltonian m2R;     // degree -2, non-constant
    Hamiltonian m1;      // degree -1
    CounterTerm zeroK;   // degree 0, action part
    Hamiltonian zeroR;   // degree 0, the rest
    Hamiltonian low;     // degrees 1 and 2
    Hamiltonian high;    // degree >= 1, when requested
};

enum PieceMask : unsigned { kM2 = 1, kM1 = 2, kZeroK = 4, kZeroR = 8, kLow = 16, kHigh = 32 };

Pieces split_pieces(const Hamiltonian& h, const TorusData& torus, unsigned want, int size_cap)
{
    Hamiltonian c = to_centered(h, torus);
    uint32_t mask = torus.modes().normal_mask();
    std::vector<Term> m2, m1, z, lo, hi;
    Pieces out;
    out.zeroK = CounterTerm(torus.modes());
    for (const auto& t : c.terms()) {
        if (centered_size(t.key) > size_cap) continue;
        int d = centered_degree(t.key, mask);
        bool k = t.key.alpha == t.key.beta;
        if (d == -2) {
            if (!k && (want & kM2)) m2.push_back(t);
        } else if (d == -1) {
            if (want & kM1) m1.push_back(t);
        } else if (d == 0) {
            if (k) {
                if (want & kZeroK) {
                    for (int s = 0; s < kSlots; ++s)
                        if (t.key.alpha.at_slot(s)) {
                            out.zeroK.lambda[mode_of(s)] += t.coeff.real();
                            break;
                        }
                }
            } else if (want & kZeroR) {
                z.push_back(t);
            }
        } else {
            if ((want & kLow) && d <= 2) lo.push_back(t);
            if (want & kHigh) hi.push_back(t);
        }
    }
    auto back = [&](std::vector<Term>& terms) {
        Hamiltonian part(h.modes(), h.degree_cutoff());
        if (terms.empty()) return part;
        part.assign_terms(std::move(terms));
        return from_centered(part, torus);
    };
    out.m2R = back(m2);
    out.m1 = back(m1);
    out.zeroR = back(z);
    out.low = back(lo);
    out.high = back(hi);
    return out;
}

Hamiltonian bracket_or_empty(const Hamiltonian& s, const Hamiltonian& g)
{
    if (s.empty() || g.empty()) return Hamiltonian(g.modes(), std::max(s.degree_cutoff(), g.degree_cutoff()));
    return poisson_bracket_full(s, g);
}

Hamiltonian basis_counterterm(const TorusData& torus, int j, int cutoff)
{
    CounterTerm e(torus.modes());
    e.lambda[j] = 1.0;
    return drop_constant(counterterm_hamiltonian(e, torus, cutoff));
}

} // namespace

void KamConfig::validate() const
{
    weights.validate();
    auto bad = [](const char* what) { throw std::invalid_argument(std::string("KamConfig: ") + what); };
    if (!(r0 > 0.0 && s0 > 0.0 && eta0 > 0.0)) bad("r0, s0, eta0 must be positive");
    if (!(rho > 0.0 && rho < r0 / 2.0)) bad("need 0 < rho < r0/2");
    if (!(r > 0.0 && r <= r0 / (2.0 * std::sqrt(2.0)) * (1.0 + 1e-15))) bad("need 0 < r <= r0/(2 sqrt 2)");
    if (!(sigma > 0.0 && sigma < std::min(eta0 / 2.0, 1.0))) bad("need 0 < sigma < min(eta0/2, 1)");
    if (!(gamma > 0.0 && gamma < 1.0)) bad("need 0 < gamma < 1");
    if (degree_cutoff < 2) bad("degree_cutoff must be at least 2");
    if (max_steps < 0) bad("max_steps must be nonnegative");
    if (!(eps_target > 0.0)) bad("eps_target must be positive");
    if (!(chi > 1.0 && chi < 2.0)) bad("chi must lie in (1, 2)");
    if (!(frak_C > 1.0)) bad("frak_C must exceed 1");
    if (flow_steps < 1) bad("flow_steps must be positive");
    if (!(neumann_tol > 0.0)) bad("neumann_tol must be positive");
}

ScheduleValues schedule(int n, const KamConfig& cfg)
{
    if (n < 0) throw std::invalid_argument("schedule: n < 0");
    auto sigma_at = [&](int i) { return i == 0 ? cfg.sigma / 8.0 : 9.0 * cfg.sigma / (4.0 * kPi * kPi * double(i) * double(i)); };
    ScheduleValues v;
    v.r = cfg.r0;
    v.s = cfg.s0;
    v.eta = cfg.eta0;
    for (int i = 0; i < n; ++i) {
        double rho_i = cfg.rho / 4.0 * std::ldexp(1.0, -i);
        v.r -= 2.0 * rho_i;
        v.s += 2.0 * sigma_at(i);
        v.eta -= 2.0 * sigma_at(i);
    }
    v.rho = cfg.rho / 4.0 * std::ldexp(1.0, -n);
    v.sigma = sigma_at(n);
    return v;
}

ScheduleValues schedule_limit(const KamConfig& cfg)
{
    return {cfg.r0 - cfg.rho, cfg.s0 + cfg.sigma, cfg.eta0 - cfg.sigma, 0.0, 0.0};
}

CounterOperator::CounterOperator(const ModeSet& m, int degree_cutoff) : modes(m)
{
    columns.assign(m.size(), Hamiltonian(m, degree_cutoff));
}

Hamiltonian CounterOperator::apply(const CounterTerm& h) const
{
    Hamiltonian out(modes, columns.empty() ? 0 : columns.front().degree_cutoff());
    for (int j : modes.modes()) {
        double c = h.lambda[j];
        if (c != 0.0 && !columns[modes.index(j)].empty()) out.add_scaled(columns[modes.index(j)], c);
    }
    return out;
}

bool CounterOperator::zero() const
{
    return std::all_of(columns.begin(), columns.end(), [](const Hamiltonian& h) { return h.empty(); });
}

double CounterOperator::column_bound(const WeightParams& w) const
{
    double m = 0.0;
    for (const auto& c : columns) m = std::max(m, norm(c, w));
    return m;
}

NeumannResult neumann_invert(const std::function<CounterTerm(const CounterTerm&)>& apply_M, const CounterTerm& rhs,
                             double tol, int max_iterations)
{
    NeumannResult out;
    out.x = rhs;
    CounterTerm term = rhs;
    double prev = term.sup_norm();
    int growth = 0;
    while (prev >= tol) {
        if (out.iterations >= max_iterations) throw KamError("neumann_invert: iteration cap reached");
        term = apply_M(term);
        term *= -1.0;
        out.x += term;
        ++out.iterations;
        double cur = term.sup_norm();
        growth = cur > prev ? growth + 1 : 0;
        if (growth >= 3) throw KamError("neumann_invert: increments grew three times in a row");
        prev = cur;
    }
    CounterTerm res = out.x + apply_M(out.x) - rhs;
    out.residual = res.sup_norm();
    return out;
}

SmallnessParts smallness(const Hamiltonian& g, const TorusData& torus, const WeightParams& w, double gamma)
{
    Pieces p = split_pieces(g, torus, kM2 | kM1 | kZeroK | kZeroR | kHigh, std::numeric_limits<int>::max());
    SmallnessParts s;
    s.zero_K = p.zeroK.sup_norm();
    s.zero_R = norm(p.zeroR, w);
    s.minus_two = norm(p.m2R, w);
    s.minus_one = norm(p.m1, w);
    s.high = norm(p.high, w);
    s.eps = (s.zero_K + s.zero_R + s.minus_two + s.minus_one) / gamma;
    s.theta = s.high / gamma + s.eps;
    return s;
}

KamState initial_state(const Hamiltonian& g0, const TorusData& torus, const KamConfig& cfg)
{
    cfg.validate();
    if (!(g0.modes() == torus.modes())) throw std::invalid_argument("initial_state: mode sets differ");
    KamState st;
    st.sched = schedule(0, cfg);
    WeightParams w0 = cfg.at(st.sched.r, st.sched.s, st.sched.eta);
    TorusTruncator trunc(torus, cfg.degree_cutoff, w0);
    Hamiltonian g = g0;
    g.set_degree_cutoff(cfg.degree_cutoff);
    st.G = drop_constant(trunc.apply(g));
    st.G.set_degree_cutoff(cfg.degree_cutoff);
    st.truncation_residual = trunc.residual();
    st.L = CounterOperator(torus.modes(), cfg.degree_cutoff);
    st.Lambda = CounterTerm(torus.modes());
    auto sm = smallness(st.G, torus, w0, cfg.gamma);
    st.eps = sm.eps;
    st.theta = sm.theta;
    return st;
}

KamStepResult kam_step(const KamState& state, const FrequencyVector& omega, const TorusData& torus,
                       const KamConfig& cfg)
{
    auto t0 = std::chrono::steady_clock::now();
    const int D = cfg.degree_cutoff;
    const ModeSet& modes = torus.modes();
    const std::vector<int> mode_list = modes.modes();
    const std::size_t N = mode_list.size();
    const ScheduleValues sn = state.sched;
    const ScheduleValues sn1 = schedule(state.n + 1, cfg);
    const WeightParams w_n = cfg.at(sn.r, sn.s, sn.eta);
    const WeightParams w_next = cfg.at(sn1.r, sn1.s, sn1.eta);

    auto Linv = [&](const Hamiltonian& f) { return f.empty() ? f : solve_homological(f, omega, cfg.gamma); };
    const unsigned low_parts = kM1 | kZeroK | kZeroR;

    Pieces g = split_pieces(state.G, torus, kM2 | kM1 | kZeroK | kZeroR | kLow, D);

    // Lambda_bar = 0 part of the triangular solve.
    Hamiltonian S2_0 = Linv(g.m2R);
    Pieces B2_0 = split_pieces(bracket_or_empty(S2_0, g.low), torus, low_parts, D);
    Hamiltonian b0 = g.m1 + B2_0.m1;
    Hamiltonian S1_0 = Linv(b0);
    Pieces B1_0 = split_pieces(bracket_or_empty(S1_0, g.low), torus, kZeroK | kZeroR, D);

    CounterTerm rhs = g.zeroK + B2_0.zeroK + B1_0.zeroK;
    rhs *= -1.0;

    // Columns of M_n and the matching parts of S.
    std::vector<std::vector<double>> M(N, std::vector<double>(N, 0.0));
    std::vector<Hamiltonian> S2_cols(N), S1_cols(N), R_cols(N);
    const bool L_zero = state.L.zero();
    if (!L_zero) {
        for (std::size_t c = 0; c < N; ++c) {
            const Hamiltonian& col = state.L.columns[c];
            if (col.empty()) continue;
            Pieces cp = split_pieces(col, torus, kM2 | kM1 | kZeroK | kZeroR, D);
            S2_cols[c] = Linv(cp.m2R);
            Pieces B2 = split_pieces(bracket_or_empty(S2_cols[c], g.low), torus, low_parts, D);
            S1_cols[c] = Linv(cp.m1 + B2.m1);
            Pieces B1 = split_pieces(bracket_or_empty(S1_cols[c], g.low), torus, kZeroK | kZeroR, D);
            CounterTerm mcol = cp.zeroK + B2.zeroK + B1.zeroK;
            for (std::size_t r = 0; r < N; ++r) M[r][c] = mcol.lambda.values[r];
            R_cols[c] = cp.zeroR + B2.zeroR + B1.zeroR;
        }
    }
    double m_norm = 0.0;
    for (std::size_t r = 0; r < N; ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < N; ++c) row += std::fabs(M[r][c]);
        m_norm = std::max(m_norm, row);
    }
    if (m_norm >= 1.0) throw KamError("kam_step: M_n is not a contraction (norm " + format_double(m_norm) + ")");

    auto apply_M = [&](const CounterTerm& h) {
        CounterTerm out(modes);
        for (std::size_t r = 0; r < N; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < N; ++c) acc += M[r][c] * h.lambda.values[c];
            out.lambda.values[r] = acc;
        }
        return out;
    };
    NeumannResult nr = neumann_invert(apply_M, rhs, cfg.neumann_tol * std::max(1.0, rhs.sup_norm()));
    const CounterTerm& lbar = nr.x;

    Hamiltonian S2 = S2_0, S1 = S1_0;
    Hamiltonian zr = g.zeroR + B2_0.zeroR + B1_0.zeroR;
    for (std::size_t c = 0; c < N; ++c) {
        double l = lbar.lambda.values[c];
        if (l == 0.0) continue;
        if (!S2_cols[c].empty()) S2.add_scaled(S2_cols[c], l);
        if (!S1_cols[c].empty()) S1.add_scaled(S1_cols[c], l);
        if (!R_cols[c].empty()) zr.add_scaled(R_cols[c], l);
    }
    Hamiltonian S0 = Linv(zr);
    Hamiltonian S = S2 + S1 + S0;
    S.set_degree_cutoff(D);

    // X = G_n + (Id + L_n) Lambda_bar
    Hamiltonian X = state.G + drop_constant(counterterm_hamiltonian(lbar, torus, D));
    if (!L_zero) X += state.L.apply(lbar);
    X.set_degree_cutoff(D);

    StepDiagnostics diag;
    diag.n = state.n;
    diag.eps = state.eps;
    diag.theta = state.theta;
    diag.lambda_bar_sup = lbar.sup_norm();
    diag.m_norm = m_norm;
    diag.neumann_iterations = nr.iterations;
    diag.neumann_residual = nr.residual;
    diag.s_norm = norm(S, cfg.at(sn.r - sn.rho, sn1.s, sn1.eta));

    {
        Hamiltonian eq = X - apply_L_omega(S, omega) + bracket_or_empty(S2 + S1, g.low);
        Pieces e = split_pieces(eq, torus, kM2 | kM1 | kZeroK | kZeroR, D);
        double num = e.zeroK.sup_norm() + norm(e.zeroR, w_n) + norm(e.m2R, w_n) + norm(e.m1, w_n);
        double den = std::max(norm(state.G, w_n), std::numeric_limits<double>::min());
        diag.homological_residual = num / den;
    }

    KamStepResult out;
    out.S = S;
    out.lambda_bar = lbar;
    KamState& nx = out.next;
    nx.n = state.n + 1;
    nx.sched = sn1;
    nx.Lambda = state.Lambda + lbar;
    nx.S = state.S;
    nx.S.push_back(S);

    LieOptions opt;
    opt.k_max = cfg.lie_k_max;
    opt.w = w_next;
    {
        TorusTruncator tg(torus, D, w_next);
        opt.trunc = &tg;
        Hamiltonian h1 = bracket_or_empty(S, X) - apply_L_omega(S, omega);
        LieResult lr = lie_series(X, h1, S, opt);
        nx.G = drop_constant(lr.value);
        nx.G.set_degree_cutoff(D);
        diag.trunc_residual = tg.residual() + lr.tail_estimate;
        diag.lie_terms = lr.terms_used;
    }
    nx.truncation_residual = state.truncation_residual + diag.trunc_residual;

    nx.L = CounterOperator(modes, D);
    for (std::size_t c = 0; c < N; ++c) {
        TorusTruncator tc(torus, D, w_next);
        opt.trunc = &tc;
        const Hamiltonian& old = L_zero ? nx.L.columns[c] : state.L.columns[c];
        Hamiltonian y = basis_counterterm(torus, mode_list[c], D) + old;
        LieResult lr = lie_series(old, bracket_or_empty(S, y), S, opt);
        Hamiltonian col = drop_constant(lr.value);
        col.set_degree_cutoff(D);
        diag.column_increment = std::max(diag.column_increment, norm(col - old, w_next));
        diag.column_dropped += tc.residual() + lr.tail_estimate;
        nx.L.columns[c] = std::move(col);
    }

    auto sm = smallness(nx.G, torus, w_next, cfg.gamma);
    nx.eps = sm.eps;
    nx.theta = sm.theta;
    diag.eps_next = nx.eps;
    diag.theta_next = nx.theta;
    diag.wall_ms = elapsed_ms(t0);
    out.diag = diag;
    return out;
}

double homological_power_constant(double theta)
{
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("homological_power_constant: theta out of (0,1)");
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 1200; ++k) {
        double sigma = std::pow(10.0, -double(k) / 100.0);
        double t = sigma * theta * (1.0 - theta);
        double ln_is = (2.0 / theta) * std::log(312.0 / t * std::log(156.0 / t));
        double v = std::log(21.0) + ln_is + std::log(ln_is) + (3.0 / theta) * std::log(sigma);
        best = std::max(best, v);
    }
    return std::exp(best);
}

double log_frak_K(const KamConfig& cfg)
{
    const double theta = cfg.weights.theta;
    const double C = homological_power_constant(theta);
    const double Cp = 2.0 * std::pow(4.0 * kPi * kPi / (9.0 * cfg.sigma), 3.0 / theta) * C;
    double best = -std::numeric_limits<double>::infinity();
    int falling = 0;
    double prev = best;
    for (int n = 0; n <= 100000; ++n) {
        double decay = std::exp(double(n) * std::log(cfg.chi)) * (2.0 - cfg.chi);
        double f = 4.0 * double(n) * std::log(2.0) + 2.0 * Cp * std::pow(double(n), 6.0 / theta) - decay;
        best = std::max(best, f);
        falling = f < prev ? falling + 1 : 0;
        prev = f;
        if (falling >= 5 && decay > 0.0 && !std::isfinite(f)) break;
        if (falling >= 50) break;
    }
    return std::log(cfg.frak_C) + 4.0 * std::log(cfg.r0 / cfg.rho) + best;
}

QuadraticFit fit_quadratic_constant(const std::vector<StepDiagnostics>& steps, double floor)
{
    QuadraticFit f;
    double acc = 0.0;
    for (const auto& s : steps) {
        if (!(s.eps > 0.0) || !(s.eps_next > floor)) continue;
        acc += std::log(s.eps_next) - 2.0 * std::log(s.eps);
        ++f.used;
    }
    if (f.used == 0) return f;
    f.K_fit = std::exp(acc / f.used);
    for (const auto& s : steps) {
        if (!(s.eps > 0.0)) continue;
        f.worst_ratio = std::max(f.worst_ratio, s.eps_next / (f.K_fit * s.eps * s.eps));
    }
    return f;
}

KamRunResult run_counterterm_theorem(const Hamiltonian& g0, const FrequencyVector& omega, const TorusData& torus,
                                     const KamConfig& cfg)
{
    auto t0 = std::chrono::steady_clock::now();
    KamRunResult res;
    KamState st = initial_state(g0, torus, cfg);
    res.eps0 = st.eps;
    res.theta0 = st.theta;
    res.log_K = log_frak_K(cfg);
    res.log_C_bar = 7.0 * std::log(2.0) + res.log_K;
    res.theory_smallness =
        res.eps0 == 0.0 || std::log(res.eps0) <= -3.0 * std::log1p(res.theta0) - 2.0 * res.log_K;
    int stalled = 0;
    try {
        while (st.eps >= cfg.eps_target && st.n < cfg.max_steps) {
            KamStepResult r = kam_step(st, omega, torus, cfg);
            res.steps.push_back(r.diag);
            stalled = r.diag.eps_next >= r.diag.eps ? stalled + 1 : 0;
            st = std::move(r.next);
            if (stalled >= 3) {
                res.failure = "eps_n failed to decrease for 3 steps";
                break;
            }
        }
    } catch (const std::exception& e) {
        res.failure = e.what();
    }
    res.converged = res.failure.empty() && st.eps < cfg.eps_target;
    if (res.failure.empty() && !res.converged) res.failure = "max_steps reached with eps above target";
    res.eps_final = st.eps;
    res.Lambda = st.Lambda;
    res.S = st.S;
    res.N = diagonal_hamiltonian(omega, cfg.degree_cutoff) + st.G;
    // Dropped column parts act on the counter-terms fixed in later steps.
    double trunc = st.truncation_residual;
    double tail = 0.0;
    for (std::size_t i = res.steps.size(); i-- > 0;) {
        trunc += res.steps[i].column_dropped * tail;
        tail += res.steps[i].lambda_bar_sup;
    }
    res.truncation_residual = trunc;
    res.K_fit = fit_quadratic_constant(res.steps).K_fit;
    res.elapsed_ms = elapsed_ms(t0);
    return res;
}

StateVector apply_psi(const std::vector<Hamiltonian>& S, const StateVector& u, int steps, std::size_t count)
{
    StateVector v = u;
    std::size_t n = std::min(count, S.size());
    for (std::size_t i = n; i-- > 0;)
        if (!S[i].empty()) v = flow_point(S[i], v, steps);
    return v;
}

namespace {

RealModeArray random_angles(Rng& rng, const ModeSet& modes)
{
    RealModeArray a(modes);
    for (int j : modes.modes()) a[j] = rng.uniform(0.0, 2.0 * kPi);
    return a;
}

} // namespace

InvarianceReport check_invariance(const Hamiltonian& h, const CounterTerm& lambda, const std::vector<Hamiltonian>& S,
                                  const FrequencyVector& omega, const TorusData& torus, int n_points, uint64_t seed,
                                  int flow_steps, const WeightParams& w)
{
    const ModeSet& modes = torus.modes();
    const auto mode_list = modes.modes();
    const int N = int(mode_list.size());
    Hamiltonian total = h + counterterm_hamiltonian(lambda, torus, h.degree_cutoff());
    VectorField field(total);
    std::vector<VectorField> flows;
    for (const auto& s : S) flows.emplace_back(s);
    Rng rng(seed);
    InvarianceReport rep;
    for (int p = 0; p < n_points; ++p) {
        StateVector u = torus_point(torus, random_angles(rng, modes));
        std::vector<StateVector> tangents;
        for (int k = 0; k < 2 * N; ++k) {
            StateVector t(modes, cplx(0.0, 0.0));
            t[mode_list[k % N]] = k < N ? cplx(1.0, 0.0) : cplx(0.0, 1.0);
            tangents.push_back(t);
        }
        StateVector v = u;
        for (std::size_t i = flows.size(); i-- > 0;) v = flow_point_tangent(flows[i], v, flow_steps, tangents);
        Eigen::MatrixXd A(2 * N, 2 * N);
        for (int k = 0; k < 2 * N; ++k)
            for (int i = 0; i < N; ++i) {
                A(i, k) = tangents[k][mode_list[i]].real();
                A(N + i, k) = tangents[k][mode_list[i]].imag();
            }
        StateVector x = field(v);
        Eigen::VectorXd b(2 * N);
        for (int i = 0; i < N; ++i) {
            b(i) = x[mode_list[i]].real();
            b(N + i) = x[mode_list[i]].imag();
        }
        Eigen::VectorXd y = A.partialPivLu().solve(b);
        StateVector defect(modes);
        for (int i = 0; i < N; ++i) {
            int j = mode_list[i];
            defect[j] = cplx(y(i), y(N + i)) - cplx(0.0, omega.omega(j)) * u[j];
        }
        double d = weighted_sup_norm(defect, w);
        rep.defects.push_back(d);
        rep.max_defect = std::max(rep.max_defect, d);
        ++rep.points;
    }
    return rep;
}

std::vector<double> psi_increments(const std::vector<Hamiltonian>& S, const TorusData& torus, int n_points,
                                   uint64_t seed, int flow_steps, const WeightParams& w)
{
    Rng rng(seed);
    std::vector<StateVector> points;
    for (int p = 0; p < n_points; ++p) points.push_back(torus_point(torus, random_angles(rng, torus.modes())));
    std::vector<double> out;
    for (std::size_t n = 1; n <= S.size(); ++n) {
        double m = 0.0;
        for (const auto& u : points) {
            StateVector a = apply_psi(S, u, flow_steps, n);
            StateVector b = apply_psi(S, u, flow_steps, n - 1);
            for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] -= b.values[i];
            m = std::max(m, weighted_sup_norm(a, w));
        }
        out.push_back(m);
    }
    return out;
}

std::vector<DivisorVector> scheme_divisors(const ModeSet& modes, int L, int normal_l1)
{
    uint32_t mask = modes.normal_mask();
    return enumerate_divisors(modes.modes(), L, [&](const DivisorVector& d) {
        if (d.mass() != 0 || d.momentum() != 0) return false;
        int nl = 0;
        for (int s = 0; s < kSlots; ++s)
            if (mask >> s & 1u) nl += std::abs(d.ell[s]);
        return nl <= normal_l1;
    });
}

LipschitzRun run_lipschitz_family(const Hamiltonian& g0, const FrequencyVector& omega, double radius, int k,
                                  uint64_t seed, const TorusData& torus, const KamConfig& cfg)
{
    if (k < 2) throw std::invalid_argument("run_lipschitz_family: need at least two samples");
    DivisorTable table(torus.modes().modes(), scheme_divisors(torus.modes(), cfg.degree_cutoff,
                                                              torus.full() ? cfg.degree_cutoff : 2));
    Rng rng(seed);
    LipschitzRun out;
    out.omegas.push_back(omega);
    int tries = 0;
    while (int(out.omegas.size()) < k) {
        if (++tries > 100000) throw KamError("run_lipschitz_family: no Diophantine neighbour found");
        RealModeArray w = omega.omega_array();
        for (double& v : w.values) v += rng.uniform(-radius, radius);
        FrequencyVector f = FrequencyVector::from_omega(w);
        if (f.in_cube() && is_diophantine(f, cfg.gamma, table).ok) out.omegas.push_back(f);
    }
    for (const auto& f : out.omegas) {
        KamRunResult r = run_counterterm_theorem(g0, f, torus, cfg);
        if (!r.converged) throw KamError("run_lipschitz_family: run failed: " + r.failure);
        out.lambdas.push_back(r.Lambda);
    }
    for (std::size_t a = 0; a < out.omegas.size(); ++a)
        for (std::size_t b = a + 1; b < out.omegas.size(); ++b) {
            double d = out.omegas[a].sup_distance(out.omegas[b]);
            if (d > 0.0) out.lipschitz = std::max(out.lipschitz, (out.lambdas[a] - out.lambdas[b]).sup_norm() / d);
        }
    return out;
}

FrequencyMapResult solve_frequency_map(const RealModeArray& alpha, const RealModeArray& W, const Hamiltonian& p,
                                       const TorusData& torus, const KamConfig& cfg, double tol, int max_iterations)
{
    const ModeSet& modes = torus.modes();
    std::vector<int> normal;
    for (int j : modes.modes())
        if (!modes.is_tangential(j)) normal.push_back(j);
    for (int j : normal) {
        if (std::fabs(W[j]) > 0.25) throw std::invalid_argument("solve_frequency_map: |W_j| must be <= 1/4");
        if (j == 0 && W[j] == 0.0) throw std::invalid_argument("solve_frequency_map: W_0 must be nonzero");
    }
    DivisorTable table(modes.modes(), scheme_divisors(modes, cfg.degree_cutoff, 2));

    struct Sample {
        RealModeArray Omega;
        RealModeArray mu;
    };
    std::vector<Sample> cache;
    FrequencyMapResult res;
    res.eps = norm(p, cfg.at(cfg.r0, cfg.s0, cfg.eta0)) / cfg.gamma;

    auto frequency = [&](const RealModeArray& Omega) {
        RealModeArray w(modes);
        for (int j : modes.modes()) w[j] = modes.is_tangential(j) ? alpha[j] : Omega[j];
        return FrequencyVector::from_omega(w);
    };
    auto distance = [&](const RealModeArray& a, const RealModeArray& b) {
        double d = 0.0;
        for (int j : normal) d = std::max(d, std::fabs(a[j] - b[j]));
        return d;
    };
    auto update_lipschitz = [&]() {
        for (std::size_t a = 0; a < cache.size(); ++a)
            for (std::size_t b = a + 1; b < cache.size(); ++b) {
                double d = distance(cache[a].Omega, cache[b].Omega);
                if (d <= 0.0) continue;
                double m = 0.0;
                for (int j : normal) m = std::max(m, std::fabs(cache[a].mu[j] - cache[b].mu[j]));
                res.lipschitz = std::max(res.lipschitz, m / d);
            }
    };
    auto mu_at = [&](const RealModeArray& Omega) {
        FrequencyVector f = frequency(Omega);
        if (is_diophantine(f, cfg.gamma, table).ok) {
            KamRunResult run = run_counterterm_theorem(p, f, torus, cfg);
            if (!run.converged) throw KamError("solve_frequency_map: counter-term run failed: " + run.failure);
            RealModeArray mu(modes, 0.0);
            for (int j : normal) mu[j] = run.Lambda.lambda[j];
            cache.push_back({Omega, mu});
            update_lipschitz();
            res.Lambda = run.Lambda;
            res.last_run = std::move(run);
            return mu;
        }
        if (cache.empty()) throw KamError("solve_frequency_map: no Diophantine sample to extend from");
        ++res.extension_uses;
        RealModeArray mu(modes, 0.0);
        for (int j : normal) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : cache) best = std::min(best, c.mu[j] + res.lipschitz * distance(Omega, c.Omega));
            mu[j] = best;
        }
        return mu;
    };

    RealModeArray Omega(modes, 0.0);
    for (int j : normal) Omega[j] = double(j) * double(j) + W[j];
    for (int it = 0; it < max_iterations; ++it) {
        RealModeArray mu = mu_at(Omega);
        RealModeArray next = Omega;
        for (int j : normal) next[j] = double(j) * double(j) + W[j] - mu[j];
        double change = distance(next, Omega);
        res.history.push_back(change);
        Omega = next;
        res.iterations = it + 1;
        if (change < tol) {
            res.converged = true;
            break;
        }
        if (res.history.size() >= 3 && change > res.history[res.history.size() - 2] &&
            res.history[res.history.size() - 2] > res.history[res.history.size() - 3])
            throw KamError("solve_frequency_map: fixed-point iteration is not contracting");
    }
    RealModeArray mu = mu_at(Omega);
    res.residual = 0.0;
    res.deviation = 0.0;
    for (int j : normal) {
        double jj = double(j) * double(j);
        res.residual = std::max(res.residual, std::fabs(Omega[j] + mu[j] - jj - W[j]));
        res.deviation = std::max(res.deviation, std::fabs(Omega[j] - jj - W[j]));
    }
    res.Omega = Omega;
    return res;
}

MelnikovReport melnikov_check(const RealModeArray& alpha, const RealModeArray& Omega, int h_mass_max, double gamma)
{
    const ModeSet& modes = alpha.modes;
    std::vector<int> tang, normal;
    for (int j : modes.modes()) (modes.is_tangential(j) ? tang : normal).push_back(j);
    std::vector<DivisorVector> hs = enumerate_divisors(tang, h_mass_max);
    hs.insert(hs.begin(), DivisorVector{});
    MelnikovReport out;
    out.report.name = "melnikov";
    out.min_margin = std::numeric_limits<double>::infinity();
    for (const auto& h : hs) {
        double ah = 0.0;
        double log_w = 0.0;
        for (int n : tang) {
            int v = h[n];
            if (!v) continue;
            ah += double(v) * alpha[n];
            double x = std::pow(double(std::abs(v)) * japanese(n), 6.0);
            log_w += std::log1p(x);
        }
        double thr = gamma * std::exp(-log_w);
        long ph = h.momentum();
        for (int s1 = -1; s1 <= 1; ++s1)
            for (int s2 = -1; s2 <= 1; ++s2)
                for (int j : normal)
                    for (int k : normal) {
                        if (s1 == 0 && j != normal.front()) continue;
                        if (s2 == 0 && k != normal.front()) continue;
                        if (ph + long(s1) * j + long(s2) * k != 0) continue;
                        DivisorVector l = h;
                        if (s1) l.set(j, l[j] + s1);
                        if (s2) l.set(k, l[k] + s2);
                        if (l.zero()) continue;
                        double val = std::fabs(ah + s1 * Omega[j] + s2 * Omega[k]);
                        double margin = val / thr;
                        std::string wit = "h=" + h.to_text() + " s=" + std::to_string(s1) + " j=" + std::to_string(j) +
                                          " s'=" + std::to_string(s2) + " k=" + std::to_string(k);
                        if (margin < out.min_margin) {
                            out.min_margin = margin;
                            out.witness = wit;
                        }
                        out.report.record(wit, val, thr, val > thr);
                    }
    }
    return out;
}

double measure_lowdim(double gamma, const ModeSet& modes, int L, long n_samples, uint64_t seed, const RealModeArray& W,
                      const std::function<RealModeArray(const RealModeArray&)>& omega_map)
{
    if (n_samples < 1) throw std::invalid_argument("measure_lowdim: n_samples < 1");
    if (!modes.has_tangential()) throw std::invalid_argument("measure_lowdim: no tangential set");
    uint32_t mask = modes.normal_mask();
    auto ells = enumerate_divisors(modes.modes(), L, [&](const DivisorVector& d) {
        if (d.momentum() != 0) return false;
        int nl = 0;
        for (int s = 0; s < kSlots; ++s)
            if (mask >> s & 1u) nl += std::abs(d.ell[s]);
        return nl <= 2;
    });
    std::vector<int> mode_list = modes.modes();
    DivisorTable table(mode_list, ells);
    Rng rng(seed);
    long failures = 0;
    std::vector<double> w(mode_list.size());
    for (long k = 0; k < n_samples; ++k) {
        RealModeArray alpha(modes, 0.0);
        for (int j : mode_list)
            if (modes.is_tangential(j)) alpha[j] = double(j) * double(j) + rng.uniform(-0.5, 0.5);
        RealModeArray Omega(modes, 0.0);
        if (omega_map) {
            Omega = omega_map(alpha);
        } else {
            for (int j : mode_list)
                if (!modes.is_tangential(j)) Omega[j] = double(j) * double(j) + W[j];
        }
        for (std::size_t i = 0; i < mode_list.size(); ++i) {
            int j = mode_list[i];
            w[i] = modes.is_tangential(j) ? alpha[j] : Omega[j];
        }
        if (table.size() && !(divisor_scan(table, w.data()).min_ratio > gamma)) ++failures;
    }
    return double(failures) / double(n_samples);
}

} // namespace kamnf
