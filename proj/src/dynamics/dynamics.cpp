#include "kamnf/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "kamnf/parallel.hpp"
#include "kamnf/random.hpp"

namespace kamnf {

namespace {

constexpr double kPi = 3.14159265358979323846;

void axpy(StateVector& y, const StateVector& x, double a)
{
    for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] += a * x.values[i];
}

StateVector combine(const StateVector& x, const StateVector& k, double a)
{
    StateVector y = x;
    axpy(y, k, a);
    return y;
}

double sup_abs(const StateVector& u)
{
    double m = 0.0;
    for (const auto& v : u.values) m = std::max(m, std::abs(v));
    return m;
}

bool finite(const StateVector& u)
{
    for (const auto& v : u.values)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
}

double median(std::vector<double> v)
{
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Trajectory integrate_fixed(const VectorField& field, const StateVector& u0, const TrajectoryOptions& opt, double dt,
                           const std::function<bool(double, const StateVector&)>& stop)
{
    Trajectory tr;
    tr.dt = dt;
    const long n_steps = std::max<long>(1, std::lround(std::ceil(opt.T / dt - 1e-12)));
    const double h = opt.T / double(n_steps);
    tr.dt = h;
    const double m0 = mass(u0), p0 = momentum(u0);
    const double scale = std::max(m0, std::numeric_limits<double>::min());
    StateVector u = u0;
    tr.times.push_back(0.0);
    tr.states.push_back(u);
    double t = 0.0;
    for (long n = 1; n <= n_steps; ++n) {
        u = integrator_step(field, u, h, opt.method, opt.midpoint_tol, opt.midpoint_max_iter);
        t = double(n) * h;
        ++tr.steps;
        if (!finite(u) || sup_abs(u) > opt.blowup) {
            tr.blew_up = true;
            break;
        }
        tr.mass_drift = std::max(tr.mass_drift, std::fabs(mass(u) - m0) / scale);
        tr.momentum_drift = std::max(tr.momentum_drift, std::fabs(momentum(u) - p0) / scale);
        if (opt.record_every > 0 && n % opt.record_every == 0 && n != n_steps) {
            tr.times.push_back(t);
            tr.states.push_back(u);
        }
        if (stop && stop(t, u)) {
            tr.stopped = true;
            break;
        }
    }
    tr.times.push_back(t);
    tr.states.push_back(u);
    tr.final_state = u;
    tr.final_time = t;
    return tr;
}

} // namespace

double mass(const StateVector& u)
{
    double m = 0.0;
    for (const auto& v : u.values) m += std::norm(v);
    return m;
}

double momentum(const StateVector& u)
{
    double p = 0.0;
    for (int j : u.modes.modes()) p += double(j) * std::norm(u[j]);
    return p;
}

StateVector integrator_step(const VectorField& field, const StateVector& u, double dt, Integrator method, double tol,
                            int max_iter)
{
    if (method == Integrator::Rk4) {
        StateVector k1 = field(u);
        StateVector k2 = field(combine(u, k1, dt / 2));
        StateVector k3 = field(combine(u, k2, dt / 2));
        StateVector k4 = field(combine(u, k3, dt));
        StateVector y = u;
        for (std::size_t i = 0; i < y.values.size(); ++i)
            y.values[i] += dt / 6.0 * (k1.values[i] + 2.0 * k2.values[i] + 2.0 * k3.values[i] + k4.values[i]);
        return y;
    }
    // u1 = u + dt X((u + u1)/2), solved by fixed-point iteration from an explicit predictor.
    StateVector y = combine(u, field(u), dt);
    const double scale = std::max(sup_abs(u), std::numeric_limits<double>::min());
    for (int it = 0; it < max_iter; ++it) {
        StateVector mid = u;
        for (std::size_t i = 0; i < mid.values.size(); ++i) mid.values[i] = 0.5 * (u.values[i] + y.values[i]);
        StateVector next = combine(u, field(mid), dt);
        double change = 0.0;
        for (std::size_t i = 0; i < y.values.size(); ++i) change = std::max(change, std::abs(next.values[i] - y.values[i]));
        y = std::move(next);
        if (change <= tol * scale) break;
    }
    return y;
}

Trajectory integrate(const Hamiltonian& h, const StateVector& u0, const TrajectoryOptions& opt,
                     const std::function<bool(double, const StateVector&)>& stop)
{
    if (!(opt.T > 0.0 && opt.dt > 0.0)) throw std::invalid_argument("integrate: T and dt must be positive");
    if (!(u0.modes == h.modes())) throw std::invalid_argument("integrate: mode sets differ");
    VectorField field(h);
    double dt = opt.dt;
    Trajectory tr = integrate_fixed(field, u0, opt, dt, stop);
    if (opt.adaptive) {
        for (int k = 0; k < opt.max_halvings && !tr.blew_up && tr.mass_drift > opt.mass_tol; ++k) {
            dt /= 2.0;
            tr = integrate_fixed(field, u0, opt, dt, stop);
        }
    }
    return tr;
}

double annulus_delta(const StateVector& u, const TorusData& torus)
{
    double d = 0.0;
    for (int j : u.modes.modes()) {
        double gap = std::fabs(std::norm(u[j]) - torus.action(j));
        d = std::max(d, std::sqrt(gap) / u0_weight(j, torus.r(), torus.weights));
    }
    return d;
}

StateVector annulus_point(const TorusData& torus, double delta, const RealModeArray& x, const RealModeArray& angles)
{
    StateVector u(torus.modes(), 0.0);
    for (int j : torus.modes().modes()) {
        double w = u0_weight(j, torus.r(), torus.weights);
        double a = torus.action(j) + x[j] * delta * delta * w * w;
        if (a < 0.0) throw std::invalid_argument("annulus_point: negative action");
        u[j] = std::polar(std::sqrt(a), angles[j]);
    }
    return u;
}

Hamiltonian resonant_remainder_normal_form(const TorusData& torus, double shift, double c, int degree_cutoff)
{
    const ModeSet& modes = torus.modes();
    if (modes.j_max() < 1) throw std::invalid_argument("resonant normal form needs the modes -1, 0, 1");
    Hamiltonian centred(modes, degree_cutoff);
    centred.add_real_pair(MultiIndex::from_pairs({{0, 2}, {1, 1}}), MultiIndex::from_pairs({{0, 2}, {-1, 1}}), c);
    RealModeArray xi(modes, shift);
    return diagonal_hamiltonian(FrequencyVector::from_xi(xi), degree_cutoff) + from_centered(centred, torus);
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("log_log_slope: need two or more points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= double(x.size());
    my /= double(y.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

DriftReport drift_experiment(const Hamiltonian& n, const TorusData& torus, double delta0, const DriftOptions& opt)
{
    const double kappa2 = torus.kappa * torus.kappa;
    if (!(delta0 > 0.0 && delta0 < std::sqrt(1.0 - kappa2)))
        throw std::invalid_argument("drift_experiment: need 0 < delta < sqrt(1 - kappa^2)");
    if (opt.samples < 1) throw std::invalid_argument("drift_experiment: samples must be positive");
    const ModeSet& modes = torus.modes();
    const auto mode_list = modes.modes();

    // Shapes shared by every delta.
    Rng rng(opt.seed);
    std::vector<RealModeArray> shapes, angles;
    for (int k = 0; k < opt.samples; ++k) {
        RealModeArray x(modes, 0.0), th(modes, 0.0);
        for (int j : mode_list) {
            x[j] = rng.uniform();
            th[j] = rng.uniform(0.0, 2.0 * kPi);
        }
        int pick = mode_list[std::min<std::size_t>(mode_list.size() - 1, std::size_t(rng.uniform() * mode_list.size()))];
        x[pick] = 1.0;
        for (int j : mode_list) {
            double w = u0_weight(j, torus.r(), torus.weights);
            bool room = torus.action(j) >= x[j] * delta0 * delta0 * w * w;
            if (rng.uniform() < 0.5 && room) x[j] = -x[j];
        }
        shapes.push_back(x);
        angles.push_back(th);
    }

    VectorField field(n);
    DriftReport rep;
    for (double scale : opt.scales) {
        const double delta = delta0 * scale;
        DriftRow row;
        row.delta = delta;
        row.exit_times.assign(opt.samples, opt.T_max);
        std::vector<double> drift(opt.samples, 0.0);
        std::vector<int> exited(opt.samples, 0);
        parallel_for_chunks(std::size_t(opt.samples), [&](std::size_t k) {
            StateVector u0 = annulus_point(torus, delta, shapes[k], angles[k]);
            StateVector x = field(u0);
            double d = 0.0;
            for (int j : mode_list) {
                double w = u0_weight(j, torus.r(), torus.weights);
                d = std::max(d, std::fabs(2.0 * std::real(std::conj(u0[j]) * x[j])) / (w * w));
            }
            drift[k] = d;
            TrajectoryOptions to;
            to.T = opt.T_max;
            to.dt = opt.dt;
            to.method = opt.method;
            auto tr = integrate(n, u0, to, [&](double, const StateVector& u) { return annulus_delta(u, torus) > 2.0 * delta; });
            if (tr.stopped || tr.blew_up) {
                row.exit_times[k] = tr.final_time;
                exited[k] = 1;
            }
        });
        for (int k = 0; k < opt.samples; ++k) row.exits += exited[k];
        row.drift_sup = *std::max_element(drift.begin(), drift.end());
        row.min_exit = *std::min_element(row.exit_times.begin(), row.exit_times.end());
        row.median_exit = median(row.exit_times);
        rep.rows.push_back(row);
    }
    std::vector<double> ds, ts, dr;
    rep.any_exit = false;
    rep.all_exit = true;
    for (const auto& r : rep.rows) {
        ds.push_back(r.delta);
        ts.push_back(r.min_exit);
        dr.push_back(std::max(r.drift_sup, std::numeric_limits<double>::min()));
        rep.any_exit = rep.any_exit || r.exits > 0;
        rep.all_exit = rep.all_exit && r.exits > 0;
    }
    if (rep.rows.size() >= 2) {
        rep.exit_exponent = log_log_slope(ds, ts);
        rep.drift_exponent = log_log_slope(ds, dr);
    }
    return rep;
}

StateVector action_angle_forward(const RealModeArray& J, const RealModeArray& theta)
{
    StateVector u(J.modes, 0.0);
    for (int j : J.modes.modes()) {
        if (J[j] < 0.0) throw std::invalid_argument("action_angle_forward: negative action");
        u[j] = std::polar(std::sqrt(J[j]), theta[j]);
    }
    return u;
}

std::pair<RealModeArray, RealModeArray> action_angle_inverse(const StateVector& u)
{
    RealModeArray J(u.modes, 0.0), th(u.modes, 0.0);
    for (int j : u.modes.modes()) {
        if (u[j] == cplx(0.0, 0.0))
            throw std::invalid_argument("action_angle_inverse: zero coordinate at mode " + std::to_string(j));
        J[j] = std::norm(u[j]);
        th[j] = std::arg(u[j]);
    }
    return {J, th};
}

OrbitDefect torus_orbit_defect(const Hamiltonian& n, const TorusData& torus, const FrequencyVector& omega, double T,
                               double dt, int n_points, uint64_t seed, Integrator method)
{
    OrbitDefect out;
    Rng rng(seed);
    VectorField field(n);
    VectorField linear(diagonal_hamiltonian(omega, 2));
    const long steps = std::max<long>(1, std::lround(std::ceil(T / dt - 1e-12)));
    const double h = T / double(steps);
    for (int p = 0; p < n_points; ++p) {
        RealModeArray th(torus.modes(), 0.0);
        for (int j : torus.modes().modes()) th[j] = rng.uniform(0.0, 2.0 * kPi);
        StateVector u0 = torus_point(torus, th);
        StateVector u = u0, v = u0;
        for (long k = 1; k <= steps; ++k) {
            u = integrator_step(field, u, h, method);
            v = integrator_step(linear, v, h, method);
            double t = double(k) * h;
            for (int j : torus.modes().modes()) {
                cplx exact = u0[j] * std::polar(1.0, omega.omega(j) * t);
                out.max_defect = std::max(out.max_defect, std::abs(u[j] - exact));
                out.integrator_defect = std::max(out.integrator_defect, std::abs(v[j] - exact));
                out.modulus_defect = std::max(out.modulus_defect, std::fabs(std::abs(u[j]) - std::abs(u0[j])));
            }
        }
        ++out.points;
    }
    return out;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, bool action_angle)
{
    if (traj.states.empty()) return;
    const auto modes = traj.states.front().modes.modes();
    os << "t";
    for (int j : modes) {
        if (action_angle)
            os << ",J_" << j << ",theta_" << j;
        else
            os << ",re_" << j << ",im_" << j;
    }
    os << "\r\n";
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        os << format_double(traj.times[i]);
        const auto& u = traj.states[i];
        for (int j : modes) {
            if (action_angle)
                os << ',' << format_double(std::norm(u[j])) << ',' << format_double(std::arg(u[j]));
            else
                os << ',' << format_double(u[j].real()) << ',' << format_double(u[j].imag());
        }
        os << "\r\n";
    }
}

} // namespace kamnf
