#pragma once

#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include "kamnf/poisson.hpp"
#include "kamnf/torus.hpp"

namespace kamnf {

enum class Integrator { Rk4, ImplicitMidpoint };

struct TrajectoryOptions {
    double T = 1.0;
    double dt = 1e-3;
    Integrator method = Integrator::ImplicitMidpoint;
    int record_every = 0;           // store every k-th state; 0 keeps only the endpoints
    bool adaptive = false;          // halve dt until the relative mass drift is below mass_tol
    double mass_tol = 1e-9;
    int max_halvings = 6;
    double blowup = 1e6;            // sup_j |u_j| above this stops the run
    double midpoint_tol = 1e-15;    // fixed-point tolerance of the implicit step, relative
    int midpoint_max_iter = 100;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<StateVector> states;
    StateVector final_state;
    double final_time = 0.0;
    double dt = 0.0;                 // step actually used
    long steps = 0;
    double mass_drift = 0.0;         // max |M(t) - M(0)| / M(0)
    double momentum_drift = 0.0;     // max |P(t) - P(0)| / max(M(0), tiny)
    bool blew_up = false;
    bool stopped = false;            // stop predicate fired
};

double mass(const StateVector& u);
double momentum(const StateVector& u);

// One step of the chosen integrator for du/dt = X_H(u).
StateVector integrator_step(const VectorField& field, const StateVector& u, double dt, Integrator method,
                            double tol = 1e-15, int max_iter = 100);

// Integrates until T, blow-up, or stop(t, u) returning true.
Trajectory integrate(const Hamiltonian& h, const StateVector& u0, const TrajectoryOptions& opt,
                     const std::function<bool(double, const StateVector&)>& stop = {});

// sup_j sqrt(||u_j|^2 - I_j|) / u0_j with u0_j the weight of the torus reference radius.
double annulus_delta(const StateVector& u, const TorusData& torus);

// Point with annulus_delta = delta: |u_j|^2 = I_j + x_j delta^2 u0_j^2, |x_j| <= 1, one |x_j| = 1.
StateVector annulus_point(const TorusData& torus, double delta, const RealModeArray& x, const RealModeArray& angles);

struct DriftRow {
    double delta = 0.0;
    std::vector<double> exit_times;  // T_max when the trajectory stays inside
    double min_exit = 0.0;
    double median_exit = 0.0;
    int exits = 0;
    double drift_sup = 0.0;          // sup_j |d/dt |u_j|^2| / u0_j^2 over the initial data
};

struct DriftReport {
    std::vector<DriftRow> rows;
    double exit_exponent = 0.0;      // slope of ln(min exit) against ln delta
    double drift_exponent = 0.0;     // slope of ln(drift_sup) against ln delta
    bool any_exit = false;
    bool all_exit = false;
};

struct DriftOptions {
    double T_max = 1e4;
    double dt = 1e-2;
    int samples = 16;
    uint64_t seed = 1;
    Integrator method = Integrator::ImplicitMidpoint;
    std::vector<double> scales = {1.0, 0.5, 0.25};
};

// Exit times from the 2 delta annulus for delta in delta0 * scales, with the same sampled shapes at
// every delta; slopes are least-squares fits in log-log coordinates.
DriftReport drift_experiment(const Hamiltonian& n, const TorusData& torus, double delta0, const DriftOptions& opt);

// D_omega + c (|u_0|^2 - I_0)^2 (u_1 conj(u_{-1}) + c.c.) with omega_j = j^2 + shift. The remainder has degree 2
// and, as omega_1 = omega_{-1}, moves action between the modes 1 and -1 secularly.
Hamiltonian resonant_remainder_normal_form(const TorusData& torus, double shift, double c, int degree_cutoff = 8);

// Least-squares slope of ln y against ln x.
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

// u_j = sqrt(J_j) e^{i theta_j}
StateVector action_angle_forward(const RealModeArray& J, const RealModeArray& theta);
// (|u_j|^2, arg u_j); throws std::invalid_argument at a zero coordinate.
std::pair<RealModeArray, RealModeArray> action_angle_inverse(const StateVector& u);

struct OrbitDefect {
    double max_defect = 0.0;         // sup over time and points of max_j |u_j(t) - u_j(0) e^{i omega_j t}|
    double modulus_defect = 0.0;     // sup of max_j ||u_j(t)| - |u_j(0)||
    double integrator_defect = 0.0;  // same comparison for D_omega alone
    int points = 0;
};

OrbitDefect torus_orbit_defect(const Hamiltonian& n, const TorusData& torus, const FrequencyVector& omega, double T,
                               double dt, int n_points, uint64_t seed, Integrator method = Integrator::Rk4);

// Columns t, then re/im per mode, or action/angle per mode.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, bool action_angle);

} // namespace kamnf
