#include <doctest.h>

#include <cmath>
#include <random>

#include "consub/analytic.hpp"

using namespace consub;
using namespace consub::analytic;

TEST_CASE("drag closed form: coefficients and ODE residual") {
    const Drag1d d = analytic_1d_drag(1.0, 0.0, 1.0);
    CHECK(d.A1 == doctest::Approx(1.0));
    CHECK(d.A2 == doctest::Approx(-1.0));
    CHECK(ode_residual(d.solution, d.system, 10.0, 1000) <= 1e-12);

    CHECK(d.solution.q(1.0)[0] == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
    CHECK(d.restricted_force(0.5) == doctest::Approx(-0.5));
    CHECK(d.work_potential(1.0) == doctest::Approx(-0.5));
    CHECK(d.substitute_energy() == doctest::Approx(0.5));  // c^2 A1^2 / 2 with x0 = 0
    CHECK(d.time_of(0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("drag at rest stays constant") {
    const Drag1d d = analytic_1d_drag(1.0, 0.7, 0.0);
    CHECK(d.A2 == doctest::Approx(0.0));
    for (double t : {0.0, 1.0, 5.0}) CHECK(d.solution.q(t)[0] == doctest::Approx(0.7));
    CHECK(d.restricted_force(0.7) == doctest::Approx(0.0));
}

TEST_CASE("drag requires positive damping") {
    CHECK_THROWS_AS(analytic_1d_drag(0.0, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(analytic_1d_drag(-1.0, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("coupled pair closed form: values and ODE residual") {
    const Coupled2d s = analytic_2d(0.0, 0.0, 1.0, -1.0);
    CHECK(s.dv == doctest::Approx(-2.0));
    CHECK(ode_residual(s.solution, s.system, 10.0, 1000) <= 1e-12);

    CHECK(s.solution.q(1.0)[0] == doctest::Approx(0.5 - 0.5 * std::exp(-2.0)).epsilon(1e-15));
    CHECK(s.restricted_force_x(0.0) == doctest::Approx(-2.0));
    CHECK(s.restricted_force_x(0.25) == doctest::Approx(-1.0));
    CHECK(s.restricted_force_y(0.0) == doctest::Approx(2.0));
    CHECK(s.work_potential_x(0.5) == doctest::Approx(-0.5));
    CHECK(s.work_potential_y(-0.5) == doctest::Approx(-0.5));
    CHECK(s.substitute_energy() == doctest::Approx(1.0));
    CHECK(s.time_of_x(0.25) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("coupled pair: the constrained sum x + y is conserved") {
    const Coupled2d s = analytic_2d(0.3, -0.1, 2.0, -2.0);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> uni(0.0, 10.0);
    for (int k = 0; k < 200; ++k) {
        const Vec q = s.solution.q(uni(rng));
        CHECK(q.sum() == doctest::Approx(0.2).epsilon(1e-13));
    }
}

TEST_CASE("coupled pair rejects violated constraint; zero motion is constant") {
    CHECK_THROWS_AS(analytic_2d(0.0, 0.0, 1.0, -0.5), std::invalid_argument);
    const Coupled2d rest = analytic_2d(0.0, 0.0, 0.0, 0.0);
    CHECK(rest.solution.q(3.0).isZero(1e-15));
    CHECK(rest.restricted_force_x(0.0) == doctest::Approx(0.0));
}

TEST_CASE("general coupled solution keeps secular terms") {
    const ClosedFormSolution sol = analytic_2d_general(0.1, -0.2, 1.0, 0.5);
    const Coupled2d frame = analytic_2d(0.0, 0.0, 1.0, -1.0);  // only for the system
    CHECK(ode_residual(sol, frame.system, 10.0, 1000) <= 1e-11);
    // Drift: mean velocity (x'0 + y'0)/2 appears in both coordinates.
    const Vec v_late = sol.qdot(20.0);
    CHECK(v_late[0] == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(v_late[1] == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("underdamped oscillator: solution, turning times, harmonic limit") {
    const DampedOscillator d = analytic_damped_oscillator(0.1, 1.0, 1.0, 0.0);
    CHECK(d.omega1 == doctest::Approx(std::sqrt(0.99)));
    CHECK(ode_residual(d.solution, d.system, 10.0, 1000) <= 1e-12);

    const auto zeros = d.turning_times(4.0 * M_PI);
    REQUIRE(zeros.size() == 3);
    for (std::size_t k = 0; k < zeros.size(); ++k)
        CHECK(zeros[k] == doctest::Approx((k + 1) * M_PI / d.omega1).epsilon(1e-12));

    // Extremum at the first turning time flips sign with the damped envelope.
    const double t1 = zeros[0];
    CHECK(d.solution.q(t1)[0] == doctest::Approx(-std::exp(-0.1 * t1)).epsilon(1e-12));

    // eta -> 0 limit approaches the conservative oscillator period.
    const DampedOscillator tiny = analytic_damped_oscillator(1e-8, 1.0, 1.0, 0.0);
    const auto z2 = tiny.turning_times(2.0 * M_PI + 0.1);
    REQUIRE(z2.size() == 2);
    CHECK(z2[1] == doctest::Approx(2.0 * M_PI).epsilon(1e-10));
}

TEST_CASE("oscillator outside the underdamped regime is rejected") {
    CHECK_THROWS_AS(analytic_damped_oscillator(1.0, 1.0, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(analytic_damped_oscillator(2.0, 1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("build_ndim_damped reproduces the coupled pair for n=2") {
    Mat C(2, 2), K = Mat::Zero(2, 2);
    C << 1.0, -1.0, -1.0, 1.0;
    const SystemDefinition sys = build_ndim_damped(C, K);
    const Coupled2d oracle = analytic_2d(0.0, 0.0, 1.0, -1.0);
    CHECK(ode_residual(oracle.solution, sys, 10.0, 500) <= 1e-12);

    Vec q(2), qd(2);
    q << 0.3, -0.3;
    qd << 1.0, -1.0;
    const Vec f = sys.force(q, qd);
    CHECK(f[0] == doctest::Approx(-2.0));
    CHECK(f[1] == doctest::Approx(2.0));
}

TEST_CASE("build_ndim_damped validates shapes") {
    CHECK_THROWS_AS(build_ndim_damped(Mat::Zero(2, 2), Mat::Zero(3, 3)), std::invalid_argument);
    CHECK_THROWS_AS(build_ndim_damped(Mat::Zero(2, 3), Mat::Zero(2, 2)), std::invalid_argument);
    Mat K(2, 2);
    K << 1.0, 0.5, 0.2, 1.0;  // not symmetric
    CHECK_THROWS_AS(build_ndim_damped(Mat::Zero(2, 2), K), std::invalid_argument);
}
