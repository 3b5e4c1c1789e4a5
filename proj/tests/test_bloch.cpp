#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "phasejump/bloch.hpp"
#include "phasejump/pulses.hpp"

using namespace phasejump;

namespace {
DriveWaveform reference_waveform() {
    return DriveWaveform::from_angular(100.0, 10.0, 2.0, 1.0);
}
}  // namespace

TEST_CASE("resonant rabi flopping matches sin^2 over ten periods", "[bloch]") {
    const double tol = 1e-10;
    auto wf = DriveWaveform::from_angular(0.0, 10.0, 2.0, 0.0);
    const double t_end = 10.0 * kTwoPi / wf.omega_r;
    const auto ts = integrate(AtomState::ground(), wf, t_end, tol, 4001);
    double err = 0.0;
    for (std::size_t i = 0; i < ts.times.size(); ++i) {
        const double s = std::sin(0.5 * wf.omega_r * ts.times[i]);
        err = std::max(err, std::abs(ts.p2[i] - s * s));
    }
    CHECK(err < 10.0 * tol);
}

TEST_CASE("undriven shelf population decays exponentially", "[bloch]") {
    const double tol = 1e-10;
    auto wf = DriveWaveform::from_angular(0.0, 1.0, 0.0, 1.0);
    const auto ts = integrate(AtomState::pure(0, 0, 1), wf, 10.0, tol, 2001);
    double err = 0.0;
    for (std::size_t i = 0; i < ts.times.size(); ++i)
        err = std::max(err,
                       std::abs(ts.p2[i] - std::exp(-wf.gamma2 * ts.times[i])));
    CHECK(err < 10.0 * tol);
}

TEST_CASE("waveform geometry: detuning, resonance, drive phase", "[bloch]") {
    auto wf = reference_waveform();
    CHECK(wf.period() == Catch::Approx(kTwoPi / 10.0).epsilon(1e-15));
    CHECK(wf.detuning_at(0.0) == Catch::Approx(200.0).epsilon(1e-12));
    CHECK(wf.resonance_time(0) == Catch::Approx(wf.period() / 2.0));
    CHECK(std::abs(wf.detuning_at(wf.resonance_time(0))) < 1e-10);
    CHECK(std::abs(wf.detuning_at(wf.resonance_time(3))) < 1e-9);
    // detuning never goes negative
    for (int i = 0; i < 200; ++i)
        CHECK(wf.detuning_at(wf.period() * i / 200.0) >= -1e-12);

    auto wj = wf.with_jump(wf.resonance_time(0), 1.5);
    const double before = wj.drive_phase(wf.resonance_time(0) - 1e-9);
    const double after = wj.drive_phase(wf.resonance_time(0) + 1e-9);
    CHECK(after - before == Catch::Approx(1.5).margin(1e-5));

    auto rep = wj.repeated(3);
    REQUIRE(rep.jump_schedule.size() == 3);
    CHECK(rep.jump_schedule[2].time ==
          Catch::Approx(wf.resonance_time(0) + 2.0 * wf.period()));
    CHECK(rep.n_cycles == 3);

    CHECK_THROWS_AS(DriveWaveform::from_angular(100, -1, 2, 1), ConfigError);
    CHECK_THROWS_AS(DriveWaveform::from_angular(-1, 10, 2, 1), ConfigError);
}

TEST_CASE("norm is conserved without decay and bleeds at gamma2 P2", "[bloch]") {
    auto coherent = reference_waveform().with_gamma2(0.0);
    const double t_end = 2.0 * coherent.period();
    auto pr = integrate_path(AtomState::ground(), coherent, 0.0, t_end, 1e-10);
    CHECK(pr.final_state.norm2() == Catch::Approx(1.0).margin(1e-9));

    // with decay, d(norm^2)/dt = -gamma2 |b2|^2: compare against quadrature
    auto wf = reference_waveform();
    const auto ts = integrate(AtomState::ground(), wf, t_end, 1e-10, 2001);
    double integral = 0.0;  // Simpson on the uniform grid (even interval count)
    const double h = ts.times[1] - ts.times[0];
    for (std::size_t i = 0; i + 2 < ts.times.size(); i += 2)
        integral += h / 3.0 * (ts.p2[i] + 4.0 * ts.p2[i + 1] + ts.p2[i + 2]);
    const double survival = ts.states.back().norm2();
    CHECK(survival == Catch::Approx(1.0 - wf.gamma2 * integral).margin(1e-8));
}

TEST_CASE("phase jump rotates b2 identically in both representations", "[bloch]") {
    auto coherent = reference_waveform().with_gamma2(0.0);
    auto pr = integrate_path(AtomState::ground(), coherent, 0.0,
                             coherent.resonance_time(0), 1e-10);
    const AtomState amp = pr.final_state.with_phase_jump(2.0);
    CHECK(amp.p2() == Catch::Approx(pr.final_state.p2()).epsilon(1e-12));
    CHECK(std::arg(amp.amps[2] / pr.final_state.amps[2]) ==
          Catch::Approx(2.0).margin(1e-12));

    const AtomState rho_jumped = pr.final_state.as_density().with_phase_jump(2.0);
    const Eigen::Matrix3cd diff = rho_jumped.rho - amp.as_density().rho;
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("amplitude and density evolutions agree for pure coherent dynamics",
          "[bloch]") {
    auto coherent = reference_waveform().with_gamma2(0.0);
    const double t_end = 1.5 * coherent.period();
    auto pa = integrate_path(AtomState::ground(), coherent, 0.0, t_end, 1e-10);
    auto pd = integrate_path(AtomState::ground().as_density(), coherent, 0.0,
                             t_end, 1e-10);
    const Eigen::Matrix3cd diff =
        pd.final_state.rho - pa.final_state.as_density().rho;
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(pd.final_state.norm2() == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("density-matrix decay repopulates the detection ground state",
          "[bloch]") {
    auto wf = reference_waveform();
    auto pd = integrate_path(AtomState::pure(0, 0, 1).as_density(), wf, 0.0,
                             8.0 / wf.gamma2, 1e-10);
    CHECK(pd.final_state.norm2() == Catch::Approx(1.0).margin(1e-9));
    CHECK(pd.final_state.p1() > 0.5);  // decayed into |1> and re-driven
}

TEST_CASE("per-cycle light shift: frozen values and adiabatic estimate",
          "[bloch]") {
    auto wf = reference_waveform();
    auto coherent = wf.with_gamma2(0.0);
    CHECK(stark_phase_of(coherent, 1, 1e-10) ==
          Catch::Approx(0.0134721057300622).margin(1e-9));

    const double theta = closed_form_jump_phase(wf, 1e-10);
    auto wj = coherent.with_jump(wf.resonance_time(0), theta);
    CHECK(stark_phase_of(wj, 1, 1e-10) ==
          Catch::Approx(0.00904645858015216).margin(1e-9));

    const double adiabatic = stark_phase_adiabatic(wf);
    CHECK(adiabatic == Catch::Approx(0.049373950900849).margin(1e-9));
    CHECK(adiabatic == Catch::Approx(0.05).margin(0.01));
}

TEST_CASE("dense propagator path is consistent with its endpoint", "[bloch]") {
    auto coherent = reference_waveform().with_gamma2(0.0);
    const double t1 = coherent.period();
    const auto path = driven_propagator_path(coherent, 0.0, t1, 1e-10);
    const Eigen::Matrix2cd u_end = driven_propagator(coherent, 0.0, t1, 1e-10);
    CHECK((path.end() - u_end).cwiseAbs().maxCoeff() < 1e-9);
    for (double f : {0.25, 0.5, 0.75}) {
        const Eigen::Matrix2cd u = path.at(f * t1);
        const Eigen::Matrix2cd gram = u.adjoint() * u;
        CHECK((gram - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() <
              1e-8);
    }
}

TEST_CASE("integrator input validation", "[bloch]") {
    auto wf = reference_waveform();
    CHECK_THROWS_AS(integrate(AtomState::ground(), wf, -1.0, 1e-8), ConfigError);
    CHECK_THROWS_AS(integrate(AtomState::ground(), wf, 1.0, 1e-8, 1),
                    ConfigError);
}
