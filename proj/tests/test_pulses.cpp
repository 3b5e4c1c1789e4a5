#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "phasejump/pulses.hpp"

using namespace phasejump;

namespace {
DriveWaveform reference_waveform() {
    return DriveWaveform::from_angular(100.0, 10.0, 2.0, 1.0);
}
PulseDesign reference_design() {
    auto d = find_phase_jump(reference_waveform(), 1e-8, 512, 1e-10);
    return complete_design(d, 1e-10);
}
}  // namespace

TEST_CASE("jump-phase search: frozen optimum, closed form agrees", "[pulses]") {
    const auto design = find_phase_jump(reference_waveform(), 1e-8, 512, 1e-10);
    CHECK(design.jump_phase == Catch::Approx(2.1848479293768506).margin(1e-6));
    const double closed = closed_form_jump_phase(reference_waveform(), 1e-10);
    CHECK(closed == Catch::Approx(2.184847930446039).margin(1e-6));
    CHECK(std::abs(design.jump_phase - closed) < 1e-6);
    CHECK(design.residual_p2 < 1e-18);
    CHECK(design.jump_time == Catch::Approx(0.3141592653589793));
    CHECK_FALSE(design.degenerate_landscape);
    CHECK_FALSE(design.multimodal_warning);
}

TEST_CASE("residual landscape: single deep minimum at the optimum", "[pulses]") {
    const auto design = find_phase_jump(reference_waveform(), 1e-8, 256, 1e-10);
    REQUIRE(design.landscape.size() == 256);
    std::size_t best = 0;
    for (std::size_t i = 1; i < design.landscape.size(); ++i)
        if (design.landscape[i].second < design.landscape[best].second) best = i;
    CHECK(design.landscape[best].first ==
          Catch::Approx(design.jump_phase).margin(kTwoPi / 256.0));
    // skipping the jump leaves orders of magnitude more excited population
    const auto land =
        detail::jump_landscape(reference_waveform().with_gamma2(0.0), 1e-10);
    CHECK(land.residual(0.0) > 1e6 * land.residual(design.jump_phase));
    CHECK(land.closed_form_optimum() ==
          Catch::Approx(design.jump_phase).margin(1e-7));
}

TEST_CASE("undriven landscape is flagged degenerate", "[pulses]") {
    const auto design =
        find_phase_jump(DriveWaveform::from_angular(100, 10, 0, 1));
    CHECK(design.degenerate_landscape);
    CHECK(design.residual_p2 < 1e-15);
}

TEST_CASE("search input validation", "[pulses]") {
    CHECK_THROWS_AS(find_phase_jump(reference_waveform(), -1.0), ConfigError);
    CHECK_THROWS_AS(find_phase_jump(reference_waveform(), 2.0), ConfigError);
    CHECK_THROWS_AS(find_phase_jump(reference_waveform(), 1e-6, 4), ConfigError);
}

TEST_CASE("per-pulse probability: frozen value, weak-scatter agreement",
          "[pulses]") {
    const auto design = reference_design();
    const auto pp = per_pulse_probability(design, 1e-10);
    CHECK(pp.p == Catch::Approx(0.00039443358858437527).epsilon(1e-6));
    CHECK(pp.p > 3.5e-4);
    CHECK(pp.p < 6.5e-4);
    const double inv = 1.0 / pp.p;
    CHECK(inv > 1400.0);
    CHECK(inv < 2600.0);
    // quadrature and norm-loss routes agree to second order in gamma2*T
    CHECK(pp.relative_gap == Catch::Approx(0.018140).margin(5e-4));
    CHECK(pp.relative_gap < 0.05);
    CHECK_FALSE(pp.weak_scatter_warning);
    CHECK(design.p_scatter == Catch::Approx(pp.p).epsilon(1e-12));

    PulseDesign bad = design;
    bad.base.gamma2 = 0.0;
    CHECK_THROWS_AS(per_pulse_probability(bad), ConfigError);
}

TEST_CASE("per-pulse probability scales as the drive intensity", "[pulses]") {
    auto p_of = [](double omega_r) {
        auto wf = DriveWaveform::from_angular(100.0, 10.0, omega_r, 1.0);
        return complete_design(find_phase_jump(wf, 1e-8, 512, 1e-10), 1e-10)
            .p_scatter;
    };
    const double p1 = p_of(1.0);
    const double p2 = p_of(2.0);
    const double p4 = p_of(4.0);
    CHECK(p1 == Catch::Approx(9.8752025490811413e-05).epsilon(1e-6));
    CHECK(p4 == Catch::Approx(0.0015686202578465425).epsilon(1e-6));
    CHECK(p2 / p1 > 3.8);
    CHECK(p2 / p1 < 4.1);
    CHECK(p4 / p2 > 3.8);
    CHECK(p4 / p2 < 4.1);
}

TEST_CASE("measurement budget from the geometric law", "[pulses]") {
    const auto b = pulses_for_measurement(5e-4, 0.99);
    CHECK(b.expected_pulses == Catch::Approx(2000.0));
    CHECK(b.n_for_target == 9209);
    CHECK(b.cumulative_probability(double(b.n_for_target)) >= 0.99);
    CHECK(b.cumulative_probability(double(b.n_for_target - 1)) < 0.99);
    CHECK(b.cumulative_probability(0.0) == Catch::Approx(0.0).margin(1e-15));

    const auto design = reference_design();
    CHECK(pulses_for_measurement(design.p_scatter, 0.99).n_for_target == 11674);

    CHECK_THROWS_AS(pulses_for_measurement(0.0), ConfigError);
    CHECK_THROWS_AS(pulses_for_measurement(1.0), ConfigError);
    CHECK_THROWS_AS(pulses_for_measurement(5e-4, 1.0), ConfigError);
}

TEST_CASE("stark-matched modulation retune", "[pulses]") {
    const auto design = reference_design();
    CHECK(design.stark_per_cycle ==
          Catch::Approx(0.00904645858015216).margin(1e-9));

    const auto c =
        corrected_modulation(design.base, design.stark_per_cycle, 10.0 / kTwoPi);
    CHECK(c.nu_mod_prime == Catch::Approx(1.5892612307142908).margin(1e-9));
    CHECK(c.nu_mod_prime ==
          Catch::Approx(design.base.nu_mod /
                        (1.0 + design.stark_per_cycle / kTwoPi))
              .epsilon(1e-14));
    CHECK(c.fractional_change ==
          Catch::Approx(design.stark_per_cycle /
                        (kTwoPi + design.stark_per_cycle))
              .epsilon(1e-12));
    CHECK(c.fractional_change < 0.01);
    CHECK(c.periods_per_cycle == Catch::Approx(1.0));

    CHECK_THROWS_AS(corrected_modulation(design.base, 4.0, 1.0), ConfigError);
}

TEST_CASE("electro-optic jump feasibility", "[pulses]") {
    const auto ok = eom_feasibility(1.4e6);
    CHECK(ok.feasible);
    CHECK(ok.fraction == Catch::Approx(1.4e-3));
    const auto slow = eom_feasibility(6e7);
    CHECK_FALSE(slow.feasible);
    CHECK(slow.fraction == Catch::Approx(0.06));
    CHECK_THROWS_AS(eom_feasibility(1e6, 0.0), ConfigError);
    CHECK_THROWS_AS(eom_feasibility(-1.0), ConfigError);
}

TEST_CASE("resonant window from the pi phase-slip condition", "[pulses]") {
    auto wf = reference_waveform();
    const double s = resonant_half_width(wf);
    CHECK(s == Catch::Approx(0.12689).margin(5e-4));
    CHECK(s / wf.period() > 0.19);
    CHECK(s / wf.period() < 0.21);
    // the defining identity: drive phase slips pi across the half-width
    const double om = kTwoPi * wf.nu_mod;
    const double slip = kTwoPi * wf.nu_off * (s - std::sin(om * s) / om);
    CHECK(slip == Catch::Approx(std::numbers::pi).margin(1e-9));
    // always-resonant drive: window capped at half a period
    auto flat = DriveWaveform::from_angular(0.0, 10.0, 2.0, 1.0);
    CHECK(resonant_half_width(flat) == Catch::Approx(flat.period() / 2.0));

    const auto design = reference_design();
    const auto [lo, hi] = design.resonant_window();
    CHECK(hi - lo == Catch::Approx(2.0 * resonant_half_width(design.base)));
    CHECK(0.5 * (lo + hi) == Catch::Approx(design.jump_time));
}

TEST_CASE("pulse design serializes round-trip", "[pulses]") {
    const auto design = reference_design();
    nlohmann::json j = design;
    const auto back = j.get<PulseDesign>();
    CHECK(back.jump_phase == design.jump_phase);
    CHECK(back.jump_time == design.jump_time);
    CHECK(back.p_scatter == design.p_scatter);
    CHECK(back.stark_per_cycle == design.stark_per_cycle);
    CHECK(back.base.nu_mod == design.base.nu_mod);
    CHECK(back.residual_p2 == design.residual_p2);
}
