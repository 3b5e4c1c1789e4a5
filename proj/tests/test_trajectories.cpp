#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "phasejump/hvmodels.hpp"
#include "phasejump/pulses.hpp"
#include "phasejump/trajectories.hpp"

using namespace phasejump;

namespace {
const PulseDesign& reference_design() {
    static const PulseDesign d = complete_design(
        find_phase_jump(DriveWaveform::from_angular(100, 10, 2, 1), 1e-8, 512,
                        1e-10),
        1e-10);
    return d;
}
const TwoStateAmplitudes kBright{0.0, 0.0};  // all population in |1>
}  // namespace

TEST_CASE("abstract jump times are exponential with the configured mean",
          "[trajectories]") {
    const auto sim = TrajectorySimulator::abstract(1.0, 0.0);
    const auto recs =
        sim.ensemble(kBright, MeasurementModel::born(), 10000, 42, 4);
    std::vector<double> t;
    for (const auto& r : recs) {
        REQUIRE(r.terminal == "measured-1");
        REQUIRE(r.jump_times.size() == 1);
        t.push_back(r.jump_times[0]);
    }
    CHECK(stats::ks_exponential(t, 1.0).p_value > 0.01);
    const auto s = stats::summarize(t);
    CHECK(std::abs(s.mean - 1.0) < 4.0 * s.stddev / std::sqrt(double(t.size())));

    const auto surv = survival_curve(recs, 4.0, 41);
    CHECK(surv.front().survival == 1.0);
    for (std::size_t i = 1; i < surv.size(); ++i)
        CHECK(surv[i].survival <= surv[i - 1].survival);
    const auto mid = surv[10];  // t = 1
    CHECK(std::abs(mid.survival - std::exp(-1.0)) < 0.02);
}

TEST_CASE("abstract phase tag advances at the two-state frequency",
          "[trajectories]") {
    const auto sim = TrajectorySimulator::abstract(1.0, 0.5);
    for (std::uint64_t i = 0; i < 50; ++i) {
        const auto r =
            sim.run(TwoStateAmplitudes{0.0, 1.2}, MeasurementModel::born(), 3, i);
        REQUIRE(r.jump_times.size() == 1);
        CHECK(r.phase_at_jump[0] ==
              Catch::Approx(wrap_2pi(1.2 + kTwoPi * 0.5 * r.jump_times[0]))
                  .margin(1e-12));
    }
}

TEST_CASE("abstract horizon censors instead of inventing events",
          "[trajectories]") {
    const auto sim = TrajectorySimulator::abstract(1.0, 0.0, 1e-9);
    const auto recs =
        sim.ensemble(kBright, MeasurementModel::born(), 200, 5, 1);
    for (const auto& r : recs) {
        CHECK(r.censored);
        CHECK(r.terminal == "dark-0");
        CHECK(r.jump_times.empty());
    }
    CHECK_THROWS_AS(TrajectorySimulator::abstract(0.0, 0.0), ConfigError);
    CHECK_THROWS_AS(TrajectorySimulator::abstract(1.0, -1.0), ConfigError);
}

TEST_CASE("prepared dark state never produces a jump", "[trajectories]") {
    const TwoStateAmplitudes dark{1.0, 0.0};
    const auto born = MeasurementModel::born();
    for (const auto& sim :
         {TrajectorySimulator::abstract(1.0, 0.3),
          TrajectorySimulator::continuous(2.0, 1.0, 0.3, 50.0),
          TrajectorySimulator::pulsed(reference_design(), 0.3, 4000, false)}) {
        const auto recs = sim.ensemble(dark, born, 100, 9, 2);
        for (const auto& r : recs) {
            CHECK(r.terminal == "dark-0");
            CHECK(r.jump_times.empty());
        }
    }
}

TEST_CASE("continuous engine: exact mean first-jump time", "[trajectories]") {
    const double omega = 2.0, gamma = 1.0;
    const auto sim = TrajectorySimulator::continuous(omega, gamma, 0.0, 60.0);
    const double tau_closed =
        (gamma * gamma + 2.0 * omega * omega) / (gamma * omega * omega);
    CHECK(sim.mean_jump_time() == Catch::Approx(tau_closed).epsilon(1e-9));
    CHECK(tau_closed == Catch::Approx(2.25));

    const auto recs =
        sim.ensemble(kBright, MeasurementModel::born(), 20000, 17, 4);
    std::vector<double> first;
    for (const auto& r : recs) {
        REQUIRE_FALSE(r.jump_times.empty());
        first.push_back(r.jump_times[0]);
        for (std::size_t i = 1; i < r.jump_times.size(); ++i)
            CHECK(r.jump_times[i] > r.jump_times[i - 1]);
    }
    const auto s = stats::summarize(first);
    CHECK(std::abs(s.mean - tau_closed) <
          4.0 * s.stddev / std::sqrt(double(first.size())));
}

TEST_CASE("phase-blind continuous detection shows no phase concentration",
          "[trajectories]") {
    const double tau = 2.25;
    const auto sim = TrajectorySimulator::continuous(2.0, 1.0, 1.0 / tau,
                                                     64.0 * tau);
    const auto recs =
        sim.ensemble(kBright, MeasurementModel::born(), 1000, 23, 4);
    const auto stats_ = phase_selectivity(recs, 32);
    CHECK(stats_.circular.r < 0.05);
    CHECK(stats_.n_jumps > 10000);
}

TEST_CASE("pulsed first-cycle probability equals the design probability",
          "[trajectories]") {
    const auto& d = reference_design();
    const auto sim = TrajectorySimulator::pulsed(d, 0.0, 1, false);
    CHECK(sim.pulsed_engine().p_first_cycle ==
          Catch::Approx(d.p_scatter).epsilon(1e-6));
    // asymptotic rate (dominant multiplier) sits a touch below the
    // first-cycle rate: the surviving vector relaxes onto the lossier branch
    const auto longsim = TrajectorySimulator::pulsed(d, 0.0, 1 << 24, false);
    const double ratio =
        longsim.mean_jump_time() * d.p_scatter / d.base.period();
    CHECK(ratio > 0.95);
    CHECK(ratio < 1.01);
}

TEST_CASE("pulsed event rate matches the bright-branch norm loss",
          "[trajectories]") {
    const auto& d = reference_design();
    const auto sim = TrajectorySimulator::pulsed(d, 0.0, 1, false);
    const std::size_t n = 100000;
    const auto recs = sim.ensemble(kBright, MeasurementModel::born(), n, 29, 4);

    const auto [w_lo, w_hi] = d.resonant_window();
    std::size_t measured = 0, in_window = 0;
    for (const auto& r : recs) {
        if (r.terminal != "measured-1") continue;
        ++measured;
        const double t = r.jump_times[0];
        if (t >= w_lo && t <= w_hi) ++in_window;
    }

    // whole-cycle rate vs the per-pulse probability
    const double sigma_tot = std::sqrt(d.p_scatter * (1 - d.p_scatter) / n);
    CHECK(std::abs(double(measured) / n - d.p_scatter) < 3.0 * sigma_tot);

    // windowed rate vs the norm loss across the window
    const auto wf = d.waveform_with_jump();
    const auto at = [&](double t) {
        return integrate_path(AtomState::ground(), wf, 0.0, t, 1e-10)
            .final_state.norm2();
    };
    const double p_win = at(w_lo) - at(w_hi);
    const double sigma_win = std::sqrt(p_win * (1 - p_win) / n);
    CHECK(std::abs(double(in_window) / n - p_win) < 3.0 * sigma_win);
    CHECK(p_win / d.p_scatter > 0.9);  // the window holds nearly all the rate
}

TEST_CASE("stark-matched design: retuned period, re-derived jump",
          "[trajectories]") {
    const auto& d = reference_design();
    const auto ld = locked_design(d, 10.0 / kTwoPi);
    CHECK(ld.base.nu_mod ==
          Catch::Approx(d.base.nu_mod / (1.0 + d.stark_per_cycle / kTwoPi))
              .epsilon(1e-12));
    CHECK(ld.jump_time == Catch::Approx(0.5 * ld.base.period()));
    CHECK(ld.jump_phase ==
          Catch::Approx(closed_form_jump_phase(ld.base, 1e-10)).margin(1e-9));
}

TEST_CASE("tracker phase drifts at the light shift unless retuned",
          "[trajectories]") {
    const auto& d = reference_design();
    const double s = d.stark_per_cycle;

    // free-running pulse train: drift = -s per cycle
    const auto unlocked = TrajectorySimulator::pulsed(d, 0.0, 20000, false);
    const auto r1 =
        unlocked.ensemble(kBright, MeasurementModel::born(), 300, 101, 4);
    const auto f1 = jump_phase_drift(r1, d.base.period());
    CHECK(f1.slope / (-s) > 0.9);
    CHECK(f1.slope / (-s) < 1.1);

    // retuned train, clock at the modulation frequency: drift nearly cancels
    const double nu10 = d.base.nu_mod;
    const auto locked = TrajectorySimulator::pulsed(d, nu10, 20000, true);
    const auto r2 =
        locked.ensemble(kBright, MeasurementModel::born(), 300, 101, 4);
    const auto ld = locked_design(d, nu10);
    const auto f2 = jump_phase_drift(r2, ld.base.period());
    CHECK(std::abs(f2.slope) < 0.5 * s);
    CHECK(phase_selectivity(r2, 32).circular.r > 0.5);

    CHECK_THROWS_AS(jump_phase_drift(r1, 0.0), ConfigError);
}

TEST_CASE("ensembles are bitwise independent of threading",
          "[trajectories]") {
    const auto sim = TrajectorySimulator::pulsed(reference_design(),
                                                 10.0 / kTwoPi, 4000, true);
    const auto a = sim.ensemble(kBright, MeasurementModel::born(), 400, 77, 1);
    const auto b = sim.ensemble(kBright, MeasurementModel::born(), 400, 77, 8);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(nlohmann::json(a[i]) == nlohmann::json(b[i]));
        CHECK(a[i].stream == i);
    }
}

TEST_CASE("trajectory records round-trip through jsonl", "[trajectories]") {
    const auto sim = TrajectorySimulator::continuous(2.0, 1.0, 0.4, 30.0);
    const auto recs =
        sim.ensemble(TwoStateAmplitudes{0.6, 0.9}, MeasurementModel::born(),
                     50, 13, 2);
    std::ostringstream os;
    write_records_jsonl(os, recs);
    std::istringstream is(os.str());
    const auto back = read_records_jsonl(is);
    REQUIRE(back.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i)
        CHECK(nlohmann::json(back[i]) == nlohmann::json(recs[i]));
}

TEST_CASE("ensemble statistics input validation", "[trajectories]") {
    const auto sim = TrajectorySimulator::abstract(1.0, 0.0);
    CHECK_THROWS_AS(sim.ensemble(kBright, MeasurementModel::born(), 0, 1),
                    ConfigError);
    const std::vector<TrajectoryRecord> none;
    CHECK_THROWS_AS(phase_selectivity(none, 32), ConfigError);
    CHECK_THROWS_AS(survival_curve(none, 1.0), ConfigError);
    // all-dark ensemble has no jump phases to pool
    const auto dark =
        sim.ensemble(TwoStateAmplitudes{1.0, 0.0}, MeasurementModel::born(),
                     50, 2, 1);
    CHECK_THROWS_AS(phase_selectivity(dark, 32), ConfigError);
    CHECK_THROWS_AS(survival_curve(dark, -1.0), ConfigError);
}
