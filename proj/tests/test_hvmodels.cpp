#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "phasejump/hvmodels.hpp"

using namespace phasejump;

namespace {
std::vector<PhaseTaggedOutcome> synthesize(const MeasurementModel& model,
                                           double alpha, std::size_t n,
                                           std::uint64_t seed) {
    Rng rng(seed, 0);
    std::vector<PhaseTaggedOutcome> data(n);
    for (auto& d : data) {
        d.phi = kTwoPi * rng.uniform();
        d.outcome = sample_outcome(TwoStateAmplitudes{alpha, d.phi}, model, rng);
    }
    return data;
}
}  // namespace

TEST_CASE("outcome probability: Born rule and its deformation", "[hvmodels]") {
    const auto born = MeasurementModel::born();
    for (double a : {0.0, 0.3, 1.0 / std::sqrt(2.0), 1.0}) {
        const auto o = born.p0(a, 1.7);
        CHECK(o.p0 == a * a);
        CHECK(o.p1 == 1.0 - a * a);
        CHECK_FALSE(o.clamped);
    }
    const auto m =
        MeasurementModel::phase_dependent(0.1, ModulationG::cosine(0.4));
    const double alpha = std::sqrt(0.5);
    for (double phi : {0.0, 0.9, 3.3, 6.0}) {
        const auto o = m.p0(alpha, phi);
        CHECK(o.p0 ==
              Catch::Approx(0.5 + 0.1 * std::cos(phi + 0.4)).epsilon(1e-14));
        CHECK_FALSE(o.clamped);
    }
    // saturation clamps and reports it
    const auto hot =
        MeasurementModel::phase_dependent(0.5, ModulationG::cosine(0.0));
    const auto top = hot.p0(std::sqrt(0.9), 0.0);
    CHECK(top.p0 == 1.0);
    CHECK(top.clamped);
    const auto bot = hot.p0(std::sqrt(0.1), std::numbers::pi);
    CHECK(bot.p0 == 0.0);
    CHECK(bot.clamped);

    // outcome_probability folds the unwrapped phase
    const TwoStateAmplitudes s{alpha, 1.0 + 3.0 * kTwoPi};
    CHECK(outcome_probability(s, m).p0 == Catch::Approx(m.p0(alpha, 1.0).p0));
}

TEST_CASE("model validation", "[hvmodels]") {
    CHECK_THROWS_AS(
        MeasurementModel::phase_dependent(0.6, ModulationG::cosine()),
        ConfigError);
    CHECK_THROWS_AS(
        MeasurementModel::phase_dependent(-0.1, ModulationG::cosine()),
        ConfigError);
    CHECK_THROWS_AS(ModulationG::from_table({{0.0, 1.0}}), ConfigError);
    CHECK_THROWS_AS(ModulationG::from_table({{0.0, 1.0}, {7.0, 0.0}}),
                    ConfigError);
    CHECK_THROWS_AS(ModulationG::from_table({{1.0, 1.0}, {1.0, 0.0}}),
                    ConfigError);
}

TEST_CASE("modulation shapes are zero-mean by construction", "[hvmodels]") {
    CHECK(ModulationG::cosine(0.7)(1.1) == Catch::Approx(std::cos(1.8)));
    CHECK(ModulationG::cosine().mean_residual() == 0.0);
    const auto sq = ModulationG::square_window(0.0);
    CHECK(sq(0.1) == 1.0);
    CHECK(sq(std::numbers::pi + 0.1) == -1.0);
    CHECK(sq.max_abs() == 1.0);
    // a lopsided table is centered on construction
    const auto tab =
        ModulationG::from_table({{0.0, 2.0}, {2.0, 0.5}, {4.0, 1.0}});
    CHECK(std::abs(tab.mean_residual()) < 1e-12);
    double acc = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) acc += tab(kTwoPi * (i + 0.5) / n);
    CHECK(std::abs(acc / n) < 1e-6);
}

TEST_CASE("phase-averaged detection probability stays at alpha^2",
          "[hvmodels]") {
    const std::vector<ModulationG> shapes = {
        ModulationG::cosine(0.0), ModulationG::cosine(2.1),
        ModulationG::square_window(1.3),
        ModulationG::from_table(
            {{0.0, 0.4}, {1.0, -0.6}, {3.0, 0.2}, {5.0, 0.1}})};
    for (const auto& g : shapes) {
        for (double eps : {0.02, 0.1, 0.2}) {
            const auto m = MeasurementModel::phase_dependent(eps, g);
            for (double a2 : {0.3, 0.5, 0.7}) {
                const auto avg =
                    phase_averaged_probability(m, std::sqrt(a2));
                if (avg.clamping_active) continue;
                CHECK(std::abs(avg.p0_avg - a2) < 1e-10);
                CHECK(avg.bias_bound == 0.0);
            }
        }
    }
    // Born never deviates regardless of alpha
    for (double a : {0.0, 0.5, 1.0})
        CHECK(phase_averaged_probability(MeasurementModel::born(), a).p0_avg ==
              Catch::Approx(a * a).margin(1e-15));
}

TEST_CASE("clamping shifts the average and is reported honestly",
          "[hvmodels]") {
    const auto m =
        MeasurementModel::phase_dependent(0.3, ModulationG::cosine(0.0));
    const auto avg = phase_averaged_probability(m, std::sqrt(0.9));
    CHECK(avg.clamping_active);
    CHECK(avg.p0_avg < 0.9);  // the top of the cosine is cut off
    CHECK(avg.bias_bound == Catch::Approx(std::abs(avg.p0_avg - 0.9)));
    CHECK(avg.bias_bound > 1e-4);

    // numerical cross-check of the clamped average
    double acc = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
        const double phi = kTwoPi * (i + 0.5) / n;
        acc += std::clamp(0.9 + 0.3 * std::cos(phi), 0.0, 1.0);
    }
    CHECK(avg.p0_avg == Catch::Approx(acc / n).margin(1e-8));

    CHECK_THROWS_AS(phase_averaged_probability(m, 1.5), ConfigError);
}

TEST_CASE("harmonic detector recovers a planted deviation", "[hvmodels]") {
    const auto m =
        MeasurementModel::phase_dependent(0.1, ModulationG::cosine(2.0));
    const auto data = synthesize(m, std::sqrt(0.5), 10000, 404);
    const auto rep = detect_phase_dependence(data);
    CHECK(std::abs(rep.epsilon_hat - 0.1) < 3.0 * rep.stderr_);
    CHECK(rep.p_value < 1e-6);
    CHECK(std::abs(wrap_pi(rep.phi0_hat - 2.0)) < 0.2);
    CHECK(rep.min_detectable_epsilon > 0.02);
    CHECK(rep.min_detectable_epsilon < 0.04);
    CHECK(rep.n == 10000);
    CHECK_FALSE(rep.degenerate);
    CHECK(rep.phase_concentration_r < 0.05);  // uniform phase coverage

    const auto chi2 = detect_phase_dependence_binned(data, 16);
    CHECK(chi2.p_value < 1e-4);
    CHECK(chi2.n_bins_used == 16);
}

TEST_CASE("harmonic detector stays quiet under the Born rule", "[hvmodels]") {
    const auto data =
        synthesize(MeasurementModel::born(), std::sqrt(0.5), 10000, 405);
    const auto rep = detect_phase_dependence(data);
    CHECK(std::abs(rep.epsilon_hat) < 3.0 * rep.stderr_);
    CHECK(rep.p_value > 0.01);
    CHECK(detect_phase_dependence_binned(data, 16).p_value > 0.01);
}

TEST_CASE("deviation estimate is unbiased over repeated experiments",
          "[hvmodels]") {
    const double eps = 0.15;
    const auto m =
        MeasurementModel::phase_dependent(eps, ModulationG::cosine(0.9));
    std::vector<double> hats, ses;
    for (std::uint64_t rep = 0; rep < 200; ++rep) {
        const auto data = synthesize(m, std::sqrt(0.5), 4000, 1000 + rep);
        const auto r = detect_phase_dependence(data);
        hats.push_back(r.epsilon_hat);
        ses.push_back(r.stderr_);
    }
    const auto s = stats::summarize(hats);
    const double sem = s.stddev / std::sqrt(double(hats.size()));
    CHECK(std::abs(s.mean - eps) < 3.0 * sem);
    // reported standard error calibrates against the rep-to-rep scatter
    const double se_mean = stats::summarize(ses).mean;
    CHECK(s.stddev / se_mean > 0.75);
    CHECK(s.stddev / se_mean < 1.25);
}

TEST_CASE("detector input validation and degeneracy", "[hvmodels]") {
    std::vector<PhaseTaggedOutcome> tiny(50);
    CHECK_THROWS_AS(detect_phase_dependence(tiny), ConfigError);
    CHECK_THROWS_AS(detect_phase_dependence_binned(tiny), ConfigError);

    // all measurements at one phase: amplitude and offset are inseparable
    std::vector<PhaseTaggedOutcome> flat(500);
    Rng rng(7, 0);
    for (auto& d : flat) {
        d.phi = 1.0;
        d.outcome = rng.uniform() < 0.5 ? 0 : 1;
    }
    const auto rep = detect_phase_dependence(flat);
    CHECK(rep.degenerate);
    CHECK(rep.phase_concentration_r > 0.999);
}
