#pragma once

// Scenario orchestration: each CLI subcommand maps to one runner that emits
// CSV/JSONL/SVG artifacts plus a manifest sufficient to reproduce the run
// bitwise (same config, same seeds, same bytes).

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "phasejump/bloch.hpp"
#include "phasejump/config.hpp"
#include "phasejump/core.hpp"
#include "phasejump/hvmodels.hpp"
#include "phasejump/io.hpp"
#include "phasejump/pulses.hpp"
#include "phasejump/selection.hpp"
#include "phasejump/stats.hpp"
#include "phasejump/trajectories.hpp"

namespace phasejump::scenario {

namespace fs = std::filesystem;
using config::RunConfig;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Run context: collects artifacts and their hashes for the manifest

class Context {
  public:
    Context(const RunConfig& cfg, fs::path dir, bool force)
        : cfg_(cfg), dir_(std::move(dir)), force_(force), hash_(cfg.hash()) {
        manifest_.config = cfg.resolved();
        fs::create_directories(dir_);
    }

    const RunConfig& cfg() const { return cfg_; }
    const fs::path& dir() const { return dir_; }
    bool force() const { return force_; }
    const std::string& config_hash() const { return hash_; }

    bool wants(std::string_view fmt) const {
        for (const auto& f : cfg_.output.formats)
            if (f == fmt) return true;
        return false;
    }

    unsigned threads() const {
        if (cfg_.ensemble.threads > 0) return unsigned(cfg_.ensemble.threads);
        const unsigned hw = std::thread::hardware_concurrency();
        return hw ? hw : 1;
    }

    void put(const std::string& filename, const std::string& content) {
        io::atomic_write(dir_ / filename, content);
        manifest_.outputs.emplace_back(filename,
                                       io::hex64(io::fnv1a64(content)));
    }

    void table(const std::string& name, const io::Table& t) {
        if (!wants("csv")) return;
        const std::string csv = t.csv();
        put(name + ".csv", csv);
        json meta;
        meta["columns"] = json::array();
        for (const auto& c : t.columns())
            meta["columns"].push_back({{"name", c.name}, {"unit", c.unit}});
        meta["rows"] = t.rows();
        meta["config_hash"] = hash_;
        meta["version"] = kVersion;
        meta["content_fnv1a64"] = io::hex64(io::fnv1a64(csv));
        put(name + ".meta.json", meta.dump(2) + "\n");
    }

    void plot(const std::string& name, const io::Table& t, std::size_t xi,
              std::initializer_list<std::size_t> yis,
              const std::string& title) {
        if (!wants("svg")) return;
        std::vector<io::Series> series;
        for (std::size_t yi : yis) {
            io::Series s;
            s.label = t.columns().at(yi).name;
            const auto xs = t.column(xi);
            const auto ys = t.column(yi);
            s.x.assign(xs.begin(), xs.end());
            s.y.assign(ys.begin(), ys.end());
            series.push_back(std::move(s));
        }
        put(name + ".svg",
            io::svg_line_plot(series, title, t.columns().at(xi).name,
                              yis.size() == 1 ? t.columns().at(*yis.begin()).name
                                              : std::string("value")));
    }

    void json_out(const std::string& name, const json& j) {
        put(name + ".json", j.dump(2) + "\n");
    }

    void jsonl(const std::string& name,
               std::span<const TrajectoryRecord> records) {
        if (!wants("jsonl")) return;
        std::ostringstream os;
        write_records_jsonl(os, records);
        put(name + ".jsonl", os.str());
    }

    void finalize() { io::atomic_write(dir_ / "manifest.json", manifest_.dump()); }

  private:
    const RunConfig& cfg_;
    fs::path dir_;
    bool force_;
    std::string hash_;
    config::Manifest manifest_;
};

// ---------------------------------------------------------------------------
// Config -> domain objects

inline DriveWaveform waveform_from(const RunConfig& cfg) {
    return DriveWaveform::from_angular(
        cfg.waveform.two_pi_nu_off, cfg.waveform.two_pi_nu_mod,
        cfg.waveform.omega_r, cfg.waveform.gamma2);
}

inline MeasurementModel model_from(const RunConfig& cfg) {
    if (cfg.model.kind == "born") return MeasurementModel::born();
    const ModulationG g = cfg.model.g == "cos"
                              ? ModulationG::cosine(cfg.model.g_phi0)
                              : ModulationG::square_window(cfg.model.g_phi0);
    return MeasurementModel::phase_dependent(cfg.model.epsilon, g);
}

inline TwoStateAmplitudes state_from(const RunConfig& cfg) {
    return {std::sqrt(cfg.model.alpha2), cfg.model.phi0};
}

inline PhaseReference phase_ref_from(const RunConfig& cfg) {
    return cfg.trajectories.phase_reference == "fold-c2"
               ? PhaseReference::FoldC2
               : PhaseReference::C1Branch;
}

inline PulseDesign design_from(const RunConfig& cfg) {
    const DriveWaveform wf = waveform_from(cfg);
    PulseDesign d = find_phase_jump(wf, cfg.pulse.search_tol,
                                    std::size_t(cfg.pulse.grid_points),
                                    cfg.pulse.tol);
    if (std::isfinite(cfg.pulse.jump_phase)) {
        d.jump_phase = wrap_2pi(cfg.pulse.jump_phase);
        const auto land =
            phasejump::detail::jump_landscape(wf.with_gamma2(0.0), cfg.pulse.tol);
        d.residual_p2 = land.residual(d.jump_phase);
    }
    return complete_design(d, cfg.pulse.tol);
}

inline json design_report(const RunConfig& cfg, const PulseDesign& d) {
    const MeasurementBudget budget =
        pulses_for_measurement(d.p_scatter, cfg.pulse.confidence);
    const CorrectedModulation cm =
        corrected_modulation(d.base, d.stark_per_cycle, cfg.model.nu10);
    const auto [w_lo, w_hi] = d.resonant_window();
    json j;
    j["jump_phase"] = d.jump_phase;
    j["jump_phase_closed_form"] =
        closed_form_jump_phase(d.base, cfg.pulse.tol);
    j["jump_time"] = d.jump_time;
    j["residual_p2"] = d.residual_p2;
    j["p_scatter"] = d.p_scatter;
    j["expected_pulses"] = budget.expected_pulses;
    j["pulses_for_confidence"] = budget.n_for_target;
    j["confidence"] = budget.target;
    j["stark_per_cycle"] = d.stark_per_cycle;
    j["stark_adiabatic"] = stark_phase_adiabatic(d.base);
    j["nu_mod_prime"] = cm.nu_mod_prime;
    j["nu_mod_fractional_change"] = cm.fractional_change;
    j["resonant_window"] = {{"lo", w_lo},
                            {"hi", w_hi},
                            {"half_width", 0.5 * (w_hi - w_lo)}};
    j["degenerate_landscape"] = d.degenerate_landscape;
    j["multimodal_warning"] = d.multimodal_warning;
    return j;
}

// fraction of jump events whose cycle-folded time lies inside the scheduled
// resonant window
inline double in_window_fraction(std::span<const TrajectoryRecord> records,
                                 const PulseDesign& design) {
    const auto [lo, hi] = design.resonant_window();
    const double T = design.base.period();
    std::size_t inside = 0, total = 0;
    for (const auto& r : records)
        for (double t : r.jump_times) {
            const double u = t - T * std::floor(t / T);
            ++total;
            if (u >= lo && u <= hi) ++inside;
        }
    return total ? double(inside) / double(total)
                 : std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// integrate: deterministic Bloch integration, time-series CSV

inline json run_integrate(Context& ctx) {
    const RunConfig& cfg = ctx.cfg();
    const DriveWaveform base = waveform_from(cfg);
    const int n_cycles = int(cfg.integrate.n_cycles);

    double jump_phase = std::numeric_limits<double>::quiet_NaN();
    DriveWaveform wf = base.repeated(n_cycles);
    if (cfg.integrate.jump != "none") {
        jump_phase = cfg.integrate.jump == "auto"
                         ? closed_form_jump_phase(base, cfg.pulse.tol)
                         : wrap_2pi(std::stod(cfg.integrate.jump));
        wf = base.with_jump(base.resonance_time(0), jump_phase)
                 .repeated(n_cycles);
    }

    const AtomState s0 = AtomState::pure(
        std::sqrt(cfg.model.alpha2),
        std::sqrt(std::max(0.0, 1.0 - cfg.model.alpha2)) *
            std::exp(kI * cfg.model.phi0),
        0.0);
    const double t_end = double(n_cycles) * base.period();
    const PathResult run = integrate_path(s0, wf, 0.0, t_end, cfg.integrate.tol);
    const PathResult ref = integrate_path(s0, base.repeated(n_cycles), 0.0,
                                          t_end, cfg.integrate.tol);

    io::Table t({{"t", "1/gamma2"},
                 {"p1", "probability"},
                 {"p2", "probability"},
                 {"survival", "probability"},
                 {"p2_free", "probability"},
                 {"detuning", "gamma2 rad/time"}});
    const std::size_t n = std::size_t(cfg.integrate.n_samples);
    for (std::size_t i = 0; i < n; ++i) {
        const double tt = t_end * double(i) / double(n - 1);
        const ode::State y = run.path.eval(tt);
        const ode::State yr = ref.path.eval(tt);
        t.add_row({tt, std::norm(y[1]), std::norm(y[2]),
                   std::norm(y[0]) + std::norm(y[1]) + std::norm(y[2]),
                   std::norm(yr[2]), wf.detuning_at(tt)});
    }
    ctx.table("timeseries", t);
    ctx.plot("timeseries", t, 0, {2, 4}, "excited population");

    json summary;
    summary["p2_end"] = run.final_state.p2();
    summary["p1_end"] = run.final_state.p1();
    summary["survival_end"] = run.final_state.norm2();
    summary["scatter_probability"] = 1.0 - run.final_state.norm2();
    if (std::isfinite(jump_phase)) summary["jump_phase"] = jump_phase;
    return summary;
}

// ---------------------------------------------------------------------------
// find-jump: pulse design search and report

inline json run_find_jump(Context& ctx) {
    const RunConfig& cfg = ctx.cfg();
    const PulseDesign d = design_from(cfg);
    ctx.json_out("design", design_report(cfg, d));

    io::Table land({{"jump_phase", "rad"}, {"residual_p2", "probability"}});
    for (const auto& [theta, r] : d.landscape) land.add_row({theta, r});
    ctx.table("landscape", land);
    ctx.plot("landscape", land, 0, {1}, "cycle-end residual vs jump phase");

    json summary;
    summary["jump_phase"] = d.jump_phase;
    summary["residual_p2"] = d.residual_p2;
    summary["p_scatter"] = d.p_scatter;
    summary["expected_pulses"] = 1.0 / d.p_scatter;
    summary["stark_per_cycle"] = d.stark_per_cycle;
    return summary;
}

// ---------------------------------------------------------------------------
// trajectories: quantum-jump Monte Carlo ensembles

inline json run_trajectories(Context& ctx) {
    const RunConfig& cfg = ctx.cfg();
    const auto& tj = cfg.trajectories;
    const MeasurementModel model = model_from(cfg);
    const TwoStateAmplitudes s0 = state_from(cfg);

    std::optional<PulseDesign> design;
    double horizon = tj.t_max;
    double mean_wait = tj.tau_m;
    TrajectorySimulator sim = [&] {
        if (tj.mode == "abstract")
            return TrajectorySimulator::abstract(tj.tau_m, cfg.model.nu10,
                                                 tj.t_max);
        if (tj.mode == "continuous") {
            const double om = cfg.waveform.omega_r, g2 = cfg.waveform.gamma2;
            mean_wait = (g2 * g2 + 2.0 * om * om) / (g2 * om * om);
            return TrajectorySimulator::continuous(om, g2, cfg.model.nu10,
                                                   tj.t_max,
                                                   phase_ref_from(cfg));
        }
        design = design_from(cfg);
        horizon = double(tj.n_cycles) * design->base.period();
        mean_wait = design->p_scatter > 0.0
                        ? design->base.period() / design->p_scatter
                        : horizon;
        return TrajectorySimulator::pulsed(*design, cfg.model.nu10,
                                           tj.n_cycles,
                                           cfg.pulse.stark_locked,
                                           cfg.pulse.tol, phase_ref_from(cfg));
    }();

    const auto records =
        sim.ensemble(s0, model, std::size_t(cfg.ensemble.n_trajectories),
                     cfg.ensemble.seed, ctx.threads());
    ctx.jsonl("records", records);

    const EnsembleStats st = phase_selectivity(records, 32);
    json stats_j = st;

    io::Table hist({{"phase", "rad"},
                    {"frequency", "probability"},
                    {"stderr", "probability"}});
    for (std::size_t i = 0; i < st.phase_freq.size(); ++i)
        hist.add_row(
            {st.phase_hist.bin_center(i), st.phase_freq[i], st.phase_err[i]});
    ctx.table("phase_histogram", hist);
    ctx.plot("phase_histogram", hist, 0, {1}, "jump-phase distribution");

    const double t_end = std::min(horizon, 8.0 * mean_wait);
    io::Table surv({{"t", "1/gamma2"},
                    {"survival", "probability"},
                    {"lo", "probability"},
                    {"hi", "probability"}});
    for (const auto& p : survival_curve(records, t_end))
        surv.add_row({p.t, p.survival, p.lo, p.hi});
    ctx.table("survival", surv);
    ctx.plot("survival", surv, 0, {1}, "no-jump survival");

    json summary;
    summary["phase_concentration_R"] = st.circular.r;
    summary["n_jumps"] = double(st.n_jumps);
    summary["measured_fraction"] =
        double(st.n_measured) / double(st.n_records);
    if (design) {
        // fold with the design as run (period changes under stark locking)
        const PulseDesign effective =
            cfg.pulse.stark_locked
                ? locked_design(*design, cfg.model.nu10, cfg.pulse.tol)
                : *design;
        const double f = in_window_fraction(records, effective);
        stats_j["in_window_fraction"] = f;
        summary["in_window_fraction"] = f;
        try {
            const DriftFit drift =
                jump_phase_drift(records, effective.base.period());
            stats_j["drift"] = {{"slope", drift.slope},
                                {"slope_se", drift.slope_se},
                                {"n_bins", drift.n_bins}};
            summary["drift_slope"] = drift.slope;
        } catch (const ConfigError&) {
            // too few occupied cycles for a drift fit; fine for small runs
        }
        ctx.json_out("design", design_report(cfg, *design));
    }
    ctx.json_out("stats", stats_j);
    return summary;
}

// ---------------------------------------------------------------------------
// selection: dark-state pumping discrimination scheme

inline json run_selection(Context& ctx) {
    const RunConfig& cfg = ctx.cfg();
    SelectionScheme scheme;
    scheme.q_dark = cfg.selection.q_dark;
    scheme.gamma2 = cfg.selection.gamma2;
    scheme.nu10 = cfg.selection.nu10;
    scheme.tau_m = cfg.selection.tau_m;
    scheme.validate();

    const auto records = selection_ensemble(
        state_from(cfg), scheme, model_from(cfg),
        std::size_t(cfg.ensemble.n_trajectories), cfg.ensemble.seed,
        ctx.threads());
    ctx.jsonl("records", records);

    // photon-count histogram vs the geometric law
    const PhotonCountDistribution pc = photon_count_distribution(scheme);
    std::map<std::uint64_t, std::size_t> counts;
    std::size_t bright = 0;
    double mean = 0.0, m2 = 0.0;
    std::vector<double> first_phase;
    for (const auto& r : records) {
        if (r.n_photons == 0) continue;
        ++bright;
        ++counts[r.n_photons];
        const double d = double(r.n_photons) - mean;
        mean += d / double(bright);
        m2 += d * (double(r.n_photons) - mean);
        if (std::isfinite(r.phase_tag)) first_phase.push_back(r.phase_tag);
    }
    io::Table hist({{"n_photons", "count"},
                    {"frequency", "probability"},
                    {"geometric_pmf", "probability"}});
    if (!counts.empty()) {
        const std::uint64_t n_max = counts.rbegin()->first;
        for (std::uint64_t n = 1; n <= n_max; ++n) {
            const auto it = counts.find(n);
            const double f =
                it == counts.end() ? 0.0 : double(it->second) / double(bright);
            hist.add_row({double(n), f, pc.pmf(n)});
        }
    }
    ctx.table("photon_histogram", hist);
    ctx.plot("photon_histogram", hist, 0, {1, 2}, "photon-count law");

    const PulseDesign design = design_from(cfg);
    ctx.json_out("comparison", json(scheme_compare(design, scheme)));

    json summary;
    summary["photons_mean"] = mean;
    summary["photons_variance"] =
        bright > 1 ? m2 / double(bright - 1)
                   : std::numeric_limits<double>::quiet_NaN();
    summary["bright_fraction"] =
        double(bright) / double(records.size());
    if (first_phase.size() >= 2) {
        const stats::CircularSummary c = stats::circular_summary(first_phase);
        summary["first_scatter_R"] = c.r;
        summary["first_scatter_spread"] = c.stddev;
    }
    return summary;
}

// ---------------------------------------------------------------------------
// hv-test: end-to-end phase-dependence detection

inline json run_hv_test(Context& ctx) {
    const RunConfig& cfg = ctx.cfg();
    const MeasurementModel model = model_from(cfg);
    const double alpha = std::sqrt(cfg.model.alpha2);
    const std::size_t n = std::size_t(cfg.ensemble.n_trajectories);

    // each measurement: fresh preparation at a uniform phase, an exponential
    // waiting time advancing the clock, then one sampled outcome
    std::vector<PhaseTaggedOutcome> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(cfg.ensemble.seed, i);
        const double phi0 = kTwoPi * rng.uniform();
        const double wait = rng.exponential(cfg.trajectories.tau_m);
        const double phi =
            wrap_2pi(phi0 + kTwoPi * cfg.model.nu10 * wait);
        const TwoStateAmplitudes s(alpha, phi);
        data[i] = {phi, sample_outcome(s, model, rng)};
    }

    const HvTestReport report = detect_phase_dependence(data);
    const BinnedChi2Report binned =
        detect_phase_dependence_binned(data, std::size_t(cfg.hv.n_bins));

    json rep = report;
    rep["binned"] = {{"chi2", binned.chi2},
                     {"dof", binned.dof},
                     {"p_value", binned.p_value},
                     {"n_bins_used", binned.n_bins_used}};
    ctx.json_out("report", rep);

    // binned empirical P(outcome 0 | phase) against the model curve
    const std::size_t nb = std::size_t(cfg.hv.n_bins);
    std::vector<std::size_t> tot(nb, 0), zero(nb, 0);
    for (const auto& d : data) {
        const auto b = std::min(nb - 1, std::size_t(d.phi / kTwoPi * double(nb)));
        ++tot[b];
        zero[b] += d.outcome == 0;
    }
    io::Table t({{"phase", "rad"},
                 {"p0_hat", "probability"},
                 {"stderr", "probability"},
                 {"p0_model", "probability"}});
    for (std::size_t b = 0; b < nb; ++b) {
        const double c = (double(b) + 0.5) * kTwoPi / double(nb);
        const double ph = tot[b] ? double(zero[b]) / double(tot[b])
                                 : std::numeric_limits<double>::quiet_NaN();
        const double se =
            tot[b] ? std::sqrt(std::max(ph * (1.0 - ph), 1e-12) / double(tot[b]))
                   : std::numeric_limits<double>::quiet_NaN();
        t.add_row({c, ph, se,
                   outcome_probability(TwoStateAmplitudes(alpha, c), model).p0});
    }
    ctx.table("binned_p0", t);
    ctx.plot("binned_p0", t, 0, {1, 3}, "outcome probability vs phase");

    bool expect_ok = true;
    if (cfg.hv.expect == "null") expect_ok = report.p_value > 0.01;
    if (cfg.hv.expect == "signal") expect_ok = report.p_value < 0.01;

    json summary;
    summary["epsilon_hat"] = report.epsilon_hat;
    summary["stderr"] = report.stderr_;
    summary["p_value"] = report.p_value;
    summary["min_detectable_epsilon"] = report.min_detectable_epsilon;
    summary["binned_p_value"] = binned.p_value;
    summary["expect_ok"] = expect_ok ? 1.0 : 0.0;
    return summary;
}

// ---------------------------------------------------------------------------
// fig3: pulse-design figure bundle at the headline parameter set

inline json run_fig3(Context& ctx) {
    const RunConfig& cfg = ctx.cfg();
    const PulseDesign d = design_from(cfg);
    ctx.json_out("design", design_report(cfg, d));

    // (a) excited population across two cycles, with and without the jump
    const DriveWaveform with_jump = d.waveform_with_jump().repeated(2);
    const DriveWaveform free = d.base.repeated(2);
    const AtomState s0 = AtomState::ground();
    const double t_end = 2.0 * d.base.period();
    const PathResult pj = integrate_path(s0, with_jump, 0.0, t_end, cfg.pulse.tol);
    const PathResult pf = integrate_path(s0, free, 0.0, t_end, cfg.pulse.tol);
    io::Table ts({{"t", "1/gamma2"},
                  {"p2_jump", "probability"},
                  {"p2_free", "probability"},
                  {"detuning", "gamma2 rad/time"}});
    for (int i = 0; i < 1200; ++i) {
        const double tt = t_end * double(i) / 1199.0;
        ts.add_row({tt, std::norm(pj.path.eval(tt)[2]),
                    std::norm(pf.path.eval(tt)[2]), free.detuning_at(tt)});
    }
    ctx.table("p2_timeseries", ts);
    ctx.plot("p2_timeseries", ts, 0, {1, 2}, "excited population, jump vs free");

    // (b) jump-phase landscape
    io::Table land({{"jump_phase", "rad"}, {"residual_p2", "probability"}});
    for (const auto& [theta, r] : d.landscape) land.add_row({theta, r});
    ctx.table("landscape", land);
    ctx.plot("landscape", land, 0, {1}, "cycle-end residual vs jump phase");

    // (c) measurement probability accumulating over pulses
    const MeasurementBudget budget =
        pulses_for_measurement(d.p_scatter, cfg.pulse.confidence);
    io::Table bud({{"n_pulses", "count"},
                   {"p_detect", "probability"},
                   {"p_miss", "probability"}});
    const double n_hi = 2.0 * double(budget.n_for_target);
    for (int i = 0; i <= 200; ++i) {
        const double n = n_hi * double(i) / 200.0;
        const double pd = budget.cumulative_probability(n);
        bud.add_row({n, pd, 1.0 - pd});
    }
    ctx.table("pulse_budget", bud);
    ctx.plot("pulse_budget", bud, 0, {1}, "detection probability vs pulse count");

    // Stark phase within one cycle: dynamical tracker phase and the adiabatic
    // dressed-state integral
    const DriveWaveform coh = d.waveform_with_jump().with_gamma2(0.0);
    const PathResult ps = integrate_path(AtomState::ground(), coh, 0.0,
                                         d.base.period(), cfg.pulse.tol);
    io::Table stark({{"t", "1/gamma2"},
                     {"dynamical_phase", "rad"},
                     {"adiabatic_phase", "rad"}});
    double prev = 0.0, unwrapped = 0.0, acc = 0.0, t_prev = 0.0;
    for (int i = 0; i <= 1024; ++i) {
        const double tt = d.base.period() * double(i) / 1024.0;
        const double a = std::arg(ps.path.eval(tt)[1]);
        if (i > 0) {
            unwrapped += wrap_pi(a - prev);
            const double delta = coh.detuning_at(0.5 * (tt + t_prev));
            acc += 0.5 * (std::hypot(delta, coh.omega_r) - delta) * (tt - t_prev);
        }
        prev = a;
        t_prev = tt;
        stark.add_row({tt, unwrapped, acc});
    }
    ctx.table("stark_phase", stark);
    ctx.plot("stark_phase", stark, 0, {1, 2}, "coherence phase over one cycle");

    json summary;
    summary["jump_phase"] = d.jump_phase;
    summary["residual_p2"] = d.residual_p2;
    summary["p_scatter"] = d.p_scatter;
    summary["expected_pulses"] = budget.expected_pulses;
    summary["pulses_for_confidence"] = double(budget.n_for_target);
    summary["stark_per_cycle"] = d.stark_per_cycle;
    summary["stark_adiabatic"] = stark_phase_adiabatic(d.base);
    return summary;
}

// ---------------------------------------------------------------------------
// fig1: waiting-time law and continuous-vs-pulsed phase selectivity

inline json run_fig1(Context& ctx) {
    const RunConfig& cfg = ctx.cfg();
    const std::size_t n = std::size_t(cfg.ensemble.n_trajectories);
    const double om = cfg.waveform.omega_r, g2 = cfg.waveform.gamma2;
    const double tau_m = (g2 * g2 + 2.0 * om * om) / (g2 * om * om);
    const TwoStateAmplitudes bright(0.0, 0.0);
    const MeasurementModel born = MeasurementModel::born();

    // (a) waiting-time law under continuous resonant detection
    const auto wait_recs =
        TrajectorySimulator::continuous(om, g2, 0.0, 8.0 * tau_m)
            .ensemble(bright, born, n, cfg.ensemble.seed, ctx.threads());
    io::Table wt({{"t", "1/gamma2"},
                  {"survival", "probability"},
                  {"lo", "probability"},
                  {"hi", "probability"},
                  {"exponential", "probability"}});
    for (const auto& p : survival_curve(wait_recs, 8.0 * tau_m))
        wt.add_row({p.t, p.survival, p.lo, p.hi, std::exp(-p.t / tau_m)});
    ctx.table("waiting_time", wt);
    ctx.plot("waiting_time", wt, 0, {1, 4}, "first-event survival");

    // (b) phase at measurement: continuous detection at tau_m = tau_phi has no
    // phase preference; the pulsed design concentrates events at resonance
    const double nu10_b = 1.0 / tau_m;  // tau_phi = tau_m
    const auto cont_recs =
        TrajectorySimulator::continuous(om, g2, nu10_b, 16.0 * tau_m)
            .ensemble(bright, born, n, cfg.ensemble.seed, ctx.threads());
    const EnsembleStats cont = phase_selectivity(cont_recs, 32);

    const PulseDesign design = design_from(cfg);
    const auto pulsed_recs =
        TrajectorySimulator::pulsed(design, cfg.model.nu10,
                                    cfg.trajectories.n_cycles,
                                    cfg.pulse.stark_locked, cfg.pulse.tol)
            .ensemble(bright, born, n, cfg.ensemble.seed, ctx.threads());
    // fold pulsed jump times into cycle phase 2 pi t/T, using the period of
    // the design as run (stark locking retunes the modulation)
    const PulseDesign effective =
        cfg.pulse.stark_locked
            ? locked_design(design, cfg.model.nu10, cfg.pulse.tol)
            : design;
    const double T = effective.base.period();
    std::vector<double> cycle_phase;
    for (const auto& r : pulsed_recs)
        for (double t : r.jump_times)
            cycle_phase.push_back(kTwoPi * (t / T - std::floor(t / T)));
    if (cycle_phase.size() < 2)
        throw NumericsError("fig1: pulsed run produced too few events");
    const stats::Histogram ph =
        stats::histogram(cycle_phase, 0.0, kTwoPi, 32);
    io::Table hist({{"phase", "rad"},
                    {"continuous_freq", "probability"},
                    {"continuous_err", "probability"},
                    {"pulsed_cycle_freq", "probability"}});
    for (std::size_t i = 0; i < 32; ++i)
        hist.add_row({cont.phase_hist.bin_center(i), cont.phase_freq[i],
                      cont.phase_err[i],
                      double(ph.counts[i]) / double(cycle_phase.size())});
    ctx.table("phase_histogram", hist);
    ctx.plot("phase_histogram", hist, 0, {1, 3},
             "phase at measurement: continuous vs pulsed");

    json summary;
    summary["tau_m"] = tau_m;
    summary["R_continuous"] = cont.circular.r;
    summary["R_pulsed_cycle"] = stats::circular_summary(cycle_phase).r;
    summary["in_window_fraction"] = in_window_fraction(pulsed_recs, effective);
    return summary;
}

// ---------------------------------------------------------------------------
// sweep: cross-product grids with deterministic sub-seeds, resumable

inline json run_in(Context& ctx);  // forward

namespace detail_sweep {

inline void apply_override(json& root, const std::string& dotted, double v) {
    json* cur = &root;
    std::size_t pos = 0;
    std::vector<std::string> segs;
    while (true) {
        const std::size_t dot = dotted.find('.', pos);
        segs.push_back(dotted.substr(pos, dot - pos));
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
        if (!cur->is_object() || !cur->contains(segs[i]))
            throw ConfigError("sweep: unknown parameter path '" + dotted + "'");
        cur = &(*cur)[segs[i]];
    }
    if (!cur->is_object() || !cur->contains(segs.back()))
        throw ConfigError("sweep: unknown parameter path '" + dotted + "'");
    json& leaf = (*cur)[segs.back()];
    if (leaf.is_number_integer() && v == std::floor(v))
        leaf = std::int64_t(v);
    else if (leaf.is_string())
        leaf = io::format_double(v);  // e.g. integrate.jump numeric phases
    else if (leaf.is_number() || leaf.is_null())
        leaf = v;
    else
        throw ConfigError("sweep: parameter '" + dotted +
                          "' is not a numeric field");
}

}  // namespace detail_sweep

inline json run_sweep(Context& ctx) {
    const RunConfig& cfg = ctx.cfg();
    if (cfg.sweep.parameters.empty())
        throw ConfigError("sweep: needs at least one parameter grid");

    // refuse to write over a different sweep (or foreign files) unless forced
    const fs::path marker = ctx.dir() / "manifest.json";
    if (fs::exists(marker)) {
        json prior;
        try {
            std::ifstream is(marker);
            prior = json::parse(is);
        } catch (...) {
            throw ConfigError("sweep: unreadable manifest in '" +
                              ctx.dir().string() + "'");
        }
        if (prior.value("config_hash", "") != ctx.config_hash() && !ctx.force())
            throw ConfigError(
                "sweep: output directory '" + ctx.dir().string() +
                "' holds a different run; pass --force to overwrite");
    } else if (fs::exists(ctx.dir()) && !fs::is_empty(ctx.dir()) &&
               !ctx.force()) {
        throw ConfigError("sweep: output directory '" + ctx.dir().string() +
                          "' is not empty; pass --force to overwrite");
    }

    // cross product, row-major in parameter order
    const auto& params = cfg.sweep.parameters;
    std::vector<std::size_t> shape;
    std::size_t total = 1;
    for (const auto& p : params) {
        shape.push_back(p.values.size());
        total *= p.values.size();
    }

    std::vector<json> summaries(total);
    std::vector<std::vector<double>> point_values(total);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::vector<double> values(params.size());
        std::size_t rem = idx;
        for (std::size_t p = params.size(); p-- > 0;) {
            values[p] = params[p].values[rem % shape[p]];
            rem /= shape[p];
        }
        point_values[idx] = values;

        char label[32];
        std::snprintf(label, sizeof label, "point_%04zu", idx);
        const fs::path pdir = ctx.dir() / label;

        json sub_json = cfg.resolved();
        sub_json["scenario"] = cfg.sweep.scenario;
        for (std::size_t p = 0; p < params.size(); ++p)
            detail_sweep::apply_override(sub_json, params[p].path, values[p]);
        sub_json["ensemble"]["seed"] =
            cfg.ensemble.seed + std::uint64_t(idx);  // deterministic sub-seed
        const RunConfig sub = RunConfig::from_json(sub_json);

        // resume: a completed point with the same resolved config is reused
        const fs::path pman = pdir / "manifest.json";
        const fs::path psum = pdir / "summary.json";
        if (fs::exists(pman) && fs::exists(psum)) {
            json prior;
            std::ifstream is(pman);
            try {
                prior = json::parse(is);
            } catch (...) {
                prior = json::object();
            }
            if (prior.value("config_hash", "") == sub.hash()) {
                std::ifstream ss(psum);
                summaries[idx] = json::parse(ss);
                continue;
            }
        }
        Context sub_ctx(sub, pdir, ctx.force());
        summaries[idx] = run_in(sub_ctx);
        sub_ctx.json_out("summary", summaries[idx]);
        sub_ctx.finalize();
    }

    // merged table: parameter columns then the union of summary keys
    std::set<std::string> keys;
    for (const auto& s : summaries)
        for (const auto& [k, v] : s.items())
            if (v.is_number()) keys.insert(k);
    std::vector<io::Column> cols;
    for (const auto& p : params) cols.push_back({p.path, "config units"});
    for (const auto& k : keys) cols.push_back({k, "see scenario"});
    io::Table t(cols);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::vector<double> row = point_values[idx];
        for (const auto& k : keys)
            row.push_back(summaries[idx].contains(k) &&
                                  summaries[idx][k].is_number()
                              ? summaries[idx][k].get<double>()
                              : std::numeric_limits<double>::quiet_NaN());
        t.add_row(row);
    }
    ctx.table("summary_table", t);
    if (t.rows() >= 2 && !keys.empty())
        ctx.plot("summary_table", t, 0, {params.size()},
                 "sweep: first summary column");

    json summary;
    summary["n_points"] = double(total);
    summary["scenario"] = cfg.sweep.scenario;
    return summary;
}

// ---------------------------------------------------------------------------

inline json run_in(Context& ctx) {
    const std::string& s = ctx.cfg().scenario;
    if (s == "integrate") return run_integrate(ctx);
    if (s == "find-jump") return run_find_jump(ctx);
    if (s == "trajectories") return run_trajectories(ctx);
    if (s == "selection") return run_selection(ctx);
    if (s == "hv-test") return run_hv_test(ctx);
    if (s == "fig3") return run_fig3(ctx);
    if (s == "fig1") return run_fig1(ctx);
    if (s == "sweep") return run_sweep(ctx);
    throw ConfigError("run: unknown scenario '" + s + "'");
}

struct RunResult {
    int exit_code = 0;
    json summary;
};

inline RunResult run_scenario(const RunConfig& cfg, const fs::path& dir,
                              bool force = false) {
    Context ctx(cfg, dir, force);
    RunResult r;
    r.summary = run_in(ctx);
    if (cfg.scenario == "hv-test" && cfg.hv.expect != "none" &&
        r.summary.value("expect_ok", 1.0) == 0.0)
        r.exit_code = 4;
    ctx.json_out("summary", r.summary);
    ctx.finalize();
    return r;
}

}  // namespace phasejump::scenario
