#pragma once

// Run configuration: strict JSON parsing (unknown keys rejected, line/column
// diagnostics), defaults resolution, and manifest emission so that any run can
// be reproduced bitwise from its manifest alone.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "phasejump/errors.hpp"
#include "phasejump/io.hpp"
#include "phasejump/version.hpp"

namespace phasejump::config {

using nlohmann::json;

namespace detail {

// strict accessor for one JSON object; unknown keys raise with a dotted path
class Block {
  public:
    Block(const json* j, std::string path) : j_(j), path_(std::move(path)) {
        if (j_ && !j_->is_object())
            throw ConfigError("config: block '" + path_ +
                              "' must be an object");
    }

    bool has(const char* key) const { return j_ && j_->contains(key); }

    double number(const char* key, double def) {
        const json* v = fetch(key);
        if (!v || v->is_null()) return def;  // null = keep the default
        if (!v->is_number())
            throw ConfigError("config: key '" + dotted(key) +
                              "' must be a number");
        return v->get<double>();
    }

    std::int64_t integer(const char* key, std::int64_t def) {
        const json* v = fetch(key);
        if (!v) return def;
        if (!v->is_number_integer())
            throw ConfigError("config: key '" + dotted(key) +
                              "' must be an integer");
        return v->get<std::int64_t>();
    }

    bool boolean(const char* key, bool def) {
        const json* v = fetch(key);
        if (!v) return def;
        if (!v->is_boolean())
            throw ConfigError("config: key '" + dotted(key) +
                              "' must be a boolean");
        return v->get<bool>();
    }

    std::string str(const char* key, std::string def) {
        const json* v = fetch(key);
        if (!v) return def;
        if (!v->is_string())
            throw ConfigError("config: key '" + dotted(key) +
                              "' must be a string");
        return v->get<std::string>();
    }

    std::vector<double> numbers(const char* key, std::vector<double> def) {
        const json* v = fetch(key);
        if (!v) return def;
        if (!v->is_array())
            throw ConfigError("config: key '" + dotted(key) +
                              "' must be an array of numbers");
        std::vector<double> out;
        for (const auto& e : *v) {
            if (!e.is_number())
                throw ConfigError("config: key '" + dotted(key) +
                                  "' must be an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<std::string> strings(const char* key,
                                     std::vector<std::string> def) {
        const json* v = fetch(key);
        if (!v) return def;
        if (!v->is_array())
            throw ConfigError("config: key '" + dotted(key) +
                              "' must be an array of strings");
        std::vector<std::string> out;
        for (const auto& e : *v) {
            if (!e.is_string())
                throw ConfigError("config: key '" + dotted(key) +
                                  "' must be an array of strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    const json* child(const char* key) { return fetch(key); }

    // call after all known keys were fetched
    void finish() const {
        if (!j_) return;
        for (auto it = j_->begin(); it != j_->end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError("config: unknown key '" + dotted(it.key()) +
                                  "'");
    }

    std::string dotted(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

  private:
    const json* fetch(const char* key) {
        seen_.insert(key);
        if (!j_ || !j_->contains(key)) return nullptr;
        return &(*j_)[key];
    }

    const json* j_;
    std::string path_;
    mutable std::set<std::string> seen_;
};

}  // namespace detail

struct WaveformConfig {
    double two_pi_nu_off = 100.0;  // detuning offset (angular, units of Γ2)
    double two_pi_nu_mod = 10.0;   // modulation frequency (angular)
    double omega_r = 2.0;          // Rabi frequency (angular)
    double gamma2 = 1.0;           // decay rate of the excited state
};

struct PulseConfig {
    std::int64_t grid_points = 512;  // jump-phase search grid
    double search_tol = 1e-8;        // phase bracketing tolerance (rad)
    double tol = 1e-10;              // integrator tolerance
    bool stark_locked = true;        // apply the modulation-frequency correction
    double confidence = 0.99;        // measurement-budget confidence level
    // NaN (JSON null) = optimize; a number pins the jump phase instead
    double jump_phase = std::numeric_limits<double>::quiet_NaN();
};

struct ModelConfig {
    std::string kind = "born";  // born | phase-dependent
    double epsilon = 0.0;
    std::string g = "cos";  // cos | square
    double g_phi0 = 0.0;
    double alpha2 = 0.5;  // initial |0⟩ weight
    double phi0 = 0.0;    // initial relative phase
    double nu10 = 0.0;    // two-state splitting (cycles per unit time)
};

struct TrajectoriesConfig {
    std::string mode = "pulsed";  // abstract | continuous | pulsed
    double tau_m = 1.0;           // abstract-mode mean waiting time
    double t_max = 64.0;          // abstract/continuous horizon
    std::int64_t n_cycles = 8192;  // pulsed horizon (modulation cycles)
    std::string phase_reference = "c1";  // c1 | fold-c2
};

struct SelectionConfig {
    double q_dark = 0.5;
    double gamma2 = 1.0;
    double nu10 = 0.0;
    double tau_m = 1.0;
};

struct HvConfig {
    std::string expect = "none";  // none | null | signal
    std::int64_t n_bins = 16;
};

struct SweepParameter {
    std::string path;  // dotted key, e.g. waveform.omega_r
    std::vector<double> values;
};

struct SweepConfig {
    std::string scenario = "find-jump";  // inner scenario for each grid point
    std::vector<SweepParameter> parameters;
};

struct IntegrateConfig {
    std::int64_t n_cycles = 2;
    std::int64_t n_samples = 1200;
    std::string jump = "auto";  // auto | none | numeric literal
    double tol = 1e-10;
};

struct EnsembleConfig {
    std::int64_t n_trajectories = 1000;
    std::uint64_t seed = 1;
    std::int64_t threads = 0;  // 0 = hardware concurrency
};

struct OutputConfig {
    std::string directory;  // empty → env default or ./out
    std::vector<std::string> formats = {"csv", "jsonl", "svg"};
};

struct RunConfig {
    std::string scenario = "fig3";
    WaveformConfig waveform;
    PulseConfig pulse;
    ModelConfig model;
    TrajectoriesConfig trajectories;
    SelectionConfig selection;
    HvConfig hv;
    SweepConfig sweep;
    IntegrateConfig integrate;
    EnsembleConfig ensemble;
    OutputConfig output;

    static const std::set<std::string>& scenarios() {
        static const std::set<std::string> s = {
            "integrate", "find-jump", "trajectories", "selection",
            "hv-test",   "sweep",     "fig3",         "fig1"};
        return s;
    }

    static RunConfig from_json(const json& root);
    static RunConfig from_file(const std::filesystem::path& path);

    json resolved() const;  // every field, defaults filled
    std::string hash() const { return io::hex64(io::fnv1a64(resolved().dump())); }
    void validate() const;
};

inline RunConfig RunConfig::from_json(const json& root) {
    if (!root.is_object())
        throw ConfigError("config: top level must be an object");
    // a manifest embeds the resolved config under "config"; accept it directly
    if (root.contains("config") && root.contains("artifact"))
        return from_json(root.at("config"));

    RunConfig c;
    detail::Block top(&root, "");

    c.scenario = top.str("scenario", c.scenario);
    if (!scenarios().count(c.scenario))
        throw ConfigError("config: unknown scenario '" + c.scenario + "'");

    {
        detail::Block b(top.child("waveform"), "waveform");
        c.waveform.two_pi_nu_off = b.number("two_pi_nu_off", c.waveform.two_pi_nu_off);
        c.waveform.two_pi_nu_mod = b.number("two_pi_nu_mod", c.waveform.two_pi_nu_mod);
        c.waveform.omega_r = b.number("omega_r", c.waveform.omega_r);
        c.waveform.gamma2 = b.number("gamma2", c.waveform.gamma2);
        b.finish();
    }
    {
        detail::Block b(top.child("pulse"), "pulse");
        c.pulse.grid_points = b.integer("grid_points", c.pulse.grid_points);
        c.pulse.search_tol = b.number("search_tol", c.pulse.search_tol);
        c.pulse.tol = b.number("tol", c.pulse.tol);
        c.pulse.stark_locked = b.boolean("stark_locked", c.pulse.stark_locked);
        c.pulse.confidence = b.number("confidence", c.pulse.confidence);
        c.pulse.jump_phase = b.number("jump_phase", c.pulse.jump_phase);
        b.finish();
    }
    {
        detail::Block b(top.child("model"), "model");
        c.model.kind = b.str("kind", c.model.kind);
        c.model.epsilon = b.number("epsilon", c.model.epsilon);
        c.model.g = b.str("g", c.model.g);
        c.model.g_phi0 = b.number("g_phi0", c.model.g_phi0);
        c.model.alpha2 = b.number("alpha2", c.model.alpha2);
        c.model.phi0 = b.number("phi0", c.model.phi0);
        c.model.nu10 = b.number("nu10", c.model.nu10);
        b.finish();
    }
    {
        detail::Block b(top.child("trajectories"), "trajectories");
        c.trajectories.mode = b.str("mode", c.trajectories.mode);
        c.trajectories.tau_m = b.number("tau_m", c.trajectories.tau_m);
        c.trajectories.t_max = b.number("t_max", c.trajectories.t_max);
        c.trajectories.n_cycles = b.integer("n_cycles", c.trajectories.n_cycles);
        c.trajectories.phase_reference =
            b.str("phase_reference", c.trajectories.phase_reference);
        b.finish();
    }
    {
        detail::Block b(top.child("selection"), "selection");
        c.selection.q_dark = b.number("q_dark", c.selection.q_dark);
        c.selection.gamma2 = b.number("gamma2", c.selection.gamma2);
        c.selection.nu10 = b.number("nu10", c.selection.nu10);
        c.selection.tau_m = b.number("tau_m", c.selection.tau_m);
        b.finish();
    }
    {
        detail::Block b(top.child("hv"), "hv");
        c.hv.expect = b.str("expect", c.hv.expect);
        c.hv.n_bins = b.integer("n_bins", c.hv.n_bins);
        b.finish();
    }
    {
        detail::Block b(top.child("sweep"), "sweep");
        c.sweep.scenario = b.str("scenario", c.sweep.scenario);
        if (const json* params = b.child("parameters")) {
            if (!params->is_array())
                throw ConfigError(
                    "config: key 'sweep.parameters' must be an array");
            int idx = 0;
            for (const auto& p : *params) {
                detail::Block pb(&p, "sweep.parameters[" +
                                         std::to_string(idx++) + "]");
                SweepParameter sp;
                sp.path = pb.str("path", "");
                sp.values = pb.numbers("values", {});
                pb.finish();
                if (sp.path.empty())
                    throw ConfigError(
                        "config: sweep parameter needs a 'path'");
                if (sp.values.empty())
                    throw ConfigError("config: sweep parameter '" + sp.path +
                                      "' needs explicit 'values'");
                c.sweep.parameters.push_back(std::move(sp));
            }
        }
        b.finish();
    }
    {
        detail::Block b(top.child("integrate"), "integrate");
        c.integrate.n_cycles = b.integer("n_cycles", c.integrate.n_cycles);
        c.integrate.n_samples = b.integer("n_samples", c.integrate.n_samples);
        c.integrate.jump = b.str("jump", c.integrate.jump);
        c.integrate.tol = b.number("tol", c.integrate.tol);
        b.finish();
    }
    {
        detail::Block b(top.child("ensemble"), "ensemble");
        c.ensemble.n_trajectories =
            b.integer("n_trajectories", c.ensemble.n_trajectories);
        c.ensemble.seed = std::uint64_t(b.integer("seed", std::int64_t(c.ensemble.seed)));
        c.ensemble.threads = b.integer("threads", c.ensemble.threads);
        b.finish();
    }
    {
        detail::Block b(top.child("output"), "output");
        c.output.directory = b.str("directory", c.output.directory);
        c.output.formats = b.strings("formats", c.output.formats);
        b.finish();
    }
    top.finish();
    c.validate();
    return c;
}

inline RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw ConfigError("config: cannot open '" + path.string() + "'");
    json root;
    try {
        root = json::parse(is);  // nlohmann reports line/column on failure
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: parse: ") + e.what());
    }
    return from_json(root);
}

inline void RunConfig::validate() const {
    const auto bad = [](const std::string& what) {
        throw ConfigError("config: validate: " + what);
    };
    if (waveform.gamma2 < 0) bad("waveform.gamma2 must be >= 0");
    if (waveform.two_pi_nu_mod <= 0) bad("waveform.two_pi_nu_mod must be > 0");
    if (waveform.omega_r < 0) bad("waveform.omega_r must be >= 0");
    if (pulse.grid_points < 8) bad("pulse.grid_points must be >= 8");
    if (!(pulse.search_tol > 0 && pulse.search_tol < 1))
        bad("pulse.search_tol must be in (0,1)");
    if (!(pulse.tol > 0)) bad("pulse.tol must be > 0");
    if (!(pulse.confidence > 0 && pulse.confidence < 1))
        bad("pulse.confidence must be in (0,1)");
    if (model.kind != "born" && model.kind != "phase-dependent")
        bad("model.kind must be born | phase-dependent");
    if (model.g != "cos" && model.g != "square")
        bad("model.g must be cos | square");
    if (model.epsilon < 0 || model.epsilon > 0.5)
        bad("model.epsilon must be in [0, 0.5]");
    if (model.alpha2 < 0 || model.alpha2 > 1)
        bad("model.alpha2 must be in [0, 1]");
    if (trajectories.mode != "abstract" && trajectories.mode != "continuous" &&
        trajectories.mode != "pulsed")
        bad("trajectories.mode must be abstract | continuous | pulsed");
    if (!(trajectories.tau_m > 0)) bad("trajectories.tau_m must be > 0");
    if (!(trajectories.t_max > 0)) bad("trajectories.t_max must be > 0");
    if (trajectories.n_cycles < 1) bad("trajectories.n_cycles must be >= 1");
    if (trajectories.phase_reference != "c1" &&
        trajectories.phase_reference != "fold-c2")
        bad("trajectories.phase_reference must be c1 | fold-c2");
    if (!(selection.q_dark > 0 && selection.q_dark <= 1))
        bad("selection.q_dark must be in (0, 1]");
    if (!(selection.gamma2 > 0)) bad("selection.gamma2 must be > 0");
    if (selection.nu10 < 0) bad("selection.nu10 must be >= 0");
    if (!(selection.tau_m > 0)) bad("selection.tau_m must be > 0");
    if (hv.expect != "none" && hv.expect != "null" && hv.expect != "signal")
        bad("hv.expect must be none | null | signal");
    if (hv.n_bins < 2) bad("hv.n_bins must be >= 2");
    if (sweep.parameters.size() > 2)
        bad("sweep supports at most two parameters");
    if (!RunConfig::scenarios().count(sweep.scenario) ||
        sweep.scenario == "sweep")
        bad("sweep.scenario must be a non-sweep scenario");
    if (integrate.n_cycles < 1) bad("integrate.n_cycles must be >= 1");
    if (integrate.n_samples < 2) bad("integrate.n_samples must be >= 2");
    if (integrate.jump != "auto" && integrate.jump != "none") {
        try {
            std::stod(integrate.jump);
        } catch (...) {
            bad("integrate.jump must be auto | none | a numeric phase");
        }
    }
    if (!(integrate.tol > 0)) bad("integrate.tol must be > 0");
    if (ensemble.n_trajectories < 1) bad("ensemble.n_trajectories must be >= 1");
    if (ensemble.threads < 0) bad("ensemble.threads must be >= 0");
    for (const auto& f : output.formats)
        if (f != "csv" && f != "jsonl" && f != "svg")
            bad("output.formats entries must be csv | jsonl | svg");
}

inline json RunConfig::resolved() const {
    json j;
    j["scenario"] = scenario;
    j["waveform"] = {{"two_pi_nu_off", waveform.two_pi_nu_off},
                     {"two_pi_nu_mod", waveform.two_pi_nu_mod},
                     {"omega_r", waveform.omega_r},
                     {"gamma2", waveform.gamma2}};
    j["pulse"] = {{"grid_points", pulse.grid_points},
                  {"search_tol", pulse.search_tol},
                  {"tol", pulse.tol},
                  {"stark_locked", pulse.stark_locked},
                  {"confidence", pulse.confidence},
                  {"jump_phase", std::isnan(pulse.jump_phase)
                                     ? json(nullptr)
                                     : json(pulse.jump_phase)}};
    j["model"] = {{"kind", model.kind},     {"epsilon", model.epsilon},
                  {"g", model.g},           {"g_phi0", model.g_phi0},
                  {"alpha2", model.alpha2}, {"phi0", model.phi0},
                  {"nu10", model.nu10}};
    j["trajectories"] = {{"mode", trajectories.mode},
                         {"tau_m", trajectories.tau_m},
                         {"t_max", trajectories.t_max},
                         {"n_cycles", trajectories.n_cycles},
                         {"phase_reference", trajectories.phase_reference}};
    j["selection"] = {{"q_dark", selection.q_dark},
                      {"gamma2", selection.gamma2},
                      {"nu10", selection.nu10},
                      {"tau_m", selection.tau_m}};
    j["hv"] = {{"expect", hv.expect}, {"n_bins", hv.n_bins}};
    j["sweep"] = {{"scenario", sweep.scenario},
                  {"parameters", json::array()}};
    for (const auto& p : sweep.parameters)
        j["sweep"]["parameters"].push_back(
            {{"path", p.path}, {"values", p.values}});
    j["integrate"] = {{"n_cycles", integrate.n_cycles},
                      {"n_samples", integrate.n_samples},
                      {"jump", integrate.jump},
                      {"tol", integrate.tol}};
    j["ensemble"] = {{"n_trajectories", ensemble.n_trajectories},
                     {"seed", ensemble.seed},
                     {"threads", ensemble.threads}};
    j["output"] = {{"directory", output.directory},
                   {"formats", output.formats}};
    return j;
}

// manifest carries the fully-resolved config; no timestamps, so a rerun from
// the manifest reproduces every byte
struct Manifest {
    json config;
    std::vector<std::pair<std::string, std::string>> outputs;  // file, hash

    std::string dump() const {
        json j;
        j["artifact"] = "phasejump";
        j["version"] = kVersion;
        j["config"] = config;
        j["config_hash"] = io::hex64(io::fnv1a64(config.dump()));
        j["outputs"] = json::object();
        for (const auto& [file, hash] : outputs) j["outputs"][file] = hash;
        return j.dump(2) + "\n";
    }
};

inline std::filesystem::path default_output_dir() {
    if (const char* env = std::getenv("PHASEJUMP_OUT"); env && *env)
        return env;
    return "out";
}

inline std::filesystem::path resolve_output_dir(const RunConfig& cfg) {
    if (!cfg.output.directory.empty()) return cfg.output.directory;
    return default_output_dir();
}

}  // namespace phasejump::config
