#pragma once

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "shuttlechain/config.hpp"
#include "shuttlechain/dynamics.hpp"
#include "shuttlechain/io.hpp"

namespace shuttlechain {

struct ExperimentResult {
    int exit_code = 0;     // 0 ok, 3 numerical failure, 4 partial sweep
    std::string status;    // "ok", "partial" or "error"
    std::string message;   // one-line outcome for the terminal
};

inline unsigned resolve_threads(const RunConfig& cfg) {
    if (cfg.threads > 0) return static_cast<unsigned>(cfg.threads);
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

namespace detail {

inline void csv_row(std::ostringstream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_escape(cells[i]);
    out << "\n";
}

}  // namespace detail

// ------------------------------------------------------------------
// spectrum: open-chain normal modes across one full phi period

inline ExperimentResult run_spectrum(const RunConfig& cfg, RunRecorder& rec) {
    const unsigned threads = resolve_threads(cfg);
    const auto sweep =
        spectrum_sweep(cfg.chain, 0.0, 2.0 * std::numbers::pi_v<double>, cfg.spectrum_n_phi, threads);

    std::ostringstream csv;
    csv << "phi,mode,Omega,weight_left,weight_right,participation\n";
    for (std::size_t i = 0; i < sweep.phi.size(); ++i)
        for (std::size_t m = 0; m < sweep.Omega[i].size(); ++m)
            detail::csv_row(csv, {format_g17(sweep.phi[i]), std::to_string(m + 1),
                                  format_g17(sweep.Omega[i][m]), format_g17(sweep.loc[i][m].left),
                                  format_g17(sweep.loc[i][m].right),
                                  format_g17(sweep.loc[i][m].participation)});
    rec.add("spectrum.csv", csv.str());

    ordered_json summary;
    summary["n_phi"] = cfg.spectrum_n_phi;
    summary["N"] = cfg.chain.N;
    summary["phi_min"] = 0.0;
    summary["phi_max"] = 2.0 * std::numbers::pi_v<double>;
    rec.add("spectrum_summary.json", summary.dump(2) + "\n");
    return {0, "ok", "spectrum: " + std::to_string(sweep.phi.size()) + " phi points"};
}

// ------------------------------------------------------------------
// chern: lattice field strength and band Chern numbers

inline ExperimentResult run_chern(const RunConfig& cfg, RunRecorder& rec) {
    const unsigned threads = resolve_threads(cfg);
    const auto res = chern_numbers(cfg.chain, cfg.chern_n_k, cfg.chern_n_phi, threads);

    ordered_json j;
    j["chern"] = res.chern;
    j["berry_flux_over_2pi"] = res.raw;
    j["rounding_residual"] = res.residual;
    j["n_k"] = res.n_k;
    j["n_phi"] = res.n_phi;
    rec.add("chern.json", j.dump(2) + "\n");

    std::ostringstream csv;
    csv << "band,ik,iphi,k,phi,field_strength\n";
    const double two_pi = 2.0 * std::numbers::pi_v<double>;
    for (int band = 0; band < 3; ++band)
        for (int ik = 0; ik < res.n_k; ++ik)
            for (int ip = 0; ip < res.n_phi; ++ip)
                detail::csv_row(csv, {std::to_string(band + 1), std::to_string(ik),
                                      std::to_string(ip), format_g17(two_pi * ik / res.n_k),
                                      format_g17(two_pi * ip / res.n_phi),
                                      format_g17(res.field_strength[band](ik, ip))});
    rec.add("berry_curvature.csv", csv.str());

    std::ostringstream msg;
    msg << "chern: (" << res.chern[0] << ", " << res.chern[1] << ", " << res.chern[2] << ")";
    return {0, "ok", msg.str()};
}

// ------------------------------------------------------------------
// simulate: one trajectory plus its synchronization report

inline ExperimentResult run_simulate(const RunConfig& cfg, RunRecorder& rec) {
    const auto kind = initial_kind_from_string(cfg.initial_kind);
    const auto initial = make_initial(cfg.chain, kind, cfg.master_seed);
    const double dt = cfg.dt_out > 0.0 ? cfg.dt_out : default_dt_out(cfg.chain);
    const auto traj =
        integrate_chain(cfg.chain, initial, cfg.t_end, cfg.tol, dt, cfg.transient_fraction);

    ClassifyOptions opt;
    opt.quiescence_threshold = cfg.quiescence_threshold;
    opt.bulk_leak_ratio = cfg.bulk_leak_ratio;
    opt.reference_site = cfg.reference_shuttle;
    opt.hann = cfg.window_fn == "hann";
    const auto rep = classify(cfg.chain, traj, opt);

    const int N = traj.N;
    std::ostringstream csv;
    csv << "t";
    for (int l = 1; l <= N; ++l) csv << ",x_" << l;
    for (int l = 1; l <= N; ++l) csv << ",p_" << l;
    for (int l = 1; l <= N; ++l) csv << ",q_" << l;
    csv << "\n";
    for (std::size_t row = 0; row < traj.samples(); ++row) {
        csv << format_g17(traj.t[row]);
        for (int c = 0; c < 3 * N; ++c) csv << "," << format_g17(traj.value(row, c));
        csv << "\n";
    }
    rec.add("trajectory.csv", csv.str());

    ordered_json j;
    j["class"] = to_string(rep.cls);
    j["initial_kind"] = cfg.initial_kind;
    j["master_seed"] = cfg.master_seed;
    j["t_end"] = cfg.t_end;
    j["tol"] = cfg.tol;
    j["dt_out"] = dt;
    j["transient_cut_index"] = traj.transient_cut;
    j["transient_cut_time"] = traj.t[traj.transient_cut];
    j["window_time"] = rep.stats.window_time;
    j["window_samples"] = rep.stats.n_samples;
    j["frequency_resolution"] = rep.stats.frequency_resolution;
    j["reference_shuttle"] = rep.stats.reference_site;
    j["left_frequency"] = rep.freq_left;
    j["right_frequency"] = rep.freq_right;
    j["edge_phase_difference"] = rep.edge_phase_difference;
    j["phase_lock_drift"] = rep.phase_lock_drift;
    j["max_edge_amplitude"] = rep.max_edge_amplitude;
    j["max_bulk_amplitude"] = rep.max_bulk_amplitude;
    j["loudest_bulk_site"] = rep.loudest_bulk_site;
    j["bulk_ambiguous"] = rep.bulk_ambiguous;
    j["decay"] = ordered_json{{"valid", rep.decay.valid},
                              {"factor_per_cell", rep.decay.factor_per_cell},
                              {"n_cells", rep.decay.n_cells}};
    if (kind == InitialKind::symmetric) j["symmetry_violation"] = symmetry_violation(traj);
    j["q_clamp_events"] = traj.clamp_count;
    j["integrator"] = ordered_json{{"n_steps", traj.stats.n_steps},
                                   {"n_accepted", traj.stats.n_accepted},
                                   {"n_rejected", traj.stats.n_rejected},
                                   {"n_feval", traj.stats.n_feval}};
    ordered_json sites = ordered_json::array();
    for (int l = 0; l < N; ++l) {
        const auto& s = rep.stats.site[l];
        sites.push_back(ordered_json{{"site", l + 1},
                                     {"mean_x", s.mean_x},
                                     {"mean_q", s.mean_q},
                                     {"amplitude_x", s.amplitude_x},
                                     {"amplitude_q", s.amplitude_q},
                                     {"frequency", s.frequency},
                                     {"phase", s.phase}});
    }
    j["per_shuttle"] = sites;
    rec.add("sync_report.json", j.dump(2) + "\n");
    return {0, "ok", "simulate: " + to_string(rep.cls)};
}

// ------------------------------------------------------------------
// stability: phi sweep with boundaries plus the single-shuttle inset

inline ExperimentResult run_stability(const RunConfig& cfg, RunRecorder& rec) {
    const unsigned threads = resolve_threads(cfg);
    const double pi = std::numbers::pi_v<double>;
    const auto sweep = phi_sweep(cfg.chain, cfg.phi_min_over_pi * pi, cfg.phi_max_over_pi * pi,
                                 cfg.n_phi, cfg.edge_tag_threshold, threads);
    const auto inset = single_shuttle_sweep(cfg.chain.shuttle, cfg.omega_min, cfg.omega_max,
                                            cfg.n_omega, threads);

    std::ostringstream pts;
    pts << "phi,phi_over_pi,ok,max_real,n_unstable,max_real_left,max_real_right,error\n";
    for (const auto& p : sweep.points)
        detail::csv_row(
            pts, {format_g17(p.phi), format_g17(p.phi / pi), p.ok ? "1" : "0",
                  p.ok ? format_g17(p.max_real) : "", std::to_string(p.n_unstable),
                  p.has_left ? format_g17(p.max_real_left) : "",
                  p.has_right ? format_g17(p.max_real_right) : "", p.error});
    rec.add("phi_sweep.csv", pts.str());

    std::ostringstream modes;
    modes << "phi,re,im,weight_left,weight_right,tag\n";
    for (const auto& p : sweep.points)
        for (const auto& m : p.modes)
            detail::csv_row(modes,
                            {format_g17(p.phi), format_g17(m.value.real()),
                             format_g17(m.value.imag()), format_g17(m.weight_left),
                             format_g17(m.weight_right), m.tag});
    rec.add("phi_modes.csv", modes.str());

    std::ostringstream bnd;
    bnd << "phi,phi_over_pi,channel,turning_on\n";
    for (const auto& b : sweep.boundaries)
        detail::csv_row(bnd, {format_g17(b.phi), format_g17(b.phi / pi), b.channel,
                              b.turning_on ? "1" : "0"});
    rec.add("boundaries.csv", bnd.str());

    std::ostringstream ins;
    ins << "omega,max_real\n";
    for (const auto& p : inset.points)
        detail::csv_row(ins, {format_g17(p.omega), format_g17(p.max_real)});
    rec.add("single_shuttle.csv", ins.str());

    ordered_json j;
    ordered_json bl = ordered_json::array();
    for (const auto& b : sweep.boundaries)
        bl.push_back(ordered_json{
            {"phi", b.phi}, {"phi_over_pi", b.phi / pi}, {"channel", b.channel},
            {"turning_on", b.turning_on}});
    j["boundaries"] = bl;
    j["partial"] = sweep.partial;
    j["single_shuttle"] =
        ordered_json{{"window_found", inset.window_found},
                     {"window_lo", inset.window_lo},
                     {"window_hi", inset.window_hi},
                     {"argmax_omega", inset.argmax_omega},
                     {"max_real_at_argmax", inset.max_real_at_argmax}};
    rec.add("stability_summary.json", j.dump(2) + "\n");

    if (sweep.partial)
        return {4, "partial", "stability: some sweep points failed (see phi_sweep.csv)"};
    return {0, "ok",
            "stability: " + std::to_string(sweep.boundaries.size()) + " sign-change boundaries"};
}

// ------------------------------------------------------------------
// disorder: ensembles over r with per-realization spectra

inline ExperimentResult run_disorder(const RunConfig& cfg, RunRecorder& rec) {
    const unsigned threads = resolve_threads(cfg);
    const auto res =
        disorder_sweep(cfg.chain, cfg.r_values, cfg.realizations, cfg.master_seed, cfg.correlated,
                       cfg.two_point, cfg.edge_tag_threshold, threads);

    std::ostringstream rl;
    rl << "r,realization,ok,left_re,left_im,right_re,right_im,mixed_re,mixed_im,"
          "n_unstable_bulk,max_real_bulk,error\n";
    for (const auto& re : res.realizations)
        detail::csv_row(
            rl, {format_g17(re.r), std::to_string(re.index), re.ok ? "1" : "0",
                 re.has_left ? format_g17(re.left_re) : "", re.has_left ? format_g17(re.left_im) : "",
                 re.has_right ? format_g17(re.right_re) : "",
                 re.has_right ? format_g17(re.right_im) : "",
                 re.has_mixed ? format_g17(re.mixed_re) : "",
                 re.has_mixed ? format_g17(re.mixed_im) : "", std::to_string(re.n_unstable_bulk),
                 std::isfinite(re.max_real_bulk) ? format_g17(re.max_real_bulk) : "", re.error});
    rec.add("realizations.csv", rl.str());

    std::ostringstream dg;
    dg << "r,realization,bond,delta_g\n";
    const auto bonds = detail::inter_cell_bonds(cfg.chain.N);
    for (const auto& re : res.realizations)
        for (std::size_t i = 0; i < re.delta_g.size(); ++i)
            detail::csv_row(dg, {format_g17(re.r), std::to_string(re.index),
                                 std::to_string(bonds[i]), format_g17(re.delta_g[i])});
    rec.add("delta_g.csv", dg.str());

    std::ostringstream modes;
    modes << "r,realization,re,im,weight_left,weight_right,tag\n";
    for (const auto& re : res.realizations)
        for (const auto& m : re.modes)
            detail::csv_row(modes,
                            {format_g17(re.r), std::to_string(re.index), format_g17(m.value.real()),
                             format_g17(m.value.imag()), format_g17(m.weight_left),
                             format_g17(m.weight_right), m.tag});
    rec.add("disorder_modes.csv", modes.str());

    std::ostringstream sp;
    sp << "r,realization,mode,Omega\n";
    for (const auto& re : res.realizations)
        for (std::size_t m = 0; m < re.mode_frequencies.size(); ++m)
            detail::csv_row(sp, {format_g17(re.r), std::to_string(re.index), std::to_string(m + 1),
                                 format_g17(re.mode_frequencies[m])});
    rec.add("disorder_spectra.csv", sp.str());

    ordered_json j;
    j["clean_edge_im"] = res.clean_im;
    j["clean_edge_re"] = res.clean_re;
    j["master_seed"] = cfg.master_seed;
    j["correlated"] = cfg.correlated;
    j["two_point"] = cfg.two_point;
    ordered_json sums = ordered_json::array();
    for (const auto& s : res.summaries)
        sums.push_back(ordered_json{{"r", s.r},
                                    {"n_ok", s.n_ok},
                                    {"n_failed", s.n_failed},
                                    {"mean_edge_im", s.mean_edge_im},
                                    {"std_edge_im", s.std_edge_im},
                                    {"max_dev_from_clean", s.max_dev_from_clean},
                                    {"n_with_bulk_unstable", s.n_with_bulk_unstable},
                                    {"max_lr_split", s.max_lr_split}});
    j["summaries"] = sums;
    rec.add("disorder_summary.json", j.dump(2) + "\n");

    if (res.partial) return {4, "partial", "disorder: some realizations failed"};
    return {0, "ok", "disorder: " + std::to_string(res.realizations.size()) + " realizations"};
}

// ------------------------------------------------------------------
// calibrate: pick the damping that places a chosen feature of the
// single-shuttle instability window at a target value

namespace detail {

struct CalibrationProbe {
    bool window_found = false;
    double value = 0.0;  // the selected feature, when the window exists
    SingleShuttleResult sweep;
};

inline CalibrationProbe calibration_probe(const RunConfig& cfg, double gamma, unsigned threads) {
    ShuttleParams sp = cfg.chain.shuttle;
    sp.gamma = gamma;
    sp.Gamma = gamma;  // the calibration keeps the ratio Gamma/gamma = 1 fixed
    CalibrationProbe probe;
    probe.sweep = single_shuttle_sweep(sp, cfg.omega_min, cfg.omega_max, cfg.n_omega, threads);
    probe.window_found = probe.sweep.window_found;
    if (!probe.window_found) return probe;
    if (cfg.target_feature == "window_lower_edge")
        probe.value = probe.sweep.window_lo;
    else if (cfg.target_feature == "window_upper_edge")
        probe.value = probe.sweep.window_hi;
    else
        probe.value = probe.sweep.argmax_omega;
    return probe;
}

}  // namespace detail

inline ExperimentResult run_calibrate(const RunConfig& cfg, RunRecorder& rec) {
    const unsigned threads = resolve_threads(cfg);

    // The window shrinks as damping grows: its lower edge rises and its
    // upper edge falls monotonically until the window closes, so both edge
    // features bracket cleanly in gamma. For a vanished window the feature
    // is treated as past the target on the high-gamma side.
    auto feature = [&](double gamma, bool& exists) {
        const auto probe = detail::calibration_probe(cfg, gamma, threads);
        exists = probe.window_found;
        return probe;
    };

    bool lo_exists = false, hi_exists = false;
    auto plo = feature(cfg.gamma_lo, lo_exists);
    auto phi_probe = feature(cfg.gamma_hi, hi_exists);

    const bool increasing = cfg.target_feature != "window_upper_edge";
    auto above_target = [&](const detail::CalibrationProbe& p, bool exists) {
        if (!exists) return increasing;  // closed window counts as past the target
        return increasing ? p.value > cfg.target_value : p.value < cfg.target_value;
    };

    ordered_json j;
    j["target_feature"] = cfg.target_feature;
    j["target_value"] = cfg.target_value;
    j["gamma_lo"] = cfg.gamma_lo;
    j["gamma_hi"] = cfg.gamma_hi;

    if (!lo_exists) {
        j["status"] = "no window at gamma_lo";
        rec.add("calibration.json", j.dump(2) + "\n");
        return {3, "error", "calibrate: no instability window at gamma_lo; lower the bracket"};
    }
    if (above_target(plo, lo_exists) == above_target(phi_probe, hi_exists)) {
        j["status"] = "target not bracketed";
        j["value_at_gamma_lo"] = plo.value;
        if (hi_exists) j["value_at_gamma_hi"] = phi_probe.value;
        rec.add("calibration.json", j.dump(2) + "\n");
        return {3, "error", "calibrate: target not bracketed by [gamma_lo, gamma_hi]"};
    }

    double lo = cfg.gamma_lo, hi = cfg.gamma_hi;
    detail::CalibrationProbe best = plo;
    double best_gamma = lo;
    int iters = 0;
    for (; iters < 60 && hi - lo > 1e-6; ++iters) {
        const double mid = 0.5 * (lo + hi);
        bool exists = false;
        const auto pm = feature(mid, exists);
        if (exists) {
            best = pm;
            best_gamma = mid;
        }
        if (above_target(pm, exists))
            hi = mid;
        else
            lo = mid;
    }

    j["gamma"] = best_gamma;
    j["achieved_value"] = best.value;
    j["iterations"] = iters;
    j["window"] = ordered_json{{"found", best.window_found},
                               {"lo", best.sweep.window_lo},
                               {"hi", best.sweep.window_hi},
                               {"argmax_omega", best.sweep.argmax_omega},
                               {"max_real_at_argmax", best.sweep.max_real_at_argmax}};
    j["status"] = "ok";
    rec.add("calibration.json", j.dump(2) + "\n");

    std::ostringstream msg;
    msg << "calibrate: gamma = " << format_g17(best_gamma) << " places " << cfg.target_feature
        << " at " << format_g17(best.value);
    return {0, "ok", msg.str()};
}

// ------------------------------------------------------------------

inline ExperimentResult run_experiment(const std::string& command, const RunConfig& cfg,
                                       RunRecorder& rec) {
    if (command == "spectrum") return run_spectrum(cfg, rec);
    if (command == "chern") return run_chern(cfg, rec);
    if (command == "simulate") return run_simulate(cfg, rec);
    if (command == "stability") return run_stability(cfg, rec);
    if (command == "disorder") return run_disorder(cfg, rec);
    if (command == "calibrate") return run_calibrate(cfg, rec);
    throw invalid_input("unknown experiment '" + command + "'");
}

}  // namespace shuttlechain
