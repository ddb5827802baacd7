#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "shuttlechain/common.hpp"
#include "shuttlechain/integrate.hpp"
#include "shuttlechain/linalg.hpp"
#include "shuttlechain/model.hpp"
#include "shuttlechain/rng.hpp"
#include "shuttlechain/stability.hpp"
#include "shuttlechain/topology.hpp"

namespace shuttlechain {

// Default trajectory sampling interval: 1/40 of the period of the midgap
// (edge) doublet, estimated as the mean frequency of the two most
// edge-localized normal modes. If nothing is edge-localized (trivial phase),
// the median mode frequency stands in.
inline double default_dt_out(const ChainParams& cp) {
    const auto nm = normal_modes(cp);
    const int N = cp.N;
    double omega_mid;
    if (N >= 7) {
        std::vector<std::pair<double, double>> edge_weight(N);  // (weight, Omega)
        std::vector<double> row(N);
        for (int s = 0; s < N; ++s) {
            for (int l = 0; l < N; ++l) row[l] = nm.O(s, l);
            const auto loc = localization_measure(row);
            edge_weight[s] = {loc.left + loc.right, nm.Omega[s]};
        }
        std::sort(edge_weight.begin(), edge_weight.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first; });
        if (edge_weight[1].first > 0.5) {
            omega_mid = 0.5 * (edge_weight[0].second + edge_weight[1].second);
        } else {
            std::vector<double> om = nm.Omega;
            std::nth_element(om.begin(), om.begin() + N / 2, om.end());
            omega_mid = om[N / 2];
        }
    } else {
        std::vector<double> om = nm.Omega;
        std::nth_element(om.begin(), om.begin() + N / 2, om.end());
        omega_mid = om[N / 2];
    }
    if (!(omega_mid > 0.0)) throw numerical_error("default_dt_out: nonpositive reference frequency");
    return 2.0 * std::numbers::pi_v<double> / (40.0 * omega_mid);
}

enum class InitialKind { symmetric, antisymmetric, random, near_fixed_point };

inline InitialKind initial_kind_from_string(const std::string& s) {
    if (s == "symmetric") return InitialKind::symmetric;
    if (s == "antisymmetric") return InitialKind::antisymmetric;
    if (s == "random") return InitialKind::random;
    if (s == "near_fixed_point") return InitialKind::near_fixed_point;
    throw invalid_input("unknown initial kind '" + s + "'");
}

inline std::string to_string(InitialKind k) {
    switch (k) {
        case InitialKind::symmetric: return "symmetric";
        case InitialKind::antisymmetric: return "antisymmetric";
        case InitialKind::random: return "random";
        case InitialKind::near_fixed_point: return "near_fixed_point";
    }
    return "?";
}

// Initial conditions for the driven chain, built around the fixed point.
//
// symmetric / antisymmetric start from the *symmetrized* fixed point
// (mirror-averaged, so it is palindromic to the last bit) and displace the
// two edge cells by (0.05, 0.02, 0.01) lambda, with equal respectively
// opposite sign on the right edge. The displacement pattern, not the raw
// coordinate, carries the parity: the fixed point itself has a symmetric
// part that would otherwise mask it.
//
// random perturbs every x and p by uniform +-0.01 lambda (x first, then p,
// in site order, from the given seed's substream).
//
// near_fixed_point displaces every site by +1e-6 lambda.
inline ChainState make_initial(const ChainParams& cp, InitialKind kind, std::uint64_t seed = 0) {
    cp.validate();
    const int N = cp.N;
    const double lam = cp.shuttle.lambda;
    const auto fp = find_fixed_point(cp);

    ChainState s(N);
    if (kind == InitialKind::symmetric || kind == InitialKind::antisymmetric) {
        if (N < 7)
            throw invalid_input("make_initial: parity seeds need at least two separated cells");
        std::vector<double> xs(N);
        for (int l = 0; l < N; ++l) xs[l] = 0.5 * (fp.state.x[l] + fp.state.x[N - 1 - l]);
        // charge profile of the *undisplaced* symmetrized positions: q is
        // parity-even to the bit for both kinds, so the displacement pattern
        // below carries all of the parity content
        for (int l = 0; l < N; ++l) s.q[l] = detail::q_star(cp.shuttle, xs[l]);
        const double d[3] = {0.05 * lam, 0.02 * lam, 0.01 * lam};
        for (int i = 0; i < 3; ++i) {
            xs[i] += d[i];
            xs[N - 1 - i] += (kind == InitialKind::symmetric) ? d[i] : -d[i];
        }
        s.x = xs;
    } else if (kind == InitialKind::random) {
        Rng rng = Rng(seed).substream(0x696e6974ull);  // "init"
        s = fp.state;
        for (int l = 0; l < N; ++l) s.x[l] += rng.symmetric(0.01 * lam);
        for (int l = 0; l < N; ++l) s.p[l] += rng.symmetric(0.01 * lam);
    } else {  // near_fixed_point
        s = fp.state;
        for (int l = 0; l < N; ++l) s.x[l] += 1e-6 * lam;
    }
    return s;
}

// Steady-window statistics of one shuttle. Amplitudes are RMS values of the
// signal minus its reported mean; the frequency is angular (an undamped mode
// with eigenvalue i*W reports W) and refers to the displacement signal.
struct OscillatorStats {
    double mean_x = 0.0;       // averaged over an integer number of periods
    double mean_q = 0.0;
    double amplitude_x = 0.0;  // RMS of x - mean_x over the window
    double amplitude_q = 0.0;
    double frequency = 0.0;    // angular; 0 if quiescent
    double phase = 0.0;        // relative to the reference shuttle, in (-pi, pi]
};

struct SteadyStats {
    std::vector<OscillatorStats> site;  // one per shuttle
    int reference_site = -1;            // 1-based; -1 when everything is quiescent
    double window_time = 0.0;           // length of the analyzed window
    int n_samples = 0;
    double frequency_resolution = 0.0;  // angular, 2 pi / window_time
};

namespace detail {

struct SignalAnalysis {
    double rms = 0.0, mean_raw = 0.0;
    bool oscillating = false;
    int peak_bin = 0;
    double freq_angular = 0.0;  // refined
    double n_periods = 0.0;
    std::vector<cplx> spectrum;
};

inline SignalAnalysis analyze_signal(const std::vector<double>& w, double dt,
                                     double quiescence_threshold, bool hann) {
    SignalAnalysis a;
    const std::size_t n = w.size();
    double sum = 0.0;
    for (double v : w) sum += v;
    a.mean_raw = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : w) ss += (v - a.mean_raw) * (v - a.mean_raw);
    a.rms = std::sqrt(ss / static_cast<double>(n));
    if (a.rms < quiescence_threshold) return a;

    std::vector<double> d(n);
    for (std::size_t j = 0; j < n; ++j) {
        d[j] = w[j] - a.mean_raw;
        if (hann)
            d[j] *= 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi_v<double> * static_cast<double>(j) /
                                         static_cast<double>(n - 1));
    }
    a.spectrum = dft_complex(d);
    std::size_t kmax = 1;
    for (std::size_t k = 2; k <= n / 2; ++k)
        if (std::abs(a.spectrum[k]) > std::abs(a.spectrum[kmax])) kmax = k;
    a.peak_bin = static_cast<int>(kmax);

    // parabolic refinement on the magnitude of the three bins around the peak
    double delta = 0.0;
    if (kmax > 1 && kmax < n / 2) {
        const double m1 = std::abs(a.spectrum[kmax - 1]);
        const double m0 = std::abs(a.spectrum[kmax]);
        const double p1 = std::abs(a.spectrum[kmax + 1]);
        const double denom = m1 - 2.0 * m0 + p1;
        if (denom < 0.0) delta = std::clamp(0.5 * (m1 - p1) / denom, -0.5, 0.5);
    }
    const double f = (static_cast<double>(kmax) + delta) / (static_cast<double>(n) * dt);
    a.freq_angular = 2.0 * std::numbers::pi_v<double> * f;
    a.n_periods = f * static_cast<double>(n) * dt;
    a.oscillating = true;
    return a;
}

inline double wrap_phase(double ph) {
    const double two_pi = 2.0 * std::numbers::pi_v<double>;
    ph = std::fmod(ph, two_pi);
    if (ph > std::numbers::pi_v<double>) ph -= two_pi;
    if (ph <= -std::numbers::pi_v<double>) ph += two_pi;
    return ph;
}

// mean and RMS of a sampled signal: the mean runs over an integer number of
// periods (so the oscillation cancels), the RMS over the full window
// relative to that mean
inline void mean_and_rms(const std::vector<double>& w, double period_samples, double n_periods,
                         double& mean, double& rms) {
    const std::size_t n = w.size();
    std::size_t m = n;
    if (period_samples > 0.0 && n_periods >= 1.0)
        m = std::min(n, static_cast<std::size_t>(std::floor(std::floor(n_periods) * period_samples)));
    if (m == 0) m = n;
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += w[j];
    mean = acc / static_cast<double>(m);
    double ss = 0.0;
    for (double v : w) ss += (v - mean) * (v - mean);
    rms = std::sqrt(ss / static_cast<double>(n));
}

}  // namespace detail

// Per-site steady-state statistics over the post-transient window.
// Frequencies come from the discrete spectrum of the displacement signal
// with parabolic peak refinement; every oscillating site must cover at
// least 20 periods, else the window is too short to trust and an error asks
// for a longer run. Phases are cross-spectrum phases against the loudest
// site (or the chosen reference), evaluated at that site's dominant bin;
// means are taken over an integer number of periods so the oscillation
// averages out.
inline SteadyStats steady_stats(const Trajectory& tr, double quiescence_threshold,
                                int reference_site = -1, bool hann = false) {
    const int N = tr.N;
    const std::size_t begin = tr.transient_cut, end = tr.samples();
    if (end - begin < 16)
        throw invalid_input("steady_stats: steady window has fewer than 16 samples");
    const std::size_t n = end - begin;

    std::vector<std::vector<double>> wx(N);
    std::vector<detail::SignalAnalysis> an(N);
    for (int l = 0; l < N; ++l) {
        wx[l].resize(n);
        for (std::size_t j = 0; j < n; ++j) wx[l][j] = tr.value(begin + j, l);
        an[l] = detail::analyze_signal(wx[l], tr.dt_out, quiescence_threshold, hann);
        if (an[l].oscillating && an[l].n_periods < 20.0)
            throw numerical_error("steady_stats: site " + std::to_string(l + 1) + " covers only " +
                                  std::to_string(an[l].n_periods) +
                                  " periods in the steady window; increase t_end");
    }

    SteadyStats st;
    st.site.resize(N);
    st.window_time = static_cast<double>(n - 1) * tr.dt_out;
    st.n_samples = static_cast<int>(n);
    st.frequency_resolution = 2.0 * std::numbers::pi_v<double> / st.window_time;

    int ref = reference_site > 0 ? reference_site - 1 : -1;
    if (ref < 0) {
        double best = -1.0;
        for (int l = 0; l < N; ++l)
            if (an[l].oscillating && an[l].rms > best) {
                best = an[l].rms;
                ref = l;
            }
    } else if (ref >= N) {
        throw invalid_input("steady_stats: reference site out of range");
    }
    st.reference_site = ref >= 0 ? ref + 1 : -1;

    std::vector<double> wq(n);
    for (int l = 0; l < N; ++l) {
        auto& out = st.site[l];
        for (std::size_t j = 0; j < n; ++j) wq[j] = tr.value(begin + j, 2 * N + l);
        if (!an[l].oscillating) {
            out.mean_x = an[l].mean_raw;
            out.amplitude_x = an[l].rms;
            detail::mean_and_rms(wq, 0.0, 0.0, out.mean_q, out.amplitude_q);
            continue;  // frequency = 0, phase = 0 by convention
        }
        out.frequency = an[l].freq_angular;
        const double period_samples =
            2.0 * std::numbers::pi_v<double> / out.frequency / tr.dt_out;
        detail::mean_and_rms(wx[l], period_samples, an[l].n_periods, out.mean_x, out.amplitude_x);
        detail::mean_and_rms(wq, period_samples, an[l].n_periods, out.mean_q, out.amplitude_q);
        if (ref >= 0 && an[ref].oscillating) {
            const int k = an[ref].peak_bin;
            const cplx cross = an[l].spectrum[k] * std::conj(an[ref].spectrum[k]);
            out.phase = (std::abs(cross) > 0.0) ? std::arg(cross) : 0.0;
            if (out.phase <= -std::numbers::pi_v<double>)
                out.phase = std::numbers::pi_v<double>;  // land on (-pi, pi]
        }
    }
    return st;
}

// ------------------------------------------------------------------
// Synchronization classification

enum class SyncClass {
    Quiescent,
    LeftEdgeOnly,
    RightEdgeOnly,
    BothSynchronized,
    BothTwoFrequency,
    BulkExcited
};

inline std::string to_string(SyncClass c) {
    switch (c) {
        case SyncClass::Quiescent: return "Quiescent";
        case SyncClass::LeftEdgeOnly: return "LeftEdgeOnly";
        case SyncClass::RightEdgeOnly: return "RightEdgeOnly";
        case SyncClass::BothSynchronized: return "BothSynchronized";
        case SyncClass::BothTwoFrequency: return "BothTwoFrequency";
        case SyncClass::BulkExcited: return "BulkExcited";
    }
    return "?";
}

struct ClassifyOptions {
    double quiescence_threshold = 1e-3;  // in units of lambda, on amplitude_x
    // A bulk site only counts as excited above max(threshold, ratio * edge
    // amplitude): edge modes have exponential tails, so a fixed absolute
    // cut would flag the tail of every healthy edge oscillation.
    double bulk_leak_ratio = 0.25;
    int reference_site = -1;  // 1-based; -1 = loudest
    bool hann = false;
};

struct DecayFit {
    bool valid = false;
    double factor_per_cell = 0.0;  // fitted amplitude ratio between adjacent cells
    int n_cells = 0;
};

struct SyncReport {
    SyncClass cls = SyncClass::Quiescent;
    SteadyStats stats;
    double max_edge_amplitude = 0.0;
    double max_bulk_amplitude = 0.0;
    int loudest_bulk_site = 0;      // 1-based, 0 if none
    bool bulk_ambiguous = false;    // bulk/edge ratio within 1.5x of the cut
    double freq_left = 0.0;         // amplitude-weighted edge frequencies (angular)
    double freq_right = 0.0;
    double edge_phase_difference = 0.0;  // phase(site 1) - phase(site N), wrapped
    double phase_lock_drift = 0.0;       // worst in-edge pairwise phase change between
                                         // the last two 10-period blocks (needs trajectory)
    DecayFit decay;                      // spatial decay from the loud edge (needs trajectory)
};

namespace detail {

// Least-squares log-linear fit of per-cell peak amplitudes, ordered from
// the active edge inward. Cells below 1e-4 of the edge cell sit at the
// integrator noise floor and are excluded.
inline DecayFit fit_decay(const std::vector<double>& cell_amp) {
    DecayFit fit;
    if (cell_amp.empty() || !(cell_amp[0] > 0.0)) return fit;
    const double floor_amp = std::max(1e-9, 1e-4 * cell_amp[0]);
    std::vector<double> xs, ys;
    for (std::size_t j = 0; j < cell_amp.size(); ++j) {
        if (cell_amp[j] >= floor_amp) {
            xs.push_back(static_cast<double>(j));
            ys.push_back(std::log(cell_amp[j]));
        } else {
            break;  // stop at the first buried cell: beyond it is noise
        }
    }
    if (xs.size() < 3) return fit;
    const double nf = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double slope = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
    fit.valid = true;
    fit.factor_per_cell = std::exp(slope);
    fit.n_cells = static_cast<int>(xs.size());
    return fit;
}

}  // namespace detail

// Decide which synchronization scenario the steady-state statistics
// realize. Requires a chain of at least 3 cells so edge and bulk are
// distinct. This overload only uses the per-site statistics; the
// trajectory-based overload below adds the phase-drift and spatial-decay
// diagnostics.
inline SyncReport classify(const ChainParams& cp, const SteadyStats& stats,
                           const ClassifyOptions& opt = {}) {
    const int N = static_cast<int>(stats.site.size());
    if (N < 9) throw invalid_input("classify: need at least 3 cells (N >= 9)");
    SyncReport rep;
    rep.stats = stats;
    const auto& site = rep.stats.site;
    const double theta = opt.quiescence_threshold * cp.shuttle.lambda;

    double edge_l = 0.0, edge_r = 0.0;
    for (int l = 0; l < 3; ++l) edge_l = std::max(edge_l, site[l].amplitude_x);
    for (int l = N - 3; l < N; ++l) edge_r = std::max(edge_r, site[l].amplitude_x);
    rep.max_edge_amplitude = std::max(edge_l, edge_r);
    for (int l = 3; l < N - 3; ++l)
        if (site[l].amplitude_x > rep.max_bulk_amplitude) {
            rep.max_bulk_amplitude = site[l].amplitude_x;
            rep.loudest_bulk_site = l + 1;
        }

    const bool left_active = edge_l >= theta;
    const bool right_active = edge_r >= theta;

    if (!left_active && !right_active && rep.max_bulk_amplitude < theta) {
        rep.cls = SyncClass::Quiescent;
        return rep;
    }

    const double bulk_cut = std::max(theta, opt.bulk_leak_ratio * rep.max_edge_amplitude);
    if (rep.max_edge_amplitude > 0.0) {
        const double ratio = rep.max_bulk_amplitude / rep.max_edge_amplitude;
        rep.bulk_ambiguous =
            ratio >= opt.bulk_leak_ratio / 1.5 && ratio <= opt.bulk_leak_ratio * 1.5;
    }
    if (rep.max_bulk_amplitude >= bulk_cut) {
        rep.cls = SyncClass::BulkExcited;
        return rep;
    }

    // amplitude-weighted edge frequencies
    auto weighted_freq = [&](int lo, int hi) {
        double wsum = 0.0, fsum = 0.0;
        for (int l = lo; l < hi; ++l)
            if (site[l].amplitude_x >= theta && site[l].frequency > 0.0) {
                wsum += site[l].amplitude_x;
                fsum += site[l].amplitude_x * site[l].frequency;
            }
        return wsum > 0.0 ? fsum / wsum : 0.0;
    };
    rep.freq_left = weighted_freq(0, 3);
    rep.freq_right = weighted_freq(N - 3, N);

    if (left_active && !right_active) {
        rep.cls = SyncClass::LeftEdgeOnly;
    } else if (right_active && !left_active) {
        rep.cls = SyncClass::RightEdgeOnly;
    } else if (std::abs(rep.freq_left - rep.freq_right) < stats.frequency_resolution) {
        // both edges ring at the same frequency within the window resolution
        rep.cls = SyncClass::BothSynchronized;
        rep.edge_phase_difference = detail::wrap_phase(site[0].phase - site[N - 1].phase);
    } else {
        rep.cls = SyncClass::BothTwoFrequency;
    }
    return rep;
}

// Full classification of a trajectory: per-site statistics, scenario, and
// the phase-drift / spatial-decay diagnostics that need the raw samples.
inline SyncReport classify(const ChainParams& cp, const Trajectory& tr,
                           const ClassifyOptions& opt = {}) {
    const int N = tr.N;
    const double theta = opt.quiescence_threshold * cp.shuttle.lambda;
    const auto stats = steady_stats(tr, theta, opt.reference_site, opt.hann);
    SyncReport rep = classify(cp, stats, opt);
    if (rep.cls == SyncClass::Quiescent) return rep;
    const auto& site = rep.stats.site;

    // phase-lock stationarity: within each active edge trimer, compare
    // pairwise cross-spectrum phases over the final two 10-period blocks
    {
        double fmax = std::max(rep.freq_left, rep.freq_right);
        if (fmax <= 0.0)
            for (int l = 0; l < N; ++l) fmax = std::max(fmax, site[l].frequency);
        if (fmax > 0.0) {
            const double period = 2.0 * std::numbers::pi_v<double> / fmax;
            const std::size_t block =
                static_cast<std::size_t>(std::lround(10.0 * period / tr.dt_out));
            const std::size_t n = static_cast<std::size_t>(rep.stats.n_samples);
            if (block >= 16 && 2 * block <= n) {
                auto block_analysis = [&](int l, std::size_t from) {
                    std::vector<double> w(block);
                    for (std::size_t j = 0; j < block; ++j)
                        w[j] = tr.value(tr.transient_cut + from + j, l);
                    return detail::analyze_signal(w, tr.dt_out, theta, opt.hann);
                };
                auto edge_drift = [&](int lo) {
                    double worst = 0.0;
                    for (int a = lo; a < lo + 3; ++a)
                        for (int b = a + 1; b < lo + 3; ++b) {
                            if (site[a].amplitude_x < theta || site[b].amplitude_x < theta)
                                continue;
                            const auto a1 = block_analysis(a, n - 2 * block);
                            const auto b1 = block_analysis(b, n - 2 * block);
                            const auto a2 = block_analysis(a, n - block);
                            const auto b2 = block_analysis(b, n - block);
                            if (!a1.oscillating || !b1.oscillating || !a2.oscillating ||
                                !b2.oscillating)
                                continue;
                            const double p1 = std::arg(a1.spectrum[a1.peak_bin] *
                                                       std::conj(b1.spectrum[a1.peak_bin]));
                            const double p2 = std::arg(a2.spectrum[a2.peak_bin] *
                                                       std::conj(b2.spectrum[a2.peak_bin]));
                            worst = std::max(worst, std::abs(detail::wrap_phase(p2 - p1)));
                        }
                    return worst;
                };
                double drift = 0.0;
                if (std::max({site[0].amplitude_x, site[1].amplitude_x, site[2].amplitude_x}) >=
                    theta)
                    drift = std::max(drift, edge_drift(0));
                if (std::max({site[N - 3].amplitude_x, site[N - 2].amplitude_x,
                              site[N - 1].amplitude_x}) >= theta)
                    drift = std::max(drift, edge_drift(N - 3));
                rep.phase_lock_drift = drift;
            }
        }
    }

    // spatial decay of the oscillation, cell by cell from the loud edge
    {
        const int cells = N / 3;
        std::vector<double> cell_amp(cells, 0.0);
        double edge_l = 0.0, edge_r = 0.0;
        for (int l = 0; l < 3; ++l) edge_l = std::max(edge_l, site[l].amplitude_x);
        for (int l = N - 3; l < N; ++l) edge_r = std::max(edge_r, site[l].amplitude_x);
        const bool from_left = edge_l >= edge_r;
        for (int c = 0; c < cells; ++c)
            for (int i = 0; i < 3; ++i) {
                const int l = from_left ? 3 * c + i : N - 1 - 3 * c - i;
                cell_amp[c] = std::max(cell_amp[c], site[l].amplitude_x);
            }
        rep.decay = detail::fit_decay(cell_amp);
    }
    return rep;
}

// Largest mirror-asymmetry of the sampled trajectory, over all components
// and times. Symmetric initial data must stay symmetric to integration
// accuracy; this is the watchdog for that invariant.
inline double symmetry_violation(const Trajectory& tr) {
    const int N = tr.N;
    double worst = 0.0;
    for (std::size_t row = 0; row < tr.samples(); ++row)
        for (int part = 0; part < 3; ++part)
            for (int l = 0; l < N / 2; ++l) {
                const double a = tr.value(row, part * N + l);
                const double b = tr.value(row, part * N + (N - 1 - l));
                worst = std::max(worst, std::abs(a - b));
            }
    return worst;
}

}  // namespace shuttlechain
