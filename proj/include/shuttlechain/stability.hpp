#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "shuttlechain/common.hpp"
#include "shuttlechain/linalg.hpp"
#include "shuttlechain/model.hpp"
#include "shuttlechain/parallel.hpp"
#include "shuttlechain/rng.hpp"

namespace shuttlechain {

// Stationary state of the chain: p = 0, force balance in x, charge balance
// in q.
struct FixedPoint {
    ChainState state;
    double residual = 0.0;  // final max-norm of the balance equations
    int iterations = 0;
};

namespace detail {

// Charge balance at fixed position: q*(x) = gin / (gin + gout).
inline double q_star(const ShuttleParams& sp, double x) {
    const auto r = rates(sp, x);
    return r.gin / (r.gin + r.gout);
}

// Single-site force balance omega^2 x = alpha V q*(x), solved by bisection.
// Root is bracketed by [-(aV/w^2 + 1), aV/w^2 + 1] since q* is in [0, 1].
inline double single_site_balance(const ShuttleParams& sp, double omega2) {
    const double av = sp.alpha * sp.V;
    auto g = [&](double x) { return omega2 * x - av * q_star(sp, x); };
    double lo = -(std::abs(av) / omega2 + 1.0), hi = std::abs(av) / omega2 + 1.0;
    double glo = g(lo);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if ((gm < 0) == (glo < 0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-15 * std::max(1.0, std::abs(lo))) break;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// Damped Newton iteration for the chain fixed point in the (x, q) variables.
// Starts from the uncoupled per-site balance unless a guess is supplied.
inline FixedPoint find_fixed_point(const ChainParams& cp,
                                   const std::optional<ChainState>& guess = std::nullopt) {
    cp.validate();
    const int N = cp.N;
    const auto w = site_frequencies(cp);
    const double av = cp.shuttle.alpha * cp.shuttle.V;
    const double scale =
        std::max({std::abs(av), cp.shuttle.gamma, cp.shuttle.Gamma, 1e-30});
    const double target = 1e-12 * scale;

    std::vector<double> bond2(N > 0 ? N - 1 : 0);
    for (int b = 0; b + 1 < N; ++b) {
        const double gb = cp.bond_strength(b);
        bond2[b] = gb * gb;
    }

    std::vector<double> z(2 * N);  // [x(N), q(N)]
    if (guess) {
        if (guess->sites() != static_cast<std::size_t>(N))
            throw invalid_input("find_fixed_point: guess size does not match N");
        for (int l = 0; l < N; ++l) {
            z[l] = guess->x[l];
            z[N + l] = guess->q[l];
        }
    } else {
        for (int l = 0; l < N; ++l) {
            z[l] = detail::single_site_balance(cp.shuttle, w[l] * w[l]);
            z[N + l] = detail::q_star(cp.shuttle, z[l]);
        }
    }

    auto residual = [&](const std::vector<double>& v, std::vector<double>& f) {
        for (int l = 0; l < N; ++l) {
            double nb = 0.0;  // grouped as in ChainField, keeps mirror symmetry exact
            if (l > 0) nb += bond2[l - 1] * v[l - 1];
            if (l < N - 1) nb += bond2[l] * v[l + 1];
            f[l] = (-w[l] * w[l] * v[l] + av * v[N + l]) + nb;
            const auto r = rates(cp.shuttle, v[l]);
            f[N + l] = r.gin * (1.0 - v[N + l]) - r.gout * v[N + l];
        }
    };
    auto max_norm = [](const std::vector<double>& f) {
        double m = 0.0;
        for (double v : f) m = std::max(m, std::abs(v));
        return m;
    };

    std::vector<double> f(2 * N), fnew(2 * N), ztry(2 * N);
    residual(z, f);
    double fnorm = max_norm(f);
    double best_norm = fnorm;
    std::vector<double> best_z = z;

    constexpr int newton_cap = 200;
    int it = 0;
    for (; it < newton_cap && fnorm > target; ++it) {
        DenseMatrix J(2 * N, 2 * N);
        for (int l = 0; l < N; ++l) {
            J(l, l) = -w[l] * w[l];
            if (l > 0) J(l, l - 1) = bond2[l - 1];
            if (l < N - 1) J(l, l + 1) = bond2[l];
            J(l, N + l) = av;
            const auto r = rates_with_derivatives(cp.shuttle, z[l]);
            J(N + l, l) = r.dgin_dx * (1.0 - z[N + l]) - r.dgout_dx * z[N + l];
            J(N + l, N + l) = -(r.gin + r.gout);
        }
        std::vector<double> rhs(2 * N);
        for (int i = 0; i < 2 * N; ++i) rhs[i] = -f[i];
        const auto step = solve_linear(J, rhs);

        // backtracking on the residual norm
        double s = 1.0;
        bool accepted = false;
        while (s >= 1e-4) {
            for (int i = 0; i < 2 * N; ++i) ztry[i] = z[i] + s * step[i];
            residual(ztry, fnew);
            const double nn = max_norm(fnew);
            if (nn <= (1.0 - 1e-4 * s) * fnorm) {
                z = ztry;
                f = fnew;
                fnorm = nn;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if (!accepted) {
            // take the shortest step anyway; the cap bounds any cycling
            for (int i = 0; i < 2 * N; ++i) z[i] += 1e-4 * step[i];
            residual(z, f);
            fnorm = max_norm(f);
        }
        if (fnorm < best_norm) {
            best_norm = fnorm;
            best_z = z;
        }
    }
    if (fnorm > target)
        throw numerical_error("find_fixed_point: Newton stalled after " + std::to_string(it) +
                              " iterations, best residual " + std::to_string(best_norm) +
                              " (target " + std::to_string(target) + ")");

    FixedPoint fp;
    fp.state = ChainState(N);
    for (int l = 0; l < N; ++l) {
        double q = z[N + l];
        if (q < -1e-9 || q > 1.0 + 1e-9)
            throw numerical_error("find_fixed_point: converged charge leaves [0,1] at site " +
                                  std::to_string(l + 1));
        fp.state.x[l] = z[l];
        fp.state.q[l] = std::clamp(q, 0.0, 1.0);
    }
    fp.residual = fnorm;
    fp.iterations = it;
    return fp;
}

// One linearized mode around a fixed point.
struct Mode {
    cplx value;
    double weight_left = 0.0;   // |x component|^2 share on the first cell
    double weight_right = 0.0;  // ... and on the last cell
    std::string tag;            // "left", "right" or "bulk"
};

struct StabilityReport {
    std::vector<Mode> modes;  // sorted (Re desc, Im desc)
    double max_real = -std::numeric_limits<double>::infinity();
    std::vector<Mode> unstable;  // Re > 0 members
};

// Linear stability of a fixed point: eigenvalues of the 3N x 3N Jacobian,
// each tagged by where the x part of its eigenvector lives.
inline StabilityReport stability_spectrum(const ChainParams& cp, const FixedPoint& fp,
                                          double edge_tag_threshold = 0.7) {
    const int N = cp.N;
    const auto J = jacobian_chain(cp, fp.state);
    const auto sp = eig_general(J, true);

    StabilityReport rep;
    rep.modes.reserve(sp.size());
    const int cell = std::min(3, N);
    for (std::size_t i = 0; i < sp.size(); ++i) {
        Mode m;
        m.value = sp.values[i];
        const auto v = sp.eigenvector(i);
        double wx = 0.0, wl = 0.0, wr = 0.0;
        for (int l = 0; l < N; ++l) {
            const double a2 = std::norm(v[l]);
            wx += a2;
            if (l < cell) wl += a2;
            if (l >= N - cell) wr += a2;
        }
        if (wx > 1e-12) {
            m.weight_left = wl / wx;
            m.weight_right = wr / wx;
        }
        if (N >= 7 && m.weight_left > edge_tag_threshold && m.weight_left > m.weight_right)
            m.tag = "left";
        else if (N >= 7 && m.weight_right > edge_tag_threshold && m.weight_right > m.weight_left)
            m.tag = "right";
        else
            m.tag = "bulk";
        rep.max_real = std::max(rep.max_real, m.value.real());
        if (m.value.real() > 0.0) rep.unstable.push_back(m);
        rep.modes.push_back(std::move(m));
    }
    return rep;
}

// ------------------------------------------------------------------
// Sweeps

struct PhiSweepPoint {
    double phi = 0.0;
    bool ok = false;
    std::string error;
    double max_real = 0.0;
    bool has_left = false, has_right = false;
    double max_real_left = 0.0, max_real_right = 0.0;
    int n_unstable = 0;        // conjugate pairs counted once
    std::vector<Mode> modes;   // full tagged spectrum at this phi
};

struct PhiBoundary {
    double phi = 0.0;
    std::string channel;  // "left", "right" or "any"
    bool turning_on = false;
};

struct PhiSweepResult {
    std::vector<PhiSweepPoint> points;
    std::vector<PhiBoundary> boundaries;
    bool partial = false;  // some points failed and were skipped
};

namespace detail {

inline PhiSweepPoint phi_point(const ChainParams& base, double phi, double edge_tag_threshold) {
    PhiSweepPoint pt;
    pt.phi = phi;
    try {
        ChainParams cp = base;
        cp.set_phi(phi);
        const auto fp = find_fixed_point(cp);
        const auto rep = stability_spectrum(cp, fp, edge_tag_threshold);
        pt.max_real = rep.max_real;
        pt.modes = rep.modes;
        for (const auto& m : rep.modes) {
            if (m.tag == "left") {
                if (!pt.has_left || m.value.real() > pt.max_real_left)
                    pt.max_real_left = m.value.real();
                pt.has_left = true;
            } else if (m.tag == "right") {
                if (!pt.has_right || m.value.real() > pt.max_real_right)
                    pt.max_real_right = m.value.real();
                pt.has_right = true;
            }
            if (m.value.real() > 0.0 && m.value.imag() >= 0.0) ++pt.n_unstable;
        }
        pt.ok = true;
    } catch (const error& e) {
        pt.error = e.what();
    }
    return pt;
}

inline double channel_value(const PhiSweepPoint& pt, const std::string& channel) {
    if (channel == "any") return pt.max_real;
    if (channel == "left") return pt.has_left ? pt.max_real_left : -1.0;
    return pt.has_right ? pt.max_real_right : -1.0;
}

}  // namespace detail

// Scan the superlattice phase, locating where edge channels gain or lose
// linear stability. Sign changes of the per-channel growth rate are refined
// by bisection to better than 1e-3 * pi. Failed phase points are recorded
// and skipped (status partial), the sweep continues.
inline PhiSweepResult phi_sweep(const ChainParams& cp, double phi_min, double phi_max, int n_phi,
                                double edge_tag_threshold = 0.7, unsigned threads = 1) {
    if (n_phi < 2) throw invalid_input("phi_sweep: need at least 2 phase samples");
    if (!(phi_max > phi_min)) throw invalid_input("phi_sweep: empty phase interval");
    cp.validate();

    PhiSweepResult res;
    res.points.resize(n_phi);
    parallel_for(static_cast<std::size_t>(n_phi), threads, [&](std::size_t i) {
        const double phi = phi_min + (phi_max - phi_min) * static_cast<double>(i) / (n_phi - 1);
        res.points[i] = detail::phi_point(cp, phi, edge_tag_threshold);
    });
    for (const auto& pt : res.points)
        if (!pt.ok) res.partial = true;

    const double tol_phi = 1e-3 * std::numbers::pi_v<double>;
    for (const std::string channel : {"left", "right", "any"}) {
        for (int i = 0; i + 1 < n_phi; ++i) {
            const auto& a = res.points[i];
            const auto& b = res.points[i + 1];
            if (!a.ok || !b.ok) continue;
            const bool ua = detail::channel_value(a, channel) > 0.0;
            const bool ub = detail::channel_value(b, channel) > 0.0;
            if (ua == ub) continue;
            double lo = a.phi, hi = b.phi;
            bool lo_unstable = ua;
            try {
                while (hi - lo > tol_phi) {
                    const double mid = 0.5 * (lo + hi);
                    const auto pm = detail::phi_point(cp, mid, edge_tag_threshold);
                    if (!pm.ok) throw numerical_error(pm.error);
                    if ((detail::channel_value(pm, channel) > 0.0) == lo_unstable)
                        lo = mid;
                    else
                        hi = mid;
                }
                PhiBoundary bd;
                bd.phi = 0.5 * (lo + hi);
                bd.channel = channel;
                bd.turning_on = ub;
                res.boundaries.push_back(bd);
            } catch (const error&) {
                res.partial = true;  // refinement failed; coarse crossing is still in points
            }
        }
    }
    std::stable_sort(res.boundaries.begin(), res.boundaries.end(),
                     [](const PhiBoundary& x, const PhiBoundary& y) { return x.phi < y.phi; });
    return res;
}

struct SingleShuttlePoint {
    double omega = 0.0;
    double max_real = 0.0;
};

struct SingleShuttleResult {
    std::vector<SingleShuttlePoint> points;
    bool window_found = false;
    double window_lo = 0.0, window_hi = 0.0;  // refined instability window
    double argmax_omega = 0.0, max_real_at_argmax = 0.0;
};

namespace detail {

inline double single_shuttle_max_real(const ShuttleParams& sp, double omega) {
    ChainParams cp;
    cp.N = 1;
    cp.omega_sites = {omega};
    cp.shuttle = sp;
    const auto fp = find_fixed_point(cp);
    const auto J = jacobian_chain(cp, fp.state);
    const auto eig = eig_general(J, false);
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& v : eig.values) m = std::max(m, v.real());
    return m;
}

}  // namespace detail

// Growth rate of a lone shuttle as a function of its mechanical frequency:
// instability window endpoints (bisected to 1e-6) and the most unstable
// frequency (golden-section refinement).
inline SingleShuttleResult single_shuttle_sweep(const ShuttleParams& sp, double omega_min,
                                                double omega_max, int n_omega,
                                                unsigned threads = 1) {
    if (n_omega < 3) throw invalid_input("single_shuttle_sweep: need at least 3 samples");
    if (!(omega_min > 0.0 && omega_max > omega_min))
        throw invalid_input("single_shuttle_sweep: bad frequency interval");
    sp.validate();

    SingleShuttleResult res;
    res.points.resize(n_omega);
    parallel_for(static_cast<std::size_t>(n_omega), threads, [&](std::size_t i) {
        const double om = omega_min + (omega_max - omega_min) * static_cast<double>(i) / (n_omega - 1);
        res.points[i].omega = om;
        res.points[i].max_real = detail::single_shuttle_max_real(sp, om);
    });

    int first_up = -1, last_down = -1, k_argmax = 0;
    for (int i = 0; i < n_omega; ++i) {
        if (res.points[i].max_real > res.points[k_argmax].max_real) k_argmax = i;
        if (i + 1 < n_omega) {
            const bool ua = res.points[i].max_real > 0.0, ub = res.points[i + 1].max_real > 0.0;
            if (!ua && ub && first_up < 0) first_up = i;
            if (ua && !ub) last_down = i;
        }
    }
    if (res.points[k_argmax].max_real <= 0.0 || first_up < 0 || last_down < 0) return res;

    auto bisect_edge = [&](double lo, double hi) {
        const bool lo_unstable = detail::single_shuttle_max_real(sp, lo) > 0.0;
        while (hi - lo > 1e-6) {
            const double mid = 0.5 * (lo + hi);
            if ((detail::single_shuttle_max_real(sp, mid) > 0.0) == lo_unstable)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    };
    res.window_lo = bisect_edge(res.points[first_up].omega, res.points[first_up + 1].omega);
    res.window_hi = bisect_edge(res.points[last_down].omega, res.points[last_down + 1].omega);

    // golden-section refinement of the most unstable frequency
    {
        double a = res.points[std::max(k_argmax - 1, 0)].omega;
        double b = res.points[std::min(k_argmax + 1, n_omega - 1)].omega;
        const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
        double c = b - gr * (b - a), d = a + gr * (b - a);
        double fc = detail::single_shuttle_max_real(sp, c);
        double fd = detail::single_shuttle_max_real(sp, d);
        while (b - a > 1e-6) {
            if (fc > fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = detail::single_shuttle_max_real(sp, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = detail::single_shuttle_max_real(sp, d);
            }
        }
        res.argmax_omega = 0.5 * (a + b);
        res.max_real_at_argmax = detail::single_shuttle_max_real(sp, res.argmax_omega);
    }
    res.window_found = true;
    return res;
}

// ------------------------------------------------------------------
// Inter-trimer coupling disorder

struct DisorderRealization {
    double r = 0.0;
    int index = 0;
    std::vector<double> delta_g;  // the 7 inter-cell bond shifts, ascending bond order
    bool ok = false;
    std::string error;
    bool has_left = false, has_right = false;
    double left_re = 0.0, left_im = 0.0;
    double right_re = 0.0, right_im = 0.0;
    // a degenerate pair straddling both edges (clean chain at a symmetric
    // phase) is "mixed": edge weight is high but split evenly
    bool has_mixed = false;
    double mixed_re = 0.0, mixed_im = 0.0;
    int n_unstable_bulk = 0;
    double max_real_bulk = -std::numeric_limits<double>::infinity();
    std::vector<double> mode_frequencies;  // open-chain normal modes of the disordered chain
    std::vector<Mode> modes;               // full tagged linear spectrum
};

struct DisorderSummary {
    double r = 0.0;
    int n_ok = 0, n_failed = 0;
    double mean_edge_im = 0.0;        // pooled left/right unstable edge frequencies
    double std_edge_im = 0.0;
    double max_dev_from_clean = 0.0;  // max |Im - clean Im| over the pool
    int n_with_bulk_unstable = 0;     // realizations with at least one unstable bulk mode
    double max_lr_split = 0.0;        // max |Re_left - Re_right|
};

struct DisorderResult {
    double clean_im = 0.0;  // edge-pair frequency of the clean chain
    double clean_re = 0.0;
    std::vector<DisorderRealization> realizations;
    std::vector<DisorderSummary> summaries;  // one per r value
    bool partial = false;
};

namespace detail {

// Only every third bond, the one linking two cells (sites 3k and 3k+1,
// 1-based), carries disorder.
inline std::vector<int> inter_cell_bonds(int N) {
    std::vector<int> out;
    for (int b = 2; b + 1 < N; b += 3) out.push_back(b);
    return out;
}

inline void disorder_realization(const ChainParams& base, const std::vector<int>& bonds, double r,
                                 int index, Rng rng, bool two_point, double edge_tag_threshold,
                                 DisorderRealization& out) {
    out.r = r;
    out.index = index;
    out.delta_g.resize(bonds.size());
    for (std::size_t i = 0; i < bonds.size(); ++i)
        out.delta_g[i] = two_point ? rng.two_point(r) : rng.symmetric(r);
    try {
        ChainParams cp = base;
        cp.coupling_disorder.assign(base.N - 1, 0.0);
        for (std::size_t i = 0; i < bonds.size(); ++i) cp.coupling_disorder[bonds[i]] = out.delta_g[i];
        out.mode_frequencies = normal_modes(cp).Omega;
        const auto fp = find_fixed_point(cp);
        const auto rep = stability_spectrum(cp, fp, edge_tag_threshold);
        out.modes = rep.modes;
        for (const auto& m : rep.modes) {
            const double re = m.value.real(), im = m.value.imag();
            const bool edge_combined = m.weight_left + m.weight_right > edge_tag_threshold;
            if (m.tag == "left" && im > 1e-6 && (!out.has_left || re > out.left_re)) {
                out.left_re = re;
                out.left_im = im;
                out.has_left = true;
            } else if (m.tag == "right" && im > 1e-6 && (!out.has_right || re > out.right_re)) {
                out.right_re = re;
                out.right_im = im;
                out.has_right = true;
            } else if (m.tag == "bulk" && re > 0.0 && im > 1e-6 && edge_combined &&
                       (!out.has_mixed || re > out.mixed_re)) {
                out.mixed_re = re;
                out.mixed_im = im;
                out.has_mixed = true;
            } else if (m.tag == "bulk" && !edge_combined) {
                out.max_real_bulk = std::max(out.max_real_bulk, re);
                if (re > 0.0 && im >= 0.0) ++out.n_unstable_bulk;  // one count per conjugate pair
            }
        }
        out.ok = true;
    } catch (const error& e) {
        out.error = e.what();
    }
}

}  // namespace detail

// Ensemble of chains with random inter-cell coupling disorder of strength r
// (delta g uniform in [-r, r], or +-r when two_point). Each (r, realization)
// cell has its own deterministic RNG substream, so results do not depend on
// evaluation order or thread count; `correlated` reuses the same draws
// across r values so a realization stays recognizably "the same" chain.
inline DisorderResult disorder_sweep(const ChainParams& cp, const std::vector<double>& r_values,
                                     int n_realizations, std::uint64_t master_seed,
                                     bool correlated = false, bool two_point = false,
                                     double edge_tag_threshold = 0.7, unsigned threads = 1) {
    cp.validate();
    if (cp.N < 7) throw invalid_input("disorder_sweep: chain too short for edge analysis");
    if (n_realizations < 1) throw invalid_input("disorder_sweep: need at least one realization");
    for (double r : r_values)
        if (r < 0.0 || r >= cp.g)
            throw invalid_input("disorder_sweep: r must lie in [0, g) to keep bonds positive");

    const auto bonds = detail::inter_cell_bonds(cp.N);
    const Rng master(master_seed);

    DisorderResult res;
    // clean reference: mean frequency of the unstable oscillatory modes
    {
        const auto fp = find_fixed_point(cp);
        const auto rep = stability_spectrum(cp, fp, edge_tag_threshold);
        double sum_im = 0.0, sum_re = 0.0;
        int n = 0;
        for (const auto& m : rep.unstable)
            if (m.value.imag() > 1e-6) {
                sum_im += m.value.imag();
                sum_re += m.value.real();
                ++n;
            }
        if (n == 0)
            throw numerical_error(
                "disorder_sweep: clean chain has no unstable oscillatory mode at this phase");
        res.clean_im = sum_im / n;
        res.clean_re = sum_re / n;
    }

    res.realizations.resize(r_values.size() * static_cast<std::size_t>(n_realizations));
    parallel_for(res.realizations.size(), threads, [&](std::size_t cellidx) {
        const std::size_t ir = cellidx / n_realizations;
        const int j = static_cast<int>(cellidx % n_realizations);
        const Rng rng = correlated ? master.substream(static_cast<std::uint64_t>(j))
                                   : master.substream(ir).substream(static_cast<std::uint64_t>(j));
        detail::disorder_realization(cp, bonds, r_values[ir], j, rng, two_point, edge_tag_threshold,
                                     res.realizations[cellidx]);
    });

    for (std::size_t ir = 0; ir < r_values.size(); ++ir) {
        DisorderSummary s;
        s.r = r_values[ir];
        std::vector<double> pool;
        for (int j = 0; j < n_realizations; ++j) {
            const auto& re = res.realizations[ir * n_realizations + j];
            if (!re.ok) {
                ++s.n_failed;
                res.partial = true;
                continue;
            }
            ++s.n_ok;
            if (re.has_left) pool.push_back(re.left_im);
            if (re.has_right) pool.push_back(re.right_im);
            if (re.has_mixed) pool.push_back(re.mixed_im);
            if (re.n_unstable_bulk > 0) ++s.n_with_bulk_unstable;
            if (re.has_left && re.has_right)
                s.max_lr_split = std::max(s.max_lr_split, std::abs(re.left_re - re.right_re));
        }
        if (!pool.empty()) {
            double mean = 0.0;
            for (double v : pool) mean += v;
            mean /= static_cast<double>(pool.size());
            double var = 0.0, dev = 0.0;
            for (double v : pool) {
                var += (v - mean) * (v - mean);
                dev = std::max(dev, std::abs(v - res.clean_im));
            }
            s.mean_edge_im = mean;
            s.std_edge_im = std::sqrt(var / static_cast<double>(pool.size()));
            s.max_dev_from_clean = dev;
        }
        res.summaries.push_back(s);
    }
    return res;
}

}  // namespace shuttlechain
