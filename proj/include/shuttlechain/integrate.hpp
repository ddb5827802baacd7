#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "shuttlechain/common.hpp"
#include "shuttlechain/linalg.hpp"
#include "shuttlechain/model.hpp"

namespace shuttlechain {

struct Dopri5Stats {
    long n_steps = 0;
    long n_accepted = 0;
    long n_rejected = 0;
    long n_feval = 0;
};

namespace detail {

// Dormand-Prince 5(4) tableau
struct Dopri5Tableau {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                            a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    // embedded error weights (5th order minus 4th order solution)
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    // dense output weights
    static constexpr double d1 = -12715105075.0 / 11282082432.0;
    static constexpr double d3 = 87487479700.0 / 32700410799.0;
    static constexpr double d4 = -10690763975.0 / 1880347072.0;
    static constexpr double d5 = 701980252875.0 / 199316789632.0;
    static constexpr double d6 = -1453857185.0 / 822651844.0;
    static constexpr double d7 = 69997945.0 / 29380423.0;
};

}  // namespace detail

// Adaptive Dormand-Prince 5(4) with PI step-size control and 4th-order dense
// output. `rhs(t, y, dydt)` is the vector field; `sample_times` must be
// ascending within [t0, t1]; `on_sample(k, t, y)` receives the dense-output
// state at sample_times[k]; `post_step(t, y)` may adjust the accepted state
// (constraint projection) before it seeds the next step.
//
// Dense output is evaluated from the polynomial of the step that covers each
// sample time, before post_step touches the endpoint; the projection only
// feeds forward.
template <typename Rhs, typename OnSample, typename PostStep>
Dopri5Stats dopri5(std::size_t dim, Rhs&& rhs, std::vector<double>& y, double t0, double t1,
                   double tol, const std::vector<double>& sample_times, OnSample&& on_sample,
                   PostStep&& post_step, long max_steps = 200000000L) {
    using T = detail::Dopri5Tableau;
    if (y.size() != dim) throw invalid_input("dopri5: state size mismatch");
    if (!(t1 > t0)) throw invalid_input("dopri5: t1 must exceed t0");
    if (!(tol > 0.0)) throw invalid_input("dopri5: tol must be positive");

    const double atol = tol, rtol = tol;
    const double safe = 0.9, beta = 0.04, expo1 = 0.2 - beta * 0.75;
    const double facmin = 0.2, facmax = 10.0;
    const double eps = std::ldexp(1.0, -52);

    std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim);
    std::vector<double> ynew(dim), ytmp(dim), yerr(dim);
    std::vector<double> r1(dim), r2(dim), r3(dim), r4(dim), r5(dim), ysample(dim);

    Dopri5Stats st;
    double t = t0;
    rhs(t, y.data(), k1.data());
    ++st.n_feval;

    // initial step size (standard two-stage heuristic)
    double h;
    {
        double d0 = 0.0, d1n = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double sc = atol + rtol * std::abs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1n += (k1[i] / sc) * (k1[i] / sc);
        }
        d0 = std::sqrt(d0 / dim);
        d1n = std::sqrt(d1n / dim);
        double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
        h0 = std::min(h0, t1 - t0);
        for (std::size_t i = 0; i < dim; ++i) ytmp[i] = y[i] + h0 * k1[i];
        rhs(t + h0, ytmp.data(), k2.data());
        ++st.n_feval;
        double d2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double sc = atol + rtol * std::abs(y[i]);
            d2 += ((k2[i] - k1[i]) / sc) * ((k2[i] - k1[i]) / sc);
        }
        d2 = std::sqrt(d2 / dim) / h0;
        const double dm = std::max(d1n, d2);
        const double h1 = (dm <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        h = std::min({100.0 * h0, h1, t1 - t0});
    }

    std::size_t sample_idx = 0;
    // emit any samples exactly at t0
    while (sample_idx < sample_times.size() && sample_times[sample_idx] <= t0) {
        on_sample(sample_idx, t0, y.data());
        ++sample_idx;
    }

    double facold = 1e-4;
    bool last_rejected = false;

    while (t < t1) {
        if (++st.n_steps > max_steps)
            throw numerical_error("dopri5: step budget exhausted at t = " + std::to_string(t));
        if (h < 16.0 * eps * std::max(std::abs(t), 1.0))
            throw numerical_error("dopri5: step size underflow at t = " + std::to_string(t));
        if (t + h > t1) h = t1 - t;

        for (std::size_t i = 0; i < dim; ++i) ytmp[i] = y[i] + h * T::a21 * k1[i];
        rhs(t + T::c2 * h, ytmp.data(), k2.data());
        for (std::size_t i = 0; i < dim; ++i) ytmp[i] = y[i] + h * (T::a31 * k1[i] + T::a32 * k2[i]);
        rhs(t + T::c3 * h, ytmp.data(), k3.data());
        for (std::size_t i = 0; i < dim; ++i)
            ytmp[i] = y[i] + h * (T::a41 * k1[i] + T::a42 * k2[i] + T::a43 * k3[i]);
        rhs(t + T::c4 * h, ytmp.data(), k4.data());
        for (std::size_t i = 0; i < dim; ++i)
            ytmp[i] = y[i] + h * (T::a51 * k1[i] + T::a52 * k2[i] + T::a53 * k3[i] + T::a54 * k4[i]);
        rhs(t + T::c5 * h, ytmp.data(), k5.data());
        for (std::size_t i = 0; i < dim; ++i)
            ytmp[i] = y[i] + h * (T::a61 * k1[i] + T::a62 * k2[i] + T::a63 * k3[i] + T::a64 * k4[i] +
                                  T::a65 * k5[i]);
        rhs(t + h, ytmp.data(), k6.data());
        for (std::size_t i = 0; i < dim; ++i)
            ynew[i] = y[i] + h * (T::a71 * k1[i] + T::a73 * k3[i] + T::a74 * k4[i] + T::a75 * k5[i] +
                                  T::a76 * k6[i]);
        rhs(t + h, ynew.data(), k7.data());  // FSAL
        st.n_feval += 6;

        double err = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            yerr[i] = h * (T::e1 * k1[i] + T::e3 * k3[i] + T::e4 * k4[i] + T::e5 * k5[i] +
                           T::e6 * k6[i] + T::e7 * k7[i]);
            const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err += (yerr[i] / sc) * (yerr[i] / sc);
        }
        err = std::sqrt(err / dim);

        if (err <= 1.0) {
            // dense output for samples inside (t, t+h]
            if (sample_idx < sample_times.size() && sample_times[sample_idx] <= t + h) {
                for (std::size_t i = 0; i < dim; ++i) {
                    const double dy = ynew[i] - y[i];
                    const double bspl = h * k1[i] - dy;
                    r1[i] = y[i];
                    r2[i] = dy;
                    r3[i] = bspl;
                    r4[i] = dy - h * k7[i] - bspl;
                    r5[i] = h * (T::d1 * k1[i] + T::d3 * k3[i] + T::d4 * k4[i] + T::d5 * k5[i] +
                                 T::d6 * k6[i] + T::d7 * k7[i]);
                }
                while (sample_idx < sample_times.size() && sample_times[sample_idx] <= t + h) {
                    const double ts = sample_times[sample_idx];
                    const double th = (ts - t) / h;
                    const double th1 = 1.0 - th;
                    for (std::size_t i = 0; i < dim; ++i)
                        ysample[i] =
                            r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
                    on_sample(sample_idx, ts, ysample.data());
                    ++sample_idx;
                }
            }

            t += h;
            y.swap(ynew);
            post_step(t, y.data());
            rhs(t, y.data(), k1.data());  // re-seed FSAL after projection
            ++st.n_feval;
            ++st.n_accepted;

            facold = std::max(err, 1e-4);
            double fac = safe * std::pow(err > 0 ? err : 1e-30, -expo1) * std::pow(facold, beta);
            fac = std::clamp(fac, facmin, facmax);
            if (last_rejected) fac = std::min(fac, 1.0);
            h *= fac;
            last_rejected = false;
        } else {
            ++st.n_rejected;
            h *= std::max(facmin, safe * std::pow(err, -expo1));
            last_rejected = true;
        }
    }
    // flush samples that coincide with t1 up to roundoff
    while (sample_idx < sample_times.size() &&
           sample_times[sample_idx] <= t1 * (1.0 + 4.0 * eps) + 4.0 * eps) {
        on_sample(sample_idx, t1, y.data());
        ++sample_idx;
    }
    return st;
}

// Uniformly sampled solution of the chain equations of motion.
struct Trajectory {
    int N = 0;
    double dt_out = 0.0;
    std::vector<double> t;
    DenseMatrix states;          // row k = flat state [x(N), p(N), q(N)] at t[k]
    std::size_t transient_cut = 0;  // first row considered steady
    long clamp_count = 0;        // charge projections applied
    Dopri5Stats stats;

    double value(std::size_t row, std::size_t comp) const { return states(row, comp); }
    std::size_t samples() const { return t.size(); }
};

// Integrate the chain from `initial` over [0, t_end], sampling every dt_out.
// Charge components are projected back into [0, 1] after every accepted step;
// violations beyond 1e-9 abort, smaller ones are counted.
inline Trajectory integrate_chain(const ChainParams& cp, const ChainState& initial, double t_end,
                                  double tol, double dt_out, double transient_fraction = 0.6) {
    cp.validate();
    if (initial.sites() != static_cast<std::size_t>(cp.N))
        throw invalid_input("integrate_chain: initial state size does not match N");
    if (!(t_end > 0.0)) throw invalid_input("integrate_chain: t_end must be positive");
    if (!(dt_out > 0.0)) throw invalid_input("integrate_chain: dt_out must be positive");
    if (!(transient_fraction >= 0.0 && transient_fraction < 1.0))
        throw invalid_input("integrate_chain: transient_fraction must lie in [0, 1)");

    const ChainField field(cp);
    const std::size_t dim = field.dim();
    const int N = cp.N;

    const std::size_t n_samples = static_cast<std::size_t>(std::floor(t_end / dt_out * (1.0 + 1e-12))) + 1;
    std::vector<double> times(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) times[k] = static_cast<double>(k) * dt_out;

    Trajectory tr;
    tr.N = N;
    tr.dt_out = dt_out;
    tr.t = times;
    tr.states = DenseMatrix(n_samples, dim);

    long clamp_count = 0;
    auto project_q = [&](double t, double* y) {
        for (int l = 0; l < N; ++l) {
            double& q = y[2 * N + l];
            if (q < 0.0) {
                if (q < -1e-9)
                    throw numerical_error("integrate_chain: charge left [0,1] by " +
                                          std::to_string(-q) + " at t = " + std::to_string(t) +
                                          "; tighten tol");
                q = 0.0;
                ++clamp_count;
            } else if (q > 1.0) {
                if (q > 1.0 + 1e-9)
                    throw numerical_error("integrate_chain: charge left [0,1] by " +
                                          std::to_string(q - 1.0) + " at t = " + std::to_string(t) +
                                          "; tighten tol");
                q = 1.0;
                ++clamp_count;
            }
        }
    };

    std::vector<double> y = initial.flat();
    tr.stats = dopri5(
        dim, field, y, 0.0, t_end, tol, times,
        [&](std::size_t k, double /*ts*/, const double* ys) {
            for (std::size_t c = 0; c < dim; ++c) tr.states(k, c) = ys[c];
        },
        project_q);
    tr.clamp_count = clamp_count;

    const double t_cut = transient_fraction * t_end;
    tr.transient_cut = 0;
    while (tr.transient_cut < tr.t.size() && tr.t[tr.transient_cut] < t_cut) ++tr.transient_cut;
    if (tr.transient_cut >= tr.t.size())
        throw numerical_error("integrate_chain: no samples past the transient window");
    return tr;
}

}  // namespace shuttlechain
