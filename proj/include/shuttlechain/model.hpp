#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "shuttlechain/common.hpp"
#include "shuttlechain/linalg.hpp"

namespace shuttlechain {

// Parameters of a single electron shuttle. Units are nondimensional:
// lengths in lambda, frequencies in the bare coupling g, energies in g^2.
struct ShuttleParams {
    double omega = 1.5;          // mechanical frequency (single-shuttle runs)
    double gamma = 0.53;         // mechanical damping
    double Gamma = 0.53;         // bare tunneling rate
    double alpha = 0.06;         // charge-position coupling (force = alpha*V*q)
    double lambda = 1.0;         // tunneling length
    double beta = 90.0 / 59.0;   // inverse lead temperature
    double V = 295.0 / 3.0;      // source-drain bias
    double epsilon = 0.0;        // dot level offset from the bias midpoint

    double mu_source() const { return epsilon + 0.5 * V; }
    double mu_drain() const { return epsilon - 0.5 * V; }

    void validate() const {
        if (!(lambda > 0.0)) throw invalid_input("ShuttleParams: lambda must be positive");
        if (!(beta > 0.0)) throw invalid_input("ShuttleParams: beta must be positive");
        if (Gamma < 0.0) throw invalid_input("ShuttleParams: Gamma must be nonnegative");
        if (gamma < 0.0) throw invalid_input("ShuttleParams: gamma must be nonnegative");
        if (!(omega > 0.0)) throw invalid_input("ShuttleParams: omega must be positive");
    }
};

// Fermi function f(u) = 1/(1 + e^u), evaluated without overflow for any
// finite argument (safe well past |u| = 1e4).
inline double fermi(double u) {
    if (u > 0.0) {
        const double e = std::exp(-u);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(u));
}

struct Rates {
    double gin = 0.0, gout = 0.0;
    bool clamped = false;  // position factor exponent hit the +-300 guard
};

struct RatesDeriv {
    double gin = 0.0, gout = 0.0;
    double dgin_dx = 0.0, dgout_dx = 0.0;
    bool clamped = false;
};

namespace detail {

struct RateCore {
    double wm, wp, fS, fD;
    bool clamped;
};

inline RateCore rate_core(const ShuttleParams& sp, double x) {
    RateCore c;
    double xr = x / sp.lambda;
    c.clamped = false;
    // e^{+-x/lambda} would overflow long before x gets here; physically the
    // dynamics never leaves |x| of order lambda, so a clamp with a
    // diagnostic beats silent inf.
    if (xr > 300.0) {
        xr = 300.0;
        c.clamped = true;
    } else if (xr < -300.0) {
        xr = -300.0;
        c.clamped = true;
    }
    c.wm = std::exp(-xr);
    c.wp = std::exp(xr);
    // dot level tracks the grain: e_d(x) = epsilon - alpha*V*x
    const double ed = sp.epsilon - sp.alpha * sp.V * x;
    c.fS = fermi(sp.beta * (ed - sp.mu_source()));
    c.fD = fermi(sp.beta * (ed - sp.mu_drain()));
    return c;
}

}  // namespace detail

// Sequential-tunneling rates at grain position x:
//   gin  = Gamma [ e^{-x/l} f_S + e^{+x/l} f_D ]
//   gout = Gamma [ e^{-x/l} (1-f_S) + e^{+x/l} (1-f_D) ]
// so gin + gout = 2 Gamma cosh(x/lambda) identically.
inline Rates rates(const ShuttleParams& sp, double x) {
    const auto c = detail::rate_core(sp, x);
    Rates r;
    r.gin = sp.Gamma * (c.wm * c.fS + c.wp * c.fD);
    r.gout = sp.Gamma * (c.wm * (1.0 - c.fS) + c.wp * (1.0 - c.fD));
    r.clamped = c.clamped;
    return r;
}

inline RatesDeriv rates_with_derivatives(const ShuttleParams& sp, double x) {
    const auto c = detail::rate_core(sp, x);
    RatesDeriv r;
    r.gin = sp.Gamma * (c.wm * c.fS + c.wp * c.fD);
    r.gout = sp.Gamma * (c.wm * (1.0 - c.fS) + c.wp * (1.0 - c.fD));
    r.clamped = c.clamped;
    // d/dx of the position factors (frozen at the clamp boundary), plus the
    // Fermi response to the moving dot level: df/dx = beta*alpha*V*f*(1-f)
    const double dwm = c.clamped ? 0.0 : -c.wm / sp.lambda;
    const double dwp = c.clamped ? 0.0 : c.wp / sp.lambda;
    const double bav = sp.beta * sp.alpha * sp.V;
    const double dfS = bav * c.fS * (1.0 - c.fS);
    const double dfD = bav * c.fD * (1.0 - c.fD);
    r.dgin_dx = sp.Gamma * (dwm * c.fS + c.wm * dfS + dwp * c.fD + c.wp * dfD);
    r.dgout_dx = sp.Gamma * (dwm * (1.0 - c.fS) - c.wm * dfS + dwp * (1.0 - c.fD) - c.wp * dfD);
    return r;
}

// A chain of N shuttles with nearest-neighbor elastic coupling and a
// three-site superlattice of mechanical frequencies
//   omega_l = Delta * (2 + cos(2 pi l b + phi)),  l = 1..N (1-based).
struct ChainParams {
    int N = 24;
    double Delta = 1.0;
    double g = 1.0;
    // superlattice wavenumber b = b_num/b_den (default 1/3, the trimer)
    long b_num = 1;
    long b_den = 3;
    double phi = 0.0;
    // when phi is an exact rational multiple of pi, keeping (p, q) lets
    // mirror-related sites get bit-identical frequencies
    bool phi_is_rational = false;
    long phi_p = 0;
    long phi_q = 1;
    ShuttleParams shuttle;
    std::vector<double> coupling_disorder;  // per bond delta-g, length N-1 (empty = clean)
    std::vector<double> omega_sites;        // explicit override (empty = superlattice rule)

    void set_phi(double value) {
        phi = value;
        phi_is_rational = false;
    }
    void set_phi_pi(long p, long q) {
        if (q <= 0) throw invalid_input("ChainParams: phi denominator must be positive");
        phi_p = p;
        phi_q = q;
        phi_is_rational = true;
        phi = std::numbers::pi_v<double> * static_cast<double>(p) / static_cast<double>(q);
    }

    void validate() const {
        if (N < 1) throw invalid_input("ChainParams: N must be at least 1");
        if (!(Delta > 0.0)) throw invalid_input("ChainParams: Delta must be positive");
        if (g < 0.0) throw invalid_input("ChainParams: g must be nonnegative");
        if (b_den <= 0) throw invalid_input("ChainParams: b denominator must be positive");
        if (!coupling_disorder.empty() && coupling_disorder.size() != static_cast<std::size_t>(N - 1))
            throw invalid_input("ChainParams: coupling_disorder must have N-1 entries");
        for (double dg : coupling_disorder)
            if (g + dg < 0.0) throw invalid_input("ChainParams: bond strength g+dg must stay nonnegative");
        if (!omega_sites.empty() && omega_sites.size() != static_cast<std::size_t>(N))
            throw invalid_input("ChainParams: omega_sites must have N entries");
        for (double w : omega_sites)
            if (!(w > 0.0)) throw invalid_input("ChainParams: omega_sites entries must be positive");
        shuttle.validate();
    }

    double bond_strength(int bond) const {  // bond i couples sites i and i+1 (0-based)
        double dg = coupling_disorder.empty() ? 0.0 : coupling_disorder[bond];
        return g + dg;
    }
};

namespace detail {

// Reduce t mod 2 for t = num/den >= 0, fold into [0, 1] using the evenness
// of cos(pi t), and divide out the gcd. Equal angles then compare equal as
// integers, so symmetry-related sites get bit-identical frequencies.
inline void reduce_cos_fraction(long long& num, long long& den) {
    num %= 2 * den;
    if (num < 0) num += 2 * den;
    if (num > den) num = 2 * den - num;
    const long long g = std::gcd(num, den);
    num /= g;
    den /= g;
}

}  // namespace detail

// Site frequencies omega_l, l = 1..N. Exact rational reduction of the
// angle keeps the three-site periodicity and any mirror symmetry exact in
// floating point, not just approximate.
inline std::vector<double> site_frequencies(const ChainParams& cp) {
    cp.validate();
    if (!cp.omega_sites.empty()) return cp.omega_sites;
    std::vector<double> w(cp.N);
    constexpr double pi = std::numbers::pi_v<double>;
    for (int l1 = 1; l1 <= cp.N; ++l1) {
        double c;
        if (cp.phi_is_rational) {
            // angle / pi = 2 l b_num/b_den + p/q as one exact fraction
            long long num = 2ll * l1 * cp.b_num * cp.phi_q + static_cast<long long>(cp.phi_p) * cp.b_den;
            long long den = static_cast<long long>(cp.b_den) * cp.phi_q;
            detail::reduce_cos_fraction(num, den);
            c = std::cos(pi * static_cast<double>(num) / static_cast<double>(den));
        } else {
            // keep the superlattice part exact, add the irrational offset
            long long num = 2ll * l1 * cp.b_num;
            long long den = cp.b_den;
            num %= 2 * den;
            const long long g = std::gcd(num, den);
            c = std::cos(pi * static_cast<double>(num / g) / static_cast<double>(den / g) + cp.phi);
        }
        w[l1 - 1] = cp.Delta * (2.0 + c);
    }
    return w;
}

// Stiffness matrix of the linear part: ddot x = -K x - gamma p + drive,
// K = tridiag(-(g+dg)^2, omega_l^2, -(g+dg)^2), open boundaries.
inline SymTridiagonal omega_matrix(const ChainParams& cp) {
    const auto w = site_frequencies(cp);
    SymTridiagonal k;
    k.diag.resize(cp.N);
    k.offdiag.resize(cp.N > 0 ? cp.N - 1 : 0);
    for (int l = 0; l < cp.N; ++l) k.diag[l] = w[l] * w[l];
    for (int b = 0; b + 1 < cp.N; ++b) {
        const double gb = cp.bond_strength(b);
        k.offdiag[b] = -gb * gb;
    }
    return k;
}

// Normal modes of the bare (charge-free) chain: K = O^T diag(Omega^2) O,
// rows of O are the mode shapes, Omega ascending.
struct NormalModeBasis {
    DenseMatrix O;               // N x N, rows are orthonormal mode vectors
    std::vector<double> Omega2;  // ascending
    std::vector<double> Omega;
    std::vector<double> row_sums;  // sum_l O_{k,l} per mode, used by collective coordinates
};

inline NormalModeBasis normal_modes(const ChainParams& cp) {
    const auto k = omega_matrix(cp);
    auto [vals, O] = eig_sym_tridiagonal(k);
    double scale = 0.0;
    for (double v : vals) scale = std::max(scale, std::abs(v));
    NormalModeBasis nm;
    nm.Omega2 = std::move(vals);
    nm.Omega.resize(nm.Omega2.size());
    for (std::size_t i = 0; i < nm.Omega2.size(); ++i) {
        if (nm.Omega2[i] < -1e-12 * std::max(scale, 1.0))
            throw numerical_error("normal_modes: stiffness matrix has a negative eigenvalue (" +
                                  std::to_string(nm.Omega2[i]) + "), chain is not stable");
        nm.Omega[i] = std::sqrt(std::max(nm.Omega2[i], 0.0));
    }
    nm.row_sums.resize(nm.Omega2.size());
    for (std::size_t r = 0; r < nm.Omega2.size(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < nm.Omega2.size(); ++c) s += O(r, c);
        nm.row_sums[r] = s;
    }
    nm.O = std::move(O);
    return nm;
}

// Dynamical state of the chain. Flat layout is [x(N), p(N), q(N)].
struct ChainState {
    std::vector<double> x, p, q;

    ChainState() = default;
    explicit ChainState(int N) : x(N, 0.0), p(N, 0.0), q(N, 0.0) {}

    std::size_t sites() const { return x.size(); }

    std::vector<double> flat() const {
        std::vector<double> y;
        y.reserve(3 * x.size());
        y.insert(y.end(), x.begin(), x.end());
        y.insert(y.end(), p.begin(), p.end());
        y.insert(y.end(), q.begin(), q.end());
        return y;
    }

    static ChainState from_flat(const std::vector<double>& y) {
        if (y.size() % 3 != 0) throw invalid_input("ChainState: flat vector length must be 3N");
        const std::size_t n = y.size() / 3;
        ChainState s;
        s.x.assign(y.begin(), y.begin() + n);
        s.p.assign(y.begin() + n, y.begin() + 2 * n);
        s.q.assign(y.begin() + 2 * n, y.end());
        return s;
    }
};

// Right-hand side of the chain equations of motion, precomputed for speed:
//   dx_l = p_l
//   dp_l = -omega_l^2 x_l - gamma p_l + alpha V q_l
//          + (g+dg)_{l-1}^2 x_{l-1} + (g+dg)_l^2 x_{l+1}
//   dq_l = gin(x_l) (1 - q_l) - gout(x_l) q_l
struct ChainField {
    ShuttleParams sp;
    int N;
    std::vector<double> omega2;
    std::vector<double> bond2;  // (g+dg)^2 per bond, length N-1
    mutable long clamp_events = 0;

    explicit ChainField(const ChainParams& cp) : sp(cp.shuttle), N(cp.N) {
        cp.validate();
        const auto w = site_frequencies(cp);
        omega2.resize(N);
        for (int l = 0; l < N; ++l) omega2[l] = w[l] * w[l];
        bond2.resize(N > 0 ? N - 1 : 0);
        for (int b = 0; b + 1 < N; ++b) {
            const double gb = cp.bond_strength(b);
            bond2[b] = gb * gb;
        }
    }

    std::size_t dim() const { return 3 * static_cast<std::size_t>(N); }

    void operator()(double /*t*/, const double* y, double* dydt) const {
        const double* x = y;
        const double* p = y + N;
        const double* q = y + 2 * N;
        const double av = sp.alpha * sp.V;
        for (int l = 0; l < N; ++l) {
            // neighbor terms are summed separately: addition is commutative
            // in IEEE arithmetic, so mirrored sites of a palindromic state
            // get bit-identical forces and exact symmetry is preserved
            double nb = 0.0;
            if (l > 0) nb += bond2[l - 1] * x[l - 1];
            if (l < N - 1) nb += bond2[l] * x[l + 1];
            const double force = (-omega2[l] * x[l] - sp.gamma * p[l] + av * q[l]) + nb;
            const auto r = rates(sp, x[l]);
            if (r.clamped) ++clamp_events;
            dydt[l] = p[l];
            dydt[N + l] = force;
            dydt[2 * N + l] = r.gin * (1.0 - q[l]) - r.gout * q[l];
        }
    }
};

inline ChainState vector_field_chain(const ChainParams& cp, const ChainState& s) {
    if (s.sites() != static_cast<std::size_t>(cp.N))
        throw invalid_input("vector_field_chain: state size does not match N");
    ChainField f(cp);
    const auto y = s.flat();
    std::vector<double> dy(y.size());
    f(0.0, y.data(), dy.data());
    return ChainState::from_flat(dy);
}

// The same field expressed in collective (normal-mode) coordinates
// X = O x, P = O p, charge kept site-local. This is an exact change of
// variables, not an approximation:
//   dX_k = P_k
//   dP_k = -Omega_k^2 X_k - gamma P_k + alpha V sum_l O_{k,l} q_l
//   dq_l = as above, evaluated at x_l = sum_k O_{k,l} X_k
struct CollectiveState {
    std::vector<double> X, P, q;
};

inline CollectiveState to_collective(const NormalModeBasis& nm, const ChainState& s) {
    const std::size_t n = s.sites();
    CollectiveState c;
    c.X.assign(n, 0.0);
    c.P.assign(n, 0.0);
    c.q = s.q;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) {
            c.X[k] += nm.O(k, l) * s.x[l];
            c.P[k] += nm.O(k, l) * s.p[l];
        }
    return c;
}

inline ChainState from_collective(const NormalModeBasis& nm, const CollectiveState& c) {
    const std::size_t n = c.X.size();
    ChainState s(static_cast<int>(n));
    s.q = c.q;
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t k = 0; k < n; ++k) {
            s.x[l] += nm.O(k, l) * c.X[k];
            s.p[l] += nm.O(k, l) * c.P[k];
        }
    return s;
}

inline CollectiveState vector_field_collective(const ChainParams& cp, const NormalModeBasis& nm,
                                               const CollectiveState& c) {
    const std::size_t n = c.X.size();
    if (n != static_cast<std::size_t>(cp.N))
        throw invalid_input("vector_field_collective: state size does not match N");
    const double av = cp.shuttle.alpha * cp.shuttle.V;
    CollectiveState d;
    d.X = c.P;
    d.P.assign(n, 0.0);
    d.q.assign(n, 0.0);
    std::vector<double> x(n, 0.0);
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t k = 0; k < n; ++k) x[l] += nm.O(k, l) * c.X[k];
    for (std::size_t l = 0; l < n; ++l) {
        const auto r = rates(cp.shuttle, x[l]);
        d.q[l] = r.gin * (1.0 - c.q[l]) - r.gout * c.q[l];
    }
    for (std::size_t k = 0; k < n; ++k) {
        double drive = 0.0;
        for (std::size_t l = 0; l < n; ++l) drive += nm.O(k, l) * c.q[l];
        d.P[k] = -nm.Omega2[k] * c.X[k] - cp.shuttle.gamma * c.P[k] + av * drive;
    }
    return d;
}

// Analytic Jacobian of the flat chain field at a given state. Row/column
// order matches the flat layout: x_l -> l, p_l -> N+l, q_l -> 2N+l.
inline DenseMatrix jacobian_chain(const ChainParams& cp, const ChainState& s) {
    cp.validate();
    const int N = cp.N;
    if (s.sites() != static_cast<std::size_t>(N))
        throw invalid_input("jacobian_chain: state size does not match N");
    const auto w = site_frequencies(cp);
    const double av = cp.shuttle.alpha * cp.shuttle.V;
    DenseMatrix J(3 * N, 3 * N);
    for (int l = 0; l < N; ++l) {
        J(l, N + l) = 1.0;                       // dx/dp
        J(N + l, l) = -w[l] * w[l];              // dp/dx (on-site)
        if (l > 0) {
            const double gb = cp.bond_strength(l - 1);
            J(N + l, l - 1) = gb * gb;
        }
        if (l < N - 1) {
            const double gb = cp.bond_strength(l);
            J(N + l, l + 1) = gb * gb;
        }
        J(N + l, N + l) = -cp.shuttle.gamma;     // dp/dp
        J(N + l, 2 * N + l) = av;                // dp/dq
        const auto r = rates_with_derivatives(cp.shuttle, s.x[l]);
        J(2 * N + l, l) = r.dgin_dx * (1.0 - s.q[l]) - r.dgout_dx * s.q[l];  // dq/dx
        J(2 * N + l, 2 * N + l) = -(r.gin + r.gout);                         // dq/dq
    }
    return J;
}

}  // namespace shuttlechain
