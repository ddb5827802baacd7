#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "shuttlechain/common.hpp"
#include "shuttlechain/linalg.hpp"
#include "shuttlechain/model.hpp"
#include "shuttlechain/parallel.hpp"

namespace shuttlechain {

using Bloch3 = std::array<std::array<cplx, 3>, 3>;

// Bloch stiffness matrix of the clean infinite trimer chain at crystal
// momentum k (one cell = sites l = 1, 2, 3):
//   diag(omega_1^2, omega_2^2, omega_3^2), intra-cell bonds -g^2,
//   inter-cell bond (site 3 -> next cell's site 1) carries the phase:
//   H[2][0] = -g^2 e^{ik}. Hermitian by construction.
inline Bloch3 bloch_matrix(const ChainParams& cp, double k) {
    ChainParams unit = cp;
    unit.N = 3;
    unit.coupling_disorder.clear();  // the Bloch picture is for the clean chain
    if (!cp.omega_sites.empty()) {
        if (cp.omega_sites.size() < 3)
            throw invalid_input("bloch_matrix: omega_sites override needs at least one full cell");
        unit.omega_sites.assign(cp.omega_sites.begin(), cp.omega_sites.begin() + 3);
    }
    const auto w = site_frequencies(unit);
    const double g2 = cp.g * cp.g;
    Bloch3 h{};
    for (int i = 0; i < 3; ++i) h[i][i] = w[i] * w[i];
    h[0][1] = h[1][0] = -g2;
    h[1][2] = h[2][1] = -g2;
    h[2][0] = -g2 * std::polar(1.0, k);
    h[0][2] = std::conj(h[2][0]);
    return h;
}

// Eigen-decomposition of a 3x3 Hermitian matrix through the real symmetric
// 6x6 embedding M = [[A, -B], [B, A]] of H = A + iB. Every eigenvalue of H
// shows up twice in M; a real eigenvector (u; v) of either copy maps back to
// the same complex eigenline z = u + iv, so downstream gauge-invariant
// quantities do not care which copy is picked.
struct HermitianEig3 {
    std::array<double, 3> values;                 // ascending
    std::array<std::array<cplx, 3>, 3> vectors;   // vectors[b] is band b, unit norm
};

inline HermitianEig3 hermitian_eig3(const Bloch3& h) {
    double scale = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) scale = std::max(scale, std::abs(h[i][j]));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (std::abs(h[i][j] - std::conj(h[j][i])) > 1e-14 * std::max(scale, 1.0))
                throw invalid_input("hermitian_eig3: matrix is not Hermitian");

    DenseMatrix m(6, 6);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double a = h[i][j].real(), b = h[i][j].imag();
            m(i, j) = a;
            m(i + 3, j + 3) = a;
            m(i, j + 3) = -b;
            m(i + 3, j) = b;
        }
    auto sp = eig_general(m, true);

    // eig_general sorts descending; collect ascending and pair up duplicates
    std::array<std::size_t, 6> idx{5, 4, 3, 2, 1, 0};
    HermitianEig3 out;
    for (int b = 0; b < 3; ++b) {
        const std::size_t i0 = idx[2 * b], i1 = idx[2 * b + 1];
        const double v0 = sp.values[i0].real(), v1 = sp.values[i1].real();
        if (std::abs(sp.values[i0].imag()) > 1e-10 * std::max(scale, 1.0) ||
            std::abs(v0 - v1) > 1e-8 * std::max(scale, 1.0))
            throw numerical_error("hermitian_eig3: embedded pair structure lost (pair " +
                                  std::to_string(b) + " split " + std::to_string(v0 - v1) + ")");
        out.values[b] = 0.5 * (v0 + v1);
        const auto ev = sp.eigenvector(i0);
        double norm2 = 0.0;
        for (int r = 0; r < 3; ++r) {
            out.vectors[b][r] = cplx(ev[r].real(), 0.0) + cplx(0.0, 1.0) * ev[r + 3].real();
            norm2 += std::norm(out.vectors[b][r]);
        }
        if (norm2 <= 0.0) throw numerical_error("hermitian_eig3: zero embedded eigenvector");
        const double inv = 1.0 / std::sqrt(norm2);
        for (int r = 0; r < 3; ++r) out.vectors[b][r] *= inv;
    }
    for (int b = 0; b + 1 < 3; ++b)
        if (out.values[b] > out.values[b + 1])
            throw numerical_error("hermitian_eig3: band ordering lost");
    return out;
}

// Largest violation of the bulk inversion relation P H(k) P = H(-k) over a
// sample of momenta, with P the site-reversal (antidiagonal) matrix. Zero at
// inversion-symmetric superlattice phases, order one elsewhere.
inline double inversion_check(const ChainParams& cp, int n_samples = 64) {
    if (n_samples < 2) throw invalid_input("inversion_check: need at least 2 samples");
    double worst = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        const double k = 2.0 * std::numbers::pi_v<double> * s / n_samples;
        const auto hp = bloch_matrix(cp, k);
        const auto hm = bloch_matrix(cp, -k);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                worst = std::max(worst, std::abs(hp[2 - i][2 - j] - hm[i][j]));
    }
    return worst;
}

struct ChernResult {
    std::array<int, 3> chern{};           // rounded band Chern numbers
    std::array<double, 3> residual{};     // |raw - rounded|
    std::array<double, 3> raw{};          // plaquette sums / 2 pi
    std::vector<DenseMatrix> field_strength;  // per band, n_k x n_phi Berry curvature
    int n_k = 0, n_phi = 0;
};

// Chern numbers on the (k, phi) torus from a caller-supplied band basis.
// `bands(ik, ip)` must return the 3 eigenvectors at grid node
// (k = 2 pi ik / n_k, phi = 2 pi ip / n_phi). Any smooth or random gauge
// gives the same result; that invariance is part of the test suite.
inline ChernResult chern_from_vectors(
    int n_k, int n_phi,
    const std::function<std::array<std::array<cplx, 3>, 3>(int, int)>& bands, unsigned threads = 1) {
    if (n_k < 4 || n_phi < 4) throw invalid_input("chern: grid must be at least 4x4");

    // cache all node bases first (parallel), then accumulate plaquettes
    std::vector<std::array<std::array<cplx, 3>, 3>> node(static_cast<std::size_t>(n_k) * n_phi);
    parallel_for(node.size(), threads, [&](std::size_t n) {
        const int ik = static_cast<int>(n) % n_k;
        const int ip = static_cast<int>(n) / n_k;
        node[n] = bands(ik, ip);
    });
    const auto at = [&](int ik, int ip) -> const std::array<std::array<cplx, 3>, 3>& {
        return node[static_cast<std::size_t>((ip % n_phi + n_phi) % n_phi) * n_k +
                    static_cast<std::size_t>((ik % n_k + n_k) % n_k)];
    };
    const auto overlap = [](const std::array<cplx, 3>& a, const std::array<cplx, 3>& b) {
        cplx s(0, 0);
        for (int r = 0; r < 3; ++r) s += std::conj(a[r]) * b[r];
        return s;
    };

    ChernResult res;
    res.n_k = n_k;
    res.n_phi = n_phi;
    res.field_strength.assign(3, DenseMatrix(n_k, n_phi));
    for (int b = 0; b < 3; ++b) {
        double total = 0.0;
        for (int ik = 0; ik < n_k; ++ik)
            for (int ip = 0; ip < n_phi; ++ip) {
                const cplx lk00 = overlap(at(ik, ip)[b], at(ik + 1, ip)[b]);
                const cplx lp00 = overlap(at(ik, ip)[b], at(ik, ip + 1)[b]);
                const cplx lk01 = overlap(at(ik, ip + 1)[b], at(ik + 1, ip + 1)[b]);
                const cplx lp10 = overlap(at(ik + 1, ip)[b], at(ik + 1, ip + 1)[b]);
                const double floor = 1e-12;
                if (std::abs(lk00) < floor || std::abs(lp00) < floor || std::abs(lk01) < floor ||
                    std::abs(lp10) < floor)
                    throw numerical_error("chern: vanishing link at plaquette (ik=" +
                                          std::to_string(ik) + ", iphi=" + std::to_string(ip) +
                                          ", band=" + std::to_string(b) +
                                          "); bands may touch, refine the grid");
                // plaquette in the phi-link-first orientation
                const double f = std::arg(lp00 * lk01 * std::conj(lp10) * std::conj(lk00));
                res.field_strength[b](ik, ip) = f;
                total += f;
            }
        res.raw[b] = total / (2.0 * std::numbers::pi_v<double>);
        res.chern[b] = static_cast<int>(std::lround(res.raw[b]));
        res.residual[b] = std::abs(res.raw[b] - res.chern[b]);
        if (res.residual[b] > 1e-3)
            throw numerical_error("chern: band " + std::to_string(b) + " sum " +
                                  std::to_string(res.raw[b]) +
                                  " is not near an integer; refine the grid");
    }
    if (res.chern[0] + res.chern[1] + res.chern[2] != 0)
        throw numerical_error("chern: band Chern numbers do not sum to zero");
    return res;
}

// Chern numbers of the three trimer bands over the (k, phi) torus,
// discretized on an n_k x n_phi grid of gauge-invariant plaquettes.
inline ChernResult chern_numbers(const ChainParams& cp, int n_k = 64, int n_phi = 64,
                                 unsigned threads = 1) {
    cp.validate();
    const double two_pi = 2.0 * std::numbers::pi_v<double>;
    const double band_gap_floor = 1e-10;
    return chern_from_vectors(
        n_k, n_phi,
        [&](int ik, int ip) {
            const double k = two_pi * ik / n_k;
            ChainParams local = cp;
            local.set_phi(two_pi * ip / n_phi);
            const auto eig = hermitian_eig3(bloch_matrix(local, k));
            for (int b = 0; b + 1 < 3; ++b)
                if (eig.values[b + 1] - eig.values[b] < band_gap_floor)
                    throw numerical_error("chern: band degeneracy at grid node (ik=" +
                                          std::to_string(ik) + ", iphi=" + std::to_string(ip) +
                                          "), gap below 1e-10");
            return eig.vectors;
        },
        threads);
}

// Share of a normalized mode vector living on the first and last cell, and
// its participation ratio 1/sum v^4 (in [1, N]; small = localized).
struct Localization {
    double left = 0.0, right = 0.0, participation = 0.0;
};

inline Localization localization_measure(const std::vector<double>& v) {
    const std::size_t n = v.size();
    if (n < 3) throw invalid_input("localization_measure: vector must cover at least one cell");
    double norm2 = 0.0, p4 = 0.0;
    for (double c : v) {
        norm2 += c * c;
        p4 += c * c * c * c;
    }
    if (norm2 <= 0.0) throw invalid_input("localization_measure: zero vector");
    Localization loc;
    for (std::size_t l = 0; l < 3; ++l) loc.left += v[l] * v[l];
    for (std::size_t l = n - 3; l < n; ++l) loc.right += v[l] * v[l];
    loc.left /= norm2;
    loc.right /= norm2;
    loc.participation = norm2 * norm2 / p4;
    return loc;
}

// Open-chain normal-mode spectrum as a function of the superlattice phase.
struct SpectrumSweep {
    std::vector<double> phi;              // n_phi values
    std::vector<std::vector<double>> Omega;  // [i_phi][state], ascending
    std::vector<std::vector<Localization>> loc;
};

inline SpectrumSweep spectrum_sweep(const ChainParams& cp, double phi_min, double phi_max, int n_phi,
                                    unsigned threads = 1) {
    if (n_phi < 2) throw invalid_input("spectrum_sweep: need at least 2 phase samples");
    cp.validate();
    SpectrumSweep out;
    out.phi.resize(n_phi);
    out.Omega.resize(n_phi);
    out.loc.resize(n_phi);
    for (int i = 0; i < n_phi; ++i)
        out.phi[i] = phi_min + (phi_max - phi_min) * i / (n_phi - 1);
    parallel_for(static_cast<std::size_t>(n_phi), threads, [&](std::size_t i) {
        ChainParams local = cp;
        local.set_phi(out.phi[i]);
        const auto nm = normal_modes(local);
        out.Omega[i] = nm.Omega;
        out.loc[i].resize(nm.Omega.size());
        std::vector<double> row(cp.N);
        for (int s = 0; s < cp.N; ++s) {
            for (int l = 0; l < cp.N; ++l) row[l] = nm.O(s, l);
            out.loc[i][s] = localization_measure(row);
        }
    });
    return out;
}

}  // namespace shuttlechain
