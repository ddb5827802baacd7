// Band-structure toolkit: Bloch matrix, inversion diagnostic, Chern numbers
// (integer values, gauge invariance, grid stability), open-chain spectra and
// edge localization.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "shuttlechain/rng.hpp"
#include "shuttlechain/topology.hpp"

using namespace shuttlechain;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi_v<double>;

ChainParams trimer(int N) {
    ChainParams cp;
    cp.N = N;
    cp.set_phi_pi(2, 3);
    return cp;
}

}  // namespace

TEST_CASE("Bloch matrix") {
    SECTION("g = 0: diagonal, flat in k") {
        auto cp = trimer(3);
        cp.g = 0.0;
        const auto h0 = bloch_matrix(cp, 0.0);
        const auto h1 = bloch_matrix(cp, 1.3);
        const auto w = site_frequencies(cp);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                if (i == j) {
                    CHECK(h0[i][i].real() == Approx(w[i] * w[i]).epsilon(1e-15));
                    CHECK(h0[i][i] == h1[i][i]);
                } else {
                    CHECK(std::abs(h0[i][j]) == 0.0);
                }
            }
    }

    SECTION("k = 0, phi = 2pi/3: real symmetric with the documented entries") {
        const auto h = bloch_matrix(trimer(24), 0.0);
        CHECK(h[0][0].real() == Approx(2.25).margin(1e-14));
        CHECK(h[1][1].real() == Approx(9.0).margin(1e-14));
        CHECK(h[2][2].real() == Approx(2.25).margin(1e-14));
        CHECK(h[0][1].real() == Approx(-1.0).margin(1e-14));
        CHECK(h[1][2].real() == Approx(-1.0).margin(1e-14));
        CHECK(h[2][0].real() == Approx(-1.0).margin(1e-14));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(std::abs(h[i][j].imag()) < 1e-14);
    }

    SECTION("Hermiticity and k -> -k spectral symmetry") {
        auto cp = trimer(24);
        for (double k : {0.0, 0.7, 1.9, 3.0, 5.5}) {
            const auto h = bloch_matrix(cp, k);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    CHECK(std::abs(h[i][j] - std::conj(h[j][i])) < 1e-14);
            const auto ep = hermitian_eig3(bloch_matrix(cp, k));
            const auto em = hermitian_eig3(bloch_matrix(cp, -k));
            for (int b = 0; b < 3; ++b)
                CHECK(ep.values[b] == Approx(em.values[b]).epsilon(1e-12).margin(1e-12));
        }
    }
}

TEST_CASE("inversion symmetry diagnostic") {
    auto cp = trimer(24);
    CHECK(inversion_check(cp) < 1e-12);

    cp.set_phi_pi(5, 3);
    CHECK(inversion_check(cp) < 1e-12);

    cp.set_phi_pi(1, 2);
    CHECK(inversion_check(cp) > 0.1 * cp.Delta * cp.Delta);
}

TEST_CASE("Chern numbers of the trimer bands") {
    SECTION("reference parameters: (1, -2, 1), zero sum, small residual") {
        const auto res = chern_numbers(trimer(24), 64, 64, 2);
        CHECK(res.chern[0] == 1);
        CHECK(res.chern[1] == -2);
        CHECK(res.chern[2] == 1);
        CHECK(res.chern[0] + res.chern[1] + res.chern[2] == 0);
        for (int b = 0; b < 3; ++b) CHECK(res.residual[b] < 1e-6);
    }

    SECTION("same integers in the near-flat limit g = 0.01") {
        auto cp = trimer(24);
        cp.g = 0.01;
        const auto res = chern_numbers(cp, 64, 64, 2);
        CHECK(res.chern[0] == 1);
        CHECK(res.chern[1] == -2);
        CHECK(res.chern[2] == 1);
    }

    SECTION("gauge invariance under random per-node phases") {
        const auto cp = trimer(24);
        const int n = 32;
        Rng rng(271828);
        // precompute random phases so the gauge is a fixed (if wild) function
        std::vector<double> theta(static_cast<std::size_t>(n) * n * 3);
        for (auto& t : theta) t = rng.uniform(0.0, 2.0 * pi);
        const auto bands = [&](int ik, int ip) {
            ChainParams local = cp;
            local.set_phi(2.0 * pi * ip / n);
            auto eig = hermitian_eig3(bloch_matrix(local, 2.0 * pi * ik / n));
            for (int b = 0; b < 3; ++b) {
                const cplx ph = std::polar(1.0, theta[(static_cast<std::size_t>(ip) * n + ik) * 3 + b]);
                for (int r = 0; r < 3; ++r) eig.vectors[b][r] *= ph;
            }
            return eig.vectors;
        };
        const auto res = chern_from_vectors(n, n, bands, 2);
        CHECK(res.chern[0] == 1);
        CHECK(res.chern[1] == -2);
        CHECK(res.chern[2] == 1);
    }

    SECTION("grid refinement does not change the integers") {
        const auto cp = trimer(24);
        const auto a = chern_numbers(cp, 16, 16, 2);
        const auto b = chern_numbers(cp, 32, 32, 2);
        const auto c = chern_numbers(cp, 64, 64, 2);
        CHECK(a.chern == b.chern);
        CHECK(b.chern == c.chern);
    }

    SECTION("tiny grids are rejected") {
        CHECK_THROWS_AS(chern_numbers(trimer(24), 2, 2), invalid_input);
    }
}

TEST_CASE("open-chain spectrum sweep") {
    SECTION("midgap edge pair at phi = 2pi/3") {
        const auto sweep = spectrum_sweep(trimer(24), 2.0 * pi / 3.0, 2.0 * pi / 3.0 + 1e-9, 2, 1);
        const auto& Om = sweep.Omega[0];
        const auto& loc = sweep.loc[0];
        REQUIRE(Om.size() == 24);
        REQUIRE(std::is_sorted(Om.begin(), Om.end()));
        // states 8 and 9 (ascending) are the midgap pair
        CHECK(Om[8] - Om[7] < 1e-3);
        CHECK(loc[7].left + loc[7].right > 0.9);
        CHECK(loc[8].left + loc[8].right > 0.9);
        // two-sided: the symmetric/antisymmetric pair splits its weight evenly
        CHECK(loc[7].left == Approx(loc[7].right).margin(0.05));
    }

    SECTION("one-sided midgap state away from the symmetric point") {
        ChainParams cp = trimer(24);
        cp.set_phi_pi(1, 2);
        const auto sweep = spectrum_sweep(cp, cp.phi, cp.phi + 1e-9, 2, 1);
        const auto& Om = sweep.Omega[0];
        const auto& loc = sweep.loc[0];
        // find the most localized state (largest single-end weight)
        double best = 0.0;
        std::size_t bi = 0;
        for (std::size_t i = 0; i < Om.size(); ++i) {
            const double w = std::max(loc[i].left, loc[i].right);
            if (w > best) {
                best = w;
                bi = i;
            }
        }
        CHECK(best > 0.9);
        CHECK(std::min(loc[bi].left, loc[bi].right) < 0.1);
    }

    SECTION("three bands and two gaps at the symmetric point") {
        const auto sweep = spectrum_sweep(trimer(24), 2.0 * pi / 3.0, 2.0 * pi / 3.0 + 1e-9, 2, 1);
        const auto& Om = sweep.Omega[0];
        const auto& loc = sweep.loc[0];
        std::vector<double> bulk;
        for (std::size_t i = 0; i < Om.size(); ++i)
            if (loc[i].left + loc[i].right < 0.5) bulk.push_back(Om[i]);
        REQUIRE(bulk.size() == 22);  // 24 states minus the midgap edge pair
        int gaps = 0;
        for (std::size_t i = 1; i < bulk.size(); ++i)
            if (bulk[i] - bulk[i - 1] > 0.2) ++gaps;
        CHECK(gaps == 2);
    }

    SECTION("bulk states stay inside the Bloch band envelopes") {
        auto cp = trimer(24);
        const auto sweep = spectrum_sweep(cp, 2.0 * pi / 3.0, 2.0 * pi / 3.0 + 1e-9, 2, 1);
        // envelope of each band over a dense k grid
        std::array<double, 3> bmin{1e300, 1e300, 1e300}, bmax{-1e300, -1e300, -1e300};
        for (int s = 0; s < 256; ++s) {
            const auto eig = hermitian_eig3(bloch_matrix(cp, 2.0 * pi * s / 256.0));
            for (int b = 0; b < 3; ++b) {
                bmin[b] = std::min(bmin[b], eig.values[b]);
                bmax[b] = std::max(bmax[b], eig.values[b]);
            }
        }
        const double margin = 5.0 * cp.g * cp.g / cp.N;
        for (std::size_t i = 0; i < sweep.Omega[0].size(); ++i) {
            if (sweep.loc[0][i].left + sweep.loc[0][i].right > 0.5) continue;  // edge states live in gaps
            const double O2 = sweep.Omega[0][i] * sweep.Omega[0][i];
            bool inside = false;
            for (int b = 0; b < 3; ++b)
                if (O2 >= bmin[b] - margin && O2 <= bmax[b] + margin) inside = true;
            CHECK(inside);
        }
    }
}

TEST_CASE("localization measure") {
    SECTION("unit vector on the first site") {
        std::vector<double> v(24, 0.0);
        v[0] = 1.0;
        const auto loc = localization_measure(v);
        CHECK(loc.left == Approx(1.0));
        CHECK(loc.right == Approx(0.0).margin(1e-15));
        CHECK(loc.participation == Approx(1.0));
    }

    SECTION("uniform vector") {
        std::vector<double> v(24, 1.0 / std::sqrt(24.0));
        const auto loc = localization_measure(v);
        CHECK(loc.left == Approx(3.0 / 24.0).epsilon(1e-12));
        CHECK(loc.right == Approx(3.0 / 24.0).epsilon(1e-12));
        CHECK(loc.participation == Approx(24.0).epsilon(1e-12));
    }

    SECTION("exponential profile matches direct summation") {
        std::vector<double> v(24);
        for (int l = 0; l < 24; ++l) v[l] = std::exp(-l / 2.0);
        double norm2 = 0.0;
        for (double c : v) norm2 += c * c;
        double left = 0.0, right = 0.0, p4 = 0.0;
        for (int l = 0; l < 3; ++l) left += v[l] * v[l];
        for (int l = 21; l < 24; ++l) right += v[l] * v[l];
        for (double c : v) p4 += c * c * c * c;
        const auto loc = localization_measure(v);
        CHECK(loc.left == Approx(left / norm2).epsilon(1e-12));
        CHECK(loc.right == Approx(right / norm2).epsilon(1e-12));
        CHECK(loc.participation == Approx(norm2 * norm2 / p4).epsilon(1e-12));
    }

    SECTION("degenerate inputs rejected") {
        CHECK_THROWS_AS(localization_measure(std::vector<double>(24, 0.0)), invalid_input);
        CHECK_THROWS_AS(localization_measure(std::vector<double>{1.0, 0.0}), invalid_input);
    }
}
