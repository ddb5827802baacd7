#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "shuttlechain/common.hpp"

namespace shuttlechain {

using cplx = std::complex<double>;

// Real symmetric tridiagonal matrix, stored as its two bands.
struct SymTridiagonal {
    std::vector<double> diag;     // length N
    std::vector<double> offdiag;  // length N-1

    std::size_t size() const { return diag.size(); }

    void validate() const {
        if (diag.empty() || offdiag.size() + 1 != diag.size())
            throw invalid_input("SymTridiagonal: offdiag length must be diag length - 1");
    }
};

// Row-major dense real matrix.
struct DenseMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;  // rows*cols, row-major

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    DenseMatrix transposed() const {
        DenseMatrix t(cols, rows);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : a) m = std::max(m, std::abs(v));
        return m;
    }
};

inline DenseMatrix matmul(const DenseMatrix& x, const DenseMatrix& y) {
    if (x.cols != y.rows) throw invalid_input("matmul: dimension mismatch");
    DenseMatrix z(x.rows, y.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t k = 0; k < x.cols; ++k) {
            const double v = x(i, k);
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < y.cols; ++j) z(i, j) += v * y(k, j);
        }
    return z;
}

// Eigenvalues (and optionally eigenvectors) of a real matrix. Vectors are
// stored as in the classical real Schur approach: a real eigenvalue owns one
// real column; a conjugate pair (re +- i*im, im > 0) owns two consecutive
// columns holding the real and imaginary parts of the eigenvector of the
// +im member. `column` and `imag_sign` map each value to that storage.
struct ComplexSpectrum {
    std::vector<cplx> values;
    bool has_vectors = false;
    DenseMatrix vectors;            // n x n, layout described above
    std::vector<std::size_t> column;  // per value: first storage column
    std::vector<int> imag_sign;       // per value: 0 real, +1 or -1 pair member

    std::size_t size() const { return values.size(); }

    // Unit-norm complex eigenvector for value i.
    std::vector<cplx> eigenvector(std::size_t i) const {
        if (!has_vectors) throw invalid_input("ComplexSpectrum: vectors not computed");
        const std::size_t n = vectors.rows;
        std::vector<cplx> v(n);
        double norm2 = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            double re = vectors(r, column[i]);
            double im = imag_sign[i] == 0 ? 0.0 : imag_sign[i] * vectors(r, column[i] + 1);
            v[r] = cplx(re, im);
            norm2 += re * re + im * im;
        }
        const double nrm = std::sqrt(norm2);
        if (nrm == 0.0) throw numerical_error("ComplexSpectrum: zero eigenvector");
        for (auto& z : v) z /= nrm;
        return v;
    }
};

namespace detail {

inline void complex_divide(double xr, double xi, double yr, double yi, double& cr, double& ci) {
    if (std::abs(yr) > std::abs(yi)) {
        const double r = yi / yr, d = yr + r * yi;
        cr = (xr + r * xi) / d;
        ci = (xi - r * xr) / d;
    } else {
        const double r = yr / yi, d = yi + r * yr;
        cr = (r * xr + xi) / d;
        ci = (r * xi - xr) / d;
    }
}

}  // namespace detail

// Symmetric tridiagonal eigendecomposition by the implicit-shift QL sweep.
// Returns ascending eigenvalues and the orthogonal transform O whose ROWS are
// the eigenvectors: O * m * O^T = diag(eigenvalues).
inline std::pair<std::vector<double>, DenseMatrix> eig_sym_tridiagonal(const SymTridiagonal& m) {
    m.validate();
    const std::size_t n = m.size();
    std::vector<double> d = m.diag;
    std::vector<double> e(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) e[i] = m.offdiag[i];

    DenseMatrix V = DenseMatrix::identity(n);  // columns accumulate eigenvectors
    const double eps = std::ldexp(1.0, -52);
    double f = 0.0, tst1 = 0.0;
    constexpr int iter_cap = 50;

    for (std::size_t l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
        std::size_t mm = l;
        while (mm < n) {
            if (std::abs(e[mm]) <= eps * tst1) break;
            ++mm;
        }
        if (mm > l) {
            int iter = 0;
            do {
                if (++iter > iter_cap)
                    throw numerical_error("eig_sym_tridiagonal: QL iteration cap exceeded");
                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0) r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
                f += h;

                p = d[mm];
                double c = 1.0, c2 = c, c3 = c;
                const double el1 = e[l + 1];
                double s = 0.0, s2 = 0.0;
                for (std::size_t ii = mm; ii-- > l;) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[ii];
                    h = c * p;
                    r = std::hypot(p, e[ii]);
                    e[ii + 1] = s * r;
                    s = e[ii] / r;
                    c = p / r;
                    p = c * d[ii] - s * g;
                    d[ii + 1] = h + s * (c * g + s * d[ii]);
                    for (std::size_t k = 0; k < n; ++k) {
                        h = V(k, ii + 1);
                        V(k, ii + 1) = s * V(k, ii) + c * h;
                        V(k, ii) = c * V(k, ii) - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
            } while (std::abs(e[l]) > eps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // ascending order, column swaps keep vectors attached
    for (std::size_t i = 0; i + 1 < n; ++i) {
        std::size_t k = i;
        double p = d[i];
        for (std::size_t j = i + 1; j < n; ++j)
            if (d[j] < p) {
                k = j;
                p = d[j];
            }
        if (k != i) {
            std::swap(d[k], d[i]);
            for (std::size_t r = 0; r < n; ++r) std::swap(V(r, i), V(r, k));
        }
    }

    // deterministic sign: largest-magnitude component of each vector positive
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t imax = 0;
        double amax = -1.0;
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(V(i, j)) > amax) {
                amax = std::abs(V(i, j));
                imax = i;
            }
        if (V(imax, j) < 0.0)
            for (std::size_t i = 0; i < n; ++i) V(i, j) = -V(i, j);
    }

    return {std::move(d), V.transposed()};
}

namespace detail {

// Householder reduction to upper Hessenberg form, accumulating the transform.
inline void hessenberg(DenseMatrix& H, DenseMatrix& V) {
    const std::size_t n = H.rows;
    if (n < 3) {
        V = DenseMatrix::identity(n);
        return;
    }
    const std::size_t low = 0, high = n - 1;
    std::vector<double> ort(n, 0.0);

    for (std::size_t m = low + 1; m <= high - 1; ++m) {
        double scale = 0.0;
        for (std::size_t i = m; i <= high; ++i) scale += std::abs(H(i, m - 1));
        if (scale != 0.0) {
            double h = 0.0;
            for (std::size_t i = high + 1; i-- > m;) {
                ort[i] = H(i, m - 1) / scale;
                h += ort[i] * ort[i];
            }
            double g = std::sqrt(h);
            if (ort[m] > 0) g = -g;
            h -= ort[m] * g;
            ort[m] -= g;

            for (std::size_t j = m; j < n; ++j) {
                double ff = 0.0;
                for (std::size_t i = high + 1; i-- > m;) ff += ort[i] * H(i, j);
                ff /= h;
                for (std::size_t i = m; i <= high; ++i) H(i, j) -= ff * ort[i];
            }
            for (std::size_t i = 0; i <= high; ++i) {
                double ff = 0.0;
                for (std::size_t j = high + 1; j-- > m;) ff += ort[j] * H(i, j);
                ff /= h;
                for (std::size_t j = m; j <= high; ++j) H(i, j) -= ff * ort[j];
            }
            ort[m] = scale * ort[m];
            H(m, m - 1) = scale * g;
        }
    }

    V = DenseMatrix::identity(n);
    for (std::size_t m = high - 1; m >= low + 1; --m) {
        if (H(m, m - 1) != 0.0) {
            for (std::size_t i = m + 1; i <= high; ++i) ort[i] = H(i, m - 1);
            for (std::size_t j = m; j <= high; ++j) {
                double g = 0.0;
                for (std::size_t i = m; i <= high; ++i) g += ort[i] * V(i, j);
                g = (g / ort[m]) / H(m, m - 1);
                for (std::size_t i = m; i <= high; ++i) V(i, j) += g * ort[i];
            }
        }
        if (m == 1) break;
    }
}

// Francis double-shift QR on a real Hessenberg matrix; fills eigenvalue
// arrays dr/di and, when requested, overwrites V with the eigenvector basis
// in conjugate-pair column layout. Classical hqr2 scheme.
inline void hqr2(DenseMatrix& H, DenseMatrix& V, std::vector<double>& dr, std::vector<double>& di,
                 bool with_vectors) {
    const int nn = static_cast<int>(H.rows);
    int en = nn - 1;
    const int low = 0, high = nn - 1;
    const double eps = std::ldexp(1.0, -52);
    double exshift = 0.0;
    double p = 0, q = 0, r = 0, s = 0, z = 0, t, w, x, y;
    constexpr int iter_cap = 100;  // per deflated eigenvalue

    dr.assign(nn, 0.0);
    di.assign(nn, 0.0);

    double norm = 0.0;
    for (int i = 0; i < nn; ++i)
        for (int j = std::max(i - 1, 0); j < nn; ++j) norm += std::abs(H(i, j));
    if (norm == 0.0) return;  // zero matrix: all eigenvalues zero, V identity

    int iter = 0;
    while (en >= low) {
        int l = en;
        while (l > low) {
            s = std::abs(H(l - 1, l - 1)) + std::abs(H(l, l));
            if (s == 0.0) s = norm;
            if (std::abs(H(l, l - 1)) < eps * s) break;
            --l;
        }

        if (l == en) {
            H(en, en) += exshift;
            dr[en] = H(en, en);
            di[en] = 0.0;
            --en;
            iter = 0;
        } else if (l == en - 1) {
            w = H(en, en - 1) * H(en - 1, en);
            p = (H(en - 1, en - 1) - H(en, en)) / 2.0;
            q = p * p + w;
            z = std::sqrt(std::abs(q));
            H(en, en) += exshift;
            H(en - 1, en - 1) += exshift;
            x = H(en, en);

            if (q >= 0) {  // real pair
                z = (p >= 0) ? p + z : p - z;
                dr[en - 1] = x + z;
                dr[en] = dr[en - 1];
                if (z != 0.0) dr[en] = x - w / z;
                di[en - 1] = 0.0;
                di[en] = 0.0;
                x = H(en, en - 1);
                s = std::abs(x) + std::abs(z);
                p = x / s;
                q = z / s;
                r = std::sqrt(p * p + q * q);
                p /= r;
                q /= r;
                for (int j = en - 1; j < nn; ++j) {
                    z = H(en - 1, j);
                    H(en - 1, j) = q * z + p * H(en, j);
                    H(en, j) = q * H(en, j) - p * z;
                }
                for (int i = 0; i <= en; ++i) {
                    z = H(i, en - 1);
                    H(i, en - 1) = q * z + p * H(i, en);
                    H(i, en) = q * H(i, en) - p * z;
                }
                for (int i = low; i <= high; ++i) {
                    z = V(i, en - 1);
                    V(i, en - 1) = q * z + p * V(i, en);
                    V(i, en) = q * V(i, en) - p * z;
                }
            } else {  // complex pair
                dr[en - 1] = x + p;
                dr[en] = x + p;
                di[en - 1] = z;
                di[en] = -z;
            }
            en -= 2;
            iter = 0;
        } else {
            x = H(en, en);
            y = 0.0;
            w = 0.0;
            if (l < en) {
                y = H(en - 1, en - 1);
                w = H(en, en - 1) * H(en - 1, en);
            }

            if (iter == 10 || iter == 20) {  // exceptional shift
                exshift += x;
                for (int i = low; i <= en; ++i) H(i, i) -= x;
                s = std::abs(H(en, en - 1)) + std::abs(H(en - 1, en - 2));
                x = y = 0.75 * s;
                w = -0.4375 * s * s;
            }
            if (iter == 30) {
                s = (y - x) / 2.0;
                s = s * s + w;
                if (s > 0) {
                    s = std::sqrt(s);
                    if (y < x) s = -s;
                    s = x - w / ((y - x) / 2.0 + s);
                    for (int i = low; i <= en; ++i) H(i, i) -= s;
                    exshift += s;
                    x = y = w = 0.964;
                }
            }
            if (++iter > iter_cap) throw numerical_error("eig_general: QR iteration cap exceeded");

            int m = en - 2;
            while (m >= l) {
                z = H(m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / H(m + 1, m) + H(m, m + 1);
                q = H(m + 1, m + 1) - z - r - s;
                r = H(m + 2, m + 1);
                s = std::abs(p) + std::abs(q) + std::abs(r);
                p /= s;
                q /= s;
                r /= s;
                if (m == l) break;
                if (std::abs(H(m, m - 1)) * (std::abs(q) + std::abs(r)) <
                    eps * (std::abs(p) *
                           (std::abs(H(m - 1, m - 1)) + std::abs(z) + std::abs(H(m + 1, m + 1)))))
                    break;
                --m;
            }
            for (int i = m + 2; i <= en; ++i) {
                H(i, i - 2) = 0.0;
                if (i > m + 2) H(i, i - 3) = 0.0;
            }

            for (int k = m; k <= en - 1; ++k) {
                const bool notlast = (k != en - 1);
                if (k != m) {
                    p = H(k, k - 1);
                    q = H(k + 1, k - 1);
                    r = notlast ? H(k + 2, k - 1) : 0.0;
                    x = std::abs(p) + std::abs(q) + std::abs(r);
                    if (x == 0.0) continue;
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = std::sqrt(p * p + q * q + r * r);
                if (p < 0) s = -s;
                if (s != 0) {
                    if (k != m)
                        H(k, k - 1) = -s * x;
                    else if (l != m)
                        H(k, k - 1) = -H(k, k - 1);
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for (int j = k; j < nn; ++j) {
                        p = H(k, j) + q * H(k + 1, j);
                        if (notlast) {
                            p += r * H(k + 2, j);
                            H(k + 2, j) -= p * z;
                        }
                        H(k, j) -= p * x;
                        H(k + 1, j) -= p * y;
                    }
                    for (int i = 0; i <= std::min(en, k + 3); ++i) {
                        p = x * H(i, k) + y * H(i, k + 1);
                        if (notlast) {
                            p += z * H(i, k + 2);
                            H(i, k + 2) -= p * r;
                        }
                        H(i, k) -= p;
                        H(i, k + 1) -= p * q;
                    }
                    for (int i = low; i <= high; ++i) {
                        p = x * V(i, k) + y * V(i, k + 1);
                        if (notlast) {
                            p += z * V(i, k + 2);
                            V(i, k + 2) -= p * r;
                        }
                        V(i, k) -= p;
                        V(i, k + 1) -= p * q;
                    }
                }
            }
        }
    }

    if (!with_vectors) return;

    // back-substitution into the quasi-triangular factor
    for (int nb = nn - 1; nb >= 0; --nb) {
        p = dr[nb];
        q = di[nb];
        if (q == 0.0) {
            int l = nb;
            H(nb, nb) = 1.0;
            for (int i = nb - 1; i >= 0; --i) {
                w = H(i, i) - p;
                r = 0.0;
                for (int j = l; j <= nb; ++j) r += H(i, j) * H(j, nb);
                if (di[i] < 0.0) {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if (di[i] == 0.0) {
                        H(i, nb) = (w != 0.0) ? -r / w : -r / (eps * norm);
                    } else {
                        x = H(i, i + 1);
                        y = H(i + 1, i);
                        q = (dr[i] - p) * (dr[i] - p) + di[i] * di[i];
                        t = (x * s - z * r) / q;
                        H(i, nb) = t;
                        H(i + 1, nb) = (std::abs(x) > std::abs(z)) ? (-r - w * t) / x : (-s - y * t) / z;
                    }
                    t = std::abs(H(i, nb));
                    if ((eps * t) * t > 1)
                        for (int j = i; j <= nb; ++j) H(j, nb) /= t;
                }
            }
        } else if (q < 0.0) {
            int l = nb - 1;
            if (std::abs(H(nb, nb - 1)) > std::abs(H(nb - 1, nb))) {
                H(nb - 1, nb - 1) = q / H(nb, nb - 1);
                H(nb - 1, nb) = -(H(nb, nb) - p) / H(nb, nb - 1);
            } else {
                double cr, ci;
                detail::complex_divide(0.0, -H(nb - 1, nb), H(nb - 1, nb - 1) - p, q, cr, ci);
                H(nb - 1, nb - 1) = cr;
                H(nb - 1, nb) = ci;
            }
            H(nb, nb - 1) = 0.0;
            H(nb, nb) = 1.0;
            for (int i = nb - 2; i >= 0; --i) {
                double ra = 0.0, sa = 0.0, vr, vi;
                for (int j = l; j <= nb; ++j) {
                    ra += H(i, j) * H(j, nb - 1);
                    sa += H(i, j) * H(j, nb);
                }
                w = H(i, i) - p;
                if (di[i] < 0.0) {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if (di[i] == 0.0) {
                        double cr, ci;
                        detail::complex_divide(-ra, -sa, w, q, cr, ci);
                        H(i, nb - 1) = cr;
                        H(i, nb) = ci;
                    } else {
                        x = H(i, i + 1);
                        y = H(i + 1, i);
                        vr = (dr[i] - p) * (dr[i] - p) + di[i] * di[i] - q * q;
                        vi = (dr[i] - p) * 2.0 * q;
                        if (vr == 0.0 && vi == 0.0)
                            vr = eps * norm *
                                 (std::abs(w) + std::abs(q) + std::abs(x) + std::abs(y) + std::abs(z));
                        double cr, ci;
                        detail::complex_divide(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi,
                                               cr, ci);
                        H(i, nb - 1) = cr;
                        H(i, nb) = ci;
                        if (std::abs(x) > (std::abs(z) + std::abs(q))) {
                            H(i + 1, nb - 1) = (-ra - w * H(i, nb - 1) + q * H(i, nb)) / x;
                            H(i + 1, nb) = (-sa - w * H(i, nb) - q * H(i, nb - 1)) / x;
                        } else {
                            detail::complex_divide(-r - y * H(i, nb - 1), -s - y * H(i, nb), z, q, cr,
                                                   ci);
                            H(i + 1, nb - 1) = cr;
                            H(i + 1, nb) = ci;
                        }
                    }
                    t = std::max(std::abs(H(i, nb - 1)), std::abs(H(i, nb)));
                    if ((eps * t) * t > 1)
                        for (int j = i; j <= nb; ++j) {
                            H(j, nb - 1) /= t;
                            H(j, nb) /= t;
                        }
                }
            }
        }
    }

    // transform back to the original basis; columns are finished in
    // descending order, and column j of V only feeds columns <= j, so the
    // in-place overwrite is safe
    for (int j = nn - 1; j >= low; --j) {
        const int kmax = std::min(j, high);
        for (int i = low; i <= high; ++i) {
            z = 0.0;
            for (int k = low; k <= kmax; ++k) z += V(i, k) * H(k, j);
            V(i, j) = z;
        }
    }
}

}  // namespace detail

// Eigenvalues (and optionally eigenvectors) of a square real matrix via
// Hessenberg reduction and the Francis double-shift QR sweep. Nonreal values
// come in exact conjugate pairs. Values are sorted by (Re desc, Im desc).
inline ComplexSpectrum eig_general(const DenseMatrix& m, bool with_vectors = false) {
    if (m.rows != m.cols) throw invalid_input("eig_general: matrix must be square");
    const std::size_t n = m.rows;
    ComplexSpectrum out;
    if (n == 0) return out;

    DenseMatrix H = m;
    DenseMatrix V;
    detail::hessenberg(H, V);
    std::vector<double> dr, di;
    detail::hqr2(H, V, dr, di, with_vectors);

    // storage map before sorting: pair columns are (j, j+1) with di[j] > 0
    std::vector<std::size_t> col(n);
    std::vector<int> sgn(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
        if (di[j] > 0.0) {
            col[j] = j;
            sgn[j] = +1;
            col[j + 1] = j;
            sgn[j + 1] = -1;
            ++j;
        } else {
            col[j] = j;
            sgn[j] = di[j] == 0.0 ? 0 : -1;  // di[j] < 0 without partner cannot happen
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dr[a] != dr[b]) return dr[a] > dr[b];
        return di[a] > di[b];
    });

    out.values.reserve(n);
    out.column.reserve(n);
    out.imag_sign.reserve(n);
    for (std::size_t idx : order) {
        out.values.emplace_back(dr[idx], di[idx]);
        out.column.push_back(col[idx]);
        out.imag_sign.push_back(sgn[idx]);
    }
    out.has_vectors = with_vectors;
    if (with_vectors) out.vectors = std::move(V);
    return out;
}

// Solve a x = b by LU with partial pivoting.
inline std::vector<double> solve_linear(const DenseMatrix& a, const std::vector<double>& b) {
    if (a.rows != a.cols) throw invalid_input("solve_linear: matrix must be square");
    if (b.size() != a.rows) throw invalid_input("solve_linear: rhs length mismatch");
    const std::size_t n = a.rows;
    DenseMatrix lu = a;
    std::vector<std::size_t> piv(n);
    std::iota(piv.begin(), piv.end(), 0);

    double max_piv = 0.0, min_piv = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t imax = k;
        double amax = std::abs(lu(k, k));
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu(i, k)) > amax) {
                amax = std::abs(lu(i, k));
                imax = i;
            }
        if (imax != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu.a[k * n + j], lu.a[imax * n + j]);
            std::swap(piv[k], piv[imax]);
        }
        const double pivot = lu(k, k);
        max_piv = std::max(max_piv, std::abs(pivot));
        min_piv = std::min(min_piv, std::abs(pivot));
        if (std::abs(pivot) <= 1e-300 * std::max(1.0, a.max_abs())) {
            throw numerical_error("solve_linear: matrix singular to working precision (pivot ratio " +
                                  std::to_string(max_piv / std::max(min_piv, 1e-300)) + ")");
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            lu(i, k) /= pivot;
            const double lik = lu(i, k);
            if (lik == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= lik * lu(k, j);
        }
    }

    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[piv[i]];
    for (std::size_t i = 1; i < n; ++i) {
        double sum = x[i];
        for (std::size_t j = 0; j < i; ++j) sum -= lu(i, j) * x[j];
        x[i] = sum;
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double sum = x[ii];
        for (std::size_t j = ii + 1; j < n; ++j) sum -= lu(ii, j) * x[j];
        x[ii] = sum / lu(ii, ii);
    }
    return x;
}

namespace detail {

inline void fft_pow2(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi_v<double> / static_cast<double>(len);
        const cplx wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cplx u = a[i + j];
                const cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& z : a) z /= static_cast<double>(n);
}

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace detail

// Full complex DFT X_k = sum_j x_j exp(-2*pi*i*j*k/n) for arbitrary n
// (radix-2 when possible, Bluestein chirp-z otherwise).
inline std::vector<cplx> dft_complex(const std::vector<double>& samples) {
    const std::size_t n = samples.size();
    if (n == 0) return {};
    if ((n & (n - 1)) == 0) {
        std::vector<cplx> a(samples.begin(), samples.end());
        detail::fft_pow2(a, false);
        return a;
    }
    // Bluestein: X_k = conj(w_k) * IFFT(FFT(x_j*conj(w_j)) .* FFT(w))_k
    // with w_m = exp(i*pi*m^2/n); m^2 is reduced mod 2n to keep the phase
    // argument small and exact.
    const std::size_t m = detail::next_pow2(2 * n - 1);
    std::vector<cplx> w(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t k2 = (k * k) % (2 * n);
        const double ang = std::numbers::pi_v<double> * static_cast<double>(k2) / static_cast<double>(n);
        w[k] = cplx(std::cos(ang), std::sin(ang));
    }
    std::vector<cplx> a(m, cplx(0, 0)), b(m, cplx(0, 0));
    for (std::size_t k = 0; k < n; ++k) a[k] = samples[k] * std::conj(w[k]);
    b[0] = w[0];
    for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = w[k];
    detail::fft_pow2(a, false);
    detail::fft_pow2(b, false);
    for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
    detail::fft_pow2(a, true);
    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = std::conj(w[k]) * a[k];
    return out;
}

// One-sided power spectrum of a uniformly sampled real signal. Frequencies
// are ordinary (cycles per unit time), spanning [0, 1/(2 dt)]; the power in
// bin k is |X_k|^2 / n, so Parseval reads
//   sum x_j^2 = P_0 + P_{n/2 (n even)} + 2 * sum of interior bins.
inline std::vector<std::pair<double, double>> dft_power(const std::vector<double>& samples, double dt) {
    if (samples.size() < 16) throw invalid_input("dft_power: need at least 16 samples");
    if (!(dt > 0.0)) throw invalid_input("dft_power: dt must be positive");
    const std::size_t n = samples.size();
    const auto X = dft_complex(samples);
    std::vector<std::pair<double, double>> out;
    out.reserve(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) {
        const double f = static_cast<double>(k) / (static_cast<double>(n) * dt);
        out.emplace_back(f, std::norm(X[k]) / static_cast<double>(n));
    }
    return out;
}

}  // namespace shuttlechain
