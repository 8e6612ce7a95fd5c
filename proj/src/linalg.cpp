#include "td0/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace td0 {

// ---------------------------------------------------------------------------
// Matrix / vector arithmetic
// ---------------------------------------------------------------------------

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(op) + ": shape mismatch");
}

} // namespace

Matrix operator+(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) c.data()[i] = a.data()[i] + b.data()[i];
    return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "subtract");
    Matrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) c.data()[i] = a.data()[i] - b.data()[i];
    return c;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DimensionError("multiply: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) c.data()[i] = s * a.data()[i];
    return c;
}

Vec operator*(const Matrix& a, const Vec& x) {
    if (a.cols() != x.size()) throw DimensionError("matvec: dimension mismatch");
    Vec y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionError("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

Vec operator+(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionError("vec add: dimension mismatch");
    Vec c(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
    return c;
}

Vec operator-(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionError("vec subtract: dimension mismatch");
    Vec c(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
    return c;
}

Vec operator*(double s, const Vec& a) {
    Vec c(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = s * a[i];
    return c;
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalues: cyclic Jacobi
// ---------------------------------------------------------------------------

namespace {

double off_diagonal_norm(const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (i != j) s += m(i, j) * m(i, j);
    return std::sqrt(s);
}

void require_symmetric(const Matrix& m) {
    if (!m.square()) throw DimensionError("symmetric eigensolve: matrix not square");
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-12)
                throw DomainError("symmetric eigensolve: asymmetry above 1e-12");
}

// One cyclic Jacobi pass over all (p,q) pairs; rotations applied in place,
// optionally accumulated into v.
void jacobi_sweep(Matrix& a, Matrix* v) {
    const std::size_t n = a.rows();
    for (std::size_t p = 0; p + 1 < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            const double apq = a(p, q);
            if (apq == 0.0) continue;
            const double app = a(p, p), aqq = a(q, q);
            const double theta = (aqq - app) / (2.0 * apq);
            // Smaller-root tangent keeps the rotation angle below pi/4.
            const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                             (std::abs(theta) + std::sqrt(theta * theta + 1.0));
            const double c = 1.0 / std::sqrt(t * t + 1.0);
            const double s = t * c;
            for (std::size_t k = 0; k < n; ++k) {
                const double akp = a(k, p), akq = a(k, q);
                a(k, p) = c * akp - s * akq;
                a(k, q) = s * akp + c * akq;
            }
            for (std::size_t k = 0; k < n; ++k) {
                const double apk = a(p, k), aqk = a(q, k);
                a(p, k) = c * apk - s * aqk;
                a(q, k) = s * apk + c * aqk;
            }
            if (v) {
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = (*v)(k, p), vkq = (*v)(k, q);
                    (*v)(k, p) = c * vkp - s * vkq;
                    (*v)(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
}

SymEigen sym_eigen_impl(const Matrix& m, bool want_vectors) {
    require_symmetric(m);
    const std::size_t n = m.rows();
    Matrix a = m;
    // Exact symmetrization so rotations preserve symmetry bit for bit.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double avg = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = avg;
            a(j, i) = avg;
        }
    Matrix v = want_vectors ? Matrix::identity(n) : Matrix();
    const double tol = 1e-14 * (m.frobenius_norm() > 0.0 ? m.frobenius_norm() : 1.0);
    for (int sweep = 0; sweep < 64 && off_diagonal_norm(a) > tol; ++sweep)
        jacobi_sweep(a, want_vectors ? &v : nullptr);
    if (off_diagonal_norm(a) > tol)
        throw NumericalError("jacobi: off-diagonal norm did not converge");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

    SymEigen out;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = a(order[i], order[i]);
    if (want_vectors) {
        out.vectors = Matrix(n, n);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

} // namespace

std::vector<double> sym_eigenvalues(const Matrix& m) {
    return sym_eigen_impl(m, false).values;
}

SymEigen sym_eigen(const Matrix& m) { return sym_eigen_impl(m, true); }

// ---------------------------------------------------------------------------
// General eigenvalues: balance + Hessenberg + Francis double-shift QR
// ---------------------------------------------------------------------------

namespace {

// Osborne balancing with radix-2 scale factors; similarity transform only,
// eigenvalues untouched.
void balance(Matrix& a) {
    const std::size_t n = a.rows();
    bool converged = false;
    while (!converged) {
        converged = true;
        for (std::size_t i = 0; i < n; ++i) {
            double r = 0.0, c = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            double f = 1.0;
            const double s = c + r;
            while (c < r / 2.0) {
                f *= 2.0;
                c *= 4.0;
            }
            while (c >= r * 2.0) {
                f /= 2.0;
                c /= 4.0;
            }
            if ((c + r) / f < 0.95 * s) {
                converged = false;
                const double g = 1.0 / f;
                for (std::size_t j = 0; j < n; ++j) a(i, j) *= g;
                for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
            }
        }
    }
}

// Householder reduction to upper Hessenberg form, in place.
void hessenberg(Matrix& a) {
    const std::size_t n = a.rows();
    if (n < 3) return;
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double scale = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) scale += std::abs(a(i, k));
        if (scale == 0.0) continue;
        Vec u(n, 0.0);
        double sigma = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            u[i] = a(i, k) / scale;
            sigma += u[i] * u[i];
        }
        double alpha = std::sqrt(sigma);
        if (u[k + 1] > 0.0) alpha = -alpha;
        const double beta = sigma - u[k + 1] * alpha;
        if (beta == 0.0) continue;
        u[k + 1] -= alpha;
        // a <- (I - u u^T / beta) a (I - u u^T / beta)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) s += u[i] * a(i, j);
            s /= beta;
            for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= s * u[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) s += a(i, j) * u[j];
            s /= beta;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= s * u[j];
        }
        a(k + 1, k) = alpha * scale;
        for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
    }
}

// Francis double-shift QR on an upper Hessenberg matrix (EISPACK hqr
// lineage). Appends eigenvalues as 1x1 and 2x2 blocks deflate off the
// bottom. Sweep budget is shared across the whole spectrum.
std::vector<std::complex<double>> hqr(Matrix& h, long max_sweeps) {
    const long n = static_cast<long>(h.rows());
    std::vector<std::complex<double>> eig;
    eig.reserve(static_cast<std::size_t>(n));

    double anorm = 0.0;
    for (long i = 0; i < n; ++i)
        for (long j = std::max(i - 1, 0L); j < n; ++j) anorm += std::abs(h(i, j));
    if (anorm == 0.0) anorm = 1.0;

    long nn = n - 1;
    double t = 0.0;
    long sweeps_used = 0;
    while (nn >= 0) {
        long its = 0;
        long l;
        do {
            for (l = nn; l >= 1; --l) {
                const double s = std::abs(h(l - 1, l - 1)) + std::abs(h(l, l));
                const double cmp = (s == 0.0) ? anorm : s;
                if (std::abs(h(l, l - 1)) + cmp == cmp) {
                    h(l, l - 1) = 0.0;
                    break;
                }
            }
            double x = h(nn, nn);
            if (l == nn) {
                eig.emplace_back(x + t, 0.0);
                --nn;
                break;
            }
            double y = h(nn - 1, nn - 1);
            double w = h(nn, nn - 1) * h(nn - 1, nn);
            if (l == nn - 1) {
                const double p = 0.5 * (y - x);
                const double q = p * p + w;
                const double z = std::sqrt(std::abs(q));
                x += t;
                if (q >= 0.0) {
                    const double zz = p + (p >= 0.0 ? z : -z);
                    eig.emplace_back(x + zz, 0.0);
                    eig.emplace_back(zz != 0.0 ? x - w / zz : x + zz, 0.0);
                } else {
                    eig.emplace_back(x + p, z);
                    eig.emplace_back(x + p, -z);
                }
                nn -= 2;
                break;
            }
            if (++sweeps_used > max_sweeps)
                throw NumericalError(
                    "qr eigensolve: deflation incomplete after " +
                    std::to_string(max_sweeps) + " sweeps (" +
                    std::to_string(eig.size()) + " of " + std::to_string(n) +
                    " eigenvalues found)");
            if (its == 10 || its == 20) {
                // Exceptional shift to break symmetric stalls.
                t += x;
                for (long i = 0; i <= nn; ++i) h(i, i) -= x;
                const double s = std::abs(h(nn, nn - 1)) + std::abs(h(nn - 1, nn - 2));
                y = x = 0.75 * s;
                w = -0.4375 * s * s;
            }
            ++its;
            long m;
            double p = 0.0, q = 0.0, r = 0.0;
            for (m = nn - 2; m >= l; --m) {
                const double z = h(m, m);
                const double rr = x - z;
                const double ss = y - z;
                p = (rr * ss - w) / h(m + 1, m) + h(m, m + 1);
                q = h(m + 1, m + 1) - z - rr - ss;
                r = h(m + 2, m + 1);
                const double scale = std::abs(p) + std::abs(q) + std::abs(r);
                p /= scale;
                q /= scale;
                r /= scale;
                if (m == l) break;
                const double u = std::abs(h(m, m - 1)) * (std::abs(q) + std::abs(r));
                const double v = std::abs(p) * (std::abs(h(m - 1, m - 1)) + std::abs(z) +
                                                std::abs(h(m + 1, m + 1)));
                if (u + v == v) break;
            }
            for (long i = m + 2; i <= nn; ++i) {
                h(i, i - 2) = 0.0;
                if (i != m + 2) h(i, i - 3) = 0.0;
            }
            // Bulge chase.
            for (long k = m; k <= nn - 1; ++k) {
                if (k != m) {
                    p = h(k, k - 1);
                    q = h(k + 1, k - 1);
                    r = (k != nn - 1) ? h(k + 2, k - 1) : 0.0;
                    x = std::abs(p) + std::abs(q) + std::abs(r);
                    if (x != 0.0) {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                double s = std::sqrt(p * p + q * q + r * r);
                if (p < 0.0) s = -s;
                if (s == 0.0) continue;
                if (k == m) {
                    if (l != m) h(k, k - 1) = -h(k, k - 1);
                } else {
                    h(k, k - 1) = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                double z = r / s;
                q /= p;
                r /= p;
                for (long j = k; j <= nn; ++j) {
                    double pp = h(k, j) + q * h(k + 1, j);
                    if (k != nn - 1) {
                        pp += r * h(k + 2, j);
                        h(k + 2, j) -= pp * z;
                    }
                    h(k + 1, j) -= pp * y;
                    h(k, j) -= pp * x;
                }
                const long mmin = (nn < k + 3) ? nn : k + 3;
                for (long i = l; i <= mmin; ++i) {
                    double pp = x * h(i, k) + y * h(i, k + 1);
                    if (k != nn - 1) {
                        pp += z * h(i, k + 2);
                        h(i, k + 2) -= pp * r;
                    }
                    h(i, k + 1) -= pp * q;
                    h(i, k) -= pp;
                }
            }
        } while (l < nn - 1);
    }
    return eig;
}

} // namespace

std::vector<std::complex<double>> eigenvalues_general(const Matrix& m) {
    if (!m.square()) throw DimensionError("general eigensolve: matrix not square");
    const std::size_t n = m.rows();
    if (n == 0) return {};
    if (n == 1) return {{m(0, 0), 0.0}};
    Matrix a = m;
    balance(a);
    hessenberg(a);
    auto eig = hqr(a, 100L * static_cast<long>(n));
    std::sort(eig.begin(), eig.end(), [](const auto& x, const auto& y) {
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });
    return eig;
}

// ---------------------------------------------------------------------------
// Matrix exponential: scaling and squaring, degree-13 approximant
// ---------------------------------------------------------------------------

Matrix matrix_exponential(const Matrix& m, double t) {
    if (!m.square()) throw DimensionError("matrix exponential: matrix not square");
    if (!std::isfinite(t)) throw DomainError("matrix exponential: non-finite time");
    const std::size_t n = m.rows();

    Matrix a = t * m;
    int squarings = 0;
    double norm = a.inf_norm();
    if (!std::isfinite(norm))
        throw NumericalError("matrix exponential: argument norm not finite");
    while (norm > 0.5) {
        norm *= 0.5;
        ++squarings;
    }
    if (squarings > 0) a = std::ldexp(1.0, -squarings) * a;

    static const double b[14] = {64764752532480000.0, 32382376266240000.0,
                                 7771770303897600.0,  1187353796428800.0,
                                 129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,
                                 1323241920.0,        40840800.0,
                                 960960.0,            16380.0,
                                 182.0,               1.0};

    const Matrix eye = Matrix::identity(n);
    const Matrix a2 = a * a;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a2 * a4;

    Matrix u = a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 +
                    b[5] * a4 + b[3] * a2 + b[1] * eye);
    Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 +
               b[4] * a4 + b[2] * a2 + b[0] * eye;

    // (v - u) f = (v + u), column by column.
    const Matrix num = v + u;
    const Matrix den = v - u;
    Matrix f(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        Vec rhs(n);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = num(i, j);
        Vec col = solve_linear(den, rhs);
        for (std::size_t i = 0; i < n; ++i) f(i, j) = col[i];
    }
    for (int s = 0; s < squarings; ++s) f = f * f;
    return f;
}

// ---------------------------------------------------------------------------
// Norms and linear solves
// ---------------------------------------------------------------------------

double spectral_norm(const Matrix& m) {
    Matrix g = transpose(m) * m;
    // Round symmetrically to kill the last-ulp asymmetry of the product.
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = i + 1; j < g.cols(); ++j) {
            const double avg = 0.5 * (g(i, j) + g(j, i));
            g(i, j) = avg;
            g(j, i) = avg;
        }
    const auto ev = sym_eigenvalues(g);
    const double top = ev.empty() ? 0.0 : ev.back();
    return std::sqrt(std::max(top, 0.0));
}

Vec solve_linear(const Matrix& a, const Vec& rhs) {
    if (!a.square()) throw DimensionError("solve: matrix not square");
    if (a.rows() != rhs.size()) throw DimensionError("solve: rhs dimension mismatch");
    const std::size_t n = a.rows();
    const double threshold = 1e-12 * std::max(a.inf_norm(), 1e-300);

    Matrix lu = a;
    Vec x = rhs;
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
        if (std::abs(lu(piv, k)) <= threshold)
            throw SingularMatrixError("solve: pivot below singularity threshold");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
            std::swap(x[k], x[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = lu(i, k) / lu(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
            x[i] -= f * x[k];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= lu(i, j) * x[j];
        x[i] = s / lu(i, i);
    }
    return x;
}

Matrix inverse(const Matrix& a) {
    const std::size_t n = a.rows();
    Matrix inv(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        Vec e(n, 0.0);
        e[j] = 1.0;
        Vec col = solve_linear(a, e);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv;
}

SpectralSummary spectral_summary(const Matrix& m) {
    if (!m.square()) throw DimensionError("spectral summary: matrix not square");
    SpectralSummary s;
    const Matrix sym = m + transpose(m);
    const auto ev = sym_eigenvalues(sym);
    s.sym_min_eig = ev.front();
    s.sym_max_eig = ev.back();
    double min_re = std::numeric_limits<double>::infinity();
    for (const auto& z : eigenvalues_general(m)) min_re = std::min(min_re, z.real());
    s.min_real_part = min_re;
    s.spectral_norm = spectral_norm(m);
    return s;
}

} // namespace td0
