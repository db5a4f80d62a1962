#include "ssrlab/linalg.hpp"

#include <cmath>

namespace ssrlab {

std::optional<Matrix> cholesky_lower(const Matrix& a) {
    const int n = a.n;
    Matrix l(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a.at(i, j);
            const double* li = l.row(i);
            const double* lj = l.row(j);
            for (int k = 0; k < j; ++k) s -= li[k] * lj[k];
            if (i == j) {
                if (!(s > 0.0)) return std::nullopt;
                l.at(i, i) = std::sqrt(s);
            } else {
                l.at(i, j) = s / l.at(j, j);
            }
        }
    }
    return l;
}

void lower_matvec(const Matrix& lower, std::span<const double> z, std::span<double> out) {
    const int n = lower.n;
    for (int i = 0; i < n; ++i) {
        const double* row = lower.row(i);
        double s = 0.0;
        for (int j = 0; j <= i; ++j) s += row[j] * z[j];
        out[i] = s;
    }
}

std::vector<double> jacobi_eigenvalues(Matrix a, int max_sweeps) {
    const int n = a.n;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a.at(i, j) * a.at(i, j);
        if (off <= 1e-30) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (apq == 0.0) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a.at(k, p);
                    const double akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a.at(p, k);
                    const double aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (int i = 0; i < n; ++i) eig[i] = a.at(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

}  // namespace ssrlab
