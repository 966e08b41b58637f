#include "lprnet/kernels.hpp"

#include "lprnet/kdtree.hpp"
#include "lprnet/threading.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lprnet::kernels {

void transform_points(const Mat3& R, const Vec3& t, const Vec3* in, Vec3* out, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
        out[i] = R * in[i] + t;
}

void nn1_batch(const KdTree& tree, const Vec3* queries, std::size_t nq,
               double* d2, std::uint32_t* idx) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(nq); ++i) {
        const KdTree::Hit hit = tree.nearest(queries[i]);
        d2[i] = hit.d2;
        idx[i] = hit.index;
    }
}

FpsStep fps_update_argmax(const Vec3* pts, std::size_t n, const Vec3& new_center,
                          double* min_d2) {
    int nthreads = 1;
#ifdef _OPENMP
    nthreads = effective_threads();
#endif
    std::vector<FpsStep> partial(nthreads, {n, -1.0});

#pragma omp parallel num_threads(nthreads)
    {
        int tid = 0;
#ifdef _OPENMP
        tid = omp_get_thread_num();
#endif
        FpsStep local{n, -1.0};
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            const double d2 = sqdist3(pts[i].data(), new_center.data());
            if (d2 < min_d2[i]) min_d2[i] = d2;
            if (min_d2[i] > local.max_d2) local = {static_cast<std::size_t>(i), min_d2[i]};
        }
        partial[tid] = local;
    }

    FpsStep best{n, -1.0};
    for (const FpsStep& p : partial) {
        if (p.argmax == n) continue;
        if (p.max_d2 > best.max_d2 || (p.max_d2 == best.max_d2 && p.argmax < best.argmax))
            best = p;
    }
    return best;
}

template <typename T>
void matmul(const T* A, const T* B, T* C, int n, int m, int p) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        T* crow = C + std::size_t(i) * p;
        std::fill(crow, crow + p, T(0));
        const T* arow = A + std::size_t(i) * m;
        for (int k = 0; k < m; ++k) {
            const T a = arow[k];
            const T* brow = B + std::size_t(k) * p;
            for (int j = 0; j < p; ++j) crow[j] += a * brow[j];
        }
    }
}

template <typename T>
void matmul_nt(const T* A, const T* B, T* C, int n, int m, int p) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const T* arow = A + std::size_t(i) * m;
        T* crow = C + std::size_t(i) * p;
        for (int j = 0; j < p; ++j) {
            const T* brow = B + std::size_t(j) * m;
            T acc = T(0);
            for (int k = 0; k < m; ++k) acc += arow[k] * brow[k];
            crow[j] = acc;
        }
    }
}

template <typename T>
void matmul_tn(const T* A, const T* B, T* C, int n, int m, int p) {
#pragma omp parallel for schedule(static)
    for (int k = 0; k < m; ++k) {
        T* crow = C + std::size_t(k) * p;
        std::fill(crow, crow + p, T(0));
        for (int i = 0; i < n; ++i) {
            const T a = A[std::size_t(i) * m + k];
            const T* brow = B + std::size_t(i) * p;
            for (int j = 0; j < p; ++j) crow[j] += a * brow[j];
        }
    }
}

void grid_max_bin(const Vec3* pts, std::size_t n, double ox, double oy, double cell,
                  int nx, int ny, double* max_z, std::uint8_t* occupied) {
    const std::size_t ncells = std::size_t(nx) * ny;
    int nthreads = 1;
#ifdef _OPENMP
    nthreads = effective_threads();
#endif
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> locals(ncells * nthreads, neg_inf);

#pragma omp parallel num_threads(nthreads)
    {
        int tid = 0;
#ifdef _OPENMP
        tid = omp_get_thread_num();
#endif
        double* grid = locals.data() + ncells * tid;
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            int ix = static_cast<int>((pts[i].x() - ox) / cell);
            int iy = static_cast<int>((pts[i].y() - oy) / cell);
            ix = std::clamp(ix, 0, nx - 1);
            iy = std::clamp(iy, 0, ny - 1);
            const std::size_t c = std::size_t(iy) * nx + ix;
            if (pts[i].z() > grid[c]) grid[c] = pts[i].z();
        }
    }

    // max-merge is order independent, so the result matches the serial pass
    for (std::size_t c = 0; c < ncells; ++c) {
        double m = neg_inf;
        for (int t = 0; t < nthreads; ++t) m = std::max(m, locals[ncells * t + c]);
        occupied[c] = (m != neg_inf) ? 1 : 0;
        max_z[c] = occupied[c] ? m : 0.0;
    }
}

template void matmul<float>(const float*, const float*, float*, int, int, int);
template void matmul<double>(const double*, const double*, double*, int, int, int);
template void matmul_nt<float>(const float*, const float*, float*, int, int, int);
template void matmul_nt<double>(const double*, const double*, double*, int, int, int);
template void matmul_tn<float>(const float*, const float*, float*, int, int, int);
template void matmul_tn<double>(const double*, const double*, double*, int, int, int);

namespace serial {

void transform_points(const Mat3& R, const Vec3& t, const Vec3* in, Vec3* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = R * in[i] + t;
}

void nn1_batch(const Vec3* refs, std::size_t nr, const Vec3* queries, std::size_t nq,
               double* d2, std::uint32_t* idx) {
    for (std::size_t i = 0; i < nq; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t best_idx = 0;
        for (std::size_t j = 0; j < nr; ++j) {
            const double d = sqdist3(queries[i].data(), refs[j].data());
            if (d < best) {
                best = d;
                best_idx = static_cast<std::uint32_t>(j);
            }
        }
        d2[i] = best;
        idx[i] = best_idx;
    }
}

FpsStep fps_update_argmax(const Vec3* pts, std::size_t n, const Vec3& new_center,
                          double* min_d2) {
    FpsStep best{n, -1.0};
    for (std::size_t i = 0; i < n; ++i) {
        const double d2 = sqdist3(pts[i].data(), new_center.data());
        if (d2 < min_d2[i]) min_d2[i] = d2;
        if (min_d2[i] > best.max_d2) best = {i, min_d2[i]};
    }
    return best;
}

template <typename T>
void matmul(const T* A, const T* B, T* C, int n, int m, int p) {
    for (int i = 0; i < n; ++i) {
        T* crow = C + std::size_t(i) * p;
        std::fill(crow, crow + p, T(0));
        const T* arow = A + std::size_t(i) * m;
        for (int k = 0; k < m; ++k) {
            const T a = arow[k];
            const T* brow = B + std::size_t(k) * p;
            for (int j = 0; j < p; ++j) crow[j] += a * brow[j];
        }
    }
}

template <typename T>
void matmul_nt(const T* A, const T* B, T* C, int n, int m, int p) {
    for (int i = 0; i < n; ++i) {
        const T* arow = A + std::size_t(i) * m;
        T* crow = C + std::size_t(i) * p;
        for (int j = 0; j < p; ++j) {
            const T* brow = B + std::size_t(j) * m;
            T acc = T(0);
            for (int k = 0; k < m; ++k) acc += arow[k] * brow[k];
            crow[j] = acc;
        }
    }
}

template <typename T>
void matmul_tn(const T* A, const T* B, T* C, int n, int m, int p) {
    for (int k = 0; k < m; ++k) {
        T* crow = C + std::size_t(k) * p;
        std::fill(crow, crow + p, T(0));
        for (int i = 0; i < n; ++i) {
            const T a = A[std::size_t(i) * m + k];
            const T* brow = B + std::size_t(i) * p;
            for (int j = 0; j < p; ++j) crow[j] += a * brow[j];
        }
    }
}

void grid_max_bin(const Vec3* pts, std::size_t n, double ox, double oy, double cell,
                  int nx, int ny, double* max_z, std::uint8_t* occupied) {
    const std::size_t ncells = std::size_t(nx) * ny;
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> grid(ncells, neg_inf);
    for (std::size_t i = 0; i < n; ++i) {
        int ix = static_cast<int>((pts[i].x() - ox) / cell);
        int iy = static_cast<int>((pts[i].y() - oy) / cell);
        ix = std::clamp(ix, 0, nx - 1);
        iy = std::clamp(iy, 0, ny - 1);
        const std::size_t c = std::size_t(iy) * nx + ix;
        if (pts[i].z() > grid[c]) grid[c] = pts[i].z();
    }
    for (std::size_t c = 0; c < ncells; ++c) {
        occupied[c] = (grid[c] != neg_inf) ? 1 : 0;
        max_z[c] = occupied[c] ? grid[c] : 0.0;
    }
}

template void matmul<float>(const float*, const float*, float*, int, int, int);
template void matmul<double>(const double*, const double*, double*, int, int, int);
template void matmul_nt<float>(const float*, const float*, float*, int, int, int);
template void matmul_nt<double>(const double*, const double*, double*, int, int, int);
template void matmul_tn<float>(const float*, const float*, float*, int, int, int);
template void matmul_tn<double>(const double*, const double*, double*, int, int, int);

}  // namespace serial

}  // namespace lprnet::kernels
