#pragma once

#include "lprnet/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace lprnet {
class KdTree;
}

// Data-parallel inner loops, OpenMP-parallelized. Every kernel has a serial
// reference twin under kernels::serial; the two must agree bit-for-bit for
// any thread count (disjoint outputs, or order-independent merges only).
namespace lprnet::kernels {

inline double sqdist3(const double* a, const double* b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

// out[i] = R*in[i] + t
void transform_points(const Mat3& R, const Vec3& t, const Vec3* in, Vec3* out, std::size_t n);

// Nearest reference point per query, via the spatial index.
// d2[i] = squared distance, idx[i] = reference index (ties -> lowest index).
void nn1_batch(const KdTree& tree, const Vec3* queries, std::size_t nq,
               double* d2, std::uint32_t* idx);

// One farthest-point-sampling step: fold the newly selected center into the
// running min-distance array and return the argmax (ties -> lowest index).
struct FpsStep {
    std::size_t argmax;
    double max_d2;
};
FpsStep fps_update_argmax(const Vec3* pts, std::size_t n, const Vec3& new_center,
                          double* min_d2);

// C[n x p] = A[n x m] * B[m x p], row-major.
template <typename T>
void matmul(const T* A, const T* B, T* C, int n, int m, int p);

// C[n x p] = A[n x m] * B[p x m]^T
template <typename T>
void matmul_nt(const T* A, const T* B, T* C, int n, int m, int p);

// C[m x p] = A[n x m]^T * B[n x p]
template <typename T>
void matmul_tn(const T* A, const T* B, T* C, int n, int m, int p);

// Per-cell max-z binning over a regular grid; cells[iy*nx+ix], occupancy flags.
void grid_max_bin(const Vec3* pts, std::size_t n, double ox, double oy, double cell,
                  int nx, int ny, double* max_z, std::uint8_t* occupied);

namespace serial {

void transform_points(const Mat3& R, const Vec3& t, const Vec3* in, Vec3* out, std::size_t n);

// Brute-force scan, no spatial index.
void nn1_batch(const Vec3* refs, std::size_t nr, const Vec3* queries, std::size_t nq,
               double* d2, std::uint32_t* idx);

FpsStep fps_update_argmax(const Vec3* pts, std::size_t n, const Vec3& new_center,
                          double* min_d2);

template <typename T>
void matmul(const T* A, const T* B, T* C, int n, int m, int p);
template <typename T>
void matmul_nt(const T* A, const T* B, T* C, int n, int m, int p);
template <typename T>
void matmul_tn(const T* A, const T* B, T* C, int n, int m, int p);

void grid_max_bin(const Vec3* pts, std::size_t n, double ox, double oy, double cell,
                  int nx, int ny, double* max_z, std::uint8_t* occupied);

}  // namespace serial

}  // namespace lprnet::kernels
