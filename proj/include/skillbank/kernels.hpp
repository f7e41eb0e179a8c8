#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace skillbank::kernels {

enum class Backend { Scalar, Avx2, Neon };

// Backend chosen at startup from CPU capabilities. set_backend lets tests
// force the scalar reference path; it throws std::invalid_argument if the
// requested backend is not supported on this machine.
Backend active_backend();
bool backend_supported(Backend b);
void set_backend(Backend b);
std::string backend_name(Backend b);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
void scale(std::span<double> v, double s);

// Reference implementations, exported for equivalence tests.
double dot_scalar(const double* a, const double* b, std::size_t n);
double l2_norm_scalar(const double* v, std::size_t n);
void scale_scalar(double* v, std::size_t n, double s);

} // namespace skillbank::kernels
