#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace capguard::stats {

double mean(const std::vector<double>& v);

// Sample variance (n-1 denominator); returns 0 for n < 2.
double variance(const std::vector<double>& v);

// Population variance (n denominator); returns 0 for empty input.
double variance_pop(const std::vector<double>& v);

// Linear-interpolation quantile (h = (n-1)*p) over an unsorted copy; p in [0,1].
double quantile(std::vector<double> v, double p);

// Regularized incomplete beta I_x(a, b) via Lentz continued fraction;
// absolute error < 1e-8 over the tested domain.
double reg_inc_beta(double a, double b, double x);

// Upper-tail probability of the F(d1, d2) distribution at f >= 0.
double f_tail(double f, double d1, double d2);

// FNV-1a 64-bit over raw bytes.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(const std::string& s);

// Shortest float formatting with 9 significant digits ("%.9g").
std::string fmt_g9(double x);

}  // namespace capguard::stats
