#pragma once
#include <boost/multiprecision/cpp_int.hpp>
#include <string>
#include <vector>

namespace lsnell {

// Exact arithmetic scalar for the oracle/--exact mode. IEEE doubles convert
// exactly (they are dyadic rationals), and fixture files may carry "a/b"
// strings for values a double cannot represent.
using Rational = boost::multiprecision::cpp_rational;

double to_double(const Rational& r);
Rational rational_from_double(double x);

// The shortest decimal fraction (denominator a power of ten up to 1e9) that
// converts back to exactly this double, falling back to the dyadic image.
// Used where a double plainly encodes a decimal parameter (grid weights like
// 0.1) and exact arithmetic should see 1/10 rather than its 53-bit image.
Rational rational_from_decimal(double x);

// Accepts "a/b", plain integers, and decimal strings ("-0.45").
Rational parse_rational(const std::string& s);
std::string rational_to_string(const Rational& r);

// Scalar adapters so numeric kernels can be written once for double/Rational.
template <class T> T scalar_from_double(double x);
template <> inline double scalar_from_double<double>(double x) { return x; }
template <> inline Rational scalar_from_double<Rational>(double x) { return rational_from_double(x); }

template <class T> double scalar_to_double(const T& x);
template <> inline double scalar_to_double<double>(const double& x) { return x; }
template <> inline double scalar_to_double<Rational>(const Rational& x) { return to_double(x); }

template <class T> T scalar_abs(const T& x) { return x < T(0) ? T(-x) : x; }

template <class T> T scalar_from_rational(const Rational& x);
template <> inline double scalar_from_rational<double>(const Rational& x) { return to_double(x); }
template <> inline Rational scalar_from_rational<Rational>(const Rational& x) { return x; }

std::vector<Rational> rationals_from_doubles(const std::vector<double>& xs);
std::vector<double> doubles_from_rationals(const std::vector<Rational>& xs);

} // namespace lsnell
