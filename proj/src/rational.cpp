#include "lsnell/rational.hpp"
#include "lsnell/errors.hpp"

#include <cctype>
#include <cmath>

namespace lsnell {

double to_double(const Rational& r) { return r.convert_to<double>(); }

Rational rational_from_double(double x) {
    if (!std::isfinite(x)) throw InputError("non-finite value cannot become a rational");
    return Rational(x); // exact: doubles are dyadic
}

Rational rational_from_decimal(double x) {
    if (!std::isfinite(x)) throw InputError("non-finite value cannot become a rational");
    double den = 1.0;
    for (int k = 0; k <= 9; ++k) {
        double rounded = std::nearbyint(x * den);
        // accept the shortest decimal that converts back to the same double
        if (std::abs(rounded) <= 9.0e15 && rounded / den == x)
            return Rational(static_cast<long long>(rounded), static_cast<long long>(den));
        den *= 10.0;
    }
    return Rational(x);
}

namespace {

using BigInt = boost::multiprecision::cpp_int;

BigInt parse_int(const std::string& s) {
    if (s.empty()) throw InputError("empty integer in rational literal");
    std::size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
    if (i == s.size()) throw InputError("bare sign in rational literal");
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i])))
            throw InputError("bad digit in rational literal: '" + s + "'");
    return BigInt(s);
}

} // namespace

Rational parse_rational(const std::string& s) {
    auto slash = s.find('/');
    if (slash != std::string::npos) {
        BigInt num = parse_int(s.substr(0, slash));
        BigInt den = parse_int(s.substr(slash + 1));
        if (den == 0) throw InputError("zero denominator in rational literal: '" + s + "'");
        return Rational(num, den);
    }
    auto dot = s.find('.');
    if (dot == std::string::npos) return Rational(parse_int(s));
    std::string digits = s.substr(0, dot) + s.substr(dot + 1);
    std::size_t frac_len = s.size() - dot - 1;
    if (frac_len == 0) return Rational(parse_int(digits));
    BigInt den = 1;
    for (std::size_t i = 0; i < frac_len; ++i) den *= 10;
    return Rational(parse_int(digits), den);
}

std::string rational_to_string(const Rational& r) {
    return r.str();
}

std::vector<Rational> rationals_from_doubles(const std::vector<double>& xs) {
    std::vector<Rational> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(rational_from_double(x));
    return out;
}

std::vector<double> doubles_from_rationals(const std::vector<Rational>& xs) {
    std::vector<double> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(to_double(x));
    return out;
}

} // namespace lsnell
