#pragma once

#include "gpode/errors.hpp"

namespace gpode {

/// Squared length scale of the squared-exponential kernel, in units of the
/// (squared) curve parameter.
struct LengthScale {
    double sq = 1.0;

    void validate() const;
};

/// Derivative order of a kernel entry: d1 times w.r.t. the first argument,
/// d2 times w.r.t. the second. Orders above 2 never occur in the solver.
struct DerivOrder {
    int d1 = 0;
    int d2 = 0;

    void validate() const;
};

/// k(t1,t2) = exp(-(t1-t2)^2 / (2 lambda^2)) differentiated order.d1 times in
/// t1 and order.d2 times in t2.
double k_eval(double t1, double t2, const LengthScale& ls, DerivOrder order);

/// d/d(lambda^2) of k_eval at the given derivative order.
double k_dlambda2(double t1, double t2, const LengthScale& ls, DerivOrder order);

/// d^2/d(lambda^2)^2 of k_eval at the given derivative order.
double k_d2lambda2(double t1, double t2, const LengthScale& ls, DerivOrder order);

/// d^2/d(lambda^2)^2 of the (2,2) entry; the order used by the length-scale
/// Newton iteration.
double k_d2lambda2(double t1, double t2, const LengthScale& ls);

}  // namespace gpode
