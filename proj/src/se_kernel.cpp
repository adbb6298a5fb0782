#include "gpode/se_kernel.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace gpode {
namespace {

// Every derivative of k(t1,t2) = exp(-u^2/(2 l2)) with u = t1 - t2 is a
// polynomial in delta = u/l2 and 1/l2 times k itself. A term is
// coef * delta^dpow * l2^(-lpow) * k. Differentiation w.r.t. u and w.r.t. l2
// both map terms to terms, so the whole table below is generated exactly:
//   d/du   [delta^a l2^-b k] = a delta^(a-1) l2^-(b+1) k - delta^(a+1) l2^-b k
//   d/dl2  [delta^a l2^-b k] = -(a+b) delta^a l2^-(b+1) k + (1/2) delta^(a+2) l2^-b k
struct Term {
    double coef;
    int dpow;
    int lpow;
};

using Poly = std::vector<Term>;

Poly collect(const Poly& p) {
    Poly out;
    for (const Term& t : p) {
        if (t.coef == 0.0) continue;
        bool merged = false;
        for (Term& o : out) {
            if (o.dpow == t.dpow && o.lpow == t.lpow) {
                o.coef += t.coef;
                merged = true;
                break;
            }
        }
        if (!merged) out.push_back(t);
    }
    return out;
}

Poly d_du(const Poly& p) {
    Poly out;
    for (const Term& t : p) {
        if (t.dpow > 0) out.push_back({t.coef * t.dpow, t.dpow - 1, t.lpow + 1});
        out.push_back({-t.coef, t.dpow + 1, t.lpow});
    }
    return collect(out);
}

Poly d_dl2(const Poly& p) {
    Poly out;
    for (const Term& t : p) {
        out.push_back({-t.coef * (t.dpow + t.lpow), t.dpow, t.lpow + 1});
        out.push_back({0.5 * t.coef, t.dpow + 2, t.lpow});
    }
    return collect(out);
}

struct Tables {
    // base[p] = d^p k / du^p; dl[p], d2l[p] its first/second l2 derivative.
    std::array<Poly, 5> base, dl, d2l;

    Tables() {
        base[0] = {{1.0, 0, 0}};
        for (int p = 1; p <= 4; ++p) base[p] = d_du(base[p - 1]);
        for (int p = 0; p <= 4; ++p) {
            dl[p] = d_dl2(base[p]);
            d2l[p] = d_dl2(dl[p]);
        }
    }
};

const Tables& tables() {
    static const Tables t;
    return t;
}

double ipow(double base, int exp) {
    double out = 1.0;
    for (int i = 0; i < exp; ++i) out *= base;
    return out;
}

double eval_poly(const Poly& poly, double t1, double t2, double l2) {
    const double u = t1 - t2;
    const double delta = u / l2;
    const double inv_l2 = 1.0 / l2;
    const double k = std::exp(-0.5 * u * delta);
    double acc = 0.0;
    for (const Term& t : poly) {
        acc += t.coef * ipow(delta, t.dpow) * ipow(inv_l2, t.lpow);
    }
    return acc * k;
}

// d^a/dt1^a d^b/dt2^b = (d/du)^a (-d/du)^b, so an order (a,b) entry is
// (-1)^b times the (a+b)-th u-derivative.
double signed_eval(const std::array<Poly, 5>& table, double t1, double t2,
                   const LengthScale& ls, DerivOrder order) {
    ls.validate();
    order.validate();
    const double sign = (order.d2 % 2 == 0) ? 1.0 : -1.0;
    return sign * eval_poly(table[order.d1 + order.d2], t1, t2, ls.sq);
}

}  // namespace

void LengthScale::validate() const {
    if (!(sq > 0.0) || !std::isfinite(sq)) {
        throw ContractViolation("length scale squared must be positive and finite");
    }
}

void DerivOrder::validate() const {
    if (d1 < 0 || d1 > 2 || d2 < 0 || d2 > 2) {
        throw ContractViolation("derivative order components must lie in {0,1,2}");
    }
}

double k_eval(double t1, double t2, const LengthScale& ls, DerivOrder order) {
    return signed_eval(tables().base, t1, t2, ls, order);
}

double k_dlambda2(double t1, double t2, const LengthScale& ls, DerivOrder order) {
    return signed_eval(tables().dl, t1, t2, ls, order);
}

double k_d2lambda2(double t1, double t2, const LengthScale& ls, DerivOrder order) {
    return signed_eval(tables().d2l, t1, t2, ls, order);
}

double k_d2lambda2(double t1, double t2, const LengthScale& ls) {
    return k_d2lambda2(t1, t2, ls, DerivOrder{2, 2});
}

}  // namespace gpode
