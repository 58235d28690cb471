#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

namespace nelson::quad {

struct Result {
    double value = 0.0;
    double error = 0.0;
    int evals = 0;
    bool converged = true;
};

namespace detail {

inline constexpr double xgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double wgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

}  // namespace detail

// One 7/15-point Gauss-Kronrod panel; the error estimate uses the QUADPACK scaling.
template <class F>
Result gk15(F&& f, double a, double b) {
    using namespace detail;
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double resk = fc * wgk[7];
    double resg = fc * wg[3];
    double fv1[7], fv2[7];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * xgk[j];
        fv1[j] = f(c - dx);
        fv2[j] = f(c + dx);
        resk += wgk[j] * (fv1[j] + fv2[j]);
        if (j % 2 == 1) resg += wg[j / 2] * (fv1[j] + fv2[j]);
    }
    const double reskh = 0.5 * resk;
    double resasc = wgk[7] * std::fabs(fc - reskh);
    for (int j = 0; j < 7; ++j)
        resasc += wgk[j] * (std::fabs(fv1[j] - reskh) + std::fabs(fv2[j] - reskh));
    resasc *= std::fabs(h);
    double err = std::fabs((resk - resg) * h);
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    Result r;
    r.value = resk * h;
    r.error = err;
    r.evals = 15;
    return r;
}

// Globally adaptive bisection over the intervals defined by sorted breakpoints.
template <class F>
Result adaptive(F&& f, const std::vector<double>& breaks, double rel_tol, double abs_tol,
                int max_intervals = 2000) {
    struct Seg {
        double a, b, v, e;
        bool operator<(const Seg& o) const { return e < o.e; }
    };
    std::priority_queue<Seg> heap;
    Result total;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) continue;
        Result r = gk15(f, breaks[i], breaks[i + 1]);
        heap.push({breaks[i], breaks[i + 1], r.value, r.error});
        total.value += r.value;
        total.error += r.error;
        total.evals += r.evals;
    }
    int n = static_cast<int>(heap.size());
    while (!heap.empty() && total.error > std::max(abs_tol, rel_tol * std::fabs(total.value))) {
        if (n >= max_intervals) {
            total.converged = false;
            break;
        }
        Seg s = heap.top();
        const double m = 0.5 * (s.a + s.b);
        if (!(m > s.a && m < s.b)) {
            total.converged = false;
            break;
        }
        heap.pop();
        Result l = gk15(f, s.a, m);
        Result r = gk15(f, m, s.b);
        total.value += l.value + r.value - s.v;
        total.error += l.error + r.error - s.e;
        total.evals += l.evals + r.evals;
        heap.push({s.a, m, l.value, l.error});
        heap.push({m, s.b, r.value, r.error});
        ++n;
    }
    // Re-sum to limit drift from incremental updates.
    double v = 0.0, e = 0.0;
    while (!heap.empty()) {
        v += heap.top().v;
        e += heap.top().e;
        heap.pop();
    }
    total.value = v;
    total.error = e;
    return total;
}

template <class F>
Result adaptive(F&& f, double a, double b, double rel_tol, double abs_tol, int max_intervals = 2000) {
    return adaptive(f, std::vector<double>{a, b}, rel_tol, abs_tol, max_intervals);
}

// Breakpoints a, a*2, a*4, ... up to b (a > 0); used for long ranges with slowly decaying integrands.
inline std::vector<double> geometric_breaks(double a, double b, double first) {
    std::vector<double> out{a};
    double x = std::max(first, a > 0.0 ? 2.0 * a : first);
    while (x < b) {
        out.push_back(x);
        x *= 2.0;
    }
    out.push_back(b);
    return out;
}

// Repeated averaging of partial sums (Euler transform on the tail of an alternating series).
inline double euler_average(const double* sums, int count) {
    std::vector<double> w(sums, sums + count);
    for (int level = count - 1; level > 0; --level)
        for (int i = 0; i < level; ++i) w[i] = 0.5 * (w[i] + w[i + 1]);
    return w[0];
}

}  // namespace nelson::quad
