#pragma once

#include <cmath>
#include <vector>

#include "nelson/kernels.hpp"

namespace nelson::kernels {

struct TableSpec {
    double s_max = 48.0;
    double step = 0.08;    // node spacing in the mapped coordinates
    double a_min = 1e-6;   // smallest resolved length when eps = 0
    unsigned threads = 0;
};

// Tabulated kernel on an asinh-plus-linear graded (|x|, |t|) grid with 4x4 Lagrange
// interpolation. Points outside the table, and points closer than a few grid scales to a
// singular origin, fall back to direct quadrature.
class KernelTable {
public:
    KernelTable(KernelKind kind, const ModelParams& params, double t_max, const QuadratureSpec& quad = {},
                TableSpec spec = {});

    double operator()(double s, double t) const;
    double direct(double s, double t) const;

    // Kernel restricted to a fixed |t|; cheap repeated evaluation in s.
    class Slice {
    public:
        double operator()(double s) const;
        // True when the time argument lies beyond the decay cutoff, so every value is 0.
        bool is_zero() const { return zero_; }

    private:
        friend class KernelTable;
        const KernelTable* table_ = nullptr;
        std::vector<double> row_;
        double t_ = 0.0;
        double tp2_ = 0.0;  // (c t)^2 + a^2
        bool zero_ = false;
        bool direct_ = false;
    };
    Slice slice(double t) const;

    KernelKind kind() const { return kind_; }
    const ModelParams& params() const { return params_; }
    double t_max() const { return t_max_; }
    std::size_t node_count() const { return values_.size(); }

private:
    double map_u(double s) const { return std::asinh(s / a_) + alpha_ * s; }
    double map_v(double tp) const { return std::asinh(tp / a_) + alpha_ * tp; }
    double weight(double s2, double tp2) const { return power_ == 0 ? 1.0 : s2 + tp2; }
    bool near_singular(double s, double tp) const;
    double eval_row(const double* row, double s, double tp2) const;

    KernelKind kind_;
    ModelParams params_;
    QuadratureSpec quad_;
    double t_max_;
    double a_;
    double alpha_;
    double c_;         // time scale: t' = c t
    double tp_cut_;    // beyond this t' the kernel is treated as zero
    double step_;
    double s_max_;
    int power_;
    int nu_, nv_;      // node counts (nu_ excludes the ghost column)
    std::vector<double> values_;  // [nv_][nu_ + 1], column 0 mirrors column 2
};

}  // namespace nelson::kernels
