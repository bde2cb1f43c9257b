#include "magdecay/grid.hpp"

#include <cmath>

namespace magdecay {

double ScalarField::norm_l2() const {
    double s = 0;
    for (const auto& v : values) s += std::norm(v);
    return std::sqrt(s * grid.cell_volume());
}

double ScalarField::norm_l1() const {
    double s = 0;
    for (const auto& v : values) s += std::abs(v);
    return s * grid.cell_volume();
}

double ScalarField::norm_linf() const {
    double m = 0;
    for (const auto& v : values) m = std::max(m, std::abs(v));
    return m;
}

bool ScalarField::finite() const {
    for (const auto& v : values)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
}

cplx dot_l2(const ScalarField& a, const ScalarField& b) {
    cplx s{};
    for (std::size_t i = 0; i < a.values.size(); ++i)
        s += std::conj(a.values[i]) * b.values[i];
    return s * a.grid.cell_volume();
}

ScalarField sample_scalar(const BumpSum& s, const Grid3D& g, bool antialias) {
    ScalarField f(g);
    double h = g.h();
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k) {
                Vec3 p = g.point(i, j, k);
                f.at(i, j, k) = antialias ? s.eval_cell_average(p, h) : s.eval(p);
            }
    return f;
}

VectorField sample_vector(const PotentialSpec& spec, const Grid3D& g, bool antialias) {
    VectorField f(g);
    double h = g.h();
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                for (int k = 0; k < g.n; ++k) {
                    Vec3 p = g.point(i, j, k);
                    f.comp[c][g.idx(i, j, k)] =
                        antialias ? spec.vector[c].eval_cell_average(p, h)
                                  : spec.vector[c].eval(p);
                }
    return f;
}

ScalarField sample_scalar_derivative(const BumpSum& s, const Grid3D& g, int ax, int ay,
                                     int az) {
    ScalarField f(g);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k)
                f.at(i, j, k) = s.derivative(g.point(i, j, k), ax, ay, az);
    return f;
}

}  // namespace magdecay
