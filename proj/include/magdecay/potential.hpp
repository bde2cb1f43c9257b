#pragma once

#include <array>
#include <string>
#include <vector>

#include "magdecay/jets.hpp"
#include "magdecay/vec3.hpp"

namespace magdecay {

enum class BumpKind { Gaussian, CompactBump, BallIndicator };

/// One analytic bump. Profiles:
///   gaussian        a * exp(-|x-c|^2 / w^2)
///   compact-bump    a * exp(1 - 1/(1 - |x-c|^2/w^2)) inside |x-c| < w, else 0
///   ball-indicator  a inside |x-c| <= w, else 0 (no derivatives)
struct BumpTerm {
    BumpKind kind = BumpKind::Gaussian;
    Vec3 center{};
    double amplitude = 1.0;
    double width = 1.0;

    double eval(const Vec3& p) const;
    Jet4 eval_jet(const Vec3& p) const;  // throws for ball-indicator
    bool smooth() const { return kind != BumpKind::BallIndicator; }
};

struct UnsupportedDerivative : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Value, gradient and Hessian at a point (the second-order data the kernel
/// assembly consumes).
struct SecondOrderEval {
    double value = 0;
    Vec3 grad{};
    double hess[3][3] = {};
};

/// Sum-of-bumps description of a scalar potential V or of one component of A.
struct BumpSum {
    std::vector<BumpTerm> terms;

    double eval(const Vec3& p) const;
    Jet4 eval_jet(const Vec3& p) const;
    /// Mixed partial d^(ax,ay,az); exact, via jet arithmetic.
    double derivative(const Vec3& p, int ax, int ay, int az) const;
    Vec3 gradient(const Vec3& p) const;
    /// Closed-form fast path for gaussians, jets otherwise.
    SecondOrderEval eval_second_order(const Vec3& p) const;
    bool smooth() const;
    bool empty() const { return terms.empty(); }
    /// Cell-averaged sample (antialiases indicator edges); h is the cell side.
    double eval_cell_average(const Vec3& p, double h) const;
};

/// Analytic description of the potentials: scalar V and 3-vector A.
struct PotentialSpec {
    BumpSum scalar;                  // V
    std::array<BumpSum, 3> vector;   // A components

    int derivative_order_available() const;  // 4 for smooth kinds, else 0
    bool scalar_smooth() const { return scalar.smooth(); }
    bool vector_smooth() const;
    bool vector_empty() const;

    Vec3 eval_vector(const Vec3& p) const;
    /// div A, exact.
    double div_vector(const Vec3& p) const;

    static PotentialSpec from_json_string(const std::string& text);
    std::string to_json_string() const;
};

std::string bump_kind_name(BumpKind k);
BumpKind bump_kind_from_name(const std::string& s);

}  // namespace magdecay
