#include "magdecay/potential.hpp"

#include <nlohmann/json.hpp>

namespace magdecay {

using nlohmann::json;

double BumpTerm::eval(const Vec3& p) const {
    Vec3 d = p - center;
    double s = d.norm2() / (width * width);
    switch (kind) {
        case BumpKind::Gaussian:
            return amplitude * std::exp(-s);
        case BumpKind::CompactBump:
            if (s >= 1.0) return 0.0;
            return amplitude * std::exp(1.0 - 1.0 / (1.0 - s));
        case BumpKind::BallIndicator:
            return s <= 1.0 ? amplitude : 0.0;
    }
    return 0.0;
}

Jet4 BumpTerm::eval_jet(const Vec3& p) const {
    if (kind == BumpKind::BallIndicator)
        throw UnsupportedDerivative("derivative of ball-indicator requested");
    Jet4 s = Jet4::constant(0.0);
    for (int ax = 0; ax < 3; ++ax) {
        Jet4 d = Jet4::coordinate(ax, p[ax] - center[ax]);
        s += d * d;
    }
    s *= 1.0 / (width * width);
    if (kind == BumpKind::Gaussian) {
        Jet4 e = (s * -1.0).exp();
        return e * amplitude;
    }
    // compact bump; the jet is identically 0 outside the open support
    double s0 = s.value();
    if (s0 >= 1.0) return Jet4{};
    Jet4 one_minus = Jet4::constant(1.0) - s;
    Jet4 w = Jet4::constant(1.0) - one_minus.recip();
    return w.exp() * amplitude;
}

double BumpSum::eval(const Vec3& p) const {
    double v = 0;
    for (const auto& t : terms) v += t.eval(p);
    return v;
}

Jet4 BumpSum::eval_jet(const Vec3& p) const {
    Jet4 j{};
    for (const auto& t : terms) j += t.eval_jet(p);
    return j;
}

double BumpSum::derivative(const Vec3& p, int ax, int ay, int az) const {
    if (ax + ay + az == 0) return eval(p);
    return eval_jet(p).derivative(ax, ay, az);
}

Vec3 BumpSum::gradient(const Vec3& p) const {
    return eval_second_order(p).grad;
}

SecondOrderEval BumpSum::eval_second_order(const Vec3& p) const {
    SecondOrderEval out;
    for (const auto& t : terms) {
        if (t.kind == BumpKind::Gaussian) {
            Vec3 d = p - t.center;
            double iw2 = 1.0 / (t.width * t.width);
            double g = t.amplitude * std::exp(-d.norm2() * iw2);
            out.value += g;
            for (int i = 0; i < 3; ++i) {
                out.grad[i] += -2 * d[i] * iw2 * g;
                for (int j = 0; j < 3; ++j)
                    out.hess[i][j] +=
                        (4 * d[i] * d[j] * iw2 * iw2 - (i == j ? 2 * iw2 : 0)) * g;
            }
            continue;
        }
        Jet4 jet = t.eval_jet(p);
        out.value += jet.value();
        out.grad.x += jet.derivative(1, 0, 0);
        out.grad.y += jet.derivative(0, 1, 0);
        out.grad.z += jet.derivative(0, 0, 1);
        double hxx = jet.derivative(2, 0, 0), hyy = jet.derivative(0, 2, 0),
               hzz = jet.derivative(0, 0, 2);
        double hxy = jet.derivative(1, 1, 0), hxz = jet.derivative(1, 0, 1),
               hyz = jet.derivative(0, 1, 1);
        out.hess[0][0] += hxx;
        out.hess[1][1] += hyy;
        out.hess[2][2] += hzz;
        out.hess[0][1] += hxy;
        out.hess[1][0] += hxy;
        out.hess[0][2] += hxz;
        out.hess[2][0] += hxz;
        out.hess[1][2] += hyz;
        out.hess[2][1] += hyz;
    }
    return out;
}

bool BumpSum::smooth() const {
    for (const auto& t : terms)
        if (!t.smooth()) return false;
    return true;
}

double BumpSum::eval_cell_average(const Vec3& p, double h) const {
    double v = 0;
    for (const auto& t : terms) {
        if (t.kind != BumpKind::BallIndicator) {
            v += t.eval(p);
            continue;
        }
        // subsample cells that straddle the sphere edge
        double d = (p - t.center).norm();
        double half_diag = 0.87 * h;
        if (d + half_diag < t.width) {
            v += t.amplitude;
        } else if (d - half_diag > t.width) {
            // outside
        } else {
            constexpr int m = 6;
            int inside = 0;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    for (int k = 0; k < m; ++k) {
                        Vec3 q{p.x + h * ((i + 0.5) / m - 0.5),
                               p.y + h * ((j + 0.5) / m - 0.5),
                               p.z + h * ((k + 0.5) / m - 0.5)};
                        if ((q - t.center).norm() <= t.width) ++inside;
                    }
            v += t.amplitude * inside / double(m * m * m);
        }
    }
    return v;
}

int PotentialSpec::derivative_order_available() const {
    bool smooth = scalar.smooth() && vector_smooth();
    return smooth ? 4 : 0;
}

bool PotentialSpec::vector_smooth() const {
    return vector[0].smooth() && vector[1].smooth() && vector[2].smooth();
}

bool PotentialSpec::vector_empty() const {
    return vector[0].empty() && vector[1].empty() && vector[2].empty();
}

Vec3 PotentialSpec::eval_vector(const Vec3& p) const {
    return {vector[0].eval(p), vector[1].eval(p), vector[2].eval(p)};
}

double PotentialSpec::div_vector(const Vec3& p) const {
    return vector[0].derivative(p, 1, 0, 0) + vector[1].derivative(p, 0, 1, 0) +
           vector[2].derivative(p, 0, 0, 1);
}

std::string bump_kind_name(BumpKind k) {
    switch (k) {
        case BumpKind::Gaussian: return "gaussian";
        case BumpKind::CompactBump: return "compact-bump";
        case BumpKind::BallIndicator: return "ball-indicator";
    }
    return "?";
}

BumpKind bump_kind_from_name(const std::string& s) {
    if (s == "gaussian") return BumpKind::Gaussian;
    if (s == "compact-bump") return BumpKind::CompactBump;
    if (s == "ball-indicator") return BumpKind::BallIndicator;
    throw std::invalid_argument("unknown bump kind: " + s);
}

namespace {

json term_to_json(const BumpTerm& t) {
    return json{{"kind", bump_kind_name(t.kind)},
                {"center", {t.center.x, t.center.y, t.center.z}},
                {"amplitude", t.amplitude},
                {"width", t.width}};
}

BumpTerm term_from_json(const json& j) {
    BumpTerm t;
    t.kind = bump_kind_from_name(j.at("kind").get<std::string>());
    auto c = j.at("center");
    t.center = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
    t.amplitude = j.at("amplitude").get<double>();
    t.width = j.at("width").get<double>();
    if (!(t.width > 0)) throw std::invalid_argument("bump width must be > 0");
    return t;
}

}  // namespace

PotentialSpec PotentialSpec::from_json_string(const std::string& text) {
    json j = json::parse(text);
    PotentialSpec s;
    if (j.contains("scalar"))
        for (const auto& t : j["scalar"]) s.scalar.terms.push_back(term_from_json(t));
    if (j.contains("vector")) {
        const auto& v = j["vector"];
        if (!v.is_array() || v.size() != 3)
            throw std::invalid_argument("vector potential needs 3 component lists");
        for (int k = 0; k < 3; ++k)
            for (const auto& t : v[k]) s.vector[k].terms.push_back(term_from_json(t));
    }
    return s;
}

std::string PotentialSpec::to_json_string() const {
    json scal = json::array(), vec = json::array();
    for (const auto& t : scalar.terms) scal.push_back(term_to_json(t));
    for (int k = 0; k < 3; ++k) {
        json comp = json::array();
        for (const auto& t : vector[k].terms) comp.push_back(term_to_json(t));
        vec.push_back(comp);
    }
    return json{{"scalar", scal}, {"vector", vec}}.dump(2);
}

}  // namespace magdecay
