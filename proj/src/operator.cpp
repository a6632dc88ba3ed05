#include "carnot/operator.hpp"

#include <cmath>
#include <limits>

#include "carnot/errors.hpp"
#include "carnot/special.hpp"

namespace carnot {

double Bump::value(const double* x, double t) const {
    if (amplitude == 0.0) return 0.0;
    double r2 = 0.0;
    for (int k = 0; k < center.size(); ++k) r2 += (x[k] - center[k]) * (x[k] - center[k]);
    double dt = t - t_center;
    return amplitude * std::exp(-r2 / (width * width) - dt * dt / (t_width * t_width));
}

double Bump::eval(const double* x, double t, double* grad, double* hess) const {
    const int n = static_cast<int>(center.size());
    double v = value(x, t);
    const double w2 = width * width;
    for (int k = 0; k < n; ++k) {
        double dk = x[k] - center[k];
        if (grad) grad[k] = -2.0 * dk / w2 * v;
        if (hess)
            for (int l = 0; l < n; ++l)
                hess[k * n + l] = (4.0 * dk * (x[l] - center[l]) / (w2 * w2) - (k == l ? 2.0 / w2 : 0.0)) * v;
    }
    return v;
}

nlohmann::json CoefficientField::to_json() const {
    auto mat = [](const Eigen::MatrixXd& m) {
        nlohmann::json a = nlohmann::json::array();
        for (int i = 0; i < m.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
            a.push_back(row);
        }
        return a;
    };
    if (is_constant()) return {{"kind", "constant"}, {"value", mat(base)}};
    std::vector<double> c(bump.center.data(), bump.center.data() + bump.center.size());
    return {{"kind", "bump"},           {"base", mat(base)},      {"shape", mat(shape)},
            {"amplitude", bump.amplitude}, {"center", c},          {"t_center", bump.t_center},
            {"width", bump.width},      {"t_width", bump.t_width}};
}

namespace {

Eigen::MatrixXd parse_array(const nlohmann::json& j, int rows, int cols, const std::string& what) {
    Eigen::MatrixXd m(rows, cols);
    if (j.is_number()) {
        double v = j.get<double>();
        if (rows == cols && rows > 1) return v * Eigen::MatrixXd::Identity(rows, cols);
        m.setConstant(v);
        return m;
    }
    if (!j.is_array()) throw DomainError(what + ": expected a number or an array");
    if (cols == 1 && !j.empty() && j[0].is_number()) {
        if (static_cast<int>(j.size()) != rows) throw DomainError(what + ": expected length " + std::to_string(rows));
        for (int i = 0; i < rows; ++i) m(i, 0) = j[i].get<double>();
        return m;
    }
    if (static_cast<int>(j.size()) != rows) throw DomainError(what + ": expected " + std::to_string(rows) + " rows");
    for (int i = 0; i < rows; ++i) {
        if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols)
            throw DomainError(what + ": row " + std::to_string(i) + " must have " + std::to_string(cols) + " entries");
        for (int k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

CoefficientField parse_field(const nlohmann::json* j, int rows, int cols, int n, const std::string& what) {
    CoefficientField f;
    f.base = Eigen::MatrixXd::Zero(rows, cols);
    f.shape = Eigen::MatrixXd::Ones(rows, cols);
    if (rows == cols && rows > 1) f.shape = Eigen::MatrixXd::Identity(rows, cols);
    f.bump.center = Point::Zero(n);
    if (!j || j->is_null()) return f;
    if (!j->is_object()) {
        f.base = parse_array(*j, rows, cols, what);
        return f;
    }
    const std::string kind = j->value("kind", "constant");
    if (kind == "constant") {
        if (!j->contains("value")) throw DomainError(what + ": constant coefficient needs 'value'");
        f.base = parse_array(j->at("value"), rows, cols, what);
    } else if (kind == "bump") {
        if (j->contains("base")) f.base = parse_array(j->at("base"), rows, cols, what);
        if (j->contains("shape")) f.shape = parse_array(j->at("shape"), rows, cols, what + ".shape");
        f.bump.amplitude = j->value("amplitude", 0.0);
        if (j->contains("center")) f.bump.center = parse_array(j->at("center"), n, 1, what + ".center");
        f.bump.t_center = j->value("t_center", 0.0);
        f.bump.width = j->value("width", 1.0);
        f.bump.t_width = j->value("t_width", 1.0);
        if (!(f.bump.width > 0.0) || !(f.bump.t_width > 0.0)) throw DomainError(what + ": bump widths must be positive");
    } else {
        throw DomainError(what + ": unknown coefficient kind '" + kind + "'");
    }
    return f;
}

// X_i phi and X_i X_j phi from the Euclidean gradient and Hessian.
struct LieJet {
    const CarnotGroup& g;
    std::vector<double> X;   // m1 x N, X[i*N + k] = X_i^k(x)
    std::vector<double> DX;  // m1 x N x N, d_l X_j^k
    explicit LieJet(const CarnotGroup& grp, const double* x) : g(grp) {
        const int n = g.dim(), m = g.m1();
        X.assign(static_cast<std::size_t>(m) * n, 0.0);
        DX.assign(static_cast<std::size_t>(m) * n * n, 0.0);
        std::vector<double> e(m, 0.0);
        for (int i = 0; i < m; ++i) {
            e[i] = 1.0;
            g.horizontal_into(e.data(), x, &X[static_cast<std::size_t>(i) * n]);
            g.horizontal_jacobian_into(e.data(), x, &DX[static_cast<std::size_t>(i) * n * n]);
            e[i] = 0.0;
        }
    }
    double first(int i, const double* grad) const {
        const int n = g.dim();
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += grad[k] * X[static_cast<std::size_t>(i) * n + k];
        return s;
    }
    double second(int i, int j, const double* grad, const double* hess) const {
        const int n = g.dim();
        const double* xi = &X[static_cast<std::size_t>(i) * n];
        const double* xj = &X[static_cast<std::size_t>(j) * n];
        const double* dj = &DX[static_cast<std::size_t>(j) * n * n];
        double s = 0.0;
        for (int k = 0; k < n; ++k) {
            for (int l = 0; l < n; ++l) s += xi[k] * xj[l] * hess[k * n + l];
            double dxk = 0.0;
            for (int l = 0; l < n; ++l) dxk += dj[k * n + l] * xi[l];
            s += grad[k] * dxk;
        }
        return s;
    }
};

}  // namespace

Eigen::MatrixXd OperatorSpec::a_at(const Point& x, double t) const {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a(m1(), m1());
    A(x.data(), t, a.data());
    return a;
}

Eigen::VectorXd OperatorSpec::b_at(const Point& x, double t) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m1());
    if (b) b(x.data(), t, v.data());
    return v;
}

double OperatorSpec::c_at(const Point& x, double t) const { return c ? c(x.data(), t) : 0.0; }

OperatorSpec operator_from_fields(const CarnotGroup& g, const CoefficientField& Af, const CoefficientField& bf,
                                  const CoefficientField& cf, double lambda, double M2, double alpha) {
    const int m = g.m1(), n = g.dim();
    if (Af.base.rows() != m || Af.base.cols() != m) throw DomainError("A must be m1 x m1");
    if ((Af.base - Af.base.transpose()).norm() > 1e-14 * (1.0 + Af.base.norm()) ||
        (Af.shape - Af.shape.transpose()).norm() > 1e-14 * (1.0 + Af.shape.norm()))
        throw DomainError("A must be symmetric");
    if (!(alpha > 0.0) || alpha > 1.0) throw DomainError("alpha must lie in (0, 1]");
    OperatorSpec op;
    op.group = g;
    op.alpha = alpha;
    op.M2 = M2;
    op.constant_A = Af.is_constant();
    op.constant_c = cf.is_constant();
    op.A = [Af, m](const double* x, double t, double* a) {
        double p = Af.bump.value(x, t);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) a[i * m + j] = Af.base(i, j) + p * Af.shape(i, j);
    };
    if (!bf.base.isZero(0.0) || !bf.is_constant())
        op.b = [bf, m](const double* x, double t, double* b) {
            double p = bf.bump.value(x, t);
            for (int i = 0; i < m; ++i) b[i] = bf.base(i, 0) + p * bf.shape(i, 0);
        };
    if (cf.base(0, 0) != 0.0 || !cf.is_constant())
        op.c = [cf](const double* x, double t) { return cf.base(0, 0) + cf.bump.value(x, t) * cf.shape(0, 0); };

    op.XA = [g, Af, m, n](const double* x, double t, double* out) {
        for (int i = 0; i < m; ++i) out[i] = 0.0;
        if (Af.is_constant()) return;
        std::vector<double> grad(n);
        Af.bump.eval(x, t, grad.data(), nullptr);
        LieJet jet(g, x);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) out[i] += Af.shape(i, j) * jet.first(j, grad.data());
    };
    op.XXA = [g, Af, m, n](const double* x, double t) {
        if (Af.is_constant()) return 0.0;
        std::vector<double> grad(n), hess(static_cast<std::size_t>(n) * n);
        Af.bump.eval(x, t, grad.data(), hess.data());
        LieJet jet(g, x);
        double s = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) s += Af.shape(i, j) * jet.second(i, j, grad.data(), hess.data());
        return s;
    };
    op.Xb = [g, bf, m, n](const double* x, double t) {
        if (bf.is_constant()) return 0.0;
        std::vector<double> grad(n);
        bf.bump.eval(x, t, grad.data(), nullptr);
        LieJet jet(g, x);
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += bf.shape(i, 0) * jet.first(i, grad.data());
        return s;
    };

    // Ellipticity bounds over the range of the bump profile, which is the segment between
    // base and base + amplitude * shape.
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double s : {0.0, Af.bump.amplitude}) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Af.base + s * Af.shape);
        lo = std::min(lo, es.eigenvalues().minCoeff());
        hi = std::max(hi, es.eigenvalues().maxCoeff());
    }
    if (!(lo > 0.0)) throw DomainError("A is not uniformly positive definite");
    const double need = std::max(hi, 1.0 / lo);
    if (lambda <= 0.0) lambda = need;
    if (lambda < need * (1.0 - 1e-12))
        throw DomainError("declared lambda " + std::to_string(lambda) + " is below the ellipticity bound " +
                          std::to_string(need));
    op.lambda = lambda;
    double sup = 0.0;
    for (double s : {0.0, 1.0}) {
        sup = std::max(sup, (Af.base + s * Af.bump.amplitude * Af.shape).cwiseAbs().maxCoeff());
        sup = std::max(sup, (bf.base + s * bf.bump.amplitude * bf.shape).cwiseAbs().maxCoeff());
        sup = std::max(sup, std::abs(cf.base(0, 0) + s * cf.bump.amplitude * cf.shape(0, 0)));
    }
    op.M1 = sup;
    op.source = {{"group", g.name()},
                 {"A", Af.to_json()},
                 {"b", bf.to_json()},
                 {"c", cf.to_json()},
                 {"lambda", lambda},
                 {"M2", M2},
                 {"alpha", alpha}};
    return op;
}

OperatorSpec constant_operator(const CarnotGroup& g, const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double c,
                               double lambda) {
    const int m = g.m1();
    CoefficientField Af, bf, cf;
    Af.base = A;
    Af.shape = Eigen::MatrixXd::Identity(m, m);
    Af.bump.center = Point::Zero(g.dim());
    bf.base = b.size() ? Eigen::MatrixXd(b) : Eigen::MatrixXd::Zero(m, 1);
    bf.shape = Eigen::MatrixXd::Ones(m, 1);
    bf.bump.center = Point::Zero(g.dim());
    cf.base = Eigen::MatrixXd::Constant(1, 1, c);
    cf.shape = Eigen::MatrixXd::Ones(1, 1);
    cf.bump.center = Point::Zero(g.dim());
    if (bf.base.rows() != m) throw DomainError("b must have length m1");
    return operator_from_fields(g, Af, bf, cf, lambda, 0.0, 1.0);
}

OperatorSpec operator_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw DomainError("operator spec must be a JSON object");
    if (!j.contains("group")) throw DomainError("operator spec needs 'group'");
    CarnotGroup g = j["group"].is_string() ? CarnotGroup::from_name(j["group"].get<std::string>())
                                           : CarnotGroup::from_json(j["group"]);
    const int m = g.m1(), n = g.dim();
    auto get = [&](const char* k) -> const nlohmann::json* { return j.contains(k) ? &j.at(k) : nullptr; };
    if (!j.contains("A")) throw DomainError("operator spec needs 'A'");
    CoefficientField Af = parse_field(get("A"), m, m, n, "A");
    CoefficientField bf = parse_field(get("b"), m, 1, n, "b");
    CoefficientField cf = parse_field(get("c"), 1, 1, n, "c");
    OperatorSpec op = operator_from_fields(g, Af, bf, cf, j.value("lambda", 0.0), j.value("M2", 0.0),
                                           j.value("alpha", 1.0));
    if (j.contains("M1")) {
        double m1 = j["M1"].get<double>();
        if (m1 < op.M1 * (1.0 - 1e-12)) throw DomainError("declared M1 is below the coefficient sup");
        op.M1 = m1;
    }
    op.source["group"] = j["group"];
    return op;
}

OperatorSpec adjoint_reversed(const OperatorSpec& op) {
    if (!op.has_adjoint_data()) throw DomainError("adjoint needs the Lie derivatives of a and b");
    const int m = op.m1();
    OperatorSpec r = op;
    auto A = op.A;
    auto b = op.b;
    auto c = op.c;
    auto XA = op.XA;
    auto XXA = op.XXA;
    auto Xb = op.Xb;
    r.A = [A](const double* x, double t, double* a) { A(x, -t, a); };
    r.b = [b, XA, m](const double* x, double t, double* out) {
        std::vector<double> d(m), bb(m, 0.0);
        XA(x, -t, d.data());
        if (b) b(x, -t, bb.data());
        for (int i = 0; i < m; ++i) out[i] = 2.0 * d[i] - bb[i];
    };
    r.c = [c, XXA, Xb](const double* x, double t) { return (c ? c(x, -t) : 0.0) + XXA(x, -t) - Xb(x, -t); };
    r.XA = [XA](const double* x, double t, double* out) { XA(x, -t, out); };
    r.XXA = [XXA](const double* x, double t) { return XXA(x, -t); };
    r.Xb = [XXA, Xb](const double* x, double t) { return 2.0 * XXA(x, -t) - Xb(x, -t); };
    r.constant_c = op.constant_c && op.constant_A;
    r.source = {{"adjoint_of", op.source}};
    return r;
}

OperatorCheck check_operator(const OperatorSpec& op, int samples, std::uint64_t seed) {
    const int n = op.group.dim(), m = op.m1();
    OperatorCheck rep;
    rep.min_eig = std::numeric_limits<double>::infinity();
    std::vector<Point> xs;
    std::vector<double> ts;
    std::vector<Eigen::VectorXd> coefs;
    for (int s = 0; s < samples; ++s) {
        auto h = halton_point(seed * 7919 + s + 1, n + 1);
        Point x(n);
        for (int k = 0; k < n; ++k) x[k] = 4.0 * h[k] - 2.0;
        double t = 2.0 * h[n] - 1.0;
        Eigen::MatrixXd a = op.a_at(x, t);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
        rep.min_eig = std::min(rep.min_eig, es.eigenvalues().minCoeff());
        rep.max_eig = std::max(rep.max_eig, es.eigenvalues().maxCoeff());
        Eigen::VectorXd v(m * m + m + 1);
        v.head(m * m) = Eigen::Map<Eigen::VectorXd>(a.data(), m * m);
        v.segment(m * m, m) = op.b_at(x, t);
        v[m * m + m] = op.c_at(x, t);
        rep.sup = std::max(rep.sup, v.cwiseAbs().maxCoeff());
        for (std::size_t q = 0; q < xs.size(); ++q) {
            double d = op.group.gauge(op.group.compose(-xs[q], x)) + std::sqrt(std::abs(t - ts[q]));
            if (d > 1e-9) rep.holder = std::max(rep.holder, (v - coefs[q]).cwiseAbs().maxCoeff() / std::pow(d, op.alpha));
        }
        xs.push_back(x);
        ts.push_back(t);
        coefs.push_back(v);
    }
    rep.elliptic = rep.min_eig >= 1.0 / op.lambda * (1.0 - 1e-12) && rep.max_eig <= op.lambda * (1.0 + 1e-12);
    rep.bounded = rep.sup <= op.M1 * (1.0 + 1e-12) && (op.M2 <= 0.0 || rep.holder <= op.M2);
    return rep;
}

}  // namespace carnot
