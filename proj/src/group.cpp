#include "carnot/group.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>

#include "carnot/errors.hpp"

namespace carnot {

namespace {

int factorial(int k) {
    int f = 1;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

}  // namespace

CarnotGroup::CarnotGroup(std::string name, std::vector<int> layers, std::vector<VectorField> fields,
                         std::vector<Polynomial> compose)
    : name_(std::move(name)), layers_(std::move(layers)), fields_(std::move(fields)),
      compose_(std::move(compose)) {
    if (layers_.empty()) throw DomainError("group needs at least one layer");
    for (int m : layers_)
        if (m <= 0) throw DomainError("layer sizes must be positive");
    n_ = std::accumulate(layers_.begin(), layers_.end(), 0);
    for (std::size_t i = 0; i < layers_.size(); ++i)
        for (int k = 0; k < layers_[i]; ++k) sigma_.push_back(static_cast<int>(i) + 1);
    q_ = std::accumulate(sigma_.begin(), sigma_.end(), 0);
    validate();
    for (const auto& f : fields_) {
        std::vector<CompiledPolynomial> c;
        for (const auto& p : f) c.emplace_back(p);
        fields_c_.push_back(std::move(c));
        std::vector<std::vector<CompiledPolynomial>> d(n_);
        for (int j = 0; j < n_; ++j)
            for (int k = 0; k < n_; ++k) d[j].emplace_back(f[j].is_zero() ? Polynomial(n_) : f[j].derivative(k));
        dfields_c_.push_back(std::move(d));
    }
    for (const auto& p : compose_) compose_c_.emplace_back(p);
}

void CarnotGroup::validate() const {
    if (static_cast<int>(fields_.size()) != m1())
        throw DomainError("expected " + std::to_string(m1()) + " generating fields, got " +
                          std::to_string(fields_.size()));
    for (int i = 0; i < m1(); ++i) {
        const auto& f = fields_[i];
        if (static_cast<int>(f.size()) != n_)
            throw DomainError("field " + std::to_string(i) + " has wrong number of components");
        for (int j = 0; j < n_; ++j) {
            if (f[j].nvars() != n_ && !f[j].is_zero())
                throw DomainError("field coefficient arity mismatch");
            int d = f[j].homogeneous_degree(sigma_);
            if (d == -1) continue;
            if (d != sigma_[j] - 1)
                throw DomainError("field X" + std::to_string(i + 1) + " component " + std::to_string(j + 1) +
                                  " is not homogeneous of degree sigma_j - 1");
        }
    }
    if (static_cast<int>(compose_.size()) != n_) throw DomainError("composition rule needs N components");
    std::vector<int> w2(sigma_);
    w2.insert(w2.end(), sigma_.begin(), sigma_.end());
    for (int j = 0; j < n_; ++j) {
        if (compose_[j].nvars() != 2 * n_) throw DomainError("composition polynomial arity must be 2N");
        int d = compose_[j].homogeneous_degree(w2);
        if (d != sigma_[j])
            throw DomainError("composition component " + std::to_string(j + 1) + " is not homogeneous of degree " +
                              std::to_string(sigma_[j]));
    }
}

CarnotGroup CarnotGroup::euclidean(int n) {
    if (n < 1) throw DomainError("euclidean dimension must be positive");
    std::vector<VectorField> fields;
    for (int i = 0; i < n; ++i) {
        VectorField f(n, Polynomial(n));
        f[i] = Polynomial::constant(n, 1.0);
        fields.push_back(f);
    }
    std::vector<Polynomial> comp;
    for (int j = 0; j < n; ++j) comp.push_back(Polynomial::variable(2 * n, j) + Polynomial::variable(2 * n, n + j));
    return CarnotGroup("euclidean" + std::to_string(n), {n}, fields, comp);
}

CarnotGroup CarnotGroup::free_step2(int m) {
    if (m < 2) throw DomainError("free step-two group needs at least two generators");
    const int n = m + m * (m - 1) / 2;
    std::vector<std::pair<int, int>> pairs;
    for (int k = 0; k < m; ++k)
        for (int l = k + 1; l < m; ++l) pairs.emplace_back(k, l);
    std::vector<VectorField> fields;
    for (int i = 0; i < m; ++i) {
        VectorField f(n, Polynomial(n));
        f[i] = Polynomial::constant(n, 1.0);
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            auto [k, l] = pairs[p];
            if (l == i) f[m + p] = f[m + p] + Polynomial::variable(n, k, 0.5);
            if (k == i) f[m + p] = f[m + p] + Polynomial::variable(n, l, -0.5);
        }
        fields.push_back(f);
    }
    std::vector<Polynomial> comp;
    for (int j = 0; j < m; ++j) comp.push_back(Polynomial::variable(2 * n, j) + Polynomial::variable(2 * n, n + j));
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        auto [k, l] = pairs[p];
        int j = m + static_cast<int>(p);
        Polynomial c = Polynomial::variable(2 * n, j) + Polynomial::variable(2 * n, n + j);
        c = c + Polynomial::variable(2 * n, k, 0.5) * Polynomial::variable(2 * n, n + l);
        c = c - Polynomial::variable(2 * n, l, 0.5) * Polynomial::variable(2 * n, n + k);
        comp.push_back(c);
    }
    return CarnotGroup(m == 2 ? "heisenberg1" : "free2_" + std::to_string(m), {m, n - m}, fields, comp);
}

CarnotGroup CarnotGroup::heisenberg1() { return free_step2(2); }

CarnotGroup CarnotGroup::from_name(const std::string& name) {
    std::smatch mt;
    static const std::regex eu("euclidean([0-9]+)"), fr("free2_([0-9]+)");
    if (name == "heisenberg1") return heisenberg1();
    if (std::regex_match(name, mt, eu)) return euclidean(std::stoi(mt[1]));
    if (std::regex_match(name, mt, fr)) return free_step2(std::stoi(mt[1]));
    throw DomainError("unknown group '" + name + "'");
}

Point CarnotGroup::compose(const Point& x, const Point& y) const {
    if (x.size() != n_ || y.size() != n_) throw DomainError("point dimension does not match group");
    double buf[64];
    std::vector<double> big;
    double* z = buf;
    if (2 * n_ > 64) {
        big.resize(2 * n_);
        z = big.data();
    }
    for (int i = 0; i < n_; ++i) {
        z[i] = x[i];
        z[n_ + i] = y[i];
    }
    Point r(n_);
    for (int j = 0; j < n_; ++j) r[j] = compose_c_[j].eval(z);
    return r;
}

void CarnotGroup::compose_into(const double* x, const double* y, double* out) const {
    if (is_euclidean()) {
        for (int i = 0; i < n_; ++i) out[i] = x[i] + y[i];
        return;
    }
    double buf[64];
    std::vector<double> big;
    double* z = buf;
    if (2 * n_ > 64) {
        big.resize(2 * n_);
        z = big.data();
    }
    std::copy(x, x + n_, z);
    std::copy(y, y + n_, z + n_);
    for (int j = 0; j < n_; ++j) out[j] = compose_c_[j].eval(z);
}

Point CarnotGroup::dilate(double r, const Point& x) const {
    Point y(x);
    for (int j = 0; j < n_; ++j) y[j] *= std::pow(r, sigma_[j]);
    return y;
}

Point CarnotGroup::field(int i, const Point& x) const {
    Point v(n_);
    for (int j = 0; j < n_; ++j) v[j] = fields_c_.at(i)[j].eval(x.data());
    return v;
}

Eigen::MatrixXd CarnotGroup::field_matrix(const Point& x) const {
    Eigen::MatrixXd m(n_, m1());
    for (int i = 0; i < m1(); ++i) m.col(i) = field(i, x);
    return m;
}

Point CarnotGroup::horizontal(const Eigen::VectorXd& alpha, const Point& x) const {
    Point out(n_);
    horizontal_into(alpha.data(), x.data(), out.data());
    return out;
}

void CarnotGroup::horizontal_into(const double* alpha, const double* x, double* out) const {
    for (int j = 0; j < n_; ++j) {
        double s = 0.0;
        for (int i = 0; i < m1(); ++i)
            if (alpha[i] != 0.0 && !fields_c_[i][j].is_zero()) s += alpha[i] * fields_c_[i][j].eval(x);
        out[j] = s;
    }
}

void CarnotGroup::horizontal_jacobian_into(const double* alpha, const double* x, double* out) const {
    for (int j = 0; j < n_; ++j)
        for (int k = 0; k < n_; ++k) {
            double s = 0.0;
            for (int i = 0; i < m1(); ++i)
                if (alpha[i] != 0.0 && !dfields_c_[i][j][k].is_zero()) s += alpha[i] * dfields_c_[i][j][k].eval(x);
            out[j * n_ + k] = s;
        }
}

double CarnotGroup::gauge(const Point& x) const {
    const int kappa = step();
    const double e = 2.0 * factorial(kappa);
    double s = 0.0;
    for (int j = 0; j < n_; ++j) s += std::pow(std::abs(x[j]), e / sigma_[j]);
    return std::pow(s, 1.0 / e);
}

HormanderReport CarnotGroup::check_hormander(const Point& x) const {
    HormanderReport rep;
    std::vector<VectorField> level(fields_.begin(), fields_.end());
    std::vector<Point> cols;
    const int max_step = std::max(step(), 1) + 1;
    for (int s = 1; s <= max_step; ++s) {
        for (const auto& v : level) cols.push_back(eval_field(v, x));
        Eigen::MatrixXd m(n_, static_cast<int>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) m.col(static_cast<int>(c)) = cols[c];
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
        const auto& sv = svd.singularValues();
        double tol = 1e-10 * std::max(1.0, sv.size() ? sv[0] : 0.0);
        int rank = 0;
        for (int k = 0; k < sv.size(); ++k)
            if (sv[k] > tol) ++rank;
        rep.rank = rank;
        if (rank == n_) {
            rep.step_reached = s;
            rep.satisfied = true;
            return rep;
        }
        std::vector<VectorField> next;
        for (const auto& xi : fields_)
            for (const auto& v : level) next.push_back(lie_bracket(xi, v));
        level = std::move(next);
    }
    return rep;
}

VectorField lie_bracket(const VectorField& v, const VectorField& w) {
    const int n = static_cast<int>(v.size());
    VectorField r(n, Polynomial(n));
    for (int k = 0; k < n; ++k) {
        Polynomial acc(n);
        for (int j = 0; j < n; ++j) {
            if (!v[j].is_zero()) acc = acc + v[j] * w[k].derivative(j);
            if (!w[j].is_zero()) acc = acc - w[j] * v[k].derivative(j);
        }
        r[k] = acc;
    }
    return r;
}

Point eval_field(const VectorField& v, const Point& x) {
    Point r(static_cast<int>(v.size()));
    for (std::size_t k = 0; k < v.size(); ++k) r[static_cast<int>(k)] = v[k].is_zero() ? 0.0 : v[k].eval(x.data());
    return r;
}

Point lie_bracket(const CarnotGroup& g, int i, int j, const Point& x) {
    return eval_field(lie_bracket(g.field_polynomials(i), g.field_polynomials(j)), x);
}

nlohmann::json polynomial_to_json(const Polynomial& p) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [e, c] : p.terms()) arr.push_back({{"c", c}, {"e", e}});
    return arr;
}

Polynomial polynomial_from_json(const nlohmann::json& j, int nvars) {
    if (!j.is_array()) throw DomainError("polynomial must be a list of {c, e} terms");
    Polynomial p(nvars);
    for (const auto& t : j) {
        if (!t.is_object() || !t.contains("c") || !t.contains("e"))
            throw DomainError("polynomial term must have keys 'c' and 'e'");
        auto e = t.at("e").get<std::vector<int>>();
        if (static_cast<int>(e.size()) != nvars)
            throw DomainError("monomial has " + std::to_string(e.size()) + " exponents, expected " +
                              std::to_string(nvars));
        p.add_term(e, t.at("c").get<double>());
    }
    return p;
}

nlohmann::json CarnotGroup::to_json() const {
    nlohmann::json f = nlohmann::json::array();
    for (const auto& v : fields_) {
        nlohmann::json comps = nlohmann::json::array();
        for (const auto& p : v) comps.push_back(polynomial_to_json(p));
        f.push_back(comps);
    }
    nlohmann::json c = nlohmann::json::array();
    for (const auto& p : compose_) c.push_back(polynomial_to_json(p));
    return {{"name", name_}, {"N", n_}, {"layers", layers_}, {"sigma", sigma_}, {"fields", f}, {"compose", c}};
}

CarnotGroup CarnotGroup::from_json(const nlohmann::json& j) {
    if (j.is_string()) return from_name(j.get<std::string>());
    if (!j.is_object()) throw DomainError("group must be a name or an object");
    for (const char* key : {"name", "N", "layers", "fields", "compose"})
        if (!j.contains(key)) throw DomainError(std::string("group JSON missing key '") + key + "'");
    try {
        const int n = j.at("N").get<int>();
        auto layers = j.at("layers").get<std::vector<int>>();
        if (std::accumulate(layers.begin(), layers.end(), 0) != n)
            throw DomainError("layer sizes do not sum to N");
        std::vector<VectorField> fields;
        for (const auto& fj : j.at("fields")) {
            VectorField v;
            for (const auto& pj : fj) v.push_back(polynomial_from_json(pj, n));
            fields.push_back(v);
        }
        std::vector<Polynomial> comp;
        for (const auto& pj : j.at("compose")) comp.push_back(polynomial_from_json(pj, 2 * n));
        CarnotGroup g(j.at("name").get<std::string>(), layers, fields, comp);
        if (j.contains("sigma") && j.at("sigma").get<std::vector<int>>() != g.sigma())
            throw DomainError("sigma is inconsistent with layers");
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw DomainError(std::string("malformed group JSON: ") + e.what());
    }
}

}  // namespace carnot
