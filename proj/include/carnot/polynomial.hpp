#pragma once

#include <map>
#include <string>
#include <vector>

namespace carnot {

// Sparse real polynomial in a fixed number of variables, keyed by exponent vectors.
class Polynomial {
public:
    using Exponents = std::vector<int>;

    Polynomial() = default;
    explicit Polynomial(int nvars) : nvars_(nvars) {}

    static Polynomial constant(int nvars, double c);
    static Polynomial variable(int nvars, int i, double coef = 1.0);

    int nvars() const { return nvars_; }
    const std::map<Exponents, double>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    void add_term(const Exponents& e, double c);
    double eval(const double* x) const;
    double eval(const std::vector<double>& x) const { return eval(x.data()); }

    Polynomial derivative(int var) const;

    // Weighted degree of every monomial with variable weights w; returns -1 if zero,
    // -2 if the polynomial mixes degrees.
    int homogeneous_degree(const std::vector<int>& w) const;

    Polynomial operator+(const Polynomial& o) const;
    Polynomial operator-(const Polynomial& o) const;
    Polynomial operator*(const Polynomial& o) const;
    Polynomial scaled(double s) const;

    std::string to_string() const;

private:
    int nvars_ = 0;
    std::map<Exponents, double> terms_;
};

// Flattened form used on hot paths (flows, field evaluation).
class CompiledPolynomial {
public:
    CompiledPolynomial() = default;
    explicit CompiledPolynomial(const Polynomial& p);
    double eval(const double* x) const;
    bool is_zero() const { return coef_.empty(); }

private:
    int nvars_ = 0;
    int max_deg_ = 0;
    std::vector<double> coef_;
    std::vector<int> exps_;
};

}  // namespace carnot
