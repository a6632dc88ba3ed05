#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "carnot/acceptance.hpp"
#include "carnot/distance.hpp"
#include "carnot/errors.hpp"
#include "carnot/harnack.hpp"
#include "carnot/kernels.hpp"
#include "carnot/mean_value.hpp"
#include "carnot/parametrix.hpp"

namespace py = pybind11;
using namespace carnot;

namespace {

CarnotGroup group_of(const std::string& spec) {
    if (!spec.empty() && spec.front() == '{') return CarnotGroup::from_json(nlohmann::json::parse(spec));
    return CarnotGroup::from_name(spec);
}

OperatorSpec operator_of(const std::string& spec) { return operator_from_json(nlohmann::json::parse(spec)); }

// Python callables are called with the GIL held; the library itself is single threaded.
SolutionFn wrap(const std::function<double(const Eigen::VectorXd&, double)>& f) {
    if (!f) return nullptr;
    return [f](const Point& x, double t) { return f(x, t); };
}

}  // namespace

PYBIND11_MODULE(_carnot, m) {
    m.doc() = "Carnot group heat operators: distances, kernels, parametrix, mean values, Harnack chains";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("compose", [](const std::string& g, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        return Eigen::VectorXd(group_of(g).compose(x, y));
    });
    m.def("dilate", [](const std::string& g, double r, const Eigen::VectorXd& x) {
        return Eigen::VectorXd(group_of(g).dilate(r, x));
    });
    m.def("gauge", [](const std::string& g, const Eigen::VectorXd& x) { return group_of(g).gauge(x); });

    m.def(
        "cc_distance",
        [](const std::string& g, const Eigen::VectorXd& x, const Eigen::VectorXd& y, const std::string& p,
           int restarts, std::uint64_t seed) {
            DistanceConfig cfg;
            cfg.p = cost_norm_from_string(p);
            cfg.restarts = restarts;
            cfg.seed = seed;
            auto r = cc_distance(group_of(g), x, y, cfg);
            return py::dict(py::arg("value") = r.value, py::arg("gap_estimate") = r.gap_estimate,
                            py::arg("endpoint_residual") = r.endpoint_residual, py::arg("converged") = r.converged,
                            py::arg("controls") = r.trajectory.controls, py::arg("path") = r.trajectory.path);
        },
        py::arg("group"), py::arg("x"), py::arg("y"), py::arg("p") = "2", py::arg("restarts") = 8,
        py::arg("seed") = 0);

    m.def(
        "heat_kernel",
        [](const std::string& g, const Eigen::VectorXd& x, double t) {
            auto k = heat_kernel(group_of(g), x, t);
            return py::make_tuple(k.value, k.quad_error);
        },
        py::arg("group"), py::arg("x"), py::arg("t"));

    m.def(
        "fundamental_solution",
        [](const std::string& op, const Eigen::VectorXd& x, double t, const Eigen::VectorXd& xi, double tau,
           int order) {
            ParametrixConfig cfg;
            cfg.order = order;
            auto e = fundamental_solution(operator_of(op), {x, t}, {xi, tau}, cfg);
            return py::dict(py::arg("Gamma") = e.total, py::arg("Z") = e.z_value, py::arg("J") = e.j_value,
                            py::arg("quad_error") = e.quad_error, py::arg("tail_bound") = e.tail_bound,
                            py::arg("diverging") = e.diverging);
        },
        py::arg("operator"), py::arg("x"), py::arg("t"), py::arg("xi"), py::arg("tau"), py::arg("order") = 3);

    m.def(
        "mean_value",
        [](const std::string& op_spec, const std::function<double(const Eigen::VectorXd&, double)>& u,
           const std::function<double(const Eigen::VectorXd&, double)>& f, const Eigen::VectorXd& xi, double tau,
           double r, int m_dim, int samples, std::uint64_t seed, bool unbounded) {
            auto op = operator_of(op_spec);
            auto K = operator_kernel(op);
            MeanValueConfig cfg;
            cfg.m = m_dim;
            cfg.samples = samples;
            cfg.seed = seed;
            auto rep = unbounded ? unbounded_mean_value_evaluate(op, K, wrap(u), wrap(f), {xi, tau}, r, cfg)
                                 : mean_value_evaluate(op, K, wrap(u), wrap(f), {xi, tau}, r, cfg);
            return py::dict(py::arg("u_zeta") = rep.u_zeta, py::arg("rhs") = rep.rhs, py::arg("sigma") = rep.sigma,
                            py::arg("membership_error") = rep.membership_error, py::arg("residual") = rep.residual,
                            py::arg("samples") = rep.samples, py::arg("members") = rep.members,
                            py::arg("w_negative") = rep.w_negative);
        },
        py::arg("operator"), py::arg("u"), py::arg("f") = nullptr, py::arg("xi"), py::arg("tau") = 0.0,
        py::arg("r") = 0.5, py::arg("m") = 4, py::arg("samples") = 20000, py::arg("seed") = 1,
        py::arg("unbounded") = false);

    m.def(
        "harnack_chain",
        [](const std::string& g, const Eigen::VectorXd& x_plus, double t_plus, const Eigen::VectorXd& x_minus,
           double t_minus, double epsilon1, double theta1, double C_P) {
            ChainConfig cfg;
            cfg.constants.epsilon1 = epsilon1;
            cfg.constants.theta1 = theta1;
            cfg.constants.C_P = C_P;
            auto ch = harnack_chain(group_of(g), {x_plus, t_plus}, {x_minus, t_minus}, cfg);
            std::vector<Eigen::VectorXd> xs;
            std::vector<double> ts;
            for (const auto& p : ch.points) {
                xs.push_back(p.x);
                ts.push_back(p.t);
            }
            return py::dict(py::arg("m") = ch.m, py::arg("r") = ch.r, py::arg("d") = ch.d,
                            py::arg("m_primam") = ch.m_primam, py::arg("m_time") = ch.m_time,
                            py::arg("bound") = ch.bound, py::arg("x") = xs, py::arg("t") = ts,
                            py::arg("gaps") = ch.gaps);
        },
        py::arg("group"), py::arg("x_plus"), py::arg("t_plus"), py::arg("x_minus"), py::arg("t_minus"),
        py::arg("epsilon1") = 0.25, py::arg("theta1") = 0.5, py::arg("C_P") = 2.0);

    m.def(
        "acceptance",
        [](const std::vector<int>& only) {
            py::list out;
            for (const auto& r : run_acceptance(only))
                out.append(py::dict(py::arg("id") = r.id, py::arg("name") = r.name, py::arg("pass") = r.pass,
                                    py::arg("detail") = r.detail, py::arg("seconds") = r.seconds));
            return out;
        },
        py::arg("only") = std::vector<int>{});

    m.def("table_directory", &table_directory);
}
