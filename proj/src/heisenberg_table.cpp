#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "carnot/errors.hpp"
#include "carnot/kernels.hpp"

namespace carnot {

namespace {

constexpr const char* kMagic = "CARNOT-KTAB-1";

struct Grid {
    int ns = 0, nw = 0;
    double hs = 0, hw = 0;
    std::vector<double> rho, z;   // node coordinates, size ns+1 / nw+1
    std::vector<double> V, W;     // cell measures for the unknowns
    std::vector<double> Tr, Tz;   // face transmissibilities, Tr[i] between i and i+1
};

Grid make_grid(const HeisenbergTableConfig& c, int refine) {
    Grid g;
    g.ns = c.n_rho * refine;
    g.nw = c.n_z * refine;
    g.hs = std::asinh(c.rho_max / c.rho_scale) / g.ns;
    g.hw = std::asinh(c.z_max / c.z_scale) / g.nw;
    auto rho = [&](double s) { return c.rho_scale * std::sinh(s); };
    auto zz = [&](double w) { return c.z_scale * std::sinh(w); };
    g.rho.resize(g.ns + 1);
    g.z.resize(g.nw + 1);
    for (int i = 0; i <= g.ns; ++i) g.rho[i] = rho(i * g.hs);
    for (int j = 0; j <= g.nw; ++j) g.z[j] = zz(j * g.hw);
    g.V.resize(g.ns);
    g.Tr.resize(g.ns);
    for (int i = 0; i < g.ns; ++i) {
        double rp = rho((i + 0.5) * g.hs), rm = i == 0 ? 0.0 : rho((i - 0.5) * g.hs);
        g.V[i] = 0.5 * (rp * rp - rm * rm);
        g.Tr[i] = rp / (g.rho[i + 1] - g.rho[i]);
    }
    g.W.resize(g.nw);
    g.Tz.resize(g.nw);
    for (int j = 0; j < g.nw; ++j) {
        double zp = zz((j + 0.5) * g.hw), zm = j == 0 ? 0.0 : zz((j - 0.5) * g.hw);
        g.W[j] = zp - zm;
        g.Tz[j] = 1.0 / (g.z[j + 1] - g.z[j]);
    }
    return g;
}

// Solves (I - a L) u = rhs for a 1-D conservative diffusion L with zero flux at 0 and u = 0 past the end.
void implicit_solve(int n, const double* T, const double* vol, double coef, double a, double* u,
                    std::vector<double>& cp, std::vector<double>& dp) {
    cp.resize(n);
    dp.resize(n);
    for (int i = 0; i < n; ++i) {
        double tl = i > 0 ? T[i - 1] : 0.0, tr = T[i];
        double f = a * coef / vol[i];
        double lo = -f * tl, di = 1.0 + f * (tl + tr), up = -f * tr;
        if (i == 0) {
            cp[0] = up / di;
            dp[0] = u[0] / di;
        } else {
            double m = di - lo * cp[i - 1];
            cp[i] = up / m;
            dp[i] = (u[i] - lo * dp[i - 1]) / m;
        }
    }
    u[n - 1] = dp[n - 1];
    for (int i = n - 2; i >= 0; --i) u[i] = dp[i] - cp[i] * u[i + 1];
}

// u <- (I + a L) u
void explicit_apply(int n, const double* T, const double* vol, double coef, double a, double* u,
                    std::vector<double>& tmp) {
    tmp.assign(u, u + n);
    for (int i = 0; i < n; ++i) {
        double fl = i > 0 ? T[i - 1] * (tmp[i - 1] - tmp[i]) : 0.0;
        double fr = T[i] * ((i + 1 < n ? tmp[i + 1] : 0.0) - tmp[i]);
        u[i] = tmp[i] + a * coef * (fl + fr) / vol[i];
    }
}

struct Solver {
    const Grid& g;
    std::vector<double> F;  // ns x nw
    std::vector<double> col, cp, dp, tmp;

    explicit Solver(const Grid& gr) : g(gr), F(static_cast<std::size_t>(gr.ns) * gr.nw, 0.0) {}

    void rho_step(double dt, double theta) {
        col.resize(g.ns);
        for (int j = 0; j < g.nw; ++j) {
            for (int i = 0; i < g.ns; ++i) col[i] = F[static_cast<std::size_t>(i) * g.nw + j];
            if (theta < 1.0) explicit_apply(g.ns, g.Tr.data(), g.V.data(), 1.0, (1.0 - theta) * dt, col.data(), tmp);
            implicit_solve(g.ns, g.Tr.data(), g.V.data(), 1.0, theta * dt, col.data(), cp, dp);
            for (int i = 0; i < g.ns; ++i) F[static_cast<std::size_t>(i) * g.nw + j] = col[i];
        }
    }

    void z_step(double dt, double theta) {
        for (int i = 0; i < g.ns; ++i) {
            double coef = 0.25 * g.rho[i] * g.rho[i];
            if (coef == 0.0) continue;
            double* row = &F[static_cast<std::size_t>(i) * g.nw];
            if (theta < 1.0) explicit_apply(g.nw, g.Tz.data(), g.W.data(), coef, (1.0 - theta) * dt, row, tmp);
            implicit_solve(g.nw, g.Tz.data(), g.W.data(), coef, theta * dt, row, cp, dp);
        }
    }

    void strang(double dt, double theta) {
        rho_step(0.5 * dt, theta);
        z_step(dt, theta);
        rho_step(0.5 * dt, theta);
    }

    double mass() const {
        double m = 0.0;
        for (int i = 0; i < g.ns; ++i)
            for (int j = 0; j < g.nw; ++j) m += g.V[i] * g.W[j] * F[static_cast<std::size_t>(i) * g.nw + j];
        return 4.0 * std::numbers::pi * m;
    }

    void advance(double ta, double tb, double growth, bool damp_start) {
        int n = std::max(1, static_cast<int>(std::ceil(std::log(tb / ta) / std::log1p(growth))));
        double q = std::pow(tb / ta, 1.0 / n), t = ta;
        for (int k = 0; k < n; ++k) {
            double dt = t * (q - 1.0);
            if (damp_start && k < 2) {
                for (int r = 0; r < 4; ++r) strang(0.25 * dt, 1.0);
            } else {
                strang(dt, 0.5);
            }
            t *= q;
        }
    }
};

// Runs the evolution from the moment-matched initial datum; returns snapshots at T/2 and T
// on the full node grid (ns+1) x (nw+1) including the zero boundary.
std::pair<std::vector<double>, std::vector<double>> run(const HeisenbergTableConfig& c, int refine) {
    Grid g = make_grid(c, refine);
    Solver s(g);
    const double t0 = c.t0;
    // Exact horizontal Gaussian marginal; vertical Gaussian with the exact second moment t0^2.
    for (int i = 0; i < g.ns; ++i)
        for (int j = 0; j < g.nw; ++j) {
            double r = g.rho[i], z = g.z[j];
            s.F[static_cast<std::size_t>(i) * g.nw + j] =
                std::exp(-r * r / (4.0 * t0)) / (4.0 * std::numbers::pi * t0) *
                std::exp(-0.5 * z * z / (t0 * t0)) / (std::sqrt(2.0 * std::numbers::pi) * t0);
        }
    double m0 = s.mass();
    for (double& v : s.F) v /= m0;
    const double growth = c.step_growth / refine;
    auto full = [&] {
        std::vector<double> out(static_cast<std::size_t>(g.ns + 1) * (g.nw + 1), 0.0);
        for (int i = 0; i < g.ns; ++i)
            for (int j = 0; j < g.nw; ++j)
                out[static_cast<std::size_t>(i) * (g.nw + 1) + j] = s.F[static_cast<std::size_t>(i) * g.nw + j];
        return out;
    };
    s.advance(t0, 0.5 * c.T, growth, true);
    auto half = full();
    s.advance(0.5 * c.T, c.T, growth, false);
    return {half, full()};
}

std::vector<double> richardson(const std::vector<double>& coarse, const std::vector<double>& fine, int nr, int nz,
                               double& max_diff) {
    std::vector<double> out(coarse.size());
    max_diff = 0.0;
    const int fz = 2 * nz + 1;
    for (int i = 0; i <= nr; ++i)
        for (int j = 0; j <= nz; ++j) {
            double c = coarse[static_cast<std::size_t>(i) * (nz + 1) + j];
            double f = fine[static_cast<std::size_t>(2 * i) * fz + 2 * j];
            out[static_cast<std::size_t>(i) * (nz + 1) + j] = (4.0 * f - c) / 3.0;
            max_diff = std::max(max_diff, std::abs(f - c));
        }
    return out;
}

double catmull_rom(double p0, double p1, double p2, double p3, double u) {
    return p1 + 0.5 * u * (p2 - p0 + u * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + u * (3.0 * (p1 - p2) + p3 - p0)));
}

double interp2(const std::vector<double>& d, int nr, int nz, double hs, double hw, double s, double w) {
    double fs = s / hs, fw = w / hw;
    int i = static_cast<int>(std::floor(fs)), j = static_cast<int>(std::floor(fw));
    if (i >= nr || j >= nz) return 0.0;
    double u = fs - i, v = fw - j;
    auto at = [&](int a, int b) {
        a = std::abs(a);  // even reflection through the axis and the plane z = 0
        b = std::abs(b);
        if (a > nr || b > nz) return 0.0;
        return d[static_cast<std::size_t>(a) * (nz + 1) + b];
    };
    double r[4];
    for (int k = 0; k < 4; ++k)
        r[k] = catmull_rom(at(i - 1 + k, j - 1), at(i - 1 + k, j), at(i - 1 + k, j + 1), at(i - 1 + k, j + 2), v);
    return catmull_rom(r[0], r[1], r[2], r[3], u);
}

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::string HeisenbergTableConfig::key() const {
    std::ostringstream os;
    os << "heisenberg1_T" << T << "_n" << n_rho << "x" << n_z << "_R" << rho_max << "_Z" << z_max << "_t0" << t0
       << "_g" << step_growth << ".ktab";
    return os.str();
}

nlohmann::json HeisenbergTableConfig::to_json() const {
    return {{"n_rho", n_rho},         {"n_z", n_z},     {"rho_max", rho_max}, {"z_max", z_max},
            {"rho_scale", rho_scale}, {"z_scale", z_scale}, {"T", T},         {"t0", t0},
            {"step_growth", step_growth}};
}

HeisenbergKernelTable HeisenbergKernelTable::bake(const HeisenbergTableConfig& cfg) {
    if (cfg.n_rho < 8 || cfg.n_z < 8) throw DomainError("oracle grid too small");
    if (!(cfg.T > 0.0) || !(cfg.t0 > 0.0) || cfg.t0 >= 0.5 * cfg.T) throw DomainError("need 0 < t0 < T/2");
    const std::size_t fine_cells = static_cast<std::size_t>(2 * cfg.n_rho + 1) * (2 * cfg.n_z + 1);
    const std::size_t need = fine_cells * sizeof(double) * 6;
    if (need > cfg.memory_budget) {
        double f = std::sqrt(static_cast<double>(cfg.memory_budget) / need);
        throw DomainError("oracle grid needs " + std::to_string(need >> 20) + " MiB, over budget; try n_rho=" +
                          std::to_string(static_cast<int>(cfg.n_rho * f)) +
                          " n_z=" + std::to_string(static_cast<int>(cfg.n_z * f)));
    }
    auto [half_c, end_c] = run(cfg, 1);
    auto [half_f, end_f] = run(cfg, 2);

    HeisenbergKernelTable t;
    t.cfg_ = cfg;
    double diff_end = 0.0, diff_half = 0.0;
    t.data_ = richardson(end_c, end_f, cfg.n_rho, cfg.n_z, diff_end);
    auto half = richardson(half_c, half_f, cfg.n_rho, cfg.n_z, diff_half);
    t.finalize();
    t.richardson_ = diff_end / t.max_value_;

    // Parabolic scaling: the independently evolved T/2 profile against the rescaled T profile.
    double num = 0.0, den = 0.0;
    for (int i = 0; i <= cfg.n_rho; ++i)
        for (int j = 0; j <= cfg.n_z; ++j) {
            double rho = cfg.rho_scale * std::sinh(i * t.hs_), z = cfg.z_scale * std::sinh(j * t.hw_);
            double h = half[static_cast<std::size_t>(i) * (cfg.n_z + 1) + j];
            double pred = 4.0 * t.profile(std::sqrt(2.0) * rho, 2.0 * z);
            num = std::max(num, std::abs(h - pred));
            den = std::max(den, std::abs(h));
        }
    t.scaling_residual_ = num / den;
    // The scaling mismatch also sees the start-up and interpolation error, which Richardson cannot.
    t.err_bound_ = std::max(diff_end / 3.0, 0.25 * num);
    return t;
}

void HeisenbergKernelTable::finalize() {
    hs_ = std::asinh(cfg_.rho_max / cfg_.rho_scale) / cfg_.n_rho;
    hw_ = std::asinh(cfg_.z_max / cfg_.z_scale) / cfg_.n_z;
    max_value_ = 0.0;
    for (double v : data_) max_value_ = std::max(max_value_, std::abs(v));
    edge_max_ = 0.0;
    for (int i = 0; i <= cfg_.n_rho; ++i)
        for (int j = 0; j <= cfg_.n_z; ++j)
            if (i == cfg_.n_rho || j == cfg_.n_z)
                edge_max_ = std::max(edge_max_, std::abs(data_[static_cast<std::size_t>(i) * (cfg_.n_z + 1) + j]));
    // Trapezoid mass in the stretched coordinates; independent of the solver's finite-volume weights.
    double m = 0.0;
    for (int i = 0; i <= cfg_.n_rho; ++i) {
        double s = i * hs_;
        double wr = (i == 0 || i == cfg_.n_rho) ? 0.5 : 1.0;
        double jr = cfg_.rho_scale * std::sinh(s) * cfg_.rho_scale * std::cosh(s);
        for (int j = 0; j <= cfg_.n_z; ++j) {
            double w = j * hw_;
            double wz = (j == 0 || j == cfg_.n_z) ? 0.5 : 1.0;
            m += wr * wz * jr * cfg_.z_scale * std::cosh(w) * data_[static_cast<std::size_t>(i) * (cfg_.n_z + 1) + j];
        }
    }
    mass_ = 4.0 * std::numbers::pi * m * hs_ * hw_;
    checksum_ = fnv1a(data_.data(), data_.size() * sizeof(double));
}

double HeisenbergKernelTable::profile(double rho, double z) const {
    double s = std::asinh(std::abs(rho) / cfg_.rho_scale), w = std::asinh(std::abs(z) / cfg_.z_scale);
    return interp2(data_, cfg_.n_rho, cfg_.n_z, hs_, hw_, s, w);
}

double HeisenbergKernelTable::stencil_max(double rho, double z) const {
    const int i = static_cast<int>(std::floor(std::asinh(std::abs(rho) / cfg_.rho_scale) / hs_));
    const int j = static_cast<int>(std::floor(std::asinh(std::abs(z) / cfg_.z_scale) / hw_));
    if (i >= cfg_.n_rho || j >= cfg_.n_z) return edge_max_;
    double m = 0.0;
    for (int a = i - 1; a <= i + 2; ++a)
        for (int b = j - 1; b <= j + 2; ++b) {
            const int aa = std::min(std::abs(a), cfg_.n_rho), bb = std::min(std::abs(b), cfg_.n_z);
            m = std::max(m, std::abs(data_[static_cast<std::size_t>(aa) * (cfg_.n_z + 1) + bb]));
        }
    return m;
}

KernelEstimate HeisenbergKernelTable::eval(const Point& x, double t) const {
    if (x.size() != 3) throw DomainError("Heisenberg kernel needs a point in R^3");
    KernelEstimate k;
    if (t <= 0.0) return k;
    const double lam = cfg_.T / t;
    const double rho = std::hypot(x[0], x[1]) * std::sqrt(lam), z = std::abs(x[2]) * lam;
    k.in_range = rho <= cfg_.rho_max && z <= cfg_.z_max;
    k.value = lam * lam * profile(rho, z);
    // the certified error is relative to the peak; it is applied to the local magnitude
    k.quad_error = lam * lam * err_bound_ / max_value_ * stencil_max(rho, z);
    return k;
}

void HeisenbergKernelTable::save(const std::string& path) const {
    nlohmann::json h = {{"magic", kMagic},
                        {"group", "heisenberg1"},
                        {"dims", {rows(), cols()}},
                        {"spacing", {hs_, hw_}},
                        {"T", cfg_.T},
                        {"config", cfg_.to_json()},
                        {"mass", mass_},
                        {"richardson_agreement", richardson_},
                        {"scaling_residual", scaling_residual_},
                        {"error_bound", err_bound_},
                        {"checksum", std::to_string(checksum_)}};
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw DomainError("cannot write oracle table to " + path);
        os << h.dump() << '\n';
        os.write(reinterpret_cast<const char*>(data_.data()), static_cast<std::streamsize>(data_.size() * sizeof(double)));
    }
    std::filesystem::rename(tmp, path);
}

HeisenbergKernelTable HeisenbergKernelTable::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DomainError("cannot open oracle table " + path);
    std::string line;
    std::getline(is, line);
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DomainError("corrupt oracle table header in " + path + ": " + e.what());
    }
    if (h.value("magic", "") != kMagic) throw DomainError("not an oracle table: " + path);
    HeisenbergKernelTable t;
    const auto& c = h.at("config");
    t.cfg_.n_rho = c.at("n_rho");
    t.cfg_.n_z = c.at("n_z");
    t.cfg_.rho_max = c.at("rho_max");
    t.cfg_.z_max = c.at("z_max");
    t.cfg_.rho_scale = c.at("rho_scale");
    t.cfg_.z_scale = c.at("z_scale");
    t.cfg_.T = c.at("T");
    t.cfg_.t0 = c.at("t0");
    t.cfg_.step_growth = c.at("step_growth");
    t.data_.resize(static_cast<std::size_t>(t.rows()) * t.cols());
    is.read(reinterpret_cast<char*>(t.data_.data()), static_cast<std::streamsize>(t.data_.size() * sizeof(double)));
    if (!is) throw DomainError("truncated oracle table " + path);
    t.finalize();
    if (std::to_string(t.checksum_) != h.at("checksum").get<std::string>())
        throw DomainError("oracle table checksum mismatch in " + path);
    t.richardson_ = h.at("richardson_agreement");
    t.scaling_residual_ = h.at("scaling_residual");
    t.err_bound_ = h.at("error_bound");
    return t;
}

std::string table_directory() {
    const char* env = std::getenv("CARNOT_TABLE_DIR");
    return env && *env ? std::string(env) : std::string("carnot_tables");
}

const HeisenbergKernelTable& heisenberg_table(const HeisenbergTableConfig& cfg, bool allow_bake) {
    static std::map<std::string, HeisenbergKernelTable> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    const std::string key = cfg.key();
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const std::string path = (std::filesystem::path(table_directory()) / key).string();
    if (std::filesystem::exists(path)) return cache.emplace(key, HeisenbergKernelTable::load(path)).first->second;
    if (!allow_bake) throw DomainError("no oracle table at " + path + "; run 'carnot kernel bake' first");
    auto t = HeisenbergKernelTable::bake(cfg);
    t.save(path);
    return cache.emplace(key, std::move(t)).first->second;
}

}  // namespace carnot
