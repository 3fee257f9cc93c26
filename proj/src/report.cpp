#include "thinflow/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace thinflow {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw report_error(msg); }

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Two-sided 97.5% t quantiles for 1..30 degrees of freedom; the normal
// quantile beyond.
double t975(int df) {
    static const double table[] = {
        12.706, 4.3027, 3.1824, 2.7764, 2.5706, 2.4469, 2.3646, 2.3060,
        2.2622, 2.2281, 2.2010, 2.1788, 2.1604, 2.1448, 2.1314, 2.1199,
        2.1098, 2.1009, 2.0930, 2.0860, 2.0796, 2.0739, 2.0687, 2.0639,
        2.0595, 2.0555, 2.0518, 2.0484, 2.0452, 2.0423};
    if (df < 1) return 0.0;
    if (df <= 30) return table[df - 1];
    return 1.96;
}

void csv_row(std::string& out, double eps, const std::string& metric, double value,
             double se) {
    out += num(eps);
    out += ',';
    out += metric;
    out += ',';
    out += num(value);
    out += ',';
    out += num(se);
    out += '\n';
}

json slope_to_json(const SlopeFit& f) {
    return json{{"slope", f.slope},
                {"intercept", f.intercept},
                {"stderr", f.stderr_slope},
                {"ci95_half", f.ci95_half},
                {"n", f.n}};
}

SlopeFit slope_from_json(const json& j) {
    SlopeFit f;
    f.slope = j.at("slope").get<double>();
    f.intercept = j.at("intercept").get<double>();
    f.stderr_slope = j.at("stderr").get<double>();
    f.ci95_half = j.at("ci95_half").get<double>();
    f.n = j.at("n").get<int>();
    return f;
}

void series_csv(std::string& out, const std::vector<double>& t,
                const std::vector<double>& energy, const std::vector<double>& enstrophy,
                const std::vector<EnergyLedgerRow>& ledger) {
    out += "t,energy,enstrophy,energy_residual\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        out += num(t[i]);
        out += ',';
        out += num(energy[i]);
        out += ',';
        out += num(enstrophy[i]);
        out += ',';
        out += num(i == 0 ? 0.0 : ledger[i - 1].residual);
        out += '\n';
    }
}

// Reads one component dump into dst through load_component, which already
// validates shape consistency between sidecar and binary.
void load_array3_into(const std::string& path_base, Array3& dst) {
    std::vector<int> shape;
    std::vector<double> vals = load_component(path_base, shape);
    if (shape != std::vector<int>{dst.n0, dst.n1, dst.n2})
        fail("dump shape mismatch at " + path_base);
    std::size_t q = 0;
    for (int k = 0; k < dst.n2; ++k)
        for (int j = 0; j < dst.n1; ++j)
            for (int i = 0; i < dst.n0; ++i) dst(i, j, k) = vals[q++];
}

void load_array2_into(const std::string& path_base, Array2& dst) {
    std::vector<int> shape;
    std::vector<double> vals = load_component(path_base, shape);
    if (shape != std::vector<int>{dst.n0, dst.n1})
        fail("dump shape mismatch at " + path_base);
    std::size_t q = 0;
    for (int j = 0; j < dst.n1; ++j)
        for (int i = 0; i < dst.n0; ++i) dst(i, j) = vals[q++];
}

} // namespace

SlopeFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    SlopeFit f;
    if (x.size() != y.size()) fail("fit_line: length mismatch");
    f.n = static_cast<int>(x.size());
    if (f.n < 2) return f;
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < f.n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= f.n;
    my /= f.n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < f.n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) fail("fit_line: degenerate abscissae");
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (f.n > 2) {
        double ssr = 0.0;
        for (int i = 0; i < f.n; ++i) {
            double r = y[i] - (f.intercept + f.slope * x[i]);
            ssr += r * r;
        }
        f.stderr_slope = std::sqrt(ssr / (f.n - 2) / sxx);
        f.ci95_half = t975(f.n - 2) * f.stderr_slope;
    }
    return f;
}

std::string report_to_json(const ConvergenceReport& r) {
    json cells = json::array();
    for (const EpsCell& c : r.cells) {
        json moments = json::array();
        for (const MomentRow& m : c.moments)
            moments.push_back(json{{"p", m.p},
                                   {"sup_moment", m.sup_moment},
                                   {"sup_moment_se", m.sup_moment_se},
                                   {"grad_moment", m.grad_moment},
                                   {"grad_moment_se", m.grad_moment_se},
                                   {"sup_scaled", m.sup_scaled},
                                   {"grad_scaled", m.grad_scaled}});
        cells.push_back(json{{"eps", c.eps},
                             {"n_samples", c.n_samples},
                             {"err_l2", c.err_l2},
                             {"err_l2_se", c.err_l2_se},
                             {"alpha_sup", c.alpha_sup},
                             {"alpha_sup_se", c.alpha_sup_se},
                             {"alpha_energy", c.alpha_energy},
                             {"alpha_energy_se", c.alpha_energy_se},
                             {"u_energy", c.u_energy},
                             {"u_energy_se", c.u_energy_se},
                             {"beta_sup", c.beta_sup},
                             {"beta_sup_se", c.beta_sup_se},
                             {"beta_grad", c.beta_grad},
                             {"beta_grad_se", c.beta_grad_se},
                             {"beta_sup_over_eps", c.beta_sup_over_eps},
                             {"beta_grad_over_eps", c.beta_grad_over_eps},
                             {"beta_sup_p4", c.beta_sup_p4},
                             {"beta_sup_p4_se", c.beta_sup_p4_se},
                             {"beta_sup_p4_scaled", c.beta_sup_p4_scaled},
                             {"moments", std::move(moments)},
                             {"energy_residual_max", c.energy_residual_max},
                             {"div_inf_max", c.div_inf_max},
                             {"modulus", c.modulus}});
    }
    json root{{"schema_version", r.schema_version},
              {"config", json::parse(config_to_json(r.config))},
              {"cells", std::move(cells)},
              {"deltas", r.deltas},
              {"err_slope", slope_to_json(r.err_slope)},
              {"beta2_slope", slope_to_json(r.beta2_slope)},
              {"beta4_slope", slope_to_json(r.beta4_slope)},
              {"alpha_trend", slope_to_json(r.alpha_trend)},
              {"energy_bound", r.energy_bound},
              {"energy_residual_max_2d", r.energy_residual_max_2d},
              {"err_monotone", r.err_monotone},
              {"pass_err_slope", r.pass_err_slope},
              {"pass_beta2", r.pass_beta2},
              {"pass_beta4", r.pass_beta4},
              {"energy_pathwise_pass", r.energy_pathwise_pass},
              {"alpha_no_growth", r.alpha_no_growth},
              {"moment_p4_no_growth", r.moment_p4_no_growth},
              {"modulus_monotone", r.modulus_monotone},
              {"sample_errors", r.sample_errors}};
    return root.dump(2) + "\n";
}

ConvergenceReport report_from_json(const std::string& text) {
    json root = json::parse(text, nullptr, false);
    if (root.is_discarded()) fail("malformed report json");
    if (root.at("schema_version").get<int>() != 1) fail("unsupported report schema");
    ConvergenceReport r;
    r.config = parse_config_text(root.at("config").dump(), "json");
    for (const json& jc : root.at("cells")) {
        EpsCell c;
        c.eps = jc.at("eps").get<double>();
        c.n_samples = jc.at("n_samples").get<int>();
        c.err_l2 = jc.at("err_l2").get<double>();
        c.err_l2_se = jc.at("err_l2_se").get<double>();
        c.alpha_sup = jc.at("alpha_sup").get<double>();
        c.alpha_sup_se = jc.at("alpha_sup_se").get<double>();
        c.alpha_energy = jc.at("alpha_energy").get<double>();
        c.alpha_energy_se = jc.at("alpha_energy_se").get<double>();
        c.u_energy = jc.at("u_energy").get<double>();
        c.u_energy_se = jc.at("u_energy_se").get<double>();
        c.beta_sup = jc.at("beta_sup").get<double>();
        c.beta_sup_se = jc.at("beta_sup_se").get<double>();
        c.beta_grad = jc.at("beta_grad").get<double>();
        c.beta_grad_se = jc.at("beta_grad_se").get<double>();
        c.beta_sup_over_eps = jc.at("beta_sup_over_eps").get<double>();
        c.beta_grad_over_eps = jc.at("beta_grad_over_eps").get<double>();
        c.beta_sup_p4 = jc.at("beta_sup_p4").get<double>();
        c.beta_sup_p4_se = jc.at("beta_sup_p4_se").get<double>();
        c.beta_sup_p4_scaled = jc.at("beta_sup_p4_scaled").get<double>();
        for (const json& jm : jc.at("moments")) {
            MomentRow m;
            m.p = jm.at("p").get<int>();
            m.sup_moment = jm.at("sup_moment").get<double>();
            m.sup_moment_se = jm.at("sup_moment_se").get<double>();
            m.grad_moment = jm.at("grad_moment").get<double>();
            m.grad_moment_se = jm.at("grad_moment_se").get<double>();
            m.sup_scaled = jm.at("sup_scaled").get<double>();
            m.grad_scaled = jm.at("grad_scaled").get<double>();
            c.moments.push_back(m);
        }
        c.energy_residual_max = jc.at("energy_residual_max").get<double>();
        c.div_inf_max = jc.at("div_inf_max").get<double>();
        c.modulus = jc.at("modulus").get<std::vector<double>>();
        r.cells.push_back(std::move(c));
    }
    r.deltas = root.at("deltas").get<std::vector<double>>();
    r.err_slope = slope_from_json(root.at("err_slope"));
    r.beta2_slope = slope_from_json(root.at("beta2_slope"));
    r.beta4_slope = slope_from_json(root.at("beta4_slope"));
    r.alpha_trend = slope_from_json(root.at("alpha_trend"));
    r.energy_bound = root.at("energy_bound").get<double>();
    r.energy_residual_max_2d = root.at("energy_residual_max_2d").get<double>();
    r.err_monotone = root.at("err_monotone").get<bool>();
    r.pass_err_slope = root.at("pass_err_slope").get<bool>();
    r.pass_beta2 = root.at("pass_beta2").get<bool>();
    r.pass_beta4 = root.at("pass_beta4").get<bool>();
    r.energy_pathwise_pass = root.at("energy_pathwise_pass").get<bool>();
    r.alpha_no_growth = root.at("alpha_no_growth").get<bool>();
    r.moment_p4_no_growth = root.at("moment_p4_no_growth").get<bool>();
    r.modulus_monotone = root.at("modulus_monotone").get<bool>();
    r.sample_errors = root.at("sample_errors").get<std::vector<std::string>>();
    return r;
}

std::string report_to_csv(const ConvergenceReport& r) {
    std::string out = "eps,metric,value,stderr\n";
    csv_row(out, 0, "schema_version", r.schema_version, 0);
    for (const EpsCell& c : r.cells) {
        csv_row(out, c.eps, "n_samples", c.n_samples, 0);
        csv_row(out, c.eps, "err_l2", c.err_l2, c.err_l2_se);
        csv_row(out, c.eps, "alpha_sup", c.alpha_sup, c.alpha_sup_se);
        csv_row(out, c.eps, "alpha_energy", c.alpha_energy, c.alpha_energy_se);
        csv_row(out, c.eps, "u_energy", c.u_energy, c.u_energy_se);
        csv_row(out, c.eps, "beta_sup", c.beta_sup, c.beta_sup_se);
        csv_row(out, c.eps, "beta_sup_over_eps", c.beta_sup_over_eps, 0);
        csv_row(out, c.eps, "beta_grad", c.beta_grad, c.beta_grad_se);
        csv_row(out, c.eps, "beta_grad_over_eps", c.beta_grad_over_eps, 0);
        csv_row(out, c.eps, "beta_sup_p4", c.beta_sup_p4, c.beta_sup_p4_se);
        csv_row(out, c.eps, "beta_sup_p4_scaled", c.beta_sup_p4_scaled, 0);
        for (const MomentRow& m : c.moments) {
            std::string tag = "_p" + std::to_string(m.p);
            csv_row(out, c.eps, "moment_sup" + tag, m.sup_moment, m.sup_moment_se);
            csv_row(out, c.eps, "moment_sup" + tag + "_scaled", m.sup_scaled, 0);
            csv_row(out, c.eps, "moment_grad" + tag, m.grad_moment, m.grad_moment_se);
            csv_row(out, c.eps, "moment_grad" + tag + "_scaled", m.grad_scaled, 0);
        }
        csv_row(out, c.eps, "energy_residual_max", c.energy_residual_max, 0);
        csv_row(out, c.eps, "div_inf_max", c.div_inf_max, 0);
        for (std::size_t d = 0; d < c.modulus.size(); ++d)
            csv_row(out, c.eps,
                    "modulus_" + (d < r.deltas.size() ? num(r.deltas[d]) : "?"),
                    c.modulus[d], 0);
    }
    csv_row(out, 0, "energy_bound", r.energy_bound, 0);
    csv_row(out, 0, "energy_residual_max_2d", r.energy_residual_max_2d, 0);
    csv_row(out, 0, "err_slope", r.err_slope.slope, r.err_slope.stderr_slope);
    csv_row(out, 0, "err_slope_ci95", r.err_slope.ci95_half, 0);
    csv_row(out, 0, "beta2_slope", r.beta2_slope.slope, r.beta2_slope.stderr_slope);
    csv_row(out, 0, "beta4_slope", r.beta4_slope.slope, r.beta4_slope.stderr_slope);
    csv_row(out, 0, "alpha_trend_slope", r.alpha_trend.slope, r.alpha_trend.stderr_slope);
    csv_row(out, 0, "err_monotone", r.err_monotone, 0);
    csv_row(out, 0, "pass_err_slope", r.pass_err_slope, 0);
    csv_row(out, 0, "pass_beta2", r.pass_beta2, 0);
    csv_row(out, 0, "pass_beta4", r.pass_beta4, 0);
    csv_row(out, 0, "energy_pathwise_pass", r.energy_pathwise_pass, 0);
    csv_row(out, 0, "alpha_no_growth", r.alpha_no_growth, 0);
    csv_row(out, 0, "moment_p4_no_growth", r.moment_p4_no_growth, 0);
    csv_row(out, 0, "modulus_monotone", r.modulus_monotone, 0);
    csv_row(out, 0, "n_sample_errors", static_cast<double>(r.sample_errors.size()), 0);
    return out;
}

std::string trajectory_csv(const Trajectory3D& tr) {
    std::string out;
    series_csv(out, tr.times, tr.energy, tr.enstrophy, tr.ledger);
    return out;
}

std::string trajectory_csv(const Trajectory2D& tr) {
    std::string out;
    series_csv(out, tr.times, tr.energy, tr.enstrophy, tr.ledger);
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write '" + path + "'");
    out << content;
    if (!out) fail("write failed for '" + path + "'");
}

VField3D load_vfield3(const std::string& dir, const std::string& name, const Grid3D& g) {
    VField3D u = make_vfield3(g);
    load_array3_into(dir + "/" + name + ".u1", u.u);
    load_array3_into(dir + "/" + name + ".u2", u.v);
    load_array3_into(dir + "/" + name + ".u3", u.w);
    apply_bc(u);
    return u;
}

VField2D load_vfield2(const std::string& dir, const std::string& name, const Grid2D& g) {
    VField2D u = make_vfield2(g);
    load_array2_into(dir + "/" + name + ".u1", u.u);
    load_array2_into(dir + "/" + name + ".u2", u.v);
    apply_bc(u);
    return u;
}

} // namespace thinflow
